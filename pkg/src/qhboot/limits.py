"""Gaussian limit processes on finite grids and the limit law of plug-in errors.

Two covariance structures are provided: the F-Brownian bridge of the
i.i.d. case, and the long-run covariance of a Gaussian AR(1) sequence,
which adds lagged indicator cross-covariances to the bridge term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import linalg, special

from qhboot.errors import Divergent, IllConditioned, NotApplicable
from qhboot.functionals import (
    Degenerate,
    DistortionFunction,
    ModelCDF,
    Normal,
    StudentT,
    derivative_piece_integrals,
)

__all__ = [
    "GridGaussian",
    "brownian_bridge_cov",
    "longrun_cov_ar1",
    "bvn_cdf",
    "bvn_excess",
    "sample_path",
    "quantile_grid",
    "derivative_weights",
    "bridge_kernel",
    "ar1_longrun_kernel",
    "limit_variance_distortion",
]

JITTER_START = 1e-12
JITTER_MAX = 1e-6
EIG_FLOOR = -1e-8


class GridGaussian:
    """Centered Gaussian vector indexed by a grid, with a lazy Cholesky factor.

    ``bridge_u`` (optional) holds ``F(t_i)`` when the covariance is a
    Brownian bridge in the time scale ``u = F(t)``; paths are then drawn from
    independent Brownian increments, which is exact and avoids the
    factorization.
    """

    def __init__(self, grid, cov, bridge_u=None, truncation_bound: float = 0.0):
        t = np.asarray(grid, dtype=float).reshape(-1)
        c = np.array(cov, dtype=float)
        if c.shape != (t.size, t.size):
            raise ValueError("covariance must be m x m for a grid of size m")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.allclose(c, c.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance is not symmetric")
        c = 0.5 * (c + c.T)
        t.setflags(write=False)
        c.setflags(write=False)
        self.grid = t
        self.cov = c
        self.bridge_u = None if bridge_u is None else np.asarray(bridge_u, dtype=float)
        self.truncation_bound = float(truncation_bound)
        self.jitter = None

    def __len__(self):
        return self.grid.size

    @cached_property
    def active(self) -> np.ndarray:
        """Indices with positive variance; the rest are identically zero."""
        return np.flatnonzero(np.diag(self.cov) > 0)

    @cached_property
    def factor(self) -> np.ndarray:
        """Lower-triangular ``L`` on the active indices with ``L L^T ~ cov``."""
        idx = self.active
        c = self.cov[np.ix_(idx, idx)]
        if idx.size == 0:
            self.jitter = 0.0
            return np.zeros((0, 0))
        lam_min = float(linalg.eigvalsh(c, subset_by_index=[0, 0])[0])
        if lam_min < EIG_FLOOR:
            raise IllConditioned(f"covariance has eigenvalue {lam_min:.3g} below {EIG_FLOOR:g}")
        jitter = 0.0
        eye = np.eye(idx.size)
        while True:
            try:
                L = linalg.cholesky(c + jitter * eye, lower=True)
                self.jitter = jitter
                return L
            except linalg.LinAlgError:
                jitter = JITTER_START if jitter == 0.0 else jitter * 10
                if jitter > JITTER_MAX * (1 + 1e-9):
                    raise IllConditioned("Cholesky failed at the maximal jitter") from None


def brownian_bridge_cov(F: ModelCDF, grid) -> GridGaussian:
    """``Gamma(s, t) = F(s ^ t) (1 - F(s v t))`` on ``grid``."""
    t = np.asarray(grid, dtype=float).reshape(-1)
    u = np.asarray(F.cdf(t), dtype=float)
    cov = np.minimum.outer(u, u) * (1.0 - np.maximum.outer(u, u))
    return GridGaussian(t, cov, bridge_u=u)


# Gauss-Legendre nodes on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def bvn_excess(h, k, r):
    """``Phi_2(h, k; r) - Phi(h) Phi(k)`` for the standard bivariate normal.

    Uses ``(1/2pi) int_0^{asin r} exp(-(h^2 + k^2 - 2hk sin th) / (2 cos^2 th)) dth``
    with composite Gauss-Legendre; the number of panels grows as ``|r| -> 1``.
    """
    h, k, r = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (h, k, r)))
    ra = float(np.max(np.abs(r))) if r.size else 0.0
    if ra >= 1.0:
        raise ValueError("correlation must lie in (-1, 1)")
    panels = 1 if ra <= 0.7 else 4 if ra <= 0.95 else 16 if ra <= 0.995 else 64
    top = np.arcsin(r)
    out = np.zeros(h.shape)
    hh = h * h + k * k
    hk = h * k
    step = 1.0 / panels
    for p in range(panels):
        for x, w in zip(_GL_X, _GL_W):
            th = top * (p + x) * step
            s = np.sin(th)
            out += w * np.exp(-(hh - 2.0 * hk * s) / (2.0 * (1.0 - s * s)))
    return out * top * step / (2.0 * math.pi)


def bvn_cdf(h, k, r):
    """Standard bivariate normal CDF ``P(Z1 <= h, Z2 <= k)``, correlation ``r``."""
    return special.ndtr(h) * special.ndtr(k) + bvn_excess(h, k, r)


def _lag_count(rho: float, K: int) -> int:
    # lags beyond this add less than 1e-18 per entry
    if rho == 0.0:
        return 1
    cut = 1 + math.ceil(math.log(1e-18) / math.log(abs(rho)))
    return max(1, min(K, cut))


def _ar1_lag_sum(z, rho: float, K: int):
    """``sum_{k=2}^{K} excess(z_i, z_j; rho^(k-1))`` and the tail bound."""
    z = np.asarray(z, dtype=float)
    zi, zj = np.meshgrid(z, z, indexing="ij")
    iu = np.triu_indices(z.size)
    a, b = zi[iu], zj[iu]
    total = np.zeros(a.size)
    k_used = _lag_count(rho, K)
    for k in range(2, k_used + 1):
        total += bvn_excess(a, b, rho ** (k - 1))
    out = np.zeros((z.size, z.size))
    out[iu] = total
    out = out + np.triu(out, 1).T
    bound = abs(rho) ** k_used / (2.0 * (1.0 - abs(rho))) if rho != 0.0 else 0.0
    return out, bound


def longrun_cov_ar1(rho: float, grid, K: int = 200) -> GridGaussian:
    """Long-run covariance of the indicator process for a stationary AR(1).

    The marginal is ``Normal(0, 1/(1 - rho^2))``.  Cross-lag terms beyond
    ``K`` are dropped; ``truncation_bound`` bounds the dropped part of each
    entry by ``|rho|^K / (2 (1 - |rho|))``.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError("AR(1) needs |rho| < 1")
    if K < 1:
        raise ValueError("K must be at least 1")
    t = np.asarray(grid, dtype=float).reshape(-1)
    z = t * math.sqrt(1.0 - rho * rho)
    u = special.ndtr(z)
    bridge = np.minimum.outer(u, u) * (1.0 - np.maximum.outer(u, u))
    lag, bound = _ar1_lag_sum(z, rho, K)
    return GridGaussian(t, bridge + 2.0 * lag, truncation_bound=bound)


def sample_path(gg: GridGaussian, rng, size: Optional[int] = None, method: str = "auto") -> np.ndarray:
    """One path (or ``size`` paths as rows) of the grid process."""
    rows = 1 if size is None else int(size)
    m = len(gg)
    if method == "auto":
        method = "bridge" if gg.bridge_u is not None else "cholesky"
    if method == "bridge":
        if gg.bridge_u is None:
            raise ValueError("bridge sampling needs bridge_u")
        u = gg.bridge_u
        du = np.diff(np.concatenate(([0.0], u, [1.0])))
        z = rng.standard_normal((rows, m + 1))
        w = np.cumsum(z * np.sqrt(np.clip(du, 0.0, None)), axis=1)
        out = w[:, :m] - u * w[:, m : m + 1]
    elif method == "cholesky":
        L = gg.factor
        out = np.zeros((rows, m))
        if L.size:
            z = rng.standard_normal((rows, L.shape[0]))
            out[:, gg.active] = z @ L.T
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return out[0] if size is None else out


def quantile_grid(F: ModelCDF, m: int = 201) -> np.ndarray:
    """``F^{-1}(i / (m + 1))`` for ``i = 1..m``."""
    if isinstance(F, Degenerate):
        raise NotApplicable("a degenerate law has no quantile grid")
    p = np.arange(1, m + 1) / (m + 1)
    return np.asarray(F.ppf(p), dtype=float)


def derivative_weights(g: DistortionFunction, F: ModelCDF, grid) -> np.ndarray:
    """Riemann weights ``w_i = int_{cell_i} g'(F(t)) dt`` for a quantile grid.

    Cells are bounded by quantiles at the probability midpoints between
    neighbours; the outer cells stop half a probability step beyond the end
    points.
    """
    t = np.asarray(grid, dtype=float)
    p = np.asarray(F.cdf(t), dtype=float)
    mid = 0.5 * (p[1:] + p[:-1])
    first = p[0] - (mid[0] - p[0]) if p.size > 1 else 0.5 * p[0]
    last = p[-1] + (p[-1] - mid[-1]) if p.size > 1 else 0.5 * (1 + p[-1])
    edges_p = np.concatenate(([max(first, 0.0)], mid, [min(last, 1.0)]))
    edges = np.asarray(F.ppf(edges_p), dtype=float)
    edges[0] = max(edges[0], F.lower) if math.isfinite(edges[0]) else t[0] - (t[1] - t[0])
    edges[-1] = min(edges[-1], F.upper) if math.isfinite(edges[-1]) else t[-1] + (t[-1] - t[-2])
    return derivative_piece_integrals(g, F, edges[:-1], edges[1:])


# covariance kernels Gamma(s, t) for limit_variance_distortion


def bridge_kernel(F: ModelCDF) -> Callable:
    def kernel(s, t):
        us, ut = F.cdf(s), F.cdf(t)
        return np.minimum(us, ut) * (1.0 - np.maximum(us, ut))

    return kernel


def ar1_longrun_kernel(rho: float, K: int = 200) -> Callable:
    c = math.sqrt(1.0 - rho * rho)
    k_used = _lag_count(rho, K)

    def kernel(s, t):
        zs, zt = np.asarray(s) * c, np.asarray(t) * c
        us, ut = special.ndtr(zs), special.ndtr(zt)
        out = np.minimum(us, ut) * (1.0 - np.maximum(us, ut))
        for k in range(2, k_used + 1):
            out = out + 2.0 * bvn_excess(zs, zt, rho ** (k - 1))
        return out

    return kernel


def _check_variance_tails(g: DistortionFunction, F: ModelCDF) -> None:
    # sd of the bridge ~ sqrt(F(1-F)); int t^{-nu/2} needs nu > 2
    if isinstance(F, StudentT) and F.nu <= 2.0:
        right_active = float(g.derivative(1.0)) > 0.0
        if float(g.derivative(0.0)) > 0.0 or right_active:
            raise Divergent("limit variance diverges for this tail")


def limit_variance_distortion(
    g: DistortionFunction,
    F: ModelCDF,
    kernel: Callable,
    panels: int = 8,
    tail: float = 1e-10,
) -> float:
    """``int int g'(F(s)) g'(F(t)) Gamma(s, t) ds dt``.

    The range is cut at the ``tail`` and ``1 - tail`` quantiles and split at
    the kinks of ``g'(F)``; each piece is divided into ``panels`` sub-panels.
    Off-diagonal panel pairs use tensor Gauss-Legendre; on diagonal pairs the
    symmetric integrand is integrated over the triangle ``s < t`` (where the
    kernel is smooth) and doubled.
    """
    if isinstance(F, Degenerate):
        return 0.0
    _check_variance_tails(g, F)
    lo = max(float(F.ppf(tail)), F.lower)
    hi = min(float(F.ppf(1.0 - tail)), F.upper)
    cuts = [lo] + [float(F.ppf(k)) for k in g.kinks] + [hi]
    cuts = sorted(set(c for c in cuts if lo <= c <= hi))
    edges = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        edges.extend(np.linspace(a, b, panels + 1)[:-1])
    edges.append(cuts[-1])
    edges = np.asarray(edges)
    P = edges.size - 1
    # nodes and weights per panel, weight already multiplied by g'(F(s))
    xs = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * _GL_X[None, :]
    ws = (edges[1:] - edges[:-1])[:, None] * _GL_W[None, :]
    ds = np.asarray(g.derivative(F.cdf(xs)), dtype=float)
    wd = ws * ds
    total = 0.0
    # off-diagonal: i < j, counted twice
    S = xs.reshape(-1)
    Wd = wd.reshape(-1)
    panel_of = np.repeat(np.arange(P), _GL_X.size)
    for i in range(P):
        sl = slice(i * _GL_X.size, (i + 1) * _GL_X.size)
        later = panel_of > i
        if np.any(later):
            G = kernel(S[sl][:, None], S[later][None, :])
            total += 2.0 * float(Wd[sl] @ G @ Wd[later])
        # diagonal panel: triangle s < t
        a, b = edges[i], edges[i + 1]
        s = xs[i]
        tt = s[:, None] + (b - s)[:, None] * _GL_X[None, :]
        wt = (b - s)[:, None] * _GL_W[None, :] * np.asarray(g.derivative(F.cdf(tt)), dtype=float)
        G = kernel(np.broadcast_to(s[:, None], tt.shape), tt)
        total += 2.0 * float(np.sum(wd[i][:, None] * wt * G))
    if not math.isfinite(total):
        raise Divergent("limit variance is not finite")
    return total
