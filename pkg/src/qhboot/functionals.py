"""Distortion risk functionals, their derivatives, and V-functionals.

Sign convention: ``f_g(F) = int_{-inf}^0 g(F) dt - int_0^inf (1 - g(F)) dt``,
so the identity distortion gives minus the mean and ``AVaR(alpha)`` gives
minus the average of the lower ``alpha`` tail.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import integrate, stats

from qhboot.errors import Divergent, NonCDF, NotApplicable
from qhboot.stepfn import StepFunction, WeightFunction

__all__ = [
    "DistortionFunction",
    "AVaR",
    "PowerDistortion",
    "PiecewiseLinearDistortion",
    "IDENTITY",
    "ModelCDF",
    "Normal",
    "Uniform",
    "StudentT",
    "Degenerate",
    "PerturbedCDF",
    "Kernel2",
    "VARIANCE_KERNEL",
    "distortion_value",
    "distortion_values_weighted",
    "avar_order_statistic",
    "distortion_derivative",
    "derivative_piece_integrals",
    "vfunctional_value",
    "functional_from_dict",
    "parse_functional",
    "model_from_dict",
    "vfunctional_values_weighted",
    "IntegrabilityReport",
    "check_integrability",
]

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


# ---------------------------------------------------------------------------
# distortion functions


class DistortionFunction:
    """Concave ``g: [0, 1] -> [0, 1]`` with ``g(0) = 0`` and ``g(1) = 1``.

    Arguments outside ``[0, 1]`` are clamped, which keeps ``f_g`` defined for
    perturbed distribution functions ``F + eps * x``.
    """

    def __call__(self, s):
        return self._value(np.clip(np.asarray(s, dtype=float), 0.0, 1.0))

    def derivative(self, s):
        """Right-sided derivative ``g'(s)``; at ``s = 1`` the last slope."""
        return self._deriv(np.clip(np.asarray(s, dtype=float), 0.0, 1.0))

    @property
    def kinks(self) -> tuple[float, ...]:
        """Interior points of ``(0, 1)`` where ``g'`` jumps."""
        return ()

    @property
    def piecewise_linear(self) -> bool:
        return False

    def _value(self, s):
        raise NotImplementedError

    def _deriv(self, s):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseLinearDistortion(DistortionFunction):
    """Concave distortion interpolating ``points = ((s_0, g_0), ..., (s_K, g_K))``."""

    points: tuple = ((0.0, 0.0), (1.0, 1.0))

    def __post_init__(self):
        pts = tuple((float(s), float(v)) for s, v in self.points)
        object.__setattr__(self, "points", pts)
        s = np.array([p[0] for p in pts])
        v = np.array([p[1] for p in pts])
        if s.size < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("breakpoints must start at 0, end at 1 and increase strictly")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError("a distortion needs g(0) = 0 and g(1) = 1")
        slopes = np.diff(v) / np.diff(s)
        if np.any(np.diff(slopes) > 1e-12) or np.any(slopes < 0):
            raise ValueError("distortion must be non-decreasing and concave")

    @cached_property
    def _s(self):
        return np.array([p[0] for p in self.points])

    @cached_property
    def _v(self):
        return np.array([p[1] for p in self.points])

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self._v) / np.diff(self._s)

    def _value(self, s):
        return np.interp(s, self._s, self._v)

    def _deriv(self, s):
        idx = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, self.slopes.size - 1)
        return self.slopes[idx]

    @property
    def kinks(self):
        sl = self.slopes
        return tuple(float(self._s[i + 1]) for i in range(sl.size - 1) if sl[i] != sl[i + 1])

    @property
    def piecewise_linear(self):
        return True

    def to_dict(self):
        return {"type": "piecewise", "points": [list(p) for p in self.points]}


class AVaR(PiecewiseLinearDistortion):
    """Average Value at Risk: ``g(s) = min(s / alpha, 1)``."""

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        pts = ((0.0, 0.0), (1.0, 1.0)) if alpha == 1.0 else ((0.0, 0.0), (alpha, 1.0), (1.0, 1.0))
        super().__init__(pts)
        object.__setattr__(self, "alpha", alpha)

    def __repr__(self):
        return f"AVaR(alpha={self.alpha})"

    def to_dict(self):
        return {"type": "avar", "alpha": self.alpha}


@dataclass(frozen=True)
class PowerDistortion(DistortionFunction):
    """``g(s) = s ** c`` for ``0 < c <= 1``; ``c = 1`` is the identity."""

    c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ValueError("power distortion exponent must lie in (0, 1]")

    def _value(self, s):
        return s**self.c

    def _deriv(self, s):
        if self.c == 1.0:
            return np.ones_like(s)
        with np.errstate(divide="ignore"):
            return self.c * np.where(s > 0, s, 0.0) ** (self.c - 1.0)

    @property
    def piecewise_linear(self):
        return self.c == 1.0

    @property
    def slopes(self):
        return np.array([1.0])

    @property
    def _s(self):
        return np.array([0.0, 1.0])

    def to_dict(self):
        return {"type": "identity"} if self.c == 1.0 else {"type": "power", "c": self.c}


IDENTITY = PowerDistortion(1.0)


# ---------------------------------------------------------------------------
# model distribution functions


class ModelCDF:
    """Continuous (or degenerate) reference distribution with cdf/quantile/density."""

    compact = False

    @cached_property
    def dist(self):
        raise NotImplementedError

    def cdf(self, t):
        return self.dist.cdf(t)

    def ppf(self, p):
        return self.dist.ppf(p)

    quantile = ppf

    def pdf(self, t):
        return self.dist.pdf(t)

    def rvs(self, size, rng):
        return self.dist.rvs(size=size, random_state=rng)

    @property
    def lower(self) -> float:
        return float(self.dist.support()[0])

    @property
    def upper(self) -> float:
        return float(self.dist.support()[1])

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(ModelCDF):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @cached_property
    def dist(self):
        return stats.norm(self.mu, self.sigma)

    def to_dict(self):
        return {"name": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform(ModelCDF):
    a: float = 0.0
    b: float = 1.0
    compact = True

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("need a < b")

    @cached_property
    def dist(self):
        return stats.uniform(self.a, self.b - self.a)

    def to_dict(self):
        return {"name": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class StudentT(ModelCDF):
    nu: float = 5.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("degrees of freedom must be positive")

    @cached_property
    def dist(self):
        return stats.t(self.nu)

    def to_dict(self):
        return {"name": "student_t", "nu": self.nu}


@dataclass(frozen=True)
class Degenerate(ModelCDF):
    """Point mass at ``c``."""

    c: float = 0.0
    compact = True

    @cached_property
    def dist(self):
        return None

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.c, 1.0, 0.0)

    def ppf(self, p):
        return np.full(np.shape(p), self.c) if np.ndim(p) else self.c

    quantile = ppf

    def pdf(self, t):
        raise NotApplicable("a point mass has no density")

    def rvs(self, size, rng):
        return np.full(size, self.c, dtype=float)

    @property
    def lower(self):
        return self.c

    @property
    def upper(self):
        return self.c

    def to_dict(self):
        return {"name": "degenerate", "c": self.c}


@dataclass(frozen=True)
class PerturbedCDF:
    """``F + eps * x`` for a model ``F`` and a compactly supported step ``x``."""

    base: ModelCDF
    eps: float
    direction: StepFunction

    def __call__(self, t):
        return self.base.cdf(t) + self.eps * self.direction(t)


# ---------------------------------------------------------------------------
# kernels for V-functionals


@dataclass(frozen=True)
class Kernel2:
    """Symmetric kernel ``h(x1, x2)`` (vectorized over numpy arrays)."""

    h: Callable = field(compare=False)
    name: str = "custom"

    def __call__(self, x1, x2):
        return self.h(x1, x2)

    def to_dict(self):
        return {"type": "kernel", "name": self.name}


VARIANCE_KERNEL = Kernel2(lambda x1, x2: 0.5 * (x1 - x2) ** 2, "variance")


# ---------------------------------------------------------------------------
# plug-in values


def _check_cdf(F: StepFunction) -> None:
    if F.base_level != 0.0:
        raise NonCDF("distribution function must vanish at -inf")
    lv = F.levels
    if lv.size and (np.any(np.diff(lv) < 0) or lv[0] < 0 or lv[-1] > 1.0 + 1e-12):
        raise NonCDF("levels must be non-decreasing within [0, 1]")


def _tail_exponent_near_zero(g: DistortionFunction) -> float:
    if isinstance(g, PowerDistortion):
        return g.c
    return 1.0


def _check_model_tails(g: DistortionFunction, F: ModelCDF) -> None:
    if isinstance(F, StudentT):
        # left tail int F^c ~ int |t|^{-nu c}; right tail int (1 - F) ~ |t|^{1-nu}
        if F.nu * _tail_exponent_near_zero(g) <= 1.0:
            raise Divergent("lower tail integral of g(F) diverges")
        right_active = not (g.piecewise_linear and float(g.derivative(1.0)) == 0.0)
        if right_active and F.nu <= 1.0:
            raise Divergent("upper tail integral of 1 - g(F) diverges")


def _quad(fun, a, b, points=None, tol=1e-9):
    pts = None
    if points is not None and math.isfinite(a) and math.isfinite(b):
        pts = sorted(p for p in points if a < p < b) or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fun, a, b, points=pts, **_QUAD)
        if err > tol:
            val, err = integrate.quad(fun, a, b, points=pts, epsabs=tol / 10, epsrel=1e-10, limit=2000)
    if not math.isfinite(val) or err > tol:
        raise Divergent(f"integral not finite to tolerance (estimate {val}, error {err})")
    return val


def _model_value(g: DistortionFunction, F: ModelCDF) -> float:
    if isinstance(F, Degenerate):
        return -F.c
    _check_model_tails(g, F)
    a, b = F.lower, F.upper
    lo, hi = float(F.ppf(1e-12)), float(F.ppf(1.0 - 1e-12))
    kinks = [float(F.ppf(s)) for s in g.kinks]
    neg = lambda t: float(g(F.cdf(t)))
    pos = lambda t: 1.0 - float(g(F.cdf(t)))

    def over(fun, left, right):
        # finite core plus the two truncated tails where present
        if right <= left:
            return 0.0
        total = 0.0
        core_l, core_r = max(left, lo), min(right, hi)
        if core_r > core_l:
            total += _quad(fun, core_l, core_r, kinks)
        if left < lo:
            total += _quad(fun, left, min(lo, right))
        if right > hi:
            total += _quad(fun, max(hi, left), right)
        return total

    val = over(neg, a, min(0.0, b)) - over(pos, max(0.0, a), b)
    if b < 0:
        val += -b  # g(F) = 1 on [b, 0)
    if a > 0:
        val -= a  # 1 - g(F) = 1 on [0, a)
    return val


def _step_value(g: DistortionFunction, F: StepFunction) -> float:
    _check_cdf(F)
    if not F.knots.size:
        raise NonCDF("the zero function carries no mass")
    top = float(g(F.levels[-1]))
    if top < 1.0 - 1e-12:
        raise Divergent("g(total mass) < 1, the upper integral diverges")
    total = 0.0
    for u, v, level in F.pieces():
        gv = 1.0 if v == math.inf else float(g(level))
        neg = max(0.0, min(v, 0.0) - u) if u < 0 else 0.0
        pos = max(0.0, v - max(u, 0.0)) if v > 0 else 0.0
        if gv != 0.0 and neg:
            total += gv * neg
        if gv != 1.0 and pos:
            total -= (1.0 - gv) * pos
    return total


def _perturbed_value(g: DistortionFunction, F: PerturbedCDF) -> float:
    x = F.direction
    if x.base_level != 0.0 or (x.levels.size and x.levels[-1] != 0.0):
        raise Divergent("perturbation direction must have compact support")
    base = distortion_value(g, F.base)
    delta = 0.0
    for u, v, level in x.pieces():
        if level == 0.0 or not (math.isfinite(u) and math.isfinite(v)):
            continue
        pts = [float(F.base.ppf(np.clip(s - F.eps * level, 0.0, 1.0))) for s in g.kinks]
        pts += [float(F.base.ppf(s)) for s in g.kinks]
        fun = lambda t, lv=level: float(g(F.base.cdf(t) + F.eps * lv) - g(F.base.cdf(t)))
        delta += _quad(fun, u, v, pts)
    return base + delta


def distortion_value(g: DistortionFunction, F) -> float:
    """Distortion risk functional ``f_g(F)``.

    ``F`` may be a :class:`StepFunction` (exact piecewise sums, sub-probability
    masses allowed as long as ``g`` reaches 1), a :class:`ModelCDF`
    (adaptive quadrature), or a :class:`PerturbedCDF`.
    """
    if isinstance(F, StepFunction):
        return _step_value(g, F)
    if isinstance(F, PerturbedCDF):
        return _perturbed_value(g, F)
    if isinstance(F, ModelCDF):
        return _model_value(g, F)
    raise TypeError(f"unsupported distribution function {type(F).__name__}")


def distortion_values_weighted(g: DistortionFunction, sorted_sample, weights) -> np.ndarray:
    """``f_g`` of ``(1/n) sum_i w_i 1[x_i, inf)`` for each row of ``weights``.

    ``sorted_sample`` must be ascending.  With ``G_k = g(F(x_k))`` the value is
    ``-x_n + sum_{k<n} G_k (x_{k+1} - x_k)``, the integral over the gaps
    between order statistics; it is exact for a constant sample.
    """
    x = np.asarray(sorted_sample, dtype=float)
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    n = x.size
    cum = np.cumsum(W, axis=1) / n
    G = g(cum)
    if np.any(G[:, -1] < 1.0 - 1e-12):
        raise Divergent("g(total mass) < 1, the upper integral diverges")
    # einsum keeps each row's reduction independent of the batch size
    out = np.einsum("bi,i->b", G[:, :-1], np.diff(x)) - x[-1]
    return out if np.ndim(weights) == 2 else out[0]


def avar_order_statistic(sample, alpha: float) -> float:
    """Lower-tail average ``-(1/(n alpha)) [sum_{i<=k} x_(i) + (n alpha - k) x_(k+1)]``."""
    x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    na = n * alpha
    k = int(math.floor(na))
    frac = na - k
    total = x[:k].sum()
    if frac > 0 and k < n:
        total += frac * x[k]
    return -total / na


# ---------------------------------------------------------------------------
# derivative


def derivative_piece_integrals(g: DistortionFunction, F: ModelCDF, u, v) -> np.ndarray:
    """``int_u^v g'(F(t)) dt`` for arrays of interval endpoints ``u <= v``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if isinstance(F, Degenerate):
        raise NotApplicable("derivative needs a continuous distribution function")
    if g.piecewise_linear:
        s = g._s
        slopes = g.slopes
        q = np.asarray(F.ppf(s), dtype=float)  # q[0] may be -inf, q[-1] +inf
        out = np.zeros(np.broadcast(u, v).shape)
        lo_sup, hi_sup = F.lower, F.upper
        # below the support F = 0 -> g'(0); above F = 1 -> last slope
        with np.errstate(invalid="ignore"):
            below = np.clip(np.minimum(v, lo_sup) - u, 0.0, None) if math.isfinite(lo_sup) else 0.0
            above = np.clip(v - np.maximum(u, hi_sup), 0.0, None) if math.isfinite(hi_sup) else 0.0
        out = out + slopes[0] * below + slopes[-1] * above
        for k in range(slopes.size):
            if slopes[k] == 0.0:
                continue
            a, b = q[k], q[k + 1]
            length = np.minimum(v, b) - np.maximum(u, a)
            with np.errstate(invalid="ignore"):
                length = np.where(np.minimum(v, b) > np.maximum(u, a), length, 0.0)
            out = out + slopes[k] * length
        if not np.all(np.isfinite(out)):
            raise Divergent("derivative integral diverges on an unbounded piece")
        return out
    res = np.empty(np.broadcast(u, v).shape)
    for i, (a, b) in enumerate(np.broadcast(u, v)):
        res[i] = _quad(lambda t: float(g.derivative(F.cdf(t))), a, b)
    return res


def distortion_derivative(g: DistortionFunction, F: ModelCDF, x: StepFunction) -> float:
    """``int g'(F(t)) x(t) dt`` for a step function ``x``."""
    total = 0.0
    for u, v, level in x.pieces():
        if level == 0.0:
            continue
        total += level * float(derivative_piece_integrals(g, F, u, v)[0])
    if not math.isfinite(total):
        raise Divergent("derivative is not finite")
    return total


# ---------------------------------------------------------------------------
# V-functionals


def vfunctional_value(h: Kernel2, F: StepFunction) -> float:
    """``int int h(x1, x2) dF(x1) dF(x2)`` as an exact double sum over atoms."""
    _check_cdf(F)
    atoms, masses = F.jumps()
    H = h(atoms[:, None], atoms[None, :])
    return float(masses @ H @ masses)


def vfunctional_values_weighted(h: Kernel2, sample, weights) -> np.ndarray:
    """V-functional of ``(1/n) sum_i w_i 1[x_i, inf)`` for each weight row."""
    x = np.asarray(sample, dtype=float)
    W = np.atleast_2d(np.asarray(weights, dtype=float)) / x.size
    H = h(x[:, None], x[None, :])
    out = np.einsum("bi,ij,bj->b", W, H, W)
    return out if np.ndim(weights) == 2 else out[0]


# ---------------------------------------------------------------------------
# integrability condition


@dataclass(frozen=True)
class IntegrabilityReport:
    values: dict
    tail_exponents: tuple
    verdict: str
    heuristic: bool = True

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


def check_integrability(
    g: DistortionFunction,
    F: ModelCDF,
    phi: WeightFunction,
    gamma: float,
    eps_seq=(1e-4, 1e-6, 1e-8),
) -> IntegrabilityReport:
    """Numerical check of ``int g(gamma F) / (F phi) dt < inf``.

    Reports the integral truncated at ``[q(eps), q(1 - eps)]`` for each
    ``eps`` together with the local power-law decay exponent of the integrand
    at the outermost truncation points.  The verdict is ``converged`` when both
    tails decay faster than ``1/|t|``.  Advisory only.
    """
    if F.compact:
        raise NotApplicable("distribution function reaches 0 and 1; condition needs 0 < F < 1")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")

    def integrand(t):
        Ft = F.cdf(t)
        return float(g(gamma * Ft) / (Ft * phi(t)))

    pts = [float(F.ppf(s / gamma)) for s in g.kinks if s / gamma < 1.0] + [0.0]
    values = {}
    for eps in eps_seq:
        a, b = float(F.ppf(eps)), float(F.ppf(1.0 - eps))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            values[eps] = integrate.quad(integrand, a, b, points=[p for p in pts if a < p < b], limit=500)[0]

    def exponent(t):
        t2 = t * 1.25
        i1, i2 = integrand(t), integrand(t2)
        if i2 <= 0.0 or i1 <= 0.0:
            return math.inf
        return -math.log(i2 / i1) / math.log(1.25)

    e = min(eps_seq)
    left, right = exponent(float(F.ppf(e))), exponent(float(F.ppf(1.0 - e)))
    verdict = "converged" if left > 1.0 and right > 1.0 else "diverging"
    return IntegrabilityReport(values, (left, right), verdict)


Functional = Union[DistortionFunction, Kernel2]


# ---------------------------------------------------------------------------
# parsing


def functional_from_dict(d: dict) -> Functional:
    kind = d.get("type")
    if kind == "identity":
        return IDENTITY
    if kind == "avar":
        return AVaR(d["alpha"])
    if kind == "power":
        return PowerDistortion(float(d["c"]))
    if kind == "piecewise":
        return PiecewiseLinearDistortion(tuple(tuple(p) for p in d["points"]))
    if kind == "kernel":
        if d.get("name") != "variance":
            raise ValueError(f"unknown kernel {d.get('name')!r}")
        return VARIANCE_KERNEL
    raise ValueError(f"unknown functional type {kind!r}")


def parse_functional(text: str) -> Functional:
    """``identity``, ``avar:0.1``, ``power:0.5`` or ``variance``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "identity" and not arg:
        return IDENTITY
    if name == "avar" and arg:
        return AVaR(float(arg))
    if name == "power" and arg:
        return PowerDistortion(float(arg))
    if name == "variance" and not arg:
        return VARIANCE_KERNEL
    raise ValueError(f"cannot parse functional {text!r} (try identity, avar:0.1, power:0.5, variance)")


def model_from_dict(d: dict) -> ModelCDF:
    name = d.get("name")
    args = {k: v for k, v in d.items() if k != "name"}
    table = {"normal": Normal, "uniform": Uniform, "student_t": StudentT, "degenerate": Degenerate}
    if name not in table:
        raise ValueError(f"unknown distribution {name!r}")
    return table[name](**{k: float(v) for k, v in args.items()})
