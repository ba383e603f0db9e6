"""Distances between distributions on the real line.

Bounded Lipschitz distance
--------------------------
For finite measures ``mu``, ``nu`` with merged support ``x_1 < ... < x_J`` and
mass differences ``c_j = mu{x_j} - nu{x_j}``,

    d_BL(mu, nu) = max { sum_j c_j f_j : |f_j| <= 1, |f_i - f_j| <= |x_i - x_j| }.

Only the consecutive constraints ``|f_{j+1} - f_j| <= x_{j+1} - x_j`` are
needed: for ``i < k`` the triangle inequality gives
``|f_k - f_i| <= sum_{j=i}^{k-1} |f_{j+1} - f_j| <= sum_j (x_{j+1} - x_j) = x_k - x_i``.
Conversely any feasible vector extends to a function on the whole line by
linear interpolation (and constant continuation), which stays bounded by 1
and 1-Lipschitz.  So the reduced chain LP is exact; it is solved by
``bl_chain_value``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qhboot._backend import bl_chain_value
from qhboot.functionals import ModelCDF
from qhboot.stepfn import StepFunction, WeightFunction, linear_combine, weighted_sup_norm

__all__ = [
    "DiscreteMeasure",
    "bl_distance",
    "bl_distance_bruteforce",
    "total_variation",
    "WeightedKS",
    "weighted_ks",
]


class DiscreteMeasure:
    """Finite measure with strictly increasing ``atoms`` and positive ``masses``."""

    __slots__ = ("atoms", "masses", "total")

    def __init__(self, atoms, masses):
        a = np.asarray(atoms, dtype=float).reshape(-1)
        m = np.asarray(masses, dtype=float).reshape(-1)
        if a.shape != m.shape:
            raise ValueError("atoms and masses differ in length")
        if a.size and not np.all(np.diff(a) > 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(m <= 0) or not np.all(np.isfinite(a)):
            raise ValueError("masses must be positive and atoms finite")
        a.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "total", float(m.sum()))

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    def __len__(self):
        return self.atoms.size

    def __repr__(self):
        return f"DiscreteMeasure(n_atoms={self.atoms.size}, total={self.total:g})"

    @classmethod
    def from_sample(cls, values) -> "DiscreteMeasure":
        """Uniform law on ``values`` (repeated values merged)."""
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size == 0:
            raise ValueError("empty sample")
        atoms, counts = np.unique(v, return_counts=True)
        return cls(atoms, counts / v.size)

    @classmethod
    def dirac(cls, x: float = 0.0) -> "DiscreteMeasure":
        return cls([x], [1.0])

    def quantile(self, q):
        cum = np.cumsum(self.masses) / self.total
        idx = np.searchsorted(cum, np.asarray(q) - 1e-12, side="left")
        return self.atoms[np.clip(idx, 0, self.atoms.size - 1)]

    def mean(self) -> float:
        return float(self.masses @ self.atoms / self.total)

    def var(self) -> float:
        mu = self.mean()
        return float(self.masses @ (self.atoms - mu) ** 2 / self.total)


def _merge(mu: DiscreteMeasure, nu: DiscreteMeasure):
    x = np.union1d(mu.atoms, nu.atoms)
    c = np.zeros(x.size)
    c[np.searchsorted(x, mu.atoms)] += mu.masses
    c[np.searchsorted(x, nu.atoms)] -= nu.masses
    return x, c


def _require_probability(*measures):
    for m in measures:
        if len(m) == 0:
            raise ValueError("empty measure")
        if abs(m.total - 1.0) > 1e-9:
            raise ValueError(f"bounded Lipschitz distance needs probability measures (total {m.total!r})")


def bl_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact bounded Lipschitz distance between two discrete probability laws."""
    _require_probability(mu, nu)
    x, c = _merge(mu, nu)
    # the value is invariant under c -> -c; fixing the orientation makes
    # d(mu, nu) == d(nu, mu) bit for bit
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return 0.0
    if c[nz[0]] < 0:
        c = -c
    return max(0.0, float(bl_chain_value(x, c)))


def bl_distance_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure, lattice_step: float = 0.01) -> float:
    """Best objective over test vectors on the lattice ``{-1, -1+h, ..., 1}``.

    Exhaustive over all lattice vectors that satisfy the Lipschitz constraints
    between every pair of support points, organized as a max-plus recursion so
    that the search is ``O(J L^2)`` rather than ``L^J``.  Lower bound for the
    exact value.
    """
    _require_probability(mu, nu)
    x, c = _merge(mu, nu)
    J = x.size
    if J > 8:
        raise ValueError("brute force limited to merged supports of at most 8 points")
    L = int(round(2.0 / lattice_step))
    grid = -1.0 + lattice_step * np.arange(L + 1)
    best = c[0] * grid
    for j in range(1, J):
        gap = x[j] - x[j - 1]
        allowed = np.abs(grid[:, None] - grid[None, :]) <= gap + 1e-12
        # allowed[a, b]: value a at x_j reachable from value b at x_{j-1}
        cand = np.where(allowed, best[None, :], -np.inf).max(axis=1)
        best = cand + c[j] * grid
    return float(best.max())


def total_variation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """``sup_A |mu(A) - nu(A)|`` for probability measures."""
    _, c = _merge(mu, nu)
    return 0.5 * float(np.abs(c).sum())


@dataclass(frozen=True)
class WeightedKS:
    value: float
    mesh_bound: float
    argmax: float


def weighted_ks(Fhat: StepFunction, F, phi: WeightFunction = WeightFunction(0.0), refine: int = 2000) -> WeightedKS:
    """``sup_t |Fhat(t) - F(t)| phi(t)``.

    Exact when ``F`` is a step function.  Against a model distribution the
    supremum is taken over left and right limits at the knots of ``Fhat`` and
    a quantile-spaced refinement grid of ``refine`` points; ``mesh_bound``
    bounds what the grid can miss.
    """
    if isinstance(F, StepFunction):
        diff = linear_combine(1.0, Fhat, -1.0, F)
        val = weighted_sup_norm(diff, phi)
        return WeightedKS(val, 0.0, math.nan)
    if not isinstance(F, ModelCDF):
        raise TypeError("F must be a StepFunction or a ModelCDF")
    probs = (np.arange(1, refine + 1) - 0.5) / refine
    extra = np.asarray(F.ppf(np.concatenate(([1e-12], probs, [1 - 1e-12]))), dtype=float)
    pts = np.union1d(Fhat.knots, extra[np.isfinite(extra)])
    # value at each point, and left limit at knots of Fhat
    right = np.abs(Fhat(pts) - F.cdf(pts)) * phi(pts)
    k = Fhat.knots
    prev = np.concatenate(([Fhat.base_level], Fhat.levels[:-1]))
    left = np.abs(prev - F.cdf(k)) * phi(k) if k.size else np.empty(0)
    allv = np.concatenate((right, left))
    allt = np.concatenate((pts, k))
    i = int(np.argmax(allv))
    # between consecutive points Fhat is constant; |Fhat - F| moves by at most
    # the increment of F and phi by its increment
    Fp = F.cdf(pts)
    ph = phi(pts)
    diffs = np.abs(Fhat(pts) - Fp)
    bound = 0.0
    if pts.size > 1:
        dF = np.diff(Fp)
        dphi = np.abs(np.diff(ph))
        bound = float(np.max(np.maximum(ph[:-1], ph[1:]) * dF + (diffs[:-1] + dF) * dphi))
    return WeightedKS(float(allv[i]), bound, float(allt[i]))
