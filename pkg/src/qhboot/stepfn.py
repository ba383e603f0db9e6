"""Exact right-continuous step functions and weighted sup-norms.

A :class:`StepFunction` stores jump locations ``knots``, the value ``levels[i]``
on ``[knots[i], knots[i+1])`` and ``base_level`` on ``(-inf, knots[0])``.
Empirical distribution functions, their bootstrap versions and differences of
the two all live here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "StepFunction",
    "WeightFunction",
    "ecdf",
    "from_masses",
    "eval_step",
    "linear_combine",
    "weighted_sup_norm",
    "ks_distance",
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


class StepFunction:
    """Piecewise-constant cadlag function with finitely many jumps."""

    __slots__ = ("knots", "levels", "base_level")

    def __init__(self, knots: Sequence[float], levels: Sequence[float], base_level: float = 0.0):
        knots = _frozen(knots)
        levels = _frozen(levels)
        if knots.shape != levels.shape:
            raise ValueError("knots and levels must have the same length")
        if knots.size and not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(levels)) and math.isfinite(base_level)):
            raise ValueError("knots, levels and base_level must be finite")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "base_level", float(base_level))

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    def __call__(self, t):
        return eval_step(self, t)

    def __repr__(self) -> str:
        return f"StepFunction(knots={self.knots.tolist()}, levels={self.levels.tolist()}, base_level={self.base_level})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.base_level == other.base_level
            and np.array_equal(self.knots, other.knots)
            and np.array_equal(self.levels, other.levels)
        )

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return linear_combine(1.0, self, -1.0, other)

    def __mul__(self, a: float) -> "StepFunction":
        return linear_combine(float(a), self, 0.0, ZERO)

    __rmul__ = __mul__

    @property
    def final_level(self) -> float:
        return float(self.levels[-1]) if self.levels.size else self.base_level

    def pieces(self):
        """Yield ``(u, v, level)`` for every constant piece, with infinite ends."""
        if not self.knots.size:
            yield -math.inf, math.inf, self.base_level
            return
        yield -math.inf, float(self.knots[0]), self.base_level
        k = self.knots
        for i in range(k.size - 1):
            yield float(k[i]), float(k[i + 1]), float(self.levels[i])
        yield float(k[-1]), math.inf, float(self.levels[-1])

    def jumps(self) -> tuple[np.ndarray, np.ndarray]:
        """Jump locations and jump heights (atoms and masses for a CDF)."""
        prev = np.concatenate(([self.base_level], self.levels[:-1]))
        return self.knots.copy(), self.levels - prev


ZERO = StepFunction([], [], 0.0)


def _canonical(knots: np.ndarray, levels: np.ndarray, base: float) -> StepFunction:
    # drop knots where the level does not change
    prev = np.concatenate(([base], levels[:-1]))
    keep = levels != prev
    return StepFunction(knots[keep], levels[keep], base)


def from_masses(atoms, masses, base_level: float = 0.0) -> StepFunction:
    """Distribution function of point masses ``masses`` at ``atoms`` (ties merged)."""
    atoms = np.asarray(atoms, dtype=float).reshape(-1)
    masses = np.asarray(masses, dtype=float).reshape(-1)
    if atoms.shape != masses.shape:
        raise ValueError("atoms and masses must have the same length")
    if atoms.size == 0:
        return StepFunction([], [], base_level)
    order = np.argsort(atoms, kind="stable")
    a, m = atoms[order], masses[order]
    uniq, start = np.unique(a, return_index=True)
    summed = np.add.reduceat(m, start)
    return _canonical(uniq, base_level + np.cumsum(summed), base_level)


def ecdf(sample) -> StepFunction:
    """Empirical distribution function of ``sample``."""
    sample = np.asarray(sample, dtype=float).reshape(-1)
    if sample.size == 0:
        raise ValueError("empty sample")
    # counts / n keeps the final level exactly 1
    atoms, counts = np.unique(sample, return_counts=True)
    return StepFunction(atoms, np.cumsum(counts) / sample.size, 0.0)


def eval_step(f: StepFunction, t):
    """Evaluate ``f`` at ``t`` (scalar or array), right-continuously."""
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(f.knots, t_arr, side="right") - 1
    vals = np.where(idx >= 0, f.levels[np.clip(idx, 0, None)] if f.levels.size else f.base_level, f.base_level)
    if np.ndim(t) == 0:
        return float(vals)
    return vals


def linear_combine(a: float, f: StepFunction, b: float, g: StepFunction) -> StepFunction:
    """Exact representation of ``a*f + b*g`` on the merged knot set."""
    knots = np.union1d(f.knots, g.knots)
    levels = a * eval_step(f, knots) + b * eval_step(g, knots) if knots.size else np.empty(0)
    base = a * f.base_level + b * g.base_level
    return _canonical(knots, np.asarray(levels, dtype=float), base)


@dataclass(frozen=True)
class WeightFunction:
    """Polynomial weight ``phi(t) = (1 + |t|) ** lam``."""

    lam: float = 0.0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError("weight exponent must be a finite nonnegative number")

    def __call__(self, t):
        return (1.0 + np.abs(np.asarray(t, dtype=float))) ** self.lam


def weighted_sup_norm(x: StepFunction, phi: WeightFunction) -> float:
    """``sup_t |x(t)| phi(t)``, computed exactly; ``math.inf`` if unbounded.

    ``phi`` is continuous, non-increasing on the negatives and non-decreasing
    on the positives, so on a piece ``[u, v)`` its supremum sits at one of the
    two endpoints.
    """
    if phi.lam == 0:
        vals = np.abs(np.concatenate(([x.base_level], x.levels)))
        return float(vals.max())
    if not x.knots.size:
        return 0.0 if x.base_level == 0 else math.inf
    if x.base_level != 0 or x.levels[-1] != 0:
        return math.inf
    k = x.knots
    lv = np.abs(x.levels[:-1])
    ends = np.maximum(phi(k[:-1]), phi(k[1:]))
    return float((lv * ends).max()) if lv.size else 0.0


def ks_distance(f: StepFunction, g: StepFunction) -> float:
    """Uniform distance ``sup_t |f(t) - g(t)|``."""
    return weighted_sup_norm(linear_combine(1.0, f, -1.0, g), WeightFunction(0.0))
