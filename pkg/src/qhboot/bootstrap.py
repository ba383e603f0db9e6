"""Bootstrap weight vectors and bootstrapped empirical distribution functions.

Three schemes are supported:

* ``efron``: multinomial ``(n; 1/n, ..., 1/n)`` counts,
* ``bayesian``: ``Y_i / mean(Y)`` with i.i.d. standard exponential ``Y``,
* ``circular``: counts of ``k = n // ell`` wrap-around blocks of length ``ell``
  with i.i.d. uniform start indices; the total mass is ``k * ell / n <= 1``
  and is deliberately not renormalized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qhboot._backend import circular_counts
from qhboot.stepfn import StepFunction, from_masses

__all__ = [
    "BAYESIAN_WEIGHT_LAW",
    "BootstrapScheme",
    "ScriptedStream",
    "efron_weights",
    "bayesian_weights",
    "circular_block_weights",
    "draw_weights",
    "bootstrap_ecdf",
    "CircularDiagnostic",
    "validate_circular_params",
]

#: law of the Bayesian bootstrap multipliers ``Y_i`` (mean 1, std 1)
BAYESIAN_WEIGHT_LAW = "standard exponential"

VARIANTS = ("efron", "bayesian", "circular")


@dataclass(frozen=True)
class BootstrapScheme:
    """Resampling scheme.

    For ``circular`` either ``gamma`` (block length ``ceil(n ** gamma)``) or a
    fixed ``block_length`` must be given.  ``p`` and ``b`` are the declared
    moment order and mixing-rate exponent used by
    :func:`validate_circular_params`.
    """

    variant: str = "efron"
    gamma: Optional[float] = None
    block_length: Optional[int] = None
    p: Optional[float] = None
    b: float = math.inf

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown bootstrap variant {self.variant!r}")
        if self.variant == "circular":
            if self.gamma is None and self.block_length is None:
                raise ValueError("circular scheme needs gamma or block_length")
            if self.gamma is not None and not 0.0 < self.gamma < 1.0:
                raise ValueError("gamma must lie in (0, 1)")
            if self.block_length is not None and self.block_length < 1:
                raise ValueError("block_length must be positive")

    def ell(self, n: int) -> int:
        if self.block_length is not None:
            return int(self.block_length)
        return max(1, math.ceil(n**self.gamma))

    def total_mass(self, n: int) -> float:
        if self.variant != "circular":
            return 1.0
        ell = self.ell(n)
        return (n // ell) * ell / n

    def to_dict(self) -> dict:
        d = {"type": self.variant}
        if self.variant == "circular":
            if self.gamma is not None:
                d["gamma"] = self.gamma
            if self.block_length is not None:
                d["block_length"] = self.block_length
            if self.p is not None:
                d["p"] = self.p
            d["b"] = "inf" if math.isinf(self.b) else self.b
        return d


class ScriptedStream:
    """Stand-in for :class:`numpy.random.Generator` returning scripted integers.

    Only ``integers`` is supported; it hands out the scripted values in order,
    which makes block start indices reproducible by hand.
    """

    def __init__(self, values):
        self._values = list(int(v) for v in values)
        self._pos = 0

    def integers(self, low, high=None, size=None):
        count = int(np.prod(size)) if size is not None else 1
        chunk = self._values[self._pos : self._pos + count]
        if len(chunk) < count:
            raise RuntimeError("scripted stream exhausted")
        self._pos += count
        out = np.asarray(chunk, dtype=np.int64)
        lo, hi = (0, low) if high is None else (low, high)
        if np.any(out < lo) or np.any(out >= hi):
            raise ValueError("scripted value outside the requested range")
        return out.reshape(size) if size is not None else int(out[0])


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return int(n)


def efron_weights(n: int, rng, size: Optional[int] = None) -> np.ndarray:
    """Multinomial ``(n; 1/n, ..., 1/n)`` counts; ``size`` rows if given."""
    n = _check_n(n)
    pvals = np.full(n, 1.0 / n)
    return rng.multinomial(n, pvals, size=size).astype(np.int64)


def bayesian_weights(n: int, rng, size: Optional[int] = None) -> np.ndarray:
    """``Y_i / mean(Y)`` with i.i.d. standard exponential ``Y``."""
    n = _check_n(n)
    shape = (n,) if size is None else (size, n)
    y = rng.standard_exponential(shape)
    bad = y.sum(axis=-1) == 0
    while np.any(bad):  # probability zero for a continuous law
        y[bad] = rng.standard_exponential((int(np.sum(bad)), n)) if size is not None else rng.standard_exponential(n)
        bad = y.sum(axis=-1) == 0
    return y / y.mean(axis=-1, keepdims=True)


def circular_block_weights(n: int, ell: int, rng, size: Optional[int] = None) -> np.ndarray:
    """Circular block bootstrap counts ``W_i`` (number of blocks covering ``i``).

    ``k = n // ell`` start indices are drawn uniformly from ``{1, ..., n}``;
    a block starting at ``I`` covers ``I, ..., I + ell - 1`` modulo ``n``.
    """
    n = _check_n(n)
    ell = int(ell)
    if not 1 <= ell < n:
        raise ValueError("block length must satisfy 1 <= ell < n")
    k = n // ell
    shape = (k,) if size is None else (size, k)
    starts = rng.integers(1, n + 1, size=shape)
    return circular_counts(starts, n, ell)


def draw_weights(scheme: BootstrapScheme, n: int, rng, size: Optional[int] = None) -> np.ndarray:
    if scheme.variant == "efron":
        return efron_weights(n, rng, size)
    if scheme.variant == "bayesian":
        return bayesian_weights(n, rng, size)
    return circular_block_weights(n, scheme.ell(n), rng, size)


def bootstrap_ecdf(sample, w) -> StepFunction:
    """``(1/n) sum_i w_i 1[x_i, inf)``."""
    x = np.asarray(sample, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if x.size != w.size:
        raise ValueError("sample and weight vector differ in length")
    if x.size == 0:
        raise ValueError("empty sample")
    # accumulate raw weights first so integer weights give exact levels
    F = from_masses(x, w)
    return StepFunction(F.knots, F.levels / x.size, 0.0)


@dataclass(frozen=True)
class CircularDiagnostic:
    p: float
    b: float
    gamma: float
    moment_ok: bool
    mixing_ok: bool
    block_ok: bool
    messages: tuple

    @property
    def ok(self) -> bool:
        return self.moment_ok and self.mixing_ok and self.block_ok


def validate_circular_params(p: float, b: float, gamma: float) -> CircularDiagnostic:
    """Check ``p > 2``, ``b > p/(p-2)`` and ``0 < gamma < (p-2)/(2(p-1))``."""
    if not p > 2:
        raise ValueError("moment order p must exceed 2")
    b_min = p / (p - 2)
    g_max = (p - 2) / (2 * (p - 1))
    mixing_ok = b > b_min
    block_ok = 0 < gamma < g_max
    msgs = []
    if not mixing_ok:
        msgs.append(f"condition (b) violated: mixing exponent requires b > {b_min:g}, got {b:g}")
    if not block_ok:
        msgs.append(f"condition (c) violated: block exponent requires 0 < gamma < {g_max:g}, got {gamma:g}")
    return CircularDiagnostic(p, b, gamma, True, mixing_ok, block_ok, tuple(msgs))
