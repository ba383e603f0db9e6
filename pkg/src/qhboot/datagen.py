"""Data-generating models: i.i.d., Gaussian AR(1) and GARCH(1,1)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, signal

from qhboot.functionals import Degenerate, ModelCDF, Normal, StudentT, Uniform, model_from_dict
from qhboot.stepfn import WeightFunction

__all__ = ["IID", "AR1", "GARCH11", "DataModel", "sample", "true_cdf", "moment_check", "MomentDiagnostic", "model_to_dict", "datamodel_from_dict"]

GARCH_BURN_IN = 1000


@dataclass(frozen=True)
class IID:
    dist: ModelCDF


@dataclass(frozen=True)
class AR1:
    """``X_t = rho X_{t-1} + e_t`` with standard normal innovations."""

    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("AR(1) needs |rho| < 1 for stationarity")

    @property
    def marginal(self) -> Normal:
        return Normal(0.0, 1.0 / math.sqrt(1.0 - self.rho**2))


@dataclass(frozen=True)
class GARCH11:
    """``X_t = sigma_t e_t``, ``sigma_t^2 = omega + a X_{t-1}^2 + b sigma_{t-1}^2``."""

    omega: float
    a: float
    b: float
    burn_in: int = GARCH_BURN_IN

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.a < 0 or self.b < 0 or not self.a + self.b < 1:
            raise ValueError("GARCH(1,1) needs a, b >= 0 and a + b < 1")


DataModel = Union[IID, AR1, GARCH11]


def sample(model: DataModel, n: int, rng, size: Optional[int] = None) -> np.ndarray:
    """``n`` observations, or a ``(size, n)`` batch of independent paths."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    shape = (n,) if size is None else (int(size), n)
    if isinstance(model, IID):
        return np.asarray(model.dist.rvs(shape, rng), dtype=float)
    if isinstance(model, AR1):
        z = rng.standard_normal(shape)
        # stationary start, then the recursion: X_1 = z_1 / sqrt(1 - rho^2)
        z[..., 0] /= math.sqrt(1.0 - model.rho**2)
        return signal.lfilter([1.0], [1.0, -model.rho], z, axis=-1)
    if isinstance(model, GARCH11):
        rows = 1 if size is None else int(size)
        total = model.burn_in + n
        e = rng.standard_normal((rows, total))
        sig2 = np.full(rows, model.omega / (1.0 - model.a - model.b))
        x = np.empty((rows, total))
        for t in range(total):
            x[:, t] = np.sqrt(sig2) * e[:, t]
            sig2 = model.omega + model.a * x[:, t] ** 2 + model.b * sig2
        out = x[:, model.burn_in :]
        return out[0] if size is None else out
    raise TypeError(f"unknown data model {model!r}")


def true_cdf(model: DataModel) -> Optional[ModelCDF]:
    """Stationary marginal distribution, or ``None`` when no closed form exists."""
    if isinstance(model, IID):
        return model.dist
    if isinstance(model, AR1):
        return model.marginal
    return None


@dataclass(frozen=True)
class MomentDiagnostic:
    finite: Optional[bool]
    value: float
    exponent: float
    heuristic: bool
    message: str


def moment_check(model: DataModel, phi: WeightFunction, p: float, rng=None, n_empirical: int = 200_000) -> MomentDiagnostic:
    """Is ``int phi^p dF`` finite?

    With a closed-form marginal the answer compares the polynomial order
    ``lambda * p`` with the tail decay and the value comes from quadrature.
    For GARCH the report is heuristic: the known moment conditions for
    Gaussian innovations plus an empirical moment from a long simulated path.
    """
    expo = phi.lam * p
    F = true_cdf(model)
    if F is None:
        a, b = model.a, model.b
        if expo <= 2:
            finite, why = True, "a + b < 1 gives a finite second moment"
        elif expo <= 4:
            ok = 3 * a * a + 2 * a * b + b * b < 1
            finite, why = ok, f"fourth moment condition 3a^2 + 2ab + b^2 < 1 is {ok}"
        else:
            finite, why = None, "no moment condition implemented beyond order 4"
        rng = rng if rng is not None else np.random.default_rng(0)
        x = sample(model, n_empirical, rng)
        emp = float(np.mean(phi(x) ** p))
        return MomentDiagnostic(finite, emp, expo, True, f"heuristic: {why}; empirical moment {emp:.6g}")
    if isinstance(F, (Uniform, Degenerate)):
        finite, why = True, "bounded support"
    elif isinstance(F, StudentT):
        finite = expo < F.nu
        why = f"lambda*p = {expo:g} {'<' if finite else '>='} nu = {F.nu:g}"
    else:
        finite, why = True, "Gaussian tails beat every polynomial weight"
    if not finite:
        return MomentDiagnostic(False, math.inf, expo, False, why)
    if isinstance(F, Degenerate):
        val = float(phi(F.c) ** p)
    else:
        val = integrate.quad(lambda t: float(phi(t)) ** p * float(F.pdf(t)), F.lower, F.upper, epsabs=1e-10, epsrel=1e-8, limit=400)[0]
    return MomentDiagnostic(True, val, expo, False, why)


def model_to_dict(model: DataModel) -> dict:
    if isinstance(model, IID):
        return {"type": "iid", "dist": model.dist.to_dict()}
    if isinstance(model, AR1):
        return {"type": "ar1", "rho": model.rho}
    return {"type": "garch11", "omega": model.omega, "a": model.a, "b": model.b}


def datamodel_from_dict(d: dict) -> DataModel:
    kind = d.get("type")
    if kind == "iid":
        return IID(model_from_dict(d["dist"]))
    if kind == "ar1":
        return AR1(float(d["rho"]))
    if kind == "garch11":
        return GARCH11(float(d["omega"]), float(d["a"]), float(d["b"]))
    raise ValueError(f"unknown data model type {kind!r}")
