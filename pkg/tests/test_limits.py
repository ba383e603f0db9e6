import json
import math
import pathlib

import numpy as np
import pytest

import oracles
from qhboot.errors import Divergent, IllConditioned
from qhboot.functionals import AVaR, IDENTITY, Normal, StudentT, Uniform
from qhboot.limits import (
    GridGaussian,
    ar1_longrun_kernel,
    bridge_kernel,
    brownian_bridge_cov,
    bvn_cdf,
    derivative_weights,
    limit_variance_distortion,
    longrun_cov_ar1,
    quantile_grid,
    sample_path,
)

FROZEN = json.loads((pathlib.Path(__file__).parent / "data" / "oracles.json").read_text())


def test_bridge_entries():
    gg = brownian_bridge_cov(Uniform(), [0.25, 0.5, 0.75])
    assert gg.cov[1, 1] == 0.25
    assert gg.cov[0, 2] == 0.0625 and gg.cov[2, 0] == 0.0625
    end = brownian_bridge_cov(Normal(), [0.0, float(Normal().ppf(1 - 1e-12))])
    assert abs(end.cov[1, 1]) < 1e-11 and abs(end.cov[0, 1]) < 1e-11


@pytest.mark.parametrize("h,k,r,expected", FROZEN["bvn"])
def test_bvn_against_conditioning_oracle(h, k, r, expected):
    assert bvn_cdf(h, k, r) == pytest.approx(expected, abs=1e-10)


def test_longrun_reduces_to_bridge():
    grid = quantile_grid(Normal(), 25)
    a = longrun_cov_ar1(0.0, grid).cov
    b = brownian_bridge_cov(Normal(), grid).cov
    assert np.max(np.abs(a - b)) <= 1e-9


def test_longrun_arcsine_oracle():
    gg = longrun_cov_ar1(0.5, [0.0])
    assert gg.cov[0, 0] == pytest.approx(FROZEN["arcsine_ar1_rho05_t0"], abs=1e-10)


def test_truncation_bound_controls_lag_change():
    grid = np.array([-1.0, 0.0, 0.7])
    for rho in (0.5, -0.8, 0.95):
        a = longrun_cov_ar1(rho, grid, K=5)
        b = longrun_cov_ar1(rho, grid, K=15)
        assert np.max(np.abs(a.cov - b.cov)) <= a.truncation_bound
        assert b.truncation_bound < a.truncation_bound


@pytest.mark.parametrize("gg", [brownian_bridge_cov(Normal(), quantile_grid(Normal(), 60)), longrun_cov_ar1(0.6, quantile_grid(Normal(0, 1.25), 60))])
def test_psd_quadratic_forms(gg, rng):
    V = rng.standard_normal((100, len(gg)))
    assert np.all(np.einsum("ij,jk,ik->i", V, gg.cov, V) >= -1e-8)
    L = gg.factor
    assert np.max(np.abs(L @ L.T - gg.cov)) <= 1e-6


def test_zero_and_scalar_covariances(rng):
    zero = GridGaussian([0.0, 1.0], np.zeros((2, 2)))
    assert np.all(sample_path(zero, rng, size=10) == 0.0)
    s2 = 2.5
    one = GridGaussian([0.0], [[s2]])
    N = 20_000
    v = sample_path(one, rng, size=N).var()
    assert abs(v - s2) <= 3 * s2 * math.sqrt(2 / N)
    bridge = brownian_bridge_cov(Uniform(), [0.5])
    v = sample_path(bridge, rng, size=100_000).var()
    assert v == pytest.approx(0.25, rel=0.02)


def test_bridge_sampler_matches_covariance(rng):
    gg = brownian_bridge_cov(Normal(), quantile_grid(Normal(), 15))
    for method in ("bridge", "cholesky"):
        P = sample_path(gg, rng, size=40_000, method=method)
        assert np.max(np.abs(np.cov(P.T) - gg.cov)) < 0.01


def test_jitter_and_ill_conditioning():
    near = brownian_bridge_cov(Uniform(), np.linspace(0.001, 0.999, 400))
    near.factor
    assert near.jitter is not None and near.jitter <= 1e-6
    bad = GridGaussian([0.0, 1.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(IllConditioned):
        bad.factor


def test_limit_variance_closed_forms():
    U = Uniform()
    assert limit_variance_distortion(IDENTITY, U, bridge_kernel(U)) == pytest.approx(1 / 12, abs=1e-10)
    assert limit_variance_distortion(AVaR(1.0), U, bridge_kernel(U)) == pytest.approx(1 / 12, abs=1e-10)
    v = limit_variance_distortion(AVaR(0.5), U, bridge_kernel(U))
    assert v == pytest.approx(5 / 48, abs=1e-10)
    assert v == pytest.approx(FROZEN["riemann_avar05_uniform_1e6"], abs=1e-6)


def test_limit_variance_influence_oracle():
    v = limit_variance_distortion(AVaR(0.1), Normal(), bridge_kernel(Normal()))
    assert v == pytest.approx(FROZEN["avar01_normal_limit_variance"], abs=1e-6)


def test_limit_variance_ar1_mean():
    rho = 0.5
    F = Normal(0, 1 / math.sqrt(1 - rho**2))
    v = limit_variance_distortion(IDENTITY, F, ar1_longrun_kernel(rho))
    assert v == pytest.approx(1 / (1 - rho) ** 2, abs=1e-6)


def test_limit_variance_divergent_tail():
    with pytest.raises(Divergent):
        limit_variance_distortion(IDENTITY, StudentT(2.0), bridge_kernel(StudentT(2.0)))


def test_mc_consistency_of_grid_derivative(rng):
    U = Uniform()
    grid = quantile_grid(U, 201)
    gg = brownian_bridge_cov(U, grid)
    w = derivative_weights(AVaR(0.5), U, grid)
    draws = sample_path(gg, rng, size=10_000) @ w
    target = limit_variance_distortion(AVaR(0.5), U, bridge_kernel(U))
    assert np.var(draws) == pytest.approx(target, rel=0.05)


def test_quantile_grid():
    g = quantile_grid(Uniform(), 4)
    assert np.allclose(g, [0.2, 0.4, 0.6, 0.8])
