import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qhboot.functionals import Normal, Uniform
from qhboot.metrics import (
    DiscreteMeasure,
    bl_distance,
    bl_distance_bruteforce,
    total_variation,
    weighted_ks,
)
from qhboot.stepfn import StepFunction, WeightFunction, ecdf

D = DiscreteMeasure


@st.composite
def measures(draw, max_atoms=4):
    k = draw(st.integers(1, max_atoms))
    atoms = draw(st.lists(st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 3)), min_size=k, max_size=k, unique=True))
    raw = np.array(draw(st.lists(st.floats(0.05, 1), min_size=k, max_size=k)))
    order = np.argsort(atoms)
    return D(np.array(atoms)[order], (raw / raw.sum())[order])


def test_examples():
    assert bl_distance(D([0.0, 1.0], [0.5, 0.5]), D([0.0, 1.0], [0.5, 0.5])) == 0.0
    assert bl_distance(D.dirac(0), D.dirac(3)) == pytest.approx(2.0)
    assert bl_distance(D.dirac(0), D.dirac(0.5)) == pytest.approx(0.5)
    assert bl_distance(D([0.0, 1.0], [0.5, 0.5]), D.dirac(0)) == pytest.approx(0.5)


def test_bruteforce_examples():
    assert bl_distance_bruteforce(D.dirac(0), D.dirac(0), 0.1) == 0.0
    assert bl_distance_bruteforce(D.dirac(0), D.dirac(3), 0.01) == pytest.approx(2.0, abs=0.02)
    big = D(np.arange(9.0), np.full(9, 1 / 9))
    with pytest.raises(ValueError):
        bl_distance_bruteforce(big, D.dirac(0), 0.1)


def test_rejects_sub_probability_and_empty():
    with pytest.raises(ValueError):
        bl_distance(D([0.0], [0.5]), D.dirac(0))
    with pytest.raises(ValueError):
        bl_distance(D([], []), D.dirac(0))
    with pytest.raises(ValueError):
        D([1.0, 0.0], [0.5, 0.5])


@given(measures(3), measures(3))
def test_lp_versus_lattice_and_full_lp(mu, nu):
    exact = bl_distance(mu, nu)
    J = np.union1d(mu.atoms, nu.atoms).size
    lattice = bl_distance_bruteforce(mu, nu, 0.005)
    assert -1e-9 <= exact - lattice <= J * 0.005
    full = oracles.bl_lp_full(mu.atoms, mu.masses, nu.atoms, nu.masses)
    assert exact == pytest.approx(full, abs=1e-9)


@given(measures(), measures(), measures())
def test_metric_axioms(a, b, c):
    ab, ba = bl_distance(a, b), bl_distance(b, a)
    assert ab == ba
    assert bl_distance(a, c) <= ab + bl_distance(b, c) + 1e-9
    assert bl_distance(a, a) == 0.0
    assert 0.0 <= ab <= 2.0
    assert ab <= 2 * total_variation(a, b) + 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_dirac_diameter_bound(x, y):
    d = bl_distance(D.dirac(x), D.dirac(y))
    assert d == pytest.approx(min(2.0, abs(x - y)), abs=1e-12)


def test_python_fallback_agrees():
    from qhboot import _kernels_python

    rng = np.random.default_rng(1)
    for _ in range(50):
        a = D.from_sample(rng.normal(size=30))
        b = D.from_sample(rng.normal(0.3, 1.2, size=40))
        x = np.union1d(a.atoms, b.atoms)
        c = np.zeros(x.size)
        c[np.searchsorted(x, a.atoms)] += a.masses
        c[np.searchsorted(x, b.atoms)] -= b.masses
        assert _kernels_python.bl_chain_value(x, c) == pytest.approx(bl_distance(a, b), abs=1e-12)


def test_weighted_ks_examples():
    f = ecdf([1.0, 2.0])
    assert weighted_ks(f, f).value == 0.0
    r = weighted_ks(ecdf([0.5]), Uniform())
    assert r.value == pytest.approx(0.5)
    x = StepFunction([-2.0, -1.0], [0.5, 0.0])
    zero = StepFunction([], [], 0.0)
    assert weighted_ks(x, zero, WeightFunction(1.0)).value == pytest.approx(3 * weighted_ks(x, zero).value)


def test_weighted_ks_against_order_statistic_oracle(rng):
    assert weighted_ks(ecdf([1, 2, 3, 4]), Uniform(0, 5)).value == pytest.approx(oracles.ks_vs_uniform([1, 2, 3, 4], 0, 5), abs=1e-12)
    for _ in range(20):
        s = rng.uniform(0, 5, size=rng.integers(1, 40))
        r = weighted_ks(ecdf(s), Uniform(0, 5), refine=50)
        assert r.value == pytest.approx(oracles.ks_vs_uniform(s, 0, 5), abs=1e-12)


def test_weighted_ks_mesh_bound(rng):
    s = rng.normal(size=30)
    coarse = weighted_ks(ecdf(s), Normal(), WeightFunction(1.0), refine=100)
    fine = weighted_ks(ecdf(s), Normal(), WeightFunction(1.0), refine=20000)
    assert fine.value >= coarse.value - 1e-12
    assert fine.value - coarse.value <= coarse.mesh_bound + 1e-12
