"""Transient and conditioned laws, and the drift/minorization verifiers."""

import math

import numpy as np
import pytest

from cwlab.errors import DomainError, StarvationError
from cwlab.evolution import (
    DiscreteLaw, SubProbLaw, conditional_law, expmv, survival_prob,
    verify_doeblin, verify_lyapunov,
)
from cwlab.model import ModelParams, build_generator, killed_grid
from cwlab.spectral import perron_eigenpair

from oracles import dense_expm_apply


@pytest.fixture(scope="module")
def small():
    p = ModelParams(n=20, beta=1.2, epsilon=0.1)
    return p, build_generator(p, killed=True)


@pytest.mark.parametrize("t", [0.3, 2.0, 17.0])
def test_expmv_matches_dense_oracle(small, t):
    _, G = small
    rng = np.random.default_rng(3)
    v = rng.normal(size=G.size)
    ref = dense_expm_apply(G, v, t)
    got = expmv(G, v, t)
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-11)
    ref_t = dense_expm_apply(G.dense().T, v, t)
    got_t = expmv(G, v, t, transpose=True)
    assert np.allclose(got_t, ref_t, rtol=1e-10, atol=1e-11)


def test_expmv_semigroup(small):
    _, G = small
    v = np.linspace(0.2, 1.0, G.size)
    one_shot = expmv(G, v, 1.7)
    two_step = expmv(G, expmv(G, v, 0.9), 0.8)
    assert np.allclose(one_shot, two_step, rtol=1e-9, atol=1e-12)


def test_expmv_edge_cases(small):
    _, G = small
    v = np.ones(G.size)
    assert np.array_equal(expmv(G, v, 0.0), v)
    with pytest.raises(DomainError):
        expmv(G, v, -1.0)
    with pytest.raises(DomainError):
        expmv(G, v, 1.0, tol=0.0)
    with pytest.raises(DomainError):
        expmv(G, np.full(G.size, np.nan), 1.0)


def test_law_constructors():
    p = ModelParams(n=50, beta=1.2, epsilon=0.1)
    g = killed_grid(p)
    law = DiscreteLaw.dirac(g, g.points[3])
    assert law.weights.sum() == 1.0
    assert law.mean() == pytest.approx(g.points[3])
    with pytest.raises(DomainError):
        DiscreteLaw(grid=g, weights=np.ones(len(g)))   # not normalized
    sub = SubProbLaw(grid=g, weights=np.full(len(g), 0.001))
    assert 0.0 < sub.mass < 1.0
    assert sub.normalized().weights.sum() == pytest.approx(1.0)


def test_survival_from_qsd_is_exactly_exponential():
    p = ModelParams(n=100, beta=1.2, epsilon=0.1)
    G = build_generator(p, killed=True)
    pack = perron_eigenpair(G)
    init = DiscreteLaw(grid=G.grid, weights=pack.qsd)
    for t in (0.5, 3.0, 10.0):
        nu, surv = conditional_law(p, init, t)
        assert surv == pytest.approx(math.exp(-pack.b_n * t), rel=1e-8)
        # Conditioned on survival, the law does not move.
        assert np.abs(nu.weights - pack.qsd).sum() <= 1e-9


def test_survival_monotone_and_bounded():
    p = ModelParams(n=50, beta=1.2, epsilon=0.1)
    s = [survival_prob(p, 0.48, t) for t in (0.0, 1.0, 5.0, 20.0)]
    assert s[0] == 1.0
    assert all(0.0 < b < a <= 1.0 for a, b in zip(s, s[1:]))


def test_conditional_law_rejects_full_grid_init():
    p = ModelParams(n=50, beta=1.2, epsilon=0.1)
    from cwlab.model import full_grid
    bad = DiscreteLaw.dirac(full_grid(p), 0.48)
    with pytest.raises(DomainError):
        conditional_law(p, bad, 1.0)


def test_starvation_guard():
    # At a tiny size the decay rate is order one, so a long horizon pushes
    # the surviving mass below the double-precision floor.
    p = ModelParams(n=4, beta=1.2, epsilon=0.3)
    with pytest.raises(StarvationError):
        survival_prob(p, 0.5, 5e4)


def test_verify_lyapunov_contracts():
    p = ModelParams(n=100, beta=1.2, epsilon=0.1)
    G = build_generator(p, killed=True)
    pack = perron_eigenpair(G)
    a_hat, b_hat = verify_lyapunov(p, pack, tau=1.0)
    assert a_hat < 1.0
    assert b_hat >= 0.0
    with pytest.raises(DomainError):
        verify_lyapunov(p, pack, tau=0.0)


def test_verify_doeblin_positive_mass():
    p = ModelParams(n=100, beta=1.2, epsilon=0.1)
    c = verify_doeblin(p, tau=1.0, omega=2.0)
    assert 0.0 < c < 1.0
    with pytest.raises(DomainError):
        verify_doeblin(p, tau=1.0, omega=0.0)
