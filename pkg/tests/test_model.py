"""Grid, rates, generator and potential checks."""

import math

import numpy as np
import pytest

from cwlab.errors import DomainError, UnsupportedRegimeError
from cwlab.model import (
    ModelParams, build_generator, curvature_floor, d2g, dg, find_m_plus,
    find_m_star, full_grid, jump_rates, killed_grid, modified_rates,
    potential_U, potential_g,
)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(n=1, beta=1.2, epsilon=0.1)
    with pytest.raises(DomainError):
        ModelParams(n=10, beta=0.0, epsilon=0.1)
    with pytest.raises(DomainError):
        ModelParams(n=10, beta=1.2, epsilon=1.0)
    with pytest.raises(DomainError):
        ModelParams(n=10, beta=1.2, epsilon=-0.2)


def test_epsilon_near_grid_guard_band():
    # 0.1 is exactly on the n=100 grid: allowed.
    ModelParams(n=100, beta=1.2, epsilon=0.1)
    # A hair off the grid point (inside the guard band): rejected.
    with pytest.raises(DomainError):
        ModelParams(n=100, beta=1.2, epsilon=0.1 + 1e-10)
    # Far enough from every grid point: allowed again.
    ModelParams(n=100, beta=1.2, epsilon=0.105)


def test_eta_regime():
    p = ModelParams(n=100, beta=1.2, epsilon=0.1, eta=0.4)
    assert p.epsilon < p.eta < p.m_plus
    with pytest.raises(UnsupportedRegimeError):
        ModelParams(n=100, beta=0.8, epsilon=0.1, eta=0.4)
    with pytest.raises(DomainError):
        ModelParams(n=100, beta=1.2, epsilon=0.1, eta=0.05)
    with pytest.raises(DomainError):
        ModelParams(n=100, beta=1.2, epsilon=0.1, eta=0.9)


def test_jump_rates_closed_form():
    p = ModelParams(n=10, beta=1.2, epsilon=0.15)
    assert jump_rates(p, 0.0) == (5.0, 5.0)
    lp, lm = jump_rates(p, 1.0)
    assert lp == 0.0
    assert lm == pytest.approx(10.0 * math.exp(-1.2), rel=1e-15)
    lp, lm = jump_rates(p, 0.2)
    assert lp == pytest.approx(4.0 * math.exp(0.24), rel=1e-15)
    assert lm == pytest.approx(6.0 * math.exp(-0.24), rel=1e-15)


def test_grids_and_kill_index():
    p = ModelParams(n=200, beta=1.2, epsilon=0.1)
    g = full_grid(p)
    assert len(g) == 201
    assert g.points[0] == -1.0 and g.points[-1] == 1.0
    # epsilon sits exactly on the grid; the threshold point is killed,
    # so the surviving grid starts one step above.
    assert p.epsilon_n == pytest.approx(0.11)
    k = killed_grid(p)
    assert k.points[0] == pytest.approx(p.epsilon_n)
    assert len(k) == len(g) - p.kill_index


def test_kill_index_off_grid():
    p = ModelParams(n=100, beta=1.2, epsilon=0.105)
    assert p.epsilon_n == pytest.approx(0.12)


def test_grid_index_lookup():
    p = ModelParams(n=50, beta=1.2, epsilon=0.1)
    g = full_grid(p)
    for i in (0, 7, 50):
        assert g.index_of(g.points[i]) == i
    with pytest.raises(DomainError):
        g.index_of(0.017)          # not a grid point
    assert g.nearest_index(0.017) == g.index_of(0.04) or \
        g.nearest_index(0.017) == g.index_of(0.0)


def test_generator_row_sums():
    p = ModelParams(n=60, beta=1.2, epsilon=0.1)
    G = build_generator(p, killed=False)
    A = G.dense()
    assert np.allclose(A.sum(axis=1), 0.0, atol=1e-12)
    assert np.all(A[np.triu_indices_from(A, 2)] == 0.0)
    K = build_generator(p, killed=True)
    B = K.dense()
    rows = B.sum(axis=1)
    # Only the boundary row leaks mass (the down-jump into the killed zone).
    assert np.allclose(rows[1:], 0.0, atol=1e-12)
    assert rows[0] == pytest.approx(-jump_rates(p, p.epsilon_n)[1])


def test_matvec_matches_dense():
    p = ModelParams(n=40, beta=1.2, epsilon=0.1)
    G = build_generator(p, killed=True)
    rng = np.random.default_rng(0)
    v = rng.normal(size=G.size)
    A = G.dense()
    assert np.allclose(G.matvec(v), A @ v, rtol=1e-13, atol=1e-13)
    assert np.allclose(G.rmatvec(v), A.T @ v, rtol=1e-13, atol=1e-13)


def test_lambda_bar_dominates_rates():
    p = ModelParams(n=80, beta=1.5, epsilon=0.1)
    G = build_generator(p, killed=False)
    assert G.lambda_bar >= np.max(G.up + G.down)


def test_fixed_points_of_field():
    m_plus = find_m_plus(1.2)
    assert m_plus == pytest.approx(0.6585696604055238, abs=1e-12)
    assert m_plus == pytest.approx(math.tanh(1.2 * m_plus), abs=1e-12)
    m_star = find_m_star(1.2)
    assert m_star == pytest.approx(0.3855658247331119, abs=1e-12)
    assert d2g(1.2, m_star) == pytest.approx(0.0, abs=1e-9)
    assert find_m_plus(0.9) == 0.0
    with pytest.raises(UnsupportedRegimeError):
        find_m_star(0.9)


def test_potential_normalization_and_derivatives():
    # Supercritical: the minimum sits at m_plus and equals zero.
    m_plus = find_m_plus(1.2)
    assert potential_g(1.2, m_plus) == pytest.approx(0.0, abs=1e-12)
    assert potential_g(1.2, 0.0) > 0.0
    # Subcritical: the minimum is at the origin.
    assert potential_g(0.8, 0.0) == pytest.approx(0.0, abs=1e-12)
    # Finite differences agree with the closed-form derivatives.
    for beta in (0.8, 1.2):
        for m in (-0.7, -0.1, 0.3, 0.55):
            h = 1e-6
            fd1 = (potential_g(beta, m + h) - potential_g(beta, m - h)) / (2 * h)
            assert dg(beta, m) == pytest.approx(fd1, abs=5e-9)
            fd2 = (dg(beta, m + h) - dg(beta, m - h)) / (2 * h)
            assert d2g(beta, m) == pytest.approx(fd2, abs=5e-8)


def test_curvature_forms_agree_at_m_plus():
    # g''(m_+) can also be written 2 cosh(b m_+)(1 - b (1 - m_+^2)).
    b = 1.2
    mp = find_m_plus(b)
    alt = 2.0 * math.cosh(b * mp) * (1.0 - b * (1.0 - mp * mp))
    assert d2g(b, mp) == pytest.approx(alt, abs=1e-10)
    assert d2g(b, mp) > 0.0


def test_modified_rates_even_and_odd():
    for n in (100, 101):
        p = ModelParams(n=n, beta=1.2, epsilon=0.1 if n % 2 == 0 else 0.105)
        m_min = 0.0 if n % 2 == 0 else 1.0 / n
        # The confined chain cannot leave its bottom state downward.
        lp0, lm0 = modified_rates(p, m_min)
        assert lm0 == pytest.approx(0.0, abs=1e-12)
        assert lp0 > 0.0
        # Above the threshold the rates are untouched.
        for m in killed_grid(p).points[:3]:
            assert modified_rates(p, m) == pytest.approx(jump_rates(p, m))


def test_flattened_potential():
    p = ModelParams(n=100, beta=1.2, epsilon=0.1)
    eps = p.epsilon
    # Above the threshold the two potentials coincide.
    for m in (0.2, 0.5, p.m_plus, 0.9):
        assert potential_U(p, m) == pytest.approx(potential_g(1.2, m), rel=1e-12)
    # Below, the continuation is affine with the threshold slope, so it
    # sits above the double well (whose slope keeps steepening downhill).
    assert potential_U(p, 0.0) == pytest.approx(
        potential_g(1.2, eps) - eps * dg(1.2, eps), rel=1e-12)
    assert potential_U(p, 0.0) > potential_g(1.2, eps)
    assert curvature_floor(p) > 0.0


def test_require_qsd_regime():
    with pytest.raises(UnsupportedRegimeError):
        ModelParams(n=100, beta=0.9, epsilon=0.1).require_qsd_regime()
    with pytest.raises(UnsupportedRegimeError):
        ModelParams(n=100, beta=1.05, epsilon=0.4).require_qsd_regime()
    ModelParams(n=100, beta=1.2, epsilon=0.1).require_qsd_regime()
