"""Transport and variation distances, checked against a linear-programming
oracle and by property-based invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwlab.errors import DomainError
from cwlab.metrics import WeightedTvSpec, tv, w1, w2, weighted_tv

from oracles import lp_transport_cost


def _random_law(rng, k):
    x = np.sort(rng.choice(np.linspace(-1, 1, 41), size=k, replace=False))
    w = rng.dirichlet(np.ones(k))
    return x, w


@pytest.mark.parametrize("trial", range(8))
def test_w1_matches_lp_oracle(trial):
    rng = np.random.default_rng(100 + trial)
    mu = _random_law(rng, rng.integers(2, 7))
    nu = _random_law(rng, rng.integers(2, 7))
    ref = lp_transport_cost(mu[0], mu[1], nu[0], nu[1], power=1)
    assert w1(mu, nu) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("trial", range(8))
def test_w2_matches_lp_oracle(trial):
    rng = np.random.default_rng(200 + trial)
    mu = _random_law(rng, rng.integers(2, 7))
    nu = _random_law(rng, rng.integers(2, 7))
    ref = lp_transport_cost(mu[0], mu[1], nu[0], nu[1], power=2)
    assert w2(mu, nu) ** 2 == pytest.approx(ref, abs=1e-10)


def test_dirac_distances():
    mu = (np.array([0.25]), np.array([1.0]))
    nu = (np.array([-0.5]), np.array([1.0]))
    assert w1(mu, nu) == pytest.approx(0.75)
    assert w2(mu, nu) == pytest.approx(0.75)
    assert tv(mu, nu) == pytest.approx(2.0)      # disjoint supports
    assert tv(mu, mu) == 0.0


laws = st.integers(1, 6).flatmap(lambda k: st.tuples(
    st.lists(st.integers(-10, 10), min_size=k, max_size=k, unique=True),
    st.lists(st.integers(1, 20), min_size=k, max_size=k)))


def _to_law(raw):
    x, w = raw
    x = np.array(sorted(x), dtype=float) / 10.0
    w = np.array(w, dtype=float)
    return x, w / w.sum()


@settings(max_examples=60, deadline=None)
@given(laws, laws)
def test_symmetry_and_identity(a, b):
    mu, nu = _to_law(a), _to_law(b)
    for d in (w1, w2, tv):
        assert d(mu, nu) == pytest.approx(d(nu, mu), abs=1e-12)
        assert d(mu, mu) == pytest.approx(0.0, abs=1e-12)
        assert d(mu, nu) >= 0.0


@settings(max_examples=60, deadline=None)
@given(laws, laws, laws)
def test_triangle_inequality(a, b, c):
    mu, nu, rho = _to_law(a), _to_law(b), _to_law(c)
    for d in (w1, w2, tv):
        assert d(mu, rho) <= d(mu, nu) + d(nu, rho) + 1e-10


@settings(max_examples=60, deadline=None)
@given(laws, laws)
def test_order_monotonicity(a, b):
    # Holder: the order-1 cost never exceeds the order-2 cost.
    mu, nu = _to_law(a), _to_law(b)
    assert w1(mu, nu) <= w2(mu, nu) + 1e-10


def test_weighted_tv_reduces_to_tv():
    rng = np.random.default_rng(7)
    mu = _random_law(rng, 5)
    nu = _random_law(rng, 4)
    xs = np.union1d(mu[0], nu[0])
    spec0 = WeightedTvSpec(xi=0.0, V=np.zeros(len(xs)))
    assert weighted_tv(mu, nu, spec0) == pytest.approx(tv(mu, nu))
    spec = WeightedTvSpec(xi=2.0, V=np.abs(xs))
    assert weighted_tv(mu, nu, spec) >= tv(mu, nu)


def test_weighted_tv_alignment_guard():
    mu = (np.array([0.0, 0.5]), np.array([0.5, 0.5]))
    nu = (np.array([0.0, 0.4]), np.array([0.25, 0.75]))
    with pytest.raises(DomainError):
        weighted_tv(mu, nu, WeightedTvSpec(xi=1.0, V=np.ones(2)))


def test_input_validation():
    with pytest.raises(DomainError):
        w1((np.array([0.0]), np.array([0.5])), (np.array([0.0]), np.array([1.0])))
    with pytest.raises(DomainError):
        WeightedTvSpec(xi=-1.0, V=np.ones(3))
    with pytest.raises(DomainError):
        WeightedTvSpec(xi=1.0, V=np.array([1.0, -2.0]))
