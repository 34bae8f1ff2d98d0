"""Acceptance gate: one check per published claim, each printing a single
pass/fail line.

Criteria 1-10 run the named experiments at their pinned desk-scale
settings against the packaged threshold table; criterion 11 runs the
independent oracle suite with pinned tolerances (1e-9 for the matrix
exponential, 1e-10 for the transport distances, 1e-12 for the 2x2
eigenpair).
"""

import numpy as np
import pytest

from cwlab.experiments import ExperimentSpec, load_expected, run_experiment
from cwlab.evolution import expmv
from cwlab.metrics import w1, w2
from cwlab.model import ModelParams, build_generator
from cwlab.spectral import perron_eigenpair

from oracles import dense_expm_apply, lp_transport_cost, perron_2x2

CRITERIA = [
    ("01", "bn-scaling"),
    ("02", "hn-convergence"),
    ("03", "tv-decay"),
    ("04", "qsd-vs-mplus"),
    ("05", "poc-conditioned"),
    ("06", "poc-counterexample"),
    ("07", "lyapunov"),
    ("08", "doeblin"),
    ("09", "coupling-merge"),
    ("10", "mc-vs-exact"),
]


def _report(capsys, tag, name, ok):
    with capsys.disabled():
        print(f"acceptance {tag} [{name}]: {'PASS' if ok else 'FAIL'}")


@pytest.mark.parametrize("tag,name", CRITERIA, ids=[n for _, n in CRITERIA])
def test_criterion(tag, name, tmp_path, capsys):
    expected = load_expected()
    spec = ExperimentSpec(name=name, out_dir=str(tmp_path))
    result = run_experiment(spec, expected)
    _report(capsys, tag, name, result.passed)
    assert result.passed, "\n".join(result.summary)


def test_criterion_11_oracles(capsys):
    ok = True

    # Matrix exponential vs dense scipy at small size, tolerance 1e-9.
    p = ModelParams(n=20, beta=1.2, epsilon=0.1)
    G = build_generator(p, killed=True)
    rng = np.random.default_rng(11)
    for t in (0.5, 3.0):
        v = rng.normal(size=G.size)
        ok &= bool(np.max(np.abs(expmv(G, v, t)
                                 - dense_expm_apply(G, v, t))) <= 1e-9)

    # Transport distances vs the LP oracle on tiny supports, 1e-10.
    for trial in range(5):
        r = np.random.default_rng(trial)
        x = np.sort(r.choice(np.linspace(-1, 1, 21), 5, replace=False))
        y = np.sort(r.choice(np.linspace(-1, 1, 21), 6, replace=False))
        wx = r.dirichlet(np.ones(5))
        wy = r.dirichlet(np.ones(6))
        ok &= abs(w1((x, wx), (y, wy))
                  - lp_transport_cost(x, wx, y, wy, 1)) <= 1e-10
        ok &= abs(w2((x, wx), (y, wy)) ** 2
                  - lp_transport_cost(x, wx, y, wy, 2)) <= 1e-10

    # Two-state killed generator vs the closed-form eigenpair, 1e-12.
    p2 = ModelParams(n=4, beta=1.2, epsilon=0.3)
    G2 = build_generator(p2, killed=True)
    A = G2.dense()
    rho, h_ref = perron_2x2(A[0, 0], A[0, 1], A[1, 0], A[1, 1])
    pack = perron_eigenpair(G2)
    ok &= abs(pack.b_n + rho) <= 1e-12 * abs(rho)
    ok &= bool(np.max(np.abs(pack.h_n - h_ref)) <= 1e-12)

    _report(capsys, "11", "oracle-suite", ok)
    assert ok
