"""Named experiments: each one measures a family of quantities, writes
them as CSV rows, checks its acceptance properties, and reports pass or
fail.  Thresholds that cannot be derived a priori live in a versioned
`expected.txt` next to this module; `calibrate` regenerates them from a
fresh run (they are then reviewed and committed, not trusted blindly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as _config
from .errors import DomainError
from .evolution import DiscreteLaw, conditional_law, expmv, verify_doeblin, \
    verify_lyapunov
from .mean_field import integrate_limit
from .metrics import tv, w1
from .model import ModelParams, build_generator, full_grid, killed_grid
from .sampler import SimConfig, _map_replicas, full_endpoints, \
    mc_conditional_expectation, replica_stream, sample_triple_coupling, \
    triple_initial_indices
from .spectral import perron_eigenpair, stationary_full

__all__ = ["ExperimentSpec", "ExperimentResult", "EXPERIMENTS",
           "run_experiment", "load_expected", "calibrate_expected",
           "CSV_HEADER"]

CSV_HEADER = "experiment,n,beta,epsilon,t,quantity,value,stderr"

EXPERIMENT_NAMES = (
    "bn-scaling", "hn-convergence", "qsd-vs-mplus", "tv-decay",
    "poc-conditioned", "poc-counterexample", "lyapunov", "doeblin",
    "coupling-merge", "mc-vs-exact",
)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 1234
    out_dir: str = "."

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise DomainError(
                f"unknown experiment {self.name!r}; "
                f"choose from {', '.join(EXPERIMENT_NAMES)}"
            )
        schema = {"beta": float, "eps": float, "eta": float, "tol": float,
                  "replicas": int, "omega": float, "tau": float, "t": float,
                  "n_list": str}
        for key, value in self.params.items():
            if key not in schema:
                raise DomainError(f"unknown experiment parameter {key!r}")
            try:
                schema[key](value)
            except (TypeError, ValueError):
                raise DomainError(
                    f"parameter {key} = {value!r} is not a {schema[key].__name__}"
                )


@dataclass
class ExperimentResult:
    name: str
    rows: list
    summary: list
    passed: bool
    calibration: dict


def _row(name, n, beta, eps, t, quantity, value, stderr=0.0):
    return {"experiment": name, "n": n, "beta": beta, "epsilon": eps,
            "t": t, "quantity": quantity, "value": value, "stderr": stderr}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(rows, path):
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r['experiment']},{r['n']},{_fmt(r['beta'])},"
            f"{_fmt(r['epsilon'])},{_fmt(r['t'])},{r['quantity']},"
            f"{_fmt(r['value'])},{_fmt(r['stderr'])}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_expected(path=None) -> dict:
    """Threshold table; the packaged copy is used unless a path is given."""
    if path is not None:
        return _config.parse_config_file(path)
    text = resources.files("cwlab").joinpath("expected.txt").read_text()
    return _config.parse_config(text)


def _parse_n_list(params, default):
    if "n_list" in params:
        return [int(s) for s in str(params["n_list"]).split()]
    return list(default)


def _linfit(x, y):
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _wilson_lower(successes: int, trials: int, z: float = 2.326) -> float:
    if trials == 0:
        return 0.0
    ph = successes / trials
    denom = 1.0 + z * z / trials
    center = ph + z * z / (2 * trials)
    rad = z * math.sqrt(ph * (1.0 - ph) / trials + z * z / (4 * trials ** 2))
    return max(0.0, (center - rad) / denom)


# ---------------------------------------------------------------- experiments

def _exp_bn_scaling(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    ns = _parse_n_list(params, (50, 100, 200, 400, 800))
    rows, summary = [], []
    bs = []
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        pack = perron_eigenpair(build_generator(p, killed=True))
        bs.append(pack.b_n)
        rows.append(_row("bn-scaling", n, beta, eps, 0.0, "b_n", pack.b_n))
        rows.append(_row("bn-scaling", n, beta, eps, 0.0, "sqrt_n_b_n",
                         math.sqrt(n) * pack.b_n))
    sq = [math.sqrt(n) * b for n, b in zip(ns, bs)]
    mono = all(sq[i + 1] <= sq[i] * (1 + 1e-12) for i in range(len(sq) - 1))
    slope, _, r2 = _linfit(ns, np.log(bs))
    r2_min = _config.as_float(expected, "bn_scaling.r2_min", 0.99)
    ok = mono and slope < 0.0 and r2 > r2_min
    summary.append(f"sqrt(n) b_n nonincreasing: {mono}")
    summary.append(f"log b_n vs n: slope = {slope:.6g}, R^2 = {r2:.6f} "
                   f"(need slope < 0, R^2 > {r2_min})")
    summary.append(f"criterion bn-scaling: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("bn-scaling", rows, summary, ok, {})


def _exp_hn_convergence(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    ns = _parse_n_list(params, (50, 100, 200, 400, 800))
    rows, summary = [], []
    gaps = []
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        pack = perron_eigenpair(build_generator(p, killed=True))
        delta = (eps + p.m_plus) / 2.0
        x = killed_grid(p).points
        gap = 1.0 - float(np.min(pack.h_n[x >= delta]))
        gaps.append(gap)
        rows.append(_row("hn-convergence", n, beta, eps, 0.0, "hn_gap", gap))
    dec = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    gap_max = _config.as_float(expected, "hn_convergence.final_gap_max", 0.01)
    ok = dec and gaps[-1] < gap_max
    summary.append(f"1 - min h_n on [delta, 1] strictly decreasing: {dec}")
    summary.append(f"final gap {gaps[-1]:.3e} (need < {gap_max})")
    summary.append(f"criterion hn-convergence: {'PASS' if ok else 'FAIL'}")
    calib = {"hn_convergence.final_gap_max": f"{2.0 * gaps[-1]:.6g}"}
    return ExperimentResult("hn-convergence", rows, summary, ok, calib)


def _exp_qsd_vs_mplus(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    ns = _parse_n_list(params, (100, 200, 400, 800))
    rows, summary = [], []
    dists = []
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        G = build_generator(p, killed=True)
        pack = perron_eigenpair(G)
        d = w1((G.grid.points, pack.qsd),
               (np.array([p.m_plus]), np.array([1.0])))
        dists.append(d)
        rows.append(_row("qsd-vs-mplus", n, beta, eps, 0.0, "w1_to_mplus", d))
    dec = all(dists[i + 1] < dists[i] for i in range(len(dists) - 1))
    K = dists[0] * math.sqrt(ns[0])
    slack = _config.as_float(expected, "qsd_vs_mplus.slack", 1.2)
    honored = all(d <= slack * K / math.sqrt(n)
                  for n, d in zip(ns[1:], dists[1:]))
    ok = dec and honored
    summary.append(f"W1(qsd, dirac(m_+)) decreasing: {dec}")
    summary.append(f"K fitted at n={ns[0]}: {K:.6g}; "
                   f"K/sqrt(n) honored within {slack}x: {honored}")
    summary.append(f"criterion qsd-vs-mplus: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("qsd-vs-mplus", rows, summary, ok, {})


def _exp_tv_decay(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    eta = float(params.get("eta", 0.4))
    ns = _parse_n_list(params, (100, 200, 400))
    rows, summary = [], []
    rates = []
    ok = True
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps, eta=eta)
        G = build_generator(p, killed=True)
        pack = perron_eigenpair(G)
        qsd = (G.grid.points, pack.qsd)
        m0 = G.grid.points[G.grid.nearest_index(0.9)]
        law = DiscreteLaw.dirac(G.grid, m0)
        ts = np.arange(1.0, 41.0)
        tvs = []
        prev_t = 0.0
        w = law.weights
        for t in ts:
            w = expmv(G, w, t - prev_t, transpose=True)
            prev_t = t
            nu = w / w.sum()
            tvs.append(tv((G.grid.points, nu), qsd))
        tvs = np.asarray(tvs)
        for t, d in zip(ts, tvs):
            rows.append(_row("tv-decay", n, beta, eps, float(t), "tv_to_qsd", d))
        # Fit on the clean geometric-decay stretch, above the fp floor.
        sel = (tvs > 1e-11) & (tvs < 0.5)
        slope, _, r2 = _linfit(ts[sel], np.log(tvs[sel]))
        rates.append(-slope)
        ok = ok and slope < 0.0
        summary.append(f"n={n}: decay rate {-slope:.4f} (R^2={r2:.4f})")
    ratio = max(rates) / min(rates)
    ratio_max = _config.as_float(expected, "tv_decay.rate_ratio_max", 2.0)
    ok = ok and ratio <= ratio_max
    summary.append(f"rate spread across n: {ratio:.3f} (need <= {ratio_max})")
    summary.append(f"criterion tv-decay: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("tv-decay", rows, summary, ok, {})


def _exp_poc_conditioned(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    ns = _parse_n_list(params, (100, 200, 400))
    rows, summary = [], []
    ts = [0.25 * 2 ** k for k in range(9)] + [100.0]
    sups = []
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        G = build_generator(p, killed=True)
        pack = perron_eigenpair(G)
        m0 = G.grid.points[G.grid.nearest_index(0.9)]
        ode = integrate_limit(beta, m0, ts)
        gap_sup = 0.0
        law = DiscreteLaw.dirac(G.grid, m0)
        w = law.weights
        prev_t = 0.0
        for t, mbar in zip(ts, ode.values):
            w = expmv(G, w, t - prev_t, transpose=True)
            prev_t = t
            mean = float((w / w.sum()) @ G.grid.points)
            gap = abs(mean - mbar)
            gap_sup = max(gap_sup, gap)
            rows.append(_row("poc-conditioned", n, beta, eps, float(t),
                             "conditioned_gap", gap))
        # Long-time tail: both sides sit at their limits.
        tail = abs(float(pack.qsd @ G.grid.points) - p.m_plus)
        gap_sup = max(gap_sup, tail)
        rows.append(_row("poc-conditioned", n, beta, eps, 1e9,
                         "conditioned_gap_tail", tail))
        sups.append(gap_sup)
        summary.append(f"n={n}: sup_t gap = {gap_sup:.6g}")
    dec = all(sups[i + 1] < sups[i] for i in range(len(sups) - 1))
    alpha, logc, _ = _linfit(np.log(ns), np.log(sups))
    alpha = -alpha
    ok = dec and alpha > 0.0
    summary.append(f"sup gap decreasing in n: {dec}; "
                   f"fitted gap ~ C / n^alpha with alpha = {alpha:.3f}")
    summary.append(f"criterion poc-conditioned: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("poc-conditioned", rows, summary, ok, {})


def _exp_poc_counterexample(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    n = 20
    rows, summary = [], []
    p = ModelParams(n=n, beta=beta, epsilon=eps)
    Gf = build_generator(p)
    mu = stationary_full(Gf)
    mean = float(mu @ Gf.grid.points)
    rows.append(_row("poc-counterexample", n, beta, eps, 0.0,
                     "stationary_mean", mean))
    ts = [100.0, 1000.0]
    ode = integrate_limit(beta, 0.5, ts, step=1e-3)
    w1_min = _config.as_float(expected, "poc_counterexample.w1_min", 0.6)
    ok = abs(mean) < 1e-12 and ode.terminal >= 0.65
    w = np.zeros(Gf.size)
    w[Gf.grid.index_of(0.5)] = 1.0
    prev_t = 0.0
    for t, mbar in zip(ts, ode.values):
        w = expmv(Gf, w, t - prev_t, transpose=True)
        prev_t = t
        d = w1((Gf.grid.points, w / w.sum()),
               (np.array([mbar]), np.array([1.0])))
        rows.append(_row("poc-counterexample", n, beta, eps, t,
                         "w1_law_vs_limit", d))
        ok = ok and d >= w1_min
        summary.append(f"t={t:g}: W1(law, dirac(limit)) = {d:.4f} "
                       f"(need >= {w1_min})")
    summary.append(f"stationary mean = {mean:.2e} (need < 1e-12); "
                   f"limit terminal = {ode.terminal:.4f}")
    summary.append(
        f"criterion poc-counterexample: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("poc-counterexample", rows, summary, ok, {})


def _exp_lyapunov(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    tau = float(params.get("tau", 1.0))
    ns = _parse_n_list(params, (100, 200, 400))
    rows, summary = [], []
    bhats = []
    ok = True
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        pack = perron_eigenpair(build_generator(p, killed=True))
        a_hat, b_hat = verify_lyapunov(p, pack, tau)
        bhats.append(b_hat / n)
        ok = ok and a_hat < 1.0
        rows.append(_row("lyapunov", n, beta, eps, tau, "a_hat", a_hat))
        rows.append(_row("lyapunov", n, beta, eps, tau, "b_hat_over_n",
                         b_hat / n))
        summary.append(f"n={n}: a_hat = {a_hat:.4f}, b_hat/n = {b_hat / n:.6g}")
    dec = all(bhats[i + 1] < bhats[i] for i in range(len(bhats) - 1))
    ok = ok and dec
    summary.append(f"b_hat/n decreasing: {dec}")
    summary.append(f"criterion lyapunov: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("lyapunov", rows, summary, ok, {})


def _exp_doeblin(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    tau = float(params.get("tau", 1.0))
    omega = float(params.get("omega", 2.0))
    ns = _parse_n_list(params, (100, 200, 400))
    rows, summary = [], []
    chats = []
    for n in ns:
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        c_hat = verify_doeblin(p, tau, omega)
        chats.append(c_hat)
        rows.append(_row("doeblin", n, beta, eps, tau, "c_hat", c_hat))
        summary.append(f"n={n}: c_hat = {c_hat:.4f}")
    floor = _config.as_float(expected, "doeblin.c_floor", 0.05)
    ok = all(c >= floor for c in chats)
    summary.append(f"minorization floor {floor}: "
                   f"min c_hat = {min(chats):.4f}")
    summary.append(f"criterion doeblin: {'PASS' if ok else 'FAIL'}")
    calib = {"doeblin.c_floor": f"{0.5 * min(chats):.6g}"}
    return ExperimentResult("doeblin", rows, summary, ok, calib)


def _exp_coupling_merge(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    # A half-unit window keeps the reflected gap in its diffusive regime at
    # these n, so the merge event is not buried in an exponential tail that
    # still feels O(1/sqrt(n)) corrections to the envelope slack.
    omega = float(params.get("omega", 0.5))
    horizon = float(params.get("t", 1.0))
    replicas = int(params.get("replicas", 20000))
    ns = _parse_n_list(params, (400, 1600))
    rows, summary = [], []
    freqs, lcbs = [], []
    violations = 0
    for lane, n in enumerate(ns):
        p = ModelParams(n=n, beta=beta, epsilon=eps)
        g = full_grid(p)
        ilo, ihi = triple_initial_indices(p, omega)
        mid = g.points[(ilo + ihi) // 2]

        def one(i, p=p, mid=mid, lane=lane):
            rng = replica_stream(seed, lane * replicas + i)
            out = sample_triple_coupling(p, mid, omega, horizon, rng)
            return (1 if out.merged and out.exit_time is None else 0,
                    1 if out.ordering_violated else 0)

        res = _map_replicas(one, replicas)
        wins = sum(r[0] for r in res)
        violations += sum(r[1] for r in res)
        freq = wins / replicas
        lcb = _wilson_lower(wins, replicas)
        freqs.append(freq)
        lcbs.append(lcb)
        se = math.sqrt(max(freq * (1 - freq), 1e-12) / replicas)
        rows.append(_row("coupling-merge", n, beta, eps, horizon,
                         "merge_before_exit_freq", freq, se))
        rows.append(_row("coupling-merge", n, beta, eps, horizon,
                         "merge_freq_lcb99", lcb))
        summary.append(f"n={n}: merge-and-stay frequency {freq:.5f} "
                       f"(99% LCB {lcb:.5f}, {wins}/{replicas})")
    floor = _config.as_float(expected, "coupling_merge.freq_floor", 0.0)
    ratio = (max(freqs) / min(freqs)) if min(freqs) > 0 else math.inf
    lo = _config.as_float(expected, "coupling_merge.ratio_lo", 0.5)
    hi = _config.as_float(expected, "coupling_merge.ratio_hi", 2.0)
    ok = (all(l > max(0.0, floor) for l in lcbs) and lo <= ratio <= hi
          and violations == 0)
    summary.append(f"frequency ratio across n: {ratio:.3f} "
                   f"(need within [{lo}, {hi}]); ordering violations: "
                   f"{violations}")
    summary.append(f"criterion coupling-merge: {'PASS' if ok else 'FAIL'}")
    calib = {"coupling_merge.freq_floor": f"{0.5 * min(lcbs):.6g}"}
    return ExperimentResult("coupling-merge", rows, summary, ok, calib)


def _exp_mc_vs_exact(params, seed, expected):
    beta = float(params.get("beta", 1.2))
    eps = float(params.get("eps", 0.1))
    n = 100
    replicas = int(params.get("replicas", 5000))
    rows, summary = [], []
    p = ModelParams(n=n, beta=beta, epsilon=eps)
    G = build_generator(p, killed=True)
    picker = replica_stream(seed, 10 ** 6)
    x = G.grid.points
    pool = x[(x >= 0.4) & (x <= 0.95)]
    hits = 0
    for k in range(10):
        m0 = float(pool[picker.integers(len(pool))])
        t = float(picker.uniform(1.0, 8.0))
        cfg = SimConfig(seed=seed + k + 1, replicas=replicas, t_max=t + 1.0)
        est, se, surv = mc_conditional_expectation(p, m0, lambda v: v, t, cfg)
        nu, _ = conditional_law(p, DiscreteLaw.dirac(G.grid, m0), t)
        exact = nu.mean()
        z = abs(est - exact) / se if se > 0 else 0.0
        hit = z <= 3.0
        hits += hit
        rows.append(_row("mc-vs-exact", n, beta, eps, t, "mc_mean_z", z, se))
        summary.append(f"pair {k}: m0={m0:.2f} t={t:.2f} "
                       f"mc={est:.5f}+-{se:.5f} exact={exact:.5f} z={z:.2f}")
    min_hits = int(_config.as_float(expected, "mc_vs_exact.min_hits", 9))

    # Empirical one-time law of the unkilled chain against the exact
    # transient law, in total variation.  Scales with the replica override
    # so reduced-size runs stay cheap.
    law_reps = 40 * replicas
    t_law = 2.0
    Gf = build_generator(p)
    cfg = SimConfig(seed=seed, replicas=law_reps, t_max=t_law)
    idx = full_endpoints(p, 0.0, t_law, cfg)
    emp = np.bincount(idx, minlength=Gf.size) / law_reps
    w = np.zeros(Gf.size)
    w[Gf.grid.index_of(0.0)] = 1.0
    exact_law = expmv(Gf, w, t_law, transpose=True)
    d = tv((Gf.grid.points, emp), (Gf.grid.points, exact_law / exact_law.sum()))
    bound = 4.0 * math.sqrt(Gf.size / law_reps)
    rows.append(_row("mc-vs-exact", n, beta, eps, t_law, "law_tv", d))
    ok = hits >= min_hits and d <= bound
    summary.append(f"z <= 3 in {hits}/10 pairs (need >= {min_hits})")
    summary.append(f"law TV {d:.4f} vs bound {bound:.4f} "
                   f"({law_reps} replicas)")
    summary.append(f"criterion mc-vs-exact: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult("mc-vs-exact", rows, summary, ok, {})


EXPERIMENTS = {
    "bn-scaling": _exp_bn_scaling,
    "hn-convergence": _exp_hn_convergence,
    "qsd-vs-mplus": _exp_qsd_vs_mplus,
    "tv-decay": _exp_tv_decay,
    "poc-conditioned": _exp_poc_conditioned,
    "poc-counterexample": _exp_poc_counterexample,
    "lyapunov": _exp_lyapunov,
    "doeblin": _exp_doeblin,
    "coupling-merge": _exp_coupling_merge,
    "mc-vs-exact": _exp_mc_vs_exact,
}


def run_experiment(spec: ExperimentSpec, expected: dict | None = None) -> ExperimentResult:
    """Run one named experiment; writes `<name>.csv` and `summary.txt`
    into the output directory and returns the in-memory result."""
    if expected is None:
        expected = load_expected()
    result = EXPERIMENTS[spec.name](spec.params, spec.seed, expected)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(result.rows, out / f"{spec.name}.csv")
    (out / "summary.txt").write_text("\n".join(result.summary) + "\n",
                                     encoding="utf-8")
    return result


def calibrate_expected(names=EXPERIMENT_NAMES, seed: int = 1234,
                       base: dict | None = None) -> dict:
    """Re-derive the measured thresholds by running the experiments and
    widening what they report; fixed thresholds keep their values."""
    expected = dict(base if base is not None else load_expected())
    for name in names:
        result = EXPERIMENTS[name]({}, seed, expected)
        expected.update(result.calibration)
    return expected
