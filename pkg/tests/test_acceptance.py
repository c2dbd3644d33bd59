"""Acceptance gate.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion.  The Monte Carlo criteria run through
:func:`roughregen.cli.execute` so the same payloads feed the determinism check.
"""

import time
from fractions import Fraction as F

import numpy as np
import pytest

from roughregen.cli import execute, parse_config
from roughregen.limits import anomaly_lln_curve, estimate_gamma, metric
from roughregen.path_lift import ScaledRoughPath, chen_defect, decomposition_defect, sym
from roughregen.regen import (
    DelayedRandomWalk,
    FiniteLaw,
    LinearDrift,
    MarkovAdditive,
    MarkovChainSpec,
    PeriodicEnvWalk,
    Rotor,
    block_stats,
    gen_rotor,
    simple_walk_law,
)
from roughregen.renewal import (
    BlockLaw,
    RenewalModel,
    key_renewal_limit,
    size_biased_forcing,
    size_biased_sequence,
    renewal_sequence,
)
from roughregen.report import dumps
from roughregen.variation import pvar_bruteforce, pvar_level1, pvar_level2, pvar_level2_bruteforce

SEED = 20240917
ROTOR = {"kind": "rotor", "p_ccw": 0.75, "extra_step": True}
WALK2 = {"kind": "delayed_rw", "step": {"simple_walk": 2}}
WALK1 = {"kind": "delayed_rw", "step": {"simple_walk": 1}}
AREA_TARGET = 0.125

MC_CONFIGS = {
    "rotor_blocks": {"command": "estimate", "generator": ROTOR, "n": 5 * 100_000 + 5},
    "rotor_area": {"command": "mc-area", "generator": ROTOR, "n": 10_000, "trials": 10_000,
                   "gamma_target": [[0.0, AREA_TARGET], [-AREA_TARGET, 0.0]]},
    "rotor_marginal": {"command": "mc-marginal", "generator": ROTOR, "n": 10_000, "trials": 10_000},
    "walk_blocks": {"command": "estimate", "generator": WALK2, "n": 100_000},
    "walk_donsker": {"command": "donsker", "generator": WALK2, "n": 10_000, "trials": 10_000, "p": 2.5,
                     "tightness_n": [64, 128, 256, 512, 1024], "tightness_trials": 200},
    "tightness": {"command": "tightness", "generator": WALK1, "n_list": [64, 128, 256, 512, 1024], "p": 2.5,
                  "trials": 200, "negative_control": {"kind": "linear_drift", "velocity": [1.0]}},
    "size_bias": {"command": "lemma-a2", "atoms": [{"prob": "1/3", "T": T, "xi": []} for T in (1, 2, 3)],
                  "r": 0, "ell": 1, "N": 200, "mc_n": [1000], "trials": 10_000},
}


def _config(name, workers):
    return parse_config({**MC_CONFIGS[name], "master_seed": SEED, "workers": workers, "formats": ["json"]})


class _Runs:
    """Lazily executed configs, memoised per worker count."""

    def __init__(self):
        self.cache = {}

    def get(self, name, workers=1):
        key = (name, workers)
        if key not in self.cache:
            t0 = time.perf_counter()
            payload, _, _, passed = execute(_config(name, workers))
            self.cache[key] = (payload, passed, time.perf_counter() - t0)
        return self.cache[key]

    def payload(self, name, workers=1):
        return self.get(name, workers)[0]


@pytest.fixture(scope="module")
def runs():
    return _Runs()


def _metric(rows, name):
    return next(m for m in rows if m["name"] == name)


def _fmt(m):
    return f"{m['name']} est={m['estimate']:.6g} se={m['se']:.3g} target={m['target']:.6g} z={m['z']:.2f}"


# -- 1 ------------------------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_chen_and_symmetry_algebra(record_property):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst_chen = worst_sym = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        N = int(rng.integers(1, 65))
        steps = rng.integers(-1, 2, size=(N, d))
        X = np.vstack([np.zeros((1, d)), np.cumsum(steps, axis=0)])
        srp = ScaledRoughPath(X, int(rng.integers(1, N + 1)))
        s, r, t = np.sort(rng.uniform(0.0, srp.horizon, size=(3, 100)), axis=0)
        ok = (s < r) & (r < t)
        worst_chen = max(worst_chen, float(np.max(np.abs(chen_defect(srp, s=s[ok], r=r[ok], t=t[ok])))))
        # unit scale makes the grid level 2 the raw Stratonovich sum I_{M,N}
        M, K = np.triu_indices(N + 1, k=1)
        inc = X[K] - X[M]
        S = sym(ScaledRoughPath(X, 1).level2_grid(M, K))
        worst_sym = max(worst_sym, float(np.max(np.abs(S - 0.5 * inc[:, :, None] * inc[:, None, :]))))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"chen={worst_chen:.2e} sym={worst_sym:.2e} time={elapsed:.1f}s")
    assert worst_chen <= 1e-10
    assert worst_sym <= 1e-12
    assert elapsed < 10


# -- 2 ------------------------------------------------------------------------------------------


def _generators():
    P = np.array([[0.2, 0.5, 0.3], [0.4, 0.1, 0.5], [0.6, 0.3, 0.1]])
    f = np.array([[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]])
    tilted = FiniteLaw([[1.0], [-1.0]], [0.6, 0.4])
    return [
        DelayedRandomWalk(simple_walk_law(2)),
        DelayedRandomWalk(simple_walk_law(3), FiniteLaw([[5.0, 0.0, 0.0], [0.0, -3.0, 1.0]], [0.5, 0.5])),
        MarkovAdditive(MarkovChainSpec(P, f)),
        Rotor(0.75, True),
        Rotor(0.3, False, excursion=2),
        PeriodicEnvWalk((tilted, FiniteLaw([[1.0], [-1.0]], [0.4, 0.6]))),
        LinearDrift((1.0, -0.5)),
    ]


@pytest.mark.criterion(2)
def test_block_decomposition(record_property):
    gens = _generators()
    t0 = time.perf_counter()
    worst, pairs = 0.0, 0
    for i in range(200):
        traj = gens[i % len(gens)].sample(1500, np.random.default_rng([SEED, i]))
        kmax = min(20, traj.complete_blocks)
        for k in range(1, kmax + 1):
            for ell in range(k):
                worst = max(worst, float(np.max(np.abs(decomposition_defect(traj, ell, k)))))
                pairs += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"defect={worst:.2e} pairs={pairs} time={elapsed:.1f}s")
    assert worst <= 1e-10
    assert pairs >= 200 * 20
    assert elapsed < 30


# -- 3 ------------------------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_pvar_oracle_equivalence(record_property):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst1 = worst2 = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        X = np.cumsum(rng.normal(size=(n, int(rng.integers(1, 4)))), axis=0)
        for p in (1.0, 2.0, 2.5):
            worst1 = max(worst1, abs(pvar_level1(X, p) - pvar_bruteforce(X, p)))
    for _ in range(300):
        n = int(rng.integers(2, 11))
        d = int(rng.integers(1, 4))
        X = np.vstack([np.zeros((1, d)), np.cumsum(rng.integers(-1, 2, size=(n - 1, d)), axis=0)])
        srp = ScaledRoughPath(X, int(rng.integers(1, 4)))
        for q in (1.25, 1.5):
            worst2 = max(worst2, abs(pvar_level2(srp, q) - pvar_level2_bruteforce(srp, q)))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"level1={worst1:.2e} level2={worst2:.2e} time={elapsed:.1f}s")
    assert worst1 <= 1e-12
    assert worst2 <= 1e-12
    assert elapsed < 60


# -- 4 ------------------------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_deterministic_area_anomaly(record_property):
    t0 = time.perf_counter()
    n = 4000
    traj = gen_rotor(1.0, False, n + 8, seed=SEED)
    gamma, _ = estimate_gamma(block_stats(traj))
    ts = np.arange(0, n + 1, 4) / n
    curve = anomaly_lln_curve(traj, ts, n)[:, 0, 1]
    slope_err = float(np.max(np.abs(curve - 0.25 * ts)))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"gamma12={float(gamma[0, 1])!r} slope_err={slope_err:.1e} time={elapsed:.2f}s")
    assert abs(gamma[0, 1] - 0.25) <= 1e-15
    assert slope_err <= 1e-15
    assert elapsed < 1


# -- 5 ------------------------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(5)
def test_area_anomaly_block_estimate(runs, record_property):
    res = runs.payload("rotor_blocks")["result"]
    assert res["block_count"] >= 100_000
    m = metric("gamma_12", res["gamma"]["entry_12"], res["gamma"]["se"][0][1], AREA_TARGET)
    record_property("detail", "blocks " + _fmt(m))
    assert m["passed"]


@pytest.mark.slow
@pytest.mark.criterion(5)
def test_area_anomaly_monte_carlo(runs, record_property):
    payload, passed, elapsed = runs.get("rotor_area")
    m = _metric(payload["result"]["metrics"], "area_12")
    assert m["target"] == AREA_TARGET
    record_property("detail", f"mc {_fmt(m)} time={elapsed:.0f}s")
    assert elapsed < 300
    assert m["passed"] and passed


# -- 6 ------------------------------------------------------------------------------------------


def _sigma_metrics(result):
    return [m for m in result["metrics"] if m["name"].startswith("sigma_")]


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_covariance_rotor_blocks(runs, record_property):
    rows = _sigma_metrics(runs.payload("rotor_blocks")["result"])
    assert [m["target"] for m in rows] == [0.1, 0.0, 0.1]
    record_property("detail", "rotor max|z|=%.2f" % max(abs(m["z"]) for m in rows))
    assert all(m["passed"] for m in rows)


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_covariance_walk_blocks(runs, record_property):
    rows = _sigma_metrics(runs.payload("walk_blocks")["result"])
    assert [m["target"] for m in rows] == [0.5, 0.0, 0.5]
    record_property("detail", "walk max|z|=%.2f" % max(abs(m["z"]) for m in rows))
    assert all(m["passed"] for m in rows)


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_fourth_moment_gaussianity(runs, record_property):
    rotor_payload, _, elapsed = runs.get("rotor_marginal")
    rotor = rotor_payload["result"]
    walk = runs.payload("walk_donsker")["result"]["marginal"]
    ratios = [k["ratio"] for res in (rotor, walk) for k in res["fourth_moment"]]
    assert not rotor["degenerate"] and not walk["degenerate"]
    assert len(ratios) == 8
    record_property("detail", "kurtosis ratios " + ",".join(f"{r:.4f}" for r in ratios))
    assert all(0.9 <= r <= 1.1 for r in ratios)
    assert elapsed < 300


# -- 7 ------------------------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(7)
def test_donsker_diagonal(runs, record_property):
    diag = runs.payload("walk_donsker")["result"]["diagonal"]
    assert [m["target"] for m in diag] == [0.25, 0.25]
    record_property("detail", "; ".join(_fmt(m) for m in diag))
    assert all(m["passed"] for m in diag)


# -- 8 ------------------------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_tightness_probe(runs, record_property):
    payload, passed, _ = runs.get("tightness")
    probe = payload["result"]["probe"]
    control = payload["result"]["negative_control"]
    record_property(
        "detail",
        f"variation={probe['median_variation']:.3f} control_growth={control['probe']['growth_ratio']:.1f}",
    )
    assert probe["passed"] and probe["median_variation"] < 0.25
    assert control["probe"]["growth_ratio"] >= 2.0 and control["growth_detected"]
    assert control["probe"]["passed"] is False
    assert passed


# -- 9 ------------------------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_renewal(record_property):
    t0 = time.perf_counter()
    u = renewal_sequence(RenewalModel.geometric(0.5), 200)
    geo_err = float(np.max(np.abs(np.asarray(u[1:]) - 0.5)))
    res = key_renewal_limit(RenewalModel.uniform([1, 2], exact=False), [1.0], 400)
    gap = float(np.max(np.abs(np.asarray(res.a[40:]) - res.limit)))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"geometric={geo_err:.1e} gap(n>=40)={gap:.1e} time={elapsed:.2f}s")
    assert res.limit == pytest.approx(2 / 3, abs=1e-15)
    assert geo_err <= 1e-12
    assert gap < 1e-6
    assert elapsed < 1


# -- 10 -----------------------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_size_biased_recursion():
    law = BlockLaw.lengths_only({1: F(1, 3), 2: F(1, 3), 3: F(1, 3)})
    a = size_biased_sequence(law, 0, 1, 200)
    assert abs(float(a[200]) - 7 / 3) < 1e-6
    b = size_biased_forcing(law, 0, 1)
    assert sum(b) == F(14, 3)


@pytest.mark.slow
@pytest.mark.criterion(10)
def test_size_biased_monte_carlo(runs, record_property):
    payload, passed, _ = runs.get("size_bias")
    res = payload["result"]
    assert res["limit"] == ["7/3"] and res["sum_b"] == ["14/3"]
    row = res["monte_carlo"][0]
    m = metric("E[T_kappa(1000)]", row["estimate"], row["se"], 7 / 3)
    record_property("detail", _fmt(m))
    assert m["passed"] and passed


# -- 11 -----------------------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(11)
@pytest.mark.parametrize("name", sorted(MC_CONFIGS))
def test_determinism(runs, name, record_property):
    first = dumps(runs.payload(name, workers=1))
    again = dumps(execute(_config(name, 1))[0]) if name in ("rotor_blocks", "size_bias") else first
    other = dumps(runs.payload(name, workers=4))
    record_property("detail", f"{name} ok")
    assert first == again
    assert first == other
