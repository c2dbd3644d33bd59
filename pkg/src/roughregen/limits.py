"""Limit objects of the rough invariance principle and their Monte Carlo checks.

Convergence in distribution is not observable directly.  The checks here
test moment functionals against CLT bands (``|z| < 3``) together with a
tightness probe on the rough norms:

* ``X^(n)_1`` has covariance ``Sigma = E[Y (x) Y] / E[T]``;
* ``E[Antisym(XX^(n)_{0,1})] -> Gamma = E[A] / E[T]`` because the
  Stratonovich area of Brownian motion is centered;
* ``diag E[XX^(n)_{0,1}] -> diag(Sigma) / 2`` (Stratonovich correction).

The endpoint functional at ``t = 1`` includes the partial block at time ``n``;
its bias is ``O(1/n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .montecarlo import fsum_mean, mean_and_se, run_trials, trial_rng
from .path_lift import ScaledRoughPath, antisym, level2_stratonovich
from .regen import BlockStats, DelayedRandomWalk, FiniteLaw, block_stats, kappa
from .variation import rough_norm_bounds

__all__ = [
    "LimitEstimates",
    "Targets",
    "ratio_estimate",
    "estimate_covariance",
    "estimate_gamma",
    "estimate_beta",
    "estimate_limits",
    "anomaly_lln_curve",
    "renewal_lln_curve",
    "metric",
    "target_limits",
    "endpoint_samples",
    "mc_marginal_test",
    "mc_area_test",
    "pvar_tightness_probe",
    "donsker_check",
    "METHOD_NOTE",
]

METHOD_NOTE = (
    "distributional convergence is checked through moment functionals with "
    "3-SE CLT bands plus a p-variation tightness probe; bands and (n, trials) "
    "are engineering choices, no convergence rate is asserted"
)

Z_BAND = 3.0


@dataclass(frozen=True, eq=False)
class LimitEstimates:
    sigma: np.ndarray
    sigma_se: np.ndarray
    gamma: np.ndarray
    gamma_se: np.ndarray
    beta: float
    beta_se: float
    block_count: int


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``mean(num) / mean(den)`` with its delta-method standard error.

    ``Var(R) ~ Var(num - R den) / (K mean(den)^2)`` for i.i.d. rows.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    K = den.shape[0]
    if K == 0:
        raise ValueError("ratio estimate needs at least one block")
    mean_den = float(fsum_mean(den))
    R = fsum_mean(num) / mean_den
    if K < 2:
        return R, np.full(R.shape, np.nan)
    resid = num - R * den.reshape((K,) + (1,) * (num.ndim - 1))
    var = fsum_mean(resid**2) * K / (K - 1)
    return R, np.sqrt(var / K) / abs(mean_den)


def _generic(blocks: BlockStats) -> BlockStats:
    gen = blocks.generic()
    if len(gen) < 2:
        raise ValueError("need at least 2 generic blocks (the delay block is excluded)")
    return gen


def estimate_covariance(blocks: BlockStats) -> tuple[np.ndarray, np.ndarray]:
    gen = _generic(blocks)
    outer = gen.Y[:, :, None] * gen.Y[:, None, :]
    return ratio_estimate(outer, gen.T)


def estimate_gamma(blocks: BlockStats) -> tuple[np.ndarray, np.ndarray]:
    gen = _generic(blocks)
    return ratio_estimate(gen.A, gen.T)


def estimate_beta(blocks: BlockStats) -> tuple[float, float]:
    """``1 / E[T]``; SE by the delta method ``se(mean T) / mean(T)^2``."""
    gen = _generic(blocks)
    m, se = mean_and_se(gen.T.astype(float))
    return 1.0 / float(m), float(se) / float(m) ** 2


def estimate_limits(blocks: BlockStats) -> LimitEstimates:
    sigma, sigma_se = estimate_covariance(blocks)
    gamma, gamma_se = estimate_gamma(blocks)
    beta, beta_se = estimate_beta(blocks)
    return LimitEstimates(sigma, sigma_se, gamma, gamma_se, beta, beta_se, len(blocks) - 1)


def _grid_time(ts: np.ndarray, n: int) -> np.ndarray:
    """``n t``, snapped to the nearest integer when within rounding (``t = k/n`` gives ``k``)."""
    u = n * ts
    r = np.round(u)
    return np.where(np.abs(u - r) <= 1e-9 * np.maximum(1.0, np.abs(u)), r, u)


def anomaly_lln_curve(traj, ts, n: int) -> np.ndarray:
    """``(1/n) sum_{1 <= k <= kappa(nt)} A_{tau_{k-1}, tau_k}`` for each ``t``."""
    ts = np.asarray(ts, dtype=float)
    blocks = block_stats(traj)
    d = traj.dim
    cum = np.concatenate([np.zeros((1, d, d)), np.cumsum(blocks.A, axis=0)])
    out = np.zeros((ts.size, d, d))
    pos = ts > 0
    if np.any(pos):
        out[pos] = cum[kappa(traj, _grid_time(ts[pos], n))] / n
    return out


def renewal_lln_curve(traj, ts, n: int) -> np.ndarray:
    """``kappa(nt) / (nt)``; ``nan`` at ``t = 0``."""
    ts = np.asarray(ts, dtype=float)
    out = np.full(ts.size, np.nan)
    pos = ts > 0
    if np.any(pos):
        u = _grid_time(ts[pos], n)
        out[pos] = kappa(traj, u) / u
    return out


def metric(name: str, estimate, se, target, target_se=0.0, band: float = Z_BAND) -> dict:
    """One report row: ``z = (estimate - target) / sqrt(se^2 + target_se^2)``."""
    estimate, se, target, target_se = (float(v) for v in (estimate, se, target, target_se))
    denom = math.hypot(se, target_se)
    diff = estimate - target
    if denom > 0:
        z = diff / denom
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return {
        "name": name,
        "estimate": estimate,
        "se": se,
        "target": target,
        "target_se": target_se,
        "z": z,
        "passed": bool(abs(z) < band),
    }


@dataclass(frozen=True, eq=False)
class Targets:
    sigma: np.ndarray
    sigma_se: np.ndarray
    gamma: np.ndarray
    gamma_se: np.ndarray
    source: str  # "exact" or "estimated"


def target_limits(gen, seed: int, n_target: int = 200_000) -> Targets:
    """Closed-form limits when the generator has them, else block estimates on an
    independent trajectory of ``n_target`` steps."""
    exact = gen.exact_limits()
    if exact is not None:
        z = np.zeros_like(exact.sigma)
        return Targets(exact.sigma, z, exact.gamma, z.copy(), "exact")
    traj = gen.sample(n_target, trial_rng(seed, "target", 0))
    est = estimate_limits(block_stats(traj))
    return Targets(est.sigma, est.sigma_se, est.gamma, est.gamma_se, "estimated")


def _endpoint_trial(rng, gen, n):
    X = gen.sample(n, rng).path
    level1 = X[n] / math.sqrt(n)
    level2 = level2_stratonovich(X, 0, n) / n
    return np.concatenate([level1, level2.ravel()])


def endpoint_samples(gen, n: int, trials: int, seed: int, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial ``X^(n)_1`` (trials, d) and ``XX^(n)_{0,1}`` (trials, d, d)."""
    d = gen.dim
    raw = run_trials(_endpoint_trial, trials, seed, f"endpoint/{n}", workers, (gen, n))
    return raw[:, :d], raw[:, d:].reshape(trials, d, d)


def _directions(sigma: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """Eigen-directions spanning the range of ``sigma`` plus pairwise diagonals."""
    vals, vecs = np.linalg.eigh(sigma)
    scale = max(float(np.max(np.abs(vals))), 0.0)
    keep = vecs[:, vals > rel_tol * scale] if scale > 0 else vecs[:, :0]
    dirs = [keep[:, i] for i in range(keep.shape[1])]
    for i in range(keep.shape[1]):
        for j in range(i + 1, keep.shape[1]):
            dirs.append((keep[:, i] + keep[:, j]) / math.sqrt(2))
            dirs.append((keep[:, i] - keep[:, j]) / math.sqrt(2))
    return np.array(dirs).reshape(-1, sigma.shape[0])


def mc_marginal_test(
    gen,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    *,
    targets: Targets | None = None,
    samples: tuple[np.ndarray, np.ndarray] | None = None,
    kurtosis_band: tuple[float, float] = (0.9, 1.1),
) -> dict:
    """First level: ``X^(n)_1`` against ``N(0, Sigma)``.

    Gaussianity is probed through ``E[(v.X)^4] / (3 E[(v.X)^2]^2)`` on
    directions in the range of ``Sigma``; a singular ``Sigma`` restricts the
    panel to its range (empty when ``Sigma = 0``).
    """
    targets = targets or target_limits(gen, seed)
    level1, _ = samples or endpoint_samples(gen, n, trials, seed, workers)
    d = level1.shape[1]
    metrics = []
    mean, mean_se = mean_and_se(level1)
    for i in range(d):
        metrics.append(metric(f"mean_{i + 1}", mean[i], mean_se[i], 0.0))
    prods = level1[:, :, None] * level1[:, None, :]
    cov, cov_se = mean_and_se(prods)
    for i in range(d):
        for j in range(i, d):
            metrics.append(
                metric(f"cov_{i + 1}{j + 1}", cov[i, j], cov_se[i, j], targets.sigma[i, j], targets.sigma_se[i, j])
            )
    dirs = _directions(targets.sigma)
    degenerate = dirs.shape[0] < d
    kurt = []
    lo, hi = kurtosis_band
    for v in dirs:
        proj = level1 @ v
        m2 = float(fsum_mean(proj**2))
        m4 = float(fsum_mean(proj**4))
        ratio = m4 / (3.0 * m2**2) if m2 > 0 else math.nan
        kurt.append({"direction": v.tolist(), "ratio": ratio, "passed": bool(lo <= ratio <= hi)})
    passed = all(m["passed"] for m in metrics) and all(k["passed"] for k in kurt)
    return {
        "check": "mc_marginal",
        "n": n,
        "trials": int(level1.shape[0]),
        "target_source": targets.source,
        "degenerate": bool(degenerate),
        "max_abs_unscaled_level1": float(np.max(np.abs(level1)) * math.sqrt(n)),
        "metrics": metrics,
        "fourth_moment": kurt,
        "passed": bool(passed),
        "method": METHOD_NOTE,
    }


def mc_area_test(
    gen,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    *,
    targets: Targets | None = None,
    samples: tuple[np.ndarray, np.ndarray] | None = None,
) -> dict:
    """Second level: mean of ``Antisym(XX^(n)_{0,1})`` against ``Gamma``."""
    targets = targets or target_limits(gen, seed)
    _, level2 = samples or endpoint_samples(gen, n, trials, seed, workers)
    area = antisym(level2)
    d = area.shape[1]
    mean, se = mean_and_se(area)
    metrics, spread = [], []
    for i in range(d):
        for j in range(i + 1, d):
            metrics.append(
                metric(f"area_{i + 1}{j + 1}", mean[i, j], se[i, j], targets.gamma[i, j], targets.gamma_se[i, j])
            )
            vals = area[:, i, j]
            q05, q50, q95 = np.quantile(vals, [0.05, 0.5, 0.95])
            spread.append(
                {"entry": f"{i + 1}{j + 1}", "std": float(vals.std(ddof=1)) if vals.size > 1 else math.nan,
                 "q05": float(q05), "q50": float(q50), "q95": float(q95)}
            )
    return {
        "check": "mc_area",
        "n": n,
        "trials": int(area.shape[0]),
        "target_source": targets.source,
        "gamma_target": targets.gamma.tolist(),
        "metrics": metrics,
        "spread": spread,
        "passed": all(m["passed"] for m in metrics),
        "method": METHOD_NOTE,
    }


def _norm_trial(rng, gen, n, p):
    srp = ScaledRoughPath(gen.sample(n, rng).path, n)
    r = rough_norm_bounds(srp, p)
    return np.array([r.value, r.lower, r.upper, 1.0 if r.mode == "exact" else 0.0])


def pvar_tightness_probe(
    gen,
    n_list,
    p: float,
    trials: int,
    seed: int,
    workers: int = 1,
    *,
    max_variation: float = 0.25,
) -> dict:
    """Median and 95% quantile of the rough norm on ``[0, 1]`` for each ``n``.

    Passes when the relative spread ``(max - min) / min`` of the medians stays
    below ``max_variation`` (a proxy for stochastic boundedness).
    """
    if not p > 2:
        raise ValueError(f"tightness probe needs p > 2, got {p}")
    n_list = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n list must be strictly increasing")
    rows = []
    for n in n_list:
        raw = run_trials(_norm_trial, trials, seed, f"tightness/{n}", workers, (gen, n, p))
        vals = raw[:, 0]
        rows.append(
            {
                "n": n,
                "median": float(np.median(vals)),
                "q95": float(np.quantile(vals, 0.95)),
                "mode": "exact" if np.all(raw[:, 3] == 1.0) else "sandwich",
                "max_bracket_width": float(np.max(raw[:, 2] - raw[:, 1])),
            }
        )
    medians = np.array([r["median"] for r in rows])
    lo = float(medians.min())
    if lo > 0:
        variation = float((medians.max() - lo) / lo)
        growth = float(medians[-1] / medians[0])
    else:
        variation = 0.0 if medians.max() == 0 else math.inf
        growth = 1.0 if medians.max() == 0 else math.inf
    return {
        "check": "pvar_tightness",
        "p": p,
        "trials": trials,
        "rows": rows,
        "median_variation": variation,
        "growth_ratio": growth,
        "max_variation": max_variation,
        "passed": bool(variation < max_variation),
        "method": METHOD_NOTE,
    }


def donsker_check(
    step_law: FiniteLaw,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    *,
    p: float = 2.5,
    tightness_n=(64, 128, 256, 512, 1024),
    tightness_trials: int = 200,
) -> dict:
    """Rough Donsker bundle for a centered random walk.

    Adds the Stratonovich correction: the mean of ``diag XX^(n)_{0,1}`` must
    approach ``diag E[Y (x) Y] / 2``.
    """
    gen = DelayedRandomWalk(step_law)
    targets = target_limits(gen, seed)
    samples = endpoint_samples(gen, n, trials, seed, workers)
    marginal = mc_marginal_test(gen, n, trials, seed, workers, targets=targets, samples=samples)
    area = mc_area_test(gen, n, trials, seed, workers, targets=targets, samples=samples)
    level2 = samples[1]
    d = level2.shape[1]
    diag = np.einsum("kii->ki", level2)
    mean, se = mean_and_se(diag)
    half = 0.5 * np.diag(step_law.second_moment())
    diagonal = [metric(f"diag_{i + 1}", mean[i], se[i], half[i]) for i in range(d)]
    tight = pvar_tightness_probe(gen, tightness_n, p, tightness_trials, seed, workers)
    passed = marginal["passed"] and area["passed"] and tight["passed"] and all(m["passed"] for m in diagonal)
    return {
        "check": "donsker",
        "n": n,
        "trials": trials,
        "marginal": marginal,
        "area": area,
        "diagonal": diagonal,
        "tightness": tight,
        "passed": bool(passed),
        "method": METHOD_NOTE,
    }
