"""Seeded trial runner.

Trial ``i`` of stream ``name`` draws from
``SeedSequence(master_seed, spawn_key=(crc32(name), i))``, so results depend
only on ``(master_seed, name, i)`` and never on how trials are spread over
workers.  Per-trial outputs are stacked in trial order and reduced with
correctly rounded sums (:func:`math.fsum`), which is order independent.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

__all__ = ["trial_rng", "run_trials", "fsum_mean", "mean_and_se"]


def _stream_key(stream: str) -> int:
    return zlib.crc32(stream.encode("utf-8"))


def trial_rng(seed: int, stream: str, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_stream_key(stream), int(index)))
    return np.random.default_rng(ss)


def _run_chunk(fn, seed, stream, lo, hi, args):
    return [np.atleast_1d(np.asarray(fn(trial_rng(seed, stream, i), *args), dtype=float)) for i in range(lo, hi)]


def run_trials(
    fn: Callable[..., np.ndarray],
    trials: int,
    seed: int,
    stream: str,
    workers: int = 1,
    args: tuple = (),
) -> np.ndarray:
    """Evaluate ``fn(rng_i, *args)`` for ``i < trials``; returns a ``(trials, ...)`` array.

    ``fn`` and ``args`` must be picklable when ``workers > 1``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    workers = max(1, min(int(workers), trials))
    if workers == 1:
        rows = _run_chunk(fn, seed, stream, 0, trials, args)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chunk, fn, seed, stream, int(lo), int(hi), args)
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            rows = [row for fut in futures for row in fut.result()]
    return np.stack(rows)


def fsum_mean(values: np.ndarray) -> np.ndarray:
    """Mean along axis 0 using exactly rounded sums of each column."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    flat = values.reshape(n, -1)
    out = np.array([math.fsum(col) / n for col in flat.T])
    return out.reshape(values.shape[1:])


def mean_and_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and CLT standard error along axis 0 (order independent)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = fsum_mean(values)
    if n < 2:
        return mean, np.full(mean.shape, np.nan)
    var = fsum_mean((values - mean) ** 2) * n / (n - 1)
    return mean, np.sqrt(var / n)
