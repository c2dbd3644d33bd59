"""p-variation of sampled paths and of level-2 lifts.

All suprema are taken over partitions made of grid points.  For the
piecewise-linear lift with ``p >= 1`` (level 1) and ``p/2 >= 1`` (level 2)
such partitions attain the supremum over all partitions, so the dynamic
programme below returns the exact norm of the interpolated object.

The level-2 matrix norm is Frobenius.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .path_lift import ScaledRoughPath, as_path

__all__ = [
    "EXACT_LIMIT",
    "RoughNorm",
    "pvar_level1",
    "pvar_level2",
    "pvar_bruteforce",
    "pvar_level2_bruteforce",
    "partition_sum",
    "rough_norm",
    "rough_norm_bounds",
    "rough_distance",
    "pvar_sandwich",
]

# grids longer than this switch to the blocked lower/upper sandwich
EXACT_LIMIT = 20_000
BRUTEFORCE_LIMIT = 12
BRUTEFORCE_LIMIT_L2 = 10


def _dp(n_points: int, weights_to: Callable[[int], np.ndarray], p: float) -> float:
    """``V(j) = max_{i<j} V(i) + w(i, j)^p``; returns ``V(last)`` (not the root)."""
    V = np.zeros(n_points)
    for j in range(1, n_points):
        V[j] = np.max(V[:j] + weights_to(j) ** p)
    return float(V[-1])


def _row_norms(diff: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(diff * diff, axis=tuple(range(1, diff.ndim))))


def _check_exponent(p: float, allow_subunit: bool, what: str = "p") -> None:
    if not p > 0:
        raise ValueError(f"{what} must be positive, got {p}")
    if p < 1:
        if not allow_subunit:
            raise ValueError(
                f"{what}={p} < 1: the supremum may need points between samples; "
                "pass allow_subunit=True for a grid-restricted diagnostic value"
            )
        warnings.warn(f"{what}={p} < 1: value is restricted to grid partitions", stacklevel=3)


def pvar_level1(samples, p: float, *, allow_subunit: bool = False) -> float:
    """Exact p-variation over partitions of the sample grid (``O(n^2)``)."""
    X = as_path(samples)
    if X.shape[0] < 2:
        raise ValueError("p-variation needs at least 2 samples")
    _check_exponent(p, allow_subunit)
    return _dp(X.shape[0], lambda j: _row_norms(X[:j] - X[j]), p) ** (1.0 / p)


def pvar_level2(srp: ScaledRoughPath, p_half: float) -> float:
    """Exact ``p_half``-variation of ``XX^(n)`` over grid partitions."""
    if not p_half > 1:
        raise ValueError(f"level-2 exponent must exceed 1, got {p_half}")
    N = srp.length + 1
    if N < 2:
        return 0.0
    return _dp(N, lambda j: _row_norms(srp.level2_grid(np.arange(j), j)), p_half) ** (1.0 / p_half)


def partition_sum(samples, points, p: float) -> float:
    """``sum |X_{t_{r-1}, t_r}|^p`` for the given increasing index list."""
    X = as_path(samples)
    pts = list(points)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += float(np.sqrt(np.sum((X[b] - X[a]) ** 2))) ** p
    return total


def pvar_bruteforce(samples, p: float) -> float:
    """Exhaustive maximum over all ``2^(n-2)`` grid partitions (``n <= 12``)."""
    X = as_path(samples)
    n = X.shape[0]
    if n < 2:
        raise ValueError("p-variation needs at least 2 samples")
    if n > BRUTEFORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTEFORCE_LIMIT} samples, got {n}")
    dist = [[float(np.sqrt(np.sum((X[j] - X[i]) ** 2))) for j in range(n)] for i in range(n)]
    best = 0.0
    interior = range(1, n - 1)
    for size in range(n - 1):
        for chosen in itertools.combinations(interior, size):
            pts = (0, *chosen, n - 1)
            total = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                total += dist[a][b] ** p
            best = max(best, total)
    return best ** (1.0 / p)


def pvar_level2_bruteforce(srp: ScaledRoughPath, p_half: float) -> float:
    """Exhaustive level-2 counterpart of :func:`pvar_bruteforce` (``<= 10`` grid points)."""
    n = srp.length + 1
    if n > BRUTEFORCE_LIMIT_L2:
        raise ValueError(f"level-2 brute force limited to {BRUTEFORCE_LIMIT_L2} points, got {n}")
    if n < 2:
        return 0.0
    norm = {
        (i, j): float(np.linalg.norm(srp.level2_grid(i, j))) for i in range(n) for j in range(i + 1, n)
    }
    best = 0.0
    for size in range(n - 1):
        for chosen in itertools.combinations(range(1, n - 1), size):
            pts = (0, *chosen, n - 1)
            total = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                total += norm[a, b] ** p_half
            best = max(best, total)
    return best ** (1.0 / p_half)


def rough_norm(srp: ScaledRoughPath, p: float) -> float:
    """``|X_0| + ||X||_p + ||XX||_{p/2}`` on ``[0, N/n]``, exact over the grid."""
    if not p > 2:
        raise ValueError(f"rough norm needs p > 2, got {p}")
    X = srp.grid_level1()
    if X.shape[0] < 2:
        return float(np.linalg.norm(X[0]))
    return float(np.linalg.norm(X[0])) + pvar_level1(X, p) + pvar_level2(srp, p / 2)


def rough_distance(a: ScaledRoughPath, b: ScaledRoughPath, p: float) -> float:
    """Inhomogeneous p-variation distance: the rough norm of increment-wise differences."""
    if not p > 2:
        raise ValueError(f"rough distance needs p > 2, got {p}")
    if a.dim != b.dim or a.length != b.length or a.n != b.n:
        raise ValueError(
            f"mismatched lifts: dim {a.dim}/{b.dim}, length {a.length}/{b.length}, n {a.n}/{b.n}"
        )
    D = a.grid_level1() - b.grid_level1()
    start = float(np.linalg.norm(D[0]))
    N = D.shape[0]
    if N < 2:
        return start

    def level2_to(j):
        i = np.arange(j)
        return _row_norms(a.level2_grid(i, j) - b.level2_grid(i, j))

    lvl1 = _dp(N, lambda j: _row_norms(D[:j] - D[j]), p) ** (1.0 / p)
    lvl2 = _dp(N, level2_to, p / 2) ** (2.0 / p)
    return start + lvl1 + lvl2


# -- large-grid sandwich ---------------------------------------------------


def _block_edges(n_points: int, block: int) -> list[tuple[int, int]]:
    edges = list(range(0, n_points - 1, block)) + [n_points - 1]
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def pvar_sandwich(samples, p: float, block: int = 2048) -> tuple[float, float]:
    """Lower and upper bounds for the level-1 p-variation on long grids.

    The grid is cut into consecutive blocks sharing endpoints.  Concatenating
    block-optimal partitions is a partition, so ``(sum_k V_k)^{1/p}`` is a
    lower bound (also the coarse DP over block endpoints); Minkowski across
    each cut gives the upper bound ``sum_k V_k^{1/p}``.
    """
    X = as_path(samples)
    if X.shape[0] < 2:
        raise ValueError("p-variation needs at least 2 samples")
    _check_exponent(p, False)
    blocks = [pvar_level1(X[lo : hi + 1], p) ** p for lo, hi in _block_edges(X.shape[0], block)]
    ends = [0] + [hi for _, hi in _block_edges(X.shape[0], block)]
    coarse = pvar_level1(X[ends], p) if len(ends) > 1 else 0.0
    lower = max(math.fsum(blocks) ** (1.0 / p), coarse)
    upper = math.fsum(v ** (1.0 / p) for v in blocks)
    return lower, upper


@dataclass(frozen=True)
class RoughNorm:
    value: float
    lower: float
    upper: float
    mode: str  # "exact" or "sandwich"


def rough_norm_bounds(srp: ScaledRoughPath, p: float, block: int = 2048) -> RoughNorm:
    """Exact rough norm on grids up to :data:`EXACT_LIMIT`, a bracketing sandwich beyond.

    For level 2 across a cut at ``t``: ``XX_{a,b} = XX_{a,t} + XX_{t,b} + X_{a,t} (x) X_{t,b}``,
    so merging blocks ``I, J`` obeys ``U2 <= U2_I + U2_J + U1_I U1_J``.
    """
    if srp.length + 1 <= EXACT_LIMIT:
        v = rough_norm(srp, p)
        return RoughNorm(v, v, v, "exact")
    X = srp.grid_level1()
    start = float(np.linalg.norm(X[0]))
    lo1 = hi1 = lo2_acc = hi2 = 0.0
    first = True
    lo1_parts = []
    for a, b in _block_edges(X.shape[0], block):
        sub = ScaledRoughPath(srp.base[a : b + 1], srp.n)
        v1 = pvar_level1(sub.grid_level1(), p)
        v2 = pvar_level2(sub, p / 2)
        lo1_parts.append(v1**p)
        lo2_acc += v2 ** (p / 2)
        if first:
            hi1, hi2, first = v1, v2, False
        else:
            hi2 = hi2 + v2 + hi1 * v1
            hi1 = hi1 + v1
    lo1 = math.fsum(lo1_parts) ** (1.0 / p)
    lo2 = lo2_acc ** (2.0 / p)
    return RoughNorm((start + lo1 + lo2 + start + hi1 + hi2) / 2, start + lo1 + lo2, start + hi1 + hi2, "sandwich")
