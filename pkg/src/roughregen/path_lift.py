"""Discrete level-2 rough-path algebra.

Paths are plain ``(N + 1, d)`` float arrays ``X_0, ..., X_N``.  The level-2
object over an index interval ``[M, N]`` is the Stratonovich sum

    I_{M,N} = sum_{M < k <= N} X_{M,k-1} (x) X_{k-1,k} + 1/2 X_{k-1,k} (x) X_{k-1,k},

i.e. the iterated Riemann-Stieltjes integral of the piecewise-linear
interpolation, so that ``Sym(I_{M,N}) = 1/2 X_{M,N} (x) X_{M,N}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .regen import RegenTrajectory

__all__ = [
    "RoughIncrement",
    "ScaledRoughPath",
    "as_path",
    "antisym",
    "sym",
    "level2_stratonovich",
    "level2_exact",
    "antisym_area",
    "chen_combine",
    "chen_defect",
    "eval_scaled",
    "decomposition_defect",
    "relative_residual",
]


def as_path(values) -> np.ndarray:
    """Validate and return a path as a float array of shape ``(N + 1, d)``.

    One-dimensional input is read as a scalar path (``d = 1``).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"path must have shape (N+1, d) with N >= 0, d >= 1; got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("path has non-finite entries")
    return arr


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def antisym(m: np.ndarray) -> np.ndarray:
    """Antisymmetric part ``(M - M^T) / 2`` over the last two axes."""
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def relative_residual(residual: np.ndarray, *operands: np.ndarray) -> float:
    """Max-abs residual relative to the largest operand magnitude (floored at 1)."""
    scale = 1.0
    for op in operands:
        op = np.asarray(op)
        if op.size:
            scale = max(scale, float(np.max(np.abs(op))))
    return float(np.max(np.abs(residual))) / scale if np.size(residual) else 0.0


def _check_range(n_points: int, M: int, N: int) -> None:
    if not (0 <= M <= N <= n_points - 1):
        raise IndexError(f"index interval [{M}, {N}] outside path of length {n_points - 1}")


def level2_stratonovich(path, M: int, N: int) -> np.ndarray:
    """Level-2 Stratonovich lift of ``path`` over ``[M, N]`` by the defining sum."""
    X = as_path(path)
    _check_range(X.shape[0], M, N)
    d = X.shape[1]
    if M == N:
        return np.zeros((d, d))
    dX = np.diff(X[M : N + 1], axis=0)
    rel = X[M:N] - X[M]
    return rel.T @ dX + 0.5 * (dX.T @ dX)


def level2_exact(path: Sequence[Sequence[int]], M: int, N: int) -> list[list[Fraction]]:
    """Exact rational evaluation of the defining sum for integer lattice paths.

    Pure Python and quadratic in ``d``; meant as an oracle for small ``N``.
    """
    pts = [[Fraction(int(c)) for c in row] for row in path]
    if not (0 <= M <= N <= len(pts) - 1):
        raise IndexError(f"index interval [{M}, {N}] outside path of length {len(pts) - 1}")
    d = len(pts[0])
    out = [[Fraction(0)] * d for _ in range(d)]
    half = Fraction(1, 2)
    for k in range(M + 1, N + 1):
        rel = [pts[k - 1][i] - pts[M][i] for i in range(d)]
        step = [pts[k][i] - pts[k - 1][i] for i in range(d)]
        for i in range(d):
            for j in range(d):
                out[i][j] += rel[i] * step[j] + half * step[i] * step[j]
    return out


def antisym_area(path, M: int, N: int) -> np.ndarray:
    """Signed Levy area matrix ``Antisym(I_{M,N})``; the unit square traversed
    counterclockwise has ``(1, 2)`` entry ``+1``."""
    return antisym(level2_stratonovich(path, M, N))


@dataclass(frozen=True)
class RoughIncrement:
    """Level-1 and level-2 data over ``[s, t]``."""

    s: float
    t: float
    level1: np.ndarray
    level2: np.ndarray

    def __post_init__(self):
        if self.t < self.s:
            raise ValueError(f"increment interval reversed: s={self.s} > t={self.t}")

    @classmethod
    def zero(cls, d: int, s: float = 0, t: float | None = None) -> "RoughIncrement":
        return cls(s, s if t is None else t, np.zeros(d), np.zeros((d, d)))

    @classmethod
    def from_path(cls, path, M: int, N: int) -> "RoughIncrement":
        X = as_path(path)
        return cls(M, N, X[N] - X[M], level2_stratonovich(X, M, N))


def chen_combine(a: RoughIncrement, b: RoughIncrement, *, atol: float = 0.0) -> RoughIncrement:
    """Concatenate increments over ``[s, r]`` and ``[r, t]`` by Chen's relation."""
    if abs(a.t - b.s) > atol:
        raise ValueError(f"junction mismatch: first ends at {a.t}, second starts at {b.s}")
    level2 = a.level2 + b.level2 + np.outer(a.level1, b.level1)
    return RoughIncrement(a.s, b.t, a.level1 + b.level1, level2)


class ScaledRoughPath:
    """Diffusively rescaled piecewise-linear lift ``t -> (X^(n)_t, XX^(n)_{s,t})``.

    Times live on ``[0, N / n]``.  Construction precomputes the grid prefix
    ``I_{0,k}`` for every ``k`` so each interval query costs ``O(d^2)``:
    ``I_{M,N} = I_{0,N} - I_{0,M} - X_{0,M} (x) X_{M,N}``.

    ``convention="rs"`` (default) evaluates the iterated Riemann-Stieltjes
    integral of the linear interpolation at arbitrary times; it is
    Chen-consistent everywhere.  ``convention="display"`` evaluates the grid
    formula with a linear interpolation weight ``n(t-s) - floor(nt) +
    floor(ns)``; it agrees with ``"rs"`` whenever both times are on the grid
    but is not Chen-consistent off the grid.
    """

    def __init__(self, path, n: int, convention: str = "rs"):
        if int(n) != n or n < 1:
            raise ValueError(f"scale n must be a positive integer, got {n}")
        if convention not in ("rs", "display"):
            raise ValueError(f"unknown convention {convention!r}")
        self.base = as_path(path)
        self.n = int(n)
        self.convention = convention
        X = self.base
        self.steps = np.diff(X, axis=0)
        rel = X[:-1] - X[0]
        # terms[k-1] = X_{0,k-1} (x) X_{k-1,k} + 1/2 X_{k-1,k}^{(x)2}
        terms = rel[:, :, None] * self.steps[:, None, :] + 0.5 * (
            self.steps[:, :, None] * self.steps[:, None, :]
        )
        d = X.shape[1]
        self.prefix = np.concatenate([np.zeros((1, d, d)), np.cumsum(terms, axis=0)])

    @property
    def dim(self) -> int:
        return self.base.shape[1]

    @property
    def length(self) -> int:
        """Number of steps ``N`` of the base path."""
        return self.base.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.length / self.n

    def grid(self) -> np.ndarray:
        return np.arange(self.length + 1) / self.n

    # -- grid-level queries -------------------------------------------------
    def grid_level1(self) -> np.ndarray:
        return self.base / np.sqrt(self.n)

    def level2_grid(self, i, j) -> np.ndarray:
        """``XX^(n)`` between grid indices ``i <= j`` (broadcasting)."""
        i = np.asarray(i)
        j = np.asarray(j)
        X = self.base
        out = self.prefix[j] - self.prefix[i] - (X[i] - X[0])[..., :, None] * (X[j] - X[i])[..., None, :]
        return out / self.n

    # -- continuous-time queries -------------------------------------------
    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t * self.n > self.length + 1e-9 * max(1, self.length)):
            raise IndexError(f"time outside [0, {self.horizon}]")
        nt = t * self.n
        b = np.minimum(np.floor(nt).astype(np.int64), self.length)
        w = nt - b
        # t == horizon exactly sits on the last grid point with zero weight
        w = np.where(b == self.length, 0.0, w)
        return b, w

    def level1(self, t) -> np.ndarray:
        b, w = self._locate(t)
        X = self.base
        nxt = np.minimum(b + 1, self.length)
        val = X[b] + w[..., None] * (X[nxt] - X[b])
        return val / np.sqrt(self.n)

    def _prefix_rs(self, b, w) -> np.ndarray:
        """Unscaled RS level 2 over ``[0, (b + w) / n]``."""
        X = self.base
        nxt = np.minimum(b + 1, self.length)
        step = X[nxt] - X[b]
        rel = X[b] - X[0]
        ww = w[..., None, None]
        return (
            self.prefix[b]
            + ww * (rel[..., :, None] * step[..., None, :])
            + 0.5 * ww**2 * (step[..., :, None] * step[..., None, :])
        )

    def level2(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(t < s):
            raise ValueError("level2 requires s <= t")
        a, ws = self._locate(s)
        b, wt = self._locate(t)
        X = self.base
        if self.convention == "display":
            weight = self.n * (t - s) - b + a
            nxt = np.minimum(b + 1, self.length)
            lo = self.level2_grid(a, b) * self.n
            hi = self.level2_grid(a, nxt) * self.n
            return (lo + weight[..., None, None] * (hi - lo)) / self.n
        Ls = self._prefix_rs(a, ws)
        Lt = self._prefix_rs(b, wt)
        xs = self.level1(s) * np.sqrt(self.n) - X[0]
        xt = self.level1(t) * np.sqrt(self.n) - X[0]
        cross = xs[..., :, None] * (xt - xs)[..., None, :]
        return (Lt - Ls - cross) / self.n

    def __call__(self, s, t) -> RoughIncrement:
        return eval_scaled(self, s, t)


def eval_scaled(srp: ScaledRoughPath, s: float, t: float) -> RoughIncrement:
    """Rescaled increment ``(X^(n)_{s,t}, XX^(n)_{s,t})``."""
    if t < s:
        raise ValueError(f"eval_scaled needs s <= t, got s={s}, t={t}")
    if s == t:
        srp._locate(t)
        return RoughIncrement.zero(srp.dim, s, t)
    level1 = srp.level1(t) - srp.level1(s)
    return RoughIncrement(float(s), float(t), level1, srp.level2(s, t))


def chen_defect(srp_or_path, n=None, s=None, r=None, t=None) -> np.ndarray:
    """Residual ``XX_{s,t} - XX_{s,r} - XX_{r,t} - X_{s,r} (x) X_{r,t}``.

    Accepts a prebuilt :class:`ScaledRoughPath` (``chen_defect(srp, s=, r=, t=)``)
    or a raw path plus scale.  ``s, r, t`` may be arrays of equal shape.
    """
    if isinstance(srp_or_path, ScaledRoughPath):
        srp = srp_or_path
    else:
        srp = ScaledRoughPath(srp_or_path, n)
    s, r, t = (np.asarray(v, dtype=float) for v in (s, r, t))
    if not (np.all(s < r) and np.all(r < t)):
        raise ValueError("chen_defect requires s < r < t")
    x_s, x_r, x_t = srp.level1(s), srp.level1(r), srp.level1(t)
    cross = (x_r - x_s)[..., :, None] * (x_t - x_r)[..., None, :]
    return srp.level2(s, t) - srp.level2(s, r) - srp.level2(r, t) - cross


def decomposition_defect(traj: "RegenTrajectory", ell: int, k: int) -> np.ndarray:
    """Residual of ``I_{tau_l, tau_k}(X) = I_{l,k}(Z) + sum_{l<u<=k} A_{tau_{u-1}, tau_u}(X)``."""
    K = traj.complete_blocks
    if not (0 <= ell < k <= K):
        raise IndexError(f"block pair ({ell}, {k}) outside 0..{K}")
    X = traj.path
    tau = traj.tau
    lhs = level2_stratonovich(X, int(tau[ell]), int(tau[k]))
    Z = X[tau[: K + 1]] - X[0]
    rhs = level2_stratonovich(Z, ell, k)
    for u in range(ell + 1, k + 1):
        rhs = rhs + antisym_area(X, int(tau[u - 1]), int(tau[u]))
    return lhs - rhs
