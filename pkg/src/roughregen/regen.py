"""Processes with delayed regenerative increments and their block statistics.

Every generator builds its regeneration times by construction (block
boundaries, returns to an anchor state) and is a deterministic function of
``(parameters, n, rng)``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .montecarlo import mean_and_se
from .path_lift import antisym, as_path

__all__ = [
    "FiniteLaw",
    "RegenTrajectory",
    "BlockStats",
    "ExactLimits",
    "MarkovChainSpec",
    "DelayedRandomWalk",
    "MarkovAdditive",
    "Rotor",
    "PeriodicEnvWalk",
    "LinearDrift",
    "gen_delayed_rw",
    "gen_markov_additive",
    "gen_rotor",
    "gen_periodic_env_rw",
    "block_stats",
    "kappa",
    "skeleton_walk",
    "assumption_report",
    "excursion_expectation",
    "simple_walk_law",
    "support_gcd",
]

CENTER_TOL = 1e-12


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class FiniteLaw:
    """Finite-support law on ``R^d``: ``values[i]`` has probability ``probs[i]``."""

    values: np.ndarray
    probs: np.ndarray

    def __init__(self, values, probs):
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        pr = np.asarray(probs, dtype=float)
        if vals.ndim != 2 or pr.shape != (vals.shape[0],):
            raise ValueError(f"law needs values (m, d) and probs (m,); got {vals.shape}, {pr.shape}")
        if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be non-negative and sum to 1 (sum={pr.sum()!r})")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", pr)
        cdf = np.cumsum(pr)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def mean(self) -> np.ndarray:
        return self.probs @ self.values

    def second_moment(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", self.probs, self.values, self.values)

    def draw_index(self, u):
        """Inverse-cdf index for uniforms ``u``."""
        return np.minimum(np.searchsorted(self._cdf, u, side="right"), len(self.probs) - 1)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "probs": self.probs.tolist()}


def simple_walk_law(d: int) -> FiniteLaw:
    """Nearest-neighbour steps ``+-e_i``, each with probability ``1/(2d)``."""
    eye = np.eye(d)
    return FiniteLaw(np.vstack([eye, -eye]), np.full(2 * d, 1.0 / (2 * d)))


def support_gcd(lengths) -> int:
    return math.gcd(*(int(v) for v in np.unique(lengths)))


@dataclass(frozen=True, eq=False)
class RegenTrajectory:
    """A path ``X_0..X_N`` with regeneration times ``0 = tau_0 < tau_1 < ... <= N``.

    Steps after the last regeneration form an incomplete block: they stay in
    ``path`` but never enter block statistics.
    """

    path: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        path = as_path(self.path)
        tau = np.asarray(self.tau, dtype=np.int64)
        object.__setattr__(self, "path", path)
        object.__setattr__(self, "tau", tau)
        if tau.ndim != 1 or tau.size == 0 or tau[0] != 0:
            raise ValueError("regeneration times must start at tau_0 = 0")
        if np.any(np.diff(tau) <= 0) or tau[-1] > path.shape[0] - 1:
            raise ValueError("regeneration times must be strictly increasing within the horizon")

    @property
    def complete_blocks(self) -> int:
        return self.tau.size - 1

    @property
    def dim(self) -> int:
        return self.path.shape[1]

    @property
    def horizon(self) -> int:
        return self.path.shape[0] - 1

    def is_regeneration(self) -> np.ndarray:
        mask = np.zeros(self.path.shape[0], dtype=bool)
        mask[self.tau] = True
        return mask

    def support_gcd(self) -> int:
        """gcd of the observed generic block lengths (1 if fewer than two blocks)."""
        T = np.diff(self.tau)[1:]
        return support_gcd(T) if T.size else 1


@dataclass(frozen=True, eq=False)
class BlockStats:
    """Per-block data, one row per complete block ``k = 0..K-1``.

    ``T`` lengths, ``Y`` increments, ``A`` antisymmetric block areas, ``Xi``
    coordinatewise sup of ``|X_{tau_k, tau_k + m}|`` over ``0 <= m <= T_k``.
    Row 0 is the delay block.
    """

    T: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    Xi: np.ndarray

    def __len__(self) -> int:
        return self.T.shape[0]

    def __getitem__(self, idx) -> "BlockStats":
        if isinstance(idx, (int, np.integer)):
            idx = slice(idx, idx + 1 if idx != -1 else None)
        return BlockStats(self.T[idx], self.Y[idx], self.A[idx], self.Xi[idx])

    def generic(self) -> "BlockStats":
        return self[1:]

    @classmethod
    def concat(cls, parts: Sequence["BlockStats"]) -> "BlockStats":
        return cls(*(np.concatenate([getattr(b, f) for b in parts]) for f in ("T", "Y", "A", "Xi")))


@dataclass(frozen=True, eq=False)
class ExactLimits:
    """Closed-form block moments: ``sigma = E[Y (x) Y]/E[T]``, ``gamma = E[A]/E[T]``."""

    sigma: np.ndarray
    gamma: np.ndarray
    mean_T: float


def excursion_expectation(P: np.ndarray, anchor: int, reward: np.ndarray) -> np.ndarray:
    """``E_x[sum_{k=0}^{T_x^+ - 1} reward(Y_k)]`` for a finite irreducible chain.

    Solves the first-passage system ``(I - P_{-x,-x}) h = reward_{-x}`` by LU
    with partial pivoting; ``reward`` may carry trailing dimensions.
    """
    P = np.asarray(P, dtype=float)
    S = P.shape[0]
    reward = np.asarray(reward, dtype=float)
    flat = reward.reshape(S, -1)
    others = np.array([s for s in range(S) if s != anchor], dtype=int)
    if others.size == 0:
        return reward[anchor].copy()
    sub = np.eye(others.size) - P[np.ix_(others, others)]
    try:
        h = linalg.solve(sub, flat[others])
    except linalg.LinAlgError as exc:  # impossible for irreducible chains
        raise RuntimeError("singular first-passage system") from exc
    out = flat[anchor] + P[anchor, others] @ h
    return out.reshape(reward.shape[1:])


def _check_irreducible(P: np.ndarray, what: str) -> None:
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise ValueError(f"{what} is reducible ({n_comp} communicating classes)")


@dataclass(frozen=True, eq=False)
class MarkovChainSpec:
    """Finite chain with an additive functional ``f: state -> R^d`` and anchor state."""

    transition: np.ndarray
    f: np.ndarray
    anchor: int = 0
    states: tuple = ()

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "f", f)
        S = P.shape[0]
        if P.shape != (S, S) or f.shape[0] != S:
            raise ValueError(f"transition must be square and f must have one row per state; got {P.shape}, {f.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be non-negative and sum to 1")
        if not self.states:
            object.__setattr__(self, "states", tuple(range(S)))
        if len(self.states) != S:
            raise ValueError("states labels do not match the transition size")
        if not 0 <= self.anchor < S:
            raise ValueError(f"anchor {self.anchor} not a state index")
        _check_irreducible(P, "chain")

    @property
    def dim(self) -> int:
        return self.f.shape[1]

    def expected_return_time(self) -> float:
        return float(excursion_expectation(self.transition, self.anchor, np.ones(len(self.states))))

    def expected_excursion_sum(self) -> np.ndarray:
        return excursion_expectation(self.transition, self.anchor, self.f)

    def centering(self) -> np.ndarray:
        return self.expected_excursion_sum() / self.expected_return_time()


def _sample_chain(cdf_rows: list[list[float]], start: int, u: np.ndarray) -> np.ndarray:
    states = np.empty(u.size + 1, dtype=np.int64)
    s = start
    states[0] = s
    last = [len(r) - 1 for r in cdf_rows]
    for k, uk in enumerate(u.tolist(), start=1):
        s = min(bisect.bisect_right(cdf_rows[s], uk), last[s])
        states[k] = s
    return states


def _cdf_rows(P: np.ndarray) -> list[list[float]]:
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    return cdf.tolist()


# -- generators --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DelayedRandomWalk:
    """Centered i.i.d. steps; optionally a distinct law for the first step.

    Blocks have length one, so ``tau_k = k`` and ``Xi_k = |xi_k|``.
    """

    step_law: FiniteLaw
    delay_law: FiniteLaw | None = None

    def __post_init__(self):
        if np.max(np.abs(self.step_law.mean())) > CENTER_TOL:
            raise ValueError(f"step law must be centered, mean = {self.step_law.mean()}")
        if self.delay_law is not None and self.delay_law.dim != self.step_law.dim:
            raise ValueError("delay law dimension differs from step law")

    @property
    def dim(self) -> int:
        return self.step_law.dim

    def sample(self, n: int, rng) -> RegenTrajectory:
        rng = _rng(rng)
        u = rng.random(n)
        steps = self.step_law.values[self.step_law.draw_index(u)]
        if self.delay_law is not None and n > 0:
            steps[0] = self.delay_law.values[self.delay_law.draw_index(u[0])]
        path = np.vstack([np.zeros((1, self.dim)), np.cumsum(steps, axis=0)])
        return RegenTrajectory(path, np.arange(n + 1))

    def exact_limits(self) -> ExactLimits:
        d = self.dim
        return ExactLimits(self.step_law.second_moment(), np.zeros((d, d)), 1.0)


@dataclass(frozen=True, eq=False)
class MarkovAdditive:
    """``X_n = sum_{k<=n} f(Y_k) - n E[D]/E[T_x^+]`` for a chain started at the anchor."""

    spec: MarkovChainSpec

    @property
    def dim(self) -> int:
        return self.spec.dim

    def sample(self, n: int, rng) -> RegenTrajectory:
        rng = _rng(rng)
        spec = self.spec
        states = _sample_chain(_cdf_rows(spec.transition), spec.anchor, rng.random(n))
        c = spec.centering()
        path = np.cumsum(spec.f[states], axis=0) - np.arange(n + 1)[:, None] * c
        return RegenTrajectory(path, np.flatnonzero(states == spec.anchor))

    def exact_limits(self) -> None:
        return None


_SQUARE = {
    "ccw": np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float),
    "cw": np.array([[0, 1], [1, 0], [0, -1], [-1, 0]], dtype=float),
}
_UNIT_STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)


@dataclass(frozen=True)
class Rotor:
    """Blocks are unit square loops, counterclockwise with probability ``p_ccw``.

    ``excursion`` appends an out-and-back segment of ``excursion`` steps along
    ``e1`` and back (zero area, zero increment); ``extra_step`` then appends a
    uniform ``+-e_i`` step.  Block length ``4 + 2*excursion + extra_step``.
    """

    p_ccw: float
    extra_step: bool = False
    excursion: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_ccw <= 1.0:
            raise ValueError(f"p_ccw must lie in [0, 1], got {self.p_ccw}")
        if self.excursion < 0:
            raise ValueError("excursion length must be non-negative")

    dim = 2

    @property
    def block_length(self) -> int:
        return 4 + 2 * self.excursion + int(self.extra_step)

    def _templates(self) -> np.ndarray:
        out_back = np.vstack([np.tile([1.0, 0.0], (self.excursion, 1)), np.tile([-1.0, 0.0], (self.excursion, 1))])
        return np.stack([np.vstack([_SQUARE[k], out_back]) for k in ("ccw", "cw")])

    def sample(self, n: int, rng) -> RegenTrajectory:
        rng = _rng(rng)
        T = self.block_length
        n_blocks = n // T + 1
        cw = (rng.random(n_blocks) >= self.p_ccw).astype(np.int64)
        blocks = self._templates()[cw]
        if self.extra_step:
            extra = _UNIT_STEPS[rng.integers(0, 4, size=n_blocks)]
            blocks = np.concatenate([blocks, extra[:, None, :]], axis=1)
        steps = blocks.reshape(-1, 2)[:n]
        path = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
        return RegenTrajectory(path, np.arange(0, n + 1, T))

    def exact_limits(self) -> ExactLimits:
        T = float(self.block_length)
        sigma = 0.5 * np.eye(2) / T if self.extra_step else np.zeros((2, 2))
        a = 2.0 * self.p_ccw - 1.0
        gamma = np.array([[0.0, a], [-a, 0.0]]) / T
        return ExactLimits(sigma, gamma, T)


@dataclass(frozen=True, eq=False)
class PeriodicEnvWalk:
    """Walk whose step law depends on the first coordinate modulo ``L = len(profile)``.

    The residue of the first coordinate is a finite Markov chain; returns of
    the residue to 0 are regeneration times.  Paths are centered by the
    analytic stationary drift ``E[D]/E[T]`` of the residue chain.
    """

    profile: tuple[FiniteLaw, ...]

    def __post_init__(self):
        prof = tuple(self.profile)
        object.__setattr__(self, "profile", prof)
        if not prof:
            raise ValueError("profile must contain at least one step law")
        if len({law.dim for law in prof}) != 1:
            raise ValueError("all profile laws must share one dimension")
        for law in prof:
            first = law.values[:, 0]
            if np.any(first != np.round(first)):
                raise ValueError("first step coordinates must be integers")
        _check_irreducible(self.residue_transition(), "residue chain")

    @property
    def period(self) -> int:
        return len(self.profile)

    @property
    def dim(self) -> int:
        return self.profile[0].dim

    def residue_transition(self) -> np.ndarray:
        L = self.period
        P = np.zeros((L, L))
        for r, law in enumerate(self.profile):
            for v, pr in zip(law.values[:, 0], law.probs):
                P[r, int(r + v) % L] += pr
        return P

    def drift(self) -> np.ndarray:
        P = self.residue_transition()
        g = np.stack([law.mean() for law in self.profile])
        mean_T = excursion_expectation(P, 0, np.ones(self.period))
        return excursion_expectation(P, 0, g) / mean_T

    def sample(self, n: int, rng) -> RegenTrajectory:
        rng = _rng(rng)
        u = rng.random(n)
        L = self.period
        vals = [law.values for law in self.profile]
        cdfs = [law._cdf.tolist() for law in self.profile]
        steps = np.empty((n, self.dim))
        resid = np.empty(n + 1, dtype=np.int64)
        r = 0
        resid[0] = 0
        for k, uk in enumerate(u.tolist()):
            idx = min(bisect.bisect_right(cdfs[r], uk), len(cdfs[r]) - 1)
            steps[k] = vals[r][idx]
            r = int(r + steps[k, 0]) % L
            resid[k + 1] = r
        raw = np.vstack([np.zeros((1, self.dim)), np.cumsum(steps, axis=0)])
        path = raw - np.arange(n + 1)[:, None] * self.drift()
        return RegenTrajectory(path, np.flatnonzero(resid == 0))

    def exact_limits(self) -> None:
        return None


@dataclass(frozen=True)
class LinearDrift:
    """Deterministic ``X_k = k v``; not centered, used as a negative control."""

    velocity: tuple[float, ...] = (1.0,)

    @property
    def dim(self) -> int:
        return len(self.velocity)

    def sample(self, n: int, rng=None) -> RegenTrajectory:
        v = np.asarray(self.velocity, dtype=float)
        return RegenTrajectory(np.arange(n + 1)[:, None] * v, np.arange(n + 1))

    def exact_limits(self) -> None:
        return None


def gen_delayed_rw(step_law: FiniteLaw, n: int, seed, delay_law: FiniteLaw | None = None) -> RegenTrajectory:
    return DelayedRandomWalk(step_law, delay_law).sample(n, seed)


def gen_markov_additive(spec: MarkovChainSpec, n: int, seed) -> RegenTrajectory:
    return MarkovAdditive(spec).sample(n, seed)


def gen_rotor(p_ccw: float, extra_step: bool, n: int, seed, excursion: int = 0) -> RegenTrajectory:
    return Rotor(p_ccw, extra_step, excursion).sample(n, seed)


def gen_periodic_env_rw(profile: Sequence[FiniteLaw], n: int, seed) -> RegenTrajectory:
    return PeriodicEnvWalk(tuple(profile)).sample(n, seed)


# -- block-level statistics -------------------------------------------------


def block_stats(traj: RegenTrajectory) -> BlockStats:
    """Statistics of every complete block; the trailing partial block is dropped."""
    K = traj.complete_blocks
    if K < 1:
        raise ValueError("no complete block within the horizon")
    X = traj.path
    tau = traj.tau
    end = int(tau[-1])
    steps = np.diff(X[: end + 1], axis=0)
    owner = np.repeat(np.arange(K), np.diff(tau))
    anchor = X[tau[:-1]][owner]
    rel_prev = X[:end] - anchor
    terms = rel_prev[:, :, None] * steps[:, None, :] + 0.5 * steps[:, :, None] * steps[:, None, :]
    level2 = np.add.reduceat(terms, tau[:-1], axis=0)
    xi = np.maximum.reduceat(np.abs(X[1 : end + 1] - anchor), tau[:-1], axis=0)
    return BlockStats(
        T=np.diff(tau),
        Y=X[tau[1:]] - X[tau[:-1]],
        A=antisym(level2),
        Xi=xi,
    )


def kappa(traj: RegenTrajectory, u):
    """Index ``k`` of the block with ``tau_k <= u < tau_{k+1}``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(u_arr >= traj.tau[-1]):
        raise IndexError(f"u must lie in [0, tau_K) = [0, {traj.tau[-1]})")
    k = np.searchsorted(traj.tau, u_arr, side="right") - 1
    return int(k) if k.ndim == 0 else k


def skeleton_walk(traj: RegenTrajectory) -> np.ndarray:
    """``Z_k = sum_{l<k} Y_l`` at the regeneration times (``Z_0 = 0``)."""
    return traj.path[traj.tau] - traj.path[0]


def assumption_report(blocks: BlockStats, delay_blocks: BlockStats | None = None) -> dict:
    """Empirical ``E[(Xi^i)^p T]`` for ``p in {0, 2}``, delay and generic block apart.

    ``delay_blocks`` can pool the delay block over many trajectories; by
    default it is row 0 of ``blocks`` (a single sample, SE undefined).
    """
    if len(blocks) < 2:
        raise ValueError("assumption report needs at least 2 blocks")
    groups = {"delay": delay_blocks if delay_blocks is not None else blocks[:1], "generic": blocks.generic()}
    out: dict = {}
    flags: set[int] = set()
    for name, b in groups.items():
        entry = {}
        for p in (0, 2):
            vals = (b.Xi**p) * b.T[:, None]
            mean, se = mean_and_se(vals)
            entry[f"p{p}"] = mean.tolist()
            entry[f"p{p}_se"] = se.tolist()
            flags.update(int(i) for i in np.flatnonzero(mean == 0))
        entry["count"] = len(b)
        out[name] = entry
    out["zero_flags"] = sorted(flags)
    return out
