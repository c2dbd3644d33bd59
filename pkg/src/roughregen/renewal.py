"""Discrete renewal theory: renewal sequence, renewal equation, key renewal limit,
and the size-biased block moments of the block straddling a late time.

Probabilities given as :class:`fractions.Fraction` keep every computation in
exact rational arithmetic; floats give numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Callable, Sequence

import numpy as np

from .montecarlo import mean_and_se, run_trials

__all__ = [
    "LatticeRequiredError",
    "RenewalModel",
    "BlockLaw",
    "KeyRenewalResult",
    "renewal_sequence",
    "solve_renewal",
    "renewal_by_convolution_powers",
    "key_renewal_limit",
    "size_biased_forcing",
    "size_biased_sequence",
    "size_biased_moment_limit",
    "mc_size_biased_moment",
]

PROB_TOL = 1e-12


class LatticeRequiredError(ValueError):
    """The interarrival law is d-arithmetic with d > 1; the limit only exists along a lattice."""


def _is_exact(values) -> bool:
    return all(isinstance(v, (Fraction, int)) for v in values)


class RenewalModel:
    """Interarrival mass function ``p_0 = 0, p_1, ..., p_J`` with finite support."""

    def __init__(self, pmf: Sequence[Real]):
        pmf = list(pmf)
        if not pmf or pmf[0] != 0:
            raise ValueError("interarrival law needs p_0 = 0")
        if any(v < 0 for v in pmf):
            raise ValueError("probabilities must be non-negative")
        total = sum(pmf)
        if abs(total - 1) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        while pmf and pmf[-1] == 0:
            pmf.pop()
        self.exact = _is_exact(pmf)
        self.pmf = [Fraction(v) for v in pmf] if self.exact else [float(v) for v in pmf]
        self.support = [j for j, v in enumerate(self.pmf) if v > 0]
        self.d = math.gcd(*self.support)
        self.mu = sum(j * v for j, v in enumerate(self.pmf))

    @classmethod
    def from_support(cls, masses: dict[int, Real]) -> "RenewalModel":
        J = max(masses)
        pmf = [0] * (J + 1)
        for j, v in masses.items():
            if j < 1:
                raise ValueError("interarrival times must be >= 1")
            pmf[j] = v
        return cls(pmf)

    @classmethod
    def geometric(cls, q: float, tail_tol: float = 1e-18) -> "RenewalModel":
        """``p_j = (1 - q) q^(j-1)``, truncated once the remaining tail drops below ``tail_tol``."""
        if not 0 <= q < 1:
            raise ValueError("geometric parameter must lie in [0, 1)")
        J = 1 if q == 0 else max(1, math.ceil(math.log(tail_tol) / math.log(q)))
        return cls([0.0] + [(1 - q) * q ** (j - 1) for j in range(1, J + 1)])

    @classmethod
    def uniform(cls, values: Sequence[int], exact: bool = True) -> "RenewalModel":
        w = Fraction(1, len(values)) if exact else 1.0 / len(values)
        return cls.from_support({int(v): w for v in values})

    def __repr__(self) -> str:
        return f"RenewalModel(support={self.support}, d={self.d}, mu={self.mu})"


def _zeros(exact: bool, N: int):
    return [Fraction(0)] * N if exact else [0.0] * N


def _finish(values: list, exact: bool):
    return values if exact else np.array(values, dtype=float)


def renewal_sequence(model: RenewalModel, N: int):
    """``u_0..u_N`` from ``u_0 = 1``, ``u_m = sum_j p_j u_{m-j}``."""
    if N < 0:
        raise ValueError("horizon must be non-negative")
    p = model.pmf
    J = len(p) - 1
    u = _zeros(model.exact, N + 1)
    u[0] = Fraction(1) if model.exact else 1.0
    for m in range(1, N + 1):
        acc = u[0] * 0
        for j in range(1, min(m, J) + 1):
            if p[j]:
                acc += p[j] * u[m - j]
        if not model.exact:
            if acc < -1e-12 or acc > 1 + 1e-12:
                raise ArithmeticError(f"renewal sequence left [0, 1] at m={m}: {acc}")
            acc = min(max(acc, 0.0), 1.0)
        u[m] = acc
    return _finish(u, model.exact)


def _forcing(b, N: int, support: int | None, exact: bool) -> list:
    if callable(b):
        if support is None:
            raise ValueError("a callable forcing needs an explicit support bound")
        vals = [b(m) for m in range(min(support, N + 1))]
    else:
        vals = list(b)
        if support is not None:
            vals = vals[:support]
    if any(v < 0 for v in vals):
        raise ValueError("forcing sequence must be non-negative")
    if exact and not _is_exact(vals):
        exact = False
    vals = [Fraction(v) for v in vals] if exact else [float(v) for v in vals]
    return vals


def solve_renewal(model: RenewalModel, b, N: int, support: int | None = None):
    """``a_n = sum_{m<=n} b_{n-m} u_m`` for ``n = 0..N``.

    ``b`` is a finite sequence (zero past its end) or a callable with an explicit
    ``support`` bound, outside of which it is declared zero.
    """
    bv = _forcing(b, N, support, model.exact)
    exact = model.exact and _is_exact(bv)
    u = list(renewal_sequence(model, N))
    a = _zeros(exact, N + 1)
    for n in range(N + 1):
        acc = a[0] * 0
        for k in range(min(n, len(bv) - 1) + 1):
            if bv[k]:
                acc += bv[k] * u[n - k]
        a[n] = acc
    return _finish(a, exact)


def renewal_by_convolution_powers(model: RenewalModel, b, N: int):
    """Definition-level ``a_n = sum_k sum_m b_{n-m} p^{*k}(m)`` (oracle, small ``N``)."""
    bv = _forcing(b, N, None, model.exact)
    exact = model.exact and _is_exact(bv)
    zero = Fraction(0) if exact else 0.0
    p = list(model.pmf) + [zero] * (N + 1)
    power = [zero] * (N + 1)
    power[0] = zero + 1  # p^{*0} = delta_0
    u = [zero] * (N + 1)
    for _ in range(N + 1):  # p_0 = 0, so p^{*k}(m) = 0 for k > m
        for m in range(N + 1):
            u[m] += power[m]
        power = [sum((power[i] * p[m - i] for i in range(m + 1)), zero) for m in range(N + 1)]
    a = [sum((bv[n - m] * u[m] for m in range(n + 1) if n - m < len(bv)), zero) for n in range(N + 1)]
    return _finish(a, exact)


@dataclass(frozen=True, eq=False)
class KeyRenewalResult:
    limit: Real
    gap: float  # max |a_n - limit| over the last quarter of the horizon
    a: Sequence[Real]
    lattice: bool


def key_renewal_limit(model: RenewalModel, b, N: int | None = None, *, lattice: bool = False) -> KeyRenewalResult:
    """``lim a_n = sum b / mu`` together with the observed tail gap.

    For a d-arithmetic law with ``d > 1`` the limit exists only along
    ``n = 0 mod d``; ``lattice=True`` evaluates it there as
    ``d * sum_{m = 0 mod d} b_m / mu``.  Without the flag such laws raise
    :class:`LatticeRequiredError`.
    """
    bv = _forcing(b, 10**9, None, model.exact)
    if model.d > 1 and not lattice:
        raise LatticeRequiredError(f"interarrival law is {model.d}-arithmetic; pass lattice=True")
    if N is None:
        N = max(200, 8 * len(bv), 40 * int(math.ceil(model.mu)))
    a = solve_renewal(model, bv, N)
    if model.d > 1:
        limit = model.d * sum(bv[m] for m in range(0, len(bv), model.d)) / model.mu
        idx = [n for n in range(N - N // 4, N + 1) if n % model.d == 0]
    else:
        limit = sum(bv) / model.mu
        idx = list(range(N - N // 4, N + 1))
    gap = max(float(abs(a[n] - limit)) for n in idx)
    return KeyRenewalResult(limit, gap, a, lattice)


class BlockLaw:
    """Joint law of ``(T, Xi)`` for a generic block on finitely many atoms.

    ``atoms`` is a list of ``(probability, T, Xi)`` with ``Xi`` a d-tuple of
    non-negative values.
    """

    def __init__(self, atoms: Sequence[tuple[Real, int, Sequence[Real]]]):
        if not atoms:
            raise ValueError("block law needs at least one atom")
        probs = [a[0] for a in atoms]
        if any(pr < 0 for pr in probs) or abs(sum(probs) - 1) > PROB_TOL:
            raise ValueError("atom probabilities must be non-negative and sum to 1")
        if any(int(a[1]) != a[1] or a[1] < 1 for a in atoms):
            raise ValueError("block lengths must be positive integers")
        dims = {len(a[2]) for a in atoms}
        if len(dims) != 1:
            raise ValueError("all atoms must share the dimension of Xi")
        self.exact = _is_exact(probs) and all(_is_exact(a[2]) for a in atoms)
        conv = Fraction if self.exact else float
        self.probs = [conv(pr) for pr in probs]
        self.lengths = [int(a[1]) for a in atoms]
        self.xi = [tuple(conv(v) for v in a[2]) for a in atoms]
        self.dim = dims.pop()

    @classmethod
    def lengths_only(cls, masses: dict[int, Real]) -> "BlockLaw":
        return cls([(pr, T, (1,)) for T, pr in masses.items()])

    def interarrival(self) -> RenewalModel:
        masses: dict[int, Real] = {}
        for pr, T in zip(self.probs, self.lengths):
            masses[T] = masses.get(T, 0) + pr
        return RenewalModel.from_support(masses)

    def tensor(self, k: int, r: int) -> np.ndarray:
        """``|Xi|^{(x) r}`` for atom ``k`` as an object (exact) or float array."""
        v = np.array(self.xi[k], dtype=object if self.exact else float)
        if r == 0:
            return np.array(1 if self.exact else 1.0, dtype=v.dtype)
        if r == 1:
            return v
        if r == 2:
            return np.outer(v, v)
        raise ValueError(f"unsupported tensor order r={r}; use 0, 1 or 2")

    def expect(self, fn: Callable[[int], np.ndarray]):
        out = None
        for k, pr in enumerate(self.probs):
            term = pr * fn(k)
            out = term if out is None else out + term
        return out


def size_biased_forcing(law: BlockLaw, r: int, ell: int) -> list:
    """``b_n = E[|Xi|^{(x) r} T^ell 1{T > n}]`` for ``n < max T`` (zero afterwards)."""
    return [law.expect(lambda k, n=n: law.tensor(k, r) * (law.lengths[k] ** ell) * (law.lengths[k] > n))
            for n in range(max(law.lengths))]


def size_biased_moment_limit(law: BlockLaw, r: int, ell: int):
    """``E[|Xi|^{(x) r} T^(ell+1)] / E[T]``."""
    if r not in (0, 1, 2):
        raise ValueError(f"unsupported tensor order r={r}; use 0, 1 or 2")
    num = law.expect(lambda k: law.tensor(k, r) * law.lengths[k] ** (ell + 1))
    return num / law.interarrival().mu


def size_biased_sequence(law: BlockLaw, r: int, ell: int, N: int) -> np.ndarray:
    """``a_n = E[|Xi_{kappa(n)}|^{(x) r} T_{kappa(n)}^ell]``, ``n = 0..N``, via the renewal equation.

    Solved componentwise; returns shape ``(N + 1, *tensor_shape)``.
    """
    model = law.interarrival()
    b = size_biased_forcing(law, r, ell)
    shape = np.shape(b[0])
    dtype = object if law.exact else float
    out = np.empty((N + 1,) + shape, dtype=dtype)
    for idx in np.ndindex(*shape) if shape else [()]:
        comp = [bn[idx] if shape else bn for bn in b]
        out[(slice(None),) + idx] = list(solve_renewal(model, comp, N))
    return out


def _mc_trial(rng, cdf, lengths, xi, r, ell, n, delay_cdf):
    draws = n + 1  # every block has T >= 1
    idx = np.minimum(np.searchsorted(cdf, rng.random(draws), side="right"), len(lengths) - 1)
    if delay_cdf is not None:
        idx[0] = min(int(np.searchsorted(delay_cdf, rng.random(), side="right")), len(lengths) - 1)
    T = lengths[idx]
    ends = np.cumsum(T)
    k = int(np.searchsorted(ends, n, side="right"))  # first block with tau_k + T_k > n
    v = np.abs(xi[idx[k]])
    tens = {0: np.ones(1), 1: v, 2: np.outer(v, v).ravel()}[r]
    return tens * float(T[k]) ** ell


def mc_size_biased_moment(
    law: BlockLaw,
    r: int,
    ell: int,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    delay: Sequence[Real] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo ``E[|Xi_{kappa(n)}|^{(x) r} T_{kappa(n)}^ell]``; returns (mean, se).

    ``delay`` optionally gives distinct atom probabilities for block 0.
    """
    if r not in (0, 1, 2):
        raise ValueError(f"unsupported tensor order r={r}; use 0, 1 or 2")
    cdf = np.cumsum(np.array(law.probs, dtype=float))
    cdf[-1] = 1.0
    delay_cdf = None
    if delay is not None:
        delay_cdf = np.cumsum(np.array(delay, dtype=float))
        delay_cdf[-1] = 1.0
    lengths = np.array(law.lengths)
    xi = np.array(law.xi, dtype=float)
    raw = run_trials(_mc_trial, trials, seed, f"size_bias/{n}", workers, (cdf, lengths, xi, r, ell, n, delay_cdf))
    mean, se = mean_and_se(raw)
    shape = {0: (), 1: (law.dim,), 2: (law.dim, law.dim)}[r]
    return mean.reshape(shape), se.reshape(shape)
