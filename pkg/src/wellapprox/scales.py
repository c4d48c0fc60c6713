"""Prime sieving, prime blocks and the two stage schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .approx import ApproximationProfile, DivergenceWeight

SIEVE_LIMIT = 1 << 40
DEFAULT_SPAN = 1 << 28   # widest window sieved in one request
DEFAULT_BLOCK_BUDGET = 1 << 28  # largest beta_M select_block will search up to
_SEGMENT = 1 << 22


class SieveBudgetError(RuntimeError):
    """Requested range exceeds the sieve or memory budget."""


class StrictRefusal(RuntimeError):
    """A strict-mode schedule needs a stage beyond desk-scale budgets."""

    def __init__(self, message: str, bound: int | None = None):
        super().__init__(message)
        self.bound = bound


# ---------------------------------------------------------------- sieve


def _small_primes(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, math.isqrt(n) + 1, 2):
        if flags[p]:
            flags[p * p::2 * p] = False
    return np.flatnonzero(flags).astype(np.int64)


def sieve(lo: int, hi: int, max_span: int = DEFAULT_SPAN) -> np.ndarray:
    """Exactly the primes in [lo, hi] (segmented, odd-only)."""
    lo, hi = int(lo), int(hi)
    if lo < 2:
        lo = 2
    if hi > SIEVE_LIMIT:
        raise SieveBudgetError(f"upper limit {hi} exceeds the sieve limit 2^40")
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    if hi - lo > max_span:
        raise SieveBudgetError(f"range [{lo}, {hi}] wider than the memory budget {max_span}")
    base = _small_primes(math.isqrt(hi))
    odd_base = base[1:]
    chunks = []
    if lo <= 2:
        chunks.append(np.array([2], dtype=np.int64))
    start = max(lo, 3) | 1  # first odd >= max(lo, 3)
    while start <= hi:
        stop = min(hi, start + 2 * _SEGMENT - 1)  # odd numbers start..stop
        count = (stop - start) // 2 + 1
        flags = np.ones(count, dtype=bool)
        for p in odd_base:
            p = int(p)
            if p * p > stop:
                break
            first = max(p * p, ((start + p - 1) // p) * p)
            if first % 2 == 0:
                first += p
            if first > stop:
                continue
            flags[(first - start) // 2::p] = False
        chunks.append(start + 2 * np.flatnonzero(flags).astype(np.int64))
        start = stop + 2
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)


def next_prime(n: int) -> int:
    """Least prime >= n (n >= 2)."""
    n = max(int(n), 2)
    width = 256
    while True:
        if n > SIEVE_LIMIT:
            raise SieveBudgetError(f"next prime after {n} lies beyond the sieve limit 2^40")
        found = sieve(n, min(n + width, SIEVE_LIMIT))
        if found.size:
            return int(found[0])
        n += width + 1
        width *= 2


# ---------------------------------------------------------------- blocks


@dataclass(frozen=True, eq=False)
class PrimeBlock:
    M: int
    beta_M: int
    C: float
    primes: np.ndarray
    policy: str = "min_sum"
    gamma: float | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.primes, dtype=np.int64).copy()
        p.setflags(write=False)
        object.__setattr__(self, "primes", p)

    @property
    def normalized(self) -> bool:
        return 1.0 <= self.C <= 2.0

    def to_dict(self) -> dict[str, Any]:
        return {"M": self.M, "beta_M": self.beta_M, "C": self.C, "policy": self.policy,
                "gamma": self.gamma, "primes": [int(q) for q in self.primes]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PrimeBlock":
        return cls(int(d["M"]), int(d["beta_M"]), float(d["C"]), np.array(d["primes"], dtype=np.int64),
                   d.get("policy", "min_sum"), d.get("gamma"))


def _weights(primes: np.ndarray, chi: DivergenceWeight) -> np.ndarray:
    return 1.0 / (primes.astype(float) * np.asarray(chi(primes.astype(float)), dtype=float))


def select_block(M: int, chi: DivergenceWeight, budget: int = DEFAULT_BLOCK_BUDGET) -> PrimeBlock:
    """Least prime cutoff beta_M with sum_{M <= q <= beta_M} 1/(q chi(q)) >= 1."""
    if M < 3:
        raise ValueError("select_block needs M >= 3")
    found: list[np.ndarray] = []
    carry = 0.0
    lo, width = int(M), 1 << 14
    while True:
        if lo > budget:
            raise SieveBudgetError(
                f"sieve budget {budget} exhausted before the block from M={M} reached C >= 1 "
                f"(partial sum {carry:.6f})")
        hi = min(lo + width - 1, budget)
        ps = sieve(lo, hi)
        if ps.size:
            partial = carry + np.cumsum(_weights(ps, chi))
            hit = np.flatnonzero(partial >= 1.0)
            if hit.size:
                i = int(hit[0])
                found.append(ps[: i + 1])
                primes = np.concatenate(found)
                C = float(partial[i])
                if not 1.0 <= C <= 2.0:
                    raise AssertionError(f"block normalizer {C} outside [1, 2]")
                return PrimeBlock(int(M), int(primes[-1]), C, primes)
            found.append(ps)
            carry = float(partial[-1])
        lo = hi + 1
        width = min(width * 2, 1 << 24)


def block_power(M: int, gamma: float, chi: DivergenceWeight) -> PrimeBlock:
    """Primes in [M, floor(M^gamma)]; C may fall outside [1, 2] and is then flagged."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    top = int(math.floor(float(M) ** gamma * (1 + 1e-15)))
    ps = sieve(M, top)
    if ps.size == 0:
        raise ValueError(f"no primes in [{M}, {top}]")
    C = float(np.sum(_weights(ps, chi)))
    return PrimeBlock(int(M), int(ps[-1]), C, ps, "power", float(gamma))


# ---------------------------------------------------------------- slow schedule


@dataclass(frozen=True, eq=False)
class ScaleSchedule:
    mode: str
    blocks: tuple[PrimeBlock, ...]
    hypotheses: tuple[str, ...] = ()
    gap_bounds: tuple[int, ...] = ()

    variant = "slow"

    @property
    def k_max(self) -> int:
        return len(self.blocks)

    @property
    def starts(self) -> list[int]:
        return [b.M for b in self.blocks]

    def stage_primes(self, k: int) -> np.ndarray:
        return self.blocks[k - 1].primes

    def to_dict(self) -> dict[str, Any]:
        return {"variant": "slow", "mode": self.mode, "hypotheses": list(self.hypotheses),
                "gap_bounds": [str(g) for g in self.gap_bounds],
                "blocks": [b.to_dict() for b in self.blocks]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScaleSchedule":
        return cls(d["mode"], tuple(PrimeBlock.from_dict(b) for b in d["blocks"]),
                   tuple(d.get("hypotheses", ())), tuple(int(g) for g in d.get("gap_bounds", ())))


def _make_block(M: int, chi: DivergenceWeight, policy: str, gamma: float | None,
                budget: int) -> PrimeBlock:
    if policy == "min_sum":
        return select_block(M, chi, budget)
    if policy == "power":
        return block_power(M, 2.0 if gamma is None else gamma, chi)
    raise ValueError(f"unknown block policy {policy!r}")


def build_schedule_slow(M_1: int, k_max: int, profile: ApproximationProfile, chi: DivergenceWeight,
                        mode: str = "strict", next_M: Sequence[int] = (),
                        policies: Sequence[dict[str, Any]] = (),
                        budget: int = DEFAULT_BLOCK_BUDGET) -> ScaleSchedule:
    """Blocks from M_1; strict gaps M_{k+1} = nextprime(ceil(psi(beta(M_k))^-2))."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if mode not in ("strict", "exploratory"):
        raise ValueError(f"unknown mode {mode!r}")

    def policy_of(k: int) -> tuple[str, float | None]:
        if k < len(policies):
            p = policies[k]
            return p.get("policy", "min_sum"), p.get("gamma")
        return "min_sum", None

    if mode == "strict" and any(policy_of(k)[0] != "min_sum" for k in range(k_max)):
        raise ValueError("strict schedules use the min_sum block policy")

    blocks: list[PrimeBlock] = []
    notes: list[str] = []
    gaps: list[int] = []
    M = int(M_1)
    for k in range(k_max):
        pol, gamma = policy_of(k)
        block = _make_block(M, chi, pol, gamma, budget)
        if not block.normalized:
            notes.append(f"stage {k + 1}: block normalizer C={block.C:.6g} outside [1, 2]")
        blocks.append(block)
        gap = profile.inv_square_ceil(block.beta_M)
        gaps.append(gap)
        if k + 1 == k_max:
            break
        if mode == "strict":
            if gap > SIEVE_LIMIT:
                raise StrictRefusal(
                    f"strict schedule: stage {k + 2} needs M_{k + 2} >= ceil(psi(beta(M_{k + 1}))^-2) = {gap} "
                    f"(beta(M_{k + 1}) = {block.beta_M}), beyond the sieve limit 2^40", bound=gap)
            M = next_prime(gap)
        else:
            if k >= len(next_M):
                raise ValueError(f"exploratory mode needs a user-supplied M_{k + 2}")
            M = int(next_M[k])
            if M <= 4 * block.beta_M:
                raise ValueError(f"M_{k + 2}={M} must exceed 4*beta(M_{k + 1}) = {4 * block.beta_M}")
            if M < gap:
                notes.append(f"stage {k + 2}: M_{k + 2}={M} < ceil(psi(beta(M_{k + 1}))^-2) = {gap}")
    for a, b in zip(blocks, blocks[1:]):
        if b.M <= a.M:
            raise AssertionError("block starts must increase")
    return ScaleSchedule(mode, tuple(blocks), tuple(notes), tuple(gaps))


# ---------------------------------------------------------------- fast schedule


@dataclass(frozen=True, eq=False)
class RajchmanStage:
    n: int
    primes: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.primes, dtype=np.int64).copy()
        p.setflags(write=False)
        object.__setattr__(self, "primes", p)

    @property
    def M(self) -> int:
        return int(self.primes[0])

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "M": self.M, "primes": [int(q) for q in self.primes]}


@dataclass(frozen=True, eq=False)
class RajchmanSchedule:
    mode: str
    stages: tuple[RajchmanStage, ...]
    multiplier: float = 8.0
    stage_multiplier: float = 8.0
    hypotheses: tuple[str, ...] = ()

    variant = "fast"

    @property
    def k_max(self) -> int:
        return len(self.stages)

    @property
    def starts(self) -> list[int]:
        return [s.M for s in self.stages]

    def stage_primes(self, k: int) -> np.ndarray:
        return self.stages[k - 1].primes

    def to_dict(self) -> dict[str, Any]:
        return {"variant": "fast", "mode": self.mode, "multiplier": self.multiplier,
                "stage_multiplier": self.stage_multiplier, "hypotheses": list(self.hypotheses),
                "stages": [s.to_dict() for s in self.stages]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RajchmanSchedule":
        stages = tuple(RajchmanStage(int(s["n"]), np.array(s["primes"], dtype=np.int64)) for s in d["stages"])
        return cls(d["mode"], stages, float(d["multiplier"]), float(d["stage_multiplier"]),
                   tuple(d.get("hypotheses", ())))


def _rung_floor(profile: ApproximationProfile, q_prev: int, multiplier: float) -> int:
    """Least integer candidate for the rung after q_prev: >= multiplier/psi(q_prev)."""
    spec = profile.psi.spec
    if spec.get("kind", "power") == "power" and float(profile.tau).is_integer() \
            and float(multiplier).is_integer():
        cand = int(multiplier) * int(q_prev) ** int(profile.tau)
    else:
        cand = int(math.ceil(multiplier / float(profile.psi(float(q_prev)))))
    half = float(profile.psi(float(q_prev))) / 2.0
    cand = max(cand, int(math.floor(float(profile.psi_inverse(half)))) + 1)
    return max(cand, int(q_prev) + 1)


def _next_rung(profile: ApproximationProfile, q_prev: int, multiplier: float) -> int:
    cand = _rung_floor(profile, q_prev, multiplier)
    if cand > SIEVE_LIMIT:
        raise StrictRefusal(f"rung after q={q_prev} needs a prime >= {cand}, beyond the sieve limit 2^40",
                            bound=cand)
    q = next_prime(cand)
    half = float(profile.psi(float(q_prev))) / 2.0
    while not max(1.0 / q, float(profile.psi(float(q)))) < half:
        q = next_prime(q + 1)
    return q


def build_schedule_fast(q_start: int, k_max: int, profile: ApproximationProfile, mode: str = "strict",
                        n: Sequence[int] = (), multiplier: float = 8.0, stage_multiplier: float | None = None,
                        max_rungs: int = 64) -> RajchmanSchedule:
    """Greedy prime ladders; strict n_{k+1} = 100 ceil(psi(q_{k,n_k})^-2)."""
    if q_start < 11:
        raise ValueError("q_start must be >= 11")
    if not n:
        raise ValueError("n_1 must be supplied")
    if mode not in ("strict", "exploratory"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "strict" and multiplier < 8:
        raise ValueError("strict mode fixes the multiplier at >= 8")
    stage_multiplier = multiplier if stage_multiplier is None else stage_multiplier
    stages: list[RajchmanStage] = []
    q = next_prime(q_start)
    n_k = int(n[0])
    for k in range(k_max):
        if k > 0:
            if mode == "strict":
                n_k = 100 * profile.inv_square_ceil(int(stages[-1].primes[-1]))
            elif k < len(n):
                n_k = int(n[k])
            else:
                raise ValueError(f"exploratory mode needs a user-supplied n_{k + 1}")
            if n_k > max_rungs:
                raise StrictRefusal(f"stage {k + 1} needs n_{k + 1} = {n_k} rungs, beyond the rung budget "
                                    f"{max_rungs}", bound=n_k)
            q = _next_rung(profile, int(stages[-1].primes[-1]), stage_multiplier)
        if n_k < 1:
            raise ValueError("n_k must be positive")
        rungs = [q]
        for _ in range(n_k - 1):
            rungs.append(_next_rung(profile, rungs[-1], multiplier))
        stages.append(RajchmanStage(n_k, np.array(rungs, dtype=np.int64)))
    for st in stages:
        for a, b in zip(st.primes, st.primes[1:]):
            half = float(profile.psi(float(a))) / 2.0
            if not max(1.0 / b, float(profile.psi(float(b)))) < half:
                raise AssertionError("rung condition violated")
    notes = []
    if mode == "exploratory" and k_max > 1:
        notes.append("exploratory ladder: n_k user-supplied instead of 100*ceil(psi(q_{k-1,n})^-2)")
    return RajchmanSchedule(mode, tuple(stages), float(multiplier), float(stage_multiplier), tuple(notes))


def schedule_from_dict(d: dict[str, Any]) -> ScaleSchedule | RajchmanSchedule:
    return ScaleSchedule.from_dict(d) if d["variant"] == "slow" else RajchmanSchedule.from_dict(d)
