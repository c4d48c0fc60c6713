"""Two-level covers of the limit set, their alpha-cover sums, interval counts
and the log gamma reciprocal-sum identity for power blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .approx import ApproximationProfile, DimensionFunction
from .reports import FAIL, INFO, PASS, VerificationReport
from .scales import RajchmanSchedule, ScaleSchedule, sieve
from .spectrum import contains, intersect_intervals, merge_intervals, stage_pieces, support_system

ALPHA_TOL = 1e-9
RATIO_BAND = (0.5, 2.0)


class AlphaMismatch(ValueError):
    """alpha(psi(q)) q^2 differs from 1 beyond tolerance on the block primes."""


def alpha_identity_defect(alpha: DimensionFunction, profile: ApproximationProfile, primes: np.ndarray) -> float:
    q = primes.astype(float)
    return float(np.max(np.abs(np.asarray(alpha(np.asarray(profile.psi(q)))) * q * q - 1.0)))


def previous_system(schedule: ScaleSchedule | RajchmanSchedule, k: int, profile: ApproximationProfile
                    ) -> tuple[np.ndarray, np.ndarray, bool]:
    """I_{k-1} as individual closed intervals [p/q - psi, p/q + psi], p = 0..q-1 (unclipped).

    I_0 is [0, 1]; the returned flag marks it so counts are taken mod q.
    """
    if k == 1:
        return np.array([0.0]), np.array([1.0]), True
    primes = schedule.stage_primes(k - 1)
    los, his = [], []
    for q in primes.tolist():
        r = float(profile.psi(float(q)))
        c = np.arange(q) / q
        los.append(c - r)
        his.append(c + r)
    lo, hi = np.concatenate(los), np.concatenate(his)
    order = np.argsort(lo, kind="stable")
    return lo[order], hi[order], False


def count_formula(a: np.ndarray, b: np.ndarray, q: int, r: float, circle: bool) -> np.ndarray:
    """floor(q(b + r)) - ceil(q(a - r)) + 1 residues whose piece meets [a, b]."""
    n = np.floor(q * (b + r)) - np.ceil(q * (a - r)) + 1
    n = np.maximum(n, 0)
    return np.minimum(n, q) if circle else n


def count_enumerate(a: np.ndarray, b: np.ndarray, q: int, r: float, circle: bool) -> np.ndarray:
    """Independent count: sorted centres p/q over a covering integer range, searched against [a - r, b + r]."""
    plo = int(math.floor(float(a.min()) * q)) - 2
    phi = int(math.ceil(float(b.max()) * q)) + 2
    centres = np.arange(plo, phi + 1) / q
    lo = np.searchsorted(centres, a - r, side="left")
    hi = np.searchsorted(centres, b + r, side="right")
    n = (hi - lo).astype(float)
    return np.minimum(n, q) if circle else n


def _piece_alpha(a, b, centre, r, alpha):
    d = np.minimum(b, centre + r) - np.maximum(a, centre - r)
    return np.asarray(alpha(np.maximum(d, 0.0)))


@dataclass
class CoverReport:
    k: int
    gamma: float | None
    cardinality: int
    cover_sum: float
    chain_bound: float
    chain_constant: float
    reciprocal_sum: float
    alpha_defect: float
    pair_count: int
    ratio_min: float
    ratio_max: float
    fraction_in_band: float
    max_count_defect: float
    formula_matches_enumeration: bool
    support_contained: bool | None = None
    per_prime: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def build_cover(schedule: ScaleSchedule | RajchmanSchedule, k: int, alpha: DimensionFunction,
                profile: ApproximationProfile, check_support: bool = True,
                alpha_tol: float = ALPHA_TOL) -> CoverReport:
    """Enumerate U = {J cap [p/q +- psi(q)]} for J in I_{k-1}, q in stage k, all residues p."""
    primes = schedule.stage_primes(k)
    defect = alpha_identity_defect(alpha, profile, primes)
    if defect > alpha_tol:
        raise AlphaMismatch(f"alpha(psi(q)) q^2 deviates from 1 by {defect:.3g} on stage {k} primes")
    a, b, circle = previous_system(schedule, k, profile)
    length = b - a
    total_len = float(np.sum(length))
    card = 0
    cover_sum = 0.0
    chain_inner = 0.0
    recip = 0.0
    rmin, rmax = math.inf, 0.0
    in_band = 0
    pairs = 0
    max_defect = 0.0
    agree = True
    rows = []
    for q in primes.tolist():
        r = float(profile.psi(float(q)))
        n = count_formula(a, b, q, r, circle)
        if not np.array_equal(n, count_enumerate(a, b, q, r, circle)):
            agree = False
        # counting bound: |n - q |J'|| <= 1 with J' widened by 2 psi(q)
        max_defect = max(max_defect, float(np.max(np.abs(n - q * (length + 2 * r)))))
        ratio = n / (length * q)
        rmin = min(rmin, float(ratio.min()))
        rmax = max(rmax, float(ratio.max()))
        in_band += int(np.count_nonzero((ratio >= RATIO_BAND[0]) & (ratio <= RATIO_BAND[1])))
        pairs += int(n.size)
        full = float(alpha(2 * r))
        if circle:
            s_q = n.sum() * full
        else:
            if 1.0 / q <= 2 * r:
                raise ValueError(f"pieces for q={q} overlap (1/q <= 2 psi(q)); interior diameters not uniform")
            live = np.flatnonzero(n >= 1)
            al, bl, nl = a[live], b[live], n[live]
            p_lo = np.ceil(q * (al - r))
            p_hi = np.floor(q * (bl + r))
            ends = _piece_alpha(al, bl, p_lo / q, r, alpha)
            two = nl >= 2
            ends[two] += _piece_alpha(al[two], bl[two], p_hi[two] / q, r, alpha)
            s_q = math.fsum(ends.tolist()) + float(np.sum(np.maximum(nl - 2, 0))) * full
        card += int(n.sum())
        cover_sum += float(s_q)
        chain_inner += q * full
        recip += 1.0 / q
        rows.append({"q": q, "count": int(n.sum()), "sum": float(s_q)})
    chain = total_len * chain_inner
    contained = None
    if check_support:
        contained = cover_contains_support(schedule, k, profile, (a, b, circle))
    return CoverReport(k, getattr(_block(schedule, k), "gamma", None), card, cover_sum, chain,
                       cover_sum / chain if chain > 0 else math.nan, recip, defect, pairs, rmin, rmax,
                       in_band / pairs if pairs else math.nan, max_defect, agree, contained, rows)


def _block(schedule, k):
    return schedule.blocks[k - 1] if isinstance(schedule, ScaleSchedule) else None


def cover_contains_support(schedule, k: int, profile: ApproximationProfile, prev=None) -> bool:
    """Stage-k support intersection (full radius) inside the union of U, by interval algebra."""
    system = support_system(schedule, k, profile, convention="full")
    inner = system.intersections[-1]
    a, b, circle = prev if prev is not None else previous_system(schedule, k, profile)
    if circle:
        base = (np.array([0.0]), np.array([1.0]))
    else:
        # pieces centred at 0 wrap: [-r, r] becomes [0, r] and [1 - r, 1]
        wrap = a < 0
        base = merge_intervals(np.concatenate([np.maximum(a, 0.0), a[wrap] + 1.0]),
                               np.concatenate([np.minimum(b, 1.0), np.ones(int(wrap.sum()))]))
    primes = schedule.stage_primes(k)
    radii = np.asarray(profile.psi(primes.astype(float)), dtype=float)
    lo, hi = stage_pieces(primes, radii, base)
    union = merge_intervals(lo, hi)
    outer = intersect_intervals(base, union)
    return contains(outer, inner, slack=1e-15)


def block_reciprocal_sum(M: int, gamma: float) -> dict[str, float]:
    """sum_{M <= q <= M^gamma, q prime} 1/q and its deviation from log gamma."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    top = int(math.floor(float(M) ** gamma * (1 + 1e-15)))
    ps = sieve(max(2, M), max(2, top)) if top >= M else np.zeros(0, dtype=np.int64)
    total = math.fsum((1.0 / ps.astype(float)).tolist())
    return {"M": M, "gamma": gamma, "top": top, "primes": int(ps.size), "sum": total,
            "log_gamma": math.log(gamma), "deviation": total - math.log(gamma)}


def cover_sum_trend(schedule: ScaleSchedule | RajchmanSchedule, alpha: DimensionFunction,
                    profile: ApproximationProfile, k_max: int | None = None) -> VerificationReport:
    """Cover sums per k with the fitted exponent of sum ~ M_{k-1}^e (M_0 := 1)."""
    k_max = schedule.k_max if k_max is None else k_max
    covers = [build_cover(schedule, k, alpha, profile) for k in range(1, k_max + 1)]
    sums = [c.cover_sum for c in covers]
    starts = [1] + list(schedule.starts[:k_max - 1])
    details: dict[str, Any] = {"sums": sums, "M_prev": starts, "target_exponent": 2.0 - profile.tau,
                               "covers": [{k: v for k, v in c.to_dict().items() if k != "per_prime"} for c in covers]}
    if k_max < 2:
        details["note"] = "single stage: insufficient depth for a trend"
        return VerificationReport("cover_trend", {"k_max": k_max}, None, None, None, INFO, details=details)
    x = np.log(np.array(starts, dtype=float))
    y = np.log(np.array(sums))
    slope = float(np.polyfit(x, y, 1)[0])
    decreasing = all(b < a for a, b in zip(sums, sums[1:]))
    details.update({"strictly_decreasing": decreasing, "fitted_exponent": slope})
    target = 2.0 - profile.tau
    if abs(slope - target) > 0.5 * abs(target):
        details["slack_flag"] = "subpolynomial slack dominates the fitted exponent at this depth"
    ok = decreasing and slope < 0
    return VerificationReport("cover_trend", {"k_max": k_max, "tau": profile.tau}, sums[-1] / sums[0], None,
                              slope, PASS if ok else FAIL, "exploratory" if schedule.hypotheses else "strict",
                              list(schedule.hypotheses), details)
