"""Single-stage factors g_k, exact coefficient evaluation, truncated iterated
convolution with propagated error bounds, spatial oracles and support intervals.

Coefficient tables over [-S, S] are stored as arrays indexed by s + S.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .approx import ApproximationProfile, DivergenceWeight
from .mollifier import InghamMollifier
from .scales import PrimeBlock, RajchmanSchedule, RajchmanStage, ScaleSchedule

ULP = 2.0 ** -52
MAX_RADIUS = 1 << 40


class RadiusShortfall(RuntimeError):
    """The accumulator is too narrow for the truncation radius eps demands."""

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


class ResolutionRefusal(RuntimeError):
    """A uniform grid is too coarse to resolve the narrowest bump."""


def schedule_id(schedule: ScaleSchedule | RajchmanSchedule) -> str:
    blob = json.dumps(schedule.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _ordered(t: np.ndarray) -> np.ndarray:
    """Ascending |t|, ties negative first."""
    return t[np.lexsort((t, np.abs(t)))]


# ---------------------------------------------------------------- factors


@dataclass(frozen=True, eq=False)
class FactorSpectrum:
    """g_hat(s) = norm^-1 sum_{q | s} w_q phi_hat(psi(q) s), with g_hat(0) = 1."""

    variant: str
    primes: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    norm: float
    mollifier: InghamMollifier
    stage: int = 1

    def __post_init__(self) -> None:
        for name in ("primes", "radii", "weights"):
            a = np.array(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def M(self) -> int:
        return int(self.primes[0])

    @property
    def q_max(self) -> int:
        return int(self.primes[-1])

    def values(self, t: np.ndarray) -> np.ndarray:
        return self.g_hat(t)

    def g_hat(self, s):
        """Exact divisor formula; divisibility by direct remainder against the prime list."""
        sa = np.asarray(s)
        if not np.issubdtype(sa.dtype, np.integer):
            if np.any(sa != np.round(sa)):
                raise TypeError("g_hat accepts integer frequencies only")
            sa = sa.astype(np.int64)
        flat = sa.ravel().astype(np.int64)
        out = np.zeros(flat.shape, dtype=complex)
        nz = flat != 0
        for q, w, r in zip(self.primes, self.weights, self.radii):
            hit = nz & (flat % q == 0)
            if hit.any():
                out[hit] += w * self.mollifier.phi_hat(r * flat[hit].astype(float))
        out /= self.norm
        out[~nz] = 1.0
        out = out.reshape(sa.shape)
        return complex(out) if sa.ndim == 0 else out

    def table(self, R: int) -> np.ndarray:
        """g_hat on [-R, R] by striding over multiples of each prime."""
        R = int(R)
        out = np.zeros(2 * R + 1, dtype=complex)
        for q, w, r in zip(self.primes, self.weights, self.radii):
            q = int(q)
            if q > R:
                break
            j = np.arange(q, R + 1, q, dtype=np.int64)
            v = w * self.mollifier.phi_hat(r * j.astype(float))
            out[R + j] += v
            out[R - j] += np.conj(v)
        out /= self.norm
        out[R] = 1.0
        return out

    def support_points(self, R: int) -> np.ndarray:
        """0 and the nonzero multiples of stage primes within [-R, R], in summation order."""
        R = int(R)
        parts = [np.arange(q, R + 1, q, dtype=np.int64) for q in self.primes if q <= R]
        pos = np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
        return _ordered(np.concatenate([[0], pos, -pos]).astype(np.int64))

    def abs_sum_bound(self) -> float:
        return math.inf

    def abs_tail_bound(self, R: int):
        """Rigorous bound on sum_{|t| > R} |g_hat(t)| from the monotone mollifier envelope."""
        R = np.asarray(R, dtype=float)
        scalar = R.ndim == 0
        R = np.atleast_1d(R)
        out = np.zeros(R.shape)
        c = self.radii * self.primes.astype(float)  # psi(q) q: argument step per multiple
        for i, r in enumerate(R):
            j0 = np.floor(r / self.primes.astype(float))
            integ = self.mollifier.envelope_tail_integral(c * j0) / c
            out[i] = 2.0 * float(np.sum(self.weights * integ)) / self.norm
        return float(out[0]) if scalar else out

    def sup_bound(self) -> float:
        return 1.0

    def describe(self) -> dict[str, Any]:
        return {"variant": self.variant, "stage": self.stage, "M": self.M, "q_max": self.q_max,
                "primes": int(self.primes.size), "norm": self.norm}


def factor_from_block(block: PrimeBlock, profile: ApproximationProfile, chi: DivergenceWeight,
                      mollifier: InghamMollifier, stage: int = 1) -> FactorSpectrum:
    q = block.primes.astype(float)
    w = 1.0 / (q * np.asarray(chi(q), dtype=float))
    return FactorSpectrum("slow", block.primes, np.asarray(profile.psi(q), dtype=float), w, block.C,
                          mollifier, stage)


def factor_from_rungs(stage: RajchmanStage, profile: ApproximationProfile, mollifier: InghamMollifier,
                      index: int = 1) -> FactorSpectrum:
    q = stage.primes.astype(float)
    return FactorSpectrum("fast", stage.primes, np.asarray(profile.psi(q), dtype=float),
                          np.ones(q.size), float(stage.n), mollifier, index)


def factors_for(schedule: ScaleSchedule | RajchmanSchedule, profile: ApproximationProfile,
                chi: DivergenceWeight, mollifier: InghamMollifier) -> list[FactorSpectrum]:
    if isinstance(schedule, ScaleSchedule):
        return [factor_from_block(b, profile, chi, mollifier, k + 1) for k, b in enumerate(schedule.blocks)]
    return [factor_from_rungs(st, profile, mollifier, k + 1) for k, st in enumerate(schedule.stages)]


@dataclass(frozen=True, eq=False)
class SparseSpectrum:
    """A finitely supported G given by explicit points; used for fixtures."""

    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.points, dtype=np.int64)
        order = np.lexsort((t, np.abs(t)))
        object.__setattr__(self, "points", t[order])
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex)[order])

    @property
    def M(self) -> int:
        nz = np.abs(self.points[self.points != 0])
        return int(nz.min()) if nz.size else MAX_RADIUS

    def support_points(self, R: int) -> np.ndarray:
        return self.points[np.abs(self.points) <= R]

    def values(self, t: np.ndarray) -> np.ndarray:
        lookup = dict(zip(self.points.tolist(), self.coeffs.tolist()))
        return np.array([lookup.get(int(x), 0.0) for x in np.asarray(t).ravel()], dtype=complex)

    def abs_tail_bound(self, R: int) -> float:
        return float(np.sum(np.abs(self.coeffs[np.abs(self.points) > R])))

    def sup_bound(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def unit_impulse() -> SparseSpectrum:
    return SparseSpectrum(np.array([0]), np.array([1.0 + 0j]))


# ---------------------------------------------------------------- accumulators


@dataclass(frozen=True, eq=False)
class SpectralAccumulator:
    k: int
    coeffs: np.ndarray
    trunc_err: float
    schedule: str = ""
    unmet: tuple[str, ...] = ()
    starts: tuple[int, ...] = ()
    tail_bound: Callable[[int], float] | None = field(default=None, repr=False)
    mass_bound: float | None = None
    steps: tuple[dict, ...] = ()

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=complex)
        if c.size % 2 != 1:
            raise ValueError("coefficient table must cover [-S, S]")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def radius(self) -> int:
        return self.coeffs.size // 2

    @property
    def hypothesis(self) -> str:
        return "exploratory" if self.unmet else "strict"

    def at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.int64)
        if np.any(np.abs(s) > self.radius):
            raise IndexError("frequency outside the tabulated radius")
        return self.coeffs[s + self.radius]

    def sup_bound(self) -> float:
        """|true coeff| <= true coeff at 0 for a positive measure."""
        return float(abs(self.coeffs[self.radius]) + self.trunc_err)

    def restrict(self, S: int) -> "SpectralAccumulator":
        S = int(S)
        if S > self.radius:
            raise ValueError("cannot widen an accumulator")
        R = self.radius
        return SpectralAccumulator(self.k, self.coeffs[R - S:R + S + 1], self.trunc_err, self.schedule,
                                   self.unmet, self.starts, self.tail_bound, self.mass_bound, self.steps)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))))


def accumulator_from_factor(f: FactorSpectrum, radius: int, schedule: str = "",
                            unmet: Sequence[str] = ()) -> SpectralAccumulator:
    tab = f.table(radius)
    err = f.mollifier.tol + ULP * f.primes.size
    return SpectralAccumulator(1, tab, err, schedule, tuple(unmet), (f.M,), f.abs_tail_bound, 1.0)


def impulse_accumulator(radius: int) -> SpectralAccumulator:
    c = np.zeros(2 * radius + 1, dtype=complex)
    c[radius] = 1.0
    return SpectralAccumulator(0, c, 0.0, tail_bound=lambda U: 0.0, mass_bound=1.0)


def _neglected(acc: SpectralAccumulator, g, S: int, R: int) -> float:
    """Bound on sum over support points |t| > R of |H(s - t) G(t)| for |s| <= S."""
    via_g = acc.sup_bound() * float(g.abs_tail_bound(R))
    via_h = math.inf
    if acc.tail_bound is not None and R > S:
        via_h = g.sup_bound() * float(acc.tail_bound(R - S))
    return min(via_g, via_h)


def truncation_radius(acc: SpectralAccumulator, g, S: int, eps: float, limit: int = MAX_RADIUS
                      ) -> tuple[int | None, float]:
    """Least R (to a factor of two, then bisected) whose neglected tail is <= eps."""
    R = max(int(S), 64)
    while _neglected(acc, g, S, R) > eps:
        R *= 2
        if R > limit:
            return None, _neglected(acc, g, S, limit)
    lo, hi = R // 2, R
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _neglected(acc, g, S, mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi, _neglected(acc, g, S, hi)


def sparse_convolution(H: np.ndarray, T: np.ndarray, GT: np.ndarray, S: int) -> np.ndarray:
    """(H*G)(s) = sum_t H(s - t) G(t) for |s| <= S, summed in the given order of T."""
    Hr = H.size // 2
    if T.size and int(np.max(np.abs(T))) > Hr - S:
        raise RadiusShortfall("table too narrow for the support points", int(np.max(np.abs(T))) + S)
    out = np.zeros(2 * S + 1, dtype=complex)
    width = 2 * S + 1
    for t, g in zip(T.tolist(), GT.tolist()):
        lo = Hr - S - t
        out += g * H[lo:lo + width]
    return out


def convolve_stage(acc: SpectralAccumulator, f, S: int, eps: float, *, radius: int | None = None,
                   allow_capped: bool = False, radius_cap: int | None = None,
                   unmet: Sequence[str] = ()) -> SpectralAccumulator:
    """Next accumulator on [-S, S]; the truncation radius R is chosen so the neglected tail <= eps.

    When the accumulator cannot host S + R and ``allow_capped`` is set, R is capped
    and the honest (possibly large) neglected-tail bound enters trunc_err.
    """
    S = int(S)
    room = acc.radius - S
    if room < 0:
        raise RadiusShortfall(f"accumulator radius {acc.radius} < requested S={S}", S)
    notes = list(acc.unmet) + list(unmet)
    if radius is None:
        need, _ = truncation_radius(acc, f, S, eps)
        cap = room if radius_cap is None else min(room, int(radius_cap))
        if need is not None and need <= cap:
            R = need
        elif allow_capped:
            R = cap
            req = "beyond 2^40" if need is None else str(S + need)
            notes.append(f"stage {acc.k + 1}: truncation radius capped at {R} (eps={eps:g} needs radius {req})")
        else:
            req = MAX_RADIUS if need is None else S + need
            raise RadiusShortfall(
                f"stage {acc.k + 1}: eps={eps:g} needs accumulator radius {req}, have {acc.radius}", req)
    else:
        R = int(radius)
        if R > room:
            raise RadiusShortfall(f"radius {R} needs accumulator radius {S + R}, have {acc.radius}", S + R)
    neglected = _neglected(acc, f, S, R)
    T = f.support_points(R)
    GT = f.values(T)
    out = sparse_convolution(acc.coeffs, T, GT, S)
    gsum = float(np.sum(np.abs(GT)))
    hsup = acc.sup_bound()
    tol = getattr(getattr(f, "mollifier", None), "tol", 0.0)
    err = acc.trunc_err * gsum + neglected + (tol + ULP * T.size) * hsup * gsum
    starts = tuple(acc.starts) + (int(f.M),)
    step = {"stage": acc.k + 1, "M": int(f.M), "radius": int(R), "support_points": int(T.size),
            "g_abs_sum": gsum, "neglected": neglected}
    return SpectralAccumulator(acc.k + 1, out, err, acc.schedule, tuple(dict.fromkeys(notes)), starts,
                               None, None, tuple(acc.steps) + (step,))


def dense_convolution(H: np.ndarray, G_dense: np.ndarray, S: int) -> np.ndarray:
    """Independent reference: full dot product over every t in [-R, R] for each |s| <= S."""
    Hr = H.size // 2
    R = G_dense.size // 2
    if Hr < S + R:
        raise RadiusShortfall("H table too narrow for dense convolution", S + R)
    rev = G_dense[::-1]
    out = np.empty(2 * S + 1, dtype=complex)
    for i, s in enumerate(range(-S, S + 1)):
        out[i] = np.dot(H[Hr + s - R:Hr + s + R + 1], rev)
    return out


@dataclass(frozen=True)
class RadiusPlan:
    radii: tuple[int, ...]
    neglected: tuple[float, ...]
    capped: tuple[bool, ...]


def build_accumulators(schedule: ScaleSchedule | RajchmanSchedule, factors: Sequence[FactorSpectrum],
                       S: int, eps: float, *, allow_capped: bool = False, radius_cap: int = 1 << 17,
                       k_max: int | None = None) -> list[SpectralAccumulator]:
    """mu_hat_1 .. mu_hat_K on [-S, S]; intermediate tables are widened as the radius plan needs."""
    K = len(factors) if k_max is None else k_max
    sid = schedule_id(schedule)
    base_unmet = list(schedule.hypotheses)
    # plan truncation radii from the last stage backwards
    width = [0] * (K + 1)  # width[k]: extra radius acc_k needs beyond S
    radii: list[int] = [0] * (K + 1)
    for k in range(K, 1, -1):
        inner = S + width[k]
        probe = accumulator_from_factor(factors[0], 0) if k == 2 else None
        h = probe if probe is not None else SpectralAccumulator(k - 1, np.array([2.0 + 0j]), 0.0)
        need, _ = truncation_radius(h, factors[k - 1], inner, eps)
        if need is None or need > radius_cap:
            if not allow_capped:
                req = MAX_RADIUS if need is None else inner + need
                raise RadiusShortfall(f"stage {k}: eps={eps:g} needs accumulator radius {req} "
                                      f"(cap {radius_cap})", req)
            need = radius_cap
        radii[k] = need
        width[k - 1] = width[k] + need
    accs: list[SpectralAccumulator] = []
    acc = accumulator_from_factor(factors[0], S + width[1], sid, base_unmet)
    accs.append(acc)
    for k in range(2, K + 1):
        acc = convolve_stage(acc, factors[k - 1], S + width[k], eps, allow_capped=allow_capped,
                             radius_cap=radii[k])
        accs.append(acc)
    return [a.restrict(S) for a in accs]


# ---------------------------------------------------------------- spatial oracles


def _amplitudes(f: FactorSpectrum) -> np.ndarray:
    """Per-bump height so that bump mass * q matches the factor's Fourier weight."""
    return f.weights / (f.primes.astype(float) * f.radii)


def g_grid(f: FactorSpectrum, n: int, min_cells: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Samples of g on x_m = m/n, m < n: normalized sum of bumps height * phi((x - p/q)/psi(q))."""
    if n & (n - 1):
        raise ValueError("n must be a power of two")
    cells = float(f.radii.min()) * n
    if cells < min_cells:
        raise ResolutionRefusal(f"narrowest bump psi({f.q_max}) spans {cells:.3g} cells at n={n}; "
                                f"need >= {min_cells}")
    g = np.zeros(n)
    amp = _amplitudes(f)
    m = f.mollifier
    for q, r, a in zip(f.primes.tolist(), f.radii.tolist(), amp.tolist()):
        p = np.arange(1, q + 1)
        lo = np.ceil((p / q - 0.5 * r) * n).astype(np.int64)
        hi = np.floor((p / q) * n).astype(np.int64)
        counts = np.maximum(hi - lo + 1, 0)
        idx = np.repeat(lo, counts) + (np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts))
        centre = np.repeat(p / q, counts)
        y = (idx / n - centre) / r
        np.add.at(g, idx % n, a * m.phi_eval(y))
    g /= f.norm
    if g.min() < -1e-10:
        raise AssertionError(f"grid sample {g.min():.3g} below -1e-10")
    return np.arange(n) / n, g


@dataclass(frozen=True)
class GridCoefficients:
    coeffs: np.ndarray  # index s + n/2 for |s| <= n/2 (last entry is the Nyquist alias)
    samples: np.ndarray
    error_estimate: float

    @property
    def radius(self) -> int:
        return self.coeffs.size // 2

    def transform(self, xi) -> np.ndarray:
        """(1/n) sum_m mu(x_m) e(-xi x_m) at arbitrary real xi."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        n = self.samples.size
        x = np.arange(n) / n
        out = np.empty(xi.shape, dtype=complex)
        for i, v in enumerate(xi):
            out[i] = np.dot(self.samples, np.exp(-2j * math.pi * v * x)) / n
        return out


def mu_grid_oracle(factors: Sequence[FactorSpectrum], k: int, n: int) -> GridCoefficients:
    """Pointwise product of the first k g_grid tables, then the discrete transform."""
    prod = np.ones(n)
    est = 0.0
    for f in factors[:k]:
        _, g = g_grid(f, n)
        prod *= g
        env = f.mollifier.envelope(f.radii * (n / 2.0))
        est += 2.0 * float(np.sum(f.weights * env)) / f.norm
    if prod.min() < -1e-10:
        raise AssertionError("product grid below -1e-10")
    c = np.fft.fft(prod) / n
    half = n // 2
    coeffs = np.concatenate([c[half:], c[:half + 1]])  # s = -n/2 .. n/2
    return GridCoefficients(coeffs, prod, est)


def g_hat_quadrature(f: FactorSpectrum, xi, n_loc: int = 1 << 11, chunk: int = 512) -> np.ndarray:
    """Bump-local spatial oracle at real frequencies.

    Each bump integral is a trapezoid sum over phi_grid(n_loc) samples mapped onto
    the bump, and the residue sum over p = 1..q is taken term by term, so neither the
    sinc product nor the divisor identity is used.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    y, ph = f.mollifier.phi_grid(n_loc)
    keep = ph != 0.0
    y, ph = y[keep], ph[keep]
    amp = _amplitudes(f)
    integer = np.all(xi == np.round(xi))
    total = np.zeros(xi.shape, dtype=complex)
    for q, r, a in zip(f.primes.tolist(), f.radii.tolist(), amp.tolist()):
        p = np.arange(1, q + 1, dtype=np.int64)
        roots = np.exp(-2j * math.pi * np.arange(q) / q)
        res = np.empty(xi.shape, dtype=complex)
        for lo in range(0, xi.size, chunk):
            xs = xi[lo:lo + chunk]
            if integer:
                res[lo:lo + chunk] = roots[np.outer(xs.astype(np.int64) % q, p) % q].sum(axis=1)
            else:
                res[lo:lo + chunk] = np.exp(-2j * math.pi * np.outer(xs, p / q)).sum(axis=1)
        live = np.abs(res) > 1e-9 * q
        bump = np.zeros(xi.shape, dtype=complex)
        if live.any():
            bump[live] = np.exp(-2j * math.pi * np.outer(xi[live] * r, y)) @ ph / n_loc
        total += a * r * res * bump
    return total / f.norm


def quad_oracle_table(f: FactorSpectrum, S: int, n_loc: int = 1 << 11) -> np.ndarray:
    """g_hat_quadrature on [-S, S], using conj symmetry of a real measure for s < 0."""
    pos = g_hat_quadrature(f, np.arange(0, S + 1), n_loc)
    return np.concatenate([np.conj(pos[:0:-1]), pos])


# ---------------------------------------------------------------- support intervals


def merge_intervals(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if lo.size == 0:
        return lo.copy(), hi.copy()
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run = np.maximum.accumulate(hi)
    start = np.concatenate([[True], lo[1:] > run[:-1]])
    idx = np.flatnonzero(start)
    return lo[idx], np.maximum.reduceat(hi, idx)


def intersect_sweep(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Intersection of two sorted disjoint interval lists by a two-pointer sweep."""
    alo, ahi = a
    blo, bhi = b
    i = j = 0
    out_lo: list[float] = []
    out_hi: list[float] = []
    while i < alo.size and j < blo.size:
        lo = max(alo[i], blo[j])
        hi = min(ahi[i], bhi[j])
        if lo <= hi:
            out_lo.append(lo)
            out_hi.append(hi)
        if ahi[i] < bhi[j]:
            i += 1
        else:
            j += 1
    return np.array(out_lo), np.array(out_hi)


def intersect_intervals(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]
                        ) -> tuple[np.ndarray, np.ndarray]:
    """The sweep above, vectorized: each interval of a advances its pointer into b by binary search."""
    alo, ahi = a
    blo, bhi = b
    first = np.searchsorted(bhi, alo, side="left")
    stop = np.searchsorted(blo, ahi, side="right")
    cnt = np.maximum(stop - first, 0)
    tot = int(cnt.sum())
    if tot == 0:
        return np.zeros(0), np.zeros(0)
    owner = np.repeat(np.arange(alo.size), cnt)
    j = np.repeat(first, cnt) + (np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt))
    return np.maximum(alo[owner], blo[j]), np.minimum(ahi[owner], bhi[j])


def contains(outer: tuple[np.ndarray, np.ndarray], inner: tuple[np.ndarray, np.ndarray],
             slack: float = 0.0) -> bool:
    """Every inner interval lies inside one outer interval (outer sorted disjoint)."""
    olo, ohi = outer
    ilo, ihi = inner
    if ilo.size == 0:
        return True
    if olo.size == 0:
        return False
    k = np.searchsorted(olo, ilo + slack, side="right") - 1
    ok = (k >= 0) & (ohi[np.maximum(k, 0)] >= ihi - slack) & (olo[np.maximum(k, 0)] <= ilo + slack)
    return bool(np.all(ok))


def stage_pieces(primes: np.ndarray, radii: np.ndarray, within: tuple[np.ndarray, np.ndarray]
                 ) -> tuple[np.ndarray, np.ndarray]:
    """All pieces [p/q - r, p/q + r] clipped into the intervals of ``within`` (p over the integers)."""
    alo, ahi = within
    los, his = [], []
    for q, r in zip(primes.tolist(), radii.tolist()):
        plo = np.ceil((alo - r) * q).astype(np.int64)
        phi = np.floor((ahi + r) * q).astype(np.int64)
        cnt = np.maximum(phi - plo + 1, 0)
        tot = int(cnt.sum())
        if tot == 0:
            continue
        owner = np.repeat(np.arange(alo.size), cnt)
        p = np.repeat(plo, cnt) + (np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        c = p / q
        lo = np.maximum(c - r, alo[owner])
        hi = np.minimum(c + r, ahi[owner])
        keep = lo <= hi
        los.append(lo[keep])
        his.append(hi[keep])
    if not los:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(los), np.concatenate(his)


@dataclass(frozen=True, eq=False)
class IntervalSystem:
    """Per-stage unions (stage k >= 2 restricted to the stage k-1 intersection) and running intersections."""

    convention: str
    unions: tuple[tuple[np.ndarray, np.ndarray], ...]
    intersections: tuple[tuple[np.ndarray, np.ndarray], ...]
    piece_lengths: tuple[float, ...]
    primes: tuple[np.ndarray, ...]
    radii: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.intersections)

    @staticmethod
    def length(iv: tuple[np.ndarray, np.ndarray]) -> float:
        return float(np.sum(iv[1] - iv[0]))


def support_system(schedule: ScaleSchedule | RajchmanSchedule, k: int, profile: ApproximationProfile,
                   convention: str = "half") -> IntervalSystem:
    """Intervals [p/q - r, p/q + r] with r = psi(q)/2 ("half") or psi(q) ("full"), clipped to [0, 1]."""
    if convention not in ("half", "full"):
        raise ValueError("convention must be 'half' or 'full'")
    scale = 0.5 if convention == "half" else 1.0
    current = (np.array([0.0]), np.array([1.0]))
    unions, inters, lengths, ps, rs = [], [], [], [], []
    for i in range(1, k + 1):
        primes = schedule.stage_primes(i)
        radii = scale * np.asarray(profile.psi(primes.astype(float)), dtype=float)
        lo, hi = stage_pieces(primes, radii, current)
        lengths.append(float(np.sum(hi - lo)))
        union = merge_intervals(lo, hi)
        current = intersect_intervals(current, union)
        unions.append(union)
        inters.append(current)
        ps.append(primes)
        rs.append(radii)
    return IntervalSystem(convention, tuple(unions), tuple(inters), tuple(lengths), tuple(ps), tuple(rs))


def membership(x: float, system: IntervalSystem, k: int | None = None) -> list[bool]:
    """Whether x lies in the running intersection at each stage 1..k (binary search)."""
    k = system.k if k is None else k
    out = []
    for lo, hi in system.intersections[:k]:
        i = int(np.searchsorted(lo, x, side="right")) - 1
        out.append(bool(i >= 0 and x <= hi[i]))
    return out


# ---------------------------------------------------------------- CSV tables

CSV_COLUMNS = ("s", "re", "im", "abs", "envelope", "ratio", "trunc_err")


def _g17(x: float) -> str:
    return "%.17g" % x


def coefficient_rows(acc: SpectralAccumulator, log_envelope: Callable[[np.ndarray], np.ndarray]
                     ) -> list[list[str]]:
    """Rows for s = -S..S; the s = 0 envelope and ratio are left empty."""
    S = acc.radius
    s = np.arange(-S, S + 1)
    c = acc.coeffs
    a = np.abs(c)
    nz = s != 0
    le = np.full(s.shape, np.nan)
    le[nz] = log_envelope(np.abs(s[nz]).astype(float))
    with np.errstate(divide="ignore"):
        ratio = np.where(nz, np.exp(np.log(a) - le), np.nan)
    env = np.exp(le)
    err = _g17(acc.trunc_err)
    rows = []
    for i in range(s.size):
        e = "" if not nz[i] else _g17(env[i])
        r = "" if not nz[i] else _g17(ratio[i])
        rows.append([str(int(s[i])), _g17(c[i].real), _g17(c[i].imag), _g17(a[i]), e, r, err])
    return rows


def write_coefficients_csv(path, acc: SpectralAccumulator, log_envelope, header: dict | None = None) -> None:
    lines = []
    for k, v in (header or {}).items():
        lines.append(f"# {k}={v}")
    lines.append(",".join(CSV_COLUMNS))
    lines.extend(",".join(r) for r in coefficient_rows(acc, log_envelope))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_coefficients_csv(path) -> tuple[dict[str, str], np.ndarray, np.ndarray, float]:
    """Header comments, s, complex coefficients and trunc_err; floats round-trip exactly."""
    header: dict[str, str] = {}
    s_vals, re, im = [], [], []
    err = 0.0
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k] = v
                continue
            if line.startswith("s,"):
                continue
            parts = line.split(",")
            s_vals.append(int(parts[0]))
            re.append(float(parts[1]))
            im.append(float(parts[2]))
            err = float(parts[6])
    return header, np.array(s_vals, dtype=np.int64), np.array(re) + 1j * np.array(im), err
