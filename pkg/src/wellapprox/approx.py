"""Approximation function psi, weights chi and omega, dimension function alpha,
the decay envelope theta, structural-condition checks and the doubling majorant.

Every map is vectorized over numpy arrays and built from a JSON-style preset
such as ``{"kind": "power", "tau": 3.0}`` or ``{"kind": "table", "points": [...]}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .reports import FAIL, INFO, PASS, VerificationReport

ArrayLike = float | int | np.ndarray


class DomainError(ValueError):
    """A map was queried outside the range where it is defined or invertible."""


# ---------------------------------------------------------------- helpers


def _arr(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(x_in: ArrayLike, y: np.ndarray):
    return float(y) if np.ndim(x_in) == 0 else y


def _loglinear(x: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of log y against log x, end slopes extrapolated."""
    lx, lxs, lys = np.log(x), np.log(xs), np.log(ys)
    i = np.clip(np.searchsorted(lxs, lx) - 1, 0, len(xs) - 2)
    slope = (lys[i + 1] - lys[i]) / (lxs[i + 1] - lxs[i])
    return np.exp(lys[i] + slope * (lx - lxs[i]))


def _invert(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, lo: float, hi: float,
            increasing: bool) -> np.ndarray:
    """Vectorized bisection on log x for a monotone f on [lo, hi]."""
    y = _arr(y)
    flo, fhi = f(np.array(lo)), f(np.array(hi))
    ymin, ymax = (flo, fhi) if increasing else (fhi, flo)
    if np.any(y < ymin * (1 - 1e-12)) or np.any(y > ymax * (1 + 1e-12)):
        raise DomainError(f"value outside invertible range [{ymin:.3g}, {ymax:.3g}]")
    a = np.full(y.shape, math.log(lo))
    b = np.full(y.shape, math.log(hi))
    for _ in range(400):
        m = 0.5 * (a + b)
        fm = f(np.exp(m))
        right = fm < y if increasing else fm > y
        a = np.where(right, m, a)
        b = np.where(right, b, m)
        if np.all(b - a < 1e-15 * np.maximum(1.0, np.abs(a))):
            break
    return np.exp(0.5 * (a + b))


def _table_points(spec: Mapping[str, Any]) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(spec["points"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("table preset needs at least two [x, value] points")
    order = np.argsort(pts[:, 0])
    xs, ys = pts[order, 0], pts[order, 1]
    if np.any(xs <= 0) or np.any(ys <= 0) or np.any(np.diff(xs) <= 0):
        raise ValueError("table points must be positive with distinct x")
    return xs, ys


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class Curve:
    """A positive map of one variable with an optional inverse."""

    spec: Mapping[str, Any]
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    inv: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __call__(self, x: ArrayLike):
        return _out(x, self.fn(_arr(x)))

    def inverse(self, y: ArrayLike):
        if self.inv is None:
            raise DomainError(f"{self.spec.get('kind')} curve has no inverse")
        return _out(y, self.inv(_arr(y)))


def _psi_curve(spec: Mapping[str, Any]) -> tuple[Curve, float, float]:
    kind = spec.get("kind", "power")
    if kind == "power":
        tau = float(spec["tau"])
        sigma = float(spec.get("sigma", tau))
        return Curve(dict(spec), lambda q: q ** -tau, lambda y: y ** (-1.0 / tau)), tau, sigma
    if kind == "power_log":
        tau = float(spec["tau"])
        kappa = float(spec.get("log_power", 1.0))
        sigma = float(spec.get("sigma", tau))
        # decreasing once log q > kappa / tau; flat below that point
        q0 = math.exp(max(kappa / tau, 0.0)) if kappa > 0 else 1.0

        def psi(q: np.ndarray) -> np.ndarray:
            qq = np.maximum(q, q0)
            return qq ** -tau * np.log(qq) ** kappa if kappa else qq ** -tau

        lo = q0 * (1 + 1e-9) if kappa > 0 else 1.0
        inv = lambda y: _invert(psi, y, lo, 1e150, increasing=False)
        return Curve(dict(spec), psi, inv), tau, sigma
    if kind == "table":
        xs, ys = _table_points(spec)
        if np.any(np.diff(ys) >= 0):
            raise ValueError("psi table must be strictly decreasing")
        slopes = -np.diff(np.log(ys)) / np.diff(np.log(xs))
        tau = float(spec.get("tau", slopes[-1]))
        sigma = float(spec.get("sigma", slopes.min()))
        fn = lambda q: _loglinear(q, xs, ys)
        inv = lambda y: _loglinear(y, ys[::-1], xs[::-1])
        return Curve(dict(spec), fn, inv), tau, sigma
    raise ValueError(f"unknown psi kind {kind!r}")


def _chi_curve(spec: Mapping[str, Any]) -> Curve:
    kind = spec.get("kind", "const")
    if kind == "const":
        c = float(spec.get("value", 1.0))
        return Curve(dict(spec), lambda q: np.full(np.shape(q), c))
    if kind == "loglog":
        return Curve(dict(spec), lambda q: np.log(np.log(q + 16.0)))
    if kind == "log":
        return Curve(dict(spec), lambda q: np.log(np.maximum(q, math.e)))
    if kind == "table":
        xs, ys = _table_points(spec)
        return Curve(dict(spec), lambda q: _loglinear(q, xs, ys))
    raise ValueError(f"unknown chi kind {kind!r}")


def _omega_raw(spec: Mapping[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    kind = spec.get("kind", "loglog")
    if kind == "loglog":
        return lambda t: np.log(np.log(t + 16.0))
    if kind == "logloglog":
        return lambda t: np.log(np.log(np.log(t + 16.0)))
    if kind == "log":
        return lambda t: np.log(t + math.e)
    if kind == "table":
        xs, ys = _table_points(spec)
        return lambda t: _loglinear(t, xs, ys)
    raise ValueError(f"unknown omega kind {kind!r}")


def _alpha_curve(spec: Mapping[str, Any]) -> tuple[Curve, float, float]:
    kind = spec.get("kind", "power")
    if kind == "power":
        nu = float(spec["nu"])
        rho = float(spec.get("rho", nu))
        fn = lambda x: np.where(x > 0, np.abs(x) ** nu, 0.0)
        return Curve(dict(spec), fn, lambda y: y ** (1.0 / nu)), nu, rho
    if kind == "power_log":
        nu = float(spec["nu"])
        kappa = float(spec.get("log_power", 1.0))
        rho = float(spec.get("rho", min(0.999, nu + kappa)))

        def alpha(x: np.ndarray) -> np.ndarray:
            xs = np.where(x > 0, x, 1.0)
            val = xs ** nu * (1.0 + np.abs(np.log(xs))) ** -kappa
            return np.where(x > 0, val, 0.0)

        inv = lambda y: _invert(alpha, y, 1e-300, 1.0, increasing=True)
        return Curve(dict(spec), alpha, inv), nu, rho
    if kind == "table":
        xs, ys = _table_points(spec)
        if np.any(np.diff(ys) <= 0):
            raise ValueError("alpha table must be strictly increasing")
        slopes = np.diff(np.log(ys)) / np.diff(np.log(xs))
        nu = float(spec.get("nu", slopes[0]))
        rho = float(spec.get("rho", slopes.max()))
        fn = lambda x: np.where(x > 0, _loglinear(np.where(x > 0, x, 1.0), xs, ys), 0.0)
        inv = lambda y: _loglinear(y, ys, xs)
        return Curve(dict(spec), fn, inv), nu, rho
    raise ValueError(f"unknown alpha kind {kind!r}")


# ---------------------------------------------------------------- domain types


@dataclass(frozen=True)
class ApproximationProfile:
    psi: Curve
    tau: float
    sigma: float

    def psi_inverse(self, y: ArrayLike):
        return self.psi.inverse(y)

    @property
    def spec(self) -> dict[str, Any]:
        return dict(self.psi.spec)

    @property
    def kappa(self) -> float:
        """Exponent (sigma+1)/(4 sigma) of the proven single-factor tail."""
        return (self.sigma + 1.0) / (4.0 * self.sigma)

    def inv_square_ceil(self, q: int) -> int:
        """ceil(psi(q)^-2), exact in integers for pure powers with integral 2*tau."""
        spec = self.psi.spec
        two_tau = 2.0 * self.tau
        if spec.get("kind", "power") == "power" and float(two_tau).is_integer():
            return int(q) ** int(two_tau)
        return int(math.ceil(float(self.psi(float(q))) ** -2))

    def inv_ceil(self, q: int) -> int:
        """ceil(1/psi(q)), exact for pure powers with integral tau."""
        spec = self.psi.spec
        if spec.get("kind", "power") == "power" and float(self.tau).is_integer():
            return int(q) ** int(self.tau)
        return int(math.ceil(1.0 / float(self.psi(float(q)))))


def make_profile(spec: Mapping[str, Any]) -> ApproximationProfile:
    curve, tau, sigma = _psi_curve(spec)
    return ApproximationProfile(curve, tau, sigma)


@dataclass(frozen=True)
class DivergenceWeight:
    chi: Curve

    def __call__(self, q: ArrayLike):
        return self.chi(q)

    @property
    def spec(self) -> dict[str, Any]:
        return dict(self.chi.spec)


def make_chi(spec: Mapping[str, Any] | None = None) -> DivergenceWeight:
    return DivergenceWeight(_chi_curve(spec or {"kind": "const"}))


@dataclass(frozen=True)
class GrowthGauge:
    """omega, capped by log t on t >= 2 and held constant below 2."""

    spec: Mapping[str, Any]
    raw: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, t: ArrayLike):
        tt = _arr(t)
        tc = np.maximum(tt, 2.0)
        return _out(t, np.minimum(self.raw(tc), np.log(tc)))


def make_omega(spec: Mapping[str, Any] | None = None) -> GrowthGauge:
    spec = dict(spec or {"kind": "loglog"})
    return GrowthGauge(spec, _omega_raw(spec))


@dataclass(frozen=True)
class DimensionFunction:
    alpha: Curve
    nu: float
    rho: float

    def __call__(self, x: ArrayLike):
        return self.alpha(x)

    @property
    def spec(self) -> dict[str, Any]:
        return dict(self.alpha.spec)


def make_alpha(spec: Mapping[str, Any]) -> DimensionFunction:
    curve, nu, rho = _alpha_curve(spec)
    return DimensionFunction(curve, nu, rho)


def psi_from_alpha(alpha: DimensionFunction) -> ApproximationProfile:
    """psi(q) = alpha^{-1}(q^-2), tau = 2/nu, sigma = 2/rho.

    The inverse is exact: psi(q) = y iff q = alpha(y)^{-1/2}.
    """
    spec = alpha.spec
    if spec.get("kind", "power") == "power":
        tau = 2.0 / alpha.nu
        return make_profile({"kind": "power", "tau": tau, "sigma": 2.0 / alpha.rho})

    def psi(q: np.ndarray) -> np.ndarray:
        try:
            return alpha.alpha.inverse(q ** -2.0)
        except DomainError as exc:
            raise DomainError(f"alpha not invertible on the queried range: {exc}") from exc

    def inverse(y: np.ndarray) -> np.ndarray:
        return alpha.alpha(y) ** -0.5

    grid = np.logspace(-12, 0, 200)
    if np.any(np.diff(alpha.alpha(grid)) <= 0):
        raise DomainError("alpha is not strictly increasing on (1e-12, 1]")
    curve = Curve({"kind": "from_alpha", "alpha": dict(spec)}, psi, inverse)
    return ApproximationProfile(curve, 2.0 / alpha.nu, 2.0 / alpha.rho)


# ---------------------------------------------------------------- theta


def log_theta(profile: ApproximationProfile, chi: DivergenceWeight, xi: ArrayLike):
    x = _arr(xi)
    if np.any(x < 1):
        raise DomainError("theta is defined for xi >= 1")
    try:
        q = _arr(profile.psi_inverse(1.0 / x))
    except DomainError as exc:
        raise DomainError(f"psi inverse not evaluable at 1/xi: {exc}") from exc
    return _out(xi, -np.log(q) - np.log(_arr(chi(q))))


def theta_eval(profile: ApproximationProfile, chi: DivergenceWeight, xi: ArrayLike):
    """theta(xi) = 1 / (psi^{-1}(1/xi) * chi(psi^{-1}(1/xi)))."""
    return _out(xi, np.exp(_arr(log_theta(profile, chi, xi))))


@dataclass(frozen=True)
class DecayEnvelope:
    profile: ApproximationProfile
    chi: DivergenceWeight
    omega: GrowthGauge | None = None

    def log_theta(self, xi: ArrayLike):
        return log_theta(self.profile, self.chi, xi)

    def theta(self, xi: ArrayLike):
        return theta_eval(self.profile, self.chi, xi)

    def log_value(self, xi: ArrayLike):
        """log(theta * omega), or log theta when no gauge is attached."""
        lt = _arr(self.log_theta(xi))
        if self.omega is not None:
            lt = lt + np.log(_arr(self.omega(xi)))
        return _out(xi, lt)

    def __call__(self, xi: ArrayLike):
        return _out(xi, np.exp(_arr(self.log_value(xi))))


# ---------------------------------------------------------------- structural checks


MARGIN_TOL = 1e-9  # sampled margins within rounding of zero count as met


@dataclass(frozen=True)
class SampleSpec:
    q_min: float = 100.0
    q_max: float = 1e8
    n: int = 48
    eps: Sequence[float] = (0.05, 0.25)
    sum_bound: int = 10**6
    t_max: float = 1e12
    xi_min: float = 1e3
    xi_max: float = 1e12


def _pair_margin(lx: np.ndarray, ly: np.ndarray) -> float:
    """min over pairs i<j of (ly_j - ly_i)/(lx_j - lx_i); lx increasing."""
    dx = lx[None, :] - lx[:, None]
    dy = ly[None, :] - ly[:, None]
    iu = np.triu_indices(len(lx), 1)
    return float(np.min(dy[iu] / dx[iu]))


def check_structural_conditions(profile: ApproximationProfile, chi: DivergenceWeight,
                                omega: GrowthGauge | None = None,
                                sample: SampleSpec | None = None) -> VerificationReport:
    """Sampled margin per condition; a failing condition fails the report, never raises."""
    from .scales import sieve

    sample = sample or SampleSpec()
    omega = omega or make_omega()
    conds: list[dict[str, Any]] = []

    def add(name: str, margin: float, asserted: bool = True, strict: bool = False, **extra: Any) -> None:
        # strict inequalities of parameters (tau > 2) get no rounding allowance
        met = margin > 0 if strict else margin >= -MARGIN_TOL
        passed = bool(met) if asserted else None
        conds.append({"name": name, "margin": margin, "passed": passed,
                      "asserted": asserted, **extra})

    q = np.logspace(math.log10(sample.q_min), math.log10(sample.q_max), sample.n)
    psi = _arr(profile.psi(q))
    lq, lpsi = np.log(q), np.log(psi)

    add("tau_gt_2", profile.tau - 2.0, strict=True)
    add("sigma_gt_1", profile.sigma - 1.0, strict=True)
    add("tau_sampled", float(-lpsi[-1] / lq[-1]), asserted=False)
    add("psi_nonincreasing", float(-np.max(np.diff(psi) / psi[1:])))
    back = _arr(profile.psi_inverse(psi))
    add("psi_inverse_roundtrip", 1e-9 - float(np.max(np.abs(back / q - 1.0))))
    # psi(q1)/psi(q2) >= (q2/q1)^sigma  <=>  slope of -log psi against log q >= sigma
    add("sigma_condition", _pair_margin(lq, -lpsi) - profile.sigma)

    q3 = np.logspace(math.log10(3.0), math.log10(sample.q_max), sample.n)
    c3 = _arr(chi(q3))
    add("chi_bounds", float(min(np.min(c3 - 1.0), np.min(np.log(q3) - c3))))
    # chi(q2)/chi(q1) <= (q2/q1)^eps  <=>  slope of log chi against log q <= eps
    chi_slope = -_pair_margin(lq, -np.log(_arr(chi(q))))
    for e in sample.eps:
        add(f"chi_growth_eps_{e:g}", e - chi_slope)

    primes = sieve(2, int(sample.sum_bound))
    terms = 1.0 / (primes * _arr(chi(primes.astype(float))))
    partial = np.cumsum(terms)
    checkpoints = [int(c) for c in np.unique(np.logspace(2, math.log10(sample.sum_bound), 5).astype(np.int64))]
    sums = [float(partial[np.searchsorted(primes, c, side="right") - 1]) for c in checkpoints]
    add("chi_divergence_trend", float(np.min(np.diff(sums))) if len(sums) > 1 else 0.0, asserted=False,
        checkpoints=checkpoints, partial_sums=sums, increments=np.diff(sums).tolist())

    t = np.logspace(math.log10(2.0), math.log10(sample.t_max), sample.n)
    w = _arr(omega(t))
    add("omega_nondecreasing", float(np.min(np.diff(w))))
    add("omega_le_log", float(np.min(np.log(t) - w)))

    xi = np.logspace(math.log10(sample.xi_min), math.log10(sample.xi_max), sample.n)
    ratio = _arr(log_theta(profile, chi, xi / 2)) - _arr(log_theta(profile, chi, xi))
    e_max = max(sample.eps) if sample.eps else 0.0
    add("theta_doubling", (1 + e_max) / profile.sigma * math.log(2) - float(np.max(ratio)))

    asserted = [c for c in conds if c["asserted"]]
    ok = all(c["passed"] for c in asserted)
    worst = min(asserted, key=lambda c: c["margin"])
    return VerificationReport(
        check_id="structural_conditions",
        params={"psi": profile.spec, "chi": chi.spec, "omega": dict(omega.spec),
                "q_min": sample.q_min, "q_max": sample.q_max, "n": sample.n, "eps": list(sample.eps),
                "sum_bound": sample.sum_bound},
        worst_ratio=worst["margin"],
        status=PASS if ok else FAIL,
        details={"conditions": conds, "worst_condition": worst["name"]},
    )


# ---------------------------------------------------------------- doubling majorant


@dataclass(frozen=True)
class DoublingMajorant:
    """N(xi) = (floor(xi)+1)^-1 * sum_{t <= xi} M1(t), with M1(s) = sup_{|t| >= s} |m(t)|."""

    values: np.ndarray
    m1: np.ndarray

    @property
    def radius(self) -> int:
        return len(self.values) - 1

    def __call__(self, xi: ArrayLike):
        x = _arr(xi)
        if np.any(x < 0):
            raise DomainError("majorant is defined on [0, inf)")
        k = np.floor(x).astype(np.int64)
        S = self.radius
        inside = self.values[np.minimum(k, S)]
        beyond = self.values[S] * (S + 1) / (k + 1.0)
        return _out(xi, np.where(k <= S, inside, beyond))


def doubling_majorant(m: np.ndarray | Sequence[complex]) -> DoublingMajorant:
    """Average-of-suffix-sup majorant on a symmetric table m[-S..S] (index s+S)."""
    a = np.abs(np.asarray(m))
    if a.size == 0:
        raise ValueError("empty coefficient table")
    if a.size % 2 != 1:
        raise ValueError("table must cover a symmetric range [-S, S]")
    if not np.all(np.isfinite(a)):
        raise ValueError("table entries must be finite")
    S = a.size // 2
    two_sided = np.maximum(a[S:], a[S::-1])
    m1 = np.maximum.accumulate(two_sided[::-1])[::-1]
    n = np.cumsum(m1) / np.arange(1, S + 2)
    # rounding guard: exact arithmetic already gives N >= M1 and N nonincreasing
    n = np.minimum.accumulate(np.maximum(n, m1))
    n.setflags(write=False)
    m1.setflags(write=False)
    return DoublingMajorant(n, m1)
