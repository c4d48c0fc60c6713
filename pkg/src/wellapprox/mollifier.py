"""Ingham-type bump phi on [-1/2, 0] as a convolution of normalized indicators.

With lengths a_j summing to 1/2 the transform factorizes exactly:

    phi_hat(s) = exp(i pi s sum_j a_j) * prod_j sinc(pi a_j s),

using the convention f_hat(s) = int f(x) exp(-2 pi i s x) dx.  The phase is
carried in closed form, so truncating the product only drops sinc factors and
the neglected part is second order in pi a_j s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reports import FAIL, PASS, VerificationReport

_CHUNK = 1 << 16


def _sinc(u: np.ndarray) -> np.ndarray:
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    u2 = u * u
    taylor = 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 * u2 * u2 / 5040.0
    return np.where(small, taylor, np.sin(safe) / safe)


@dataclass(frozen=True, eq=False)
class InghamMollifier:
    lengths: np.ndarray
    beta: float
    beta_prime: float
    tol: float = 1e-12

    def __post_init__(self) -> None:
        a = np.asarray(self.lengths, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
            raise ValueError("lengths must be a nonempty positive sequence")
        if a.size > 1 and np.any(np.diff(a) >= 0):
            raise ValueError("lengths must be strictly decreasing")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "lengths", a)
        # suffix sums of a_j^2: _tail_sq[J] = sum_{j > J} a_j^2  (J = number kept)
        sq = np.concatenate([np.cumsum((a * a)[::-1])[::-1], [0.0]])
        sq.setflags(write=False)
        object.__setattr__(self, "_tail_sq", sq)
        object.__setattr__(self, "_total", math.fsum(a.tolist()))

    @property
    def j_max(self) -> int:
        return int(self.lengths.size)

    @property
    def total_length(self) -> float:
        return self._total

    def spec(self) -> dict:
        return {"beta": self.beta, "beta_prime": self.beta_prime, "j_max": self.j_max, "tol": self.tol}

    # ---------------------------------------------------------- transform

    def terms_needed(self, s) -> np.ndarray:
        """Smallest J with sum_{j>J} (pi a_j s)^2 / 6 < tol."""
        s = np.abs(np.asarray(s, dtype=float))
        tail = (math.pi * s[..., None]) ** 2 * self._tail_sq / 6.0
        ok = tail < self.tol
        return np.argmax(ok, axis=-1)

    def _sinc_product(self, s: np.ndarray, log: bool) -> np.ndarray:
        out = np.empty(s.shape, dtype=float)
        flat_s = s.ravel()
        flat_o = out.ravel()
        for lo in range(0, flat_s.size, _CHUNK):
            ss = flat_s[lo:lo + _CHUNK]
            need = self.terms_needed(ss)
            acc = np.zeros(ss.shape) if log else np.ones(ss.shape)
            for j in range(int(need.max(initial=0))):
                f = _sinc(math.pi * self.lengths[j] * ss)
                live = j < need
                if log:
                    with np.errstate(divide="ignore"):
                        acc += np.where(live, np.log(np.abs(f)), 0.0)
                else:
                    acc *= np.where(live, f, 1.0)
            flat_o[lo:lo + _CHUNK] = acc
        return out

    def phi_hat(self, s, with_error: bool = False):
        """Truncated sinc product with relative-error tag <= tol."""
        sa = np.asarray(s, dtype=float)
        prod = self._sinc_product(sa, log=False)
        val = np.exp(1j * math.pi * self._total * sa) * prod
        if with_error:
            need = self.terms_needed(sa)
            err = (math.pi * sa) ** 2 * self._tail_sq[need] / 6.0
            return (complex(val) if sa.ndim == 0 else val), (float(err) if sa.ndim == 0 else err)
        return complex(val) if sa.ndim == 0 else val

    def log_abs_phi_hat(self, s):
        sa = np.asarray(s, dtype=float)
        out = self._sinc_product(sa, log=True)
        return float(out) if sa.ndim == 0 else out

    # ---------------------------------------------------------- envelope

    def log_envelope(self, v):
        """log of prod_j min(1, 1/(pi a_j |v|)), a monotone bound on |phi_hat|."""
        va = np.abs(np.asarray(v, dtype=float))
        with np.errstate(divide="ignore"):
            lv = np.log(math.pi * va)[..., None] + np.log(self.lengths)
        out = -np.sum(np.maximum(lv, 0.0), axis=-1)
        return float(out) if va.ndim == 0 else out

    def envelope(self, v):
        return np.exp(self.log_envelope(v))

    def envelope_tail_integral(self, x):
        """Exact int_x^inf E(v) dv for the piecewise power-law envelope E (vectorized)."""
        if self.j_max < 2:
            raise ValueError("envelope is not integrable with fewer than two factors")
        scalar = np.ndim(x) == 0
        xa = np.atleast_1d(np.maximum(np.asarray(x, dtype=float), 0.0))
        J = self.j_max
        # piece k (k active factors) is [b_k, b_{k+1}) with E = P_k v^-k
        b = np.concatenate([[0.0], 1.0 / (math.pi * self.lengths), [math.inf]])
        logp = np.concatenate([[0.0], np.cumsum(-np.log(math.pi * self.lengths))])

        def partial(k, left, right):
            if k == 0:
                return right - left
            if k == 1:
                return math.exp(logp[1]) * np.log(right / left)
            ratio = np.where(np.isinf(right), 0.0, (right / left) ** (1 - k))
            return np.exp(logp[k] + (1 - k) * np.log(left)) * (1.0 - ratio) / (k - 1)

        full = np.array([float(partial(k, b[k], b[k + 1])) for k in range(J + 1)])
        suffix = np.concatenate([np.cumsum(full[::-1])[::-1], [0.0]])
        k = np.clip(np.searchsorted(b, xa, side="right") - 1, 0, J)
        out = suffix[k + 1].copy()
        for kk in np.unique(k):
            sel = k == kk
            out[sel] += partial(int(kk), np.maximum(xa[sel], b[kk]) if kk else xa[sel], b[kk + 1])
        return float(out[0]) if scalar else out

    def fourier_cutoff(self, floor: float = 1e-18) -> int:
        """Least K with E(K) <= floor, so |phi_hat(k)| <= floor for |k| >= K."""
        k = 1
        while self.log_envelope(float(k)) > math.log(floor):
            k *= 2
        lo, hi = k // 2, k
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.log_envelope(float(mid)) > math.log(floor):
                lo = mid
            else:
                hi = mid
        return hi

    def phi_eval(self, y, floor: float = 1e-18):
        """phi at arbitrary points of the window [-3/4, 1/4) from its Fourier series.

        This is the trigonometric interpolant of phi_grid carried to frequencies where
        phi_hat is below ``floor``; points outside the window evaluate to 0.
        """
        ya = np.asarray(y, dtype=float)
        K = self.fourier_cutoff(floor)
        coef = self.phi_hat(np.arange(1, K + 1, dtype=float))
        flat = ya.ravel()
        out = np.zeros(flat.shape)
        inside = (flat >= -0.75) & (flat < 0.25)
        pts = flat[inside]
        vals = np.empty(pts.shape)
        step = max(1, (1 << 22) // K)
        kk = np.arange(1, K + 1, dtype=float)
        for lo in range(0, pts.size, step):
            ph = np.exp(2j * math.pi * np.outer(pts[lo:lo + step], kk))
            vals[lo:lo + step] = 1.0 + 2.0 * (ph @ coef).real
        out[inside] = vals
        out = out.reshape(ya.shape)
        return float(out) if ya.ndim == 0 else out

    # ---------------------------------------------------------- grid

    def phi_grid(self, n: int, x0: float = -0.75) -> tuple[np.ndarray, np.ndarray]:
        """Samples of phi at x0 + m/n, m < n, from the inverse transform of phi_hat on |k| <= n/2."""
        if n < 1024 or n & (n - 1):
            raise ValueError("n must be a power of two >= 2^10")
        k = np.fft.fftfreq(n, d=1.0 / n)
        coef = self.phi_hat(k) * np.exp(2j * math.pi * k * x0)
        vals = np.fft.ifft(coef) * n
        resid = float(np.max(np.abs(vals.imag)))
        if resid > 1e-10:
            raise AssertionError(f"phi grid imaginary residue {resid:.3g} exceeds 1e-10")
        x = x0 + np.arange(n) / n
        return x, vals.real.copy()


def build_mollifier(beta: float, j_max: int = 64, tol: float = 1e-12,
                    beta_prime: float | None = None) -> InghamMollifier:
    """Lengths a_j = c0 j^(-1/beta') with sum_{j <= j_max} a_j = 1/2."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    bp = (1.0 + beta) / 2.0 if beta_prime is None else float(beta_prime)
    if not beta < bp < 1:
        raise ValueError("beta' must lie strictly between beta and 1")
    if j_max < 2:
        raise ValueError(f"j_max={j_max} too small to meet tol: the tail envelope needs two factors")
    raw = np.arange(1, j_max + 1, dtype=float) ** (-1.0 / bp)
    c0 = 0.5 / math.fsum(raw.tolist())
    return InghamMollifier(c0 * raw, beta, bp, tol)


def indicator_mollifier(beta: float = 0.5, tol: float = 1e-12) -> InghamMollifier:
    """The single normalized indicator of [-1/2, 0]; a known non-example."""
    return InghamMollifier(np.array([0.5]), beta, (1 + beta) / 2, tol)


def check_mollifier_decay(m: InghamMollifier, s_max: float, beta: float | None = None,
                          floor: float = 0.05, n: int = 256) -> VerificationReport:
    """Worst ratio log|phi_hat(s)| / (-|s|^beta) over log-spaced s; passes when >= floor."""
    if s_max < 100:
        raise ValueError("s_max must be >= 100")
    beta = m.beta if beta is None else beta
    s_lo = max(10.0, 1.0 / (math.pi * m.lengths[0]))
    s = np.logspace(math.log10(s_lo), math.log10(s_max), n)
    la = m.log_abs_phi_hat(s)
    finite = np.isfinite(la)  # exact zeros of a sinc factor only help
    ratio = la[finite] / -(s[finite] ** beta)
    i = int(np.argmin(ratio))
    # least squares log|phi_hat| ~ a - c |s|^beta
    X = np.column_stack([np.ones(finite.sum()), -(s[finite] ** beta)])
    coef, *_ = np.linalg.lstsq(X, la[finite], rcond=None)
    return VerificationReport(
        check_id="mollifier_decay",
        params={**m.spec(), "target_beta": beta, "s_max": s_max, "floor": floor, "samples": n},
        worst_ratio=float(ratio[i]),
        argmax_s=float(s[finite][i]),
        fitted_constant=float(coef[1]),
        status=PASS if ratio[i] >= floor else FAIL,
        details={"s_min": s_lo, "polynomial_regime_from": float(1.0 / (math.pi * m.lengths[-1]))},
    )
