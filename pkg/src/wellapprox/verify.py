"""Executable checks for the single-factor bounds, the convolution stability
mechanism, the mu_k estimates, the Cauchy diagnostics and the real-frequency
extension.  Ratios are formed in the log domain throughout.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .approx import DecayEnvelope
from .reports import FAIL, PASS, UNMET, VerificationReport, relative_drift
from .spectrum import (FactorSpectrum, SparseSpectrum, SpectralAccumulator, ULP, convolve_stage)

DRIFT_LIMIT = 0.05
KAHANE_INFLATION = 8.0


class HypothesisError(ValueError):
    """A strict-mode check found an unmet stability hypothesis."""


def _log_abs(c: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(c))


def _worst(log_ratio: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """exp(max log ratio) and its location; 0 when every entry is an exact zero."""
    if log_ratio.size == 0 or not np.isfinite(log_ratio).any():
        return 0.0, float(s[0]) if s.size else 0.0
    i = int(np.argmax(log_ratio))
    return float(math.exp(log_ratio[i])), float(s[i])


def _status(ok: bool, unmet: Sequence[str]) -> str:
    if ok:
        return PASS
    return UNMET if unmet else FAIL


# ---------------------------------------------------------------- single factor


def check_single_factor(f: FactorSpectrum, S: int, envelope: DecayEnvelope | None = None,
                        kappa: float | None = None, n3: float | None = None) -> VerificationReport:
    """Fitted constants over 0 < |s| <= S and over the doubled range 2S.

    Slow factors report C1 = max |g_hat|/theta and, where tabulated, C2 against
    exp(-1/2 (|s|/n3)^kappa); fast factors report max |g_hat| * n_k.
    """
    S = int(S)
    if S < 4 * f.M:
        raise ValueError(f"S={S} must be >= 4*M = {4 * f.M}")
    tab = f.table(2 * S)
    s = np.arange(1, 2 * S + 1)
    pos = tab[2 * S + 1:]
    la = _log_abs(pos)
    below = pos[: f.M - 1]
    zero_below = bool(np.all(below == 0))
    details: dict = {"zero_below_M": zero_below, "M": f.M, "variant": f.variant}
    params = {**f.describe(), "S": S}
    if f.variant == "slow":
        if envelope is None:
            raise ValueError("slow factors need a decay envelope")
        lr = la - np.asarray(envelope.log_theta(s.astype(float)))
        c_s, arg_s = _worst(lr[:S], s[:S])
        c_2s, arg_2s = _worst(lr, s)
        details.update({"C1_S": c_s, "C1_2S": c_2s, "argmax_2S": arg_2s})
        if n3 is not None and kappa is not None:
            far = s >= n3
            if far.any():
                lf = la[far] + 0.5 * (s[far] / n3) ** kappa
                details["C2"] = _worst(lf, s[far])[0]
            else:
                details["C2"] = None
                details["C2_note"] = f"far range |s| >= {n3:.6g} lies beyond the table radius {2 * S}"
    else:
        lr = la + math.log(f.norm)
        c_s, arg_s = _worst(lr[:S], s[:S])
        c_2s, arg_2s = _worst(lr, s)
        details.update({"scaled_S": c_s, "scaled_2S": c_2s, "argmax_2S": arg_2s})
    drift = relative_drift(c_s, c_2s)
    details["drift"] = drift
    finite = math.isfinite(c_s) and math.isfinite(c_2s)
    ok = finite and drift < DRIFT_LIMIT and zero_below
    if not ok and finite and drift >= DRIFT_LIMIT:
        details["trend"] = "growing" if c_2s > c_s else "shrinking"
    return VerificationReport("single_factor", params, c_2s, arg_2s, c_2s, PASS if ok else FAIL, details=details)


# ---------------------------------------------------------------- stability


def _suffix_sup(a: np.ndarray) -> np.ndarray:
    """m1[x] = max_{x <= |u| <= R} a(u) for a table over [-R, R]."""
    R = a.size // 2
    sym = np.maximum(a[R:], a[R::-1])
    return np.maximum.accumulate(sym[::-1])[::-1]


def check_stability(H: SpectralAccumulator, G: FactorSpectrum | SparseSpectrum, N1: float, N2: float,
                    N3: float, variant: str = "lemma1", *, envelope: DecayEnvelope | None = None,
                    kappa: float | None = None, delta: float | None = None, S: int | None = None,
                    radius: int | None = None, n3_floor: float | None = None,
                    strict: bool = False) -> VerificationReport:
    """Hypotheses first, then the near, mid and far conclusions for H*G.

    The near-range conclusion is checked through its mechanism: inside the
    computed window, |H*G(s) - H(s)| <= sum_{t != 0} M1(|t|/2) |G(t)| with M1 the
    suffix sup of |H|.  The full bound adds the neglected tail and the stored
    truncation errors.
    """
    if variant not in ("lemma1", "lemma2"):
        raise ValueError("variant must be 'lemma1' or 'lemma2'")
    if variant == "lemma1" and envelope is None:
        raise ValueError("lemma1 needs a decay envelope")
    if variant == "lemma2" and delta is None:
        raise ValueError("lemma2 needs delta")
    if kappa is None:
        kappa = 0.75 if variant == "lemma2" else 0.5
    S = int(min(H.radius // 2, max(N2, 64)) if S is None else S)
    R = int(H.radius - S if radius is None else radius)
    T = G.support_points(R)
    GT = G.values(T)
    aG = np.abs(GT)
    nz = T != 0
    Tn = np.abs(T[nz]).astype(float)

    hyp: dict[str, dict] = {}

    def hyp_add(name: str, met: bool | None, **vals) -> None:
        hyp[name] = {"met": met, **vals}

    g0 = complex(GT[~nz][0]) if (~nz).any() else 0j
    hyp_add("G_global", bool(aG.max(initial=0) <= 1 + 1e-12), value=float(aG.max(initial=0)))
    hyp_add("G_zero", bool(abs(g0 - 1) <= 1e-12), value=g0)
    small = nz & (np.abs(T) < N2) & (aG > 0)
    hyp_add("G_small", bool(not small.any()), first_violation=int(np.abs(T[small]).min()) if small.any() else None)
    if variant == "lemma1":
        lg = _log_abs(GT[nz]) - np.asarray(envelope.log_theta(np.maximum(Tn, 1.0)))
        hyp_add("G_everywhere", True, fitted=_worst(lg, Tn)[0])
    else:
        hyp_add("G_everywhere", True, fitted=float(aG[nz].max(initial=0) / delta))
        hyp_add("delta_lt_N1^-2", bool(delta < N1 ** -2.0), delta=delta, bound=N1 ** -2.0)
    big = Tn >= 2 * N3
    if big.any():
        lgv = _log_abs(GT[nz][big]) + 0.5 * (Tn[big] / (2 * N3)) ** kappa
        hyp_add("G_very_large", True, fitted=_worst(lgv, Tn[big])[0])
    else:
        hyp_add("G_very_large", None, note=f"|s| >= 2*N3 = {2 * N3:.6g} beyond window {R}")
    h = H.coeffs
    Hs = np.arange(-H.radius, H.radius + 1)
    hmax = float(np.abs(h).max())
    hyp_add("H_global", bool(hmax <= 2 + H.trunc_err), value=hmax)
    if variant == "lemma1":
        hz = Hs != 0
        lh = _log_abs(h[hz]) - np.asarray(envelope.log_value(np.abs(Hs[hz]).astype(float)))
        hyp_add("H_everywhere", True, fitted=_worst(lh, np.abs(Hs[hz]).astype(float))[0])
    hyp_add("N2_large", bool(N2 >= 16 * N1), N1=N1, N2=N2, rule="N2 >= 16*N1")
    if n3_floor is not None:
        hyp_add("N3_large", bool(N3 >= n3_floor), N3=N3, floor=n3_floor)
    unmet = [k for k, v in hyp.items() if v["met"] is False]
    if strict and unmet:
        raise HypothesisError(f"unmet hypotheses in strict mode: {', '.join(unmet)}")
    notes = [f"hypothesis {k} unmet" for k in unmet] + list(H.unmet)

    HG = convolve_stage(H, G, S, 0.0, radius=R)
    out = HG.coeffs
    s = np.arange(-S, S + 1)
    Hc = h[H.radius - S:H.radius + S + 1]
    near = np.abs(s) < N2 / 4.0
    diff = np.abs(out[near] - Hc[near])
    lhs = float(diff.max(initial=0.0))
    m1 = _suffix_sup(np.abs(h))
    half = np.minimum(np.ceil(Tn / 2).astype(np.int64), m1.size - 1)
    terms = m1[half] * aG[nz]
    proxy_window = float(np.sum(terms))
    slack = ULP * (T.size + 2) * max(proxy_window, hmax)
    mechanism = lhs <= proxy_window + slack
    neglected = HG.steps[-1]["neglected"] if HG.steps else 0.0
    hyp_tail = float(np.sum(np.exp(-0.5 * (Tn / (16.0 * N1)) ** kappa) * aG[nz]))
    details = {
        "variant": variant,
        "hypotheses": hyp,
        "near_lhs": lhs,
        "near_proxy_window": proxy_window,
        "near_full_bound": proxy_window + neglected + HG.trunc_err + H.trunc_err,
        "near_hypothesis_tail": hyp_tail,
        "log10_N2_pow_minus_99": -99.0 * math.log10(N2),
        "mechanism_holds": bool(mechanism),
        "exact_identity": bool(lhs == 0.0),
        "window_radius": R,
        "neglected": neglected,
        "trunc_err": HG.trunc_err,
    }
    mid = np.abs(s) >= N2 / 4.0
    sm = np.abs(s[mid]).astype(float)
    if mid.any():
        if variant == "lemma1":
            lm = _log_abs(out[mid]) - np.asarray(envelope.log_value(np.maximum(sm, 1.0)))
        else:
            lm = _log_abs(out[mid]) - 0.5 * math.log(delta)
        fitted, arg = _worst(lm, sm)
        details["mid_fitted"] = fitted
    else:
        fitted, arg = None, None
        details["mid_note"] = f"|s| >= N2/4 = {N2 / 4:.6g} beyond S = {S}"
    far = np.abs(s) >= 8 * N3
    if far.any():
        sf = np.abs(s[far]).astype(float)
        details["far_fitted"] = _worst(_log_abs(out[far]) + 0.5 * (sf / (8 * N3)) ** kappa, sf)[0]
    else:
        details["far_note"] = f"|s| >= 8*N3 = {8 * N3:.6g} beyond S = {S}"
    ok = mechanism and (fitted is None or math.isfinite(fitted))
    params = {"N1": N1, "N2": N2, "N3": N3, "S": S, "kappa": kappa, "delta": delta, "k": H.k}
    return VerificationReport("stability", params, fitted, arg, details.get("mid_fitted"), _status(ok, notes),
                              "exploratory" if notes else "strict", notes, details)


# ---------------------------------------------------------------- mu estimates


def check_mu_estimates(acc: SpectralAccumulator, envelope: DecayEnvelope | None = None, variant: str = "slow",
                       n_k: int | None = None, M_k: int | None = None) -> VerificationReport:
    """Fitted envelope constant over the full table and over its first half."""
    S = acc.radius
    half = S // 2
    c0 = acc.coeffs[S]
    mass_ok = bool(abs(c0) <= 2 + acc.trunc_err)
    s = np.arange(1, S + 1)
    pos = acc.coeffs[S + 1:]
    la = _log_abs(pos)
    details: dict = {"mu0": c0, "mass_ok": mass_ok, "trunc_err": acc.trunc_err, "variant": variant}
    if variant == "slow":
        if envelope is None:
            raise ValueError("slow estimates need an envelope")
        lr = la - np.asarray(envelope.log_value(s.astype(float)))
        sel = np.ones(S, dtype=bool)
    elif variant == "fast":
        if n_k is None or M_k is None:
            raise ValueError("fast estimates need n_k and M_k")
        lr = la + 0.5 * math.log(n_k)
        sel = s >= M_k / 4.0
        details.update({"n_k": n_k, "M_k": M_k})
        if not sel[:half].any():
            raise ValueError(f"S/2 = {half} does not reach M_k/4 = {M_k / 4}")
    else:
        raise ValueError("variant must be 'slow' or 'fast'")
    c_half, _ = _worst(lr[:half][sel[:half]], s[:half][sel[:half]])
    c_full, arg = _worst(lr[sel], s[sel])
    drift = relative_drift(c_half, c_full)
    finite = math.isfinite(c_full)
    details.update({"constant_half": c_half, "constant_full": c_full, "drift": drift,
                    "certified": bool(acc.trunc_err < 1e-6)})
    ok = mass_ok and finite and drift < DRIFT_LIMIT
    if finite and drift >= DRIFT_LIMIT:
        details["trend"] = "growing" if c_full > c_half else "shrinking"
    return VerificationReport("mu_estimates", {"k": acc.k, "S": S, "variant": variant}, c_full, arg, c_full,
                              _status(ok, acc.unmet), acc.hypothesis, list(acc.unmet), details)


# ---------------------------------------------------------------- Cauchy


def check_cauchy(accs: Sequence[SpectralAccumulator]) -> VerificationReport:
    """Pairwise differences on |s| < M_l/4 against trunc errors plus per-stage tail proxies."""
    if len(accs) < 2:
        raise ValueError("need at least two accumulators")
    ids = {a.schedule for a in accs}
    if len(ids) != 1:
        raise ValueError(f"accumulators come from different schedules: {sorted(ids)}")
    by_k = {a.k: a for a in accs}
    if len(by_k) != len(accs):
        raise ValueError("duplicate stage counts")
    ks = sorted(by_k)
    last = by_k[ks[-1]]

    def step_proxy(j: int) -> float:
        step = next((st for st in last.steps if st["stage"] == j), None)
        if step is None:
            return math.inf
        prev = by_k.get(j - 1)
        sup = prev.sup_bound() if prev is not None else 2.0
        return sup * (step["g_abs_sum"] - 1.0) + step["neglected"]

    pairs = []
    ok = True
    worst, worst_s = 0.0, 0.0
    for i, l in enumerate(ks):
        for k in ks[i + 1:]:
            a, b = by_k[l], by_k[k]
            M_l = a.starts[l - 1] if len(a.starts) >= l else b.starts[l - 1]
            r = min(a.radius, b.radius, int(math.ceil(M_l / 4.0)) - 1)
            s = np.arange(-r, r + 1)
            d = np.abs(a.at(s) - b.at(s))
            j = int(np.argmax(d))
            proxy = a.trunc_err + b.trunc_err + sum(step_proxy(jj) for jj in range(l + 1, k + 1))
            held = bool(d[j] <= proxy)
            ok &= held
            if d[j] >= worst:
                worst, worst_s = float(d[j]), float(s[j])
            pairs.append({"l": l, "k": k, "range": r, "max_diff": float(d[j]), "argmax_s": int(s[j]),
                          "diff_at_0": float(d[r]), "proxy": proxy, "dominated": held})
    unmet = list(dict.fromkeys(n for a in accs for n in a.unmet))
    return VerificationReport("cauchy", {"stages": ks}, worst, worst_s, None, _status(ok, unmet),
                              "exploratory" if unmet else "strict", unmet, {"pairs": pairs})


# ---------------------------------------------------------------- Kahane extension


def kahane_sample(S: int, n: int = 128, lo: float = 1.5) -> np.ndarray:
    """Log-spaced non-integer frequencies in [lo, S], offset off the integers, plus 22.5."""
    x = np.logspace(math.log10(lo), math.log10(S), n)
    x = np.floor(x) + 0.5
    x = np.unique(np.concatenate([x, [22.5]]))
    return x[(x >= lo) & (x <= S)]


def kahane_extension(transform: Callable[[np.ndarray], np.ndarray], xi: np.ndarray, envelope: DecayEnvelope,
                     integer_constant: float, integer_table: tuple[np.ndarray, np.ndarray] | None = None,
                     inflation: float = KAHANE_INFLATION, unmet: Sequence[str] = ()) -> VerificationReport:
    """Real-frequency constant max |mu_hat(xi)|/(theta omega) against inflation * integer constant."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 1):
        raise ValueError("sample frequencies must be >= 1")
    vals = transform(xi)
    lr = _log_abs(vals) - np.asarray(envelope.log_value(xi))
    real_c, arg = _worst(lr, xi)
    details = {"integer_constant": integer_constant, "inflation": inflation, "samples": int(xi.size),
               "ratio_to_integer": real_c / integer_constant if integer_constant > 0 else None}
    if integer_table is not None:
        s_int, v_int = integer_table
        details["integer_consistency"] = float(np.max(np.abs(transform(s_int.astype(float)) - v_int)))
    near0 = transform(np.array([1e-6, 0.0]))
    details["continuity_at_0"] = float(abs(near0[0] - near0[1]))
    ok = math.isfinite(real_c) and real_c <= inflation * integer_constant
    return VerificationReport("kahane", {"samples": int(xi.size), "xi_max": float(xi.max())}, real_c, arg,
                              real_c, _status(ok, unmet), "exploratory" if unmet else "strict",
                              list(unmet), details)
