"""Command line entry point: construct, verify and plotdata.

Exit codes: 0 pass, 1 any check failed, 2 strict-mode refusal, 3 only
hypothesis-unmet outcomes, 4 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import hausdorff, spectrum, verify
from .config import BaselineStore, ConfigError, Pipeline, RunConfig, make_pipeline
from .reports import FAIL, INFO, PASS, UNMET, VerificationReport, clean, combine_status
from .scales import RajchmanSchedule, ScaleSchedule, SieveBudgetError, StrictRefusal, schedule_from_dict

EXIT_PASS, EXIT_FAIL, EXIT_REFUSAL, EXIT_UNMET, EXIT_CONFIG = 0, 1, 2, 3, 4
SUITES = ("single-factor", "stability", "mu", "cauchy", "kahane", "cover")


class ArtifactError(RuntimeError):
    """Missing or inconsistent construct artifacts."""


def _dump(path: Path, obj: Any) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(clean(obj), sort_keys=True, indent=2) + "\n")


def _load(path: Path) -> Any:
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}; run construct first")
    with open(path) as fh:
        return json.load(fh)


class ConstantEnvelope:
    """log envelope -1/2 log n for the fast variant."""

    def __init__(self, n: int):
        self.n = n

    def log_value(self, xi):
        return np.full(np.shape(xi), -0.5 * math.log(self.n))


def log_envelope_for(pipe: Pipeline, schedule, k: int) -> Callable[[np.ndarray], np.ndarray]:
    if pipe.variant == "slow":
        return lambda s: np.asarray(pipe.envelope.log_value(s))
    return ConstantEnvelope(schedule.stages[k - 1].n).log_value


def _factors(pipe: Pipeline, schedule):
    return spectrum.factors_for(schedule, pipe.profile, pipe.chi, pipe.mollifier)


# ---------------------------------------------------------------- construct


def cmd_construct(config: RunConfig, out: Path) -> int:
    pipe = make_pipeline(config)
    out.mkdir(parents=True, exist_ok=True)
    h = config.hash
    try:
        schedule = pipe.build_schedule()
    except (StrictRefusal, SieveBudgetError) as exc:
        _dump(out / "refusal.json", {"config_hash": h, "config": config.to_dict(), "stage": "schedule",
                                     "message": str(exc), "bound": str(getattr(exc, "bound", None))})
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    _dump(out / "schedule.json", {"config_hash": h, "config": config.to_dict(), "schedule": schedule.to_dict(),
                                  "schedule_id": spectrum.schedule_id(schedule)})
    factors = _factors(pipe, schedule)
    exploratory = config.schedule["mode"] == "exploratory"
    try:
        accs = spectrum.build_accumulators(schedule, factors, config.S, config.eps, allow_capped=exploratory,
                                           radius_cap=int(config.sweep["radius_cap"]))
    except spectrum.RadiusShortfall as exc:
        _dump(out / "refusal.json", {"config_hash": h, "config": config.to_dict(), "stage": "accumulators",
                                     "message": str(exc), "bound": str(exc.required)})
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    meta = []
    for acc in accs:
        path = out / f"coeffs_k{acc.k}.csv"
        spectrum.write_coefficients_csv(path, acc, log_envelope_for(pipe, schedule, acc.k),
                                        {"config_hash": h, "k": acc.k, "schedule_id": acc.schedule})
        meta.append({"k": acc.k, "radius": acc.radius, "trunc_err": acc.trunc_err, "hypothesis": acc.hypothesis,
                     "unmet": list(acc.unmet), "starts": list(acc.starts), "steps": list(acc.steps),
                     "mu0": acc.coeffs[acc.radius], "file": path.name})
    _dump(out / "accumulators.json", {"config_hash": h, "config": config.to_dict(),
                                      "schedule_id": spectrum.schedule_id(schedule), "accumulators": meta})
    for m in meta:
        print(f"k={m['k']} radius={m['radius']} trunc_err={m['trunc_err']:.6g} hypothesis={m['hypothesis']}")
    return EXIT_PASS


# ---------------------------------------------------------------- artifacts


def load_artifacts(config: RunConfig, out: Path):
    h = config.hash
    sched_doc = _load(out / "schedule.json")
    acc_doc = _load(out / "accumulators.json")
    for name, doc in (("schedule.json", sched_doc), ("accumulators.json", acc_doc)):
        if doc.get("config_hash") != h:
            raise ArtifactError(f"{name} has config hash {doc.get('config_hash')}, expected {h}")
    schedule = schedule_from_dict(sched_doc["schedule"])
    accs = []
    for m in acc_doc["accumulators"]:
        header, s, c, err = spectrum.read_coefficients_csv(out / m["file"])
        if header.get("config_hash") != h:
            raise ArtifactError(f"{m['file']} has config hash {header.get('config_hash')}, expected {h}")
        accs.append(spectrum.SpectralAccumulator(int(m["k"]), c, err, acc_doc["schedule_id"], tuple(m["unmet"]),
                                                 tuple(m["starts"]), steps=tuple(m["steps"])))
    return schedule, accs


# ---------------------------------------------------------------- suites


def _stage_params(pipe: Pipeline, schedule, k: int) -> dict[str, float]:
    psi = lambda q: float(pipe.profile.psi(float(q)))
    if isinstance(schedule, ScaleSchedule):
        b_prev, b = schedule.blocks[k - 2], schedule.blocks[k - 1]
        return {"N1": psi(b_prev.beta_M) ** -2, "N2": float(b.M), "N3": psi(b.beta_M) ** -2}
    prev, st = schedule.stages[k - 2], schedule.stages[k - 1]
    return {"N1": 1.0 / psi(prev.primes[-1]), "N2": float(st.M), "N3": 1.0 / psi(st.primes[-1]),
            "delta": 1.0 / st.n}


def suite_single_factor(pipe, schedule, accs, factors) -> list[VerificationReport]:
    cfg = pipe.config
    S = cfg.checks["single_factor_S"] or cfg.S // 2
    out = []
    for f in factors:
        if S < 4 * f.M:
            continue
        if f.variant == "slow":
            b = schedule.blocks[f.stage - 1]
            n3 = float(pipe.profile.psi(float(b.beta_M))) ** -2
            r = verify.check_single_factor(f, S, pipe.theta, pipe.profile.kappa, n3)
        else:
            r = verify.check_single_factor(f, S)
        r.params["stage"] = f.stage
        out.append(r)
    if not out:
        out.append(VerificationReport("single_factor", {"S": S}, status=INFO,
                                      details={"note": "no stage has S >= 4*M"}))
    return out


def suite_stability(pipe, schedule, accs, factors) -> list[VerificationReport]:
    cfg = pipe.config
    reports = []
    S = int(cfg.checks["stability_S"])
    cap = int(cfg.sweep["radius_cap"])
    slow = pipe.variant == "slow"
    base = spectrum.accumulator_from_factor(factors[0], S + cap, accs[0].schedule, schedule.hypotheses)
    # impulse fixture: near range covers the whole table, so H*G = H is checked everywhere
    impulse = verify.check_stability(base, spectrum.unit_impulse(), 1.0, 4.0 * (S + 1), 1.0,
                                     "lemma1" if slow else "lemma2", envelope=pipe.envelope if slow else None,
                                     delta=None if slow else 1.0, S=S, radius=0)
    impulse.check_id = "stability_impulse"
    reports.append(impulse)
    for k in range(2, schedule.k_max + 1):
        p = _stage_params(pipe, schedule, k)
        G = factors[k - 1]
        if k == 2:
            H = base
        else:
            H = spectrum.build_accumulators(schedule, factors, S + cap, cfg.eps, allow_capped=True,
                                            radius_cap=cap, k_max=k - 1)[-1]
        need, _ = spectrum.truncation_radius(H, G, S, cfg.eps, limit=cap)
        R = cap if need is None else need
        if slow:
            r = verify.check_stability(H, G, p["N1"], p["N2"], p["N3"], "lemma1", envelope=pipe.envelope,
                                       kappa=pipe.profile.kappa, S=S, radius=R, n3_floor=p["N3"])
        else:
            r = verify.check_stability(H, G, p["N1"], p["N2"], p["N3"], "lemma2", delta=p["delta"], S=S, radius=R)
        r.params["stage"] = k
        reports.append(r)
    return reports


def suite_mu(pipe, schedule, accs, factors) -> list[VerificationReport]:
    out = []
    for acc in accs:
        if pipe.variant == "slow":
            out.append(verify.check_mu_estimates(acc, pipe.envelope, "slow"))
        else:
            st = schedule.stages[acc.k - 1]
            out.append(verify.check_mu_estimates(acc, variant="fast", n_k=st.n, M_k=st.M))
    return out


def suite_cauchy(pipe, schedule, accs, factors) -> list[VerificationReport]:
    if len(accs) < 2:
        return [VerificationReport("cauchy", {"stages": [a.k for a in accs]}, status=INFO,
                                   details={"note": "single stage: no pairs to compare"})]
    return [verify.check_cauchy(accs)]


def suite_kahane(pipe, schedule, accs, factors) -> list[VerificationReport]:
    cfg = pipe.config
    f = factors[0]
    acc = accs[0]
    S = acc.radius
    n_loc = int(cfg.checks["kahane_n_loc"])
    xi = verify.kahane_sample(S, int(cfg.checks["kahane_samples"]))
    if pipe.variant == "slow":
        env = pipe.envelope
        mask = np.ones(S, dtype=bool)
    else:
        env = ConstantEnvelope(schedule.stages[0].n)
        xi = xi[xi >= f.M / 4.0]
        mask = np.arange(1, S + 1) >= f.M / 4.0
    s = np.arange(1, S + 1)
    with np.errstate(divide="ignore"):
        lr = np.log(np.abs(acc.coeffs[S + 1:])) - np.asarray(env.log_value(s.astype(float)))
    int_c = float(np.exp(np.max(lr[mask])))
    probe = np.array([0, 11, 22, 97, 1331])
    probe = probe[probe <= S]
    transform = lambda x: spectrum.g_hat_quadrature(f, x, n_loc)
    r = verify.kahane_extension(transform, xi, env, int_c, (probe, acc.at(probe)), unmet=acc.unmet)
    r.params["stage"] = 1
    return [r]


def suite_cover(pipe, schedule, accs, factors) -> list[VerificationReport]:
    cfg = pipe.config
    if not isinstance(schedule, ScaleSchedule):
        return [VerificationReport("cover_trend", {}, status=INFO,
                                   details={"note": "covers are built for block schedules only"})]
    if pipe.alpha is None:
        raise ConfigError("cover suite needs an 'alpha' section")
    try:
        trend = hausdorff.cover_sum_trend(schedule, pipe.alpha, pipe.profile)
    except hausdorff.AlphaMismatch as exc:
        raise ConfigError(f"cover precondition failed: {exc}") from exc
    gamma = float(cfg.checks["cover_gamma"])
    sums = [hausdorff.block_reciprocal_sum(int(M), gamma) for M in cfg.checks["cover_gamma_M"]]
    devs = [abs(x["deviation"]) for x in sums]
    shrinking = all(b < a for a, b in zip(devs, devs[1:]))
    recip = VerificationReport("block_reciprocal_sum", {"gamma": gamma, "M": cfg.checks["cover_gamma_M"]},
                               devs[-1], None, None, PASS if shrinking else FAIL,
                               details={"sums": sums, "deviation_shrinks": shrinking})
    covers = trend.details["covers"]
    counts = VerificationReport(
        "cover_counts", {"k_max": schedule.k_max},
        min(c["fraction_in_band"] for c in covers), None, None,
        PASS if all(c["ratio_min"] >= 0.5 and c["ratio_max"] <= 2 and c["max_count_defect"] <= 1 + 1e-9
                    and c["formula_matches_enumeration"] and c["support_contained"] for c in covers)
        else (UNMET if schedule.hypotheses else FAIL),
        "exploratory" if schedule.hypotheses else "strict", list(schedule.hypotheses),
        {"per_stage": [{k: c[k] for k in ("k", "ratio_min", "ratio_max", "fraction_in_band", "max_count_defect",
                                           "formula_matches_enumeration", "support_contained", "alpha_defect")}
                       for c in covers]})
    return [trend, counts, recip]


SUITE_FUNCS = {"single-factor": suite_single_factor, "stability": suite_stability, "mu": suite_mu,
               "cauchy": suite_cauchy, "kahane": suite_kahane, "cover": suite_cover}


def _report_key(r: VerificationReport) -> str:
    parts = [r.check_id]
    for name in ("stage", "k"):
        if name in r.params:
            parts.append(f"{name}{r.params[name]}")
    return "_".join(parts)


def cmd_verify(config: RunConfig, out: Path, suite: str = "all") -> int:
    if suite != "all" and suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    pipe = make_pipeline(config)
    schedule, accs = load_artifacts(config, out)
    factors = _factors(pipe, schedule)
    names = SUITES if suite == "all" else (suite,)
    store = BaselineStore(out / "baselines.json")
    rdir = out / "reports"
    rdir.mkdir(exist_ok=True)
    summary = []
    for name in names:
        for r in SUITE_FUNCS[name](pipe, schedule, accs, factors):
            key = _report_key(r)
            r.baseline, r.baseline_match = store.compare(config.hash, key, r.fitted_constant)
            if r.baseline_match is False and r.status == PASS:
                r.status = FAIL
                r.details["baseline_drift"] = True
            r.params["config_hash"] = config.hash
            _dump(rdir / f"{key}.json", {"config": config.to_dict(), "report": r.to_dict()})
            with open(rdir / f"{key}.txt", "w") as fh:
                fh.write(r.to_text() + "\n")
            summary.append({"key": key, "status": r.status, "hypothesis": r.hypothesis})
            print(f"{key:32s} {r.status}")
    store.save()
    overall = combine_status([s["status"] for s in summary])
    _dump(rdir / f"summary_{suite}.json", {"config_hash": config.hash, "suite": suite, "overall": overall,
                                           "reports": summary})
    return {FAIL: EXIT_FAIL, UNMET: EXIT_UNMET}.get(overall, EXIT_PASS)


# ---------------------------------------------------------------- plotdata


def thinned_frequencies(S: int, thin: int) -> np.ndarray:
    """0 plus either every s in 1..S or unique rounded log-spaced points (thin > 0)."""
    if thin <= 0:
        pos = np.arange(1, S + 1)
    else:
        pos = np.unique(np.rint(np.logspace(0.0, math.log10(S), thin)).astype(np.int64))
    return np.concatenate([[0], pos])


def cmd_plotdata(config: RunConfig, out: Path) -> int:
    pipe = make_pipeline(config)
    schedule, accs = load_artifacts(config, out)
    thin = int(config.sweep.get("thin", 0))
    for acc in accs:
        s = thinned_frequencies(acc.radius, thin)
        a = np.abs(acc.at(s))
        le = log_envelope_for(pipe, schedule, acc.k)
        lines = [f"# config_hash={config.hash}", f"# k={acc.k}", "s,abs,envelope,ratio"]
        env = np.exp(le(np.maximum(s, 1).astype(float)))
        with np.errstate(divide="ignore"):
            ratio = np.exp(np.log(a) - le(np.maximum(s, 1).astype(float)))
        for i, si in enumerate(s.tolist()):
            if si == 0:
                lines.append(f"0,{a[i]:.17g},,")
            else:
                lines.append(f"{si},{a[i]:.17g},{env[i]:.17g},{ratio[i]:.17g}")
        with open(out / f"plot_k{acc.k}.csv", "w") as fh:
            fh.write("\n".join(lines) + "\n")
    print(f"wrote plot data for k = {', '.join(str(a.k) for a in accs)}")
    return EXIT_PASS


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wellapprox", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("construct", "verify", "plotdata"))
    p.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
    p.add_argument("--out", required=True, type=Path, help="artifact directory")
    p.add_argument("--suite", default="all", help=f"verification suite: {', '.join(SUITES)} or all")
    p.add_argument("--smax", type=int, default=None, help="override sweep radius S")
    p.add_argument("--eps", type=float, default=None, help="override truncation budget eps")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_CONFIG
    try:
        config = RunConfig.load(args.config).with_overrides(args.smax, args.eps)
        if args.command == "construct":
            return cmd_construct(config, args.out)
        if args.command == "verify":
            return cmd_verify(config, args.out, args.suite)
        return cmd_plotdata(config, args.out)
    except (ConfigError, ArtifactError, SieveBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
