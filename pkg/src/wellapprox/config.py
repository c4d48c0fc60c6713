"""Run configuration, its canonical hash, the baseline store and the object
graph (profile, mollifier, schedule, factors) a configuration describes.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .approx import (ApproximationProfile, DecayEnvelope, DimensionFunction, DivergenceWeight, GrowthGauge,
                     make_alpha, make_chi, make_omega, make_profile)
from .mollifier import InghamMollifier, build_mollifier
from .scales import RajchmanSchedule, ScaleSchedule, build_schedule_fast, build_schedule_slow

SECTIONS = ("name", "psi", "chi", "omega", "alpha", "mollifier", "schedule", "sweep", "checks")

DEFAULT_SWEEP = {"S": 65536, "eps": 1e-12, "radius_cap": 131072, "thin": 0}
DEFAULT_CHECKS = {
    "single_factor_S": None,   # None: half the sweep radius, so the doubled range is the sweep
    "stability_S": 4096,
    "kahane_samples": 128,
    "kahane_n_loc": 2048,
    "cover_gamma_M": [100, 1000],
    "cover_gamma": 2.0,
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunConfig:
    name: str
    psi: dict[str, Any]
    chi: dict[str, Any] = field(default_factory=lambda: {"kind": "const"})
    omega: dict[str, Any] = field(default_factory=lambda: {"kind": "loglog"})
    alpha: dict[str, Any] | None = None
    mollifier: dict[str, Any] = field(default_factory=dict)
    schedule: dict[str, Any] = field(default_factory=dict)
    sweep: dict[str, Any] = field(default_factory=dict)
    checks: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if "psi" not in d or "schedule" not in d:
            raise ConfigError("config needs 'psi' and 'schedule' sections")
        sched = dict(d["schedule"])
        variant = sched.setdefault("variant", "slow")
        if variant not in ("slow", "fast"):
            raise ConfigError(f"schedule variant must be 'slow' or 'fast', got {variant!r}")
        sched.setdefault("mode", "strict")
        sched.setdefault("k_max", 1)
        if variant == "slow" and "M_1" not in sched:
            raise ConfigError("slow schedules need M_1")
        if variant == "fast" and ("q_start" not in sched or "n" not in sched):
            raise ConfigError("fast schedules need q_start and n")
        sweep = {**DEFAULT_SWEEP, **d.get("sweep", {})}
        checks = {**DEFAULT_CHECKS, **d.get("checks", {})}
        return cls(str(d.get("name", "run")), dict(d["psi"]), dict(d.get("chi", {"kind": "const"})),
                   dict(d.get("omega", {"kind": "loglog"})), dict(d["alpha"]) if d.get("alpha") else None,
                   dict(d.get("mollifier", {})), sched, sweep, checks)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "psi": self.psi, "chi": self.chi, "omega": self.omega, "alpha": self.alpha,
                "mollifier": self.mollifier, "schedule": self.schedule, "sweep": self.sweep,
                "checks": self.checks}

    @property
    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()[:16]

    def with_overrides(self, smax: int | None = None, eps: float | None = None) -> "RunConfig":
        sweep = dict(self.sweep)
        if smax is not None:
            if smax < 1:
                raise ConfigError("--smax must be positive")
            sweep["S"] = int(smax)
        if eps is not None:
            if not eps > 0:
                raise ConfigError("--eps must be positive")
            sweep["eps"] = float(eps)
        d = copy.deepcopy(self.to_dict())
        d["sweep"] = sweep
        return RunConfig.from_dict(d)

    @property
    def S(self) -> int:
        return int(self.sweep["S"])

    @property
    def eps(self) -> float:
        return float(self.sweep["eps"])


@dataclass(frozen=True, eq=False)
class Pipeline:
    """Objects a configuration describes; the schedule is built lazily because strict builds may refuse."""

    config: RunConfig
    profile: ApproximationProfile
    chi: DivergenceWeight
    omega: GrowthGauge
    alpha: DimensionFunction | None
    mollifier: InghamMollifier

    @property
    def variant(self) -> str:
        return self.config.schedule["variant"]

    @property
    def envelope(self) -> DecayEnvelope:
        return DecayEnvelope(self.profile, self.chi, self.omega)

    @property
    def theta(self) -> DecayEnvelope:
        return DecayEnvelope(self.profile, self.chi)

    def build_schedule(self) -> ScaleSchedule | RajchmanSchedule:
        s = self.config.schedule
        if self.variant == "slow":
            return build_schedule_slow(int(s["M_1"]), int(s["k_max"]), self.profile, self.chi, s["mode"],
                                       next_M=[int(m) for m in s.get("next_M", [])],
                                       policies=list(s.get("policies", [])))
        return build_schedule_fast(int(s["q_start"]), int(s["k_max"]), self.profile, s["mode"],
                                   n=[int(v) for v in s["n"]], multiplier=float(s.get("multiplier", 8.0)),
                                   stage_multiplier=s.get("stage_multiplier"))


def default_beta(profile: ApproximationProfile, variant: str) -> float:
    return 0.75 if variant == "fast" else (profile.sigma + 1.0) / (2.0 * profile.sigma)


def make_pipeline(config: RunConfig) -> Pipeline:
    try:
        profile = make_profile(config.psi)
        chi = make_chi(config.chi)
        omega = make_omega(config.omega)
        alpha = make_alpha(config.alpha) if config.alpha else None
        m = config.mollifier
        beta = float(m.get("beta", default_beta(profile, config.schedule["variant"])))
        moll = build_mollifier(beta, int(m.get("j_max", 64)), float(m.get("tol", 1e-12)), m.get("beta_prime"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid preset: {exc}") from exc
    return Pipeline(config, profile, chi, omega, alpha, moll)


# ---------------------------------------------------------------- baselines


class BaselineStore:
    """Flat JSON file: config hash -> {key: fitted constant}.  First sighting records the value."""

    REL_TOL = 1e-9

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.data: dict[str, dict[str, float]] = {}
        if self.path.exists():
            with open(self.path) as fh:
                self.data = json.load(fh)

    def compare(self, config_hash: str, key: str, value: float | None) -> tuple[float | None, bool | None]:
        if value is None or not math.isfinite(value):
            return None, None
        entry = self.data.setdefault(config_hash, {})
        if key not in entry:
            entry[key] = float(value)
            return float(value), True
        base = entry[key]
        scale = max(abs(base), abs(value), 1e-300)
        return base, abs(base - value) / scale <= self.REL_TOL

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, sort_keys=True, indent=2)
            fh.write("\n")
