import json
from pathlib import Path

import numpy as np
import pytest

from wellapprox.approx import make_chi, make_omega, make_profile, make_alpha, DecayEnvelope
from wellapprox.config import RunConfig, make_pipeline
from wellapprox.mollifier import build_mollifier
from wellapprox.scales import build_schedule_slow, build_schedule_fast
from wellapprox import spectrum

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def load_config(name: str) -> RunConfig:
    return RunConfig.load(CONFIGS / f"{name}.json")


@pytest.fixture(scope="session")
def cube():
    return make_profile({"kind": "power", "tau": 3.0})


@pytest.fixture(scope="session")
def one():
    return make_chi({"kind": "const"})


@pytest.fixture(scope="session")
def moll():
    return build_mollifier(2 / 3)


@pytest.fixture(scope="session")
def theta(cube, one):
    return DecayEnvelope(cube, one)


@pytest.fixture(scope="session")
def envelope(cube, one):
    return DecayEnvelope(cube, one, make_omega({"kind": "loglog"}))


@pytest.fixture(scope="session")
def alpha23():
    return make_alpha({"kind": "power", "nu": 2 / 3})


@pytest.fixture(scope="session")
def desk_schedule(cube, one):
    return build_schedule_slow(11, 1, cube, one, "strict")


@pytest.fixture(scope="session")
def desk_factor(desk_schedule, cube, one, moll):
    return spectrum.factor_from_block(desk_schedule.blocks[0], cube, one, moll)


@pytest.fixture(scope="session")
def explo_schedule(cube, one):
    return build_schedule_slow(11, 2, cube, one, "exploratory", next_M=[10007],
                               policies=[{"policy": "min_sum"}, {"policy": "power", "gamma": 1.1}])


@pytest.fixture(scope="session")
def explo_factors(explo_schedule, cube, one, moll):
    return spectrum.factors_for(explo_schedule, cube, one, moll)


@pytest.fixture(scope="session")
def explo_accs(explo_schedule, explo_factors):
    return spectrum.build_accumulators(explo_schedule, explo_factors, 4096, 1e-12, allow_capped=True,
                                       radius_cap=131072)


@pytest.fixture(scope="session")
def fast_pipeline():
    pipe = make_pipeline(load_config("fast_k2"))
    return pipe, pipe.build_schedule()


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
