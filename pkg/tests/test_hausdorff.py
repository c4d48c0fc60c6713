import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wellapprox import hausdorff as hd
from wellapprox.approx import make_alpha
from wellapprox.scales import build_schedule_slow


@pytest.fixture(scope="module")
def small_two(cube, one):
    # second block kept short so the k = 2 cover enumerates in about a second
    return build_schedule_slow(11, 2, cube, one, "exploratory", next_M=[3433],
                               policies=[{"policy": "min_sum"}, {"policy": "power", "gamma": 1.02}])


def _brute_cover_sum(schedule, k, alpha, profile):
    a, b, _ = hd.previous_system(schedule, k, profile)
    total = 0.0
    for q in schedule.stage_primes(k).tolist():
        r = q ** -3.0
        for lo, hi in zip(a.tolist(), b.tolist()):
            for p in range(math.ceil(q * (lo - r)), math.floor(q * (hi + r)) + 1):
                d = min(hi, p / q + r) - max(lo, p / q - r)
                if d >= 0:
                    total += float(alpha(d))
    return total


def test_alpha_identity(explo_schedule, alpha23, cube):
    for k in (1, 2):
        assert hd.alpha_identity_defect(alpha23, cube, explo_schedule.stage_primes(k)) <= 1e-9


def test_alpha_mismatch_raises(desk_schedule, cube):
    with pytest.raises(hd.AlphaMismatch):
        hd.build_cover(desk_schedule, 1, make_alpha({"kind": "power", "nu": 0.5}), cube)


def test_first_stage_counts(desk_schedule, alpha23, cube):
    c = hd.build_cover(desk_schedule, 1, alpha23, cube)
    for row in c.per_prime:
        assert row["count"] == row["q"]
    assert c.ratio_min == c.ratio_max == 1.0
    assert c.chain_constant == pytest.approx(1.0, rel=1e-12)
    assert c.support_contained and c.formula_matches_enumeration


@settings(max_examples=60)
@given(st.lists(st.tuples(st.floats(-0.05, 1.05), st.floats(0, 0.01)), min_size=1, max_size=40),
       st.sampled_from([11, 13, 101, 857, 10007]), st.booleans())
def test_count_formula_matches_enumeration(iv, q, circle):
    a = np.array([x for x, _ in iv])
    b = a + np.array([w for _, w in iv])
    r = q ** -3.0
    np.testing.assert_array_equal(hd.count_formula(a, b, q, r, circle), hd.count_enumerate(a, b, q, r, circle))


def test_small_two_stage_cover(small_two, alpha23, cube):
    c1 = hd.build_cover(small_two, 1, alpha23, cube)
    c2 = hd.build_cover(small_two, 2, alpha23, cube)
    assert c2.formula_matches_enumeration and c2.support_contained
    assert c2.cover_sum < c1.cover_sum
    assert c2.max_count_defect <= 1.0 + 1e-9
    assert c2.cover_sum == pytest.approx(_brute_cover_sum(small_two, 2, alpha23, cube), rel=1e-10)


def test_reciprocal_sums():
    assert hd.block_reciprocal_sum(100, 1.0)["sum"] == 0.0
    d100 = hd.block_reciprocal_sum(100, 2.0)
    d1000 = hd.block_reciprocal_sum(1000, 2.0)
    assert d100["deviation"] == pytest.approx(-0.01290443437525346, rel=1e-10)
    assert d1000["deviation"] == pytest.approx(-0.0038992081673679957, rel=1e-10)
    assert abs(d1000["deviation"]) < abs(d100["deviation"])


def test_trend_single_stage(desk_schedule, alpha23, cube):
    r = hd.cover_sum_trend(desk_schedule, alpha23, cube)
    assert r.status == "info" and "insufficient depth" in r.details["note"]
    assert r.details["target_exponent"] == -1.0


def test_trend_two_stage(small_two, alpha23, cube):
    r = hd.cover_sum_trend(small_two, alpha23, cube)
    assert r.details["strictly_decreasing"] and r.fitted_constant < 0
    assert r.status == "pass"
