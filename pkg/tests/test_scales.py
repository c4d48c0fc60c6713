from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from wellapprox.approx import make_chi, make_profile
from wellapprox.scales import (SieveBudgetError, StrictRefusal, block_power, build_schedule_fast,
                               build_schedule_slow, next_prime, schedule_from_dict, select_block, sieve)


def test_sieve_small_ranges():
    assert sieve(11, 31).tolist() == [11, 13, 17, 19, 23, 29, 31]
    assert sieve(14, 16).tolist() == []
    assert sieve(0, 10).tolist() == [2, 3, 5, 7]


def _trial_division(n):
    return n > 1 and all(n % d for d in range(2, int(n ** 0.5) + 1))


def test_sieve_near_million_matches_trial_division():
    got = sieve(10 ** 6, 10 ** 6 + 100).tolist()
    assert got == [n for n in range(10 ** 6, 10 ** 6 + 101) if _trial_division(n)]
    assert got == [1000003, 1000033, 1000037, 1000039, 1000081, 1000099]


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9), st.integers(min_value=0, max_value=5000))
def test_sieve_matches_sympy(lo, width):
    assert sieve(lo, lo + width).tolist() == list(sympy.primerange(max(lo, 2), lo + width + 1))


def test_sieve_budget():
    with pytest.raises(SieveBudgetError):
        sieve(2, 2 ** 41)
    with pytest.raises(SieveBudgetError):
        sieve(10, 10 + 2 ** 29, max_span=2 ** 28)


def test_next_prime():
    assert next_prime(10648) == 10651 == sympy.nextprime(10647)
    assert next_prime(10007) == 10007


def test_block_from_eleven(one):
    b = select_block(11, one)
    total, qs = 0.0, []
    for q in sympy.primerange(11, 10 ** 4):
        total += 1 / q
        qs.append(q)
        if total >= 1:
            break
    assert b.beta_M == qs[-1] == 857
    assert b.primes.tolist() == qs
    assert b.C == pytest.approx(total, rel=1e-13)
    assert 1 <= b.C <= 2


def test_block_from_three(one):
    # 1/3 + ... + 1/23 = 0.9989 < 1, so the crossing happens at 29
    b = select_block(3, one)
    partial = sum(Fraction(1, q) for q in (3, 5, 7, 11, 13, 17, 19, 23))
    assert partial < 1 <= partial + Fraction(1, 29)
    assert b.primes.tolist() == [3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_heavier_weight_needs_longer_block(one):
    assert select_block(11, make_chi({"kind": "loglog"})).beta_M > select_block(11, one).beta_M


def test_convergent_weight_exhausts_budget():
    # sum 1/(q log q) from 11 converges below 1
    with pytest.raises(SieveBudgetError, match="partial sum"):
        select_block(11, make_chi({"kind": "log"}), budget=1 << 22)


def test_block_power_flags_normalizer(one):
    b = block_power(10007, 1.1, one)
    assert b.primes[0] == 10007 and b.primes[-1] <= int(10007 ** 1.1)
    assert not b.normalized
    assert b.C == pytest.approx(sum(1 / q for q in sympy.primerange(10007, int(10007 ** 1.1) + 1)), rel=1e-12)


def test_single_block_schedule(cube, one):
    s = build_schedule_slow(11, 1, cube, one)
    assert s.k_max == 1 and s.blocks[0].beta_M == 857 and s.hypotheses == ()


def test_strict_refusal_names_bound(cube, one):
    with pytest.raises(StrictRefusal) as exc:
        build_schedule_slow(11, 2, cube, one, "strict")
    assert exc.value.bound == 857 ** 6 == 396173052347920849
    assert "396173052347920849" in str(exc.value)


def test_exploratory_two_blocks(explo_schedule):
    s = explo_schedule
    assert s.starts == [11, 10007]
    assert s.blocks[1].policy == "power"
    assert any("10007" in h for h in s.hypotheses)
    assert schedule_from_dict(s.to_dict()).to_dict() == s.to_dict()


def test_exploratory_gap_floor(cube, one):
    with pytest.raises(ValueError, match="4\\*beta"):
        build_schedule_slow(11, 2, cube, one, "exploratory", next_M=[3000])


def test_fast_ladder(cube):
    s = build_schedule_fast(11, 1, cube, "exploratory", n=[2])
    assert s.stages[0].primes.tolist() == [11, sympy.nextprime(8 * 11 ** 3 - 1)]
    assert build_schedule_fast(11, 1, cube, "exploratory", n=[1]).stages[0].primes.tolist() == [11]


def test_fast_strict_refuses(cube):
    with pytest.raises(StrictRefusal) as exc:
        build_schedule_fast(11, 2, cube, "strict", n=[2])
    assert exc.value.bound == 100 * 10651 ** 6


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.05, max_value=4.0), st.integers(min_value=1, max_value=4))
def test_fast_rung_condition(tau, n):
    prof = make_profile({"kind": "power", "tau": tau})
    try:
        s = build_schedule_fast(11, 1, prof, "exploratory", n=[n])
    except (SieveBudgetError, StrictRefusal):
        return
    p = s.stages[0].primes.astype(float)
    assert all(sympy.isprime(int(q)) for q in p)
    for a, b in zip(p, p[1:]):
        assert max(1 / b, b ** -tau) < a ** -tau / 2
