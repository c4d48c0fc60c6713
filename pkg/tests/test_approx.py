import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wellapprox.approx import (DecayEnvelope, DomainError, SampleSpec, check_structural_conditions,
                               doubling_majorant, make_alpha, make_chi, make_omega, make_profile,
                               psi_from_alpha, theta_eval)


def test_theta_pure_power(cube, one):
    assert theta_eval(cube, one, 1000.0) == pytest.approx(0.1, rel=1e-12)
    assert theta_eval(cube, one, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_theta_loglog_weight(cube):
    # psi^-1(1e-6) = 100, so theta = 1 / (100 log log 116)
    chi = make_chi({"kind": "loglog"})
    expected = 1.0 / (100.0 * math.log(math.log(116.0)))
    assert theta_eval(cube, chi, 1e6) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.006414778984638229, rel=1e-14)


def test_theta_rejects_small_xi(cube, one):
    with pytest.raises(DomainError):
        theta_eval(cube, one, 0.5)


@given(st.floats(min_value=2.0, max_value=1e12), st.floats(min_value=2.1, max_value=8.0))
def test_theta_doubling_exact_for_powers(xi, tau):
    prof = make_profile({"kind": "power", "tau": tau})
    chi = make_chi()
    r = theta_eval(prof, chi, xi / 2) / theta_eval(prof, chi, xi)
    assert r == pytest.approx(2 ** (1 / tau), rel=1e-12)


def test_omega_capped_by_log():
    om = make_omega({"kind": "log"})
    t = np.array([1.0, 2.0, 10.0, 1e6])
    w = om(t)
    assert np.all(w <= np.log(np.maximum(t, 2.0)) + 1e-15)
    assert w[0] == w[1]


def test_psi_from_alpha_pure_powers():
    p = psi_from_alpha(make_alpha({"kind": "power", "nu": 2 / 3}))
    assert p.tau == pytest.approx(3.0)
    q = np.array([11.0, 857.0, 10007.0])
    np.testing.assert_allclose(p.psi(q), q ** -3.0, rtol=1e-12)
    p = psi_from_alpha(make_alpha({"kind": "power", "nu": 0.5}))
    np.testing.assert_allclose(p.psi(q), q ** -4.0, rtol=1e-12)


@settings(max_examples=30)
@given(st.floats(min_value=3.0, max_value=1e7))
def test_psi_from_alpha_log_corrected_resubstitution(q):
    alpha = make_alpha({"kind": "power_log", "nu": 2 / 3})
    p = psi_from_alpha(alpha)
    assert alpha(p.psi(q)) * q * q == pytest.approx(1.0, rel=1e-9)


def test_structural_pure_power_passes(cube, one):
    r = check_structural_conditions(cube, one)
    assert r.status == "pass"
    entries = {c["name"]: c for c in r.details["conditions"]}
    assert entries["chi_divergence_trend"]["asserted"] is False
    assert np.all(np.diff(entries["chi_divergence_trend"]["partial_sums"]) > 0)


def test_structural_boundary_tau_two_fails(one):
    r = check_structural_conditions(make_profile({"kind": "power", "tau": 2.0}), one)
    entries = {c["name"]: c for c in r.details["conditions"]}
    assert entries["tau_gt_2"]["passed"] is False
    assert r.status == "fail"


def test_structural_power_log_margins_match_pairwise_oracle(one):
    spec = SampleSpec(n=24)
    for sigma, verdict in ((3.0, False), (2.5, True)):
        prof = make_profile({"kind": "power_log", "tau": 3.0, "sigma": sigma})
        r = check_structural_conditions(prof, one, sample=spec)
        got = {c["name"]: c for c in r.details["conditions"]}["sigma_condition"]
        q = np.logspace(2, 8, 24)
        slopes = [(-math.log(q[j] ** -3 * math.log(q[j])) + math.log(q[i] ** -3 * math.log(q[i])))
                  / (math.log(q[j]) - math.log(q[i])) for i in range(24) for j in range(i + 1, 24)]
        assert got["margin"] == pytest.approx(min(slopes) - sigma, abs=1e-9)
        assert got["passed"] is verdict


def _majorant_oracle(m):
    a = np.abs(m)
    S = a.size // 2
    m1 = [max(a[S + t] if abs(t) >= s else 0.0 for t in range(-S, S + 1)) for s in range(S + 1)]
    return np.array([sum(m1[:x + 1]) / (x + 1) for x in range(S + 1)])


def test_majorant_constant_and_indicator():
    n = doubling_majorant(np.full(21, 0.3))
    assert np.all(n.values == pytest.approx(0.3, rel=1e-15))
    m = np.zeros(21)
    m[10] = 1.0
    n = doubling_majorant(m)
    xi = np.arange(11, dtype=float)
    np.testing.assert_allclose(n(xi), 1.0 / (xi + 1.0), rtol=1e-15)


def test_majorant_matches_double_loop(explo_accs):
    small = explo_accs[1].coeffs[4096 - 40:4096 + 41]
    np.testing.assert_allclose(doubling_majorant(small).values, _majorant_oracle(small), rtol=1e-13)


def test_majorant_rejects_empty():
    with pytest.raises(ValueError):
        doubling_majorant([])


@settings(max_examples=60)
@given(st.lists(st.floats(min_value=0.0, max_value=1e3, allow_nan=False), min_size=1, max_size=80))
def test_majorant_properties(vals):
    m = np.array(vals + vals[:-1][::-1]) if len(vals) > 1 else np.array(vals)
    n = doubling_majorant(m)
    S = n.radius
    s = np.arange(-S, S + 1)
    assert np.all(np.abs(m) <= n(np.abs(s).astype(float)))
    assert np.all(np.diff(n.values) <= 0)
    k = np.arange(2, S + 1)
    assert np.all(n(k / 2.0) <= 8.0 * n(k.astype(float)))
