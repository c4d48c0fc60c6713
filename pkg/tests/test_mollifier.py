import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wellapprox.mollifier import build_mollifier, check_mollifier_decay, indicator_mollifier


@pytest.fixture(scope="module")
def grid(moll):
    return moll.phi_grid(1 << 20)


def test_first_length_from_normalization(moll):
    bp = 5 / 6
    c0 = 0.5 / math.fsum(j ** (-1 / bp) for j in range(1, 65))
    assert moll.lengths[0] == pytest.approx(c0, rel=1e-15)
    assert moll.lengths[0] == pytest.approx(0.14625887375937838, rel=1e-14)
    assert moll.total_length == pytest.approx(0.5, abs=1e-15)


def test_phi_hat_at_zero(moll):
    assert moll.phi_hat(0.0) == 1 + 0j


def test_sinc_zero_kills_transform(moll):
    assert abs(moll.phi_hat(1.0 / moll.lengths[0])) < 1e-15


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_phi_hat_bounded(s):
    m = build_mollifier(2 / 3)
    v, err = m.phi_hat(s, with_error=True)
    assert abs(v) <= 1 + 1e-15
    assert 0 <= err < m.tol
    assert abs(v) <= m.envelope(s) * (1 + 1e-12)


def test_phi_hat_matches_grid_quadrature(moll, grid):
    x, v = grid
    quad = np.sum(v * np.exp(-2j * math.pi * 17.5 * x)) / v.size
    assert abs(quad - moll.phi_hat(17.5)) <= 1e-8


def test_grid_mass_and_support(grid):
    x, v = grid
    n = v.size
    assert v.sum() / n == pytest.approx(1.0, abs=1e-8)
    outside = (x < -0.5 - 2 / n) | (x > 2 / n)
    assert np.abs(v[outside]).max() <= 1e-8


def test_grid_argmax_baseline(grid):
    x, v = grid
    # symmetric bump on [-1/2, 0]; the maximum sits at the centre
    assert x[np.argmax(v)] == pytest.approx(-0.25, abs=2 ** -20)
    assert v.max() == pytest.approx(6.824994057516175, rel=1e-9)


def test_phi_eval_interpolates_grid(moll):
    x, v = moll.phi_grid(1 << 12)
    np.testing.assert_allclose(moll.phi_eval(x[::37]), v[::37], atol=1e-9)
    assert moll.phi_eval(0.3) == 0.0


def test_envelope_tail_integral_matches_quadrature(moll):
    # trapezoid in u = log t; beyond 1e7 the envelope is below 1e-300
    for X in (3.0, 50.0):
        u = np.linspace(math.log(X), math.log(1e7), 2_000_001)
        f = moll.envelope(np.exp(u)) * np.exp(u)
        num = float(np.sum((f[1:] + f[:-1]) * 0.5 * np.diff(u)))
        assert moll.envelope_tail_integral(X) == pytest.approx(num, rel=1e-8)


def test_decay_check_passes_with_baseline(moll):
    r = check_mollifier_decay(moll, 1e5)
    assert r.status == "pass"
    assert r.fitted_constant == pytest.approx(0.26064770419604877, rel=1e-9)


def test_decay_check_failures():
    assert check_mollifier_decay(indicator_mollifier(), 1e5).status == "fail"
    assert check_mollifier_decay(build_mollifier(0.75), 1e5, beta=0.95).status == "fail"


def test_parameter_errors():
    with pytest.raises(ValueError, match="j_max"):
        build_mollifier(2 / 3, j_max=1)
    with pytest.raises(ValueError):
        build_mollifier(1.0)
    with pytest.raises(ValueError):
        build_mollifier(0.5, beta_prime=0.4)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.3, max_value=0.9), st.floats(min_value=1.0, max_value=5e3))
def test_truncation_tag_honest(beta, s):
    short = build_mollifier(beta, tol=1e-10)
    full = build_mollifier(beta, tol=1e-300)
    v, err = short.phi_hat(s, with_error=True)
    ref = full.phi_hat(s)
    assert abs(v - ref) <= 1.01 * err * abs(v) + 1e-16
