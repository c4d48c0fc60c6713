import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wellapprox import spectrum as sp
from wellapprox.scales import select_block


@pytest.fixture(scope="module")
def small_block_factor(cube, one, moll):
    # M = 3 block: narrowest bump psi(29) spans ~170 cells at n = 2^22
    return sp.factor_from_block(select_block(3, one), cube, one, moll)


@pytest.fixture(scope="module")
def small_grid(small_block_factor):
    return sp.g_grid(small_block_factor, 1 << 22)


@pytest.fixture(scope="module")
def small_oracle(small_block_factor):
    return sp.mu_grid_oracle([small_block_factor], 1, 1 << 22)


# ---------------------------------------------------------------- factors


def test_g_hat_exact_values(desk_factor, moll):
    f = desk_factor
    assert f.g_hat(0) == 1.0
    assert np.all(f.g_hat(np.arange(1, 11)) == 0)
    assert f.g_hat(7 ** 5) == 0
    C = float(sum(1.0 / q for q in f.primes))
    expected = moll.phi_hat(22 / 1331) / 11 / C
    assert abs(f.g_hat(22) - expected) < 1e-15


def test_g_hat_rejects_real_frequencies(desk_factor):
    with pytest.raises(TypeError):
        desk_factor.g_hat(2.5)


@settings(max_examples=50)
@given(s=st.integers(min_value=-10 ** 7, max_value=10 ** 7))
def test_g_hat_divisor_formula(desk_factor, moll, s):
    f = desk_factor
    direct = sum(moll.phi_hat(float(q) ** -3 * s) / q for q in f.primes.tolist() if s % q == 0)
    ref = 1.0 if s == 0 else direct / f.norm
    assert abs(f.g_hat(s) - ref) < 1e-14
    assert abs(f.g_hat(-s) - np.conj(f.g_hat(s))) < 1e-15


def test_table_matches_pointwise(desk_factor):
    R = 3000
    np.testing.assert_allclose(desk_factor.table(R), desk_factor.g_hat(np.arange(-R, R + 1)), atol=1e-15)


def test_abs_tail_bound_dominates(explo_factors):
    f = explo_factors[1]
    R, wide = 20000, 131072
    tab = np.abs(f.table(wide))
    s = np.arange(-wide, wide + 1)
    actual = float(np.sum(tab[(np.abs(s) > R)]))
    assert actual <= f.abs_tail_bound(R)


# ---------------------------------------------------------------- oracles


def test_grid_mass_and_transform(small_block_factor, small_grid):
    x, g = small_grid
    assert g.mean() == pytest.approx(1.0, abs=1e-6)
    c = np.fft.fft(g) / g.size
    assert abs(c[22] - small_block_factor.g_hat(22)) <= 1e-6
    s = np.arange(0, 5001)
    assert np.max(np.abs(c[s] - small_block_factor.g_hat(s))) <= 1e-6


def test_grid_support_inside_union(small_block_factor, small_grid, cube, one):
    from wellapprox.scales import ScaleSchedule

    x, g = small_grid
    sched = ScaleSchedule("strict", (select_block(3, one),))
    lo, hi = sp.support_system(sched, 1, cube, "half").unions[0]
    n = g.size
    cell = 2.0 / n
    i = np.clip(np.searchsorted(lo, x, side="right") - 1, 0, lo.size - 1)
    inside = (x >= lo[i] - cell) & (x <= hi[i] + cell)
    inside |= x >= 1 - cell  # p = q pieces wrap to [1 - psi/2, 1]
    assert np.all(np.abs(g[~inside]) <= 1e-8)


def test_grid_refuses_unresolved_bumps(desk_factor):
    with pytest.raises(sp.ResolutionRefusal, match="cells"):
        sp.g_grid(desk_factor, 1 << 20)


def test_mu_grid_oracle_k1(small_block_factor, small_oracle):
    go = small_oracle
    s = np.arange(-300, 301)
    np.testing.assert_allclose(go.coeffs[go.radius + s], small_block_factor.g_hat(s), atol=1e-9)


def test_quadrature_oracle_matches_formula(desk_factor):
    s = np.arange(0, 600)
    q = sp.g_hat_quadrature(desk_factor, s)
    assert np.max(np.abs(q - desk_factor.g_hat(s))) <= 1e-10


def test_quadrature_agrees_with_grid_off_integers(small_block_factor, small_oracle):
    go = small_oracle
    xi = np.array([0.5, 22.5, 301.25])
    np.testing.assert_allclose(sp.g_hat_quadrature(small_block_factor, xi), go.transform(xi), atol=1e-8)


# ---------------------------------------------------------------- convolution


def test_impulse_identity(desk_factor):
    acc = sp.accumulator_from_factor(desk_factor, 600)
    out = sp.convolve_stage(acc, sp.unit_impulse(), 300, 1e-12)
    assert np.array_equal(out.coeffs, acc.coeffs[300:901])
    h = sp.impulse_accumulator(400)
    out = sp.convolve_stage(h, desk_factor, 100, 1e-12, radius=300)
    np.testing.assert_array_equal(out.coeffs, desk_factor.table(100))


def test_two_stage_mass_and_dense_reference(explo_accs, explo_factors):
    acc2 = explo_accs[1]
    f1, f2 = explo_factors
    R = acc2.steps[0]["radius"]
    t = np.arange(-R, R + 1)
    g2 = f2.table(R)
    zero = 1 + np.sum(f1.g_hat(-t[t != 0]) * g2[t != 0])
    assert abs(acc2.at(0) - zero) < 1e-12
    assert abs(acc2.at(0)) <= 2
    H = f1.table(60 + R)
    dense = sp.dense_convolution(H, g2, 60)
    assert abs(acc2.at(50) - dense[60 + 50]) < 1e-12


def test_accumulator_hermitian(explo_accs):
    for acc in explo_accs:
        assert acc.hermitian_defect() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=1, max_value=30))
def test_sparse_equals_dense(seed, npts):
    rng = np.random.default_rng(seed)
    S, R = 40, 60
    H = rng.normal(size=2 * (S + R) + 1) + 1j * rng.normal(size=2 * (S + R) + 1)
    pts = rng.choice(np.arange(-R, R + 1), size=npts, replace=False)
    vals = rng.normal(size=npts) + 1j * rng.normal(size=npts)
    G = sp.SparseSpectrum(pts, vals)
    dense = np.zeros(2 * R + 1, dtype=complex)
    dense[G.points + R] = G.coeffs
    fast = sp.sparse_convolution(H, G.points, G.coeffs, S)
    np.testing.assert_allclose(fast, sp.dense_convolution(H, dense, S), atol=1e-12)


def test_truncation_error_is_honest(explo_factors):
    f1, f2 = explo_factors
    S = 200
    acc = sp.accumulator_from_factor(f1, S + 131072)
    short = sp.convolve_stage(acc, f2, S, 0.0, radius=30000)
    long = sp.convolve_stage(acc, f2, S, 0.0, radius=131072)
    gap = np.max(np.abs(short.coeffs - long.coeffs))
    assert gap <= short.steps[-1]["neglected"]
    assert gap <= short.trunc_err


def test_strict_radius_shortfall(explo_schedule, explo_factors):
    with pytest.raises(sp.RadiusShortfall) as exc:
        sp.build_accumulators(explo_schedule, explo_factors, 1024, 1e-12, radius_cap=1 << 17)
    assert exc.value.required > 1 << 17


def test_capped_run_records_note(explo_accs):
    acc2 = explo_accs[1]
    assert any("capped" in n for n in acc2.unmet)
    assert acc2.trunc_err > 1.0


def test_build_accumulators_matches_dense(explo_schedule, explo_factors):
    S = 300
    accs = sp.build_accumulators(explo_schedule, explo_factors, S, 1e-12, allow_capped=True, radius_cap=131072)
    R = accs[1].steps[0]["radius"]
    H = explo_factors[0].table(S + R)
    dense = sp.dense_convolution(H, explo_factors[1].table(R), S)
    assert np.max(np.abs(accs[1].coeffs - dense)) <= 1e-10
    np.testing.assert_array_equal(accs[0].coeffs, explo_factors[0].table(S))


# ---------------------------------------------------------------- intervals


def _brute_union(lo, hi, x):
    return np.array([np.any((lo <= v) & (v <= hi)) for v in x])


interval_lists = st.lists(st.tuples(st.floats(0, 1), st.floats(0, 0.2)), min_size=1, max_size=25)


@settings(max_examples=80)
@given(interval_lists, interval_lists)
def test_interval_algebra(a, b):
    alo = np.array([x for x, _ in a])
    ahi = alo + np.array([w for _, w in a])
    blo = np.array([x for x, _ in b])
    bhi = blo + np.array([w for _, w in b])
    A = sp.merge_intervals(alo, ahi)
    B = sp.merge_intervals(blo, bhi)
    assert np.all(A[0][1:] > A[1][:-1])
    x = np.linspace(-0.1, 1.3, 701)
    assert np.array_equal(_brute_union(*A, x), _brute_union(alo, ahi, x))
    fast = sp.intersect_intervals(A, B)
    slow = sp.intersect_sweep(A, B)
    np.testing.assert_array_equal(fast[0], slow[0])
    np.testing.assert_array_equal(fast[1], slow[1])
    assert np.array_equal(_brute_union(*fast, x), _brute_union(*A, x) & _brute_union(*B, x))
    assert sp.contains(A, fast)
    assert sp.contains(sp.merge_intervals(np.concatenate([alo, blo]), np.concatenate([ahi, bhi])), A)


def test_stage_one_union_contains_elevenths(desk_schedule, cube):
    system = sp.support_system(desk_schedule, 1, cube)
    r = 1 / 2662
    lo = np.arange(1, 12) / 11 - r
    hi = np.minimum(np.arange(1, 12) / 11 + r, 1.0)
    assert sp.contains(system.unions[0], (lo, hi), slack=1e-15)


def test_stage_one_length(desk_schedule, cube):
    system = sp.support_system(desk_schedule, 1, cube)
    q = desk_schedule.blocks[0].primes.astype(float)
    # pieces overlap-free, counted with multiplicity: sum_q q psi(q)
    assert system.piece_lengths[0] == pytest.approx(math.fsum((q * q ** -3).tolist()), rel=1e-12)


def test_running_intersection_nested(explo_schedule, cube):
    system = sp.support_system(explo_schedule, 2, cube)
    assert sp.contains(system.unions[0], system.intersections[1], slack=1e-15)
    assert system.length(system.intersections[1]) < system.length(system.intersections[0])


def test_membership(desk_schedule, cube):
    system = sp.support_system(desk_schedule, 1, cube)
    assert sp.membership(3 / 11, system) == [True]
    primes = desk_schedule.blocks[0].primes
    for x in (0.5, math.sqrt(2) - 1):
        oracle = any(min(abs(x - p / q) for p in range(q + 1)) <= q ** -3.0 / 2 for q in primes.tolist())
        assert sp.membership(x, system) == [oracle]


# ---------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path, explo_accs, envelope):
    acc = explo_accs[1].restrict(64)
    path = tmp_path / "c.csv"
    sp.write_coefficients_csv(path, acc, envelope.log_value, {"config_hash": "abc", "k": 2})
    header, s, c, err = sp.read_coefficients_csv(path)
    assert header == {"config_hash": "abc", "k": "2"}
    np.testing.assert_array_equal(s, np.arange(-64, 65))
    np.testing.assert_array_equal(c, acc.coeffs)
    assert err == acc.trunc_err
    row0 = path.read_text().splitlines()[3 + 64].split(",")
    assert row0[0] == "0" and row0[4] == "" and row0[5] == ""
