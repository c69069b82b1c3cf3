"""Tests for the rank-2 trace-identity module: test-function weights, the
two oscillatory Bessel transforms and their independent evaluation routes,
both sides of the identity, and the smoothed diagonal weights."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfunlab import kuznetsov as kz
from lfunlab.afe import FixtureCoverageError, MaassFixture, WeightSpec, gl2_afe_weight, rankin_selberg_afe_weight
from lfunlab.heckegl3 import symmetric_square_form, triple_divisor_form
from lfunlab.special import RegimeError

# Values frozen from 30-40 digit mpmath evaluations of the defining
# integrals, computed with independent quadrature (mp.quad against
# mp.besselj / mp.besselk / mp.zeta), not with this module.
DELTA_ORACLE = {1.0: 0.2955094882098842, 10.0: 31.80450909279265, 20.0: 127.29744024707451}
OMEGA_ORACLE = {0.7: 17.488977643711356, 1.0: 26.092755784442463, 5.0: 6.4610197284118109, 20.0: 13.035704569807722}
HPLUS_ORACLE = {0.05: 0.36519443738710885, 0.5: -0.6625590166529372, 2.0: 0.33625293109301122, 3.4: -0.31791910716832024}
HMINUS_ORACLE = {0.05: 3.747226706243e-01, 0.5: 2.425583519183e-01, 2.0: 2.957167267459e-05}


def zero_test_function():
    return kz.SpectralTestFunction(
        evaluator=lambda t: np.asarray(t) * 0.0, decay_exponent=6.0, holomorphy_width=math.inf, label="zero"
    )


# ---------------------------------------------------------------------------
# test-function construction


def test_gaussian_test_function_basics():
    h = kz.gaussian_test_function(2.0)
    assert h(0.0) == pytest.approx(1.0)
    ts = np.array([0.3, 1.7, 4.2])
    assert np.allclose(h(ts), h(-ts), rtol=0, atol=0)
    assert complex(h(complex(0.0, -0.5))) == pytest.approx(math.exp(0.25 / 4.0))


def test_test_function_rejects_odd_evaluator():
    with pytest.raises(ValueError, match="not even"):
        kz.SpectralTestFunction(evaluator=lambda t: np.asarray(t) * np.exp(-np.asarray(t) ** 2))


def test_test_function_rejects_undeclared_slow_decay():
    with pytest.raises(ValueError, match="decay"):
        kz.SpectralTestFunction(evaluator=lambda t: 1.0 / (1.0 + np.asarray(t) ** 2), decay_exponent=4.0)


def test_test_function_rejects_bad_declarations():
    ev = lambda t: np.exp(-np.asarray(t) ** 2)
    with pytest.raises(ValueError, match="decay exponent"):
        kz.SpectralTestFunction(evaluator=ev, decay_exponent=2.0)
    with pytest.raises(ValueError, match="holomorphy"):
        kz.SpectralTestFunction(evaluator=ev, holomorphy_width=0.4)
    with pytest.raises(ValueError):
        kz.gaussian_test_function(0.0)


# ---------------------------------------------------------------------------
# diagonal and continuous weights


def test_delta_weight_zero_function():
    assert kz.delta_weight(zero_test_function()) == 0.0


def test_delta_weight_gaussian_oracle():
    v = kz.delta_weight(kz.gaussian_test_function(1.0))
    assert v == pytest.approx(DELTA_ORACLE[1.0], rel=1e-12)


def test_delta_weight_quadratic_width_scaling():
    v10 = kz.delta_weight(kz.gaussian_test_function(10.0))
    v20 = kz.delta_weight(kz.gaussian_test_function(20.0))
    assert v10 == pytest.approx(DELTA_ORACLE[10.0], rel=1e-10)
    assert v20 == pytest.approx(DELTA_ORACLE[20.0], rel=1e-10)
    # wide Gaussians weight ~ width^2 (tanh saturates): doubling -> factor 4 within 1%
    assert v20 / v10 == pytest.approx(4.0, rel=0.01)


def test_continuous_weight_oracle_values():
    for r, ref in OMEGA_ORACLE.items():
        assert kz.continuous_weight(r) == pytest.approx(ref, rel=1e-10)


def test_continuous_weight_vanishes_at_zero():
    assert kz.continuous_weight(0.0) == 0.0
    arr = kz.continuous_weight(np.array([0.0, 1.0]))
    assert arr[0] == 0.0
    assert arr[1] == pytest.approx(OMEGA_ORACLE[1.0], rel=1e-10)
    assert arr.shape == (2,)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.01, max_value=80.0, allow_nan=False))
def test_continuous_weight_even_and_positive(r):
    w = kz.continuous_weight(r)
    assert w > 0.0
    assert kz.continuous_weight(-r) == pytest.approx(w, rel=1e-9)


# ---------------------------------------------------------------------------
# Bessel transforms: route cross-validation


def test_bessel_transform_zero_function():
    h = zero_test_function()
    assert kz.bessel_transform(h, "+", 1.0) == 0j
    assert kz.bessel_transform(h, "-", 1.0) == 0j


def test_plus_transform_shifted_vs_series_vs_oracle():
    h = kz.gaussian_test_function(1.0)
    for x in (0.05, 0.5, 2.0):
        sh = kz.bessel_transform(h, "+", x, route="shifted")
        se = kz.bessel_transform(h, "+", x, route="series")
        assert abs(se - sh) < 2e-11
        assert sh.real == pytest.approx(HPLUS_ORACLE[x], rel=2e-9, abs=1e-11)
        assert abs(sh.imag) < 1e-11


def test_plus_transform_series_accurate_at_large_argument():
    # near the double-precision cap (2 pi x = 21.4) the shifted route loses
    # ~e^{2 pi x} eps absolutely; the mpmath series stays on the oracle
    h = kz.gaussian_test_function(1.0)
    se = kz.bessel_transform(h, "+", 3.4, route="series")
    assert se.real == pytest.approx(HPLUS_ORACLE[3.4], rel=1e-8)


def test_plus_transform_kernel_route_dual_agreement():
    h = kz.gaussian_test_function(1.0)
    for x in (0.5, 2.0, 5.0):
        ke = kz.bessel_transform(h, "+", x, route="kernel")
        se = kz.bessel_transform(h, "+", x, route="series")
        assert abs(ke - se) < 3e-9  # requirement is 1e-6; routes deliver ~1e-10
        assert abs(ke - se) < 1e-6


def test_minus_transform_routes_and_oracle():
    h = kz.gaussian_test_function(1.0)
    for x, ref in HMINUS_ORACLE.items():
        se = kz.bessel_transform(h, "-", x, route="series")
        assert se.real == pytest.approx(ref, rel=1e-9)
        assert abs(se.imag) < 1e-12
    for x in (0.05, 0.5):
        sh = kz.bessel_transform(h, "-", x, route="shifted")
        se = kz.bessel_transform(h, "-", x, route="series")
        di = kz.bessel_transform(h, "-", x, route="direct")
        assert abs(sh - se) < 1e-11
        assert abs(di - se) < 1e-11


def test_bessel_transform_validation():
    h = kz.gaussian_test_function(1.0)
    with pytest.raises(ValueError, match="sign"):
        kz.bessel_transform(h, "x", 1.0)
    with pytest.raises(ValueError, match="positive"):
        kz.bessel_transform(h, "+", 0.0)
    with pytest.raises(ValueError, match="kernel route"):
        kz.bessel_transform(h, "-", 1.0, route="kernel")
    with pytest.raises(ValueError, match="minus transform only"):
        kz.bessel_transform(h, "+", 1.0, route="direct")
    with pytest.raises(ValueError, match="unknown route"):
        kz.bessel_transform(h, "+", 1.0, route="nope")
    with pytest.raises(RegimeError, match="shifted route"):
        kz.bessel_transform(h, "+", 4.0, route="shifted")
    with pytest.raises(TypeError):
        kz.bessel_transform(lambda t: t, "+", 1.0)
    with pytest.raises(ValueError, match="shift"):
        kz.bessel_transform(h, "+", 1.0, route="shifted", shift=1.5)


def test_shifted_split_small_argument_envelope():
    # the line integral over Im t = -2 obeys the O(x^4) envelope; the residue
    # sum carries the true ~x leading behaviour and dominates as x -> 0
    h = kz.gaussian_test_function(1.0)
    pieces = {x: kz.bessel_transform_split(h, x) for x in (0.025, 0.05, 0.1)}
    for x, (line, res) in pieces.items():
        assert abs(res) > 10 * abs(line)
        total = line + res
        se = kz.bessel_transform(h, "+", x, route="series")
        assert abs(total - se) < 1e-11
    line_ratio = abs(pieces[0.1][0]) / abs(pieces[0.05][0])
    assert 16.0 / 1.6 < line_ratio < 16.0 * 1.6
    res_ratio = abs(pieces[0.1][1]) / abs(pieces[0.05][1])
    assert 2.0 / 1.4 < res_ratio < 2.0 * 1.4


# ---------------------------------------------------------------------------
# geometric side


def test_geometric_side_index_symmetry():
    h = kz.gaussian_test_function(2.0)
    for (n, l) in ((1, 2), (2, 3)):
        a = kz.geometric_side(n, l, h, 30)
        b = kz.geometric_side(l, n, h, 30)
        assert abs(a - b) < 1e-10


def test_geometric_side_truncation_within_tail_estimate():
    h = kz.gaussian_test_function(2.0)
    v100 = kz.geometric_side(1, 1, h, 100)
    v200 = kz.geometric_side(1, 1, h, 200)
    tail = kz.kuznetsov_residual(1, 1, h, [], 100, 5.0).truncation.geometric_tail
    assert tail > 0.0
    assert abs(v200 - v100) < tail


def test_geometric_side_thread_count_invariance():
    h = kz.gaussian_test_function(2.0)
    a = kz.geometric_side(1, 1, h, 60, threads=1)
    b = kz.geometric_side(1, 1, h, 60, threads=4)
    assert a == b  # bitwise: ordered summation, serialized mpmath


def test_geometric_side_validation():
    h = kz.gaussian_test_function(1.0)
    with pytest.raises(ValueError):
        kz.geometric_side(0, 1, h, 10)
    with pytest.raises(ValueError):
        kz.geometric_side(1, 1, h, 0)


# ---------------------------------------------------------------------------
# continuous side


def test_continuous_side_diagonal_real_positive():
    h = kz.gaussian_test_function(2.0)
    v = kz.continuous_side(1, 1, h, 40.0)
    assert v.imag == 0.0
    assert v.real > 0.0
    # frozen from this quadrature cross-checked against the closed geometric
    # side: residual of the full identity at c_max=200 is +2.5e-3
    assert v.real == pytest.approx(5.118653201616848, rel=1e-6)


def test_continuous_side_index_symmetry_and_offdiagonal():
    h = kz.gaussian_test_function(2.0)
    a = kz.continuous_side(1, 2, h, 40.0)
    b = kz.continuous_side(2, 1, h, 40.0)
    assert a == b  # eta profiles are real; the integrand is literally symmetric
    assert abs(a.imag) == 0.0


# ---------------------------------------------------------------------------
# full identity


def test_trace_identity_closes_without_fixtures():
    # at width 2 no discrete eigenvalue contributes visibly (the first even
    # cuspidal parameter is ~13.8, weighted e^{-47}), so geometric minus
    # continuous must vanish to truncation accuracy
    h = kz.gaussian_test_function(2.0)
    rep = kz.kuznetsov_residual(1, 1, h, [], 200, 40.0)
    assert rep.discrete_term == 0j
    assert rep.delta_term == pytest.approx(0.5 * kz.delta_weight(h), rel=1e-12)
    assert 0.0 < rep.residual.real < 0.02
    assert rep.residual.real >= -rep.truncation.geometric_tail
    assert rep.normalization_note == "no fixtures supplied"


def test_trace_identity_report_serializes():
    h = kz.gaussian_test_function(2.0)
    rep = kz.kuznetsov_residual(2, 1, h, [], 40, 20.0)
    blob = json.dumps(rep.to_dict(), sort_keys=True)
    back = json.loads(blob)
    assert back["truncation"]["c_max"] == 40
    assert back["truncation"]["r_max"] == 20.0
    assert back["truncation"]["spectral_count"] == 0
    assert back["kloosterman_term"]["re"] == rep.kloosterman_term.real
    assert set(back) == {
        "delta_term",
        "kloosterman_term",
        "continuous_term",
        "discrete_term",
        "residual",
        "truncation",
        "normalization_note",
    }


def test_trace_identity_fixture_bookkeeping():
    h = kz.gaussian_test_function(2.0)
    fx1 = MaassFixture(t=1.5, coeffs=[0.0, 1.0, 0.8], source="stub A")
    fx2 = MaassFixture(t=2.5, coeffs=[0.0, 1.0, -0.4], source="stub B")
    reps = [kz.kuznetsov_residual(1, 1, h, fxs, 40, 20.0) for fxs in ([], [fx1], [fx1, fx2])]
    # each fixture subtracts h(t_j) |a_j(1)|^2 > 0 from the residual
    assert reps[0].residual.real > reps[1].residual.real > reps[2].residual.real
    expected = complex(h(1.5)) * 1.0 + 0j
    assert reps[1].discrete_term == pytest.approx(expected)
    assert "stub A" in reps[2].normalization_note and "stub B" in reps[2].normalization_note
    assert reps[2].truncation.spectral_count == 2


def test_trace_identity_fixture_coverage_error():
    h = kz.gaussian_test_function(2.0)
    fx = MaassFixture(t=1.5, coeffs=[0.0, 1.0], source="short stub")
    with pytest.raises(FixtureCoverageError, match="short stub"):
        kz.kuznetsov_residual(1, 2, h, [fx], 20, 10.0)


# ---------------------------------------------------------------------------
# smoothed diagonal weights


def test_diagonal_weight_validation():
    d3 = triple_divisor_form()
    with pytest.raises(ValueError, match="variant"):
        kz.diagonal_weight(1.0, 1, 1, 1, d3, "sideways")
    with pytest.raises(ValueError, match="no argument x"):
        kz.diagonal_weight(1.0, 1, 1, 1, d3, "direct", x=1.0)
    with pytest.raises(ValueError, match="require a positive argument"):
        kz.diagonal_weight(1.0, 1, 1, 1, d3, "direct_plus")
    with pytest.raises(ValueError, match="width T"):
        kz.diagonal_weight(0.0, 1, 1, 1, d3, "direct")
    with pytest.raises(ValueError, match="positive integers"):
        kz.diagonal_weight(1.0, 0, 1, 1, d3, "direct")


def test_diagonal_weight_self_dual_form_variants_coincide():
    d3 = triple_divisor_form()
    a = kz.diagonal_weight(1.0, 1, 1, 1, d3, "direct")
    b = kz.diagonal_weight(1.0, 1, 1, 1, d3, "dual")
    assert abs(a - b) <= 1e-15 * (1.0 + abs(a))
    assert abs(a.imag) < 1e-16


def test_diagonal_weight_narrow_width_limit():
    d3 = triple_divisor_form()
    v = kz.diagonal_weight(1e-3, 1, 1, 1, d3, "direct")
    assert abs(v) < 1e-7  # mass ~ sqrt(pi) T^3 / 2 as the Gaussian collapses


def test_diagonal_weight_resolution_stability():
    d3 = triple_divisor_form()
    base = kz.diagonal_weight(20.0, 1, 1, 1, d3, "direct")
    fine = kz.diagonal_weight(20.0, 1, 1, 1, d3, "direct", resolution_factor=2.0)
    assert abs(fine - base) < 1e-8 * (1.0 + abs(base))


def test_diagonal_weight_uv_cache_counts():
    d3 = triple_divisor_form()
    kz.diagonal_weight(0.5, 1, 1, 1, d3, "direct")
    before = kz.uv_cache_stats()
    kz.diagonal_weight(0.5, 1, 1, 1, d3, "direct")
    after = kz.uv_cache_stats()
    assert after["misses"] == before["misses"]
    assert after["hits"] > before["hits"]


def _effective_test_function(form, spec, l_index, nm_index):
    def ev(t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array(
            [
                np.exp(-float(tt) ** 2)
                * gl2_afe_weight(spec, float(l_index), abs(float(tt)))
                * rankin_selberg_afe_weight(spec, float(nm_index), abs(float(tt)), form, variant="direct")
                for tt in ts
            ]
        )
        return out.reshape(np.shape(t)) if np.ndim(t) else complex(out[0])

    return kz.SpectralTestFunction(evaluator=ev, decay_exponent=5.0, holomorphy_width=0.51, label="afe-effective")


def test_diagonal_weight_plus_matches_transform_oracle():
    d3 = triple_divisor_form()
    spec = WeightSpec()
    v = kz.diagonal_weight(1.0, 2, 1, 1, d3, "direct_plus", x=0.5, weight_spec=spec)
    heff = _effective_test_function(d3, spec, 2, 1)
    ref = kz.bessel_transform(heff, "+", 0.5, route="series", rel_tol=1e-9)
    assert abs(v - ref) < 1e-9 * (1.0 + abs(ref))


def test_diagonal_weight_minus_matches_transform_oracle():
    d3 = triple_divisor_form()
    spec = WeightSpec()
    v = kz.diagonal_weight(1.0, 2, 1, 1, d3, "direct_minus", x=0.5, weight_spec=spec)
    heff = _effective_test_function(d3, spec, 2, 1)
    ref = kz.bessel_transform(heff, "-", 0.5, route="series", rel_tol=1e-9)
    assert abs(v - ref) < 1e-9 * (1.0 + abs(ref))


def test_diagonal_weight_symmetric_square_finite():
    sym = symmetric_square_form(prime_cap=500)
    with pytest.warns(UserWarning, match="strip"):
        v = kz.diagonal_weight(1.0, 1, 1, 1, sym, "direct")
    assert np.isfinite(v.real)
    assert v.real > 0.0
