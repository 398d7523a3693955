import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from blowup_lab.errors import ChartError, DomainError, RegionError
from blowup_lab.metrics import (
    custom_from_expressions,
    inverse_tortoise,
    minkowski,
    schwarzschild,
    schwarzschild_as_generic,
    tortoise,
)
from blowup_lab.nullframe import (
    NullCoefficientField,
    adaptive_simpson,
    build_null_chart,
    char_speeds,
    coefficient_decay_audit,
    coefficient_table,
    coefficients_from_partials,
    dominance_threshold,
    evolve_null_frame,
    factor_audit,
    integrating_factors,
    reduced_coefficients,
    reduced_rhs,
)


@pytest.fixture(scope="module")
def schwarzschild_chart():
    return build_null_chart(schwarzschild(1.0), 2.0, (6.0, 16.0), 0.05)


def _exact_labels(t, r):
    rs = tortoise(1.0, r)
    return -inverse_tortoise(1.0, rs - t), inverse_tortoise(1.0, rs + t)


# -- speeds --------------------------------------------------------------------------------

def test_flat_speeds():
    assert char_speeds(minkowski(), 0.0, 5.0) == (-1.0, 1.0)


def test_schwarzschild_speeds():
    lm, lp = char_speeds(schwarzschild(1.0), 0.0, 4.0)
    assert lm == pytest.approx(-0.5, rel=1e-14)
    assert lp == pytest.approx(0.5, rel=1e-14)


def test_speeds_far_field():
    lm, lp = char_speeds(schwarzschild(1.0), 0.0, 1e6)
    assert abs(lp - 1) < 3e-6 and abs(lm + 1) < 3e-6


@given(t=st.floats(-5, 5), r=st.floats(2.5, 1e4))
def test_speeds_ordered(t, r):
    for m in (schwarzschild(1.0), schwarzschild_as_generic(1.0)):
        lm, lp = char_speeds(m, t, r)
        assert lm < lp


def test_degenerate_metric():
    m = custom_from_expressions({"g_tt": "-1e15", "g_rr": "1"})
    with pytest.raises(DomainError, match="degenerate"):
        char_speeds(m, 0.0, 20.0)


# -- charts -------------------------------------------------------------------------------

def test_flat_chart_exact():
    ch = build_null_chart(minkowski(), 3.0, (10.0, 20.0), 0.1)
    T, R = np.meshgrid(ch.t, ch.r, indexing="ij")
    v = ch.valid
    assert v.any()
    assert np.max(np.abs(ch.eta - (T - R))[v]) < 1e-12
    assert np.max(np.abs(ch.xi - (T + R))[v]) < 1e-12
    m = ch._interior()
    assert np.max(np.abs(ch.eta_t[m] - 1)) < 1e-10 and np.max(np.abs(ch.xi_r[m] - 1)) < 1e-10


def test_initial_slice_labels(schwarzschild_chart):
    ch = schwarzschild_chart
    assert np.array_equal(ch.eta[0], -ch.r)
    assert np.array_equal(ch.xi[0], ch.r)


def test_chart_signs_and_speeds(schwarzschild_chart):
    ch = schwarzschild_chart
    m = ch._interior()
    assert np.all(ch.xi_r[m] > 0) and np.all(ch.eta_r[m] < 0)
    assert np.all(ch.eta_t[m] > 0) and np.all(ch.xi_t[m] > 0)
    assert np.all(ch.lam_plus > ch.lam_minus)
    jac = ch.jacobian()[m]
    assert np.all(jac > 0) or np.all(jac < 0)


def test_schwarzschild_chart_matches_closed_form():
    errs = []
    for h in (0.1, 0.05):
        ch = build_null_chart(schwarzschild(1.0), 2.0, (6.0, 16.0), h)
        T, R = np.meshgrid(ch.t, ch.r, indexing="ij")
        eta, xi = _exact_labels(T[ch.valid], R[ch.valid])
        errs.append(max(np.max(np.abs(ch.eta[ch.valid] - eta)), np.max(np.abs(ch.xi[ch.valid] - xi))))
    assert errs[1] < 1e-9
    assert errs[0] / errs[1] > 8.0


def test_transport_residual_small():
    ch = build_null_chart(schwarzschild(1.0), 0.1, (20.0, 200.0), 0.01)
    re, rx = ch.transport_residuals()
    assert re < 1e-6 and rx < 1e-6


def test_transport_residual_second_order():
    res = []
    for h in (0.2, 0.1, 0.05):
        ch = build_null_chart(schwarzschild(1.0), 1.6, (3.0, 13.0), h)
        res.append(max(ch.transport_residuals(t_box=(0.4, 1.2), r_box=(5.0, 9.0))))
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 1.9, orders


def test_labels_constant_along_curves(schwarzschild_chart):
    ch = schwarzschild_chart
    metric = ch.metric
    r0 = 12.0
    sol = solve_ivp(lambda t, r: [-char_speeds(metric, t, r[0])[1]], (0.0, 1.5), [r0],
                    rtol=1e-12, atol=1e-12)
    t1, r1 = sol.t[-1], sol.y[0, -1]
    assert float(ch.interp("xi", t1, r1)) == pytest.approx(r0, abs=1e-6)


def test_escaping_curves_are_masked():
    ch = build_null_chart(schwarzschild(1.0), 3.0, (10.0, 14.0), 0.1)
    assert not ch.valid[-1, 0] and not ch.valid[-1, -1]
    assert ch.valid[0].all()
    with pytest.raises(ChartError):
        build_null_chart(schwarzschild(1.0), 5.0, (10.0, 10.1), 0.1)


def test_chart_inversion(schwarzschild_chart):
    ch = schwarzschild_chart
    t, r = ch.to_tr(float(ch.interp("xi", 1.0, 11.0)), float(ch.interp("eta", 1.0, 11.0)))
    assert (t, r) == (pytest.approx(1.0, abs=1e-9), pytest.approx(11.0, abs=1e-9))
    with pytest.raises(ChartError):
        ch.to_tr(100.0, -10.0)


# -- coefficients -------------------------------------------------------------------------

def test_flat_n3_coefficients_vanish():
    ch = build_null_chart(minkowski(), 1.0, (10.0, 20.0), 0.1)
    c = reduced_coefficients(minkowski(), ch, 3, 0.5, 15.0)
    for name in ("C1", "C2", "C3", "kappa1", "kappa2", "kappa3"):
        assert abs(float(getattr(c, name))) < 1e-12, name
    assert float(c.prefactor) == pytest.approx(0.25, rel=1e-12)


@pytest.mark.parametrize("r", [3.0, 10.0, 100.0])
def test_flat_n2_potential(r):
    # W = r^(1/2) u turns the n = 2 flat wave operator into 4 W_xi_eta - W/(4 r^2),
    # so W_xi_eta - W/(16 r^2) = (1/4) r^(1/2) F
    c = coefficients_from_partials(minkowski(), 2, 0.0, r, -1.0, 1.0)
    assert float(c.C3) == pytest.approx(-1 / (16 * r * r), rel=1e-12)
    assert float(c.kappa3) == pytest.approx(1 / (4 * r * r), rel=1e-12)
    assert float(c.prefactor) == pytest.approx(0.25)


def test_coefficients_need_chart_coverage(schwarzschild_chart):
    with pytest.raises(ChartError):
        reduced_coefficients(schwarzschild(1.0), schwarzschild_chart, 3, 0.5, 100.0)


def test_schwarzschild_coefficient_decay():
    fits = coefficient_decay_audit(schwarzschild_as_generic(1.0), n=3)
    assert fits["C1"].passed and fits["C2"].passed
    assert fits["C3"].slope == pytest.approx(-3.0, abs=0.05)
    assert fits["C3"].passed


def test_slow_metric_decay_fit():
    m = custom_from_expressions({"g_tt": "-(1 + r^(-1/2))", "g_rr": "1/(1 + r^(-1/2))"})
    fits = coefficient_decay_audit(m, n=3, delta0=0.5)
    assert fits["C3"].passed
    assert fits["C3"].slope <= -2.0 + 0.15


def test_coefficient_table_columns(schwarzschild_chart):
    tab = coefficient_table(schwarzschild_chart, 3)
    sizes = {k: np.size(v) for k, v in tab.items()}
    assert set(tab) == {"t", "r", "xi", "eta", "C1", "C2", "C3", "prefactor"}
    assert len(set(sizes.values())) == 1


# -- integrating factors ------------------------------------------------------------------

def test_adaptive_simpson_polynomial():
    val, err = adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 2.0)
    assert val == pytest.approx(0.0, abs=1e-12)
    val, _ = adaptive_simpson(math.exp, 0.0, 1.0)
    assert val == pytest.approx(math.e - 1, abs=1e-10)


def test_zero_coefficients_give_unit_factors():
    zero = lambda x, e: 0.0  # noqa: E731
    f = integrating_factors(zero, zero, 40.0, -30.0, 0.2, 2.0)
    assert f.K == 1.0 and f.K1 == 1.0


@pytest.mark.parametrize("c", [0.01, -0.02, 0.1])
def test_constant_c2_exponential(c):
    eps, N, eta = 0.2, 2.0, -40.0
    f = integrating_factors(lambda x, e: 0.0, lambda x, e: c, 45.0, eta, eps, N)
    assert f.K == pytest.approx(math.exp(-c * (-(eps**-N) - eta)), rel=1e-10)


def test_region_error():
    zero = lambda x, e: 0.0  # noqa: E731
    with pytest.raises(RegionError):
        integrating_factors(zero, zero, 10.0, -30.0, 0.2, 2.0)
    with pytest.raises(RegionError):
        integrating_factors(zero, zero, 40.0, -20.0, 0.2, 2.0)


def test_schwarzschild_factor_audit():
    ch = build_null_chart(schwarzschild(1.0), 10.0, (20.0, 70.0), 0.1)
    field = NullCoefficientField(ch, 3)
    audit = factor_audit(field.C1, field.C2, np.linspace(30, 40, 3), np.linspace(-35, -25, 3), 0.2, 2.0)
    assert audit.points > 0
    assert audit.passed
    assert audit.max_dev_K < 0.2
    assert 5 / 6 < audit.ratio_min <= audit.ratio_max < 6 / 5


# -- reduced right-hand side ----------------------------------------------------------------

def _flat(n, r):
    return coefficients_from_partials(minkowski(), n, 0.0, r, -1.0, 1.0)


def test_reduced_rhs_zero():
    assert reduced_rhs(_flat(3, 10.0), 1.0, 1.0, 3, 2.0, "positive", 10.0, 0.0).total == 0.0


@given(r=st.floats(1.0, 1e3), U=st.floats(1e-3, 1e3), p=st.floats(1.1, 2.4))
def test_reduced_rhs_flat_hand_formula(r, U, p):
    got = reduced_rhs(_flat(3, r), 1.0, 1.0, 3, p, "positive", r, U)
    assert got.total == pytest.approx(0.25 * r ** (1 - p) * U**p, rel=1e-12)
    assert got.linear == 0.0


@pytest.mark.parametrize("theta0", [0.3, 0.6, 0.9])
def test_dominance_at_bootstrap_floor(theta0):
    n, p, c3 = 2, 2.0, 1 / 16
    thr = dominance_threshold(n, p, theta0, c3)
    for eps0, expect in ((0.9 * thr, True), (min(1.1 * thr, 0.999), False)):
        xi = 500.0
        U = eps0 ** (-theta0 / 3) * xi ** ((n - 1) / 2 - 2 / (p - 1))
        out = reduced_rhs(_flat(n, xi), 1.0, 1.0, n, p, "positive", xi, U)
        assert (out.nonlinear >= 5 * abs(out.linear)) is expect


def test_dominance_threshold_trivial_when_potential_small():
    assert dominance_threshold(3, 2.0, 0.5, 0.0) == 1.0
    assert dominance_threshold(3, 2.0, 0.5, 0.01) == 1.0


# -- null-lattice evolution ----------------------------------------------------------------

def _null_lattice_error(h, xi0=1.0, span=2.0):
    U = lambda x, e: np.sin(x) * np.cos(e) + 0.3 * x * e  # noqa: E731
    Ux = lambda x, e: np.cos(x) * np.cos(e) + 0.3 * e  # noqa: E731
    a = lambda x, e: 1 + 0.1 * np.sin(x + 2 * e)  # noqa: E731
    a_e = lambda x, e: 0.2 * np.cos(x + 2 * e)  # noqa: E731
    S = lambda x, e, u: a_e(x, e) * Ux(x, e) + a(x, e) * (-np.cos(x) * np.sin(e) + 0.3)  # noqa: E731
    steps = int(round(span / h))
    fld = evolve_null_frame(lambda x: U(x, -x), lambda x: Ux(x, -x), S, a, h, xi0, steps)
    i, j = np.nonzero(fld.valid)
    return np.max(np.abs(fld.U[i, j] - U(fld.xi(j), fld.eta(i))))


def test_null_lattice_second_order():
    errs = [_null_lattice_error(h) for h in (0.1, 0.05, 0.025)]
    ratios = [x / y for x, y in zip(errs, errs[1:])]
    assert all(3.5 <= q <= 4.5 for q in ratios), ratios
