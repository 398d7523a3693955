import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup_lab.errors import DomainError, InsufficientRangeError
from blowup_lab.metrics import (
    PRESETS,
    af_decay_audit,
    custom_from_expressions,
    inverse_tortoise,
    kerr,
    kerr_inverse_components,
    metric_from_preset,
    minkowski,
    reissner_nordstrom,
    schwarzschild,
    schwarzschild_as_generic,
    structural_residual,
    tortoise,
    volume_element,
)

CATALOG = {
    "minkowski": minkowski(),
    "schwarzschild": schwarzschild(1.0),
    "kerr-0": kerr(1.0, 0.0),
    "kerr-0.5": kerr(1.0, 0.5),
    "kerr-0.99": kerr(1.0, 0.99),
    "reissner-nordstrom": reissner_nordstrom(1.0, 0.5),
    "schwarzschild-generic": schwarzschild_as_generic(1.0),
}


def boyer_lindquist(M, a, r, theta):
    rho2 = r * r + a * a * math.cos(theta) ** 2
    delta = r * r - 2 * M * r + a * a
    s2 = math.sin(theta) ** 2
    g = np.zeros((4, 4))
    g[0, 0] = -(1 - 2 * M * r / rho2)
    g[0, 3] = g[3, 0] = -2 * M * a * r * s2 / rho2
    g[1, 1] = rho2 / delta
    g[2, 2] = rho2
    g[3, 3] = (r * r + a * a + 2 * M * a * a * r * s2 / rho2) * s2
    return g


# -- Kerr inverse ------------------------------------------------------------

def test_kerr_inverse_reduces_to_schwarzschild():
    ic = kerr_inverse_components(1.0, 0.0, 4.0, math.pi / 2)
    assert ic.tt == pytest.approx(-2.0, rel=1e-14)
    assert ic.rr == pytest.approx(0.5, rel=1e-14)
    assert ic.tphi == 0.0


@pytest.mark.parametrize("theta", [0.3, math.pi / 2, 2.5])
def test_kerr_inverse_flat_far_away(theta):
    ic = kerr_inverse_components(1.0, 0.5, 1e6, theta)
    assert abs(ic.tt + 1) < 1e-5
    assert abs(ic.rr - 1) < 1e-5


def test_kerr_inverse_matches_dense_inversion():
    ic = kerr_inverse_components(1.0, 0.5, 3.0, math.pi / 2)
    dense = np.linalg.inv(boyer_lindquist(1.0, 0.5, 3.0, math.pi / 2))
    got = {"tt": dense[0, 0], "tphi": dense[0, 3], "rr": dense[1, 1], "thth": dense[2, 2],
           "phph": dense[3, 3]}
    for name, ref in got.items():
        assert getattr(ic, name) == pytest.approx(ref, rel=1e-10), name


@pytest.mark.parametrize("M,a,r,theta", [(1, 0.5, 1.8, 1.0), (1, 1.2, 5, 1.0), (1, 0.5, 5, 0.0)])
def test_kerr_inverse_domain_errors(M, a, r, theta):
    with pytest.raises(DomainError):
        kerr_inverse_components(M, a, r, theta)


def test_kerr_constructor_rejects_overspin():
    with pytest.raises(DomainError):
        kerr(1.0, 1.5)


# -- volume element ------------------------------------------------------------

@given(r=st.floats(0.5, 1e3), theta=st.floats(0.01, math.pi - 0.01))
def test_minkowski_volume_element(r, theta):
    assert volume_element(minkowski(), (0.0, r, theta)) == pytest.approx(r * r * math.sin(theta),
                                                                         rel=1e-14)


def test_schwarzschild_volume_element_against_determinant():
    m = schwarzschild(1.0)
    det = np.linalg.det(m.components(0.0, 4.0, math.pi / 2))
    assert volume_element(m, (0.0, 4.0, math.pi / 2)) == pytest.approx(16.0, rel=1e-13)
    assert math.sqrt(-det) == pytest.approx(16.0, rel=1e-12)


def test_kerr_volume_element_against_determinant():
    theta = math.pi / 3
    m = kerr(1.0, 0.5)
    rho2 = 9 + 0.25 * math.cos(theta) ** 2
    dense = math.sqrt(-np.linalg.det(boyer_lindquist(1.0, 0.5, 3.0, theta)))
    got = volume_element(m, (0.0, 3.0, theta))
    assert got == pytest.approx(rho2 * math.sin(theta), rel=1e-12)
    assert got == pytest.approx(dense, rel=1e-10)


def test_tortoise_chart_volume_element():
    got = volume_element(schwarzschild(1.0), (0.0, 4.0, math.pi / 2), chart="tortoise")
    assert got == pytest.approx(0.5 * 16.0)


def test_volume_element_rejects_interior():
    with pytest.raises(DomainError):
        volume_element(schwarzschild(1.0), (0.0, 1.5, 1.0))


# -- tortoise ------------------------------------------------------------------

def test_tortoise_values():
    assert tortoise(1.0, 3.0) == 3.0
    assert tortoise(1.0, 4.0) == pytest.approx(4 + 2 * math.log(2), abs=1e-14)
    assert tortoise(1.0, 4.0) == pytest.approx(5.386294, abs=1e-6)
    assert inverse_tortoise(1.0, tortoise(1.0, 7.3)) == pytest.approx(7.3, abs=1e-10)


def test_tortoise_rejects_horizon():
    with pytest.raises(DomainError):
        tortoise(1.0, 2.0)


@given(r=st.floats(2.0 + 1e-6, 1e6), M=st.floats(0.1, 3.0))
def test_tortoise_roundtrip(r, M):
    r = max(r * M, 2 * M * (1 + 1e-6))
    assert inverse_tortoise(M, tortoise(M, r)) == pytest.approx(r, rel=1e-12)


@given(r=st.floats(2.01, 1e4), dr=st.floats(1e-3, 10.0))
def test_tortoise_strictly_increasing(r, dr):
    assert tortoise(1.0, r + dr) > tortoise(1.0, r)


@pytest.mark.parametrize("r", [2.5, 4.0, 30.0])
def test_tortoise_derivative_second_order(r):
    exact = 1 / (1 - 2 / r)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (tortoise(1.0, r + h) - tortoise(1.0, r - h)) / (2 * h)
        errs.append(abs(fd - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_inverse_tortoise_deep_negative():
    r = inverse_tortoise(1.0, -10.0)
    assert 2.0 < r < 2.0 + 1e-2
    assert tortoise(1.0, r) == pytest.approx(-10.0, abs=1e-9)


# -- inverse consistency --------------------------------------------------------

@pytest.mark.parametrize("name", sorted(CATALOG))
def test_inverse_consistency_random_points(name):
    metric = CATALOG[name]
    rng = np.random.default_rng(7)
    lo = max(metric.horizon, 0.0) * 1.05 + 0.1
    for _ in range(100):
        t = rng.uniform(-5, 5)
        r = lo + rng.exponential(10.0)
        theta = rng.uniform(0.05, math.pi - 0.05)
        prod = metric.components(t, r, theta) @ metric.inverse(t, r, theta)
        assert np.max(np.abs(prod - np.eye(4))) < 1e-10


@given(r=st.floats(2.2, 500.0), theta=st.floats(0.05, math.pi - 0.05))
def test_kerr_small_spin_continuity(r, theta):
    small = kerr_inverse_components(1.0, 1e-8, r, theta)
    ref = schwarzschild(1.0).inverse(0.0, r, theta)
    assert small.tt == pytest.approx(ref[0, 0], rel=1e-6)
    assert small.rr == pytest.approx(ref[1, 1], rel=1e-6)
    assert small.thth == pytest.approx(ref[2, 2], rel=1e-6)
    assert small.phph == pytest.approx(ref[3, 3], rel=1e-6)
    assert abs(small.tphi) < 1e-6 * abs(ref[0, 0])


@given(t=st.floats(-10, 10), r=st.floats(3.0, 1e3))
def test_lorentzian_block(t, r):
    for metric in CATALOG.values():
        if not metric.is_spherical:
            continue
        gtt, gtr, grr = metric.sph_components(t, r)
        assert gtr**2 - gtt * grr > 0


# -- structural residual -------------------------------------------------------

def test_structural_residual_kerr_example():
    assert abs(structural_residual(kerr(1.0, 0.7), (0.0, 4.0, math.pi / 4, 0.0), 1e-4)) < 1e-6


@given(t=st.floats(-5, 5), r=st.floats(0.5, 100), theta=st.floats(0.1, 3.0))
def test_structural_residual_minkowski_exact(t, r, theta):
    assert structural_residual(minkowski(), (t, r, theta, 0.0), 1e-3) == 0.0


def test_structural_residual_generic_matches_hand_derivative():
    # sqrt(-g) g^tt = -r^2 sin(theta) (1 + t e^-r)^(-1/2); its t-derivative at t = 0 is
    # r^2 sin(theta) e^-r / 2, and the r- and theta-fluxes vanish since g^tr = g^tth = 0
    m = custom_from_expressions({"g_tt": "-(1 + t*exp(-r))", "g_rr": "1"})
    exact = 4 * math.exp(-2) / 2
    errs = [abs(structural_residual(m, (0.0, 2.0, math.pi / 2), h) - exact)
            for h in (1e-2, 5e-3, 2.5e-3)]
    assert exact != 0
    assert errs[0] < 1e-6
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_structural_residual_rejects_bad_step():
    with pytest.raises(ValueError):
        structural_residual(minkowski(), (0, 1, 1, 0), 0.0)


@pytest.mark.parametrize("a", [0.0, 0.3, 0.7, 0.99])
def test_structural_residual_kerr_halving(a):
    rng = np.random.default_rng(11)
    m = kerr(1.0, a)
    pts = [(rng.uniform(-3, 3), m.horizon + 0.5 + rng.exponential(5), rng.uniform(0.1, 3.0),
            rng.uniform(0, 6)) for _ in range(20)]
    full = max(abs(structural_residual(m, pt, 1e-4)) for pt in pts)
    half = max(abs(structural_residual(m, pt, 5e-5)) for pt in pts)
    assert full < 1e-6
    assert half <= full / 3.5


# -- decay audit -----------------------------------------------------------------

R_SAMPLES = np.geomspace(20, 2e4, 40)


def test_decay_audit_schwarzschild():
    rep = af_decay_audit(schwarzschild(1.0), 10.0, R_SAMPLES, delta0=1.0)
    assert rep.slopes["g_tt"] == pytest.approx(-1.0, abs=0.01)
    assert rep.passed


def test_decay_audit_minkowski_exact():
    rep = af_decay_audit(minkowski(), 10.0, R_SAMPLES)
    assert rep.passed
    assert not rep.slopes
    assert "g_tt" in rep.exact
    assert any("exact" in line for line in rep.lines())


def test_decay_audit_slow_tail():
    m = custom_from_expressions({"g_tt": "-1", "g_rr": "1 + r^(-1/2)"})
    assert af_decay_audit(m, 10.0, R_SAMPLES, delta0=1.0).slopes["g_rr"] == pytest.approx(-0.5, abs=0.01)
    assert not af_decay_audit(m, 10.0, R_SAMPLES, delta0=1.0).passed
    assert af_decay_audit(m, 10.0, R_SAMPLES, delta0=0.4).passed


def test_decay_audit_needs_range():
    with pytest.raises(InsufficientRangeError):
        af_decay_audit(schwarzschild(1.0), 10.0, np.linspace(20, 100, 10))
    with pytest.raises(DomainError):
        af_decay_audit(schwarzschild(1.0), 10.0, np.geomspace(5, 5000, 10))


# -- presets and custom expressions ---------------------------------------------

def test_presets_resolve():
    for name in PRESETS:
        params = {"exprs": {"g_tt": "-1", "g_rr": "1"}} if name == "custom" else {}
        assert metric_from_preset(name, **params) is not None
    with pytest.raises(DomainError):
        metric_from_preset("de-sitter")


def test_reissner_nordstrom_components():
    m = reissner_nordstrom(1.0, 0.5)
    f = 1 - 2 / 5 + 0.25 / 25
    gtt, gtr, grr = m.sph_components(0.0, 5.0)
    assert (gtt, gtr, grr) == (pytest.approx(-f), 0.0, pytest.approx(1 / f))
    assert m.horizon == pytest.approx(1 + math.sqrt(0.75))


def test_custom_expression_operators():
    m = custom_from_expressions({"g_tt": "-(1 - 2/r)", "g_rr": "exp(-ln(1 - 2/r))"})
    ref = schwarzschild(1.0)
    for r in (3.0, 10.0, 100.0):
        np.testing.assert_allclose(m.sph_components(0.0, r), ref.sph_components(0.0, r), rtol=1e-13)


def test_custom_expression_unknown_symbol():
    with pytest.raises(DomainError):
        custom_from_expressions({"g_tt": "-(1 + q/r)", "g_rr": "1"})
    with pytest.raises(DomainError):
        custom_from_expressions({"g_tt": "-1"})


def test_non_lorentzian_block_rejected():
    m = custom_from_expressions({"g_tt": "1", "g_rr": "1"})
    with pytest.raises(DomainError):
        m.sph_inverse(0.0, 3.0)
