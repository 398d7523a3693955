"""Double-null frame for spherically symmetric asymptotically flat metrics.

With ``W = r^((n-1)/2) u`` the radial wave equation becomes

    g^tt W_tt + 2 g^tr W_tr + g^rr W_rr + k1 W_r + k2 W_t + k3 W = -r^((n-1)/2) F(u)

and in null coordinates ``(xi, eta)``

    W_xi_eta + C1 W_eta + C2 W_xi + C3 W = prefactor * r^((n-1)/2) F(u),

``prefactor = 1 / (g^tt eta_r xi_r (lam+ - lam-)^2)``, which is ``+1/4`` in flat space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ChartError, DomainError, RegionError
from .metrics import MetricSpec
from .nonlinearity import apply_nonlinearity


# --------------------------------------------------------------------------
# characteristic speeds
# --------------------------------------------------------------------------


def char_speeds(metric: MetricSpec, t, r):
    """Roots ``lam- < lam+`` of ``g^tt lam^2 + 2 g^tr lam + g^rr = 0``."""
    Gtt, Gtr, _, G = metric.sph_inverse(t, r)
    if np.any(np.abs(Gtt) < 1e-14):
        raise DomainError("degenerate metric: |g^tt| < 1e-14")
    lam_minus = (-Gtr + 1.0 / G) / Gtt
    lam_plus = (-Gtr - 1.0 / G) / Gtt
    if np.ndim(lam_minus) == 0:
        return float(lam_minus), float(lam_plus)
    return lam_minus, lam_plus


def _speed_partials(metric: MetricSpec, t, r):
    """Speeds and their ``t``, ``r`` partials from the inverse-metric partials."""
    d = metric.sph_inverse_partials(t, r)
    Gtt, Gtr, G = d["Gtt"], d["Gtr"], d["G"]
    out = {}
    for name, s in (("m", 1.0), ("p", -1.0)):
        lam = (-Gtr + s / G) / Gtt
        out["lam_" + name] = lam
        for k in ("t", "r"):
            num = -d["Gtr_" + k] - s * d["G_" + k] / G**2
            out[f"lam_{name}_{k}"] = (num - lam * d["Gtt_" + k]) / Gtt
    return out, d


# --------------------------------------------------------------------------
# chart
# --------------------------------------------------------------------------


@dataclass
class NullChart:
    """Tabulated ``eta(t, r)`` and ``xi(t, r)`` on a uniform rectangular grid."""

    t: np.ndarray
    r: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    eta_t: np.ndarray
    eta_r: np.ndarray
    xi_t: np.ndarray
    xi_r: np.ndarray
    lam_minus: np.ndarray
    lam_plus: np.ndarray
    valid: np.ndarray
    h: float
    metric: MetricSpec

    def transport_residuals(self, t_box=None, r_box=None):
        """``max |eta_t - lam- eta_r|`` and ``max |xi_t - lam+ xi_r|`` over interior valid nodes.

        ``t_box``/``r_box`` restrict the maximum to a fixed physical window, which keeps
        convergence studies from chasing the h-dependent mask edge.
        """
        m = self._interior()
        T, R = np.meshgrid(self.t, self.r, indexing="ij")
        if t_box is not None:
            m &= (T >= t_box[0] - 1e-12) & (T <= t_box[1] + 1e-12)
        if r_box is not None:
            m &= (R >= r_box[0] - 1e-12) & (R <= r_box[1] + 1e-12)
        if not np.any(m):
            raise ChartError("no interior chart nodes in the requested window")
        re = np.abs(self.eta_t - self.lam_minus * self.eta_r)[m]
        rx = np.abs(self.xi_t - self.lam_plus * self.xi_r)[m]
        return float(re.max()), float(rx.max())

    def jacobian(self):
        return self.eta_r * self.xi_t - self.eta_t * self.xi_r

    def _interior(self):
        v = self.valid.copy()
        v[1:, :] &= self.valid[:-1, :]
        v[:-1, :] &= self.valid[1:, :]
        v[:, 1:] &= self.valid[:, :-1]
        v[:, :-1] &= self.valid[:, 1:]
        v[0, :] = v[-1, :] = False
        v[:, 0] = v[:, -1] = False
        return v

    def _spline(self, field):
        return RectBivariateSpline(self.t, self.r, np.where(self.valid, field, 0.0), kx=3, ky=3)

    def covers(self, t, r) -> bool:
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        if np.any(t < self.t[0] - 1e-12) or np.any(t > self.t[-1] + 1e-12):
            return False
        if np.any(r < self.r[0] - 1e-12) or np.any(r > self.r[-1] + 1e-12):
            return False
        it = np.clip(np.searchsorted(self.t, t), 0, self.t.size - 1)
        ir = np.clip(np.searchsorted(self.r, r), 0, self.r.size - 1)
        lo_t = np.clip(it - 1, 0, None)
        lo_r = np.clip(ir - 1, 0, None)
        return bool(np.all(self.valid[it, ir] & self.valid[lo_t, lo_r]
                           & self.valid[lo_t, ir] & self.valid[it, lo_r]))

    def interp(self, name: str, t, r):
        """Bicubic interpolation of a tabulated field."""
        if not self.covers(t, r):
            raise ChartError("point lies outside the chart")
        cache = self.__dict__.setdefault("_splines", {})
        if name not in cache:
            cache[name] = self._spline(getattr(self, name))
        return cache[name].ev(t, r)

    def to_tr(self, xi, eta, tol: float = 1e-12, max_iter: int = 50):
        """Invert the chart: Newton on ``(xi, eta)(t, r) = target`` from the flat guess."""
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        t = 0.5 * (xi + eta)
        r = 0.5 * (xi - eta)
        for _ in range(max_iter):
            t = np.clip(t, self.t[0], self.t[-1])
            r = np.clip(r, self.r[0], self.r[-1])
            fx = self.interp("xi", t, r) - xi
            fe = self.interp("eta", t, r) - eta
            a, b = self.interp("xi_t", t, r), self.interp("xi_r", t, r)
            c, d = self.interp("eta_t", t, r), self.interp("eta_r", t, r)
            det = a * d - b * c
            dt = (d * fx - b * fe) / det
            dr = (-c * fx + a * fe) / det
            t = t - dt
            r = r - dr
            if np.all(np.abs(dt) + np.abs(dr) < tol * (1 + np.abs(r))):
                break
        else:
            at_edge = np.any((t <= self.t[0]) | (t >= self.t[-1]) | (r <= self.r[0]) | (r >= self.r[-1]))
            raise ChartError("(xi, eta) maps outside the chart" if at_edge
                             else "chart inversion did not converge")
        if not self.covers(t, r):
            raise ChartError("(xi, eta) maps outside the chart")
        return t, r


def _trace_labels(metric: MetricSpec, t_nodes, r_nodes, which: str, h: float, r_lo, r_hi):
    """Follow each node's characteristic back to ``t = 0`` with RK4 steps of size ``h``.

    ``which='eta'`` follows ``dr/dt = -lam-`` (outgoing), ``'xi'`` follows
    ``dr/dt = -lam+`` (ingoing). Returns the foot radius and an escape mask.
    """
    idx = 0 if which == "eta" else 1

    def vel(t, r):
        return -char_speeds(metric, t, r)[idx]

    t = np.array(t_nodes, dtype=float)
    r = np.array(r_nodes, dtype=float)
    disp = np.zeros_like(r)
    comp = np.zeros_like(r)
    alive = np.ones_like(r, dtype=bool)
    steps = int(round(t.max() / h)) if t.size else 0
    for _ in range(steps):
        active = alive & (t > 1e-12)
        if not np.any(active):
            break
        ta, ra = t[active], r[active] - disp[active]
        dt = -np.minimum(h, ta)
        k1 = vel(ta, ra)
        r2 = ra + 0.5 * dt * k1
        ok = (r2 > r_lo) & (r2 < r_hi)
        r2 = np.clip(r2, r_lo, r_hi)
        k2 = vel(ta + 0.5 * dt, r2)
        r3 = np.clip(ra + 0.5 * dt * k2, r_lo, r_hi)
        k3 = vel(ta + 0.5 * dt, r3)
        r4 = ra + dt * k3
        ok &= (r4 > r_lo) & (r4 < r_hi)
        r4 = np.clip(r4, r_lo, r_hi)
        k4 = vel(ta + dt, r4)
        step = -dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        # Kahan-compensated accumulation of the displacement
        y = step - comp[active]
        s = disp[active] + y
        comp[active] = (s - disp[active]) - y
        disp[active] = s
        t[active] = ta + dt
        foot = r[active] - disp[active]
        ok &= (foot >= r_lo) & (foot <= r_hi)
        alive_idx = np.nonzero(active)[0]
        alive[alive_idx[~ok]] = False
    return r - disp, alive


def build_null_chart(metric: MetricSpec, t_max: float, r_range, h: float) -> NullChart:
    """Tabulate ``eta`` and ``xi`` on ``t in [0, t_max]``, ``r in r_range`` with spacing ``h``.

    Nodes whose characteristic leaves ``r_range`` before reaching ``t = 0`` are masked.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    r_lo, r_hi = map(float, r_range)
    metric.check_exterior(r_lo)
    nt = int(round(t_max / h)) + 1
    nr = int(round((r_hi - r_lo) / h)) + 1
    t = np.arange(nt) * h
    r = r_lo + np.arange(nr) * h
    T, R = np.meshgrid(t, r, indexing="ij")
    foot_eta, ok_eta = _trace_labels(metric, T.ravel(), R.ravel(), "eta", h, r_lo, r_hi)
    foot_xi, ok_xi = _trace_labels(metric, T.ravel(), R.ravel(), "xi", h, r_lo, r_hi)
    eta = -foot_eta.reshape(T.shape)
    xi = foot_xi.reshape(T.shape)
    valid = (ok_eta & ok_xi).reshape(T.shape)
    eta[0] = -r
    xi[0] = r
    if not np.any(valid[1:]) and nt > 1:
        raise ChartError("every characteristic leaves r_range; widen the range or shorten t_max")
    eta_t, eta_r = np.gradient(eta, h, h, edge_order=2)
    xi_t, xi_r = np.gradient(xi, h, h, edge_order=2)
    lm, lp = char_speeds(metric, T, R)
    return NullChart(t, r, eta, xi, eta_t, eta_r, xi_t, xi_r, lm, lp, valid, h, metric)


# --------------------------------------------------------------------------
# reduced coefficients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedCoefficients:
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    prefactor: np.ndarray
    Ct: np.ndarray
    Cr: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    kappa3: np.ndarray
    dC1_deta: np.ndarray | float = 0.0


def _metric_coefficients(metric: MetricSpec, n: int, t, r):
    sp, d = _speed_partials(metric, t, r)
    Gtt, Gtr, Grr, G = d["Gtt"], d["Gtr"], d["Grr"], d["G"]
    # C~^a = d_b g^ab + g^ab d_b G / G
    Ct_tilde = d["Gtt_t"] + d["Gtr_r"] + (Gtt * d["G_t"] + Gtr * d["G_r"]) / G
    Cr_tilde = d["Gtr_t"] + d["Grr_r"] + (Gtr * d["G_t"] + Grr * d["G_r"]) / G
    Ct = Ct_tilde + Gtr * (n - 1) / r
    Cr = Cr_tilde + Grr * (n - 1) / r
    k1 = Cr_tilde
    k2 = Ct_tilde
    k3 = -Grr * (n - 1) * (n - 3) / (4 * r**2) - Cr_tilde * (n - 1) / (2 * r)
    return sp, d, Ct, Cr, k1, k2, k3


def coefficients_from_partials(metric: MetricSpec, n: int, t, r, eta_r, xi_r) -> ReducedCoefficients:
    """Assemble the null-frame coefficients given the chart partials ``eta_r``, ``xi_r``.

    ``d_eta(dlam xi_r)`` is rewritten with ``xi_rt - lam+ xi_rr = xi_r d_r lam+`` so that
    only first partials of the chart are needed.
    """
    sp, d, Ct, Cr, k1, k2, k3 = _metric_coefficients(metric, n, t, r)
    Gtt = d["Gtt"]
    lm, lp = sp["lam_m"], sp["lam_p"]
    dl = lp - lm
    adv_lm = sp["lam_m_t"] - lp * sp["lam_m_r"]          # (d_t - lam+ d_r) lam-
    adv_dl = (sp["lam_p_t"] - sp["lam_m_t"]) - lp * (sp["lam_p_r"] - sp["lam_m_r"])
    B = Gtt * adv_lm + k1
    D = Gtt * eta_r * xi_r * dl**2
    C1 = -(B + k2 * lm) * eta_r / D
    C2 = -xi_r * (Gtt * (dl * sp["lam_p_r"] + adv_dl) + B + k2 * lp) / D
    C3 = -k3 / D
    return ReducedCoefficients(C1, C2, C3, 1.0 / D, Ct, Cr, k1, k2, k3)


def reduced_coefficients(metric: MetricSpec, chart: NullChart, n: int, t, r) -> ReducedCoefficients:
    if not chart.covers(t, r):
        raise ChartError("point lies outside the chart")
    eta_r = chart.interp("eta_r", t, r)
    xi_r = chart.interp("xi_r", t, r)
    return coefficients_from_partials(metric, n, np.asarray(t, float), np.asarray(r, float),
                                      eta_r, xi_r)


def coefficient_table(chart: NullChart, n: int):
    """Coefficients on every interior valid chart node, flattened for export."""
    m = chart._interior()
    T, R = np.meshgrid(chart.t, chart.r, indexing="ij")
    c = coefficients_from_partials(chart.metric, n, T[m], R[m], chart.eta_r[m], chart.xi_r[m])
    return {"t": T[m], "r": R[m], "xi": chart.xi[m], "eta": chart.eta[m],
            "C1": c.C1, "C2": c.C2, "C3": c.C3, "prefactor": c.prefactor}


# --------------------------------------------------------------------------
# integrating factors
# --------------------------------------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 40):
    """Adaptive Simpson quadrature; returns ``(value, error estimate)``."""
    if a == b:
        return 0.0, 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) * (fa + 4 * fm + fb) / 6

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6
        right = (b - m) * (fm + 4 * frm + fb) / 6
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15 * tol:
            return left + right + delta / 15, abs(delta) / 15
        lv, le = rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
        rv, re = rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)
        return lv + rv, le + re

    return rec(a, b, fa, fm, fb, whole, tol, max_depth)


@dataclass(frozen=True)
class IntegratingFactors:
    K: float
    K1: float
    err_K: float
    err_K1: float


def integrating_factors(C1, C2, xi: float, eta: float, eps: float, N: float,
                        tol: float = 1e-10) -> IntegratingFactors:
    """``K = exp(-int_eta^{-eps^-N} C2(xi, s) ds)``, ``K1 = exp(int_{-eta}^{xi} C1(s, eta) ds)``.

    ``C1`` and ``C2`` are callables of ``(xi, eta)``.
    """
    edge = -(eps ** (-N))
    if xi + eta < -1e-12 or eta > edge + 1e-12:
        raise RegionError(f"(xi, eta) = ({xi:g}, {eta:g}) is outside xi + eta >= 0, eta <= {edge:g}")
    iK, eK = adaptive_simpson(lambda s: float(C2(xi, s)), eta, edge, tol)
    iK1, eK1 = adaptive_simpson(lambda s: float(C1(s, eta)), -eta, xi, tol)
    K = math.exp(-iK)
    K1 = math.exp(iK1)
    return IntegratingFactors(K, K1, K * eK, K1 * eK1)


class NullCoefficientField:
    """``C1, C2, C3`` and ``d_eta C1`` as functions of ``(xi, eta)`` through a chart."""

    def __init__(self, chart: NullChart, n: int):
        self.chart = chart
        self.n = n

    def at(self, xi, eta) -> ReducedCoefficients:
        t, r = self.chart.to_tr(xi, eta)
        return reduced_coefficients(self.chart.metric, self.chart, self.n, t, r)

    def C1(self, xi, eta):
        return self.at(xi, eta).C1

    def C2(self, xi, eta):
        return self.at(xi, eta).C2

    def dC1_deta(self, xi, eta, step: float | None = None):
        s = step if step is not None else 1e-3 * max(1.0, abs(eta))
        return (self.C1(xi, eta + s) - self.C1(xi, eta - s)) / (2 * s)


# --------------------------------------------------------------------------
# reduced right-hand side
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedRhs:
    total: float
    nonlinear: float
    linear: float


def reduced_rhs(coeffs: ReducedCoefficients, K, K1, n: int, p: float, nonlin: str, r, U) -> ReducedRhs:
    """``d_eta((K/K1) d_xi U)`` source with ``U = K1 W``, split into its two terms.

    nonlinear: ``K * prefactor * r^k F(U / (K1 r^k))``, ``k = (n-1)/2``;
    linear: ``-(C3 K - d_eta(C1 K)) U / K1`` with ``d_eta K = C2 K``.
    """
    k = (n - 1) / 2
    rk = np.asarray(r, dtype=float) ** k
    nl = K * coeffs.prefactor * rk * apply_nonlinearity(np.asarray(U) / (K1 * rk), p, nonlin)
    d_c1k = K * (coeffs.dC1_deta + coeffs.C1 * coeffs.C2)
    lin = -(coeffs.C3 * K - d_c1k) / K1 * np.asarray(U)
    nl_, lin_ = (float(nl), float(lin)) if np.ndim(nl) == 0 and np.ndim(lin) == 0 else (nl, lin)
    return ReducedRhs(nl_ + lin_, nl_, lin_)


def dominance_threshold(n: int, p: float, theta0: float, c3: float, factor: float = 5.0) -> float:
    """Largest ``eps0`` with nonlinear/linear >= ``factor`` at the bootstrap floor.

    At ``U = eps0^(-theta0/3) xi^((n-1)/2 - 2/(p-1))``, ``r ~ xi``, ``K = K1 = 1``,
    ``prefactor = 1/4`` and ``|C3| = c3 / xi^2`` the ratio is
    ``eps0^(-theta0 (p-1)/3) / (4 c3)``.
    """
    if c3 <= 0:
        return 1.0
    need = 4 * c3 * factor
    if need <= 1:
        return 1.0
    return need ** (-3 / (theta0 * (p - 1)))


# --------------------------------------------------------------------------
# evolution on the (xi, eta) lattice
# --------------------------------------------------------------------------


@dataclass
class NullFrameField:
    """``U`` on ``xi = xi0 + j h``, ``eta = -xi0 - i h`` with ``xi + eta >= 0``."""

    h: float
    xi0: float
    U: np.ndarray
    valid: np.ndarray

    def xi(self, j):
        return self.xi0 + np.asarray(j) * self.h

    def eta(self, i):
        return -self.xi0 - np.asarray(i) * self.h


def evolve_null_frame(U_diag, dU_xi_diag, source, ratio, h: float, xi0: float, n_steps: int):
    """March ``d_eta(a d_xi U) = S(xi, eta, U)`` on the null lattice of region ``K``.

    ``U_diag(xi)`` and ``dU_xi_diag(xi)`` give data on ``xi + eta = 0``;
    ``ratio(xi, eta)`` is ``a = K/K1``; ``source(xi, eta, U)`` the right-hand side.
    The cell update is ``a_top (U_N - U_W) = a_bot (U_E - U_S) + h^2 S_c`` evaluated
    at the cell centre with ``U_c = (U_E + U_W)/2``. The eta direction runs with
    ``i`` (eta decreasing), so the future of a cell is smaller ``i``.
    """
    size = n_steps + 1
    U = np.zeros((size, size))
    valid = np.zeros((size, size), dtype=bool)
    # node (i, j): xi = xi0 + j h, eta = -xi0 - i h; region needs j >= i
    for k in range(size):
        x = xi0 + k * h
        U[k, k] = U_diag(x)
        valid[k, k] = True
    # first off-diagonal: U(xi + h, eta) = U + h U_xi(xi + h/2, eta) + O(h^3), where the
    # slope is shifted off the diagonal by h/2 in eta using U_xi_eta = (S - a_eta U_xi) / a
    for k in range(size - 1):
        xm = xi0 + (k + 0.5) * h
        slope = dU_xi_diag(xm)
        a = ratio(xm, -xm)
        a_eta = (ratio(xm, -xm + 0.5 * h) - ratio(xm, -xm - 0.5 * h)) / h
        mixed = (source(xm, -xm, U_diag(xm)) - a_eta * slope) / a
        U[k, k + 1] = U[k, k] + h * (slope + 0.5 * h * mixed)
        valid[k, k + 1] = True
    for d in range(2, size):
        for i in range(size - d):
            j = i + d
            # N=(i, j), W=(i, j-1), E=(i+1, j), S=(i+1, j-1) in the (eta-index, xi-index) plane
            xc = xi0 + (j - 0.5) * h
            ec = -xi0 - (i + 0.5) * h
            Uc = 0.5 * (U[i + 1, j] + U[i, j - 1])
            a_top = ratio(xc, -xi0 - i * h)
            a_bot = ratio(xc, -xi0 - (i + 1) * h)
            S = source(xc, ec, Uc)
            U[i, j] = U[i, j - 1] + (a_bot * (U[i + 1, j] - U[i + 1, j - 1]) + h * h * S) / a_top
            valid[i, j] = True
    return NullFrameField(h, xi0, U, valid)


# --------------------------------------------------------------------------
# audits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    name: str
    slope: float | None
    constant: float
    vanishing: bool
    passed: bool


def coefficient_decay_audit(metric: MetricSpec, n: int = 3, r_lo: float = 50.0, r_hi: float = 5000.0,
                            samples: int = 40, delta0: float | None = None, slack: float = 0.15,
                            floor: float = 1e-14) -> dict[str, DecayFit]:
    """Log-log decay fits of ``C1``, ``C2`` (target ``-(1+delta0)``) and ``C3`` (target ``-2``).

    Evaluated on the ``t = 0`` slice where ``eta_r = -1`` and ``xi_r = 1`` hold exactly.
    A coefficient below ``floor * r^-2`` everywhere is reported as vanishing; no slope is
    fitted to roundoff.
    """
    d0 = metric.delta0 if delta0 is None else delta0
    r = np.geomspace(r_lo, r_hi, samples)
    one = np.ones_like(r)
    c = coefficients_from_partials(metric, n, 0.0 * r, r, -one, one)
    out = {}
    for name, target in (("C1", -(1 + d0)), ("C2", -(1 + d0)), ("C3", -2.0)):
        y = np.abs(np.asarray(getattr(c, name), dtype=float))
        const = float(np.max(y * r**2))
        if np.all(y <= floor * r**-2.0):
            out[name] = DecayFit(name, None, const, True, True)
            continue
        slope = float(np.polyfit(np.log(r), np.log(np.maximum(y, 1e-300)), 1)[0])
        out[name] = DecayFit(name, slope, const, False, slope <= target + slack)
    return out


@dataclass(frozen=True)
class FactorAudit:
    max_dev_K: float
    max_dev_K1: float
    ratio_min: float
    ratio_max: float
    fitted_constant: float
    points: int

    @property
    def passed(self) -> bool:
        return self.max_dev_K < 0.2 and 5 / 6 < self.ratio_min and self.ratio_max < 6 / 5


def factor_audit(C1, C2, xis, etas, eps: float, N: float, delta0: float = 1.0) -> FactorAudit:
    """``K``, ``K1`` over the region points of the ``xis x etas`` grid."""
    devK, devK1, ratios = [], [], []
    edge = -(eps ** (-N))
    for x in xis:
        for e in etas:
            if x + e < 0 or e > edge:
                continue
            f = integrating_factors(C1, C2, float(x), float(e), eps, N)
            devK.append(abs(f.K - 1))
            devK1.append(abs(f.K1 - 1))
            ratios.append(f.K / f.K1)
    if not ratios:
        raise RegionError("no sample points fall in the region")
    mk = max(devK)
    return FactorAudit(mk, max(devK1), min(ratios), max(ratios),
                       mk / eps ** (N * delta0), len(ratios))
