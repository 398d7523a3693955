"""Discrete certificates behind the blow-up argument.

Covers the lower-bound iteration ``(ln C, a, b)``, the ``d_m`` sequence that
bounds ``C(m)`` from below, the comparison ODE ``W'' = c W^p``, the volume
functional identity, and the critical/lifespan exponent formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegimeError, SupportError
from .metrics import MetricSpec
from .nonlinearity import apply_nonlinearity

LN2 = math.log(2.0)
LN3 = math.log(3.0)
LN6 = math.log(6.0)


# --------------------------------------------------------------------------
# lower-bound iteration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundState:
    """Lower bound ``W >= C t^b (r* + t)^-a`` (or ``U >= C xi^-a (xi+eta)^b``)."""

    lnC: float
    a: float
    b: float

    def __post_init__(self):
        if self.b < 0:
            raise DomainError("b must be nonnegative")


def initial_bound(alpha: float) -> BoundState:
    """Starting point ``C = 1/2, a = alpha, b = 0`` (the eps0 factor is carried separately)."""
    return BoundState(-LN2, alpha, 0.0)


def iterate_bound(state: BoundState, p: float, steps: int = 1, flavor: str = "schwarzschild",
                  n: int = 3) -> BoundState:
    """Apply the iteration ``steps`` times.

    ``flavor='schwarzschild'`` uses the factor 3 and ``a -> p(1+a) - 1``;
    ``flavor='af'`` uses 6 and ``a -> ap + (n-1)(p-1)/2``.
    """
    if p <= 1:
        raise DomainError("p must exceed 1")
    if flavor not in ("schwarzschild", "af"):
        raise ValueError(f"unknown flavor {flavor!r}")
    lnC, a, b = state.lnC, state.a, state.b
    lnk = LN3 if flavor == "schwarzschild" else LN6
    for _ in range(steps):
        bp = b * p
        lnC = p * lnC - lnk - math.log(bp + 1) - math.log(bp + 2)
        a = p * (1 + a) - 1 if flavor == "schwarzschild" else a * p + (n - 1) * (p - 1) / 2
        b = bp + 2
    return BoundState(lnC, a, b)


def b_closed_form(p: float, m: int) -> float:
    mlp = m * math.log(p)
    # expm1 only where p^m - 1 would cancel; the power is exact for integer p
    growth = math.expm1(mlp) if mlp < 0.5 else p**m - 1
    return 2 * growth / (p - 1)


def _ln_b(p: float, m: int) -> float:
    """``ln b_m`` without forming ``p^m`` (finite for every m >= 1)."""
    mlp = m * math.log(p)
    return LN2 + mlp + math.log(-math.expm1(-mlp)) - math.log(p - 1)


@dataclass(frozen=True)
class CertSequence:
    """``b_m``, ``ln d_m`` and ``ln C(m) >= -ln d_m`` for ``m = 0..m_max``.

    ``scaled[m] = ln d_m / p^m`` is always finite; ``ln_d_m`` is ``scaled * p^m``
    and becomes ``inf`` only past ``m ln p ~ 709``.
    """

    p: float
    m: np.ndarray
    b_m: np.ndarray
    scaled: np.ndarray
    ln_d_m: np.ndarray
    ln_d_m_product: np.ndarray
    ln_C_direct: np.ndarray
    increments: np.ndarray
    tail_start: int
    tail_ratio: float
    sup_scaled: float
    tail_bound: float

    @property
    def ln_C_lower_m(self) -> np.ndarray:
        return -self.ln_d_m

    def records(self) -> list[dict]:
        return [{"m": int(m), "b_m": float(b), "ln_d_m": float(d)}
                for m, b, d in zip(self.m, self.b_m, self.ln_d_m)]


def dm_sequence(p: float, m_max: int, tail_start: int | None = None,
                alpha: float | None = None) -> CertSequence:
    """Log-space ``d_m`` via the recursion and via the closed product, side by side.

    Recursion: ``ln d_0 = ln 2``, ``ln d_1 = (p+3) ln 2``,
    ``ln d_{m+1} = p ln d_m + 2 ln(4 p b_m)``.
    Product: ``ln d_m = p^(m-1) [(p+3) ln 2 + sum_{j<m} 2 p^-j ln(4 p b_j)]``.
    """
    if p <= 1:
        raise DomainError("p must exceed 1")
    if not 1 <= m_max <= 10_000:
        raise DomainError("m_max must lie in 1..10000")
    lp = math.log(p)
    ms = np.arange(m_max + 1)

    # b_m: exact for small m, overflow-free log form otherwise
    b = np.array([b_closed_form(p, int(m)) if m * lp < 700 else math.inf for m in ms])
    ln_4pb = [math.nan] + [math.log(4 * p) + _ln_b(p, int(m)) for m in ms[1:]]

    # route 1: scaled recursion s_m = ln d_m / p^m, s_{m+1} = s_m + 2 ln(4 p b_m) / p^(m+1)
    scaled = np.empty(m_max + 1)
    scaled[0] = LN2
    scaled[1] = (p + 3) * LN2 / p
    incr = np.zeros(m_max + 1)
    for m in range(1, m_max):
        incr[m] = 2 * ln_4pb[m] * math.exp(-(m + 1) * lp)
        scaled[m + 1] = scaled[m] + incr[m]
    ln_d = np.empty(m_max + 1)
    ln_d[0] = LN2
    ln_d[1] = (p + 3) * LN2
    for m in range(1, m_max):
        nxt = p * ln_d[m] + 2 * ln_4pb[m] if ln_d[m] < 1e300 else math.inf
        ln_d[m + 1] = nxt

    # route 2: the closed product, summed with fsum
    prod = np.empty(m_max + 1)
    prod[0] = LN2
    terms = [(p + 3) * LN2]
    for m in range(1, m_max + 1):
        if m >= 2:
            terms.append(2 * math.exp(-(m - 1) * lp) * ln_4pb[m - 1])
        pw = (m - 1) * lp
        prod[m] = math.fsum(terms) * math.exp(pw) if pw < 709 else math.inf

    # C(m) from the direct iteration, carried in logs
    lnC = np.empty(m_max + 1)
    st = initial_bound(alpha if alpha is not None else 1.0)
    lnC[0] = st.lnC
    for m in range(1, m_max + 1):
        st = iterate_bound(st, p)
        lnC[m] = st.lnC

    t0 = m_max // 2 if tail_start is None else int(tail_start)
    t0 = max(1, min(t0, m_max - 2)) if m_max >= 3 else 1
    inc = incr[t0:m_max]
    ok = (inc[:-1] > 1e-300) & (inc[1:] > 0)
    ratios = inc[1:][ok] / inc[:-1][ok]
    ratio = float(np.max(ratios)) if ratios.size else 0.0
    last = incr[m_max - 1] if m_max >= 2 else 0.0
    tail = float(last * ratio / (1 - ratio)) if ratio < 1 else math.inf
    return CertSequence(p, ms, b, scaled, ln_d, prod, lnC, incr, t0, ratio,
                        float(scaled[-1] + tail), tail)


# --------------------------------------------------------------------------
# comparison ODE
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OdeBlowup:
    blew_up: bool
    T: float
    bound: float | None
    energy: float
    steps: int
    t: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)


def zero_energy_slope(c: float, p: float, W0: float) -> float:
    """``W'(0)`` placing ``(W0, W'(0))`` on the separatrix of ``W'' = c W^p``."""
    return math.sqrt(2 * c / (p + 1)) * W0 ** ((p + 1) / 2)


def separation_bound(c: float, p: float, W0: float) -> float:
    """Blow-up time along the zero-energy separatrix; an upper bound when the energy is >= 0."""
    return (2 / (p - 1)) * W0 ** (-(p - 1) / 2) / math.sqrt(2 * c / (p + 1))


def blowup_ode_solve(c: float, p: float, W0: float, W0p: float, T_max: float = math.inf,
                     courant: float = 0.005, growth: float = 1e12) -> OdeBlowup:
    """Integrate ``W'' = c W^p`` with RK4 until ``W > growth * W0`` or ``t > T_max``.

    The step is ``courant`` times the local blow-up timescale
    ``min(W^(-(p-1)/2)/sqrt(c), W/W')``. The reported ``T`` extrapolates
    ``W^(-(p-1)/2)``, linear in ``T - t`` near blow-up, over the last decade.
    """
    if W0 <= 0 or W0p < 0 or c < 0:
        raise DomainError("need W0 > 0, W0p >= 0, c >= 0")
    if p <= 1:
        raise DomainError("p must exceed 1")
    energy = 0.5 * W0p**2 - c * W0 ** (p + 1) / (p + 1)
    if c == 0.0:
        T = T_max if math.isfinite(T_max) else math.inf
        tt = np.array([0.0, T]) if math.isfinite(T) else np.array([0.0])
        return OdeBlowup(False, T, None, energy, 0, tt, W0 + W0p * tt)
    bound = separation_bound(c, p, W0) if energy >= 0 else None
    q = (p - 1) / 2
    sc = math.sqrt(c)

    def rhs(w, v):
        return v, c * w**p

    t, w, v = 0.0, W0, W0p
    ts, ws = [t], [w]
    steps = 0
    cap = growth * W0
    while w <= cap:
        scale = w ** (-q) / sc
        if v > 0:
            scale = min(scale, w / v)
        dt = courant * scale
        if t + dt > T_max:
            dt = T_max - t
        k1w, k1v = rhs(w, v)
        k2w, k2v = rhs(w + 0.5 * dt * k1w, v + 0.5 * dt * k1v)
        k3w, k3v = rhs(w + 0.5 * dt * k2w, v + 0.5 * dt * k2v)
        k4w, k4v = rhs(w + dt * k3w, v + dt * k3v)
        w += dt * (k1w + 2 * k2w + 2 * k3w + k4w) / 6
        v += dt * (k1v + 2 * k2v + 2 * k3v + k4v) / 6
        t += dt
        steps += 1
        ts.append(t)
        ws.append(w)
        if t >= T_max:
            break
        if not math.isfinite(w) or steps > 10_000_000:
            break
    ta, wa = np.array(ts), np.array(ws)
    if w <= cap or not math.isfinite(w):
        return OdeBlowup(False, T_max, bound, energy, steps, ta, wa)
    sel = wa >= cap / 10
    y = wa[sel] ** (-q)
    slope, icpt = np.polyfit(ta[sel], y, 1)
    T = float(-icpt / slope)
    if bound is not None and T > bound * (1 + 1e-6):
        raise AssertionError(f"numeric blow-up time {T} exceeds the separation bound {bound}")
    return OdeBlowup(True, T, bound, energy, steps, ta, wa)


# --------------------------------------------------------------------------
# volume functional
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionalTrace:
    t: np.ndarray
    W: np.ndarray
    Wp: np.ndarray
    Wpp: np.ndarray
    rhs: np.ndarray
    volume: float
    p: float

    @property
    def residual(self) -> np.ndarray:
        """``|W'' - int F(u) dvol|`` relative to the right-hand side."""
        scale = np.where(np.abs(self.rhs) > 0, np.abs(self.rhs), 1.0)
        return np.abs(self.Wpp - self.rhs) / scale

    @property
    def holder_ratio(self) -> np.ndarray:
        """``W / ((W'')^(1/p) V^(1/p'))`` per slice; at most 1 when Holder holds."""
        pp = self.p / (self.p - 1)
        denom = np.maximum(self.Wpp, 0.0) ** (1 / self.p) * self.volume ** (1 / pp)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, self.W / denom, np.where(self.W > 0, np.inf, 0.0))

    def records(self) -> list[dict]:
        return [{"t": float(a), "W": float(b), "Wp": float(c), "Wpp": float(d), "rhs": float(e)}
                for a, b, c, d, e in zip(self.t, self.W, self.Wp, self.Wpp, self.rhs)]


def second_derivative(y: np.ndarray, dt: float) -> np.ndarray:
    """Five-point stencil inside, three-point next to the ends, four-point one-sided at the ends."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 3:
        raise DomainError("need at least 3 time slices")
    d = np.empty(n)
    d[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / dt**2
    if n >= 5:
        d[2:-2] = (-y[4:] + 16 * y[3:-1] - 30 * y[2:-2] + 16 * y[1:-3] - y[:-4]) / (12 * dt**2)
    if n >= 4:
        d[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / dt**2
        d[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / dt**2
    else:
        d[0] = d[-1] = d[1]
    return d


def _radial_weights(r: np.ndarray) -> np.ndarray:
    """Composite Simpson weights on a uniform grid (trapezoid fallback for even counts)."""
    from scipy.integrate import simpson

    w = np.empty_like(r)
    eye = np.eye(r.size)
    for k in range(r.size):
        w[k] = simpson(eye[k], x=r)
    return w


def volume_functional_trace(t, r, u, metric: MetricSpec, shell, p: float,
                            nonlin: str = "abs", support_tol: float = 1e-10) -> FunctionalTrace:
    """Volume functional ``W(t) = int (-g^tt) u dvol`` of radial ``u[t_i, r_j]`` and its identity.

    ``r`` must cover ``shell = (r1, r2)``; ``u`` must vanish at both shell edges.
    The angular factor ``4 pi`` is included (``n = 3``).
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.shape != (t.size, r.size):
        raise DomainError("u must have shape (len(t), len(r))")
    if not metric.is_spherical:
        raise DomainError("volume functional trace needs a spherically symmetric metric")
    r1, r2 = shell
    inside = (r >= r1) & (r <= r2)
    rs = r[inside]
    us = u[:, inside]
    peak = float(np.max(np.abs(us))) if us.size else 0.0
    if peak > 0:
        edge = np.maximum(np.abs(us[:, 0]), np.abs(us[:, -1]))
        if np.any(edge > support_tol * peak):
            raise SupportError("u does not vanish at the shell boundary")
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    if t.size > 1 and not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise DomainError("time slices must be uniformly spaced")
    wq = _radial_weights(rs)
    W = np.empty(t.size)
    rhs = np.empty(t.size)
    vol = None
    for i, ti in enumerate(t):
        Gtt, _, _, G = metric.sph_inverse(np.full_like(rs, ti), rs)
        dvol = 4 * math.pi * G * rs**2
        W[i] = np.dot(wq, -Gtt * us[i] * dvol)
        rhs[i] = np.dot(wq, apply_nonlinearity(us[i], p, nonlin) * dvol)
        if vol is None:
            vol = float(np.dot(wq, dvol))
    Wp = np.gradient(W, dt) if t.size > 1 else np.zeros(1)
    Wpp = second_derivative(W, dt)
    return FunctionalTrace(t, W, Wp, Wpp, rhs, vol, p)


# --------------------------------------------------------------------------
# exponents
# --------------------------------------------------------------------------


def strauss_exponent(n: int) -> float:
    """Positive root of ``(n-1) p^2 - (n+1) p - 2 = 0``."""
    if n < 2:
        raise DomainError("n must be at least 2")
    return ((n + 1) + math.sqrt((n + 1) ** 2 + 8 * (n - 1))) / (2 * (n - 1))


@dataclass(frozen=True)
class LifespanExponent:
    value: float
    via_scaling: float
    s_c: float
    s_d: float


def lifespan_exponent(n: int, p: float, variant: str = "general") -> LifespanExponent:
    """Exponent ``k`` in ``T* <= C eps^-k``.

    ``variant='general'`` uses ``2p(p-1)/(2+(n+1)p-(n-1)p^2)``; ``'n3'`` uses
    ``p(p-1)/(1+2p-p^2)`` and requires ``n = 3``. The scaling form
    ``1/(s_c - s_d)`` carries the opposite sign; only magnitudes are compared.
    """
    if p <= 1 or p >= strauss_exponent(n):
        raise RegimeError(f"p={p} is outside (1, p_c({n}))")
    if variant == "general":
        k = 2 * p * (p - 1) / (2 + (n + 1) * p - (n - 1) * p * p)
    elif variant == "n3":
        if n != 3:
            raise DomainError("the n3 variant needs n = 3")
        k = p * (p - 1) / (1 + 2 * p - p * p)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    s_c = n / 2 - 2 / (p - 1)
    s_d = 0.5 - 1 / p
    via = 1 / (s_c - s_d)
    if abs(abs(via) - k) > 1e-12 * max(1.0, k):
        raise AssertionError(f"|1/(s_c - s_d)| = {abs(via)} disagrees with {k}")
    return LifespanExponent(k, via, s_c, s_d)


def af_sample_parameters(p: float) -> dict[str, float]:
    """Default AF-variant choice: ``theta0 = 1/(p+2)``, ``theta1 = (p+1) theta0``,
    Holder slack exponent ``nu = (p-1) theta0 / 4``."""
    theta0 = 1.0 / (p + 2)
    return {"theta0": theta0, "theta1": (p + 1) * theta0, "nu": (p - 1) * theta0 / 4}
