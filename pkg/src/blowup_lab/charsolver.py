"""Characteristic-lattice solver for the radial 1+1 wave equation.

The unknown ``W = r u`` on Schwarzschild (or Minkowski with ``M = 0``) obeys

    (d_t^2 - d_{r*}^2) W = G(r*, W) + S(t, r*),
    G = (1 - 2M/r) [ r F(W/r) - 2M W / r^3 ].

Nodes sit on the null lines ``u = t - r*`` and ``v = t + r*`` with spacing ``h``.
Node ``(i, j)`` has ``u = -(x_min + i h)`` and ``v = x_min + j h`` and is stored
by level ``n = j - i`` (time ``n h / 2``), which is the march direction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .certifier import initial_bound, iterate_bound
from .errors import DomainError, WindowError
from .initial_data import DataProfile, Family, evaluate_data
from .metrics import MetricKind, MetricSpec, inverse_tortoise, tortoise
from .nonlinearity import apply_nonlinearity, canonical

OVERFLOW = 1e290
SENTINEL = 1e300


# --------------------------------------------------------------------------
# problem definition
# --------------------------------------------------------------------------


def schwarzschild_rhs(M: float, p: float, nonlin: str, rstar, W, r=None):
    """``G(r*, W) = (1 - 2M/r) [r F(W/r) - 2M W/r^3]``; pass ``r`` to skip the inversion."""
    if r is None:
        r = inverse_tortoise(M, rstar)
    r = np.asarray(r, dtype=float)
    if M > 0 and np.any(r <= 2 * M * (1 + 1e-9)):
        raise DomainError("r must exceed 2M")
    W = np.asarray(W, dtype=float)
    f = 1.0 - 2.0 * M / r
    out = f * (r * apply_nonlinearity(W / r, p, nonlin) - 2.0 * M * W / r**3)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ReducedProblem:
    """Radial problem on the lattice ``r* in [x_min, x_max]`` at ``t = 0``.

    ``data`` overrides the profile with ``r* -> (W, d_t W)``; ``rhs`` overrides
    ``G`` with ``(r*, r, W) -> array``; ``source`` adds ``S(t, r*)``.
    """

    M: float
    p: float
    nonlin: str
    x_min: float
    x_max: float
    t_max: float
    profile: DataProfile | None = None
    data: Callable | None = None
    rhs: Callable | None = None
    source: Callable | None = None
    n: int = 3

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise DomainError("x_max must exceed x_min")
        if self.t_max <= 0:
            raise DomainError("t_max must be positive")
        if self.profile is None and self.data is None:
            raise DomainError("need a data profile or a data callable")
        if self.n != 3:
            raise DomainError("the Schwarzschild reduction is three-dimensional")
        object.__setattr__(self, "nonlin", canonical(self.nonlin))

    @property
    def metric(self) -> MetricSpec:
        from .metrics import minkowski, schwarzschild

        return schwarzschild(self.M) if self.M > 0 else minkowski()

    @property
    def eps_scale(self) -> float:
        """``eps^-N`` of the data profile (1 when there is none)."""
        return self.profile.L if self.profile is not None else 1.0

    def initial_data(self, rstar: np.ndarray, r: np.ndarray):
        if self.data is not None:
            W0, W1 = self.data(rstar)
            return np.asarray(W0, float) * np.ones_like(rstar), np.asarray(W1, float) * np.ones_like(rstar)
        u0, u1 = evaluate_data(self.profile, r)
        return r * u0, r * u1

    def G(self, rstar, r, W):
        if self.rhs is not None:
            return np.asarray(self.rhs(rstar, r, W), dtype=float)
        return schwarzschild_rhs(self.M, self.p, self.nonlin, rstar, W, r=r)


def schwarzschild_problem(profile: DataProfile, M: float = 1.0, nonlin: str = "positive",
                          t_max: float | None = None, x_min: float | None = None,
                          x_max: float | None = None) -> ReducedProblem:
    """Outgoing region ``r* >= t + 2 eps^-N`` for a Schwarzschild-family profile.

    Defaults: ``t_max = 20 eps^-N`` and ``x_max`` large enough that the lattice
    triangle reaches ``t_max``.
    """
    if profile.family is not Family.SCHWARZSCHILD:
        raise DomainError("expected a Schwarzschild-family profile")
    A = profile.L
    t_max = 20.0 * A if t_max is None else t_max
    x_min = 2.0 * A if x_min is None else x_min
    x_max = x_min + 2.0 * t_max if x_max is None else x_max
    return ReducedProblem(M, profile.p, nonlin, x_min, x_max, t_max, profile=profile)


# --------------------------------------------------------------------------
# lattice field
# --------------------------------------------------------------------------


@dataclass
class NullGridField:
    """``W`` on the lattice, stored by level: ``values[n, i]`` is node ``(i, i + n)``."""

    h: float
    x_min: float
    n_cols: int
    values: np.ndarray
    valid: np.ndarray
    blowup: np.ndarray
    r_half: np.ndarray = field(repr=False)
    M: float = 0.0
    levels_done: int = 0
    crossing: tuple[int, int] | None = None
    sup: np.ndarray = field(default=None, repr=False)

    # -- coordinates -------------------------------------------------------

    def t_of_level(self, n):
        return np.asarray(n) * self.h / 2.0

    def rstar_of(self, n, i):
        return self.x_min + (2 * np.asarray(i) + np.asarray(n)) * self.h / 2.0

    def level_coords(self, n: int):
        i = np.arange(self.n_cols - n)
        return np.full(i.shape, n * self.h / 2.0), self.rstar_of(n, i), self.r_half[2 * i + n]

    @property
    def n_levels(self) -> int:
        return self.values.shape[0]

    def node(self, i: int, j: int) -> float:
        n = j - i
        if n < 0 or n >= self.n_levels or i < 0 or i >= self.n_cols - n:
            raise IndexError((i, j))
        return float(self.values[n, i])

    def good(self) -> np.ndarray:
        return self.valid & ~self.blowup

    def uv_records(self):
        """Rows ``(u_index, v_index, t, r_star, W)`` over valid nodes."""
        n_idx, i_idx = np.nonzero(self.valid)
        return (i_idx, i_idx + n_idx, self.t_of_level(n_idx), self.rstar_of(n_idx, i_idx),
                self.values[n_idx, i_idx])

    # -- interpolation ------------------------------------------------------

    def value_at(self, t, rstar):
        """Bilinear interpolation in the ``(i, j)`` index plane."""
        t = np.asarray(t, dtype=float)
        rstar = np.asarray(rstar, dtype=float)
        fi = (rstar - t - self.x_min) / self.h
        fj = (t + rstar - self.x_min) / self.h
        i0 = np.floor(fi).astype(int)
        j0 = np.floor(fj).astype(int)
        a = fi - i0
        b = fj - j0
        good = self.good()
        total = np.zeros(np.broadcast(fi, fj).shape)
        for di, dj, w in ((0, 0, (1 - a) * (1 - b)), (1, 0, a * (1 - b)),
                          (0, 1, (1 - a) * b), (1, 1, a * b)):
            ii, jj = i0 + di, j0 + dj
            n = jj - ii
            need = w > 1e-14
            ok = (n >= 0) & (n < self.levels_done) & (ii >= 0) & (ii < self.n_cols - n)
            if np.any(need & ~ok):
                raise WindowError("interpolation point lies outside the computed lattice")
            nn = np.clip(n, 0, self.levels_done - 1)
            iv = np.clip(ii, 0, self.n_cols - 1)
            if np.any(need & ~good[nn, iv]):
                raise WindowError("interpolation touches a flagged node")
            total = total + np.where(need, w * self.values[nn, iv], 0.0)
        return total


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------


def _rhs_guarded(problem: ReducedProblem, rstar, r, W):
    with np.errstate(over="ignore", invalid="ignore"):
        g = problem.G(rstar, r, W)
    bad = ~np.isfinite(g) | (np.abs(g) > OVERFLOW)
    return np.where(bad, 0.0, g), bad


def evolve(problem: ReducedProblem, h: float, stop_threshold: float | None = None) -> NullGridField:
    """Diamond-scheme march over the lattice triangle based on ``[x_min, x_max]``.

    ``W_N = W_E + W_W - W_S + (h^2/4) (G + S)`` with ``G`` at the cell centre
    using the E/W average. Level 1 is the Taylor start
    ``(W0(x-h/2) + W0(x+h/2))/2 + (h/2) W1(x) + (h^2/8)(G + S)``.
    With ``stop_threshold`` the march ends after the first level whose
    ``sup |W|`` reaches it.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    n_cols = int(math.floor((problem.x_max - problem.x_min) / h + 1e-9)) + 1
    if n_cols < 3:
        raise DomainError("lattice needs at least 3 nodes on the initial slice")
    n_levels = min(int(math.floor(2 * problem.t_max / h + 1e-9)), n_cols - 1) + 1
    half = problem.x_min + np.arange(2 * n_cols - 1) * h / 2.0
    r_half = inverse_tortoise(problem.M, half) if problem.M > 0 else half.copy()
    if problem.M > 0 and np.any(r_half <= 2 * problem.M * (1 + 1e-9)):
        raise DomainError("lattice reaches the horizon")

    vals = np.zeros((n_levels, n_cols))
    valid = np.zeros((n_levels, n_cols), dtype=bool)
    flag = np.zeros((n_levels, n_cols), dtype=bool)
    sup = np.zeros(n_levels)
    fld = NullGridField(h, problem.x_min, n_cols, vals, valid, flag, r_half, problem.M, sup=sup)

    # level 0
    x0 = half[0::2]
    r0 = r_half[0::2]
    W0, _ = problem.initial_data(x0, r0)
    vals[0] = W0
    valid[0] = True
    sup[0] = np.max(np.abs(W0))
    fld.levels_done = 1
    if n_levels == 1:
        return fld

    # level 1: Taylor start
    xc = half[1::2]
    rc = r_half[1::2]
    _, W1c = problem.initial_data(xc, rc)
    Wm = 0.5 * (W0[:-1] + W0[1:])
    # G at the data value on the midpoint, from the exact profile when available
    W0c, _ = problem.initial_data(xc, rc)
    g, bad = _rhs_guarded(problem, xc, rc, W0c)
    s = problem.source(np.zeros_like(xc), xc) if problem.source is not None else 0.0
    lvl = Wm + 0.5 * h * W1c + (h * h / 8.0) * (g + s)
    m = n_cols - 1
    vals[1, :m] = np.where(bad, SENTINEL, lvl)
    valid[1, :m] = True
    flag[1, :m] = bad
    sup[1] = np.max(np.abs(np.where(bad, 0.0, lvl)))
    fld.levels_done = 2
    if stop_threshold is not None and (sup[1] >= stop_threshold or bad.any()):
        fld.crossing = (1, int(np.argmax(np.abs(lvl))))
        return fld

    q = h * h / 4.0
    for n in range(2, n_levels):
        m = n_cols - n
        E = vals[n - 1, 1:m + 1]
        Wv = vals[n - 1, 0:m]
        S = vals[n - 2, 1:m + 1]
        dead = flag[n - 1, 1:m + 1] | flag[n - 1, 0:m] | flag[n - 2, 1:m + 1]
        idx = 2 * np.arange(m) + n
        xs = half[idx]
        rs = r_half[idx]
        Wc = 0.5 * (E + Wv)
        g, bad = _rhs_guarded(problem, xs, rs, np.where(dead, 0.0, Wc))
        if problem.source is not None:
            g = g + problem.source(np.full(m, (n - 1) * h / 2.0), xs)
        with np.errstate(over="ignore", invalid="ignore"):
            new = E + Wv - S + q * g
        bad = bad | dead | ~np.isfinite(new) | (np.abs(new) > OVERFLOW)
        vals[n, :m] = np.where(bad, SENTINEL, new)
        valid[n, :m] = True
        flag[n, :m] = bad
        live = np.where(bad, 0.0, np.abs(new))
        sup[n] = np.max(live) if m else 0.0
        fld.levels_done = n + 1
        if stop_threshold is not None and (sup[n] >= stop_threshold or bad.any()):
            k = int(np.argmax(live)) if sup[n] >= stop_threshold else int(np.argmax(bad))
            fld.crossing = (n, k)
            break
    return fld


# --------------------------------------------------------------------------
# blow-up detection
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LifespanEstimate:
    blew_up: bool
    T_star: float
    error_bar: float
    threshold: float
    h_values: tuple[float, ...]
    T_by_h: tuple[float, ...]
    T_lattice: tuple[float, ...]
    crossing_node: tuple[float, float] | None
    growth_time: float
    in_outgoing_cone: bool | None

    def record(self) -> dict:
        return {
            "blew_up": self.blew_up, "T_star": self.T_star, "error_bar": self.error_bar,
            "threshold": self.threshold, "h": list(self.h_values), "T_by_h": list(self.T_by_h),
            "crossing_node": list(self.crossing_node) if self.crossing_node else None,
            "in_outgoing_cone": self.in_outgoing_cone,
        }


def crossing_time(fld: NullGridField, threshold: float) -> tuple[float, float, float]:
    """``(interpolated time, lattice time, e-folding time)`` of the first level with ``sup >= threshold``.

    The interpolation is linear in ``ln sup`` between the bracketing levels.
    """
    if fld.crossing is None:
        return math.inf, math.inf, math.nan
    n, _ = fld.crossing
    dt = fld.h / 2.0
    s1 = fld.sup[n]
    if not np.isfinite(s1) or s1 < threshold or n == 0:
        return n * dt, n * dt, math.nan
    s0 = fld.sup[n - 1]
    if s0 <= 0:
        return n * dt, n * dt, math.nan
    rate = (math.log(s1) - math.log(s0)) / dt
    t = (n - 1) * dt + (math.log(threshold) - math.log(s0)) / rate
    return t, n * dt, 1.0 / rate


@dataclass(frozen=True)
class GridCrossing:
    """Threshold crossing on one lattice."""

    h: float
    t: float
    t_lattice: float
    node: tuple[float, float] | None
    growth_time: float

    @property
    def crossed(self) -> bool:
        return math.isfinite(self.t)


def grid_crossing(problem: ReducedProblem, h: float, threshold: float):
    """Evolve one lattice up to the threshold; returns ``(GridCrossing, field)``."""
    fld = evolve(problem, h, stop_threshold=threshold)
    init = fld.sup[0]
    if threshold < 1e3 * init:
        raise DomainError(f"threshold {threshold:g} is below 1e3 x initial sup|W| = {1e3 * init:g}")
    growth = math.nan
    if fld.crossing is not None and fld.sup[fld.crossing[0]] >= threshold:
        t, tl, growth = crossing_time(fld, threshold)
        n, i = fld.crossing
        node = (float(fld.t_of_level(n)), float(fld.rstar_of(n, i)))
    elif fld.crossing is not None:
        # overflow before the threshold: take the flagged level
        n, i = fld.crossing
        t = tl = float(fld.t_of_level(n))
        node = (t, float(fld.rstar_of(n, i)))
    else:
        t = tl = math.inf
        node = None
    return GridCrossing(float(h), float(t), float(tl), node, float(growth)), fld


def combine_crossings(crossings, threshold: float, t_max: float) -> LifespanEstimate:
    """Lifespan from per-grid crossings ordered coarse to fine; the error bar is the
    difference of the two finest grids."""
    times = [c.t for c in crossings]
    finest = crossings[-1]
    blew = finest.crossed
    if blew:
        err = abs(times[-1] - times[-2]) if math.isfinite(times[-2]) else math.inf
        T = times[-1]
        finite = [x for x in times if math.isfinite(x)]
        diffs = np.diff(finite)
        if diffs.size > 1 and not (np.all(diffs >= -2 * err) or np.all(diffs <= 2 * err)):
            warnings.warn("lifespan estimates are not monotone across refinements", RuntimeWarning)
        node = finest.node
    else:
        err = 0.0
        T = t_max
        node = None
    cone = (node[1] <= 2 * node[0]) if node is not None else None
    return LifespanEstimate(blew, T, err, threshold, tuple(c.h for c in crossings), tuple(times),
                            tuple(c.t_lattice for c in crossings), node,
                            finest.growth_time if blew else math.nan, cone)


def detect_blowup(problem: ReducedProblem, h_sequence, threshold: float,
                  keep_fields: bool = False):
    """Threshold-crossing lifespan with a two-level refinement error bar.

    Returns ``LifespanEstimate`` (and the fields, coarse to fine, when ``keep_fields``).
    """
    hs = [float(h) for h in h_sequence]
    if len(hs) < 2 or any(b >= a for a, b in zip(hs, hs[1:])):
        raise DomainError("h_sequence must be strictly decreasing with at least 2 entries")
    crossings, fields = [], []
    for h in hs:
        c, fld = grid_crossing(problem, h, threshold)
        crossings.append(c)
        if keep_fields:
            fields.append(fld)
        del fld
    est = combine_crossings(crossings, threshold, problem.t_max)
    if keep_fields:
        return est, fields
    return est


# --------------------------------------------------------------------------
# audits on a computed field
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    name: str
    checked: int
    violations: tuple[tuple, ...]
    worst_ratio: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and not self.violations


def _core_cone_mask(fld: NullGridField, profile: DataProfile, n: int):
    """Nodes on level ``n`` whose backward cone rests on the core of the data."""
    t, rs, _ = fld.level_coords(n)
    hi = tortoise(fld.M, profile.core[1]) if fld.M > 0 else profile.core[1]
    lo = tortoise(fld.M, profile.core[0]) if fld.M > 0 else profile.core[0]
    return (rs + t <= hi) & (rs - t >= lo)


def _pre_blowup_levels(fld: NullGridField) -> int:
    return fld.crossing[0] if fld.crossing is not None else fld.levels_done


def lower_bound_audit(fld: NullGridField, profile: DataProfile, m_max: int = 3,
                      slack: float = 0.9) -> dict[int, AuditReport]:
    """Check ``W >= slack * bound_m`` for ``m = 0..m_max`` at pre-blow-up nodes.

    ``bound_0 = (1/2) eps0^-theta0 (r* - t)^-alpha``;
    ``bound_m = C(m) eps0^(-theta0 p^m) (r* + t)^(1 - (alpha+1) p^m) t^(b_m)`` for
    ``m >= 1`` with ``C(m)`` from :func:`iterate_bound`. Only nodes whose backward
    cone lies over the data core are audited.
    """
    p, alpha = profile.p, profile.alpha
    amp = profile.amp0
    states = [initial_bound(alpha)]
    for _ in range(m_max):
        states.append(iterate_bound(states[-1], p))
    out = {m: [] for m in range(m_max + 1)}
    checked = {m: 0 for m in range(m_max + 1)}
    worst = {m: math.inf for m in range(m_max + 1)}
    stop = _pre_blowup_levels(fld)
    good = fld.good()
    for n in range(stop):
        t, rs, _ = fld.level_coords(n)
        sel = good[n, :t.size] & _core_cone_mask(fld, profile, n)
        if not np.any(sel):
            continue
        W = fld.values[n, :t.size]
        idx = np.nonzero(sel)[0]
        for m, st in enumerate(states):
            if m == 0:
                bound = 0.5 * amp * (rs[idx] - t[idx]) ** (-alpha)
            else:
                if t[0] == 0.0:
                    continue
                pm = p**m
                lnb = (st.lnC - profile.theta0 * pm * math.log(profile.eps0)
                       + (1 - (alpha + 1) * pm) * np.log(rs[idx] + t[idx]) + st.b * np.log(t[idx]))
                bound = np.exp(lnb)
            ratio = W[idx] / bound
            checked[m] += idx.size
            worst[m] = min(worst[m], float(np.min(ratio)))
            for k in np.nonzero(ratio < slack)[0]:
                out[m].append((n, int(idx[k]), float(t[idx[k]]), float(rs[idx[k]]), float(ratio[k])))
    return {m: AuditReport(f"lower-bound m={m}", checked[m], tuple(out[m]), worst[m])
            for m in range(m_max + 1)}


def z_values(fld: NullGridField):
    """``Z = (d_t + d_r*) W = 2 dW/dv`` on the half-step between ``(i, j)`` and ``(i, j+1)``.

    Returned by level ``n`` of the lower node: ``Z[n, i]``.
    """
    L = fld.levels_done
    Z = np.full((L - 1, fld.n_cols), np.nan)
    for n in range(L - 1):
        m = fld.n_cols - n - 1
        Z[n, :m] = 2.0 * (fld.values[n + 1, :m] - fld.values[n, :m]) / fld.h
    return Z


def z_monotonicity_audit(fld: NullGridField, profile: DataProfile | None = None,
                         slack: float = 0.9) -> AuditReport:
    """``Z(t, r*) >= slack * Z(0, r* + t)`` and ``Z(0, .) > 0`` along ingoing lines."""
    Z = z_values(fld)
    stop = min(_pre_blowup_levels(fld), Z.shape[0])
    good = fld.good()
    bad, checked, worst = [], 0, math.inf
    for n in range(stop):
        m = fld.n_cols - n - 1
        i = np.arange(m)
        ok = good[n, :m] & good[n + 1, :m]
        if profile is not None:
            # both ends of the half-step must sit over the core
            ok &= _core_cone_mask(fld, profile, n)[:m] & _core_cone_mask(fld, profile, n + 1)[:m]
        j = i + n  # v-index is preserved along the ingoing line back to t = 0
        ok &= j < fld.n_cols - 1
        if not np.any(ok):
            continue
        base = Z[0, np.where(ok, j, 0)]
        cur = Z[n, :m]
        for k in np.nonzero(ok)[0]:
            checked += 1
            z0, z = base[k], cur[k]
            if z0 <= 0:
                bad.append((n, int(k), float(n * fld.h / 2), float(fld.rstar_of(n, k)), z, z0))
                continue
            worst = min(worst, z / z0)
            if z < slack * z0:
                bad.append((n, int(k), float(n * fld.h / 2), float(fld.rstar_of(n, k)), z, z0))
    return AuditReport("Z monotonicity", checked, tuple(bad), worst)


# --------------------------------------------------------------------------
# light-cone functional
# --------------------------------------------------------------------------


def _segment_weights(fld: NullGridField, offset: float, nu: float):
    """Break points and product-integration weights for ``int_0^1 lam^nu w(lam) d lam``.

    Along the segment the v-index is fixed and the u-index moves linearly with
    ``lam``, so the bilinear interpolant is piecewise linear between lattice
    lines. Integrating ``lam^nu`` against each linear piece in closed form makes
    the quadrature exact for that interpolant.
    """
    h = fld.h
    shift = offset - fld.x_min
    k = np.arange(math.ceil(shift / h), math.floor((2.0 + shift) / h) + 1)
    kinks = (k * h - shift) / 2.0
    lam = np.unique(np.concatenate([[0.0, 1.0], kinks[(kinks > 0.0) & (kinks < 1.0)]]))
    a, b = lam[:-1], lam[1:]
    m0 = (b ** (nu + 1) - a ** (nu + 1)) / (nu + 1)
    m1 = (b ** (nu + 2) - a ** (nu + 2)) / (nu + 2)
    slope = (m1 - a * m0) / (b - a)
    w = np.zeros(lam.size)
    w[:-1] += m0 - slope
    w[1:] += slope
    return lam, w


def lightcone_functional(fld: NullGridField, nu: float, t: float, offset: float | None = None,
                         window_start: float | None = None):
    """``G(t) = int_0^1 lam^nu W(t - lam, t + offset + lam) d lam`` and a centred ``G'(t)``.

    ``offset`` defaults to the lattice's ``x_min``; valid for
    ``t >= 6 + offset`` unless ``window_start`` says otherwise.
    """
    offset = fld.x_min if offset is None else offset
    start = 6.0 + offset if window_start is None else window_start
    if t < start:
        raise WindowError(f"t={t:g} is before the validity window t >= {start:g}")
    lam, weight = _segment_weights(fld, offset, nu)

    def G(tt):
        return float(np.dot(weight, fld.value_at(tt - lam, tt + offset + lam)))

    dt = fld.h / 2.0
    g = G(t)
    gp = (G(t + dt) - G(t - dt)) / (2 * dt)
    return g, gp


@dataclass(frozen=True)
class OdiReport:
    times: np.ndarray
    G: np.ndarray
    Gp: np.ndarray
    target: np.ndarray
    fraction: float

    @property
    def ratio(self) -> np.ndarray:
        return self.Gp / self.target


def odi_audit(fld: NullGridField, profile: DataProfile, n_samples: int = 40,
              slack: float = 0.8, t_end: float | None = None) -> OdiReport:
    """Fraction of sampled times with ``G' >= slack (p-1)/(p+1) eps0^(-theta0 (p-1)/2) G^((p+1)/2)``."""
    p = profile.p
    nu = 2.0 / (p - 1)
    start = 6.0 + fld.x_min
    last_level = _pre_blowup_levels(fld) - 3
    t_last = fld.t_of_level(last_level) if t_end is None else t_end
    if t_last <= start:
        raise WindowError("run ends before the functional's validity window")
    ts = np.linspace(start, t_last, n_samples)
    c = slack * (p - 1) / (p + 1) * profile.eps0 ** (-profile.theta0 * (p - 1) / 2)
    Gs, Gps, tg, keep = [], [], [], []
    for t in ts:
        try:
            g, gp = lightcone_functional(fld, nu, float(t))
        except WindowError:
            continue
        Gs.append(g)
        Gps.append(gp)
        keep.append(t)
    G = np.array(Gs)
    Gp = np.array(Gps)
    target = c * np.maximum(G, 0.0) ** ((p + 1) / 2)
    frac = float(np.mean(Gp >= target)) if G.size else 0.0
    return OdiReport(np.array(keep), G, Gp, target, frac)


# --------------------------------------------------------------------------
# radial slices for the volume functional
# --------------------------------------------------------------------------


def radial_slices(fld: NullGridField, levels, r_grid):
    """``(t, u[t, r])`` with ``u = W / r`` interpolated by cubic splines in ``r*``.

    Levels must leave every ``r_grid`` point inside their lattice slice.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    xs = tortoise(fld.M, r_grid) if fld.M > 0 else r_grid
    ts, us = [], []
    for n in levels:
        t, rs, _ = fld.level_coords(int(n))
        if xs[0] < rs[0] or xs[-1] > rs[-1]:
            raise WindowError(f"level {n} does not cover the requested radii")
        if not np.all(fld.good()[n, :rs.size]):
            raise WindowError(f"level {n} contains flagged nodes")
        spl = CubicSpline(rs, fld.values[n, :rs.size])
        ts.append(float(t[0]))
        us.append(spl(xs) / r_grid)
    return np.array(ts), np.array(us)


def with_threshold(problem: ReducedProblem, **changes) -> ReducedProblem:
    return replace(problem, **changes)
