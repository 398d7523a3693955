"""Explicit small-data families and their smooth compactly supported extensions.

Three radial families are provided:

``schwarzschild``
    ``u0 = eps0^-theta0 r^(-alpha-1)``, ``u1 = eps0^-theta1 r^(-alpha-2)`` on
    ``[eps^-N, 10 eps^-N]``.
``kerr``
    ``u0 = eps0^-theta0 r^(-2/(p-1))``, ``u1 = eps0^-theta1 r^(-2/(p-1)-1)`` on
    ``[6L, 8L]``, support inside ``[5L, 10L]``.
``af``
    ``u0 = eps0^-theta0 r^(-alpha-(n-1)/2)``, ``u1 = eps0^-theta1 r^(-alpha-1-(n-1)/2)``
    on ``[eps^-N, 10 eps^-N]`` for a caller-chosen ``alpha``.

Outside the core each profile is multiplied by a C-infinity step that falls
from 1 to 0 across a collar of width ``transition * r_inner`` on either side.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConstraintViolation, DomainError


class Family(str, Enum):
    SCHWARZSCHILD = "schwarzschild"
    KERR = "kerr"
    AF = "af"


_ALIASES = {
    "schwarzschild": Family.SCHWARZSCHILD, "schwarzschildoutgoing": Family.SCHWARZSCHILD,
    "kerr": Family.KERR, "kerrshell": Family.KERR,
    "af": Family.AF, "afoutgoing": Family.AF,
}


def _family(value) -> Family:
    if isinstance(value, Family):
        return value
    key = str(value).strip().lower().replace("_", "").replace("-", "")
    if key not in _ALIASES:
        raise ConstraintViolation(f"unknown data family {value!r}")
    return _ALIASES[key]


def strauss_root(n: int) -> float:
    return ((n + 1) + math.sqrt((n + 1) ** 2 + 8 * (n - 1))) / (2 * (n - 1))


@dataclass(frozen=True)
class DataProfile:
    family: Family
    p: float
    n: int
    eps: float
    eps0: float
    theta0: float
    theta1: float
    mu: float
    alpha: float
    N: float
    L: float
    transition: float = 0.1
    # test hooks: multiply the eps0^-theta amplitudes (0 gives zero data, -1 flips sign)
    scale0: float = 1.0
    scale1: float = 1.0

    # -- geometry ----------------------------------------------------------

    @property
    def core(self) -> tuple[float, float]:
        if self.family is Family.KERR:
            return 6.0 * self.L, 8.0 * self.L
        return self.L, 10.0 * self.L

    @property
    def collar(self) -> float:
        return self.transition * self.core[0]

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.core
        return lo - self.collar, hi + self.collar

    # -- amplitudes and powers --------------------------------------------

    @property
    def amp0(self) -> float:
        return self.scale0 * self.eps0 ** (-self.theta0)

    @property
    def amp1(self) -> float:
        return self.scale1 * self.eps0 ** (-self.theta1)

    @property
    def decay0(self) -> float:
        """Exponent ``beta`` in ``u0 = amp0 * r^-beta``."""
        if self.family is Family.SCHWARZSCHILD:
            return self.alpha + 1.0
        if self.family is Family.KERR:
            return 2.0 / (self.p - 1.0)
        return self.alpha + (self.n - 1) / 2.0

    @property
    def decay1(self) -> float:
        return self.decay0 + 1.0

    def raw(self, r):
        r = np.asarray(r, dtype=float)
        return self.amp0 * r ** (-self.decay0), self.amp1 * r ** (-self.decay1)

    def to_text(self) -> str:
        keys = ("family", "p", "n", "eps", "eps0", "theta0", "theta1", "mu", "transition")
        d = asdict(self)
        d["family"] = self.family.value
        lines = [f"{k} = {d[k]!r}" if k != "family" else f"family = {d[k]}" for k in keys]
        if self.family is Family.AF:
            lines.append(f"alpha = {self.alpha!r}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def _require(cond: bool, text: str) -> None:
    if not cond:
        raise ConstraintViolation(f"violated: {text}")


def make_profile(family, p: float, n: int = 3, eps: float = 0.1, eps0: float = 0.5,
                 theta0: float = 0.25, theta1: float = 0.5, mu: float = 0.0,
                 alpha: float | None = None, transition: float = 0.1,
                 scale0: float = 1.0, scale1: float = 1.0) -> DataProfile:
    fam = _family(family)
    _require(p > 1, "p > 1")
    _require(0 < eps0 < 1, "0 < eps0 < 1")
    _require(0 < eps < eps0, "0 < eps < eps0")
    _require(0 < transition < 1, "0 < transition < 1")

    if fam is Family.SCHWARZSCHILD:
        _require(n == 3, "n = 3 for the Schwarzschild family")
        _require(0 <= mu < eps0, "0 <= mu < eps0")
        _require(0 < theta0 < theta1 < 1, "0 < theta0 < theta1 < 1")
        q = 1 + 2 * p - p * p
        _require(eps0 < q, "eps0 < 1 + 2p - p^2")
        _require(q - mu > 0, "1 + 2p - p^2 - mu > 0 (p below the Strauss exponent)")
        alpha_ = 2 / (p - 1) - 1 - mu / (p * (p - 1))
        N = p * (p - 1) / (q - mu)
        _require(alpha_ > 1 / p, "alpha > 1/p")
        L = eps ** (-N)
    elif fam is Family.KERR:
        _require(n == 3, "n = 3 for the Kerr family")
        _require(0 < theta0 < theta1 < 1, "0 < theta0 < theta1 < 1")
        _require(2 * theta1 > (p + 1) * theta0, "2 theta1 > (p+1) theta0")
        q = 1 + 2 * p - p * p
        _require(q > 0, "p below the Strauss exponent 1 + sqrt(2)")
        N = p * (p - 1) / q
        alpha_ = 2 / (p - 1) - 1
        L = eps ** (-N)
        _require(6 * (1 - transition) >= 5, "collar keeps the support inside [5L, 10L]")
    else:
        _require(n >= 2, "n >= 2")
        _require(p < strauss_root(n), "p below the Strauss exponent")
        _require(alpha is not None, "alpha must be given for the AF family")
        upper = 2 / (p - 1) - (n - 1) / 2
        _require(1 / p < alpha < upper, f"1/p < alpha < 2/(p-1) - (n-1)/2 = {upper:g}")
        _require(0 < 2 * theta0 < theta1 < 1, "0 < 2 theta0 < theta1 < 1")
        alpha_ = float(alpha)
        N = p / (alpha_ * p - 1)
        L = eps ** (-N)

    return DataProfile(fam, float(p), int(n), float(eps), float(eps0), float(theta0),
                       float(theta1), float(mu), float(alpha_), float(N), float(L),
                       float(transition), float(scale0), float(scale1))


def profile_from_text(text: str) -> DataProfile:
    """Parse the ``key = value`` block written by :meth:`DataProfile.to_text`."""
    kv = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConstraintViolation(f"malformed profile line: {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        kv[k] = v
    if "family" not in kv:
        raise ConstraintViolation("profile block needs a 'family' key")
    fl = {k: float(kv[k]) for k in ("p", "eps", "eps0", "theta0", "theta1", "mu",
                                    "transition", "alpha") if k in kv}
    return make_profile(kv["family"], n=int(kv.get("n", 3)), **fl)


# --------------------------------------------------------------------------
# smooth extension
# --------------------------------------------------------------------------


def smooth_step(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0.0) & (s < 1.0)
    if np.any(mid):
        sm = s[mid]
        a = np.exp(-1.0 / sm)
        b = np.exp(-1.0 / (1.0 - sm))
        out[mid] = a / (a + b)
    return out if out.ndim else float(out)


def cutoff(profile: DataProfile, r):
    lo, hi = profile.core
    w = profile.collar
    r = np.asarray(r, dtype=float)
    return smooth_step((r - (lo - w)) / w) * smooth_step(((hi + w) - r) / w)


def evaluate_data(profile: DataProfile, r):
    """``(u0(r), u1(r))`` for the smoothly extended profile."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("r must be positive")
    chi = cutoff(profile, r)
    u0, u1 = profile.raw(r)
    return u0 * chi, u1 * chi


def outgoing_sign_threshold(p: float, theta0: float, theta1: float, mu: float = 0.0) -> float:
    """Largest eps0 for which the Schwarzschild data keep ``(d_t + d_r*)(r u) > 0`` on the core.

    On the core that derivative is ``(eps0^-theta1 - alpha f eps0^-theta0) r^(-alpha-1)``
    with ``0 < f < 1``, so positivity for every ``M`` is ``eps0^(theta0-theta1) >= alpha``.
    """
    if not theta1 > theta0:
        raise ConstraintViolation("violated: theta1 > theta0")
    alpha = 2 / (p - 1) - 1 - mu / (p * (p - 1))
    if alpha <= 1.0:
        return 1.0
    return alpha ** (-1.0 / (theta1 - theta0))


def outgoing_derivative(profile: DataProfile, M: float, r):
    """``(d_t + d_r*)(r u)`` at ``t = 0`` for the extended Schwarzschild data."""
    r = np.asarray(r, dtype=float)
    f = 1.0 - 2.0 * M / r
    u0, u1 = evaluate_data(profile, r)
    h = 1e-6 * r
    d_ru0 = ((r + h) * evaluate_data(profile, r + h)[0] - (r - h) * evaluate_data(profile, r - h)[0]) / (2 * h)
    return r * u1 + f * d_ru0


# --------------------------------------------------------------------------
# norm audit
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _collar_operators(n: int, order: int):
    """Lambdified ``D^order`` of ``r^-beta * step(side*(r - edge)/w)`` in ``(r, beta, edge, w, side)``.

    ``D`` alternates gradient and Laplacian so that ``|D^m f|`` is the integrand
    of the homogeneous ``H^m`` seminorm for radial ``f``.
    """
    import sympy as sp

    r, beta, edge, w, side = sp.symbols("r beta edge w side", real=True)
    s = side * (r - edge) / w
    step = sp.exp(-1 / s) / (sp.exp(-1 / s) + sp.exp(-1 / (1 - s)))
    f = r ** (-beta) * step
    g = f
    for _ in range(order // 2):
        g = sp.diff(g, r, 2) + (n - 1) / r * sp.diff(g, r)
    if order % 2:
        g = sp.diff(g, r)
    return sp.lambdify((r, beta, edge, w, side), g, modules="numpy")


def _power_coeff(beta: float, n: int, order: int) -> float:
    """``D^order r^-beta = c r^(-beta-order)``."""
    c, b = 1.0, beta
    for _ in range(order // 2):
        c *= b * (b + 2 - n)
        b += 2
    if order % 2:
        c *= -b
    return c


def _sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def radial_seminorm(amp: float, beta: float, n: int, order: int, core, collar: float,
                    include_collar: bool = True) -> float:
    """``||amp r^-beta chi||_{H^order}`` for a radial function in ``R^n``."""
    if amp == 0.0:
        return 0.0
    lo, hi = core
    c = _power_coeff(beta, n, order)
    e = -2 * beta - 2 * order + n - 1
    if e == -1:
        core_int = math.log(hi / lo)
    else:
        core_int = (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
    total = c * c * core_int
    if include_collar:
        op = _collar_operators(n, order)
        left = lambda x: op(x, beta, lo - collar, collar, 1.0) ** 2 * x ** (n - 1)  # noqa: E731
        right = lambda x: op(x, beta, hi + collar, collar, -1.0) ** 2 * x ** (n - 1)  # noqa: E731
        total += integrate.quad(left, lo - collar, lo, epsabs=0, epsrel=1e-10, limit=200)[0]
        total += integrate.quad(right, hi, hi + collar, epsabs=0, epsrel=1e-10, limit=200)[0]
    return abs(amp) * math.sqrt(_sphere_area(n) * total)


@dataclass(frozen=True)
class NormAudit:
    orders: tuple[int, ...]
    norms: tuple[float, ...]
    measured_exponents: tuple[float, ...]
    expected_exponents: tuple[float, ...]
    bound: float
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def _order_norm(profile: DataProfile, m: int, scale: float = 1.0) -> float:
    lo, hi = profile.core
    core = (lo * scale, hi * scale)
    collar = profile.collar * scale
    n = profile.n
    val = radial_seminorm(profile.amp0, profile.decay0, n, m, core, collar)
    if m >= 1:
        val += radial_seminorm(profile.amp1, profile.decay1, n, m - 1, core, collar)
    return val


def norm_scale_audit(profile: DataProfile, k_max: int = 2) -> NormAudit:
    """Integer-order norms of the data and their scaling in the support radius.

    Order ``m`` reports ``||u0||_{H^m} + ||u1||_{H^(m-1)}`` (order 0 reports
    ``||u0||_{L^2}`` alone). Each order must scale like ``R^(n/2 - m - beta)``
    under dilation of the support and, for ``m >= 1``, stay below ``eps/eps0``.
    """
    if not 0 <= k_max <= 3:
        raise DomainError("k_max must lie in 0..3")
    bound = profile.eps / profile.eps0
    orders, norms, meas, expect, bad = [], [], [], [], []
    for m in range(k_max + 1):
        q = _order_norm(profile, m)
        expected = profile.n / 2 - m - profile.decay0
        if q > 0:
            q2 = _order_norm(profile, m, scale=2.0)
            measured = math.log(q2 / q) / math.log(2.0)
        else:
            measured = expected
        orders.append(m)
        norms.append(q)
        meas.append(measured)
        expect.append(expected)
        if abs(measured - expected) > 1e-6 * max(1.0, abs(expected)):
            bad.append(f"order {m}: scaling exponent {measured:.6f} != {expected:.6f}")
        if m >= 1 and q > bound:
            bad.append(f"order {m}: norm {q:.4g} exceeds eps/eps0 = {bound:.4g}")
    return NormAudit(tuple(orders), tuple(norms), tuple(meas), tuple(expect), bound, tuple(bad))


def with_amplitudes(profile: DataProfile, scale0: float, scale1: float) -> DataProfile:
    return replace(profile, scale0=scale0, scale1=scale1)
