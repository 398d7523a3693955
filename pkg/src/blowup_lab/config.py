"""Flat ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment, lists are comma separated.

Keys (defaults in brackets):

    mode            lifespan | surrogate                          [lifespan]
    metric          schwarzschild | kerr | minkowski | reissner-nordstrom | custom
                                                                  [schwarzschild]
    M, a, Q         metric parameters                             [1, 0, 0.5]
    g_tt g_tr g_rr  expressions in t, r for metric = custom
    family          schwarzschild | kerr | af                     [schwarzschild]
    p, n            power and dimension                           [2, 3]
    eps0 theta0 theta1 mu alpha transition   profile parameters   [0.21 0.9 0.99 0 - 0.1]
    eps             strictly decreasing list
    h_divisions     grid spacings as h = eps^-N / k, increasing k  [25, 50, 100]
    h               absolute spacings (decreasing); overrides h_divisions
    threshold       absolute blow-up threshold
    threshold_factor  threshold relative to sup|W| at t = 0       [1e4]
    t_max_factor    evolution horizon in units of eps^-N          [20]
    nonlinearity    abs | signed | positive | zero                [positive]
    amplitude       surrogate mode: W(0) = amplitude * eps        [1]
    coefficient     surrogate mode: G = coefficient * F(W)         [1]
    width           surrogate mode: r* extent of the slab          [auto]
    out             output directory                              [out]
    workers         process count                                 [1]
    formats         csv, json, svg                                [csv, json, svg]
    timing          on | off (off writes 0 seconds, keeping outputs byte-stable) [off]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, ConstraintViolation
from .initial_data import DataProfile, make_profile
from .metrics import MetricSpec, custom_from_expressions, metric_from_preset
from .nonlinearity import canonical

_FLOAT_KEYS = ("M", "a", "Q", "p", "eps0", "theta0", "theta1", "mu", "alpha", "transition",
               "threshold", "threshold_factor", "t_max_factor", "amplitude", "coefficient", "width")
_LIST_KEYS = ("eps", "h_divisions", "h", "formats")
_KNOWN = set(_FLOAT_KEYS) | set(_LIST_KEYS) | {
    "mode", "metric", "family", "n", "nonlinearity", "out", "workers", "timing",
    "g_tt", "g_tr", "g_rr",
}


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {value!r}") from None


def _floats(key: str, value: str) -> tuple[float, ...]:
    parts = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(_float(key, v) for v in parts)


@dataclass(frozen=True)
class SweepConfig:
    mode: str = "lifespan"
    metric: str = "schwarzschild"
    M: float = 1.0
    a: float = 0.0
    Q: float = 0.5
    expressions: tuple[tuple[str, str], ...] = ()
    family: str = "schwarzschild"
    p: float = 2.0
    n: int = 3
    eps0: float = 0.21
    theta0: float = 0.9
    theta1: float = 0.99
    mu: float = 0.0
    alpha: float | None = None
    transition: float = 0.1
    eps: tuple[float, ...] = ()
    h_divisions: tuple[float, ...] = (25.0, 50.0, 100.0)
    h: tuple[float, ...] = ()
    threshold: float | None = None
    threshold_factor: float = 1e4
    t_max_factor: float = 20.0
    nonlinearity: str = "positive"
    amplitude: float = 1.0
    coefficient: float = 1.0
    width: float | None = None
    out: str = "out"
    workers: int = 1
    formats: tuple[str, ...] = ("csv", "json", "svg")
    timing: bool = False

    def __post_init__(self):
        if self.mode not in ("lifespan", "surrogate"):
            raise ConfigError(f"mode must be 'lifespan' or 'surrogate', got {self.mode!r}")
        if self.eps and any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps list must be strictly decreasing")
        if self.mode == "lifespan" and any(e >= self.eps0 for e in self.eps):
            raise ConfigError(f"every eps must satisfy the data-family constraint 0 < eps < eps0 = {self.eps0:g}")
        if any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be positive")
        grids = self.h if self.h else self.h_divisions
        if len(grids) < 2:
            raise ConfigError("need at least two grid spacings for the refinement error bar")
        if self.h and any(b >= a for a, b in zip(self.h, self.h[1:])):
            raise ConfigError("h list must be strictly decreasing")
        if not self.h and any(b <= a for a, b in zip(self.h_divisions, self.h_divisions[1:])):
            raise ConfigError("h_divisions must be strictly increasing")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = set(self.formats) - {"csv", "json", "svg"}
        if bad:
            raise ConfigError(f"unknown formats: {sorted(bad)}")
        try:
            canonical(self.nonlinearity)
        except ConfigError:
            raise
        if self.mode == "lifespan":
            self.profile(self.eps[0] if self.eps else self.eps0 / 2)

    # -- builders ------------------------------------------------------------

    def build_metric(self) -> MetricSpec:
        if self.metric == "custom":
            exprs = dict(self.expressions)
            if not exprs:
                raise ConfigError("metric = custom needs g_tt, g_rr (and optionally g_tr)")
            return custom_from_expressions(exprs)
        params = {"minkowski": {}, "schwarzschild": {"M": self.M}, "kerr": {"M": self.M, "a": self.a},
                  "reissner-nordstrom": {"M": self.M, "Q": self.Q}}
        if self.metric not in params:
            raise ConfigError(f"unknown metric {self.metric!r}")
        return metric_from_preset(self.metric, **params[self.metric])

    def profile(self, eps: float) -> DataProfile:
        try:
            return make_profile(self.family, self.p, n=self.n, eps=eps, eps0=self.eps0,
                                theta0=self.theta0, theta1=self.theta1, mu=self.mu,
                                alpha=self.alpha, transition=self.transition)
        except ConstraintViolation as exc:
            raise ConfigError(f"data-family constraint {exc}") from None

    def grid(self, eps: float) -> tuple[float, ...]:
        if self.h:
            return self.h
        L = self.profile(eps).L if self.mode == "lifespan" else 1.0
        return tuple(L / k for k in self.h_divisions)

    # -- identity --------------------------------------------------------------

    def physics(self) -> dict:
        """Fields that change results; ``out``, ``workers``, ``formats`` and ``timing`` do not."""
        d = asdict(self)
        for k in ("out", "workers", "formats", "timing", "eps"):
            d.pop(k)
        return d

    def job_key(self, eps: float, h: float) -> str:
        payload = json.dumps({"config": self.physics(), "eps": eps, "h": h}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:20]

    def to_text(self) -> str:
        d = asdict(self)
        lines = []
        for k, v in d.items():
            if k == "expressions":
                lines.extend(f"{name} = {expr}" for name, expr in v)
                continue
            if v is None or v == ():
                continue
            if isinstance(v, bool):
                v = "on" if v else "off"
            elif isinstance(v, tuple):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def config_from_text(text: str, **overrides) -> SweepConfig:
    kv = parse_kv(text)
    args: dict = {}
    exprs = []
    for key, value in kv.items():
        if key in ("g_tt", "g_tr", "g_rr"):
            exprs.append((key, value))
        elif key in _FLOAT_KEYS:
            args[key] = _float(key, value)
        elif key == "formats":
            args[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _LIST_KEYS:
            args[key] = _floats(key, value)
        elif key in ("n", "workers"):
            try:
                args[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key}: not an integer: {value!r}") from None
        elif key == "timing":
            if value.lower() not in ("on", "off", "true", "false", "1", "0"):
                raise ConfigError(f"timing must be on or off, got {value!r}")
            args[key] = value.lower() in ("on", "true", "1")
        else:
            args[key] = value
    if exprs:
        args["expressions"] = tuple(sorted(exprs))
    args.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SweepConfig(**args)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> SweepConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return config_from_text(text, **overrides)
