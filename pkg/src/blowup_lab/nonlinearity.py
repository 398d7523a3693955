"""Power nonlinearities ``F_p``."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

NONLINEARITIES = ("abs", "signed", "positive", "zero")

_ALIASES = {
    "abs": "abs", "|u|^p": "abs",
    "signed": "signed", "odd": "signed",
    "positive": "positive", "positive-branch": "positive", "positive_branch": "positive",
    "zero": "zero", "none": "zero", "linear": "zero",
}


def canonical(flag: str) -> str:
    key = str(flag).strip().lower()
    if key not in _ALIASES:
        raise ConfigError(f"unknown nonlinearity {flag!r}; expected one of {NONLINEARITIES}")
    return _ALIASES[key]


def apply_nonlinearity(u, p: float, flag: str = "abs"):
    """``|u|^p``, ``|u|^(p-1) u``, ``max(u, 0)^p`` or ``0``."""
    flag = canonical(flag)
    u = np.asarray(u, dtype=float)
    if flag == "abs":
        return np.abs(u) ** p
    if flag == "signed":
        return np.abs(u) ** (p - 1) * u
    if flag == "positive":
        return np.maximum(u, 0.0) ** p
    return np.zeros_like(u)
