"""Numerical laboratory for small-data blow-up of semilinear waves on black-hole
and asymptotically flat backgrounds."""

__version__ = "0.1.0"
