"""Numerical laboratory for an improved critical exponential-integrability
inequality on mean-zero Sobolev functions in 2D.

Kept import-light on purpose: the command-line entry point configures
thread environment variables before the numeric stack loads.
"""

__version__ = "0.1.0"
