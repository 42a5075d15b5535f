"""Exact engine for irregular Virasoro vertex operators, irregular
conformal blocks, and numerical Painleve II/III tau-function checks."""

__version__ = "0.1.0"
