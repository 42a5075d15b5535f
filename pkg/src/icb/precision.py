"""Working-precision control for the numeric layer.

All floating-point work runs through mpmath at a binary precision that
defaults to 128 bits and can be overridden by the ICB_PRECISION environment
variable or per call. Symbolic computation never touches this module.
"""

import os
from contextlib import contextmanager

from mpmath import mp

from .errors import UsageError

DEFAULT_PRECISION_BITS = 128
MIN_PRECISION_BITS = 64


def configured_precision():
    """Binary precision in bits: ICB_PRECISION if set, else the default."""
    raw = os.environ.get("ICB_PRECISION")
    if raw is None:
        return DEFAULT_PRECISION_BITS
    try:
        bits = int(raw)
    except ValueError:
        raise UsageError("ICB_PRECISION must be an integer, got %r" % raw)
    return validate_precision(bits)


def validate_precision(bits):
    if bits < MIN_PRECISION_BITS:
        raise UsageError(
            "precision must be at least %d bits, got %d" % (MIN_PRECISION_BITS, bits)
        )
    return bits


@contextmanager
def working_precision(bits=None):
    """Context manager pinning mpmath's precision for a computation."""
    if bits is None:
        bits = configured_precision()
    else:
        bits = validate_precision(bits)
    old = mp.prec
    mp.prec = bits
    try:
        yield mp
    finally:
        mp.prec = old
