"""Small input-checking helpers in the spirit of ``sklearn.utils.validation``."""

import math

import numpy as np

from .exceptions import InvalidModelError, SizingError


def check_finite(name, value, error=InvalidModelError):
    if not np.all(np.isfinite(np.asarray(value, dtype=complex))):
        raise error(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name, value, *, strict=True, error=InvalidModelError):
    check_finite(name, value, error)
    if (value <= 0) if strict else (value < 0):
        bound = "> 0" if strict else ">= 0"
        raise error(f"{name} must be {bound}, got {value!r}")
    return value


def check_interval(name, value, low, high, *, closed=(True, False), error=InvalidModelError):
    """Check ``low <= value < high`` (bounds closed according to ``closed``)."""
    check_finite(name, value, error)
    lo_ok = value >= low if closed[0] else value > low
    hi_ok = value <= high if closed[1] else value < high
    if not (lo_ok and hi_ok):
        lb = "[" if closed[0] else "("
        rb = "]" if closed[1] else ")"
        raise error(f"{name} must lie in {lb}{low}, {high}{rb}, got {value!r}")
    return value


def as_float_array(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_uniform_grid(x, name="grid", rtol=1e-9, min_points=2):
    """Return the spacing of a strictly increasing, uniformly spaced 1-D grid."""
    x = as_float_array(x, name)
    if x.ndim != 1 or x.size < min_points:
        raise SizingError(f"{name} must be 1-D with at least {min_points} points")
    steps = np.diff(x)
    step = (x[-1] - x[0]) / (x.size - 1)
    if step <= 0 or np.any(steps <= 0):
        raise SizingError(f"{name} must be strictly increasing")
    scale = max(abs(step), rtol * max(abs(x[0]), abs(x[-1])))
    if np.max(np.abs(steps - step)) > max(rtol * scale, 64 * np.finfo(float).eps * np.max(np.abs(x))):
        raise SizingError(f"{name} is not uniformly spaced to 1 part in {1 / rtol:.0e}")
    return step


def next_pow2(n):
    return 1 << max(0, math.ceil(math.log2(max(int(n), 1))))
