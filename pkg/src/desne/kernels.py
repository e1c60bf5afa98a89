"""Scalar math kernels modeled on the sampling circuit's arithmetic units.

The exponential and base-2 logarithm use hyperbolic CORDIC, the reciprocal
uses Newton iteration. Everything runs in double precision and accepts
scalars or numpy arrays. :class:`MathBackend` bundles either these kernels
or the numpy reference functions so the affinity code can switch between
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "KernelConfig",
    "MathBackend",
    "get_backend",
    "kexp",
    "klog2",
    "krecip",
    "newton_iterates",
]

LN2 = math.log(2.0)

# Shift indices that must be executed twice for hyperbolic CORDIC to converge
# (k, 3k + 1, ...).
_REPEATS = (4, 13, 40, 121)


@dataclass(frozen=True)
class KernelConfig:
    cordic_iterations: int = 24
    newton_iterations: int = 5
    backend: str = "reference"

    def __post_init__(self):
        if self.cordic_iterations < 8:
            raise ValueError("cordic_iterations must be >= 8")
        if self.newton_iterations < 1:
            raise ValueError("newton_iterations must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown math backend {self.backend!r}")


@lru_cache(maxsize=None)
def _schedule(iterations):
    """Shift sequence, per-step atanh(2**-i) table and the inverse gain."""
    shifts = []
    for i in range(1, iterations + 1):
        shifts.append(i)
        if i in _REPEATS:
            shifts.append(i)
    shifts = np.array(shifts)
    pow2 = np.ldexp(1.0, -shifts)
    angles = np.arctanh(pow2)
    gain = float(np.prod(np.sqrt(1.0 - pow2 * pow2)))
    return pow2, angles, 1.0 / gain


def _cordic_rotate(z, iterations):
    """Rotation mode: returns cosh(z) + sinh(z) for |z| < 1.118."""
    pow2, angles, inv_gain = _schedule(iterations)
    z = np.array(z, dtype=np.float64)
    x = np.full_like(z, inv_gain)
    y = np.zeros_like(z)
    dp = np.empty_like(z)
    t = np.empty_like(z)
    for p, a in zip(pow2, angles):
        # dp = d * 2**-i with d = sign(z); the shift-add pair updates in place.
        np.copysign(p, z, out=dp)
        np.multiply(y, dp, out=t)
        y += x * dp
        x += t
        z -= np.copysign(a, dp)
    # Residual angle is below atanh(2**-n); first-order completion.
    return (x + y) * (1.0 + z)


def _cordic_vector(x, y, iterations):
    """Vectoring mode: returns atanh(y / x) for |y / x| < 0.8."""
    pow2, angles, _ = _schedule(iterations)
    x = np.array(x, dtype=np.float64)
    y = np.array(y, dtype=np.float64)
    z = np.zeros_like(x)
    dp = np.empty_like(x)
    t = np.empty_like(x)
    for p, a in zip(pow2, angles):
        # d = -sign(y), driving y toward zero.
        np.copysign(p, -y, out=dp)
        np.multiply(y, dp, out=t)
        y += x * dp
        x += t
        z -= np.copysign(a, dp)
    return z + y / x


def kexp(x, iterations=24):
    """Exponential via range reduction ``x = k ln2 + r`` and CORDIC on ``r``.

    Saturates to 0 below the subnormal range and to inf above ~709.
    """
    arr = np.asarray(x, dtype=np.float64)
    k = np.clip(np.rint(arr / LN2), -1100.0, 1100.0)
    r = arr - k * LN2
    mant = np.where(r == 0.0, 1.0, _cordic_rotate(r, iterations))
    with np.errstate(over="ignore", under="ignore"):
        out = np.ldexp(mant, k.astype(np.int64))
    out = np.where(arr < -760.0, 0.0, out)
    out = np.where(arr > 720.0, np.inf, out)
    return out if out.ndim else float(out)


def klog2(x, iterations=24):
    """Base-2 logarithm: exponent split, then CORDIC on the mantissa."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0.0)):
        raise ValueError("klog2 domain error: input must be positive")
    m, e = np.frexp(arr)
    # Center the mantissa on 1 so that exact powers of two give exact results.
    low = m < math.sqrt(0.5)
    m = np.where(low, 2.0 * m, m)
    e = np.where(low, e - 1, e)
    # ln m = 2 atanh((m - 1) / (m + 1))
    ln_m = 2.0 * _cordic_vector(m + 1.0, m - 1.0, iterations)
    ln_m = np.where(m == 1.0, 0.0, ln_m)
    out = e + ln_m / LN2
    return out if out.ndim else float(out)


def _recip_seed(arr):
    m, e = np.frexp(np.abs(arr))
    # Negated exponent times a linear mantissa fit; |1 - x z0| <= 1/17.
    return np.copysign(np.ldexp(48.0 / 17.0 - 32.0 / 17.0 * m, -e), arr)


def newton_iterates(x, iterations=5):
    """All Newton iterates ``z_0 .. z_n`` of ``z <- z (2 - x z)``."""
    arr = np.asarray(x, dtype=np.float64)
    z = _recip_seed(arr)
    out = [z]
    for _ in range(iterations):
        z = z * (2.0 - arr * z)
        out.append(z)
    return out


def krecip(x, iterations=5):
    """Reciprocal by Newton iteration from an exponent-negation seed."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr == 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError("krecip domain error: input must be finite and nonzero")
    out = newton_iterates(arr, iterations)[-1]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MathBackend:
    """Elementwise exp / log2 / reciprocal used by the affinity code."""

    name: str
    cordic_iterations: int = 24
    newton_iterations: int = 5

    def exp(self, x):
        if self.name == "reference":
            return np.exp(x)
        return kexp(x, self.cordic_iterations)

    def log2(self, x):
        if self.name == "reference":
            return np.log2(x)
        return klog2(x, self.cordic_iterations)

    def recip(self, x):
        if self.name == "reference":
            return 1.0 / np.asarray(x, dtype=np.float64)
        return krecip(x, self.newton_iterations)


BACKENDS = ("reference", "cordic-newton")


def get_backend(name="reference", cfg=None):
    if name not in BACKENDS:
        raise ValueError(f"unknown math backend {name!r}")
    if cfg is None:
        return MathBackend(name)
    return MathBackend(name, cfg.cordic_iterations, cfg.newton_iterations)
