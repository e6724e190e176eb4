"""Standard-normal primitives and a bracketing univariate maximizer.

``std_normal_cdf`` evaluates the smaller tail with ``math.erfc`` and returns
the larger one as its exact complement, so ``cdf(x) + cdf(-x) == 1.0`` holds
bit-for-bit and the absolute error stays near 1e-16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NumericError

__all__ = [
    "Tolerance",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_inv_cdf",
    "find_max_1d",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Acklam's rational approximation, |relative error| < 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("abs_tol and rel_tol cannot both be zero")
        if self.max_iter <= 0:
            raise DomainError("max_iter must be positive")

    def width(self, x: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(x))


def _require_finite(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def std_normal_cdf(x: float) -> float:
    x = _require_finite(x)
    if x < 0.0:
        return 0.5 * math.erfc(-x / _SQRT2)
    return 1.0 - 0.5 * math.erfc(x / _SQRT2)


def std_normal_pdf(x: float) -> float:
    x = _require_finite(x)
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _acklam_lower(p: float) -> float:
    # valid for 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def _inv_cdf_lower(p: float) -> float:
    x = _acklam_lower(p)
    # Halley steps on the lower tail, where erfc keeps full relative precision.
    for _ in range(2):
        e = 0.5 * math.erfc(-x / _SQRT2) - p
        u = e * _SQRT_2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def std_normal_inv_cdf(p: float) -> float:
    """Quantile of the standard normal distribution.

    Raises ``DomainError`` unless ``0 < p < 1``; callers are expected to clamp
    reserve-derived probabilities themselves.
    """
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"probability must lie strictly inside (0, 1), got {p!r}")
    if p <= 0.5:
        return _inv_cdf_lower(p)
    # 1 - p is exact for p in [0.5, 1)
    return -_inv_cdf_lower(1.0 - p)


def _checked(f: Callable[[float], float], x: float) -> float:
    y = float(f(x))
    if not math.isfinite(y):
        raise NumericError(f"objective is not finite at x={x!r}: {y!r}", x=x)
    return y


def find_max_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance | None = None,
    grid: int = 256,
) -> tuple[float, float]:
    """Maximize ``f`` on ``[lo, hi]``.

    A uniform grid brackets the best sample, then golden-section search refines
    inside the neighbouring cells. The returned value is never below any point
    that was evaluated, endpoints included.
    """
    tol = tol or Tolerance()
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise DomainError(f"need finite lo < hi, got [{lo}, {hi}]")
    if grid < 3:
        raise DomainError("grid needs at least 3 points")

    xs = np.linspace(lo, hi, grid)
    ys = [_checked(f, x) for x in xs]
    i = int(np.argmax(ys))
    best_x, best_y = float(xs[i]), ys[i]

    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, grid - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = _checked(f, c), _checked(f, d)
    for _ in range(tol.max_iter):
        if b - a <= tol.width(0.5 * (a + b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = _checked(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = _checked(f, d)

    for x, y in ((c, fc), (d, fd)):
        if y > best_y:
            best_x, best_y = x, y
    return best_x, best_y
