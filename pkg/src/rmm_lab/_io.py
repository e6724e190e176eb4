"""Decimal-string encoding for floats in snapshots, ledgers and reports.

``repr`` of a Python float is the shortest string that parses back to the
same double, so encode/decode is lossless on every platform.
"""

from __future__ import annotations

import math


def dec(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def undec(s: str | float | int) -> float:
    return float(s)
