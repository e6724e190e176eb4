"""Black-Scholes values at zero interest rate.

Every payoff the replicating constructions are checked against lives here.
No discount factor appears anywhere: the rate is fixed at zero. Values carry
their denomination in the name (``*_risky`` per unit of the risky asset,
``*_cash`` in the stable asset) and ``tau == 0`` returns the terminal payoff.

At expiry a terminal price exactly at the strike is treated as in the money
for the cash-or-nothing call, matching the pool's settlement tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, ExpiryError
from .numerics import std_normal_cdf as ncdf

__all__ = [
    "OptionSpec",
    "Moneyness",
    "VanillaValues",
    "BinaryValues",
    "d1_d2",
    "covered_call_value",
    "vanilla_values",
    "binary_values",
]


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    sigma: float
    tau: float

    def __post_init__(self):
        if not (self.strike > 0 and math.isfinite(self.strike)):
            raise DomainError(f"strike must be positive, got {self.strike!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be non-negative, got {self.tau!r}")

    @property
    def vol_sqrt_tau(self) -> float:
        return self.sigma * math.sqrt(self.tau)


class Moneyness(NamedTuple):
    d1: float
    d2: float


class VanillaValues(NamedTuple):
    call_risky: float
    call_cash: float
    put_cash: float


class BinaryValues(NamedTuple):
    conc: float
    conp: float
    aonp_cash: float
    aonc_cash: float


def _check_price(S: float) -> float:
    S = float(S)
    if not (S > 0 and math.isfinite(S)):
        raise DomainError(f"price must be positive and finite, got {S!r}")
    return S


def d1_d2(S: float, spec: OptionSpec) -> Moneyness:
    S = _check_price(S)
    if spec.tau == 0:
        raise ExpiryError("d1/d2 diverge at tau = 0; use the terminal payoff")
    sv = spec.vol_sqrt_tau
    d1 = (math.log(S / spec.strike) + 0.5 * sv * sv) / sv
    return Moneyness(d1, d1 - sv)


def covered_call_value(S: float, spec: OptionSpec) -> float:
    """Long one risky unit, short one call: ``S*N(-d1) + K*N(d2)``."""
    S = _check_price(S)
    if spec.tau == 0:
        return min(S, spec.strike)
    d1, d2 = d1_d2(S, spec)
    return S * ncdf(-d1) + spec.strike * ncdf(d2)


def vanilla_values(S: float, spec: OptionSpec) -> VanillaValues:
    S = _check_price(S)
    K = spec.strike
    if spec.tau == 0:
        call_cash = max(S - K, 0.0)
        return VanillaValues(call_cash / S, call_cash, max(K - S, 0.0))
    d1, d2 = d1_d2(S, spec)
    # Evaluate the out-of-the-money leg from the normal tails and get the other
    # by parity; the direct in-the-money formula subtracts two near-equal terms.
    if S >= K:
        put_cash = K * ncdf(-d2) - S * ncdf(-d1)
        call_cash = (S - K) + put_cash
    else:
        call_cash = S * ncdf(d1) - K * ncdf(d2)
        put_cash = (K - S) + call_cash
    return VanillaValues(call_cash / S, call_cash, put_cash)


def binary_values(S: float, spec: OptionSpec) -> BinaryValues:
    S = _check_price(S)
    if spec.tau == 0:
        itm = S >= spec.strike
        return BinaryValues(float(itm), float(not itm), 0.0 if itm else S, S if itm else 0.0)
    d1, d2 = d1_d2(S, spec)
    return BinaryValues(ncdf(d2), ncdf(-d2), S * ncdf(-d1), S * ncdf(d1))
