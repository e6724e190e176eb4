"""The covered-call replicating CFMM.

Reserves are tracked per unit of liquidity: ``rx`` risky units in (0, 1) and
``ry`` stable units. The trading function is

    phi(rx, ry) = ry - K * N(N^-1(1 - rx) - sigma * sqrt(tau))

and its value ``k`` is stored on the state after every mutation. Since
``N^-1(1 - rx) == -N^-1(rx)`` the implementation always works with ``rx``
directly, which avoids cancellation when ``rx`` is tiny.

Fees follow the retained-input convention: a fraction ``gamma`` of the input
is credited when solving for the output, while the whole input enters the
reserves, so each fee-paying trade strictly raises ``k``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Literal, NamedTuple

from ._io import dec, undec
from .blackscholes import OptionSpec, covered_call_value
from .errors import DomainError, ExpiryError, LiquidityBoundError
from .numerics import std_normal_cdf as ncdf
from .numerics import std_normal_inv_cdf as ninv

log = logging.getLogger(__name__)

__all__ = [
    "RX_MIN",
    "RX_MAX",
    "RISKY_IN",
    "STABLE_IN",
    "PoolParams",
    "PoolState",
    "SwapReceipt",
    "create_pool",
    "pool_from_reserves",
    "risky_from_price",
    "stable_from_risky",
    "price_from_risky",
    "invariant",
    "report_price",
    "swap",
    "advance_time",
    "arbitrage_align",
    "lpt_value",
    "settle",
    "snapshot_to_json",
    "snapshot_from_json",
]

RX_MIN = 1e-9
RX_MAX = 1.0 - 1e-9
RISKY_IN = "risky-in"
STABLE_IN = "stable-in"
Direction = Literal["risky-in", "stable-in"]

# time steps landing this close to expiry snap onto it
_EXPIRY_SNAP = 1e-12


@dataclass(frozen=True)
class PoolParams:
    strike: float
    sigma: float
    expiry: float
    gamma: float = 0.997

    def __post_init__(self):
        if not (self.strike > 0 and math.isfinite(self.strike)):
            raise DomainError(f"strike must be positive, got {self.strike!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not math.isfinite(self.expiry):
            raise DomainError("expiry must be finite")
        if not (0.0 < self.gamma <= 1.0):
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma!r}")

    def tau(self, t: float) -> float:
        return max(self.expiry - t, 0.0)

    def vol_sqrt_tau(self, t: float) -> float:
        return self.sigma * math.sqrt(self.tau(t))

    def option_spec(self, t: float) -> OptionSpec:
        return OptionSpec(self.strike, self.sigma, self.tau(t))


@dataclass(frozen=True)
class PoolState:
    rx: float
    ry: float
    k: float
    t: float
    liquidity: float = 1.0

    def expired(self, params: PoolParams) -> bool:
        return self.t >= params.expiry

    @property
    def total_risky(self) -> float:
        return self.rx * self.liquidity

    @property
    def total_stable(self) -> float:
        return self.ry * self.liquidity


class SwapReceipt(NamedTuple):
    direction: str
    amount_in: float
    fee_paid: float
    amount_out: float
    k_before: float
    k_after: float
    price_after: float


def _curve(rx: float, params: PoolParams, t: float) -> float:
    """Stable reserve on the ``k = 0`` level set."""
    return params.strike * ncdf(-ninv(rx) - params.vol_sqrt_tau(t))


def _check_rx(rx: float) -> float:
    rx = float(rx)
    if not (0.0 < rx < 1.0):
        raise DomainError(f"risky reserve must lie in (0, 1), got {rx!r}")
    return rx


def _check_live(params: PoolParams, t: float) -> None:
    if t >= params.expiry:
        raise ExpiryError(f"pool expired (t={t!r}, T={params.expiry!r})")


def _clamp(rx: float) -> float:
    return min(max(rx, RX_MIN), RX_MAX)


def _clamp_target(rx: float) -> float:
    # keeps round-trip error in the stable-in solve from crossing the hard bound
    return min(max(rx, 2 * RX_MIN), 1.0 - 2 * RX_MIN)


def risky_from_price(S: float, params: PoolParams, t: float) -> float:
    """Risky reserve per unit liquidity at which the pool reports price ``S``.

    The result is not clamped; it tends to 0 (1) as ``S`` grows (shrinks).
    """
    _check_live(params, t)
    if not (S > 0 and math.isfinite(S)):
        raise DomainError(f"price must be positive, got {S!r}")
    sv = params.vol_sqrt_tau(t)
    return ncdf(-math.log(S / params.strike) / sv - 0.5 * sv)


def stable_from_risky(rx: float, k: float, params: PoolParams, t: float) -> float:
    if t > params.expiry:
        raise ExpiryError("time is past expiry")
    return _curve(_check_rx(rx), params, t) + k


def price_from_risky(rx: float, params: PoolParams, t: float) -> float:
    _check_live(params, t)
    sv = params.vol_sqrt_tau(t)
    return params.strike * math.exp(-ninv(_check_rx(rx)) * sv - 0.5 * sv * sv)


def invariant(state: PoolState, params: PoolParams) -> float:
    return state.ry - _curve(state.rx, params, state.t)


def report_price(state: PoolState, params: PoolParams) -> float:
    return price_from_risky(state.rx, params, state.t)


def create_pool(
    params: PoolParams,
    price: float,
    t: float = 0.0,
    liquidity: float = 1.0,
    k: float = 0.0,
) -> PoolState:
    """Mint a pool reporting ``price`` (reserves clamped) with invariant ``k``."""
    if not liquidity > 0:
        raise DomainError("liquidity must be positive")
    rx = _clamp(risky_from_price(price, params, t))
    ry = stable_from_risky(rx, k, params, t)
    return PoolState(rx, ry, ry - _curve(rx, params, t), t, liquidity)


def pool_from_reserves(
    params: PoolParams, rx: float, ry: float, t: float = 0.0, liquidity: float = 1.0
) -> PoolState:
    if not (RX_MIN <= rx <= RX_MAX):
        raise LiquidityBoundError(f"risky reserve {rx!r} outside [{RX_MIN}, {RX_MAX}]")
    if ry < 0:
        raise DomainError("stable reserve must be non-negative")
    if not liquidity > 0:
        raise DomainError("liquidity must be positive")
    return PoolState(rx, ry, ry - _curve(rx, params, t), t, liquidity)


def swap(
    state: PoolState, params: PoolParams, direction: Direction, amount_in: float
) -> tuple[PoolState, SwapReceipt]:
    """Trade ``amount_in`` (whole-pool units) against the pool.

    risky-in: the output solves ``ry' = curve(rx + gamma*d) + k``.
    stable-in: the new risky reserve solves
    ``rx' = N(-N^-1((ry + gamma*d - k)/K) - sigma*sqrt(tau))``.
    """
    _check_live(params, state.t)
    if not (amount_in > 0 and math.isfinite(amount_in)):
        raise DomainError(f"amount_in must be positive, got {amount_in!r}")
    L = state.liquidity
    d = amount_in / L
    g = params.gamma
    k0 = state.k

    if direction == RISKY_IN:
        rx_new = state.rx + d
        if rx_new > RX_MAX:
            raise LiquidityBoundError("risky reserve would exceed its upper bound")
        ry_new = _curve(state.rx + g * d, params, state.t) + k0
        out = (state.ry - ry_new) * L
    elif direction == STABLE_IN:
        ry_new = state.ry + d
        q = (state.ry + g * d - k0) / params.strike
        if not (0.0 < q < 1.0):
            raise LiquidityBoundError("stable input exceeds the pool's curve range")
        rx_new = ncdf(-ninv(q) - params.vol_sqrt_tau(state.t))
        if rx_new < RX_MIN:
            raise LiquidityBoundError("risky reserve would fall below its lower bound")
        out = (state.rx - rx_new) * L
    else:
        raise DomainError(f"unknown swap direction {direction!r}")

    new = PoolState(rx_new, ry_new, 0.0, state.t, L)
    new = replace(new, k=invariant(new, params))
    receipt = SwapReceipt(
        direction, amount_in, (1.0 - g) * amount_in, out, k0, new.k,
        price_from_risky(rx_new, params, state.t),
    )
    return new, receipt


def advance_time(state: PoolState, params: PoolParams, dt: float) -> PoolState:
    """Move the clock forward with reserves fixed; ``k`` is re-derived."""
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"time step must be positive, got {dt!r}")
    _check_live(params, state.t)
    t = state.t + dt
    if t >= params.expiry - _EXPIRY_SNAP * max(1.0, abs(params.expiry)):
        t = params.expiry
    new = replace(state, t=t)
    return replace(new, k=invariant(new, params))


def arbitrage_align(
    state: PoolState, params: PoolParams, market_price: float
) -> tuple[PoolState, SwapReceipt | None]:
    """Trade the pool to the edge of the no-arbitrage band around ``market_price``.

    Selling risky into the pool pays ``gamma * S`` at the margin and buying costs
    ``S / gamma``, so no trade is profitable while
    ``gamma * S <= market_price <= S / gamma``.
    """
    _check_live(params, state.t)
    g = params.gamma
    S = report_price(state, params)
    if g * S <= market_price <= S / g:
        return state, None

    if market_price > S / g:
        target = _clamp_target(risky_from_price(g * market_price, params, state.t))
        if target >= state.rx:
            return state, None
        ry_target = stable_from_risky(target, state.k, params, state.t)
        amount = (ry_target - state.ry) / g * state.liquidity
        direction = STABLE_IN
    else:
        target = _clamp_target(risky_from_price(market_price / g, params, state.t))
        if target <= state.rx:
            return state, None
        amount = (target - state.rx) * state.liquidity
        direction = RISKY_IN
    if not amount > 0:
        return state, None
    return swap(state, params, direction, amount)


def lpt_value(state: PoolState, params: PoolParams, S: float) -> float:
    """Value of one liquidity unit in stable units: covered call plus ``k``."""
    if state.expired(params):
        raise ExpiryError("pool expired; use settle")
    return covered_call_value(S, params.option_spec(state.t)) + state.k


def settle(state: PoolState, params: PoolParams, terminal_price: float) -> tuple[float, float]:
    """Per-unit payout ``(risky_out, stable_out)`` of an expired pool.

    At or above the strike the position is all stable, ``(0, K + k)``. Below
    it is one risky unit plus ``k``, floored at zero stable.
    """
    if not state.expired(params):
        raise ExpiryError("pool has not expired")
    if not terminal_price > 0:
        raise DomainError("terminal price must be positive")
    if terminal_price >= params.strike:
        return 0.0, params.strike + state.k
    if state.k < 0:
        log.info("terminal error: invariant %.6g below zero, stable payout floored", state.k)
        return 1.0, 0.0
    return 1.0, state.k


_SNAPSHOT_KEYS = ("K", "sigma", "T", "gamma", "Rx", "Ry", "k", "t", "L")


def snapshot_to_json(state: PoolState, params: PoolParams) -> str:
    values = (params.strike, params.sigma, params.expiry, params.gamma,
              state.rx, state.ry, state.k, state.t, state.liquidity)
    return json.dumps({key: dec(v) for key, v in zip(_SNAPSHOT_KEYS, values)})


def snapshot_from_json(text: str) -> tuple[PoolState, PoolParams]:
    raw = json.loads(text)
    missing = set(_SNAPSHOT_KEYS) - set(raw)
    extra = set(raw) - set(_SNAPSHOT_KEYS)
    if missing or extra:
        raise DomainError(f"bad snapshot keys: missing={sorted(missing)} extra={sorted(extra)}")
    v = {key: undec(raw[key]) for key in _SNAPSHOT_KEYS}
    params = PoolParams(v["K"], v["sigma"], v["T"], v["gamma"])
    return PoolState(v["Rx"], v["Ry"], v["k"], v["t"], v["L"]), params
