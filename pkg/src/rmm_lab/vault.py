"""Theta-vault epochs on the replicating pool, and the two ways to roll them.

An epoch runs one pool from mint to expiry against an exogenous price path.
At every step the clock advances and a myopic arbitrageur trades the pool to
the edge of its no-arbitrage band. Vault accounting closes exactly:

    initial_mark + fees - loss == terminal_mark

where ``fees`` is the market value of every retained swap fee and ``loss``
collects everything else (arbitrage losses gross of fees, minus revaluation
gains on held reserves, plus the settlement adjustment at expiry).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ._io import dec, undec
from .errors import DomainError, ExpiryError, PathMismatchError
from .pool import (
    RISKY_IN,
    RX_MAX,
    RX_MIN,
    PoolParams,
    PoolState,
    arbitrage_align,
    advance_time,
    create_pool,
    pool_from_reserves,
    risky_from_price,
    settle,
    stable_from_risky,
)

__all__ = [
    "PricePath",
    "SlippageModel",
    "VaultState",
    "EpochReport",
    "simulate_gbm",
    "simulate_gbm_batch",
    "run_epoch",
    "rollover_mispricing",
    "rollover_swap",
    "rollover_loss_table",
]


@dataclass(frozen=True)
class PricePath:
    times: np.ndarray
    prices: np.ndarray
    seed: int | None = None
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        prices = np.asarray(self.prices, dtype=float)
        if times.ndim != 1 or times.shape != prices.shape or times.size < 2:
            raise DomainError("times and prices must be equal-length 1-d arrays of length >= 2")
        if np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        if np.any(~(prices > 0)):
            raise DomainError("prices must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)


def simulate_gbm_batch(
    s0: float, mu: float, sigma: float, horizon: float, steps: int, seed: int, n_paths: int,
    t0: float = 0.0,
) -> np.ndarray:
    """``(n_paths, steps + 1)`` GBM prices; row 0 equals ``simulate_gbm`` for the same seed."""
    if not s0 > 0:
        raise DomainError("s0 must be positive")
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    if steps < 1 or n_paths < 1:
        raise DomainError("steps and n_paths must be >= 1")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    dt = horizon / steps
    z = np.random.default_rng(seed).standard_normal((n_paths, steps))
    incr = (mu - 0.5 * sigma * sigma) * dt + sigma * math.sqrt(dt) * z
    log_path = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(incr, axis=1)], axis=1)
    return s0 * np.exp(log_path)


def simulate_gbm(
    s0: float, mu: float, sigma: float, horizon: float, steps: int, seed: int, t0: float = 0.0
) -> PricePath:
    prices = simulate_gbm_batch(s0, mu, sigma, horizon, steps, seed, 1, t0)[0]
    times = t0 + horizon * np.arange(steps + 1) / steps
    times[-1] = t0 + horizon
    model = {"s0": s0, "mu": mu, "sigma": sigma, "horizon": horizon, "steps": steps}
    return PricePath(times, prices, seed, model)


@dataclass(frozen=True)
class SlippageModel:
    """External-market execution: selling value ``v`` returns ``v / (1 + (v/depth)**exponent)``.

    ``exponent = 1`` is constant-product impact with ``depth`` in stable units.
    """

    depth: float
    exponent: float = 1.0

    def __post_init__(self):
        if not self.depth > 0 or not self.exponent > 0:
            raise DomainError("depth and exponent must be positive")

    def executed(self, value: float) -> float:
        if value <= 0:
            return 0.0
        return value / (1.0 + (value / self.depth) ** self.exponent)

    def cost(self, value: float) -> float:
        return value - self.executed(value)


@dataclass
class VaultState:
    risky: float
    stable: float
    pool: PoolState | None = None
    params: PoolParams | None = None
    epoch: int = 0
    fees: float = 0.0
    loss: float = 0.0

    def __post_init__(self):
        if self.risky < 0 or self.stable < 0:
            raise DomainError("holdings must be non-negative")

    def mark(self, price: float) -> float:
        value = self.risky * price + self.stable
        if self.pool is not None:
            value += self.pool.liquidity * (self.pool.rx * price + self.pool.ry)
        return value

    def _withdraw(self, market_price: float, allow_expired: bool) -> None:
        if self.pool is None:
            return
        pool, params = self.pool, self.params
        if pool.expired(params):
            if not allow_expired:
                raise ExpiryError("mispricing rollover needs an unexpired pool; settle and swap instead")
            ro, so = settle(pool, params, market_price)
            self.loss += pool.liquidity * ((pool.rx - ro) * market_price + (pool.ry - so))
        else:
            ro, so = pool.rx, pool.ry
        self.risky += pool.liquidity * ro
        self.stable += pool.liquidity * so
        self.pool = self.params = None


@dataclass(frozen=True)
class EpochReport:
    seed: int | None
    gamma: float
    fees: float
    loss: float
    terminal_k: float
    replication_gap: float
    k_trace: tuple[float, ...]
    initial_mark: float = 0.0
    terminal_mark: float = 0.0
    terminal_price: float = 0.0
    n_trades: int = 0

    _FLOATS = ("gamma", "fees", "loss", "terminal_k", "replication_gap",
               "initial_mark", "terminal_mark", "terminal_price")

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        out.update({name: dec(getattr(self, name)) for name in self._FLOATS})
        out["n_trades"] = self.n_trades
        out["k_trace"] = [dec(k) for k in self.k_trace]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "EpochReport":
        raw = json.loads(text)
        kwargs = {name: undec(raw[name]) for name in cls._FLOATS}
        return cls(seed=raw["seed"], n_trades=raw["n_trades"],
                   k_trace=tuple(undec(k) for k in raw["k_trace"]), **kwargs)


def _mint(vault: VaultState, params: PoolParams, price: float, t: float) -> PoolState:
    """Frictionless mint of all holdings into a fresh ``k = 0`` pool at ``price``."""
    unit = create_pool(params, price, t)
    value = vault.risky * price + vault.stable
    if not value > 0:
        raise DomainError("vault holds nothing to mint")
    vault.risky = vault.stable = 0.0
    return replace(unit, liquidity=value / (unit.rx * price + unit.ry))


def run_epoch(
    vault: VaultState, params: PoolParams, path: PricePath, gamma: float | None = None
) -> EpochReport:
    """Run one pool lifetime along ``path`` and settle into the vault's holdings."""
    if gamma is not None:
        params = replace(params, gamma=gamma)
    span = 1e-9 * max(1.0, abs(params.expiry))
    if abs(path.times[-1] - params.expiry) > span:
        raise PathMismatchError(f"path ends at {path.times[-1]!r}, pool expires at {params.expiry!r}")

    times, prices = path.times, path.prices
    if vault.pool is None:
        state = _mint(vault, params, float(prices[0]), float(times[0]))
    else:
        state = vault.pool
        if abs(state.t - times[0]) > span:
            raise PathMismatchError(f"path starts at {times[0]!r}, pool is at t={state.t!r}")
        vault.pool = vault.params = None
    L = state.liquidity

    initial_mark = L * (state.rx * prices[0] + state.ry)
    fees = gross = reval = 0.0
    n_trades = 0
    k_trace = [state.k]

    def trade(state, S):
        nonlocal fees, gross, n_trades
        state, receipt = arbitrage_align(state, params, S)
        if receipt is not None:
            n_trades += 1
            if receipt.direction == RISKY_IN:
                value_in, value_out = receipt.amount_in * S, receipt.amount_out
                fee_value = receipt.fee_paid * S
            else:
                value_in, value_out = receipt.amount_in, receipt.amount_out * S
                fee_value = receipt.fee_paid
            fees += fee_value
            gross += value_out - value_in + fee_value
        return state

    state = trade(state, float(prices[0]))
    k_trace[0] = state.k
    for i in range(1, len(times)):
        S = float(prices[i])
        reval += L * state.rx * (S - prices[i - 1])
        state = advance_time(state, params, float(times[i] - times[i - 1]))
        if not state.expired(params):
            state = trade(state, S)
        k_trace.append(state.k)
    if not state.expired(params):
        raise PathMismatchError("path did not reach expiry")

    S_T = float(prices[-1])
    ro, so = settle(state, params, S_T)
    settle_loss = L * ((state.rx - ro) * S_T + (state.ry - so))
    loss = gross - reval + settle_loss
    terminal_mark = L * (ro * S_T + so)

    vault.risky += L * ro
    vault.stable += L * so
    vault.fees += fees
    vault.loss += loss
    vault.epoch += 1

    return EpochReport(
        seed=path.seed,
        gamma=params.gamma,
        fees=fees,
        loss=loss,
        terminal_k=state.k,
        replication_gap=(ro * S_T + so) - min(S_T, params.strike),
        k_trace=tuple(k_trace),
        initial_mark=initial_mark,
        terminal_mark=terminal_mark,
        terminal_price=S_T,
        n_trades=n_trades,
    )


def _risky_for_ratio(ratio: float, params: PoolParams, t: float) -> float:
    """Risky reserve of the ``k = 0`` pool whose stable/risky ratio equals ``ratio``."""
    g = lambda rx: stable_from_risky(rx, 0.0, params, t) - ratio * rx  # decreasing in rx
    if g(RX_MIN) <= 0 or g(RX_MAX) >= 0:
        raise DomainError(f"holdings ratio {ratio!r} is outside the representable reserve domain")
    return brentq(g, RX_MIN, RX_MAX, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def rollover_mispricing(
    vault: VaultState, next_params: PoolParams, market_price: float, t: float = 0.0
) -> tuple[PoolState, float]:
    """Deposit all holdings at their current ratio and let arbitrage re-price the pool.

    Returns the aligned pool and the vault's loss (its value before minus after,
    at ``market_price``), which equals the arbitrageur's profit.
    """
    vault._withdraw(market_price, allow_expired=False)
    if not (vault.risky > 0 and vault.stable > 0):
        raise DomainError("mispricing rollover needs both assets in hand")
    before = vault.risky * market_price + vault.stable
    rx = _risky_for_ratio(vault.stable / vault.risky, next_params, t)
    L = vault.risky / rx
    state = pool_from_reserves(next_params, rx, vault.stable / L, t, L)
    state, _ = arbitrage_align(state, next_params, market_price)
    after = L * (state.rx * market_price + state.ry)
    loss = before - after
    vault.risky = vault.stable = 0.0
    vault.pool, vault.params = state, next_params
    vault.loss += loss
    return state, loss


def rollover_swap(
    vault: VaultState,
    next_params: PoolParams,
    market_price: float,
    slippage: SlippageModel,
    t: float = 0.0,
) -> tuple[PoolState, float]:
    """Swap on an external market to the exact mint ratio, then mint at ``k = 0``."""
    vault._withdraw(market_price, allow_expired=True)
    S = market_price
    rx = min(max(risky_from_price(S, next_params, t), 2 * RX_MIN), 1.0 - 2 * RX_MIN)
    ratio = stable_from_risky(rx, 0.0, next_params, t) / rx
    r, s = vault.risky, vault.stable
    if r * S + s <= 0:
        raise DomainError("vault holds nothing to mint")

    excess = s - ratio * r
    cost = 0.0
    if excess < 0:
        # too much risky: sell q of it for stable
        h = lambda q: s + slippage.executed(q * S) - ratio * (r - q)
        q = brentq(h, 0.0, r, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        cost = slippage.cost(q * S)
        r, s = r - q, s + slippage.executed(q * S)
    elif excess > 0:
        h = lambda v: ratio * (r + slippage.executed(v) / S) - (s - v)
        v = brentq(h, 0.0, s, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        cost = slippage.cost(v)
        r, s = r + slippage.executed(v) / S, s - v

    L = r / rx
    state = pool_from_reserves(next_params, rx, s / L, t, L)
    vault.risky = vault.stable = 0.0
    vault.pool, vault.params = state, next_params
    vault.loss += cost
    return state, cost


def rollover_loss_table(
    risky: float,
    stable: float,
    next_params: PoolParams,
    market_price: float,
    slippage: SlippageModel,
    scales: Sequence[float],
    t: float = 0.0,
) -> list[dict]:
    """Loss of both rollover methods for holdings ``(risky, stable)`` scaled by each factor."""
    rows = []
    for lam in scales:
        _, mis = rollover_mispricing(VaultState(lam * risky, lam * stable), next_params, market_price, t)
        _, swp = rollover_swap(VaultState(lam * risky, lam * stable), next_params, market_price, slippage, t)
        rows.append({"scale": lam, "mispricing_loss": mis, "swap_loss": swp})
    return rows
