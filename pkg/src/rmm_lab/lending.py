"""Liquidation-free lending: health factors and option hedges that defend them.

A collateral leg that loses value is topped back up by cashing in puts; a debt
leg that gains value is partly repaid with the proceeds of calls. With strikes
at the entry prices, holding as many options as reserve units covers any move.

Prices are quoted against a numeraire; option values are cash-denominated, so
``p_cash0``/``p_cash_t`` convert between the two (both 1 for a stablecoin
numeraire).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .blackscholes import OptionSpec, vanilla_values
from .errors import DegenerateOptionError, DomainError, HedgeInsufficientError, NumericError
from .numerics import Tolerance, find_max_1d

__all__ = [
    "Leg",
    "LendingPosition",
    "HedgeLeg",
    "HedgePlan",
    "RequirementSurface",
    "RebalanceResult",
    "health_factor",
    "put_hedge_quantity",
    "call_hedge_quantity",
    "strike_adjusted_requirement",
    "build_hedge_plan",
    "rebalance_on_exercise",
    "write_surface_csv",
    "read_surface_csv",
]


@dataclass(frozen=True)
class Leg:
    asset: str
    reserve: float
    entry_price: float

    def __post_init__(self):
        if not self.reserve > 0:
            raise DomainError(f"reserve of {self.asset!r} must be positive")
        if not self.entry_price > 0:
            raise DomainError(f"entry price of {self.asset!r} must be positive")


@dataclass(frozen=True)
class LendingPosition:
    collateral: tuple[Leg, ...]
    debt: tuple[Leg, ...]
    numeraire: str = "USD"

    def __post_init__(self):
        object.__setattr__(self, "collateral", tuple(self.collateral))
        object.__setattr__(self, "debt", tuple(self.debt))

    def entry_prices(self) -> dict[str, float]:
        return {leg.asset: leg.entry_price for leg in (*self.collateral, *self.debt)}


def health_factor(position: LendingPosition, prices: Mapping[str, float]) -> tuple[float, float]:
    """Collateral ratio ``C`` and its reciprocal ``LTV``.

    A position without debt value has infinite health (``C = inf, LTV = 0``).
    """
    for leg in (*position.collateral, *position.debt):
        if not prices[leg.asset] > 0:
            raise DomainError(f"price of {leg.asset!r} must be positive")
    v_c = sum(prices[leg.asset] * leg.reserve for leg in position.collateral)
    v_d = sum(prices[leg.asset] * leg.reserve for leg in position.debt)
    if v_d == 0:
        return math.inf, 0.0
    return v_c / v_d, v_d / v_c


def _option_values(spot_cash: float, strike_cash: float, sigma: float, tau: float):
    if not tau > 0:
        raise DomainError("hedge sizing needs tau > 0")
    return vanilla_values(spot_cash, OptionSpec(strike_cash, sigma, tau))


def put_hedge_quantity(
    r_x: float,
    p0: float,
    p_t: float,
    sigma: float,
    tau: float,
    p_cash0: float = 1.0,
    p_cash_t: float = 1.0,
    strike: float | None = None,
) -> float:
    """Puts needed to source ``r_x * (p0/p_t - 1)`` units of a fallen collateral asset.

    ``strike`` defaults to ``p0`` (at the money). Returns 0 when the price has
    not fallen.
    """
    if not (p0 > 0 and p_t > 0):
        raise DomainError("prices must be positive")
    if p_t >= p0:
        return 0.0
    strike = p0 if strike is None else strike
    spot = p_t / p_cash_t
    put = _option_values(spot, strike / p_cash0, sigma, tau).put_cash
    if not put > 0:
        raise DegenerateOptionError(f"put value {put!r} at price {p_t!r}")
    # (p0/p_t - 1) * p_t written as a single difference to limit rounding
    return r_x * ((p0 - p_t) / p_cash_t) / put


def call_hedge_quantity(
    r_y: float,
    p0: float,
    p_t: float,
    sigma: float,
    tau: float,
    p_cash0: float = 1.0,
    p_cash_t: float = 1.0,
    strike: float | None = None,
) -> float:
    """Calls needed to source ``r_y * (1 - p0/p_t)`` units of a risen debt asset."""
    if not (p0 > 0 and p_t > 0):
        raise DomainError("prices must be positive")
    if p_t <= p0:
        return 0.0
    strike = p0 if strike is None else strike
    spot = p_t / p_cash_t
    call = _option_values(spot, strike / p_cash0, sigma, tau).call_cash
    if not call > 0:
        raise DegenerateOptionError(f"call value {call!r} at price {p_t!r}")
    return r_y * ((p_t - p0) / p_cash_t) / call


@dataclass(frozen=True)
class RequirementSurface:
    kind: str
    p0: float
    strikes: np.ndarray
    prices: np.ndarray
    ratio: np.ndarray  # (n_strikes, n_prices), NaN where flagged
    flagged: np.ndarray  # bool, option value non-positive
    worst_price: np.ndarray
    max_ratio: np.ndarray

    def rows(self):
        for i, K in enumerate(self.strikes):
            for j, P in enumerate(self.prices):
                yield float(P), float(K), float(self.ratio[i, j])


def _ratio_fn(kind: str, p0: float, strike: float, sigma: float, tau: float):
    if kind == "put":
        return lambda P: put_hedge_quantity(1.0, p0, P, sigma, tau, strike=strike)
    if kind == "call":
        return lambda P: call_hedge_quantity(1.0, p0, P, sigma, tau, strike=strike)
    raise DomainError(f"kind must be 'put' or 'call', got {kind!r}")


def default_price_range(kind: str, p0: float) -> tuple[float, float]:
    if kind == "put":
        return 1e-6 * p0, p0 * (1.0 - 1e-9)
    return p0 * (1.0 + 1e-9), 1e6 * p0


def strike_adjusted_requirement(
    kind: str,
    strikes: Sequence[float],
    sigma: float,
    tau: float,
    p0: float = 1.0,
    prices: Sequence[float] | None = None,
    price_range: tuple[float, float] | None = None,
    tol: Tolerance | None = None,
) -> RequirementSurface:
    """Options per reserve unit across a strike grid, and the worst case per strike.

    ``kind='put'`` sizes collateral hedges over prices below ``p0``;
    ``kind='call'`` sizes debt hedges over prices above it. The worst case is
    the maximum over the whole ``price_range``, searched in log-price.
    """
    strikes = np.asarray(strikes, dtype=float)
    if strikes.ndim != 1 or strikes.size == 0 or np.any(strikes <= 0):
        raise DomainError("strikes must be a non-empty positive grid")
    if not tau > 0:
        raise DomainError("tau must be positive")
    lo, hi = price_range or default_price_range(kind, p0)
    if prices is None:
        prices = np.geomspace(lo, hi, 50)
    prices = np.asarray(prices, dtype=float)
    tol = tol or Tolerance(abs_tol=1e-12, rel_tol=1e-12)

    ratio = np.full((strikes.size, prices.size), np.nan)
    flagged = np.zeros_like(ratio, dtype=bool)
    worst = np.full(strikes.size, np.nan)
    best = np.full(strikes.size, np.nan)
    for i, K in enumerate(strikes):
        f = _ratio_fn(kind, p0, float(K), sigma, tau)
        for j, P in enumerate(prices):
            try:
                ratio[i, j] = f(float(P))
            except DegenerateOptionError:
                flagged[i, j] = True
        try:
            u, r = find_max_1d(lambda u: f(math.exp(u)), math.log(lo), math.log(hi), tol)
        except (DegenerateOptionError, NumericError):
            continue
        worst[i], best[i] = math.exp(u), r
    return RequirementSurface(kind, p0, strikes, prices, ratio, flagged, worst, best)


class HedgeLeg(NamedTuple):
    asset: str
    quantity: float
    strike: float


@dataclass(frozen=True)
class HedgePlan:
    puts: tuple[HedgeLeg, ...]
    calls: tuple[HedgeLeg, ...]
    sigma: float
    tau: float
    sigma_override: Mapping[str, float] = field(default_factory=dict)

    def sigma_for(self, asset: str) -> float:
        return self.sigma_override.get(asset, self.sigma)


def build_hedge_plan(
    position: LendingPosition,
    sigma: float,
    tau: float,
    sigma_override: Mapping[str, float] | None = None,
) -> HedgePlan:
    """At-the-money puts on each collateral leg and calls on each debt leg, one per reserve unit."""
    return HedgePlan(
        puts=tuple(HedgeLeg(leg.asset, leg.reserve, leg.entry_price) for leg in position.collateral),
        calls=tuple(HedgeLeg(leg.asset, leg.reserve, leg.entry_price) for leg in position.debt),
        sigma=sigma,
        tau=tau,
        sigma_override=dict(sigma_override or {}),
    )


class RebalanceResult(NamedTuple):
    position: LendingPosition
    plan: HedgePlan
    consumed: dict[str, float]
    refill: dict[str, float]


def rebalance_on_exercise(
    position: LendingPosition,
    plan: HedgePlan,
    prices: Mapping[str, float],
    p_cash0: float = 1.0,
    p_cash_t: float = 1.0,
) -> RebalanceResult:
    """Exercise just enough options to restore every breached ``P * R`` term.

    Collateral legs below entry gain ``R (P0/P - 1)`` units from puts; debt legs
    above entry repay ``R (1 - P0/P)`` units from calls. Favourable legs are left
    alone. Consumed option counts are also the refill requirement.
    """
    puts = {h.asset: h for h in plan.puts}
    calls = {h.asset: h for h in plan.calls}
    consumed: dict[str, float] = {}

    def exercise(legs, hedges, sizing, breached):
        new_legs, new_hedges = [], dict(hedges)
        for leg in legs:
            P = prices[leg.asset]
            if not breached(P, leg.entry_price):
                new_legs.append(leg)
                continue
            hedge = hedges.get(leg.asset)
            if hedge is None:
                raise HedgeInsufficientError(f"no options held for {leg.asset!r}")
            n = sizing(leg.reserve, leg.entry_price, P, plan.sigma_for(leg.asset), plan.tau,
                       p_cash0, p_cash_t, strike=hedge.strike)
            if n > hedge.quantity * (1.0 + 1e-12):
                raise HedgeInsufficientError(
                    f"{leg.asset!r} needs {n:.6g} options but plan holds {hedge.quantity:.6g}"
                )
            delta = leg.reserve * (leg.entry_price / P - 1.0)
            new_legs.append(replace(leg, reserve=leg.reserve + delta))
            new_hedges[leg.asset] = hedge._replace(quantity=max(hedge.quantity - n, 0.0))
            consumed[leg.asset] = consumed.get(leg.asset, 0.0) + n
        return new_legs, new_hedges

    collateral, puts = exercise(position.collateral, puts, put_hedge_quantity,
                                lambda P, P0: P < P0)
    debt, calls = exercise(position.debt, calls, call_hedge_quantity,
                           lambda P, P0: P > P0)

    new_position = LendingPosition(tuple(collateral), tuple(debt), position.numeraire)
    new_plan = replace(plan, puts=tuple(puts.values()), calls=tuple(calls.values()))
    return RebalanceResult(new_position, new_plan, consumed, dict(consumed))


SURFACE_COLUMNS = ("price", "strike", "quantity_ratio")


def write_surface_csv(path, rows) -> None:
    """Write ``(price, strike, quantity_ratio)`` rows with a header line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SURFACE_COLUMNS)
        for price, strike, q in rows:
            writer.writerow([repr(float(price)), repr(float(strike)), repr(float(q))])


def read_surface_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SURFACE_COLUMNS:
            raise DomainError(f"unexpected CSV header {header!r}")
        return np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, 3)
