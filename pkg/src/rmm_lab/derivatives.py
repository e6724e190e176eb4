"""Option constructions built from borrowed or split liquidity tokens.

Long calls and puts come from borrowing LPTs and denominating the underlying
reserves in one asset; binaries come from selling (or shorting, in pairs) the
rights to one reserve. Repayment is the covered-call value with the
invariant ``k`` left out, which caps a borrower's debt at one risky unit
(call side) or ``K`` stable (put side) per LPT.

Closing happens at the pool's reported price. An expired pool has no reported
price, so the terminal market price must then be passed explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

from ._io import dec, undec
from .blackscholes import OptionSpec, binary_values, covered_call_value, d1_d2
from .errors import CoincidenceOfWantsError, DomainError, ExpiryError, InfeasibleBudgetError
from .numerics import std_normal_cdf as ncdf
from .pool import PoolParams, PoolState, lpt_value, report_price

__all__ = [
    "LONG_CALL",
    "LONG_PUT",
    "SHORT_CONC",
    "SHORT_AONP",
    "BorrowPosition",
    "Payoff",
    "BinarySplit",
    "StraddleQuote",
    "FutureQuote",
    "open_long_call",
    "open_long_put",
    "close_position",
    "split_binaries",
    "short_binary",
    "compose_straddle",
    "compose_skewed_straddle",
    "compose_long_future",
    "positions_to_jsonl",
    "positions_from_jsonl",
]

LONG_CALL = "long-call"
LONG_PUT = "long-put"
SHORT_CONC = "short-conc"
SHORT_AONP = "short-aonp"

_DENOMINATION = {LONG_CALL: "risky", LONG_PUT: "stable", SHORT_CONC: "stable", SHORT_AONP: "risky"}
_RULES = {
    LONG_CALL: "qty * (S*N(-d1) + K*N(d2)) / S risky at close; k excluded; cap qty risky",
    LONG_PUT: "qty * (S*N(-d1) + K*N(d2)) stable at close; k excluded; cap qty*K stable",
    SHORT_CONC: "qty * K * N(d2) stable at close; k excluded; cap qty*K stable",
    SHORT_AONP: "qty * N(-d1) risky at close; cap qty risky",
}


@dataclass(frozen=True)
class BorrowPosition:
    side: str
    qty: float
    t0: float
    strike: float
    sigma: float
    expiry: float
    price_at_open: float
    collateral: float
    premium: float
    k_at_open: float
    rate: float = 0.0
    denomination: str = field(init=False)
    repayment_rule: str = field(init=False)

    def __post_init__(self):
        if self.side not in _DENOMINATION:
            raise DomainError(f"unknown position side {self.side!r}")
        object.__setattr__(self, "denomination", _DENOMINATION[self.side])
        object.__setattr__(self, "repayment_rule", _RULES[self.side])

    @property
    def cap(self) -> float:
        """Maximum repayment, in the position's denomination."""
        if self.side in (LONG_PUT, SHORT_CONC):
            return self.qty * self.strike
        return self.qty


class Payoff(NamedTuple):
    net: float
    repayment: float
    denomination: str
    price: float


def _check_open(state: PoolState, params: PoolParams, qty: float) -> float:
    if state.expired(params):
        raise ExpiryError("cannot open a position on an expired pool")
    if not (qty > 0 and math.isfinite(qty)):
        raise DomainError(f"quantity must be positive, got {qty!r}")
    return report_price(state, params)


def _position(side, qty, state, params, S, collateral, premium, rate) -> BorrowPosition:
    return BorrowPosition(
        side=side, qty=qty, t0=state.t, strike=params.strike, sigma=params.sigma,
        expiry=params.expiry, price_at_open=S, collateral=collateral, premium=premium,
        k_at_open=state.k, rate=rate,
    )


def open_long_call(state: PoolState, params: PoolParams, qty: float, rate: float = 0.0) -> BorrowPosition:
    """Borrow ``qty`` LPTs and sell the stable side for risky.

    Collateral (risky) is what tops the proceeds up to the one-risky-unit cap:
    ``qty * (1 - V_cc(t0) / S)``.
    """
    S = _check_open(state, params, qty)
    v_cc = covered_call_value(S, params.option_spec(state.t))
    collateral = qty * (1.0 - v_cc / S)
    return _position(LONG_CALL, qty, state, params, S, collateral, collateral, rate)


def open_long_put(state: PoolState, params: PoolParams, qty: float, rate: float = 0.0) -> BorrowPosition:
    S = _check_open(state, params, qty)
    v_cc = covered_call_value(S, params.option_spec(state.t))
    collateral = qty * (params.strike - v_cc)
    return _position(LONG_PUT, qty, state, params, S, collateral, collateral, rate)


def close_position(
    position: BorrowPosition,
    state: PoolState,
    params: PoolParams,
    terminal_price: float | None = None,
) -> Payoff:
    """Repay the borrowed leg and return the borrower's net payoff."""
    if (params.strike, params.sigma, params.expiry) != (position.strike, position.sigma, position.expiry):
        raise DomainError("position was opened on a different pool")
    if state.t < position.t0:
        raise DomainError("cannot close before the position was opened")
    if state.expired(params):
        if terminal_price is None:
            raise ExpiryError("expired pool has no reported price; pass terminal_price")
        S = float(terminal_price)
    else:
        S = report_price(state, params)
    spec = params.option_spec(state.t)
    qty = position.qty
    K = params.strike

    if position.side == LONG_CALL:
        owed = qty * covered_call_value(S, spec) / S
    elif position.side == LONG_PUT:
        owed = qty * covered_call_value(S, spec)
    elif position.side == SHORT_CONC:
        owed = qty * K * binary_values(S, spec).conc
    else:
        owed = qty * binary_values(S, spec).aonp_cash / S
    owed *= 1.0 + position.rate * (state.t - position.t0)
    return Payoff(position.cap - owed, owed, position.denomination, S)


@dataclass(frozen=True)
class BinarySplit:
    """One reserve of ``units`` LPTs sold for its current amount.

    The risky leg tracks an asset-or-nothing put (``S * rx``), the stable leg a
    cash-or-nothing call scaled by ``K`` plus ``k`` (``ry``).
    """

    sold_leg: str
    premium: float
    units: float
    strike: float
    sigma: float

    def _leg_value(self, leg: str, S: float, tau: float, k: float) -> float:
        b = binary_values(S, OptionSpec(self.strike, self.sigma, tau))
        if leg == "risky":
            return self.units * b.aonp_cash
        return self.units * (self.strike * b.conc + k)

    def sold_value(self, S: float, tau: float, k: float = 0.0) -> float:
        return self._leg_value(self.sold_leg, S, tau, k)

    def retained_value(self, S: float, tau: float, k: float = 0.0) -> float:
        other = "stable" if self.sold_leg == "risky" else "risky"
        return self._leg_value(other, S, tau, k)


def split_binaries(state: PoolState, params: PoolParams, units: float) -> tuple[BinarySplit, BinarySplit]:
    """Quote selling either reserve of ``units`` LPTs: ``(risky_sale, stable_sale)``."""
    _check_open(state, params, units)
    return (
        BinarySplit("risky", units * state.rx, units, params.strike, params.sigma),
        BinarySplit("stable", units * state.ry, units, params.strike, params.sigma),
    )


def short_binary(
    state: PoolState, params: PoolParams, legs: Iterable[str], qty: float = 1.0
) -> tuple[BorrowPosition, BorrowPosition]:
    """Short both reserves of ``qty`` borrowed LPTs as one paired transaction.

    Returns ``(stable_short, risky_short)``: the stable short is long a
    cash-or-nothing put of ``K``, the risky short long an asset-or-nothing call.
    """
    legs = set(legs)
    if legs != {"stable", "risky"}:
        raise CoincidenceOfWantsError(
            f"binary shorts need both legs filled together, got {sorted(legs)}"
        )
    S = _check_open(state, params, qty)
    spec = params.option_spec(state.t)
    K = params.strike
    conc0 = binary_values(S, spec).conc
    n_minus_d1 = ncdf(-d1_d2(S, spec).d1)
    stable_short = _position(
        SHORT_CONC, qty, state, params, S,
        collateral=qty * (K - K * conc0 - state.k), premium=qty * (K - state.ry), rate=0.0,
    )
    risky_short = _position(
        SHORT_AONP, qty, state, params, S,
        collateral=qty * (1.0 - n_minus_d1), premium=qty * (1.0 - state.rx), rate=0.0,
    )
    return stable_short, risky_short


@dataclass(frozen=True)
class StraddleQuote:
    m_call: float
    m_put: float
    price: float
    lpt_value: float
    call_cost_risky: float
    put_cost_stable: float
    total_cost_risky: float
    call_position: BorrowPosition
    put_position: BorrowPosition


def compose_skewed_straddle(
    state: PoolState, params: PoolParams, m_call: float, m_put: float
) -> StraddleQuote:
    S = report_price(state, params)
    v = lpt_value(state, params, S)
    call_cost = m_call * (1.0 - v / S)
    put_cost = m_put * (params.strike - v)
    return StraddleQuote(
        m_call, m_put, S, v, call_cost, put_cost, call_cost + put_cost / S,
        open_long_call(state, params, m_call), open_long_put(state, params, m_put),
    )


def compose_straddle(state: PoolState, params: PoolParams, x: float) -> StraddleQuote:
    """Largest symmetric straddle a budget of ``x`` risky units can fund.

    Both collateral legs are converted to risky at the reported price:
    ``m = x / (1 - V/S + (K - V)/S)`` with ``V`` the LPT value.
    """
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"budget must be positive, got {x!r}")
    S = _check_open(state, params, x)
    v = lpt_value(state, params, S)
    denom = 1.0 - v / S + (params.strike - v) / S
    if not denom > 0:
        raise InfeasibleBudgetError(f"straddle cost per unit is non-positive ({denom!r})")
    m = x / denom
    return compose_skewed_straddle(state, params, m, m)


@dataclass(frozen=True)
class FutureQuote:
    price: float
    cc_risky: float
    cc_stable: float
    call_cost_risky: float
    net_cost_risky: float
    call_position: BorrowPosition


def compose_long_future(state: PoolState, params: PoolParams) -> FutureQuote:
    """One LPT (covered call) plus one borrowed-LPT long call.

    The covered call costs the pool's per-unit reserves; the call costs
    ``1 - V_LPT / S`` risky. Together they cost exactly one risky unit.
    """
    S = _check_open(state, params, 1.0)
    call_cost = 1.0 - lpt_value(state, params, S) / S
    net = state.rx + state.ry / S + call_cost
    return FutureQuote(S, state.rx, state.ry, call_cost, net, open_long_call(state, params, 1.0))


_FLOAT_FIELDS = ("qty", "t0", "strike", "sigma", "expiry", "price_at_open",
                 "collateral", "premium", "k_at_open", "rate")


def positions_to_jsonl(positions: Iterable[BorrowPosition]) -> str:
    lines = []
    for p in positions:
        row = asdict(p)
        row.update({name: dec(row[name]) for name in _FLOAT_FIELDS})
        lines.append(json.dumps(row, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def positions_from_jsonl(text: str) -> list[BorrowPosition]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        kwargs = {name: undec(row[name]) for name in _FLOAT_FIELDS}
        out.append(BorrowPosition(side=row["side"], **kwargs))
    return out
