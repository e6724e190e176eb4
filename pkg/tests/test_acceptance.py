"""One test per acceptance criterion, each at its stated tolerance."""

from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from rmm_lab.blackscholes import OptionSpec, binary_values, covered_call_value, vanilla_values
from rmm_lab.derivatives import close_position, compose_long_future, open_long_call, open_long_put
from rmm_lab.errors import LiquidityBoundError
from rmm_lab.lending import (
    Leg,
    LendingPosition,
    build_hedge_plan,
    call_hedge_quantity,
    health_factor,
    put_hedge_quantity,
    rebalance_on_exercise,
    strike_adjusted_requirement,
)
from rmm_lab.numerics import find_max_1d
from rmm_lab.pool import (
    RISKY_IN,
    STABLE_IN,
    PoolParams,
    create_pool,
    lpt_value,
    pool_from_reserves,
    price_from_risky,
    report_price,
    stable_from_risky,
    swap,
)
from rmm_lab.vault import VaultState, rollover_mispricing, run_epoch, simulate_gbm

SIGMA, TAU = 0.85, 8 / 12


def random_grid(n: int, seed: int):
    """(S, K, sigma, tau) with K log-uniform on [1, 5000] and S/K log-uniform on [0.2, 5]."""
    rng = np.random.default_rng(seed)
    K = np.exp(rng.uniform(0.0, math.log(5000.0), n))
    S = K * np.exp(rng.uniform(math.log(0.2), math.log(5.0), n))
    return S, K, rng.uniform(0.05, 2.0, n), rng.uniform(0.01, 2.0, n)


def test_criterion_01_oracle_equivalence(verdict):
    S, K, sig, tau = random_grid(10_000, 1)
    worst_lpt = worst_reserves = worst_call = worst_put = 0.0
    for s, k, v, t in zip(S, K, sig, tau):
        params = PoolParams(k, v, t)
        spec = OptionSpec(k, v, t)
        state = create_pool(params, s)
        p = report_price(state, params)
        cc = covered_call_value(p, spec)
        worst_lpt = max(worst_lpt, abs(lpt_value(state, params, p) - cc))
        # the pool's own reserves, marked at its price, must replicate the covered call
        worst_reserves = max(worst_reserves, abs(p * state.rx + state.ry - cc))
        van = vanilla_values(p, spec)
        worst_call = max(worst_call, abs(close_position(open_long_call(state, params, 1.0), state, params).net
                                         - van.call_risky))
        worst_put = max(worst_put, abs(close_position(open_long_put(state, params, 1.0), state, params).net
                                       - van.put_cash))
    # extended-precision spot check of the valuation route itself
    worst_mp = max(
        abs(covered_call_value(s, OptionSpec(k, v, t)) - float(oracles.covered_call(s, k, v, t)))
        for s, k, v, t in list(zip(S, K, sig, tau))[:200]
    )
    worst = max(worst_lpt, worst_reserves, worst_call, worst_put, worst_mp)
    ok = verdict(1, worst <= 1e-10,
                 f"oracle equivalence, max abs err {worst:.2e} (lpt {worst_lpt:.1e}, reserves {worst_reserves:.1e}, "
                 f"call {worst_call:.1e}, put {worst_put:.1e}, 60-digit {worst_mp:.1e}) <= 1e-10")
    assert ok


def test_criterion_02_parity_suite(verdict):
    S, K, sig, tau = random_grid(10_000, 1)
    worst = 0.0
    for s, k, v, t in zip(S, K, sig, tau):
        spec = OptionSpec(k, v, t)
        van = vanilla_values(s, spec)
        b = binary_values(s, spec)
        worst = max(
            worst,
            abs(s * van.call_risky - van.put_cash - (s - k)),
            abs(b.conc + b.conp - 1.0),
            abs(b.aonp_cash + b.aonc_cash - s),
            abs(covered_call_value(s, spec) + van.call_cash - s),
        )
    ok = verdict(2, worst <= 1e-10, f"parity suite, max abs residual {worst:.2e} <= 1e-10")
    assert ok


def test_criterion_03_price_consistency(verdict):
    rng = np.random.default_rng(3)
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        params = PoolParams(rng.uniform(1.0, 5000.0), rng.uniform(0.1, 2.0), rng.uniform(0.05, 2.0))
        t = rng.uniform(0.0, 0.9) * params.expiry
        rx = rng.uniform(0.05, 0.95)
        slope = (stable_from_risky(rx + h, 0.0, params, t) - stable_from_risky(rx - h, 0.0, params, t)) / (2 * h)
        S = price_from_risky(rx, params, t)
        worst = max(worst, abs(S + slope) / S)
    ok = verdict(3, worst < 1e-5, f"price consistency, max rel err {worst:.2e} < 1e-5")
    assert ok


def test_criterion_04_swap_feasibility(verdict):
    rng = np.random.default_rng(4)
    decreases = flat_fee_trades = n_fee = n_free = 0
    worst_free = 0.0
    for i in range(10_000):
        gamma = 1.0 if i % 2 else rng.uniform(0.95, 0.9999)
        params = PoolParams(rng.uniform(1.0, 5000.0), rng.uniform(0.1, 2.0), rng.uniform(0.05, 2.0), gamma)
        t = rng.uniform(0.0, 0.9) * params.expiry
        rx = rng.uniform(0.02, 0.98)
        k = rng.uniform(-0.05, 0.05) * params.strike
        ry = stable_from_risky(rx, k, params, t)
        if ry < 0:
            ry, k = stable_from_risky(rx, 0.0, params, t), 0.0
        state = pool_from_reserves(params, rx, ry, t, rng.uniform(0.1, 100.0))
        direction = RISKY_IN if rng.random() < 0.5 else STABLE_IN
        room = (1 - rx) if direction == RISKY_IN else ry
        amount = rng.uniform(1e-6, 0.5) * room * state.liquidity
        try:
            _, r = swap(state, params, direction, amount)
        except LiquidityBoundError:
            continue
        dk = r.k_after - r.k_before
        decreases += dk < 0 and gamma < 1
        if gamma < 1:
            n_fee += 1
            flat_fee_trades += not dk > 0
        else:
            n_free += 1
            worst_free = max(worst_free, abs(dk) / params.strike)
    ok = decreases == 0 and flat_fee_trades == 0 and worst_free < 1e-10 and n_fee + n_free > 9000
    verdict(4, ok, f"swap feasibility over {n_fee + n_free} swaps: fee-on k increases in {n_fee - flat_fee_trades}/"
                   f"{n_fee}, fee-free max |dk|/K {worst_free:.2e} < 1e-10")
    assert ok


def test_criterion_05_hedge_limits(verdict):
    a_low = put_hedge_quantity(1.0, 1.0, 1e-6, SIGMA, TAU)
    b_high = call_hedge_quantity(1.0, 1.0, 1e6, SIGMA, TAU)
    put_grids = [np.linspace(1e-6, 1.0, 1001)[:-1], np.geomspace(1e-6, 1.0 - 1e-9, 1000)]
    call_grids = [np.linspace(1.0, 1e3, 1001)[1:], np.geomspace(1.0 + 1e-9, 1e6, 1000)]
    mono = True
    for grid in put_grids:
        a = [put_hedge_quantity(1.0, 1.0, P, SIGMA, TAU) for P in grid]
        mono &= all(y <= x for x, y in zip(a, a[1:])) and max(a) <= 1.0
    for grid in call_grids:
        b = [call_hedge_quantity(1.0, 1.0, P, SIGMA, TAU) for P in grid]
        mono &= all(y >= x for x, y in zip(b, b[1:])) and max(b) <= 1.0
    ok = 1 - 1e-4 <= a_low <= 1.0 and 1 - 1e-4 <= b_high <= 1.0 and mono
    verdict(5, ok, f"hedge limits alpha(1e-6 P0)/R={a_low!r}, beta(1e6 P0)/R={b_high!r}, "
                   f"monotone on 1000-point linear and log grids: {mono}")
    assert ok


def test_criterion_06_otm_non_monotonicity(verdict):
    details, ok = [], True
    for kind, strikes in (("put", (0.9, 0.8, 0.7)), ("call", (1.1, 1.2, 1.3))):
        lo, hi = (1e-6, 1.0 - 1e-9) if kind == "put" else (1.0 + 1e-9, 1e6)
        fn = put_hedge_quantity if kind == "put" else call_hedge_quantity
        surf = strike_adjusted_requirement(kind, strikes, SIGMA, TAU, price_range=(lo, hi))
        ulo, uhi = math.log(lo), math.log(hi)
        for K, w, m in zip(strikes, surf.worst_price, surf.max_ratio):
            f = lambda u: fn(1.0, 1.0, math.exp(u), SIGMA, TAU, strike=K)
            # endpoint neighbourhoods: outer 2% of the log-price range on each side
            edge = 0.02 * (uhi - ulo)
            left = find_max_1d(f, ulo, ulo + edge)[1]
            right = find_max_1d(f, uhi - edge, uhi)[1]
            interior = ulo + edge < math.log(w) < uhi - edge
            good = interior and m > left and m > right
            ok &= good
            details.append(f"{kind} K={K}: max {m:.4f} at P={w:.4g} (edges {left:.4f}, {right:.4f})")
    verdict(6, ok, "OTM interior maxima; " + "; ".join(details))
    assert ok


def test_criterion_07_rebalance_exactness(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n_c, n_d = rng.integers(1, 4), rng.integers(1, 4)
        coll = tuple(Leg(f"c{i}", rng.uniform(0.1, 100), rng.uniform(0.1, 5000)) for i in range(n_c))
        debt = tuple(Leg(f"d{i}", rng.uniform(0.1, 100), rng.uniform(0.1, 5000)) for i in range(n_d))
        pos = LendingPosition(coll, debt)
        prices = {leg.asset: leg.entry_price * math.exp(rng.normal(0.0, 0.6)) for leg in coll + debt}
        # force at least one breach
        prices["c0"] = min(prices["c0"], 0.9 * coll[0].entry_price)
        out = rebalance_on_exercise(pos, build_hedge_plan(pos, SIGMA, TAU), prices)
        entry = health_factor(pos, pos.entry_prices())[0]
        after = health_factor(out.position, prices)[0]
        worst = max(worst, (entry - after) / entry)
    ok = verdict(7, worst <= 1e-9, f"rebalance exactness, worst relative health shortfall {worst:.2e} <= 1e-9")
    assert ok


def test_criterion_08_vault_homogeneity(verdict):
    params = PoolParams(2000.0, SIGMA, TAU)
    unit = create_pool(params, 2000.0)
    worst = 0.0
    for skew in (0.1, -0.1, 0.5):
        r, s = 1.0, unit.ry / unit.rx * (1.0 + skew)
        base = rollover_mispricing(VaultState(r, s), params, 2000.0)[1]
        for lam in (1.0, 2.0, 10.0):
            loss = rollover_mispricing(VaultState(lam * r, lam * s), params, 2000.0)[1]
            worst = max(worst, abs(loss / lam - base) / base)
    ok = verdict(8, worst < 1e-9, f"mispricing rollover loss homogeneity, max rel deviation {worst:.2e} < 1e-9")
    assert ok


def test_criterion_09_theta_leak(verdict):
    params = PoolParams(2000.0, SIGMA, TAU, 0.997)
    free_k, fee_k = [], []
    for seed in range(200):
        path = simulate_gbm(2000.0, 0.0, SIGMA, TAU, 512, seed)
        free_k.append(run_epoch(VaultState(1.0, 0.0), params, path, gamma=1.0).terminal_k)
        fee_k.append(run_epoch(VaultState(1.0, 0.0), params, path).terminal_k)
    free_k, fee_k = np.array(free_k), np.array(fee_k)
    leak = bool(np.all(free_k <= 1e-12))
    share = float(np.mean(fee_k > free_k))
    ok = leak and share >= 0.95
    verdict(9, ok, f"theta leak over 200 seeds: fee-free max terminal k {free_k.max():.4g} <= 1e-12, "
                   f"fee-on larger in {share:.1%} >= 95%")
    assert ok


def test_criterion_10_future_identity(verdict):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        params = PoolParams(rng.uniform(1.0, 5000.0), rng.uniform(0.1, 2.0), rng.uniform(0.05, 2.0))
        t = rng.uniform(0.0, 0.95) * params.expiry
        rx = rng.uniform(0.01, 0.99)
        k = rng.uniform(-0.01, 0.01) * params.strike
        ry = max(stable_from_risky(rx, k, params, t), 0.0)
        state = pool_from_reserves(params, rx, ry, t)
        worst = max(worst, abs(compose_long_future(state, params).net_cost_risky - 1.0))
    ok = verdict(10, worst <= 1e-12, f"long-future net cost, max |cost - 1| {worst:.2e} <= 1e-12")
    assert ok
