"""Command-line front end: ``rmm-lab {price,construct,hedge-surface,simulate-vault}``.

Every option can also come from a JSON config (``--config``) whose keys are the
option names with dashes replaced by underscores; flags win over the config.
Unknown config keys are rejected. Exit codes: 0 success, 2 invalid input,
1 runtime failure. ``RMM_LAB_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ._io import dec
from .blackscholes import OptionSpec, binary_values, covered_call_value, vanilla_values
from .derivatives import (
    close_position,
    compose_long_future,
    compose_skewed_straddle,
    compose_straddle,
    open_long_call,
    open_long_put,
    positions_to_jsonl,
    short_binary,
    split_binaries,
)
from .errors import ConfigError, RmmError
from .lending import default_price_range, strike_adjusted_requirement, write_surface_csv
from .pool import PoolParams, advance_time, create_pool, settle, snapshot_to_json
from .vault import (
    SlippageModel,
    VaultState,
    rollover_loss_table,
    run_epoch,
    simulate_gbm,
)

log = logging.getLogger("rmm_lab")

CONSTRUCTIONS = ("long-call", "long-put", "split-binaries", "short-binary", "straddle", "future")

# option name -> (type, default); None default means required
_GLOBAL = {"config": (str, ""), "out": (str, ""), "seed": (int, 0)}
_OPTIONS = {
    "price": {
        "S": (float, None), "K": (float, None), "sigma": (float, 0.85),
        "tau": (float, 8 / 12), "k": (float, 0.0),
    },
    "construct": {
        "S": (float, 2000.0), "K": (float, 2000.0), "sigma": (float, 0.85), "T": (float, 8 / 12),
        "t": (float, 0.0), "gamma": (float, 0.997), "k": (float, 0.0), "qty": (float, 1.0),
        "x": (float, 1.0), "m_call": (float, 0.0), "m_put": (float, 0.0),
        "grid": (int, 9), "grid_lo": (float, 0.25), "grid_hi": (float, 2.0),
    },
    "hedge-surface": {
        "sigma": (float, 0.85), "tau": (float, 8 / 12), "p0": (float, 1.0), "points": (int, 1000),
        "price_max": (float, 5.0), "put_strikes": (str, "0.7,0.8,0.9,1.0"),
        "call_strikes": (str, "1.0,1.1,1.2,1.3"),
    },
    "simulate-vault": {
        "K": (float, 2000.0), "sigma": (float, 0.85), "T": (float, 8 / 12), "gamma": (float, 0.997),
        "S0": (float, 0.0), "mu": (float, 0.0), "sigma_mkt": (float, 0.0), "steps": (int, 512),
        "horizon": (float, 0.0), "n_seeds": (int, 1), "jobs": (int, 1), "scales": (str, "1,2,10"),
        "depth": (float, 1e6), "exponent": (float, 1.0), "mispricing": (float, 0.1),
    },
}


class UsageError(Exception):
    pass


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmm-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in _OPTIONS.items():
        p = sub.add_parser(command)
        if command == "construct":
            p.add_argument("construction", choices=CONSTRUCTIONS)
        if command == "price":
            p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
        for name, (typ, _) in {**_GLOBAL, **options}.items():
            p.add_argument(_flag(name), dest=name, type=typ, default=None)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults < config file < flags; reject unknown config keys."""
    options = {**_GLOBAL, **_OPTIONS[args.command]}
    values = {name: default for name, (_, default) in options.items()}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(raw) - set(options) - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for name, value in raw.items():
            try:
                values[name] = options[name][0](value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config key {name!r}: {exc}") from exc
    for name in options:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    missing = [_flag(n) for n, v in values.items() if v is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    return values


def _floats(text: str) -> list[float]:
    try:
        out = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc
    if not out:
        raise UsageError("empty number list")
    return out


def _emit(cfg: dict, name: str, text: str) -> None:
    sys.stdout.write(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def cmd_price(cfg: dict, as_json: bool = False) -> int:
    S, K = cfg["S"], cfg["K"]
    spec = OptionSpec(K, cfg["sigma"], cfg["tau"])
    cc = covered_call_value(S, spec)
    van = vanilla_values(S, spec)
    bins = binary_values(S, spec)
    rows = {"lpt_value": cc + cfg["k"], "covered_call": cc, **van._asdict(), **bins._asdict()}
    if as_json:
        text = json.dumps({name: dec(v) for name, v in rows.items()}, indent=2) + "\n"
    else:
        width = max(map(len, rows))
        text = "".join(f"{name:<{width}}  {dec(v)}\n" for name, v in rows.items())
    _emit(cfg, "price.json" if as_json else "price.txt", text)
    return 0


def _terminal_grid(cfg: dict) -> np.ndarray:
    if cfg["grid"] < 2:
        raise UsageError("--grid needs at least 2 points")
    return cfg["K"] * np.linspace(cfg["grid_lo"], cfg["grid_hi"], cfg["grid"])


def cmd_construct(cfg: dict, construction: str) -> int:
    params = PoolParams(cfg["K"], cfg["sigma"], cfg["T"], cfg["gamma"])
    state = create_pool(params, cfg["S"], cfg["t"], k=cfg["k"])
    expired = advance_time(state, params, params.expiry - state.t)
    grid = _terminal_grid(cfg)
    report: dict = {"construction": construction, "pool": json.loads(snapshot_to_json(state, params))}

    def payoff_rows(positions):
        rows = []
        for ST in grid:
            row = {"terminal_price": dec(ST)}
            for label, pos in positions.items():
                row[label] = dec(close_position(pos, expired, params, float(ST)).net)
            rows.append(row)
        return rows

    def describe(pos):
        return {"side": pos.side, "qty": dec(pos.qty), "collateral": dec(pos.collateral),
                "collateral_asset": pos.denomination, "premium": dec(pos.premium),
                "repayment_rule": pos.repayment_rule}

    if construction in ("long-call", "long-put"):
        opener = open_long_call if construction == "long-call" else open_long_put
        pos = opener(state, params, cfg["qty"])
        report["position"] = describe(pos)
        report["payoff_table"] = payoff_rows({"net": pos})
        report["ledger"] = positions_to_jsonl([pos])
    elif construction == "short-binary":
        stable_short, risky_short = short_binary(state, params, ("stable", "risky"), cfg["qty"])
        report["positions"] = [describe(stable_short), describe(risky_short)]
        report["payoff_table"] = payoff_rows({"conp_net_stable": stable_short, "aonc_net_risky": risky_short})
        report["ledger"] = positions_to_jsonl([stable_short, risky_short])
    elif construction == "split-binaries":
        risky_sale, stable_sale = split_binaries(state, params, cfg["qty"])
        report["premiums"] = {"risky_leg": dec(risky_sale.premium), "stable_leg": dec(stable_sale.premium)}
        report["payoff_table"] = [
            {"terminal_price": dec(ST),
             "aonp_leg_cash": dec(risky_sale.sold_value(float(ST), 0.0, expired.k)),
             "conc_leg_cash": dec(stable_sale.sold_value(float(ST), 0.0, expired.k))}
            for ST in grid
        ]
    elif construction == "straddle":
        if cfg["m_call"] > 0 or cfg["m_put"] > 0:
            quote = compose_skewed_straddle(state, params, cfg["m_call"], cfg["m_put"])
        else:
            quote = compose_straddle(state, params, cfg["x"])
        report["straddle"] = {
            "m_call": dec(quote.m_call), "m_put": dec(quote.m_put), "price": dec(quote.price),
            "lpt_value": dec(quote.lpt_value), "call_cost_risky": dec(quote.call_cost_risky),
            "put_cost_stable": dec(quote.put_cost_stable), "total_cost_risky": dec(quote.total_cost_risky),
        }
        rows = []
        for ST in grid:
            c = close_position(quote.call_position, expired, params, float(ST)).net * ST
            p = close_position(quote.put_position, expired, params, float(ST)).net
            rows.append({"terminal_price": dec(ST), "call_cash": dec(c), "put_cash": dec(p), "total_cash": dec(c + p)})
        report["payoff_table"] = rows
    else:
        quote = compose_long_future(state, params)
        report["future"] = {
            "price": dec(quote.price), "cc_risky": dec(quote.cc_risky), "cc_stable": dec(quote.cc_stable),
            "call_cost_risky": dec(quote.call_cost_risky), "net_cost": dec(quote.net_cost_risky),
        }
        rows = []
        for ST in grid:
            ro, so = settle(expired, params, float(ST))
            call = close_position(quote.call_position, expired, params, float(ST)).net
            rows.append({"terminal_price": dec(ST), "value_risky": dec(ro + so / ST + call)})
        report["payoff_table"] = rows
    _emit(cfg, f"construct_{construction}.json", json.dumps(report, indent=2) + "\n")
    return 0


def cmd_hedge_surface(cfg: dict) -> int:
    n, p0 = cfg["points"], cfg["p0"]
    if n < 2:
        raise UsageError("--points needs at least 2")
    if cfg["price_max"] <= 1:
        raise UsageError("--price-max must exceed 1")
    sigma, tau = cfg["sigma"], cfg["tau"]
    put_prices = p0 * np.linspace(0.0, 1.0, n + 2)[1:-1]
    call_prices = p0 * np.linspace(1.0, cfg["price_max"], n + 1)[1:]
    out = Path(cfg["out"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for kind, prices, strikes, curve_name, surface_name in (
        ("put", put_prices, _floats(cfg["put_strikes"]), "alpha_curve.csv", "alpha_surface.csv"),
        ("call", call_prices, _floats(cfg["call_strikes"]), "beta_curve.csv", "beta_surface.csv"),
    ):
        curve = strike_adjusted_requirement(kind, [p0], sigma, tau, p0, prices=prices)
        write_surface_csv(out / curve_name, curve.rows())
        surface = strike_adjusted_requirement(kind, [p0 * s for s in strikes], sigma, tau, p0, prices=prices)
        write_surface_csv(out / surface_name, surface.rows())
        lo, hi = default_price_range(kind, p0)
        summary[kind] = [
            {"strike": dec(K), "worst_price": dec(w), "max_ratio": dec(m),
             "flagged_cells": int(surface.flagged[i].sum())}
            for i, (K, w, m) in enumerate(zip(surface.strikes, surface.worst_price, surface.max_ratio))
        ]
        summary[f"{kind}_search_range"] = [dec(lo), dec(hi)]
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def _vault_epoch(args):
    params, s0, mu, sigma_mkt, steps, seed = args
    path = simulate_gbm(s0, mu, sigma_mkt, params.expiry, steps, seed)
    vault = VaultState(risky=1.0, stable=0.0)
    return run_epoch(vault, params, path)


def cmd_simulate_vault(cfg: dict) -> int:
    params = PoolParams(cfg["K"], cfg["sigma"], cfg["T"], cfg["gamma"])
    if cfg["horizon"] and not math.isclose(cfg["horizon"], cfg["T"], rel_tol=1e-12):
        raise UsageError(f"--horizon {cfg['horizon']} conflicts with pool expiry --T {cfg['T']}")
    if cfg["n_seeds"] < 1 or cfg["steps"] < 1 or cfg["jobs"] < 1:
        raise UsageError("--n-seeds, --steps and --jobs must be >= 1")
    s0 = cfg["S0"] or cfg["K"]
    sigma_mkt = cfg["sigma_mkt"] or cfg["sigma"]
    seeds = [cfg["seed"] + i for i in range(cfg["n_seeds"])]
    jobs = [(params, s0, cfg["mu"], sigma_mkt, cfg["steps"], seed) for seed in seeds]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            reports = list(pool.map(_vault_epoch, jobs))
    else:
        reports = [_vault_epoch(job) for job in jobs]

    # rollover comparison: one risky unit with stable off the mint ratio by `mispricing`
    fresh = create_pool(params, s0)
    stable = fresh.ry / fresh.rx * (1.0 + cfg["mispricing"])
    table = rollover_loss_table(1.0, stable, params, s0, SlippageModel(cfg["depth"], cfg["exponent"]),
                                _floats(cfg["scales"]))
    summary = {
        "seeds": len(reports),
        "mean_fees": dec(float(np.mean([r.fees for r in reports]))),
        "mean_replication_gap": dec(float(np.mean([r.replication_gap for r in reports]))),
        "rollover": [{key: dec(v) for key, v in row.items()} for row in table],
    }
    lines = [r.to_json() for r in reports] + [json.dumps({"summary": summary})]
    _emit(cfg, "vault.jsonl", "".join(line + "\n" for line in lines))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("RMM_LAB_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "price":
            return cmd_price(cfg, args.json)
        if args.command == "construct":
            return cmd_construct(cfg, args.construction)
        if args.command == "hedge-surface":
            return cmd_hedge_surface(cfg)
        return cmd_simulate_vault(cfg)
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    except ValueError as exc:
        # DomainError and friends raised while building inputs
        print(f"rmm-lab: invalid input: {exc}", file=sys.stderr)
        return 2
    except RmmError as exc:
        print(f"rmm-lab: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
