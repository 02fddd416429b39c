"""Command line interface: pricing, calibration, simulation, measure checks.

Configuration files are INI-style key-value text with one section per
block (``[model]``, ``[subordinator]``, optional ``[sv]``,
``[expansion]``, plus command-specific sections).  Market files are
delimited text with one row per curve point or quote.  All numeric
output is printed with 12 significant digits in deterministic order, so
identical inputs (and seeds) produce identical output.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from .calibrate import FitOptions, FitResult, calibrate_smile, calibrate_surface
from .cir import CirActivity
from .errors import ConfigError, SubouError
from .measure import check_equivalence, check_physical_drift
from .pricing import (MarketData, ModelState, Quote, call_price, put_price,
                      spot_option_price)
from .process import DEFAULT_CONFIG, ExpansionConfig, GeneratingTuple
from .simulate import realized_qv, simulate_subou, simulate_sv_subou
from .subordinators import SubordinatorSpec

__all__ = ["main", "cmd_price", "cmd_calibrate", "cmd_simulate", "cmd_check"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _read_ini(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parser


def _get_float(section, key: str, path: str) -> float:
    try:
        return float(section[key])
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key '{key}' in [{section.name}]") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: bad number for '{key}': {section[key]}") from exc


def _get_floats(section, key: str, path: str) -> tuple[float, ...]:
    raw = section.get(key, "").replace(",", " ").split()
    try:
        return tuple(float(v) for v in raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: bad number list for '{key}'") from exc


def build_subordinator(cfg: configparser.ConfigParser, path: str) -> SubordinatorSpec:
    if "subordinator" not in cfg:
        raise ConfigError(f"{path}: missing [subordinator] section")
    sec = cfg["subordinator"]
    family = sec.get("family", "none").strip().lower()
    drift = float(sec.get("drift", "0"))
    try:
        if family in ("none", "drift"):
            return SubordinatorSpec.pure_drift(drift)
        if family in ("inverse_gaussian", "ig"):
            return SubordinatorSpec.inverse_gaussian(
                _get_float(sec, "mean_rate", path),
                _get_float(sec, "variance_rate", path), drift=drift)
        if family == "gamma":
            return SubordinatorSpec.gamma_process(
                _get_float(sec, "c", path), _get_float(sec, "eta", path),
                drift=drift)
        if family in ("compound_poisson", "cpp"):
            return SubordinatorSpec.compound_poisson_exp(
                _get_float(sec, "rate", path),
                _get_float(sec, "mean_jump", path), drift=drift)
        if family == "tempered_stable":
            return SubordinatorSpec.tempered_stable(
                _get_float(sec, "c", path), _get_float(sec, "p", path),
                _get_float(sec, "eta", path), drift=drift)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: unknown subordinator family '{family}'")


def build_state(cfg: configparser.ConfigParser, path: str) -> ModelState:
    if "model" not in cfg:
        raise ConfigError(f"{path}: missing [model] section")
    sec = cfg["model"]
    try:
        gen = GeneratingTuple(kappa=_get_float(sec, "kappa", path),
                              theta=_get_float(sec, "theta", path),
                              sigma=_get_float(sec, "sigma", path),
                              subordinator=build_subordinator(cfg, path))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    x0 = float(sec.get("x0", "0"))
    sv = None
    if "sv" in cfg:
        svs = cfg["sv"]
        try:
            sv = CirActivity(kappa=_get_float(svs, "kappa", path),
                             theta=_get_float(svs, "theta", path),
                             sigma=_get_float(svs, "sigma", path),
                             z0=_get_float(svs, "z0", path),
                             a_breaks=_get_floats(svs, "a_breaks", path),
                             a_levels=_get_floats(svs, "a_levels", path)
                             or (0.0,))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return ModelState(gen=gen, x0=x0, sv=sv)


def build_expansion(cfg: configparser.ConfigParser, path: str) -> ExpansionConfig:
    if "expansion" not in cfg:
        return DEFAULT_CONFIG
    sec = cfg["expansion"]
    try:
        return ExpansionConfig(
            n_max=int(sec.get("n_max", DEFAULT_CONFIG.n_max)),
            tol=float(sec.get("tol", DEFAULT_CONFIG.tol)),
            adaptive=sec.get("adaptive", "true").strip().lower()
            in ("true", "1", "yes"),
            sv_nodes=int(sec.get("sv_nodes", DEFAULT_CONFIG.sv_nodes)))
    except ValueError as exc:
        raise ConfigError(f"{path}: bad [expansion] value: {exc}") from exc


def read_market(path: str) -> MarketData:
    fut, disc, quotes = [], [], []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        kind, values = fields[0].lower(), fields[1:]
        try:
            nums = [float(v) for v in values]
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad number in row") from exc
        if kind == "futures" and len(nums) == 2:
            fut.append(nums)
        elif kind == "discount" and len(nums) == 2:
            disc.append(nums)
        elif kind == "quote" and len(nums) in (4, 6):
            bid, ask = (nums[4], nums[5]) if len(nums) == 6 else (None, None)
            try:
                quotes.append(Quote(expiry=nums[0], maturity=nums[1],
                                    strike=nums[2], implied_vol=nums[3],
                                    bid=bid, ask=ask))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        else:
            raise ConfigError(
                f"{path}:{lineno}: unrecognized row kind '{kind}' or wrong "
                f"field count {len(nums)}")
    if not fut or not disc:
        raise ConfigError(f"{path}: need at least one futures and one "
                          "discount row")
    fut.sort()
    disc.sort()
    try:
        return MarketData(futures_times=tuple(r[0] for r in fut),
                          futures_prices=tuple(r[1] for r in fut),
                          discount_times=tuple(r[0] for r in disc),
                          discount_factors=tuple(r[1] for r in disc),
                          quotes=tuple(quotes))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_instruments(cfg: configparser.ConfigParser, path: str) -> list[tuple]:
    if "instruments" not in cfg:
        return []
    out = []
    for key, raw in cfg["instruments"].items():
        fields = raw.replace(",", " ").split()
        if not fields:
            raise ConfigError(f"{path}: empty instrument '{key}'")
        kind = fields[0].lower()
        try:
            nums = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ConfigError(f"{path}: bad number in instrument '{key}'") from exc
        if kind in ("put", "call") and len(nums) == 3:
            out.append((key, kind, nums[0], nums[1], nums[2]))
        elif kind in ("spot_put", "spot_call") and len(nums) == 2:
            out.append((key, kind, nums[0], nums[0], nums[1]))
        else:
            raise ConfigError(
                f"{path}: instrument '{key}' must be 'put|call expiry "
                f"maturity strike' or 'spot_put|spot_call expiry strike'")
    return out


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------

def cmd_price(args) -> int:
    cfg = _read_ini(args.config)
    state = build_state(cfg, args.config)
    expansion = build_expansion(cfg, args.config)
    market = read_market(args.market)
    instruments = read_instruments(cfg, args.config)

    rows = []
    for key, kind, expiry, maturity, strike in instruments:
        if kind == "put":
            price = put_price(state, market, expiry, maturity, strike, expansion)
        elif kind == "call":
            price = call_price(state, market, expiry, maturity, strike, expansion)
        else:
            price = spot_option_price(state, market, expiry, strike, expansion,
                                      kind="put" if kind == "spot_put" else "call")
        rows.append((key, kind, expiry, maturity, strike, price))

    out = args.output or sys.stdout
    print(f"{'name':<12}{'kind':<10}{'expiry':<16}{'maturity':<16}"
          f"{'strike':<16}{'price':<16}", file=out)
    for key, kind, expiry, maturity, strike, price in rows:
        print(f"{key:<12}{kind:<10}{_fmt(expiry):<16}{_fmt(maturity):<16}"
              f"{_fmt(strike):<16}{_fmt(price):<16}", file=out)
    return 0


def cmd_calibrate(args) -> int:
    cfg = _read_ini(args.config)
    state = build_state(cfg, args.config)
    expansion = build_expansion(cfg, args.config)
    market = read_market(args.quotes)
    sec = cfg["calibration"] if "calibration" in cfg else {}
    mode = str(sec.get("mode", "smile")).strip().lower()
    options = FitOptions(
        config=expansion,
        nm_max_iter=int(sec.get("nm_max_iter", 500)),
        polish=str(sec.get("polish", "true")).strip().lower()
        in ("true", "1", "yes"))

    if mode == "surface":
        if state.sv is None:
            raise ConfigError(f"{args.config}: surface mode requires an "
                              "[sv] section")
        result = calibrate_surface(market, state, options)
    elif mode == "smile":
        result = calibrate_smile(market, state, options)
    else:
        raise ConfigError(f"{args.config}: unknown calibration mode '{mode}'")

    _write_fit(result, market, mode, args.out, args.report)
    print(f"mode={mode} rmse={_fmt(result.rmse)} "
          f"converged={str(result.converged).lower()} n_eval={result.n_eval}")
    return 0


def _write_fit(result: FitResult, market: MarketData, mode: str,
               out_path: str | None, report_path: str | None):
    if out_path:
        gen = result.state.gen
        sub = gen.subordinator
        lines = ["[model]",
                 f"kappa = {_fmt(gen.kappa)}",
                 f"theta = {_fmt(gen.theta)}",
                 f"sigma = {_fmt(gen.sigma)}",
                 f"x0 = {_fmt(result.state.x0)}",
                 "",
                 "[subordinator]",
                 "family = tempered_stable",
                 f"drift = {_fmt(sub.drift)}",
                 f"c = {_fmt(sub.c)}",
                 f"p = {_fmt(sub.p)}",
                 f"eta = {_fmt(sub.eta)}"]
        if result.state.sv is not None:
            act = result.state.sv
            lines += ["",
                      "[sv]",
                      f"kappa = {_fmt(act.kappa)}",
                      f"theta = {_fmt(act.theta)}",
                      f"sigma = {_fmt(act.sigma)}",
                      f"z0 = {_fmt(act.z0)}",
                      "a_breaks = " + " ".join(_fmt(b) for b in act.a_breaks),
                      "a_levels = " + " ".join(_fmt(v) for v in act.a_levels)]
        with open(out_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    if report_path:
        with open(report_path, "w") as fh:
            fh.write(f"mode {mode}\n"
                     f"rmse {_fmt(result.rmse)}\n"
                     f"converged {str(result.converged).lower()}\n"
                     f"n_eval {result.n_eval}\n")
            fh.write(f"{'expiry':<14}{'maturity':<14}{'strike':<14}"
                     f"{'market_vol':<16}{'residual':<16}\n")
            for quote, res in zip(market.quotes, result.residuals):
                fh.write(f"{_fmt(quote.expiry):<14}{_fmt(quote.maturity):<14}"
                         f"{_fmt(quote.strike):<14}"
                         f"{_fmt(quote.implied_vol):<16}{_fmt(res):<16}\n")


def cmd_simulate(args) -> int:
    cfg = _read_ini(args.config)
    state = build_state(cfg, args.config)
    expansion = build_expansion(cfg, args.config)
    if "simulation" not in cfg:
        raise ConfigError(f"{args.config}: missing [simulation] section")
    sec = cfg["simulation"]
    seed = int(sec.get("seed", "0"))
    n_paths = int(sec.get("n_paths", "10000"))
    n_steps = int(sec.get("n_steps", "500"))
    horizon = float(sec.get("horizon", "0.5"))
    maturities = _get_floats(sec, "maturities", args.config) or (horizon,)
    f0 = float(sec.get("f0", "100"))
    if n_paths <= 0:
        raise ConfigError(f"{args.config}: n_paths must be > 0")
    if n_steps <= 0 or horizon <= 0:
        raise ConfigError(f"{args.config}: n_steps and horizon must be > 0")
    if min(maturities) < horizon:
        raise ConfigError(f"{args.config}: maturities must be >= horizon")

    market = MarketData.flat(f0=f0)
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, horizon, n_steps + 1)[1:]
    if state.sv is None:
        bundle = simulate_subou(state.gen, grid, n_paths, rng, x0=state.x0)
    else:
        bundle = simulate_sv_subou(state, grid, n_paths, rng)

    out = args.output or sys.stdout
    print(f"# seed {seed} n_paths {n_paths} n_steps {n_steps} "
          f"horizon {_fmt(horizon)}", file=out)
    print(f"{'maturity':<16}{'mean_qv':<20}{'std_err':<20}", file=out)
    for mat in maturities:
        qv = realized_qv(bundle, mat, state, market, expansion)
        mean = float(np.mean(qv))
        se = float(np.std(qv, ddof=1) / np.sqrt(n_paths))
        print(f"{_fmt(mat):<16}{_fmt(mean):<20}{_fmt(se):<20}", file=out)

    if args.dump_paths:
        n_dump = min(args.n_dump, n_paths)
        with open(args.dump_paths, "w") as fh:
            fh.write("# time " + " ".join(f"path{i}" for i in range(n_dump))
                     + "\n")
            for j, tj in enumerate(bundle.grid):
                vals = " ".join(_fmt(v) for v in bundle.x_paths[:n_dump, j])
                fh.write(f"{_fmt(tj)} {vals}\n")
    return 0


def cmd_check(args) -> int:
    cfg_q = _read_ini(args.config_q)
    cfg_p = _read_ini(args.config_p)
    state_q = build_state(cfg_q, args.config_q)
    state_p = build_state(cfg_p, args.config_p)
    tol = float(cfg_q["measure"].get("tol", "1e-9")) if "measure" in cfg_q \
        else 1e-9

    if "drift" in cfg_p:
        times = _get_floats(cfg_p["drift"], "times", args.config_p)
        values = _get_floats(cfg_p["drift"], "values", args.config_p)
        verdict = check_physical_drift(state_q.gen, state_p.gen,
                                       times, values, tol=tol)
    else:
        verdict = check_equivalence(state_q.gen, state_p.gen, tol=tol)

    if verdict.equivalent:
        print("equivalent")
        return 0
    print(f"not-equivalent: {verdict.reason}")
    return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="subou",
        description="Pricing, calibration and simulation for subordinate "
                    "OU commodity models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_price = sub.add_parser("price", help="price configured instruments")
    p_price.add_argument("config")
    p_price.add_argument("market")
    p_price.set_defaults(func=cmd_price, output=None)

    p_cal = sub.add_parser("calibrate", help="fit model parameters to quotes")
    p_cal.add_argument("config")
    p_cal.add_argument("quotes")
    p_cal.add_argument("-o", "--out", default=None,
                       help="write fitted parameters to this file")
    p_cal.add_argument("-r", "--report", default=None,
                       help="write the residual report to this file")
    p_cal.set_defaults(func=cmd_calibrate)

    p_sim = sub.add_parser("simulate", help="simulate paths and report "
                                            "realized quadratic variation")
    p_sim.add_argument("config")
    p_sim.add_argument("--dump-paths", default=None,
                       help="write sampled paths to this file")
    p_sim.add_argument("--n-dump", type=int, default=10)
    p_sim.set_defaults(func=cmd_simulate, output=None)

    p_chk = sub.add_parser("check", help="equivalent-measure verdict for a "
                                         "pair of model configs")
    p_chk.add_argument("config_q")
    p_chk.add_argument("config_p")
    p_chk.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SubouError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    except ValueError as exc:
        record = {"error": "ValueError", "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
