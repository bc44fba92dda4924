from __future__ import annotations
import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Literal, Optional, Sequence

# MODEXP_* variables from .env must be set before config is imported
from dotenv import load_dotenv
load_dotenv()

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import config
from .bounds import lower_bound, multidim_bound, MultiDimWeights, opt_rate, profile, upper_bound
from .channel import Channel, read_channel
from .checks import render_report, run_checks, selftest_checks, vnc_checks
from .curves import ExponentCurve, e0_curve, render_curves, sample_curve
from .dpt import dpt_bound
from .errors import BudgetExceeded, ModexpError, NonConvergence, ParseError
from .exponents import (
    Diverges,
    OptimizationSettings,
    ProfileUnavailable,
    e_ex,
    e_r,
    e_sp,
    straight_line,
)
from .jobs import set_threads
from .scheme import exact_multidim_moment, moment_series, multidim_scheme, simulate_multidim
from .utils import format_extended, jsonable, parse_grid_spec, parse_number_list

logger = logging.getLogger("modexp")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONCONVERGENCE = 2
EXIT_BUDGET = 3
EXIT_CHECKS = 4

LN2 = math.log(2.0)


class RunConfig(BaseModel):
    """Everything one invocation needs; flags override values from --config."""
    model_config = ConfigDict(extra="forbid")

    subcommand: Literal["exponents", "bounds", "profile", "dpt", "vnc-check", "simulate", "multidim", "selftest"]
    channel: Optional[str] = None
    rho_grid: str = "0.01:100:50:log"
    rate_points: int = Field(default=50, ge=2)
    order_grid: Optional[str] = None
    rho: Optional[float] = Field(default=None, gt=0)
    rate: str = "auto"
    n_list: list[int] = Field(default_factory=lambda: [2, 4, 6, 8])
    n: Optional[int] = Field(default=None, ge=1)
    d: int = Field(default=1, ge=1)
    rate_per_dim: Optional[float] = Field(default=None, gt=0)
    weights: Optional[list[float]] = None
    trials: int = Field(default=0, ge=0)
    exact: bool = False
    seeds: int = Field(default=config.SEED_SEARCH, ge=1)
    keep_fraction: Optional[float] = Field(default=None, gt=0, le=1)
    kmax: int = Field(default=config.DPT_KMAX, ge=2)
    starts: Optional[int] = Field(default=None, ge=1)
    restarts: int = Field(default=config.RESTARTS, ge=1)
    max_iters: int = Field(default=config.MAX_ITERS, ge=1)
    tolerance: float = Field(default=config.TOLERANCE, gt=0)
    scale: list[float] = Field(default_factory=lambda: [0.05, 0.02, 0.01])
    rhos: list[float] = Field(default_factory=lambda: [0.25, 1.0, 4.0])
    check_tolerance: float = Field(default=0.10, gt=0)
    channels: int = Field(default=100, ge=1)
    seed: int = config.SEED
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    bits: bool = False
    normalize: bool = False
    threads: Optional[int] = Field(default=None, ge=1)
    log_level: str = config.LOG_LEVEL

    @field_validator("rho_grid", "order_grid")
    @classmethod
    def _grid(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            parse_grid_spec(v)
        return v

    @field_validator("channel", "output")
    @classmethod
    def _path(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not v.strip():
            raise ValueError("path must be nonempty")
        return v

    @field_validator("rate")
    @classmethod
    def _rate(cls, v: str) -> str:
        if v != "auto":
            try:
                if not float(v) > 0:
                    raise ValueError
            except ValueError:
                raise ValueError(f"rate must be 'auto' or a positive number, got {v!r}") from None
        return v

    @field_validator("n_list", "scale", "rhos", "weights", mode="before")
    @classmethod
    def _lists(cls, v: Any) -> Any:
        if isinstance(v, str):
            return parse_number_list(v)
        if isinstance(v, (int, float)):
            return [v]
        return v

    def settings(self) -> OptimizationSettings:
        s = OptimizationSettings(max_iters=self.max_iters, tolerance=self.tolerance,
                                 restarts=self.restarts, seed=self.seed)
        if self.order_grid is not None:
            s = s.replace(rho_grid=tuple(parse_grid_spec(self.order_grid).tolist()))
        return s

    def load_channel(self) -> Channel:
        if self.channel is None:
            raise ParseError(f"{self.subcommand} needs --channel")
        return read_channel(self.channel)


# -- output ---------------------------------------------------------------

def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def _table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format_extended(v)
    return str(v)


def _unit(cfg: RunConfig, cap: float) -> float:
    """Divisor applied to exponents and rates on output."""
    factor = LN2 if cfg.bits else 1.0
    if cfg.normalize:
        factor = cap if cap > 0 else 1.0
    return factor


# -- subcommands ----------------------------------------------------------

def _exponent_or_inf(fn) -> float:
    try:
        return fn()
    except Diverges:
        return math.inf


def cmd_exponents(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    settings = cfg.settings()
    prof = profile(ch, settings)
    cap = prof.capacity
    orders = parse_grid_spec(cfg.rho_grid)
    rates = [cap * i / (cfg.rate_points - 1) for i in range(cfg.rate_points)]
    curves = [
        e0_curve(ch, orders, settings),
        e0_curve(ch, orders, settings, envelope=True),
        sample_curve(lambda r: e_sp(ch, r, settings), rates, "e_sp"),
        sample_curve(lambda r: e_r(ch, r, settings).value, rates, "e_r"),
        sample_curve(lambda r: _exponent_or_inf(lambda: e_ex(ch, r, prof.q, settings).value), rates, "e_ex"),
    ]
    try:
        curves.append(sample_curve(lambda r: straight_line(ch, r, prof, settings), rates, "straight_line"))
    except ProfileUnavailable as e:
        logger.warning("skipping straight_line curve: %s", e)
    unit = _unit(cfg, cap)
    if unit != 1.0:
        curves = [_rescale(c, unit) for c in curves]
    _emit(render_curves(curves, cfg.format), cfg)
    return EXIT_OK


def _rescale(curve: ExponentCurve, unit: float) -> ExponentCurve:
    # rate curves carry rates on the axis too
    if curve.kind in ("e0", "uce_e0"):
        return curve.scaled(unit)
    return ExponentCurve(curve.args / unit, curve.values / unit, curve.kind)


def cmd_bounds(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    settings = cfg.settings()
    prof = profile(ch, settings)
    unit = _unit(cfg, prof.capacity)

    def row(rho: float) -> dict:
        lower = lower_bound(ch, rho, prof, settings)
        return {
            "rho": rho,
            "lower": lower.value / unit,
            "upper": upper_bound(ch, rho, prof, settings) / unit,
            "rate": opt_rate(ch, rho, prof, settings) / unit,
            "branch": lower.branch,
        }

    rows = [row(float(r)) for r in parse_grid_spec(cfg.rho_grid)]
    columns = ("rho", "lower", "upper", "rate", "branch")
    _emit(_table(rows, columns) if cfg.format == "csv" else _json(rows), cfg)
    return EXIT_OK


def cmd_profile(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    prof = profile(ch, cfg.settings())
    out = prof.to_dict()
    if cfg.bits:
        for key in ("capacity", "e_ex0", "r0", "r_minus", "r_plus", "e0_at_1"):
            out[key] = out[key] / LN2
    _emit(_json(out), cfg)
    return EXIT_OK


def cmd_dpt(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    if cfg.rho is None:
        raise ParseError("dpt needs --rho")
    result = dpt_bound(ch, cfg.rho, cfg.kmax, cfg.settings(), cfg.starts)
    out = result.to_dict()
    if cfg.bits:
        out["value"] = out["value"] / LN2
    _emit(_json(out), cfg)
    return EXIT_OK


def _report(title: str, checks, cfg: RunConfig) -> int:
    results = run_checks(checks)
    if cfg.format == "json":
        _emit(_json([r.to_dict() for r in results]), cfg)
    else:
        _emit(render_report(title, results), cfg)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


def cmd_vnc_check(cfg: RunConfig) -> int:
    checks = vnc_checks(cfg.scale, cfg.rhos, cfg.check_tolerance, cfg.settings())
    return _report("very noisy channel convergence", checks, cfg)


def cmd_selftest(cfg: RunConfig) -> int:
    checks = selftest_checks(cfg.channels, cfg.seed, cfg.settings())
    return _report(f"property checks over {cfg.channels} random channels", checks, cfg)


def cmd_simulate(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    if cfg.rho is None:
        raise ParseError("simulate needs --rho")
    settings = cfg.settings()
    prof = profile(ch, settings)
    if cfg.rate == "auto":
        rate = opt_rate(ch, cfg.rho, prof, settings)
        logger.info("rate auto -> %.9g", rate)
    else:
        rate = float(cfg.rate)
    report = moment_series(ch, cfg.n_list, rate, cfg.rho, prof.q, cfg.seeds, cfg.seed,
                           exact=cfg.exact, trials=cfg.trials, keep_fraction=cfg.keep_fraction)
    if cfg.format == "csv":
        _emit(_table(report.rows(), ("n", "moment", "stderr", "exact")), cfg)
    else:
        _emit(_json({"rate": rate, **report.to_dict()}), cfg)
    return EXIT_OK


def cmd_multidim(cfg: RunConfig) -> int:
    ch = cfg.load_channel()
    settings = cfg.settings()
    if cfg.n is not None:
        if cfg.rate_per_dim is None or cfg.rho is None:
            raise ParseError("multidim --n needs --rate-per-dim and --rho")
        scheme = multidim_scheme(ch, cfg.n, cfg.d, cfg.rate_per_dim, seed=cfg.seed)
        out: dict[str, Any] = {"n": cfg.n, "d": cfg.d, "m_per_axis": scheme.m}
        if cfg.exact:
            out["exact"] = exact_multidim_moment(ch, scheme, cfg.rho)
        if cfg.trials > 0:
            out["simulated"] = [r.to_dict() for r in simulate_multidim(ch, scheme, cfg.rho, cfg.trials, cfg.seed)]
        _emit(_json(out), cfg)
        return EXIT_OK
    weights = MultiDimWeights.shifted(cfg.weights or [0.0] * cfg.d)
    prof = profile(ch, settings)
    unit = _unit(cfg, prof.capacity)
    curve = sample_curve(lambda r: multidim_bound(ch, r, weights, prof, settings), parse_grid_spec(cfg.rho_grid),
                         f"multidim_d{weights.d}")
    _emit(render_curves([curve.scaled(unit) if unit != 1.0 else curve], cfg.format), cfg)
    return EXIT_OK


COMMANDS = {
    "exponents": cmd_exponents,
    "bounds": cmd_bounds,
    "profile": cmd_profile,
    "dpt": cmd_dpt,
    "vnc-check": cmd_vnc_check,
    "simulate": cmd_simulate,
    "multidim": cmd_multidim,
    "selftest": cmd_selftest,
}


def run(cfg: RunConfig) -> int:
    """Execute one subcommand and map failures onto exit codes."""
    if cfg.threads is not None:
        set_threads(cfg.threads)
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except NonConvergence as e:
        sys.stderr.write(_json({"error": str(e), "diagnostics": e.diagnostics}))
        return EXIT_NONCONVERGENCE
    except BudgetExceeded as e:
        logger.error("%s", e)
        return EXIT_BUDGET
    except (ModexpError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR


# -- argument parsing -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="YAML or JSON file mirroring these flags")
    common.add_argument("--seed", type=int, help="master seed (MODEXP_SEED, default 0)")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help="worker pool size (MODEXP_THREADS)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")
    common.add_argument("--bits", action="store_true", help="report exponents in bits")
    common.add_argument("--restarts", type=int)
    common.add_argument("--max-iters", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--order-grid", help="start:stop:count[:log|lin] grid for sup searches")

    channel = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    channel.add_argument("--channel", help="channel file (.json or .csv)")

    grid = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    grid.add_argument("--rho-grid", help="start:stop:count[:log|lin]")
    grid.add_argument("--normalize", action="store_true", help="divide exponents by C")

    p = argparse.ArgumentParser(prog="modexp", description="Bounds on modulation-estimation exponents over a DMC.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("exponents", parents=[common, channel, grid], help="E0, envelope, E_sp, E_r, E_ex curves")
    s.add_argument("--rate-points", type=int)

    sub.add_parser("bounds", parents=[common, channel, grid], help="rho,lower,upper,rate,branch table")
    sub.add_parser("profile", parents=[common, channel], help="capacity and derived constants")

    s = sub.add_parser("dpt", parents=[common, channel], help="generalized data-processing bound")
    s.add_argument("--rho", type=float)
    s.add_argument("--kmax", type=int)
    s.add_argument("--starts", type=int, help="alpha search starts per k")

    s = sub.add_parser("vnc-check", parents=[common], help="very noisy channel convergence checks")
    s.add_argument("--scale", help="comma-separated scales")
    s.add_argument("--rhos", help="comma-separated orders")
    s.add_argument("--check-tolerance", type=float)

    s = sub.add_parser("simulate", parents=[common, channel], help="quantize-and-code moments")
    s.add_argument("--rho", type=float)
    s.add_argument("--rate", help="rate in nats, or 'auto' for the optimal rate")
    s.add_argument("--n-list", help="comma-separated block lengths")
    s.add_argument("--trials", type=int)
    s.add_argument("--exact", action="store_true")
    s.add_argument("--seeds", type=int, help="codebooks tried per block length")
    s.add_argument("--keep-fraction", type=float, help="expurgate down to this fraction")

    s = sub.add_parser("multidim", parents=[common, channel, grid], help="several parameters at once")
    s.add_argument("--d", type=int)
    s.add_argument("--weights", help="comma-separated per-parameter rates r_i")
    s.add_argument("--rho", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--rate-per-dim", type=float)
    s.add_argument("--trials", type=int)
    s.add_argument("--exact", action="store_true")

    s = sub.add_parser("selftest", parents=[common], help="property checks over random channels")
    s.add_argument("--channels", type=int)
    return p


def _load_config_file(path: str) -> dict[str, Any]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ParseError(f"cannot read config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ParseError(f"config {path} must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    values: dict[str, Any] = {}
    path = args.pop("config", None)
    if path:
        values.update(_load_config_file(path))
    values.update(args)
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ParseError(str(e)) from None


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
    except ParseError as e:
        _setup_logging(config.LOG_LEVEL)
        logger.error("%s", e)
        return EXIT_ERROR
    _setup_logging(cfg.log_level)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
