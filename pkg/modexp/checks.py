"""
Property checks run by the `selftest` and `vnc-check` subcommands.

Each check is a named callable that returns a short detail line on success
and raises on a violation; run_checks records a failed row instead of
stopping.
"""
from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader

from .bounds import lower_bound, profile, upper_bound
from .channel import Channel, InputDistribution, random_channel
from .dpt import AlphaVector, gen_e, zeta
from .errors import ModexpError
from .exponents import OptimizationSettings, capacity, e0_opt, e_sp, gallager_e0, resolve_settings, uce_e0
from .jobs import parallel_map
from .utils import clamp_text
from .vnc import ConvergenceRow, convergence_suite

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"

Check = tuple[str, Callable[[], str]]


class PropertyViolation(ModexpError):
    pass


@dataclass
class CheckResult:
    name: str
    status: str
    output: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


def _run_one(check: Check) -> CheckResult:
    name, fn = check
    try:
        return CheckResult(name, "pass", clamp_text(fn(), 2000))
    except Exception as e:
        logger.debug("check %s failed: %s", name, e)
        return CheckResult(name, "fail", clamp_text(f"{type(e).__name__}: {e}", 2000))


def run_checks(checks: Sequence[Check]) -> list[CheckResult]:
    return parallel_map(_run_one, list(checks))


def render_report(title: str, results: Sequence[CheckResult]) -> str:
    env = Environment(loader=FileSystemLoader(str(TEMPLATES_DIR)), keep_trailing_newline=True)
    failed = [r for r in results if not r.passed]
    width = max((len(r.name) for r in results), default=4)
    return env.get_template("check_report.txt.j2").render(
        title=title, results=results, failed=failed, width=width,
    )


# -- channel properties ---------------------------------------------------

_ORDERS = tuple(np.linspace(0.0, 4.0, 9).tolist())


def check_e0_shape(channel: Channel, settings: OptimizationSettings, tol: float = 1e-8) -> str:
    """max_q E0 is nondecreasing in the order; at fixed q it is also concave."""
    values = [e0_opt(channel, r, settings).value for r in _ORDERS]
    steps = np.diff(values)
    if np.any(steps < -tol):
        raise PropertyViolation(f"E0 decreases by {-steps.min():.3g}")
    q = e0_opt(channel, 1.0, settings).argmax
    fixed = np.array([gallager_e0(channel, q, r) for r in _ORDERS])
    bend = np.diff(fixed, 2)
    if np.any(bend > tol):
        raise PropertyViolation(f"E0(., q) has second difference {bend.max():.3g} > 0")
    return f"E0(4) = {values[-1]:.6g}"


def check_sp_convex(channel: Channel, settings: OptimizationSettings, tol: float = 1e-7) -> str:
    cap = capacity(channel, settings)
    rates = np.linspace(0.1 * cap, 0.9 * cap, 7)
    values = np.array([e_sp(channel, r, settings) for r in rates])
    if not np.all(np.isfinite(values)):
        return "E_sp infinite inside (0, C); skipped"
    if np.any(np.diff(values) > tol):
        raise PropertyViolation("E_sp increases in R")
    bend = np.diff(values, 2)
    if np.any(bend < -tol):
        raise PropertyViolation(f"E_sp has second difference {bend.min():.3g} < 0")
    return f"E_sp over [0.1C, 0.9C] from {values[0]:.6g} to {values[-1]:.6g}"


def check_envelope(channel: Channel, settings: OptimizationSettings, tol: float = 1e-9) -> str:
    gaps = [uce_e0(channel, r, settings) - e0_opt(channel, r, settings).value for r in _ORDERS[1:]]
    if min(gaps) < -tol:
        raise PropertyViolation(f"envelope below E0 by {-min(gaps):.3g}")
    return f"max envelope gap {max(gaps):.3g}"


def check_sandwich(channel: Channel, settings: OptimizationSettings, tol: float = 1e-7) -> str:
    prof = profile(channel, settings)
    worst = -math.inf
    for rho in (0.1, 1.0, 10.0):
        lower = lower_bound(channel, rho, prof, settings).value
        upper = upper_bound(channel, rho, prof, settings)
        if lower > upper + tol:
            raise PropertyViolation(f"lower {lower:.9g} > upper {upper:.9g} at rho={rho:g}")
        if upper > 0:
            worst = max(worst, lower / upper)
    return f"max lower/upper {worst:.6g}"


def check_zeta_identity(channel: Channel, q: InputDistribution) -> str:
    """Symmetric weights reduce the multi-letter functional to E0; zeta is the two-branch minimum."""
    for k in (2, 3, 4):
        left = gen_e(channel, AlphaVector.symmetric(k), q)
        right = gallager_e0(channel, q, k - 1.0)
        if abs(left - right) > 1e-12 * max(1.0, abs(right)):
            raise PropertyViolation(f"k={k}: {left!r} != E0 {right!r}")
    for rho in (0.5, 1.0, 2.0):
        for a in np.linspace(0.0, 1.0, 11):
            if zeta(rho, float(a)) != min(float(a), (1.0 - float(a)) / rho):
                raise PropertyViolation(f"zeta({rho:g}, {a:g}) off its branches")
    return "ok"


def selftest_checks(count: int, seed: int = 0, settings: Optional[OptimizationSettings] = None) -> list[Check]:
    """Property checks over `count` random channels with 2..4 inputs and outputs."""
    settings = resolve_settings(settings)
    checks: list[Check] = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        k, m = (int(v) for v in rng.integers(2, 5, size=2))
        ch = random_channel(rng, k, m)
        q = InputDistribution.from_weights(rng.dirichlet(np.ones(k)))
        tag = f"channel[{i}] {k}x{m}"
        checks += [
            (f"{tag} e0-shape", lambda ch=ch: check_e0_shape(ch, settings)),
            (f"{tag} sp-convex", lambda ch=ch: check_sp_convex(ch, settings)),
            (f"{tag} envelope", lambda ch=ch: check_envelope(ch, settings)),
            (f"{tag} sandwich", lambda ch=ch: check_sandwich(ch, settings)),
            (f"{tag} zeta", lambda ch=ch, q=q: check_zeta_identity(ch, q)),
        ]
    return checks


# -- very noisy convergence -----------------------------------------------

def _row_name(row: ConvergenceRow) -> str:
    if math.isnan(row.rho):
        return f"s={row.scale:g} {row.quantity}"
    return f"s={row.scale:g} {row.quantity} rho={row.rho:g}"


def _row_check(row: ConvergenceRow, tolerance: float) -> Check:
    def fn() -> str:
        detail = f"computed={row.computed:.6g} expected={row.expected:.6g} rel_err={row.rel_error:.3g}"
        if not row.rel_error <= tolerance:
            raise PropertyViolation(detail)
        return detail
    return _row_name(row), fn


def _trend_check(rows: list[ConvergenceRow]) -> Check:
    rows = sorted(rows, key=lambda r: -r.scale)
    errors = [r.rel_error for r in rows]

    def fn() -> str:
        detail = " ".join(f"{r.scale:g}:{e:.3g}" for r, e in zip(rows, errors))
        if any(b > a + 1e-9 for a, b in zip(errors, errors[1:])):
            raise PropertyViolation(f"error grows as the scale shrinks: {detail}")
        return detail

    head = rows[0]
    suffix = "" if math.isnan(head.rho) else f" rho={head.rho:g}"
    return f"trend {head.quantity}{suffix}", fn


def vnc_checks(scales: Sequence[float] = (0.05, 0.02, 0.01), rhos: Sequence[float] = (0.25, 1.0, 4.0),
               tolerance: float = 0.10, settings: Optional[OptimizationSettings] = None) -> list[Check]:
    """Rows of the convergence suite within tolerance, and errors shrinking with the scale."""
    rows = convergence_suite(scales, rhos, settings)
    checks = [_row_check(r, tolerance) for r in rows]
    groups: dict[tuple[str, float], list[ConvergenceRow]] = {}
    for r in rows:
        groups.setdefault((r.quantity, -1.0 if math.isnan(r.rho) else r.rho), []).append(r)
    if len(scales) > 1:
        checks += [_trend_check(g) for g in groups.values()]
    return checks
