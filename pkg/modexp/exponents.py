"""
Classical exponent functions of a discrete memoryless channel.

All values are in nats. Extended reals are plain floats: +inf is returned
where a function is genuinely infinite, and -inf is never produced.
"""
from __future__ import annotations
import functools
import logging
import math
import threading
from dataclasses import dataclass, field, replace as dc_replace
from typing import TYPE_CHECKING, Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import config
from .channel import Channel, InputDistribution
from .errors import DomainError, ModexpError, NonConvergence
from .jobs import parallel_map
from .simplex import dirichlet_starts, multistart, vertices

if TYPE_CHECKING:
    from .bounds import ChannelProfile

logger = logging.getLogger(__name__)

# search ranges for the sup over the order parameter
SP_RANGE = (0.0, 1e3)
R_RANGE = (0.0, 1.0)
EX_RANGE = (1.0, 1e3)

_LOG_FLOOR = -700.0


class NegativeOrder(DomainError):
    pass


class Diverges(ModexpError):
    pass


class ProfileUnavailable(ModexpError):
    pass


def default_rho_grid() -> tuple[float, ...]:
    return tuple(np.geomspace(config.RHO_GRID_MIN, config.RHO_GRID_MAX, config.RHO_GRID_POINTS).tolist())


@dataclass(frozen=True)
class OptimizationSettings:
    max_iters: int = config.MAX_ITERS
    tolerance: float = config.TOLERANCE
    restarts: int = config.RESTARTS
    rho_grid: tuple[float, ...] = field(default_factory=default_rho_grid)
    seed: int = config.SEED

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise DomainError("tolerance must be > 0")
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        grid = tuple(float(r) for r in self.rho_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
            raise DomainError("rho_grid must be positive and strictly increasing")
        object.__setattr__(self, "rho_grid", grid)

    @classmethod
    def from_env(cls) -> "OptimizationSettings":
        return cls()

    def replace(self, **changes) -> "OptimizationSettings":
        return dc_replace(self, **changes)

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.rho_grid)


class E0Result(NamedTuple):
    value: float
    argmax: InputDistribution


class ExponentValue(NamedTuple):
    value: float
    rho: float


def resolve_settings(settings: Optional[OptimizationSettings]) -> OptimizationSettings:
    return settings if settings is not None else OptimizationSettings()


def _log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _check_q(channel: Channel, q: InputDistribution) -> None:
    if q.size != channel.input_size:
        raise DomainError(f"Input distribution has {q.size} entries, channel has {channel.input_size} inputs")


# -- Gallager function ----------------------------------------------------

def _log_inner(logp: np.ndarray, logq: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray, float]:
    a = logp / (1.0 + rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a = logsumexp(logq[:, None] + a, axis=0)
        log_f = float(logsumexp((1.0 + rho) * log_a))
    return a, log_a, log_f


def gallager_e0(channel: Channel, q: InputDistribution, rho: float) -> float:
    """E0(rho, q) = -ln sum_y [sum_x q(x) p(y|x)^(1/(1+rho))]^(1+rho)."""
    if rho < 0:
        raise NegativeOrder(f"rho must be >= 0, got {rho!r}")
    _check_q(channel, q)
    if rho == 0:
        return 0.0
    _, _, log_f = _log_inner(_log(channel.matrix), _log(q.probs), rho)
    return max(0.0, -log_f)


def _e0_gap(logp: np.ndarray, logq: np.ndarray, rho: float) -> tuple[float, float, np.ndarray]:
    """Value, certified optimality gap (nats) and the log gradient ratios."""
    a, log_a, log_f = _log_inner(logp, logq, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = logsumexp(rho * log_a[None, :] + a, axis=1) - log_f
    slack = (1.0 + rho) * -math.expm1(min(float(np.min(log_r)), 0.0))
    gap = math.inf if slack >= 1.0 else -math.log1p(-slack)
    return -log_f, gap, log_r


def _solve_e0(logp: np.ndarray, q0: np.ndarray, rho: float, max_iters: int, tolerance: float):
    logq = _log(q0)
    logq = np.maximum(logq - logsumexp(logq), _LOG_FLOOR)
    value, gap, log_r = _e0_gap(logp, logq, rho)
    eta = 1.0 / rho
    it = 0
    while gap > tolerance and it < max_iters:
        it += 1
        cand = logq - eta * log_r
        cand = np.maximum(cand - logsumexp(cand), _LOG_FLOOR)
        c_value, c_gap, c_log_r = _e0_gap(logp, cand, rho)
        if c_value >= value:
            logq, value, gap, log_r = cand, c_value, c_gap, c_log_r
            eta = min(eta * 1.5, 1e6)
        else:
            eta *= 0.5
            if eta < 1e-14:
                break
    q = np.exp(logq)
    return value, q / q.sum(), gap, it


@functools.lru_cache(maxsize=64)
def _e0_table(channel: Channel, settings: OptimizationSettings) -> tuple[dict[float, E0Result], threading.Lock]:
    return {}, threading.Lock()


def e0_opt(channel: Channel, rho: float, settings: Optional[OptimizationSettings] = None) -> E0Result:
    """
    Maximize E0(rho, q) over the input simplex.

    The inner sum is convex in q, so the iteration (an adaptive multiplicative
    update) carries a duality-gap certificate; the result is accepted when the
    gap is within settings.tolerance.

    Raises:
        NegativeOrder: rho < 0.
        NonConvergence: gap above tolerance after max_iters on every start.
    """
    if rho < 0:
        raise NegativeOrder(f"rho must be >= 0, got {rho!r}")
    settings = resolve_settings(settings)
    k = channel.input_size
    if rho == 0:
        return E0Result(0.0, InputDistribution.uniform(k))
    rho = float(rho)
    table, lock = _e0_table(channel, settings)
    with lock:
        hit = table.get(rho)
    if hit is not None:
        return hit

    logp = _log(channel.matrix)
    starts = [np.full(k, 1.0 / k)] + dirichlet_starts(k, settings.restarts - 1, settings.seed)
    best = None
    for q0 in starts:
        value, q, gap, iters = _solve_e0(logp, q0, rho, settings.max_iters, settings.tolerance)
        logger.debug("e0_opt rho=%g value=%.12g gap=%.3g iters=%d", rho, value, gap, iters)
        if best is None or (gap <= settings.tolerance and (best[2] > settings.tolerance or value > best[0])):
            best = (value, q, gap, iters)
    value, q, gap, iters = best
    if gap > settings.tolerance:
        raise NonConvergence(
            f"E0 optimization at rho={rho:g} stopped with gap {gap:.3g}",
            {"operation": "e0_opt", "rho": rho, "gap": gap, "iterations": iters, "value": value},
        )
    result = E0Result(max(0.0, value), InputDistribution(q))
    with lock:
        table[rho] = result
    return result


# -- capacity -------------------------------------------------------------

def _divergences(p: np.ndarray, plogp: np.ndarray, q: np.ndarray) -> np.ndarray:
    logpy = _log(q @ p)
    with np.errstate(invalid="ignore"):
        cross = np.where(p > 0, p * logpy[None, :], 0.0).sum(axis=1)
    return plogp - cross


@functools.lru_cache(maxsize=64)
def capacity_with_input(channel: Channel, settings: Optional[OptimizationSettings] = None) -> tuple[float, InputDistribution]:
    """Blahut-Arimoto with an adaptive step; returns (C, capacity-achieving q)."""
    settings = resolve_settings(settings)
    p = channel.matrix
    k = channel.input_size
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)
    logq = np.full(k, -math.log(k))
    d = _divergences(p, plogp, np.exp(logq))
    info = float(np.exp(logq) @ d)
    gap = float(d.max()) - info
    eta = 1.0
    it = 0
    while gap > settings.tolerance and it < settings.max_iters:
        it += 1
        cand = logq + eta * d
        cand = np.maximum(cand - logsumexp(cand), _LOG_FLOOR)
        c_d = _divergences(p, plogp, np.exp(cand))
        c_info = float(np.exp(cand) @ c_d)
        if c_info >= info or eta <= 1.0:
            logq, d, info = cand, c_d, c_info
            gap = float(d.max()) - info
            eta *= 1.5
        else:
            eta = max(1.0, eta * 0.5)
    if gap > settings.tolerance:
        raise NonConvergence(
            f"capacity iteration stopped with gap {gap:.3g}",
            {"operation": "capacity", "gap": gap, "iterations": it, "value": info},
        )
    q = np.exp(logq)
    logger.debug("capacity %.12g after %d iterations", info, it)
    return max(0.0, info), InputDistribution(q / q.sum())


def capacity(channel: Channel, settings: Optional[OptimizationSettings] = None) -> float:
    return capacity_with_input(channel, settings)[0]


# -- expurgated exponent --------------------------------------------------

def bhattacharyya_matrix(channel: Channel) -> np.ndarray:
    sq = np.sqrt(channel.matrix)
    b = np.clip(sq @ sq.T, 0.0, 1.0)
    np.fill_diagonal(b, 1.0)
    return b


def e_x_weighted(b: np.ndarray, q: np.ndarray, rho: float) -> float:
    w = np.outer(q, q)
    with np.errstate(divide="ignore"):
        terms = np.expm1(np.log(b) / rho)
    return max(0.0, -rho * math.log1p(float(np.sum(w * terms))))


def default_expurgation_q(channel: Channel, settings: Optional[OptimizationSettings] = None) -> InputDistribution:
    """The E0(1)-optimal input, used wherever E_x needs a q."""
    return e0_opt(channel, 1.0, settings).argmax


def optimize_e_x(channel: Channel, rho: float, settings: Optional[OptimizationSettings] = None) -> tuple[float, InputDistribution]:
    """Multi-start ascent of E_x over q. The problem is not convex; the result is the best found."""
    if rho < 1:
        raise NegativeOrder(f"E_x needs rho >= 1, got {rho!r}")
    settings = resolve_settings(settings)
    b = bhattacharyya_matrix(channel)
    with np.errstate(divide="ignore"):
        wb = np.exp(np.log(b) / rho)
    k = channel.input_size

    def grad(q: np.ndarray) -> np.ndarray:
        s = float(q @ wb @ q)
        return -2.0 * rho * (wb @ q) / s

    starts = [np.full(k, 1.0 / k)] + vertices(k) + dirichlet_starts(k, settings.restarts, settings.seed)
    best = multistart(lambda q: e_x_weighted(b, q, rho), grad, starts, settings.max_iters, settings.tolerance)
    assert best is not None
    return best.value, InputDistribution.from_weights(best.x)


def e_x(
    channel: Channel,
    q: Optional[InputDistribution],
    rho: float,
    optimize_q: bool = False,
    settings: Optional[OptimizationSettings] = None,
) -> float:
    """E_x(rho, q) = -rho ln sum q(x)q(x') B(x,x')^(1/rho), for rho >= 1."""
    if rho < 1:
        raise NegativeOrder(f"E_x needs rho >= 1, got {rho!r}")
    if optimize_q:
        return optimize_e_x(channel, rho, settings)[0]
    if q is None:
        q = default_expurgation_q(channel, settings)
    _check_q(channel, q)
    return e_x_weighted(bhattacharyya_matrix(channel), q.probs, float(rho))


def e_ex_zero(channel: Channel, q: InputDistribution) -> float:
    """Zero-rate expurgated exponent -sum q q' ln B; +inf on any used pair with B = 0."""
    _check_q(channel, q)
    b = bhattacharyya_matrix(channel)
    w = np.outer(q.probs, q.probs)
    used = w > 0
    if np.any(b[used] == 0.0):
        return math.inf
    return max(0.0, float(-np.sum(w[used] * np.log(b[used]))))


def zero_error_rate(channel: Channel, q: InputDistribution) -> float:
    """-ln of the mass on pairs with B > 0; E_ex(R) is infinite below this rate."""
    b = bhattacharyya_matrix(channel)
    w = np.outer(q.probs, q.probs)
    mass = float(np.sum(w[b > 0]))
    return max(0.0, -math.log(mass))


# -- sup over the order parameter ----------------------------------------

def sup_over_rho(
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    settings: Optional[OptimizationSettings] = None,
) -> ExponentValue:
    """
    sup of objective on [lo, hi]: coarse pass over the settings grid, then a
    bounded scalar search between the neighbours of the best grid point.
    Ties go to the smaller argument.
    """
    settings = resolve_settings(settings)
    grid = settings.grid
    pts = np.unique(np.concatenate([[lo], grid[(grid > lo) & (grid < hi)], [hi]]))
    vals = np.asarray(parallel_map(objective, pts.tolist()), dtype=float)
    if np.any(np.isposinf(vals)):
        i = int(np.flatnonzero(np.isposinf(vals))[0])
        return ExponentValue(math.inf, float(pts[i]))
    i = int(np.argmax(vals))
    best = ExponentValue(float(vals[i]), float(pts[i]))
    left, right = float(pts[max(i - 1, 0)]), float(pts[min(i + 1, pts.size - 1)])
    if right > left:
        res = minimize_scalar(lambda r: -objective(r), bounds=(left, right), method="bounded",
                              options={"xatol": 1e-10})
        if res.success and -res.fun > best.value:
            best = ExponentValue(float(-res.fun), float(res.x))
    return best


def _has_positive_column(channel: Channel) -> bool:
    return bool(np.any(np.all(channel.matrix > 0, axis=0)))


def e_sp_at(channel: Channel, rate: float, settings: Optional[OptimizationSettings] = None) -> ExponentValue:
    """Sphere-packing exponent with its achieving order."""
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    settings = resolve_settings(settings)
    if rate >= capacity(channel, settings):
        return ExponentValue(0.0, 0.0)
    if rate == 0 and not _has_positive_column(channel):
        return ExponentValue(math.inf, math.inf)
    return sup_over_rho(lambda r: e0_opt(channel, r, settings).value - r * rate, *SP_RANGE, settings)


def e_sp(channel: Channel, rate: float, settings: Optional[OptimizationSettings] = None) -> float:
    return e_sp_at(channel, rate, settings).value


def e_r(channel: Channel, rate: float, settings: Optional[OptimizationSettings] = None) -> ExponentValue:
    """Random-coding exponent max over 0 <= rho <= 1 of E0(rho) - rho R."""
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    settings = resolve_settings(settings)
    return sup_over_rho(lambda r: e0_opt(channel, r, settings).value - r * rate, *R_RANGE, settings)


def e_ex(
    channel: Channel,
    rate: float,
    q: Optional[InputDistribution] = None,
    settings: Optional[OptimizationSettings] = None,
) -> ExponentValue:
    """
    Expurgated exponent sup over rho >= 1 of E_x(rho, q) - rho R.

    Raises:
        Diverges: E_ex(0) is infinite and R is below the zero-error rate of q.
    """
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    settings = resolve_settings(settings)
    if q is None:
        q = default_expurgation_q(channel, settings)
    _check_q(channel, q)
    if math.isinf(e_ex_zero(channel, q)) and rate < zero_error_rate(channel, q):
        raise Diverges(f"E_ex({rate:g}) is infinite for this channel")
    b = bhattacharyya_matrix(channel)
    return sup_over_rho(lambda r: e_x_weighted(b, q.probs, r) - r * rate, *EX_RANGE, settings)


def straight_line(channel: Channel, rate: float, profile: "ChannelProfile",
                  settings: Optional[OptimizationSettings] = None) -> float:
    """E_ex(0) - rho0 R below R0, E_sp(R) up to C, zero beyond."""
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    if rate > profile.capacity:
        return 0.0
    if math.isinf(profile.e_ex0) or math.isinf(profile.rho0):
        raise ProfileUnavailable("straight-line bound needs finite E_ex(0) and rho0")
    if rate <= profile.r0:
        return profile.e_ex0 - profile.rho0 * rate
    return e_sp(channel, rate, settings)


# -- concave envelope -----------------------------------------------------

@functools.lru_cache(maxsize=64)
def _e0_on_grid(channel: Channel, settings: OptimizationSettings) -> tuple[np.ndarray, np.ndarray]:
    rhos = np.concatenate([[0.0], settings.grid])
    vals = np.asarray(parallel_map(lambda r: e0_opt(channel, r, settings).value, rhos.tolist()))
    return rhos, vals


def uce_e0(channel: Channel, rho: float, settings: Optional[OptimizationSettings] = None) -> float:
    """
    Upper concave envelope of E0 at rho.

    Evaluated in chord form: the larger of E0(rho) and every chord between
    sampled points a < rho < b. This is the double Legendre-Fenchel transform
    min_R [rho R + E_sp(R)] restricted to the sampled grid.
    """
    if rho < 0:
        raise NegativeOrder(f"rho must be >= 0, got {rho!r}")
    settings = resolve_settings(settings)
    if rho == 0:
        return 0.0
    own = e0_opt(channel, rho, settings).value
    xs, ys = _e0_on_grid(channel, settings)
    lo, hi = xs < rho, xs > rho
    if not lo.any() or not hi.any():
        return own
    xa, ya = xs[lo][:, None], ys[lo][:, None]
    xb, yb = xs[hi][None, :], ys[hi][None, :]
    chords = ya + (rho - xa) * (yb - ya) / (xb - xa)
    return max(own, float(chords.max()))


# -- derivatives ----------------------------------------------------------

def derivative(f: Callable[[float], float], x: float, h: float = config.DERIVATIVE_STEP) -> float:
    """Central difference with one Richardson step."""
    h = min(h, x / 4) if x > 0 else h
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def e0_slope(channel: Channel, q: InputDistribution, rho: float, h: float = config.DERIVATIVE_STEP) -> float:
    """d/drho E0(rho, q) at fixed q."""
    logp, logq = _log(channel.matrix), _log(q.probs)
    return derivative(lambda r: -_log_inner(logp, logq, r)[2], rho, h)


def e_x_slope(channel: Channel, q: InputDistribution, rho: float, h: float = config.DERIVATIVE_STEP) -> float:
    """d/drho E_x(rho, q); the formula is smooth across rho = 1."""
    b = bhattacharyya_matrix(channel)
    w = np.outer(q.probs, q.probs)
    with np.errstate(divide="ignore"):
        logb = np.log(b)

    def raw(r: float) -> float:
        return -r * math.log1p(float(np.sum(w * np.expm1(logb / r))))

    return derivative(raw, rho, h)
