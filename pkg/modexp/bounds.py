"""
Bounds on the best exponential decay rate of E|U_hat - U|^rho.

upper_bound is the converse (concave envelope of E0 up to rho0, then the
zero-rate expurgated exponent); lower_bound is the three-branch achievable
exponent of the quantize-and-code scheme, and opt_rate the rate it uses.
"""
from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import Channel, InputDistribution
from .config import RHO0_BRACKET
from .errors import DomainError, ModexpError
from .exponents import (
    EX_RANGE,
    R_RANGE,
    Diverges,
    OptimizationSettings,
    bhattacharyya_matrix,
    capacity,
    derivative,
    e0_opt,
    e0_slope,
    e_ex,
    e_ex_zero,
    e_r,
    e_sp,
    e_x_slope,
    e_x_weighted,
    resolve_settings,
    sup_over_rho,
    uce_e0,
)

logger = logging.getLogger(__name__)

_HUGE = 1e300

BRANCH_RANDOM = "random"
BRANCH_MIDDLE = "middle"
BRANCH_EXPURGATED = "expurgated"


class InfiniteExpurgated(ModexpError):
    pass


class RegimeMismatch(ModexpError):
    pass


@dataclass(frozen=True)
class ChannelProfile:
    capacity: float
    e_ex0: float
    rho0: float
    r0: float
    r_minus: float
    r_plus: float
    rho_minus: float
    rho_plus: float
    e0_at_1: float
    q: InputDistribution
    infinite_expurgated: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q"] = self.q.to_list()
        return d


class LowerBound(NamedTuple):
    value: float
    branch: str
    varrho: float


def _ratio(e0_1: float, r: float) -> float:
    return (e0_1 - r) / r if r > 0 else math.inf


def _find_rho0(channel: Channel, e_ex0: float, settings: OptimizationSettings) -> float:
    lo, hi = RHO0_BRACKET
    g = lambda r: uce_e0(channel, r, settings) - e_ex0  # noqa: E731
    if g(lo) >= 0:
        return lo
    if g(hi) < 0:
        return math.inf
    return float(brentq(g, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps))


def profile(channel: Channel, settings: Optional[OptimizationSettings] = None, strict: bool = False) -> ChannelProfile:
    """
    Derived constants of a channel.

    Args:
        strict: raise InfiniteExpurgated instead of flagging rho0 = +inf when
            the zero-rate expurgated exponent is infinite.
    """
    settings = resolve_settings(settings)
    cap = capacity(channel, settings)
    e0_1, q1 = e0_opt(channel, 1.0, settings)
    e_ex0 = e_ex_zero(channel, q1)
    r_plus = max(0.0, e0_slope(channel, q1, 1.0))
    r_minus = max(0.0, e_x_slope(channel, q1, 1.0))

    infinite = math.isinf(e_ex0)
    if infinite:
        if strict:
            raise InfiniteExpurgated("E_ex(0) is infinite; rho0 is +inf")
        logger.warning("E_ex(0) is infinite; the upper bound is the concave envelope of E0 everywhere")
        rho0, r0 = math.inf, math.nan
    else:
        rho0 = _find_rho0(channel, e_ex0, settings)
        if math.isinf(rho0):
            logger.warning("envelope of E0 stays below E_ex(0) on the rho0 bracket; rho0 set to +inf")
            r0 = math.nan
        else:
            r0 = _tangency_rate(channel, rho0, settings)

    prof = ChannelProfile(
        capacity=cap,
        e_ex0=e_ex0,
        rho0=rho0,
        r0=r0,
        r_minus=r_minus,
        r_plus=r_plus,
        rho_minus=_ratio(e0_1, r_minus),
        rho_plus=_ratio(e0_1, r_plus),
        e0_at_1=e0_1,
        q=q1,
        infinite_expurgated=infinite or math.isinf(rho0),
    )
    logger.info("profile C=%.9g E_ex(0)=%.9g rho0=%.9g R0=%.9g R-=%.9g R+=%.9g",
                cap, e_ex0, rho0, r0, r_minus, r_plus)
    return prof


def _tangency_rate(channel: Channel, rho0: float, settings: OptimizationSettings) -> float:
    """Slope of the envelope of E0 at rho0: the rate where the straight line touches E_sp."""
    value, q = e0_opt(channel, rho0, settings)
    if uce_e0(channel, rho0, settings) > value + 1e-12:
        return derivative(lambda r: uce_e0(channel, r, settings), rho0)
    return e0_slope(channel, q, rho0)


def _check_rho(rho: float) -> None:
    if rho < 0 or math.isnan(rho):
        raise DomainError(f"rho must be >= 0, got {rho!r}")


def upper_bound(channel: Channel, rho: float, prof: ChannelProfile,
                settings: Optional[OptimizationSettings] = None) -> float:
    _check_rho(rho)
    if rho <= prof.rho0:
        return uce_e0(channel, rho, settings)
    return prof.e_ex0


def lower_bound(channel: Channel, rho: float, prof: ChannelProfile,
                settings: Optional[OptimizationSettings] = None) -> LowerBound:
    """Achievable exponent with its branch tag and achieving order."""
    _check_rho(rho)
    settings = resolve_settings(settings)
    if rho == 0:
        return LowerBound(0.0, BRANCH_RANDOM, 0.0)
    if rho <= prof.rho_plus:
        best = sup_over_rho(lambda r: rho * e0_opt(channel, r, settings).value / (r + rho), *R_RANGE, settings)
        return LowerBound(best.value, BRANCH_RANDOM, best.rho)
    if rho <= prof.rho_minus:
        return LowerBound(rho * prof.e0_at_1 / (1.0 + rho), BRANCH_MIDDLE, 1.0)
    b = bhattacharyya_matrix(channel)
    q = prof.q.probs
    best = sup_over_rho(lambda r: rho * e_x_weighted(b, q, r) / (r + rho), *EX_RANGE, settings)
    return LowerBound(best.value, BRANCH_EXPURGATED, best.rho)


def opt_rate(channel: Channel, rho: float, prof: ChannelProfile,
             settings: Optional[OptimizationSettings] = None) -> float:
    """R(rho): E(varrho*)/(varrho* + rho) on the achieving branch, i.e. lower/rho."""
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho!r}")
    return lower_bound(channel, rho, prof, settings).value / rho


def fixed_point_rate(channel: Channel, rho: float, prof: ChannelProfile,
                     settings: Optional[OptimizationSettings] = None) -> float:
    """
    Root of rho R = E_ex(R) above rho_minus, or of rho R = E_r(R) below rho_plus.

    Raises:
        RegimeMismatch: rho lies in the middle band (rho_plus, rho_minus].
    """
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho!r}")
    settings = resolve_settings(settings)
    if rho > prof.rho_minus:
        def exponent(rate: float) -> float:
            try:
                return e_ex(channel, rate, prof.q, settings).value
            except Diverges:
                return _HUGE
    elif rho < prof.rho_plus:
        def exponent(rate: float) -> float:
            return e_r(channel, rate, settings).value
    else:
        raise RegimeMismatch(f"rho={rho:g} lies in the middle band ({prof.rho_plus:g}, {prof.rho_minus:g}]")

    def h(rate: float) -> float:
        return min(exponent(rate), _HUGE) - rho * rate

    cap = prof.capacity
    if cap <= 0 or h(cap) >= 0:
        return cap
    return float(brentq(h, 0.0, cap, xtol=1e-13))


@dataclass(frozen=True)
class MultiDimWeights:
    d: int
    r: tuple[float, ...]

    def __post_init__(self) -> None:
        r = tuple(float(x) for x in self.r)
        if self.d < 1 or len(r) != self.d:
            raise DomainError(f"need d >= 1 weights, got d={self.d} and {len(r)} weights")
        if any(x < 0 for x in r) or min(r) != 0.0:
            raise DomainError("weights must be >= 0 with minimum 0")
        object.__setattr__(self, "r", r)

    @classmethod
    def shifted(cls, r: Sequence[float]) -> "MultiDimWeights":
        """Subtract the minimum so the smallest weight is zero."""
        m = min(r)
        return cls(len(r), tuple(x - m for x in r))

    @property
    def total(self) -> float:
        return math.fsum(self.r)


def multidim_bound(channel: Channel, rho: float, weights: MultiDimWeights, prof: ChannelProfile,
                   settings: Optional[OptimizationSettings] = None) -> float:
    """Upper bound on the exponent of sum_i exp(n r_i) E|U_hat_i - U_i|^rho over d parameters."""
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho!r}")
    per_dim = rho / weights.d
    if per_dim <= prof.rho0:
        return uce_e0(channel, per_dim, settings) - weights.total / weights.d
    return prof.e_ex0 - prof.rho0 * weights.total / rho


def achieving_rate(channel: Channel, theta: float, r_min: float = 0.0,
                   settings: Optional[OptimizationSettings] = None) -> float:
    """The R >= r_min minimizing theta R + E_sp(R)."""
    if theta < 0 or r_min < 0:
        raise DomainError("theta and r_min must be >= 0")
    settings = resolve_settings(settings)
    cap = capacity(channel, settings)
    if r_min >= cap:
        return r_min

    def f(rate: float) -> float:
        return min(theta * rate + e_sp(channel, rate, settings), _HUGE)

    res = minimize_scalar(f, bounds=(r_min, cap), method="bounded", options={"xatol": 1e-10})
    best_rate, best = float(res.x), float(res.fun)
    for end in (r_min, cap):
        v = f(end)
        if v < best or (v == best and end < best_rate):
            best_rate, best = end, v
    return best_rate


def sandwich_ratio(channel: Channel, rho: float, prof: ChannelProfile,
                   settings: Optional[OptimizationSettings] = None) -> float:
    """lower/upper; 1 where both vanish."""
    upper = upper_bound(channel, rho, prof, settings)
    lower = lower_bound(channel, rho, prof, settings).value
    if upper == 0:
        return 1.0
    return lower / upper
