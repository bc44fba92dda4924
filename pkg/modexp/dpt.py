"""
Generalized data-processing bound.

For k >= 2 and weights alpha on the k-simplex, the multi-letter functional

    E(alpha, q) = -ln sum_y prod_i sum_x q(x) p(y|x)^alpha_i

divided by sum_i zeta_rho(alpha_i) bounds the moment exponent from above; the
bound is the infimum over k and alpha of sup_q of that ratio.
"""
from __future__ import annotations
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import config
from .channel import Channel, InputDistribution, OutOfRange
from .errors import DomainError, ModexpError, NonConvergence
from .exponents import OptimizationSettings, resolve_settings
from .jobs import parallel_map
from .simplex import dirichlet_starts, vertices

logger = logging.getLogger(__name__)

_LOG_FLOOR = -700.0


class DivergentIntegral(ModexpError):
    pass


def zeta(rho: float, alpha: float) -> float:
    """min{alpha, (1 - alpha)/rho}; the kink sits at alpha = 1/(1 + rho)."""
    if not rho > 0:
        raise OutOfRange(f"rho must be > 0, got {rho!r}")
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"alpha must lie in [0, 1], got {alpha!r}")
    return min(alpha, (1.0 - alpha) / rho)


def zeta_sum(rho: float, alphas: Sequence[float]) -> float:
    return math.fsum(zeta(rho, a) for a in alphas)


@dataclass(frozen=True)
class AlphaVector:
    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        a = tuple(float(x) for x in self.alphas)
        if len(a) < 2:
            raise DomainError("need k >= 2 weights")
        if any(x < 0 for x in a):
            raise DomainError("weights must be >= 0")
        if abs(math.fsum(a) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {math.fsum(a)!r}, expected 1")
        object.__setattr__(self, "alphas", a)

    @classmethod
    def symmetric(cls, k: int) -> "AlphaVector":
        return cls(tuple([1.0 / k] * k))

    @classmethod
    def from_free(cls, free: Sequence[float]) -> "AlphaVector":
        """Build from the first k-1 coordinates; the last one closes the sum."""
        head = [float(x) for x in free]
        return cls(tuple(head + [1.0 - math.fsum(head)]))

    @property
    def k(self) -> int:
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)


@dataclass
class DptResult:
    value: float
    best_k: int
    best_alphas: AlphaVector
    best_q: InputDistribution
    prefactor_c: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "best_k": self.best_k,
            "best_alphas": list(self.best_alphas.alphas),
            "best_q": self.best_q.to_list(),
            "prefactor_c": self.prefactor_c,
        }


def _log_factors(logp: np.ndarray, logq: np.ndarray, alphas: Sequence[float]) -> np.ndarray:
    rows = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in alphas:
            if a == 0:
                rows.append(np.zeros(logp.shape[1]))
            else:
                rows.append(logsumexp(logq[:, None] + a * logp, axis=0))
    return np.asarray(rows)


def gen_e(channel: Channel, alphas: AlphaVector, q: InputDistribution) -> float:
    if q.size != channel.input_size:
        raise DomainError("input distribution does not match the channel")
    with np.errstate(divide="ignore"):
        logp, logq = np.log(channel.matrix), np.log(q.probs)
    with np.errstate(invalid="ignore"):
        total = float(logsumexp(_log_factors(logp, logq, alphas.alphas).sum(axis=0)))
    return max(0.0, -total)


def _weights(channel: Channel, alphas: Sequence[float]) -> np.ndarray:
    """k x |X| x |Y| stack of p(y|x)^alpha_i, with p^0 = 1."""
    return np.stack([np.ones_like(channel.matrix) if a == 0 else channel.matrix ** a for a in alphas])


def _gen_e_state(w: np.ndarray, q: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Value, stationarity gap (nats) and log gradient ratios of E(alpha, q)."""
    k = w.shape[0]
    factors = np.einsum("x,ixy->iy", q, w)
    prod = factors.prod(axis=0)
    s = float(prod.sum())
    # factors with alpha > 0 vanish on the same outputs, so a zero factor has a zero cofactor
    with np.errstate(divide="ignore", invalid="ignore"):
        others = np.where(factors > 0, prod[None, :] / factors, 0.0)
    r = np.einsum("iy,ixy->x", others, w) / (k * s)
    log_r = np.log(np.maximum(r, 1e-300))
    slack = k * -math.expm1(min(float(np.min(log_r)), 0.0))
    gap = math.inf if slack >= 1.0 else -math.log1p(-slack)
    return -math.log(s), gap, log_r


def _normalized(logq: np.ndarray) -> np.ndarray:
    logq = logq - logq.max()
    return np.maximum(logq - math.log(float(np.exp(logq).sum())), _LOG_FLOOR)


def _solve_gen_e(w: np.ndarray, q0: np.ndarray, max_iters: int, tolerance: float):
    with np.errstate(divide="ignore"):
        logq = _normalized(np.log(q0))
    value, gap, log_r = _gen_e_state(w, np.exp(logq))
    eta = 1.0
    it = 0
    while gap > tolerance and it < max_iters:
        it += 1
        cand = _normalized(logq - eta * log_r)
        c_value, c_gap, c_log_r = _gen_e_state(w, np.exp(cand))
        # near the optimum the value is flat to roundoff; the gap decides
        if c_value > value or (c_value >= value - 1e-14 and c_gap <= gap):
            logq, value, gap, log_r = cand, c_value, c_gap, c_log_r
            eta = min(eta * 1.5, 1e6)
        else:
            eta *= 0.5
            if eta < 1e-14:
                break
    q = np.exp(logq)
    return value, q / q.sum(), gap, it


def sup_q_gen_e(channel: Channel, alphas: AlphaVector,
                settings: Optional[OptimizationSettings] = None) -> tuple[float, InputDistribution]:
    """
    Maximize E(alpha, q) over q from the uniform input, every vertex and
    restarts - 1 random starts.

    Each start runs the adaptive multiplicative update until its stationarity
    gap is within settings.tolerance. With alpha = (1/2, 1/2) the inner sum
    is convex in q and the gap certifies the value; otherwise the best
    stationary value found is returned.

    Raises:
        NonConvergence: no start met the tolerance.
    """
    settings = resolve_settings(settings)
    w = _weights(channel, alphas.alphas)
    k_in = channel.input_size
    starts = [np.full(k_in, 1.0 / k_in)] + vertices(k_in) + dirichlet_starts(k_in, settings.restarts - 1, settings.seed)
    best: Optional[tuple[float, np.ndarray]] = None
    worst_gap = 0.0
    for q0 in starts:
        value, q, gap, iters = _solve_gen_e(w, q0, settings.max_iters, settings.tolerance)
        logger.debug("sup_q alphas=%s value=%.12g gap=%.3g iters=%d", alphas.alphas, value, gap, iters)
        if gap > settings.tolerance:
            worst_gap = max(worst_gap, gap)
            continue
        if best is None or value > best[0]:
            best = (value, q)
    if best is None:
        raise NonConvergence("no start of the q search met the tolerance",
                             {"operation": "sup_q_gen_e", "alphas": list(alphas.alphas), "gap": worst_gap})
    return max(0.0, best[0]), InputDistribution.from_weights(best[1])


def minimize_over_alphas(
    objective: Callable[[AlphaVector], float],
    rho: float,
    k: int,
    starts: int,
    seed: int,
    polish: int = config.DPT_POLISH,
    fatol: float = 1e-12,
) -> tuple[float, AlphaVector]:
    """
    Screened multi-start Nelder-Mead over the first k-1 weights.

    The symmetric point and starts - 1 Dirichlet points are scored once; the
    local search then runs from the symmetric point and the `polish` best of
    the others. Points off the simplex or with sum zeta below the floor score
    +inf. fatol is the value tolerance of the local search and should not be
    tighter than the accuracy of the objective.
    """
    def score(free: np.ndarray) -> float:
        last = 1.0 - float(np.sum(free))
        if np.any(free < 0) or np.any(free > 1) or last < 0:
            return math.inf
        alphas = AlphaVector.from_free(free)
        if zeta_sum(rho, alphas) < config.DPT_DENOMINATOR_FLOOR:
            return math.inf
        return objective(alphas)

    children = np.random.SeedSequence(seed).spawn(max(starts - 1, 0))
    others = [np.random.default_rng(c).dirichlet(np.ones(k)) for c in children]
    if len(others) > polish:
        screened = parallel_map(lambda x0: score(x0[:-1]), others)
        order = sorted(range(len(others)), key=lambda i: (screened[i], i))
        others = [others[i] for i in order[:polish]]
    seeds = [np.full(k, 1.0 / k)] + others

    def run(x0: np.ndarray) -> tuple[float, np.ndarray]:
        res = minimize(score, x0[:-1], method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": fatol, "maxiter": 400 * k, "maxfev": 800 * k})
        return float(res.fun), np.asarray(res.x)

    results = parallel_map(run, seeds)
    best_value, best_x = math.inf, seeds[0][:-1]
    for value, x in results:
        if value < best_value:
            best_value, best_x = value, x
    if math.isinf(best_value):
        raise NonConvergence(f"no feasible weights found for k={k}", {"operation": "minimize_over_alphas", "k": k})
    return best_value, AlphaVector.from_free(np.clip(best_x, 0.0, 1.0))


def dpt_bound(channel: Channel, rho: float, k_max: int = config.DPT_KMAX,
              settings: Optional[OptimizationSettings] = None, starts: Optional[int] = None) -> DptResult:
    if not rho > 0:
        raise DomainError(f"rho must be > 0, got {rho!r}")
    if k_max < 2:
        raise DomainError("k_max must be >= 2")
    settings = resolve_settings(settings)
    starts = config.DPT_STARTS if starts is None else starts

    def objective(alphas: AlphaVector) -> float:
        return sup_q_gen_e(channel, alphas, settings)[0] / zeta_sum(rho, alphas)

    best: Optional[tuple[float, int, AlphaVector]] = None
    for k in range(2, k_max + 1):
        value, alphas = minimize_over_alphas(objective, rho, k, starts, settings.seed,
                                             fatol=max(1e-12, 10.0 * settings.tolerance))
        logger.debug("dpt k=%d value=%.12g alphas=%s", k, value, alphas.alphas)
        if best is None or value < best[0]:
            best = (value, k, alphas)
    assert best is not None
    value, k, alphas = best
    _, q = sup_q_gen_e(channel, alphas, settings)
    try:
        c = dpt_prefactor(rho, alphas)
    except DivergentIntegral:
        logger.warning("prefactor integral diverged for alphas=%s", alphas.alphas)
        c = math.inf
    return DptResult(max(0.0, value), k, alphas, q, c)


def hoelder_constant(rho: float, alpha: float) -> tuple[float, float]:
    """
    Per-coordinate constants (c_i, c_i') of the Hoelder step.

    c_i is the integral of (|t|^rho + 1)^(-theta) with theta = alpha/(1-alpha);
    it is +inf where that integral diverges. alpha = 1 is the limit theta -> inf,
    where the integral vanishes: c_i = 0 and c_i' = 2.
    """
    if not rho > 0:
        raise OutOfRange(f"rho must be > 0, got {rho!r}")
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"alpha must lie in [0, 1], got {alpha!r}")
    if alpha == 0:
        return math.inf, 1.0
    if alpha == 1:
        return 0.0, 2.0
    theta = alpha / (1.0 - alpha)
    x = rho * theta
    if abs(x - 1.0) <= 1e-12:
        return math.inf, math.inf
    if x < 1:
        return math.inf, 2.0 ** alpha * 2.0 ** x / (1.0 - x)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            half, _ = integrate.quad(lambda t: (t ** rho + 1.0) ** -theta, 0.0, np.inf,
                                     epsabs=1e-13, epsrel=1e-12, limit=200)
        except integrate.IntegrationWarning as e:
            raise DivergentIntegral(f"quadrature failed for rho={rho:g}, alpha={alpha:g}: {e}") from None
    c = 2.0 * half
    return c, 2.0 ** alpha * c


def dpt_prefactor(rho: float, alphas: AlphaVector) -> float:
    """c = prod_i c_i'."""
    c = 1.0
    for a in alphas:
        c *= hoelder_constant(rho, a)[1]
    return c


def gen_rd_lower(rho: float, alphas: AlphaVector, distortion: float) -> float:
    """-c D^(sum zeta): lower bound on the generalized rate-distortion function."""
    if not distortion > 0:
        raise OutOfRange(f"distortion must be > 0, got {distortion!r}")
    return -dpt_prefactor(rho, alphas) * distortion ** zeta_sum(rho, alphas)
