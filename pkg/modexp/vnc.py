"""
Very noisy channels p(y|x) = p(y)(1 + s eps(x, y)) and their first-order
closed forms, used as analytic ground truth for the general routines.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import config
from .bounds import lower_bound, profile, upper_bound
from .channel import Channel, validate_channel
from .dpt import AlphaVector, minimize_over_alphas, zeta_sum
from .errors import DomainError, ModexpError
from .exponents import OptimizationSettings, capacity, resolve_settings
from .jobs import parallel_map
from .simplex import dirichlet_starts, multistart, vertices

logger = logging.getLogger(__name__)


class InvalidEps(ModexpError, ValueError):
    pass


class OutOfRegime(DomainError):
    pass


@dataclass(frozen=True, eq=False)
class VncSpec:
    base: np.ndarray
    eps: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "eps", np.atleast_2d(np.asarray(self.eps, dtype=float)))

    @property
    def perturbation(self) -> np.ndarray:
        return self.scale * self.eps

    def validate(self) -> None:
        base, eps = self.base, self.eps
        if base.ndim != 1 or eps.shape[1] != base.size:
            raise InvalidEps(f"eps has shape {eps.shape}, base has {base.size} outputs")
        if np.any(base < 0) or abs(base.sum() - 1.0) > 1e-9:
            raise InvalidEps("base must be a probability vector")
        drift = np.abs(eps @ base)
        if np.any(drift > 1e-9):
            raise InvalidEps(f"row {int(np.argmax(drift))} of eps is not centred under the base law")
        if not self.scale > 0:
            raise DomainError(f"scale must be > 0, got {self.scale!r}")
        largest = float(np.max(np.abs(self.perturbation)))
        if largest > config.VNC_REGIME_LIMIT:
            raise OutOfRegime(f"max |s eps| = {largest:g} exceeds {config.VNC_REGIME_LIMIT:g}")


def symmetric_vnc_spec(scale: float) -> VncSpec:
    """Three inputs, four equiprobable outputs, the last one uninformative."""
    eps = np.array([
        [2.0, -1.0, -1.0, 0.0],
        [-1.0, 2.0, -1.0, 0.0],
        [-1.0, -1.0, 2.0, 0.0],
    ])
    return VncSpec(np.full(4, 0.25), eps, scale)


def make_vnc(spec: VncSpec) -> Channel:
    spec.validate()
    return validate_channel(spec.base[None, :] * (1.0 + spec.perturbation))


def vnc_capacity(spec: VncSpec, centered: bool = False) -> float:
    """
    First-order capacity. The plain form is linear in q and peaks at a
    vertex; the centered form subtracts the output-mean term and is
    maximized over the simplex.
    """
    spec.validate()
    d = spec.perturbation
    energy = (d ** 2) @ spec.base
    if not centered:
        return 0.5 * float(energy.max())
    k = d.shape[0]
    b = spec.base

    def f(q: np.ndarray) -> float:
        mean = q @ d
        return 0.5 * (float(q @ energy) - float(b @ mean ** 2))

    def grad(q: np.ndarray) -> np.ndarray:
        return 0.5 * (energy - 2.0 * d @ (b * (q @ d)))

    best = multistart(f, grad, [np.full(k, 1.0 / k)] + vertices(k) + dirichlet_starts(k, 4, 0))
    assert best is not None
    return best.value


def vnc_upper(rho: float, cap: float) -> float:
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho!r}")
    return rho * cap / (1.0 + rho) if rho <= 1 else cap / 2.0


def vnc_lower(rho: float, cap: float) -> float:
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho!r}")
    if rho < 1:
        return rho * cap / (1.0 + math.sqrt(rho)) ** 2
    return rho * cap / (2.0 * (1.0 + rho))


def vnc_e_r(rate: float, cap: float) -> float:
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    if rate >= cap:
        return 0.0
    if rate < cap / 4:
        return cap / 2 - rate
    return (math.sqrt(cap) - math.sqrt(rate)) ** 2


def vnc_e_ex(rate: float, cap: float) -> float:
    """Expurgation gives nothing beyond the straight part of E_r."""
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    return max(0.0, cap / 2 - rate)


def vnc_dpt(rho: float, cap: float, k: int, settings: Optional[OptimizationSettings] = None,
            starts: Optional[int] = None) -> tuple[float, AlphaVector]:
    """C times the infimum over the k-simplex of (1 - sum alpha^2) / sum zeta_rho(alpha)."""
    if not rho > 0 or k < 2:
        raise DomainError("need rho > 0 and k >= 2")
    settings = resolve_settings(settings)
    starts = config.DPT_STARTS if starts is None else starts

    def functional(alphas: AlphaVector) -> float:
        a = np.asarray(alphas.alphas)
        return (1.0 - float(a @ a)) / zeta_sum(rho, alphas)

    value, alphas = minimize_over_alphas(functional, rho, k, starts, settings.seed)
    return cap * value, alphas


@dataclass
class ConvergenceRow:
    scale: float
    quantity: str
    rho: float
    computed: float
    expected: float

    @property
    def rel_error(self) -> float:
        if self.expected == 0:
            return abs(self.computed)
        return abs(self.computed - self.expected) / abs(self.expected)


def _rows_for_scale(scale: float, rhos: Sequence[float], settings: OptimizationSettings) -> list[ConvergenceRow]:
    spec = symmetric_vnc_spec(scale)
    channel = make_vnc(spec)
    cap = capacity(channel, settings)
    prof = profile(channel, settings)
    rows = [
        ConvergenceRow(scale, "capacity", math.nan, cap, vnc_capacity(spec)),
        ConvergenceRow(scale, "rho0", math.nan, prof.rho0, 1.0),
    ]
    for rho in rhos:
        rows.append(ConvergenceRow(scale, "upper", rho, upper_bound(channel, rho, prof, settings) / cap,
                                   vnc_upper(rho, 1.0)))
        rows.append(ConvergenceRow(scale, "lower", rho, lower_bound(channel, rho, prof, settings).value / cap,
                                   vnc_lower(rho, 1.0)))
    return rows


def convergence_suite(scales: Sequence[float] = (0.05, 0.02, 0.01), rhos: Sequence[float] = (0.25, 1.0, 4.0),
                      settings: Optional[OptimizationSettings] = None) -> list[ConvergenceRow]:
    """Computed bounds (normalized by the computed capacity) against the closed forms, per scale."""
    settings = resolve_settings(settings)
    per_scale = parallel_map(lambda s: _rows_for_scale(s, rhos, settings), list(scales))
    return [row for rows in per_scale for row in rows]
