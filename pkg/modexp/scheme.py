"""
Quantize-and-code scheme: the parameter is rounded to the nearest point of an
evenly spaced grid, each grid point carries a codeword, and the receiver
decodes by maximum likelihood and reports the decoded grid point.

Moments E|U_hat - U|^rho are computed exactly by enumerating all output
sequences (small n) or estimated by Monte Carlo.
"""
from __future__ import annotations
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import config
from .channel import Channel, InputDistribution, OutOfRange, SymbolOutOfRange, transmit
from .errors import BudgetExceeded, DomainError, ModexpError
from .jobs import parallel_map

logger = logging.getLogger(__name__)


class GridTooCoarse(DomainError):
    pass


class TooFewSurvivors(ModexpError):
    pass


class NonPositiveMoment(DomainError):
    pass


def grid_size(n: int, rate: float) -> int:
    if n < 1 or not rate > 0:
        raise DomainError(f"need n >= 1 and rate > 0, got n={n}, rate={rate!r}")
    exponent = n * rate - math.log(2.0)
    if exponent > math.log(config.CODEBOOK_BUDGET) + 1:
        raise BudgetExceeded(f"grid of e^{n * rate:.3g}/2 points exceeds the codebook budget")
    m = int(round(math.exp(exponent)))
    if m < 2:
        raise GridTooCoarse(f"e^(n R)/2 rounds to {m} < 2 points")
    return m


def scheme_grid_size(n: int, rate: float) -> int:
    """grid_size raised to 2 points when e^(n R)/2 rounds lower; the realized rate is ln(2M)/n."""
    try:
        return grid_size(n, rate)
    except GridTooCoarse:
        logger.debug("grid for n=%d, rate=%g raised to 2 points", n, rate)
        return 2


def grid_points(m: int) -> np.ndarray:
    """Midpoints of m equal cells tiling [-1/2, 1/2]."""
    return -0.5 + (np.arange(m) + 0.5) / m


def build_grid(n: int, rate: float) -> np.ndarray:
    return grid_points(grid_size(n, rate))


def random_codebook(channel: Channel, q: InputDistribution, m: int, n: int, seed: int) -> np.ndarray:
    if m < 1 or n < 1:
        raise DomainError("codebook needs m >= 1 and n >= 1")
    if q.size != channel.input_size:
        raise DomainError("input distribution does not match the channel")
    rng = np.random.default_rng(seed)
    return rng.choice(channel.input_size, size=(m, n), p=q.probs)


def lexicographic_codebook(k: int, m: int, n: int) -> np.ndarray:
    """The first m sequences of {0..k-1}^n in lexicographic order."""
    if m > k ** n:
        raise DomainError(f"only {k ** n} distinct words of length {n}")
    idx = np.arange(m)
    powers = k ** np.arange(n - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % k


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    n: int
    rate: float
    grid: np.ndarray
    codebook: np.ndarray
    q: InputDistribution
    seed: int = 0

    @property
    def m(self) -> int:
        return int(self.grid.size)

    @property
    def realized_rate(self) -> float:
        return math.log(2 * self.m) / self.n

    @classmethod
    def build(cls, channel: Channel, n: int, rate: float, q: Optional[InputDistribution] = None,
              seed: int = 0, codewords: Optional[int] = None) -> "SchemeSpec":
        """Grid for (n, rate) with a random codebook; codewords overrides the codebook size."""
        q = q or InputDistribution.uniform(channel.input_size)
        grid = grid_points(scheme_grid_size(n, rate))
        book = random_codebook(channel, q, codewords or grid.size, n, seed)
        return cls(n, rate, grid if codewords is None else grid_points(codewords), book, q, seed)

    def with_codebook(self, codebook: np.ndarray) -> "SchemeSpec":
        """Same scheme with another codebook; the grid is re-spaced to its size."""
        codebook = np.asarray(codebook)
        if codebook.ndim != 2 or codebook.shape[1] != self.n or codebook.shape[0] < 2:
            raise DomainError(f"codebook must be (m >= 2) x {self.n}")
        return replace(self, grid=grid_points(codebook.shape[0]), codebook=codebook)

    def to_dict(self) -> dict:
        return {"n": self.n, "rate": self.rate, "realized_rate": self.realized_rate, "m": self.m,
                "seed": self.seed, "q": self.q.to_list()}


@dataclass
class SimReport:
    moment_estimate: float
    std_error: float
    trials: int
    exact_value: Optional[float] = None
    per_n_series: list[tuple[int, float]] = field(default_factory=list)
    slope: float = math.nan
    per_n: list["SimReport"] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "moment_estimate": self.moment_estimate,
            "std_error": self.std_error,
            "trials": self.trials,
            "exact_value": self.exact_value,
            "per_n_series": [list(p) for p in self.per_n_series],
            "slope": self.slope,
        }
        if self.per_n:
            out["per_n"] = [r.to_dict() for r in self.per_n]
        return out

    def rows(self) -> list[dict]:
        """One `n, moment, stderr, exact` row per block length."""
        reports = self.per_n or [self]
        return [
            {"n": r.per_n_series[0][0] if r.per_n_series else None, "moment": r.moment_estimate,
             "stderr": r.std_error, "exact": r.exact_value}
            for r in reports
        ]


# -- expurgation ----------------------------------------------------------

def _log_affinity(channel: Channel, codebook: np.ndarray) -> np.ndarray:
    sq = np.sqrt(channel.matrix)
    with np.errstate(divide="ignore"):
        log_b = np.log(np.clip(sq @ sq.T, 0.0, 1.0))
    np.fill_diagonal(log_b, 0.0)
    m = codebook.shape[0]
    out = np.zeros((m, m))
    for t in range(codebook.shape[1]):
        out += log_b[codebook[:, t][:, None], codebook[:, t][None, :]]
    np.fill_diagonal(out, -np.inf)
    return out


def expurgate(channel: Channel, codebook: np.ndarray, keep_fraction: float) -> np.ndarray:
    """
    Greedily drop codewords until keep_fraction of them remain. Each step
    takes the pair with the largest Bhattacharyya affinity and removes the
    member with the larger total affinity to the rest (ties: higher index).
    """
    if not 0 < keep_fraction <= 1:
        raise DomainError(f"keep_fraction must lie in (0, 1], got {keep_fraction!r}")
    codebook = np.asarray(codebook)
    m = codebook.shape[0]
    target = int(math.floor(keep_fraction * m + 1e-9))
    if target < 2:
        raise TooFewSurvivors(f"keeping {keep_fraction:g} of {m} codewords leaves {target}")
    if target == m:
        return codebook
    log_aff = _log_affinity(channel, codebook)
    alive = np.ones(m, dtype=bool)
    while alive.sum() > target:
        sub = np.where(alive[:, None] & alive[None, :], log_aff, -np.inf)
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        totals = np.exp(sub).sum(axis=1)
        drop = max(i, j) if totals[i] == totals[j] else (i if totals[i] > totals[j] else j)
        alive[drop] = False
    logger.debug("expurgated %d -> %d codewords", m, target)
    return codebook[alive]


# -- encoder / decoder ----------------------------------------------------

def nearest_index(grid: np.ndarray, u: np.ndarray | float) -> np.ndarray:
    """Index of the closest grid point; midway points go to the lower index."""
    u = np.asarray(u, dtype=float)
    hi = np.clip(np.searchsorted(grid, u, side="left"), 1, grid.size - 1)
    lo = hi - 1
    return np.where(np.abs(u - grid[lo]) <= np.abs(grid[hi] - u), lo, hi)


def modulate(grid: np.ndarray, codebook: np.ndarray, u: float) -> np.ndarray:
    if not -0.5 <= u <= 0.5:
        raise OutOfRange(f"parameter {u!r} outside [-1/2, 1/2]")
    return codebook[int(nearest_index(grid, u))]


def _logp(channel: Channel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(channel.matrix)


def _loglik(logp: np.ndarray, codebook: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """(len(ys), M) log-likelihoods of each output block under each codeword."""
    out = np.zeros((ys.shape[0], codebook.shape[0]))
    for t in range(codebook.shape[1]):
        out += logp[codebook[:, t]][:, ys[:, t]].T
    return out


def ml_decode(channel: Channel, codebook: np.ndarray, y: Sequence[int]) -> int:
    y = np.asarray(y)
    if y.shape != (codebook.shape[1],):
        raise DomainError(f"output block must have length {codebook.shape[1]}")
    if y.min() < 0 or y.max() >= channel.output_size:
        raise SymbolOutOfRange("output symbol outside the alphabet")
    return int(np.argmax(_loglik(_logp(channel), codebook, y[None, :])[0]))


def decoding_matrix(channel: Channel, codebook: np.ndarray) -> np.ndarray:
    """P[i, j] = Pr(decode j | codeword i sent), by enumerating every output block."""
    m_out = channel.output_size
    m, n = codebook.shape
    total = m_out ** n
    if total > config.ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{m_out}^{n} = {total} output blocks exceed {config.ENUMERATION_BUDGET}")
    logp = _logp(channel)
    powers = m_out ** np.arange(n - 1, -1, -1)
    chunk = max(1, min(total, 4_000_000 // max(m, 1)))
    p = np.zeros((m, m))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        ys = (idx[:, None] // powers[None, :]) % m_out
        ll = _loglik(logp, codebook, ys)
        decided = np.argmax(ll, axis=1)
        probs = np.exp(ll)
        onehot = np.zeros((idx.size, m))
        onehot[np.arange(idx.size), decided] = 1.0
        p += probs.T @ onehot
    return p


def _antiderivative(t: np.ndarray, rho: float) -> np.ndarray:
    return np.sign(t) * np.abs(t) ** (rho + 1) / (rho + 1)


def cell_integrals(grid: np.ndarray, rho: float) -> np.ndarray:
    """I[i, j] = integral over cell i of |grid[j] - u|^rho du."""
    m = grid.size
    edges = -0.5 + np.arange(m + 1) / m
    a, b = edges[:-1, None], edges[1:, None]
    return _antiderivative(b - grid[None, :], rho) - _antiderivative(a - grid[None, :], rho)


def exact_moment(channel: Channel, scheme: SchemeSpec, rho: float) -> float:
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho!r}")
    p = decoding_matrix(channel, scheme.codebook)
    return math.fsum((p * cell_integrals(scheme.grid, rho)).ravel())


def _simulate_chunk(channel: Channel, grid: np.ndarray, codebook: np.ndarray, rho: float,
                    size: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 0.5, size)
    xs = codebook[nearest_index(grid, u)]
    ys = transmit(channel, xs, rng)
    decided = np.argmax(_loglik(_logp(channel), codebook, ys), axis=1)
    return np.abs(grid[decided] - u) ** rho


def _reduce(chunks: list[np.ndarray], trials: int) -> tuple[float, float]:
    mean = math.fsum(math.fsum(c.tolist()) for c in chunks) / trials
    if trials < 2:
        return mean, math.inf
    sq = math.fsum(math.fsum(((c - mean) ** 2).tolist()) for c in chunks)
    return mean, math.sqrt(sq / (trials - 1) / trials)


def _chunk_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, config.MC_CHUNK)
    return [config.MC_CHUNK] * full + ([rest] if rest else [])


def simulate_moment(channel: Channel, scheme: SchemeSpec, rho: float, trials: int, seed: int) -> SimReport:
    """Monte Carlo over u ~ Uniform[-1/2, 1/2]; chunks draw from spawned seeds."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    sizes = _chunk_sizes(trials)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    chunks = parallel_map(
        lambda job: _simulate_chunk(channel, scheme.grid, scheme.codebook, rho, job[0], job[1]),
        list(zip(sizes, seeds)),
    )
    mean, se = _reduce(chunks, trials)
    return SimReport(mean, se, trials)


def estimate_exponent(series: Sequence[tuple[int, float]]) -> float:
    """Least-squares slope of -ln(moment) against n."""
    if len(series) < 2:
        raise DomainError("need at least two (n, moment) points")
    ns = np.array([float(n) for n, _ in series])
    moments = np.array([float(v) for _, v in series])
    if np.any(moments <= 0):
        raise NonPositiveMoment("moments must be > 0")
    return float(np.polyfit(ns, -np.log(moments), 1)[0])


def _spawned_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def best_scheme(channel: Channel, n: int, rate: float, rho: float, q: Optional[InputDistribution] = None,
                seeds: int = config.SEED_SEARCH, seed: int = 0,
                keep_fraction: Optional[float] = None) -> tuple[SchemeSpec, float]:
    """
    Best of `seeds` random codebooks by exact moment. With keep_fraction, each
    candidate draws M/keep_fraction codewords and is expurgated down to M.
    """
    m = scheme_grid_size(n, rate)
    draw = m if keep_fraction is None else int(math.ceil(m / keep_fraction))

    def candidate(s: int) -> tuple[SchemeSpec, float]:
        spec = SchemeSpec.build(channel, n, rate, q, seed=s, codewords=draw)
        if keep_fraction is not None:
            spec = spec.with_codebook(expurgate(channel, spec.codebook, m / draw))
        return spec, exact_moment(channel, spec, rho)

    results = parallel_map(candidate, _spawned_seeds(seed, max(1, seeds)))
    best = results[0]
    for r in results[1:]:
        if r[1] < best[1]:
            best = r
    return best


def moment_series(channel: Channel, n_list: Sequence[int], rate: float, rho: float,
                  q: Optional[InputDistribution] = None, seeds: int = config.SEED_SEARCH, seed: int = 0,
                  exact: bool = True, trials: int = 0, keep_fraction: Optional[float] = None) -> SimReport:
    """
    Moments across block lengths and the fitted exponent. With exact, each n
    uses the best-of-seeds codebook and its exact moment; trials > 0 adds a
    Monte Carlo estimate. The scalar fields describe the largest n and
    per_n holds one report per block length.
    """
    if not exact and trials < 1:
        raise DomainError("need exact enumeration or trials >= 1")
    per_n: list[SimReport] = []
    for n in sorted(set(n_list)):
        if exact:
            spec, value = best_scheme(channel, n, rate, rho, q, seeds, seed, keep_fraction)
        else:
            spec, value = SchemeSpec.build(channel, n, rate, q, seed), math.nan
        report = simulate_moment(channel, spec, rho, trials, seed) if trials > 0 else SimReport(value, 0.0, 0)
        report.exact_value = value if exact else None
        report.per_n_series = [(n, value if exact else report.moment_estimate)]
        per_n.append(report)
    if not per_n:
        raise DomainError("n_list is empty")
    last = per_n[-1]
    out = SimReport(last.moment_estimate, last.std_error, last.trials, last.exact_value,
                    [r.per_n_series[0] for r in per_n], per_n=per_n)
    if len(out.per_n_series) >= 2:
        out.slope = estimate_exponent(out.per_n_series)
    return out


# -- several parameters on a Cartesian grid -------------------------------

@dataclass(frozen=True, eq=False)
class MultiDimScheme:
    n: int
    d: int
    rate_per_dim: float
    axis_grid: np.ndarray
    codebook: np.ndarray
    q: InputDistribution
    seed: int = 0

    @property
    def m(self) -> int:
        return int(self.axis_grid.size)

    def cell_coordinates(self) -> np.ndarray:
        """(M^d, d) axis indices of every flat codebook row."""
        return np.array(list(itertools.product(range(self.m), repeat=self.d)), dtype=int).reshape(-1, self.d)


def multidim_scheme(channel: Channel, n: int, d: int, rate_per_dim: float,
                    q: Optional[InputDistribution] = None, seed: int = 0) -> MultiDimScheme:
    if d < 1:
        raise DomainError("d must be >= 1")
    q = q or InputDistribution.uniform(channel.input_size)
    axis = grid_points(scheme_grid_size(n, rate_per_dim))
    size = axis.size ** d
    if size > config.CODEBOOK_BUDGET:
        raise BudgetExceeded(f"{size} codewords exceed {config.CODEBOOK_BUDGET}")
    return MultiDimScheme(n, d, rate_per_dim, axis, random_codebook(channel, q, size, n, seed), q, seed)


def exact_multidim_moment(channel: Channel, scheme: MultiDimScheme, rho: float) -> list[float]:
    """Per-coordinate E|U_hat_a - U_a|^rho with the parameter uniform on the cube."""
    p = decoding_matrix(channel, scheme.codebook)
    coords = scheme.cell_coordinates()
    integrals = cell_integrals(scheme.axis_grid, rho)
    width = (1.0 / scheme.m) ** (scheme.d - 1)
    out = []
    for a in range(scheme.d):
        per_pair = integrals[coords[:, a][:, None], coords[:, a][None, :]]
        out.append(width * math.fsum((p * per_pair).ravel()))
    return out


def _simulate_multidim_chunk(channel: Channel, scheme: MultiDimScheme, rho: float,
                             size: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 0.5, (size, scheme.d))
    idx = nearest_index(scheme.axis_grid, u)
    flat = np.ravel_multi_index(tuple(idx.T), (scheme.m,) * scheme.d)
    ys = transmit(channel, scheme.codebook[flat], rng)
    decided = np.argmax(_loglik(_logp(channel), scheme.codebook, ys), axis=1)
    coords = np.stack(np.unravel_index(decided, (scheme.m,) * scheme.d), axis=1)
    return np.abs(scheme.axis_grid[coords] - u) ** rho


def simulate_multidim(channel: Channel, scheme: MultiDimScheme, rho: float, trials: int, seed: int) -> list[SimReport]:
    if trials < 1:
        raise DomainError("trials must be >= 1")
    sizes = _chunk_sizes(trials)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    chunks = parallel_map(lambda job: _simulate_multidim_chunk(channel, scheme, rho, job[0], job[1]),
                          list(zip(sizes, seeds)))
    reports = []
    for a in range(scheme.d):
        mean, se = _reduce([c[:, a] for c in chunks], trials)
        reports.append(SimReport(mean, se, trials))
    return reports
