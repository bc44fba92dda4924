"""
Discrete memoryless channels and input distributions.

A channel is a row-stochastic matrix p(y|x) over index alphabets 0..k-1 and
0..m-1. Both types are immutable after construction and safe to share
between threads; sampling takes an explicit numpy Generator.
"""
from __future__ import annotations
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np

from .config import DISTRIBUTION_TOLERANCE, ROW_SUM_TOLERANCE
from .errors import DomainError, ModexpError, ParseError
from .utils import format_extended

logger = logging.getLogger(__name__)

_RENORMALIZE_SLACK = 4 * np.finfo(float).eps


class ChannelError(ModexpError, ValueError):
    pass


class NonStochasticRow(ChannelError):
    pass


class NegativeEntry(ChannelError):
    pass


class DegenerateAlphabet(ChannelError):
    pass


class OutOfRange(DomainError):
    pass


class SymbolOutOfRange(DomainError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _renormalize(rows: np.ndarray) -> np.ndarray:
    # only rows that are off by more than a few ulps, so the operation is idempotent
    sums = rows.sum(axis=-1, keepdims=True)
    off = np.abs(sums - 1.0) > _RENORMALIZE_SLACK
    return np.where(off, rows / sums, rows)


@dataclass(frozen=True, eq=False)
class Channel:
    """Stochastic matrix p(y|x); rows are inputs, columns outputs."""
    matrix: np.ndarray

    @property
    def input_size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, x: int) -> np.ndarray:
        return self.matrix[x]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash((self.matrix.shape, self.matrix.tobytes()))

    def to_dict(self) -> dict[str, Any]:
        return {"inputs": self.input_size, "outputs": self.output_size, "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """Probability vector q on the input alphabet."""
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ParseError("Input distribution must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise NegativeEntry("Input distribution has negative or non-finite entries")
        if abs(p.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
            raise NonStochasticRow(f"Input distribution sums to {p.sum()!r}")
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_weights(cls, weights: Sequence[float] | np.ndarray) -> "InputDistribution":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, k: int) -> "InputDistribution":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, x: int) -> "InputDistribution":
        p = np.zeros(k)
        p[x] = 1.0
        return cls(p)

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InputDistribution):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    def to_list(self) -> list[float]:
        return self.probs.tolist()


@dataclass(frozen=True)
class ParameterValue:
    """The parameter u in [-1/2, +1/2]."""
    u: float

    def __post_init__(self) -> None:
        if not (-0.5 <= float(self.u) <= 0.5):
            raise OutOfRange(f"Parameter {self.u!r} outside [-1/2, 1/2]")


def validate_channel(matrix: Any) -> Channel:
    try:
        m = np.array(matrix, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("Channel matrix must be a rectangular array of numbers") from None
    if m.ndim != 2 or m.size == 0:
        raise ParseError("Channel matrix must be non-empty and rectangular")
    if m.shape[0] < 2 or m.shape[1] < 2:
        raise DegenerateAlphabet(f"Need at least 2 inputs and 2 outputs, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParseError("Channel matrix has non-finite entries")
    if np.any(m < 0):
        raise NegativeEntry("Channel matrix has negative entries")
    sums = m.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)
    if bad.size:
        raise NonStochasticRow(f"Row {int(bad[0])} sums to {sums[bad[0]]!r}")
    return Channel(_frozen(_renormalize(m)))


def make_bsc(p: float) -> Channel:
    if not (0.0 <= p <= 0.5):
        raise OutOfRange(f"BSC crossover must lie in [0, 1/2], got {p!r}")
    return validate_channel([[1.0 - p, p], [p, 1.0 - p]])


def make_bec(e: float) -> Channel:
    """Binary erasure channel; output 2 is the erasure."""
    if not (0.0 <= e <= 1.0):
        raise OutOfRange(f"Erasure probability must lie in [0, 1], got {e!r}")
    return validate_channel([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]])


def make_identity(k: int = 2) -> Channel:
    return validate_channel(np.eye(k))


def make_useless(row: Sequence[float], k: int = 2) -> Channel:
    return validate_channel(np.tile(np.asarray(row, dtype=float), (k, 1)))


def random_channel(rng: np.random.Generator, k: int, m: int, concentration: float = 1.0) -> Channel:
    return validate_channel(rng.dirichlet(np.full(m, concentration), size=k))


def mutual_information(channel: Channel, q: InputDistribution) -> float:
    """I(q; p) in nats."""
    p = channel.matrix
    py = q.probs @ p
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, np.log(p) - np.log(py), 0.0)
    return float(np.sum(q.probs[:, None] * p * ratio))


def transmit(channel: Channel, xs: np.ndarray | int, rng: np.random.Generator) -> np.ndarray:
    """Pass input symbols through the channel letter by letter."""
    xs = np.asarray(xs)
    if xs.size and (xs.min() < 0 or xs.max() >= channel.input_size):
        raise SymbolOutOfRange(f"Input symbols must lie in 0..{channel.input_size - 1}")
    cdf = np.cumsum(channel.matrix, axis=1)
    draws = rng.random(xs.shape)
    ys = (draws[..., None] >= cdf[xs]).sum(axis=-1)
    return np.minimum(ys, channel.output_size - 1)


def sample_output(channel: Channel, x: int, rng: np.random.Generator) -> int:
    if not (0 <= int(x) < channel.input_size) or int(x) != x:
        raise SymbolOutOfRange(f"Input symbol {x!r} outside 0..{channel.input_size - 1}")
    return int(transmit(channel, np.asarray(int(x)), rng))


# -- file I/O -------------------------------------------------------------

PathLike = Union[str, Path]


def write_channel(channel: Channel, path: PathLike) -> None:
    """JSON with 17 significant digits per entry."""
    rows = ",\n    ".join(
        "[" + ", ".join(format_extended(float(v)) for v in row) + "]" for row in channel.matrix
    )
    text = (
        "{\n"
        f'  "inputs": {channel.input_size},\n'
        f'  "outputs": {channel.output_size},\n'
        f'  "matrix": [\n    {rows}\n  ]\n'
        "}\n"
    )
    Path(path).write_text(text, encoding="utf-8")


def _read_csv_rows(text: str) -> list[list[float]]:
    rows = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"Line {lineno}: non-numeric entry") from None
    if not rows:
        raise ParseError("Empty channel file")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"Row {i} has {len(r)} entries, expected {width}")
    return rows


def read_channel(path: PathLike) -> Channel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read channel file {path}: {e}") from None
    if path.suffix.lower() == ".csv":
        return _checked(path, _read_csv_rows(text))
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON in {path}: {e}") from None
    if not isinstance(obj, dict) or "matrix" not in obj:
        raise ParseError("Channel JSON must be an object with a 'matrix' field")
    matrix = obj["matrix"]
    k = obj.get("inputs", len(matrix))
    m = obj.get("outputs", len(matrix[0]) if matrix else 0)
    if not isinstance(matrix, list) or len(matrix) != k:
        raise ParseError(f"Expected {k} rows in 'matrix'")
    for i, row in enumerate(matrix):
        if not isinstance(row, list) or len(row) != m:
            raise ParseError(f"Row {i} must have {m} entries")
    return _checked(path, matrix)


def _checked(path: Path, rows: Sequence[Sequence[Any]]) -> Channel:
    channel = validate_channel(rows)
    raw = np.asarray(rows, dtype=float).sum(axis=1)
    if np.any(np.abs(raw - 1.0) > _RENORMALIZE_SLACK):
        logger.warning("Channel %s rows renormalized", path)
    return channel
