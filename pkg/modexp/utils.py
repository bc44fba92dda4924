from __future__ import annotations
import math
from typing import Any, Iterable

import numpy as np

from .errors import ParseError

INF_LITERAL = "+inf"


def format_extended(x: float) -> str:
    """17 significant digits, with "+inf"/"-inf" literals."""
    if math.isinf(x):
        return INF_LITERAL if x > 0 else "-inf"
    return f"{x:.17g}"


def parse_extended(s: str) -> float:
    s = s.strip()
    if s in (INF_LITERAL, "inf", "Infinity"):
        return math.inf
    if s in ("-inf", "-Infinity"):
        return -math.inf
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"Not a number: {s!r}") from None


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and infinities into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return INF_LITERAL if x > 0 else "-inf"
        return x
    return obj


def parse_grid_spec(spec: str) -> np.ndarray:
    """Parse ``start:stop:count[:log|lin]`` into a strictly increasing grid."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ParseError(f"Grid spec must be start:stop:count[:log|lin], got {spec!r}")
    start, stop = parse_extended(parts[0]), parse_extended(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise ParseError(f"Grid count is not an integer: {parts[2]!r}") from None
    scale = parts[3] if len(parts) == 4 else "lin"
    if count < 1:
        raise ParseError("Grid count must be >= 1")
    if not (math.isfinite(start) and math.isfinite(stop)) or (count > 1 and stop <= start):
        raise ParseError(f"Grid bounds must be finite with start < stop: {spec!r}")
    if scale == "log":
        if start <= 0:
            raise ParseError("Log grids need a positive start")
        return np.geomspace(start, stop, count)
    if scale == "lin":
        return np.linspace(start, stop, count)
    raise ParseError(f"Unknown grid scale {scale!r}")


def parse_number_list(s: str | Iterable[Any], cast=float) -> list:
    if isinstance(s, str):
        items = [p for p in s.split(",") if p.strip()]
    else:
        items = list(s)
    try:
        return [cast(p) for p in items]
    except (TypeError, ValueError):
        raise ParseError(f"Bad number list: {s!r}") from None


def binary_entropy(x: float) -> float:
    """h2(x) in nats."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log1p(-x)


def clamp_text(s: str, max_chars: int = 8000) -> str:
    if len(s) <= max_chars:
        return s
    return s[:max_chars] + "\n...<truncated>..."
