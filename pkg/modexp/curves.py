from __future__ import annotations
import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .channel import Channel
from .errors import ModexpError
from .exponents import OptimizationSettings, e0_opt, uce_e0
from .jobs import parallel_map
from .utils import format_extended, jsonable, parse_extended

PathLike = Union[str, Path]

FORMATS = ("csv", "json")


class CurveIoError(ModexpError):
    pass


@dataclass(frozen=True, eq=False)
class ExponentCurve:
    """A sampled exponent function. Values may be +inf, never nan or -inf."""
    args: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        args = np.asarray(self.args, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if args.ndim != 1 or args.shape != values.shape:
            raise CurveIoError("args and values must be 1-d and of equal length")
        if args.size and np.any(np.diff(args) <= 0):
            raise CurveIoError(f"curve {self.kind!r}: args must be strictly increasing")
        if np.any(np.isnan(values)) or np.any(np.isneginf(values)):
            raise CurveIoError(f"curve {self.kind!r}: values must be finite or +inf")
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.args.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExponentCurve):
            return NotImplemented
        return (self.kind == other.kind and bool(np.array_equal(self.args, other.args))
                and bool(np.array_equal(self.values, other.values)))

    def scaled(self, factor: float, kind: Optional[str] = None) -> "ExponentCurve":
        """Values divided by factor (normalization by C, or ln 2 for bits)."""
        return ExponentCurve(self.args, self.values / factor, kind or self.kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "args": self.args, "values": self.values}


def sample_curve(fn: Callable[[float], float], args: Iterable[float], kind: str) -> ExponentCurve:
    """Evaluate fn on each grid point through the worker pool."""
    args = np.asarray(list(args), dtype=float)
    return ExponentCurve(args, np.asarray(parallel_map(fn, args.tolist()), dtype=float), kind)


def e0_curve(channel: Channel, orders: Iterable[float], settings: Optional[OptimizationSettings] = None,
             envelope: bool = False) -> ExponentCurve:
    """max_q E0 on the order grid, or its concave envelope with envelope=True."""
    if envelope:
        return sample_curve(lambda r: uce_e0(channel, r, settings), orders, "uce_e0")
    return sample_curve(lambda r: e0_opt(channel, r, settings).value, orders, "e0")


def render_curves(curves: Sequence[ExponentCurve], fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise CurveIoError(f"unknown curve format {fmt!r}")
    if not curves or any(len(c) == 0 for c in curves):
        raise CurveIoError("refusing to emit an empty curve")
    if fmt == "json":
        return json.dumps([jsonable(c.to_dict()) for c in curves], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arg", "value", "kind"])
    for c in curves:
        for a, v in zip(c.args, c.values):
            w.writerow([format_extended(float(a)), format_extended(float(v)), c.kind])
    return buf.getvalue()


def emit_curve(curve: Union[ExponentCurve, Sequence[ExponentCurve]], fmt: str, path: PathLike) -> None:
    curves = [curve] if isinstance(curve, ExponentCurve) else list(curve)
    text = render_curves(curves, fmt)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CurveIoError(f"cannot write {path}: {e}") from None


def write_curve(curve: ExponentCurve, path: PathLike) -> None:
    emit_curve(curve, "csv", path)


def parse_curves(text: str) -> dict[str, ExponentCurve]:
    rows: dict[str, tuple[list[float], list[float]]] = {}
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["arg", "value", "kind"]:
        raise CurveIoError(f"expected header arg,value,kind, got {header!r}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise CurveIoError(f"line {lineno}: expected 3 fields")
        try:
            a, v = parse_extended(row[0]), parse_extended(row[1])
        except ModexpError:
            raise CurveIoError(f"line {lineno}: bad number") from None
        if math.isnan(a):
            raise CurveIoError(f"line {lineno}: nan argument")
        xs, ys = rows.setdefault(row[2], ([], []))
        xs.append(a)
        ys.append(v)
    return {kind: ExponentCurve(np.array(xs), np.array(ys), kind) for kind, (xs, ys) in rows.items()}


def read_curve(path: PathLike, kind: Optional[str] = None) -> ExponentCurve:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CurveIoError(f"cannot read {path}: {e}") from None
    curves = parse_curves(text)
    if not curves:
        raise CurveIoError(f"{path} holds no curve")
    if kind is None:
        if len(curves) > 1:
            raise CurveIoError(f"{path} holds several curves; pass kind")
        return next(iter(curves.values()))
    if kind not in curves:
        raise CurveIoError(f"{path} has no curve {kind!r}")
    return curves[kind]
