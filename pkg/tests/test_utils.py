from __future__ import annotations
import math
import threading

import numpy as np
import pytest

from modexp import jobs
from modexp.errors import ParseError
from modexp.utils import (
    binary_entropy,
    clamp_text,
    format_extended,
    jsonable,
    parse_extended,
    parse_grid_spec,
    parse_number_list,
)


def test_extended_numbers():
    assert format_extended(math.inf) == "+inf"
    assert format_extended(-math.inf) == "-inf"
    assert parse_extended(format_extended(0.1)) == 0.1
    assert parse_extended(" +inf ") == math.inf
    with pytest.raises(ParseError):
        parse_extended("abc")


def test_jsonable():
    data = {"a": np.float64(1.5), "b": np.array([1, 2]), "c": (math.inf, math.nan), "d": np.int64(3)}
    assert jsonable(data) == {"a": 1.5, "b": [1, 2], "c": ["+inf", None], "d": 3}


def test_parse_grid_spec():
    assert np.allclose(parse_grid_spec("0:1:3"), [0.0, 0.5, 1.0])
    assert np.allclose(parse_grid_spec("0.1:10:3:log"), [0.1, 1.0, 10.0])
    assert parse_grid_spec("2:2:1").tolist() == [2.0]
    for bad in ("0:1", "1:0:3", "0:1:x", "0:1:0", "0:10:3:log", "0:1:3:cubic", "0:+inf:3"):
        with pytest.raises(ParseError):
            parse_grid_spec(bad)


def test_parse_number_list():
    assert parse_number_list("1, 2,3") == [1.0, 2.0, 3.0]
    assert parse_number_list("4,6", int) == [4, 6]
    assert parse_number_list([0.5]) == [0.5]
    with pytest.raises(ParseError):
        parse_number_list("1,a")


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(math.log(2.0))
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0


def test_clamp_text():
    assert clamp_text("short", 10) == "short"
    assert clamp_text("x" * 20, 10) == "x" * 10 + "\n...<truncated>..."


def test_parallel_map_keeps_order():
    jobs.set_threads(4)
    try:
        assert jobs.parallel_map(lambda x: x * x, range(50)) == [x * x for x in range(50)]
        assert jobs.get_threads() == 4
    finally:
        jobs.set_threads(jobs.THREADS)


def test_nested_parallel_map_runs_inline():
    jobs.set_threads(2)
    try:
        names = jobs.parallel_map(
            lambda _: jobs.parallel_map(lambda _: threading.current_thread().name, range(3)), range(2))
        assert all(n.startswith("modexp") for inner in names for n in inner)
    finally:
        jobs.set_threads(jobs.THREADS)
