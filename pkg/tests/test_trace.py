"""Diagnostics trace table: schema, round-trip serialization."""

import numpy as np
import pytest

from abplab import (
    DiagnosticsTrace,
    GRID_TRACE_COLUMNS,
    PARTICLE_TRACE_COLUMNS,
    ParameterError,
    format_float,
)


def filled_trace():
    trace = DiagnosticsTrace(PARTICLE_TRACE_COLUMNS)
    rng = np.random.default_rng(2)
    for k in range(5):
        trace.append({
            "t": 0.1 * k,
            "alpha": 1.0,
            "free_energy": float(rng.standard_normal()),
            "tv_kde": float(abs(rng.standard_normal())),
            "ess_x1": float(1 + k),
            "envelope": float(abs(rng.standard_normal())),
        })
    return trace


def test_append_rejects_schema_mismatch():
    trace = DiagnosticsTrace(GRID_TRACE_COLUMNS)
    with pytest.raises(ParameterError):
        trace.append({"t": 0.0})
    row = {name: 0.0 for name in GRID_TRACE_COLUMNS}
    row["extra"] = 1.0
    with pytest.raises(ParameterError):
        trace.append(row)


def test_column_and_last():
    trace = filled_trace()
    assert len(trace.column("t")) == 5
    assert trace.last()["ess_x1"] == 5.0
    with pytest.raises(ParameterError):
        trace.column("nope")


def test_round_trip_bytes(tmp_path):
    trace = filled_trace()
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    trace.to_csv(p1)
    back = DiagnosticsTrace.from_csv(p1)
    assert back.columns == trace.columns
    for name in trace.columns:
        np.testing.assert_array_equal(back.column(name), trace.column(name))
    back.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_format_float_round_trips():
    for x in (0.1, 1.0 / 3.0, 2.0**-52, 1e308):
        assert float(format_float(x)) == x
