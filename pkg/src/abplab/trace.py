"""Append-only diagnostics traces with exact CSV round-trips.

Floats are written with repr(), which numpy and json read back to the
identical IEEE-754 value, so re-running a seeded experiment reproduces
the trace file byte for byte.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ParameterError

GRID_TRACE_COLUMNS = (
    "t",
    "alpha",
    "free_energy",
    "sandwich_lower",
    "sandwich_middle",
    "sandwich_upper",
    "fisher",
    "tv_to_target",
    "envelope",
    "mass_defect",
    "clip_defect",
)

PARTICLE_TRACE_COLUMNS = (
    "t",
    "alpha",
    "free_energy",
    "tv_kde",
    "ess_x1",
    "envelope",
)


def format_float(x) -> str:
    # cast first: repr(np.float64(x)) is not a bare literal on numpy 2.x
    return repr(float(x))


class DiagnosticsTrace:
    """Ordered rows of named floats; the schema is fixed at creation."""

    def __init__(self, columns=GRID_TRACE_COLUMNS):
        self.columns = tuple(columns)
        if len(set(self.columns)) != len(self.columns):
            raise ParameterError("duplicate trace columns")
        self.rows: list[dict] = []

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: dict) -> None:
        if set(row) != set(self.columns):
            missing = set(self.columns) - set(row)
            extra = set(row) - set(self.columns)
            raise ParameterError(f"row schema mismatch: missing {missing}, extra {extra}")
        self.rows.append({k: float(row[k]) for k in self.columns})

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ParameterError(f"no trace column named {name!r}")
        return np.array([r[name] for r in self.rows])

    def last(self) -> dict:
        if not self.rows:
            raise ParameterError("empty trace")
        return dict(self.rows[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            f.write(",".join(self.columns) + "\n")
            for r in self.rows:
                f.write(",".join(format_float(r[c]) for c in self.columns) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsTrace":
        with open(path) as f:
            header = f.readline().strip()
            if not header:
                raise ParameterError(f"{path}: empty trace file")
            trace = cls(tuple(header.split(",")))
            for line in f:
                line = line.strip()
                if not line:
                    continue
                vals = [float(tok) for tok in line.split(",")]
                if len(vals) != len(trace.columns):
                    raise ParameterError(f"{path}: ragged trace row")
                trace.rows.append(dict(zip(trace.columns, vals)))
        return trace
