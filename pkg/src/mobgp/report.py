"""Violation statistics for the stochasticity and non-negativity constraints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Column order of the transition matrix A: pause->pause, pause->move,
# move->move, move->pause.
TASKS = ("pp", "pm", "mm", "mp")
PAUSE_ROW = (0, 1)
MOVE_ROW = (3, 2)

FAMILIES = ("pause_row", "move_row", "nonnegativity")


@dataclass(frozen=True)
class FamilyStats:
    max: float
    mean: float
    count: int
    n_points: int
    min_value: float | None = None

    def to_dict(self):
        out = {"max": self.max, "mean": self.mean, "count": self.count,
               "n_points": self.n_points}
        if self.min_value is not None:
            out["min_value"] = self.min_value
        return out


def _family(violations, tolerance, min_value=None):
    v = np.asarray(violations, dtype=float)
    if v.size == 0:
        return FamilyStats(0.0, 0.0, 0, 0, min_value)
    return FamilyStats(float(v.max()), float(v.mean()),
                       int(np.count_nonzero(v > tolerance)), int(v.size),
                       min_value)


@dataclass(frozen=True)
class ConstraintReport:
    """Per-family violation summary.

    Families are ``pause_row`` (``|a_pp + a_pm - 1|``), ``move_row``
    (``|a_mp + a_mm - 1|``) and ``nonnegativity`` (``max(0, -a_ij)``).
    """

    families: dict = field(default_factory=dict)
    tolerance: float = 1e-6
    wall_time_ms: float | None = None

    @property
    def stochasticity_mean(self):
        p, m = self.families["pause_row"], self.families["move_row"]
        n = p.n_points + m.n_points
        if n == 0:
            return 0.0
        return (p.mean * p.n_points + m.mean * m.n_points) / n

    @property
    def stochasticity_max(self):
        return max(self.families["pause_row"].max, self.families["move_row"].max)

    @property
    def n_points(self):
        """Number of constraint points (rows with at least one origin observed)."""
        return max(self.families["pause_row"].n_points, self.families["move_row"].n_points)

    def to_dict(self, include_timing=True):
        return {
            "families": {k: v.to_dict() for k, v in self.families.items()},
            "tolerance": self.tolerance,
            "wall_time_ms": self.wall_time_ms if include_timing else None,
        }

    def to_json(self, include_timing=True):
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        fams = {k: FamilyStats(**v) for k, v in d["families"].items()}
        return cls(fams, d["tolerance"], d.get("wall_time_ms"))


def report_from_rows(rows, tolerance=1e-6, nonnegativity=True, wall_time_ms=None):
    """Build a report from an ``(n, 4)`` array ordered ``(pp, pm, mm, mp)``.

    NaN entries mark a missing origin and drop that row's residual.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    pause = np.abs(rows[:, PAUSE_ROW[0]] + rows[:, PAUSE_ROW[1]] - 1.0)
    move = np.abs(rows[:, MOVE_ROW[0]] + rows[:, MOVE_ROW[1]] - 1.0)
    fams = {
        "pause_row": _family(pause[np.isfinite(pause)], tolerance),
        "move_row": _family(move[np.isfinite(move)], tolerance),
    }
    if nonnegativity:
        vals = rows[np.isfinite(rows)]
        fams["nonnegativity"] = _family(
            np.maximum(0.0, -vals), tolerance,
            float(vals.min()) if vals.size else None)
    return ConstraintReport(fams, tolerance, wall_time_ms)
