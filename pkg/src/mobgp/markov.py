"""Two-state (pause/move) time-inhomogeneous Markov process on a weekly grid.

Observations are binned into cyclic weekly intervals and turned into
empirical transition probabilities, stored as the matrix ``A`` with columns
``[a_pp, a_pm, a_mm, a_mp]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyInput, InvalidTransitionMatrix
from .report import ConstraintReport, TASKS, report_from_rows

WEEK_HOURS = 168
WEEK_SECONDS = WEEK_HOURS * 3600
# 1970-01-05 00:00 UTC, the first Monday after the epoch.
MONDAY_ANCHOR = 4 * 86400


class MobilityState(enum.IntEnum):
    PAUSE = 0
    MOVE = 1

    @classmethod
    def parse(cls, token):
        token = str(token).strip().upper()
        if token in ("P", "PAUSE", "0"):
            return cls.PAUSE
        if token in ("M", "MOVE", "1"):
            return cls.MOVE
        raise ValueError(f"unknown mobility state {token!r}")

    @property
    def code(self):
        return "P" if self is MobilityState.PAUSE else "M"


@dataclass(frozen=True)
class StateSequence:
    """Timestamped states of one individual.

    ``timestamps`` are UTC seconds (int64, strictly increasing) and
    ``states`` the matching :class:`MobilityState` codes (0 pause, 1 move).
    """

    timestamps: np.ndarray
    states: np.ndarray
    person_id: str = "0"

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.int64)
        s = np.asarray(self.states, dtype=np.int8)
        if t.ndim != 1 or t.shape != s.shape:
            raise ValueError("timestamps and states must be 1-D arrays of equal length")
        if t.size == 0:
            raise EmptyInput("state sequence is empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any((s != 0) & (s != 1)):
            raise ValueError("states must be 0 (pause) or 1 (move)")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return self.timestamps.size

    @classmethod
    def from_entries(cls, entries, person_id="0"):
        entries = list(entries)
        if not entries:
            raise EmptyInput("state sequence is empty")
        ts, st = zip(*entries)
        return cls(np.array(ts), np.array([int(MobilityState.parse(s) if isinstance(s, str) else s) for s in st]),
                   person_id)


@dataclass(frozen=True)
class TimeBinScheme:
    bins_per_hour: int = 1

    def __post_init__(self):
        if self.bins_per_hour not in (1, 2, 4):
            raise ValueError(f"bins_per_hour must be 1, 2 or 4, got {self.bins_per_hour}")

    @property
    def total_bins(self):
        return WEEK_HOURS * self.bins_per_hour

    @property
    def bin_seconds(self):
        return 3600 // self.bins_per_hour

    @property
    def bin_hours(self):
        return 1.0 / self.bins_per_hour

    def centers(self):
        """Bin centres in hours since Monday 00:00."""
        return (np.arange(self.total_bins) + 0.5) / self.bins_per_hour

    def bin_of(self, timestamps):
        phase = np.mod(np.asarray(timestamps, dtype=np.int64) - MONDAY_ANCHOR, WEEK_SECONDS)
        return (phase // self.bin_seconds).astype(np.int64)


def week_phase_hours(timestamps):
    """Hours since the most recent Monday 00:00 UTC."""
    return np.mod(np.asarray(timestamps, dtype=np.int64) - MONDAY_ANCHOR, WEEK_SECONDS) / 3600.0


@dataclass(frozen=True)
class TransitionCounts:
    """Per-bin transition counts; arrays of length ``scheme.total_bins``."""

    scheme: TimeBinScheme
    n_pp: np.ndarray
    n_pm: np.ndarray
    n_mp: np.ndarray
    n_mm: np.ndarray

    def __post_init__(self):
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            a = np.asarray(getattr(self, name), dtype=np.int64)
            if a.shape != (self.scheme.total_bins,):
                raise ValueError(f"{name} must have length {self.scheme.total_bins}")
            if np.any(a < 0):
                raise ValueError(f"{name} has negative counts")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, scheme):
        z = np.zeros(scheme.total_bins, dtype=np.int64)
        return cls(scheme, z, z, z, z)

    def __add__(self, other):
        if self.scheme != other.scheme:
            raise ValueError("cannot add counts from different schemes")
        return TransitionCounts(self.scheme, self.n_pp + other.n_pp, self.n_pm + other.n_pm,
                                self.n_mp + other.n_mp, self.n_mm + other.n_mm)

    @property
    def total(self):
        return int(self.n_pp.sum() + self.n_pm.sum() + self.n_mp.sum() + self.n_mm.sum())

    def __eq__(self, other):
        if not isinstance(other, TransitionCounts):
            return NotImplemented
        return self.scheme == other.scheme and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("n_pp", "n_pm", "n_mp", "n_mm"))

    __hash__ = None


def bin_observations(seq, scheme):
    """Count one-step transitions per weekly bin.

    A consecutive pair ``(s[i-1], s[i])`` is attributed to the bin holding
    ``t[i]``. Pairs more than one bin width apart are skipped.
    """
    if seq is None or len(seq) == 0:
        raise EmptyInput("state sequence is empty")
    t, s = seq.timestamps, seq.states
    if t.size < 2:
        return TransitionCounts.zeros(scheme)
    keep = np.diff(t) <= scheme.bin_seconds
    src = s[:-1][keep].astype(np.int64)
    dst = s[1:][keep].astype(np.int64)
    bins = scheme.bin_of(t[1:][keep])
    B = scheme.total_bins
    # flat index: bin * 4 + 2 * src + dst  -> (pp, pm, mp, mm)
    flat = np.bincount(bins * 4 + 2 * src + dst, minlength=4 * B).reshape(B, 4)
    return TransitionCounts(scheme, flat[:, 0], flat[:, 1], flat[:, 2], flat[:, 3])


@dataclass(frozen=True)
class TransitionDataset:
    """Empirical transition probabilities per bin.

    ``rows`` is ``(total_bins, 4)`` ordered ``(a_pp, a_pm, a_mm, a_mp)``;
    entries of a missing origin are NaN.
    """

    scheme: TimeBinScheme
    rows: np.ndarray
    n_pause: np.ndarray
    n_move: np.ndarray

    def __post_init__(self):
        for name in ("rows", "n_pause", "n_move"):
            a = np.array(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def missing_pause(self):
        return self.n_pause == 0

    @property
    def missing_move(self):
        return self.n_move == 0

    @property
    def mask(self):
        """Boolean ``(total_bins, 4)`` validity mask matching ``rows``."""
        mp, mm = ~self.missing_pause, ~self.missing_move
        return np.column_stack([mp, mp, mm, mm])

    def column(self, name):
        return self.rows[:, TASKS.index(name)]

    def __len__(self):
        return self.rows.shape[0]


def estimate_empirical(counts, scheme=None):
    scheme = scheme or counts.scheme
    if scheme != counts.scheme:
        raise ValueError("counts were binned with a different scheme")
    n_pause = counts.n_pp + counts.n_pm
    n_move = counts.n_mp + counts.n_mm
    rows = np.full((scheme.total_bins, 4), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        a_pm = counts.n_pm / n_pause
        a_mp = counts.n_mp / n_move
    ok_p, ok_m = n_pause > 0, n_move > 0
    rows[ok_p, 1] = a_pm[ok_p]
    rows[ok_p, 0] = 1.0 - a_pm[ok_p]
    rows[ok_m, 3] = a_mp[ok_m]
    rows[ok_m, 2] = 1.0 - a_mp[ok_m]
    return TransitionDataset(scheme, rows, n_pause, n_move)


@dataclass(frozen=True)
class StateDistribution:
    p_pause: float
    p_move: float

    def __post_init__(self):
        if not (0.0 <= self.p_pause <= 1.0 and 0.0 <= self.p_move <= 1.0):
            raise ValueError("state probabilities must lie in [0, 1]")
        if abs(self.p_pause + self.p_move - 1.0) > 1e-12:
            raise ValueError("state probabilities must sum to 1")

    def as_array(self):
        return np.array([self.p_pause, self.p_move])


def transition_matrix(a_pm, a_mp):
    """Row-stochastic matrix ``[[a_pp, a_pm], [a_mp, a_mm]]``."""
    return np.array([[1.0 - a_pm, a_pm], [a_mp, 1.0 - a_mp]])


def propagate(p0, transitions):
    """Forward recursion ``P(t) = a(t) P(t-1)`` over a list of 2x2 matrices.

    Matrices are row-stochastic with rows indexed by the origin state.
    """
    mats = [np.asarray(a, dtype=float) for a in transitions]
    for k, a in enumerate(mats):
        if a.shape != (2, 2) or np.any(a < -1e-9) or np.any(np.abs(a.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidTransitionMatrix(f"transition matrix {k} is not row-stochastic")
    out = [p0]
    p = p0.as_array()
    for a in mats:
        p = p @ a
        p = np.clip(p, 0.0, 1.0)
        # renormalise round-off so each state stays on the simplex
        move = p[1] / (p[0] + p[1])
        out.append(StateDistribution(1.0 - move, move))
    return out


def validate_stochasticity(ds, tol=1e-9):
    """Row-sum violations over non-missing bins of an empirical dataset."""
    return report_from_rows(ds.rows, tolerance=tol, nonnegativity=False)


__all__ = [
    "ConstraintReport", "MobilityState", "StateSequence", "TimeBinScheme",
    "TransitionCounts", "TransitionDataset", "StateDistribution",
    "bin_observations", "estimate_empirical", "propagate", "transition_matrix",
    "validate_stochasticity", "week_phase_hours", "WEEK_HOURS", "MONDAY_ANCHOR",
]
