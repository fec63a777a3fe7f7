"""CSV readers and writers for state sequences and transition datasets.

State sequences use the header ``person_id,timestamp,state`` with states
``P`` or ``M``. Transition datasets use
``bin,a_pp,a_pm,a_mm,a_mp,n_pause,n_move,missing_pause,missing_move``;
probabilities of a missing origin are written as empty fields.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .exceptions import EmptyInput
from .markov import (WEEK_HOURS, MobilityState, StateSequence, TimeBinScheme, TransitionCounts,
                     TransitionDataset, bin_observations)
from .report import TASKS

STATE_COLUMNS = ["person_id", "timestamp", "state"]
DATASET_COLUMNS = ["bin", "a_pp", "a_pm", "a_mm", "a_mp",
                   "n_pause", "n_move", "missing_pause", "missing_move"]
FLOAT_FORMAT = "%.17g"


def write_sequences(sequences, path):
    """Write one or more :class:`StateSequence` objects to a single CSV."""
    if isinstance(sequences, StateSequence):
        sequences = [sequences]
    frames = []
    for seq in sequences:
        frames.append(pd.DataFrame({
            "person_id": seq.person_id,
            "timestamp": seq.timestamps,
            "state": np.where(seq.states == MobilityState.PAUSE, "P", "M"),
        }))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, lineterminator="\n")


def read_sequences(path):
    """Read a state CSV into one sequence per ``person_id``.

    Rows are sorted by timestamp within each person. Raises
    :class:`ValueError` on missing columns or unknown state codes, and
    :class:`EmptyInput` when there are no rows.
    """
    df = pd.read_csv(path, dtype={"person_id": str, "state": str})
    missing = [c for c in STATE_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"state CSV lacks columns {missing}")
    if df.empty:
        raise EmptyInput(f"{path} has no rows")
    if df["timestamp"].isna().any() or df["state"].isna().any():
        raise ValueError("state CSV has empty timestamp or state fields")
    bad = sorted(set(df["state"].str.strip().str.upper()) - {"P", "M"})
    if bad:
        raise ValueError(f"unknown state codes {bad}")
    df = df.assign(code=(df["state"].str.strip().str.upper() == "M").astype(np.int8))
    out = []
    for pid, grp in df.groupby("person_id", sort=True):
        grp = grp.sort_values("timestamp", kind="stable")
        out.append(StateSequence(grp["timestamp"].to_numpy(np.int64),
                                 grp["code"].to_numpy(), str(pid)))
    return out


def count_transitions(sequences, scheme):
    """Transition counts pooled over every sequence."""
    total = TransitionCounts.zeros(scheme)
    for seq in sequences:
        total = total + bin_observations(seq, scheme)
    return total


def dataset_frame(ds):
    df = pd.DataFrame({"bin": np.arange(len(ds))})
    for k, name in enumerate(TASKS):
        df[f"a_{name}"] = ds.rows[:, k]
    df["n_pause"] = np.asarray(ds.n_pause, dtype=np.int64)
    df["n_move"] = np.asarray(ds.n_move, dtype=np.int64)
    df["missing_pause"] = ds.missing_pause.astype(int)
    df["missing_move"] = ds.missing_move.astype(int)
    return df[DATASET_COLUMNS]


def write_dataset(ds, path):
    dataset_frame(ds).to_csv(path, index=False, float_format=FLOAT_FORMAT,
                             lineterminator="\n")


def read_dataset(path):
    """Read a transition dataset CSV; the bin count fixes the scheme."""
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in DATASET_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"dataset CSV lacks columns {missing}")
    if df.empty:
        raise EmptyInput(f"{path} has no rows")
    n = len(df)
    if n % WEEK_HOURS:
        raise ValueError(f"{n} rows is not a whole number of bins per hour")
    scheme = TimeBinScheme(n // WEEK_HOURS)
    df = df.sort_values("bin")
    if not np.array_equal(df["bin"].to_numpy(), np.arange(n)):
        raise ValueError("dataset bins must be 0..n-1 without gaps")
    rows = df[[f"a_{t}" for t in TASKS]].to_numpy(float)
    return TransitionDataset(scheme, rows, df["n_pause"].to_numpy(np.int64),
                             df["n_move"].to_numpy(np.int64))
