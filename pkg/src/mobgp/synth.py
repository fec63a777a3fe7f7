"""Ground-truth transition functions and forward simulation of the chain."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .markov import (MONDAY_ANCHOR, WEEK_HOURS, MobilityState, StateSequence,
                     transition_matrix)

EPS = 1e-3
# Monday 2020-01-06 00:00 UTC
DEFAULT_START = MONDAY_ANCHOR + 2609 * 7 * 86400


@dataclass(frozen=True)
class PeriodicFunction:
    """A weekly-periodic probability curve of the week phase.

    ``kind`` is ``"constant"``, ``"sinusoid"`` or ``"schedule"``. Sinusoids
    evaluate ``mean + amplitude * sin(2 pi c (h - phase_hours) / 168)`` with
    ``c = cycles_per_week``; a schedule splits the week into
    ``len(schedule)`` equal segments.
    """

    kind: str = "constant"
    mean: float = 0.5
    amplitude: float = 0.0
    phase_hours: float = 0.0
    cycles_per_week: int = 1
    schedule: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid", "schedule"):
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == "schedule" and len(self.schedule) == 0:
            raise ValueError("schedule function needs a non-empty schedule")
        if int(self.cycles_per_week) != self.cycles_per_week or self.cycles_per_week < 1:
            raise ValueError("cycles_per_week must be a positive integer")
        object.__setattr__(self, "schedule", tuple(float(x) for x in self.schedule))

    def raw(self, hours):
        h = np.mod(np.asarray(hours, dtype=float), WEEK_HOURS)
        if self.kind == "constant":
            return np.full_like(h, self.mean)
        if self.kind == "sinusoid":
            arg = 2 * np.pi * self.cycles_per_week * (h - self.phase_hours) / WEEK_HOURS
            return self.mean + self.amplitude * np.sin(arg)
        sched = np.asarray(self.schedule)
        idx = np.minimum((h / WEEK_HOURS * sched.size).astype(int), sched.size - 1)
        return sched[idx]

    def to_dict(self):
        d = {"kind": self.kind, "mean": self.mean}
        if self.kind == "sinusoid":
            d.update(amplitude=self.amplitude, phase_hours=self.phase_hours,
                     cycles_per_week=self.cycles_per_week)
        if self.kind == "schedule":
            d = {"kind": "schedule", "schedule": list(self.schedule)}
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise ValueError("function spec needs a 'kind' field")
        allowed = {"kind", "mean", "amplitude", "phase_hours", "cycles_per_week", "schedule"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown fields in function spec: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TransitionFunctionSpec:
    """Truth curves for ``a_pm`` and ``a_mp``; complements follow.

    Values are clamped to ``[eps, 1 - eps]``. Pass ``eps=0`` to build
    deterministic or absorbing chains on purpose.
    """

    a_pm: PeriodicFunction = field(default_factory=PeriodicFunction)
    a_mp: PeriodicFunction = field(default_factory=PeriodicFunction)
    eps: float = EPS

    def probabilities(self, hours):
        lo, hi = self.eps, 1.0 - self.eps
        pm = np.clip(self.a_pm.raw(hours), lo, hi)
        mp = np.clip(self.a_mp.raw(hours), lo, hi)
        return pm, mp

    def rows(self, hours):
        """Truth in the ``(a_pp, a_pm, a_mm, a_mp)`` column order."""
        pm, mp = self.probabilities(hours)
        return np.column_stack([1.0 - pm, pm, 1.0 - mp, mp])

    def to_dict(self):
        return {"a_pm": self.a_pm.to_dict(), "a_mp": self.a_mp.to_dict(), "eps": self.eps}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "a_pm" not in d or "a_mp" not in d:
            raise ValueError("transition spec needs 'a_pm' and 'a_mp' entries")
        return cls(PeriodicFunction.from_dict(d["a_pm"]),
                   PeriodicFunction.from_dict(d["a_mp"]),
                   float(d.get("eps", EPS)))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def constant(cls, a_pm, a_mp, eps=EPS):
        return cls(PeriodicFunction("constant", a_pm), PeriodicFunction("constant", a_mp), eps)

    @classmethod
    def sinusoid(cls, mean=0.5, amplitude=0.3, phase_hours=0.0, cycles_per_week=7,
                 mp_phase_shift=None, eps=EPS):
        """Sinusoidal ``a_pm`` with ``a_mp`` shifted by half a cycle by default."""
        if mp_phase_shift is None:
            mp_phase_shift = WEEK_HOURS / cycles_per_week / 2
        f = PeriodicFunction("sinusoid", mean, amplitude, phase_hours, cycles_per_week)
        g = PeriodicFunction("sinusoid", mean, amplitude, phase_hours + mp_phase_shift,
                             cycles_per_week)
        return cls(f, g, eps)


def eval_truth(spec, week_phase):
    """Transition matrix at a week phase in ``[0, 1)``; rows are origin states."""
    pm, mp = spec.probabilities(float(week_phase) * WEEK_HOURS)
    return transition_matrix(float(pm), float(mp))


@dataclass(frozen=True)
class SimulationConfig:
    weeks: int = 10
    steps_per_hour: int = 4
    seed: int = 0
    initial_state: MobilityState = MobilityState.PAUSE
    start: int = DEFAULT_START

    def __post_init__(self):
        if int(self.weeks) < 1:
            raise ValueError("weeks must be >= 1")
        if int(self.steps_per_hour) < 1 or 3600 % int(self.steps_per_hour):
            raise ValueError("steps_per_hour must be a positive divisor of 3600")

    @property
    def n_steps(self):
        return self.weeks * WEEK_HOURS * self.steps_per_hour


def simulate_chain(spec, cfg, person_id="sim"):
    """Sample a state path at a fixed step.

    The transition into step ``k`` uses the truth at the phase of step ``k``.
    """
    dt = 3600 // cfg.steps_per_hour
    times = cfg.start + dt * np.arange(cfg.n_steps + 1, dtype=np.int64)
    hours = (np.arange(1, cfg.n_steps + 1) * dt / 3600.0)
    hours += ((cfg.start - MONDAY_ANCHOR) % (WEEK_HOURS * 3600)) / 3600.0
    pm, mp = spec.probabilities(hours)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg.seed))))
    u = rng.random(cfg.n_steps)
    # switch if u < P(leave current state)
    leave_p = (u < pm).tolist()
    leave_m = (u < mp).tolist()
    states = np.empty(cfg.n_steps + 1, dtype=np.int8)
    s = int(cfg.initial_state)
    states[0] = s
    out = [s]
    append = out.append
    for k in range(cfg.n_steps):
        if (leave_m[k] if s else leave_p[k]):
            s = 1 - s
        append(s)
    states[:] = out
    return StateSequence(times, states, person_id)
