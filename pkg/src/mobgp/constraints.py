"""Constraint points and the penalised training objective.

Row sums ``a_pp + a_pm = 1``, ``a_mp + a_mm = 1`` and ``a_ij >= 0`` are
imposed on the posterior mean at a finite set of week-phase points through
a quadratic penalty whose weight is escalated over restarts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidCount
from .gp.kernels import gram
from .gp.likelihood import Evaluation
from .gp.model import FitConfig, MultiTaskGP, check_fittable, initial_hyperparameters, optimize
from .markov import WEEK_HOURS
from .report import MOVE_ROW, PAUSE_ROW, TASKS, ConstraintReport, report_from_rows

DEFAULT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ConstraintPointSet:
    points: np.ndarray
    rule: str = "custom"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).ravel()
        if p.size == 0:
            raise InvalidCount("constraint point set is empty")
        if np.any(p < 0) or np.any(p >= WEEK_HOURS):
            raise ValueError("constraint points must lie in [0, 168)")
        p = np.unique(p)
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size


def build_constraint_points(scheme, rule="training_bins"):
    """Constraint points from a rule.

    ``rule`` is ``"training_bins"`` (bin centres of ``scheme``),
    ``"uniform:M"`` or ``("uniform", M)`` (``M`` points spaced evenly over
    the week from zero), or a sequence of hours.
    """
    if isinstance(rule, str) and rule.startswith("uniform:"):
        rule = ("uniform", rule.split(":", 1)[1])
    if isinstance(rule, str):
        if rule != "training_bins":
            raise ValueError(f"unknown constraint rule {rule!r}")
        return ConstraintPointSet(scheme.centers(), "training_bins")
    if isinstance(rule, tuple) and len(rule) == 2 and rule[0] == "uniform":
        try:
            m = int(rule[1])
        except (TypeError, ValueError) as exc:
            raise InvalidCount(f"bad point count {rule[1]!r}") from exc
        if m <= 0:
            raise InvalidCount("number of constraint points must be positive")
        return ConstraintPointSet(np.arange(m) * (WEEK_HOURS / m), f"uniform:{m}")
    return ConstraintPointSet(np.asarray(rule, dtype=float), "custom")


@dataclass(frozen=True)
class ConstraintConfig:
    """Penalty weight ``lambda``, escalation schedule and non-negativity margin.

    The fit runs once at ``penalty_weight`` and then ``restarts`` more times,
    multiplying the weight by ``multiplier`` before each restart.
    """

    penalty_weight: float = 100.0
    multiplier: float = 10.0
    restarts: int = 3
    nonneg_margin: float = 0.0

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ValueError("penalty weight must be non-negative")
        if self.restarts < 0 or self.multiplier <= 0:
            raise ValueError("invalid penalty schedule")
        if self.nonneg_margin < 0:
            raise ValueError("nonneg_margin must be >= 0")

    def weights(self):
        if self.penalty_weight == 0:
            return [0.0]
        return [self.penalty_weight * self.multiplier ** k for k in range(self.restarts + 1)]


def constraint_penalty(means, weight, margin=0.0):
    """Penalty value and its gradient with respect to ``means``.

    ``means`` is ``(m, 4)`` in ``(pp, pm, mm, mp)`` order; the penalty is
    ``weight * sum_u [r_pause^2 + r_move^2 + sum_ij max(0, margin - mu_ij)^2]``.
    """
    mu = np.atleast_2d(np.asarray(means, dtype=float))
    r_p = mu[:, PAUSE_ROW[0]] + mu[:, PAUSE_ROW[1]] - 1.0
    r_m = mu[:, MOVE_ROW[0]] + mu[:, MOVE_ROW[1]] - 1.0
    hinge = np.maximum(0.0, margin - mu)
    value = weight * (np.sum(r_p ** 2) + np.sum(r_m ** 2) + np.sum(hinge ** 2))
    grad = -2.0 * weight * hinge
    for k in PAUSE_ROW:
        grad[:, k] += 2.0 * weight * r_p
    for k in MOVE_ROW:
        grad[:, k] += 2.0 * weight * r_m
    return float(value), grad


def _check_tasks(data):
    if tuple(data.task_names) != TASKS:
        raise ValueError(f"constraints need the four transition tasks {TASKS}")


def penalized_value_and_grad(hyper, data, points, cfg, weight=None, solver="auto"):
    """Penalised objective and its gradient over ``hyper.to_vector()``."""
    weight = cfg.penalty_weight if weight is None else weight
    ev = Evaluation(hyper, data, solver)
    value = ev.nll()
    ckf, ck, cd = ev.nll_contractions()
    if weight == 0:
        return value, ev.contract(ckf, ck, cd)
    Kc, dKc = gram(hyper.kernel, points.points, data.inputs, with_grad=True)
    A, Kf = ev.alpha, ev.Kf
    mu = (hyper.mean[:, None] + Kf @ A @ Kc.T).T
    pen, gmu = constraint_penalty(mu, weight, cfg.nonneg_margin)
    value += pen
    G = gmu.T                                   # (T, m)
    B = np.where(data.mask.T, Kf @ G @ Kc, 0.0)
    Vv = ev.system.solve(B)
    # d mu = dKf A Kc^T + Kf A dKc^T - Kf Sigma^-1 dSigma A Kc^T
    direct_k = G @ Kc @ A.T
    ckf = ckf + direct_k - Vv @ ev.K @ A.T
    ck = {"lengthscale": ck["lengthscale"] + G @ dKc @ A.T - Vv @ ev.dK @ A.T,
          "signal": ck["signal"] + direct_k - Vv @ ev.K @ A.T}
    cd = cd - Vv @ A.T
    sym = lambda M: 0.5 * (M + M.T)
    grad = ev.contract(sym(ckf), {k: sym(v) for k, v in ck.items()}, sym(cd))
    return value, grad


def penalized_objective(hyper, data, points, cfg, solver="auto"):
    """``nll + lambda * penalty`` evaluated on the posterior mean at ``points``."""
    _check_tasks(data)
    return penalized_value_and_grad(hyper, data, points, cfg, solver=solver)[0]


def evaluate_constraints(model, points, tolerance=DEFAULT_TOLERANCE):
    """Violation statistics of the posterior mean at ``points``."""
    start = time.perf_counter()
    mu = model.posterior_mean(points.points)
    wall = (time.perf_counter() - start) * 1e3
    return report_from_rows(mu, tolerance=tolerance, nonnegativity=True, wall_time_ms=wall)


@dataclass
class ConstrainedFit:
    model: MultiTaskGP
    report: ConstraintReport
    trajectory: list
    stage_weights: list
    stage_starts: list

    def __iter__(self):
        return iter((self.model, self.report, self.trajectory))


def fit_constrained(data, points, cfg=ConstraintConfig(), fit_config=FitConfig(),
                    bins_per_hour=None, tolerance=DEFAULT_TOLERANCE):
    """Fit hyperparameters under the penalised objective.

    Each stage warm-starts from the previous stage's best point with a
    fresh optimiser state. Unpacks as ``(model, report, trajectory)``.
    """
    _check_tasks(data)
    check_fittable(data)
    hyper = initial_hyperparameters(data, fit_config)
    trajectory, starts = [], []
    weights = cfg.weights()
    for w in weights:
        objective = lambda h, w=w: penalized_value_and_grad(h, data, points, cfg, w,
                                                             fit_config.solver)
        hyper, trace = optimize(objective, hyper, fit_config)
        starts.append(len(trajectory))
        trajectory.extend(trace)
    model = MultiTaskGP(hyper, data, fit_config.solver, trajectory, bins_per_hour)
    report = evaluate_constraints(model, points, tolerance)
    return ConstrainedFit(model, report, trajectory, weights, starts)
