"""Deterministic first-order optimiser over bounded parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from ..exceptions import MobGPError, OptimizationFailed


@dataclass
class Adam:
    """Adam with a step schedule and a non-increasing objective.

    The rate halves at each milestone fraction. Each proposed step is
    halved up to ``max_backtracks`` times until the objective does not
    increase; a step that never qualifies is rejected and the moment
    estimates are reset. After ``patience`` consecutive rejections the
    point is stationary to working precision and the run stops early.

    Without the safeguard a fresh optimiser state warm-started at a
    converged point takes a first step of about ``learning_rate`` in every
    coordinate, which under a large constraint penalty throws the objective
    far uphill.
    """

    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    milestones: tuple = (0.5, 0.75)
    max_backtracks: int = 10
    patience: int = 3

    def run(self, fun, x0, n_iter, bounds=None, free=None):
        """Minimise ``fun(x) -> (value, grad)``.

        Returns the final iterate, which is also the best one, its value
        and the value at every iteration (``n_iter + 1`` entries including
        the start; after an early stop the last value repeats).
        """
        x = np.array(x0, dtype=float)
        free = np.ones_like(x, dtype=bool) if free is None else np.asarray(free)
        lo, hi = (np.full_like(x, -np.inf), np.full_like(x, np.inf)) if bounds is None \
            else (bounds[:, 0], bounds[:, 1])

        def evaluate(z):
            try:
                val, grad = fun(z)
            except MobGPError:
                return np.nan, None
            if not np.isfinite(val) or grad is None or not np.all(np.isfinite(grad)):
                return np.nan, None
            return float(val), grad

        f, g = evaluate(x)
        if g is None:
            raise OptimizationFailed("objective is not finite at the initial point", [])
        m = np.zeros_like(x)
        v = np.zeros_like(x)
        trace = [f]
        cuts = [int(round(c * n_iter)) for c in self.milestones]
        lr = self.learning_rate
        t = 0          # steps since the moments were last reset
        rejected = 0
        for it in range(n_iter):
            if it in cuts:
                lr *= 0.5
            t += 1
            gf = np.where(free, g, 0.0)
            m = self.beta1 * m + (1 - self.beta1) * gf
            v = self.beta2 * v + (1 - self.beta2) * gf * gf
            mhat = m / (1 - self.beta1 ** t)
            vhat = v / (1 - self.beta2 ** t)
            step = lr * mhat / (np.sqrt(vhat) + self.eps)
            for k in range(self.max_backtracks + 1):
                trial = np.clip(x - step * 0.5 ** k, lo, hi)
                ft, gt = evaluate(trial)
                if gt is not None and ft <= f:
                    x, f, g = trial, ft, gt
                    rejected = 0
                    break
            else:
                rejected += 1
                m[:] = 0.0
                v[:] = 0.0
                t = 0
                if rejected >= self.patience:
                    trace.extend([f] * (n_iter - it))
                    break
            trace.append(f)
        return x, f, trace


def lbfgs(fun, x0, n_iter, bounds=None, free=None, gtol=1e-8):
    """L-BFGS-B on the free coordinates; same return contract as :meth:`Adam.run`."""
    x0 = np.array(x0, dtype=float)
    free = np.ones_like(x0, dtype=bool) if free is None else np.asarray(free)
    idx = np.flatnonzero(free)
    trace = []

    def full(z):
        x = x0.copy()
        x[idx] = z
        return x

    def wrapped(z):
        try:
            f, g = fun(full(z))
        except MobGPError:
            return np.inf, np.zeros_like(z)
        return f, g[idx]

    f0, _ = fun(x0)
    if not np.isfinite(f0):
        raise OptimizationFailed("objective is not finite at the initial point")
    trace.append(float(f0))
    b = None if bounds is None else [tuple(bounds[i]) for i in idx]
    b = None if b is None else [(None if not np.isfinite(l) else l,
                                 None if not np.isfinite(h) else h) for l, h in b]
    res = scipy.optimize.minimize(
        wrapped, x0[idx], jac=True, method="L-BFGS-B", bounds=b,
        callback=lambda intermediate_result: trace.append(float(intermediate_result.fun)),
        options={"maxiter": n_iter, "gtol": gtol, "ftol": 1e-15})
    x = full(res.x)
    f = float(res.fun)
    if not np.isfinite(f):
        raise OptimizationFailed("objective diverged", trace)
    if f > trace[0]:
        return x0, trace[0], trace
    return x, f, trace
