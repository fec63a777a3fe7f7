"""Static SVG figures: posterior bands, discretisation sweep, loss curves.

Figures are drawn with the Agg backend and written with text kept as
``<text>`` nodes, a fixed hash salt and no date stamp, so the same data
gives the same file.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {"svg.fonttype": "none", "svg.hashsalt": "mobgp", "figure.dpi": 100}
TASK_LABELS = {"pp": "a_pp (pause to pause)", "pm": "a_pm (pause to move)",
               "mm": "a_mm (move to move)", "mp": "a_mp (move to pause)"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_posterior(pred, training=None, path="posterior.svg", truth=None):
    """Posterior mean with a two-standard-deviation band for every task.

    Parameters
    ----------
    pred : PredictiveDistribution
    training : TrainingSet, optional
        Empirical targets drawn as points.
    truth : ndarray, optional
        ``(Q, T)`` ground truth at ``pred.queries``.
    """
    with plt.rc_context(STYLE):
        T = len(pred.task_names)
        fig, axes = plt.subplots(T, 1, figsize=(9, 2.2 * T), sharex=True, squeeze=False)
        for k, name in enumerate(pred.task_names):
            ax = axes[k, 0]
            mu, sd = pred.mean[:, k], pred.std[:, k]
            ax.fill_between(pred.queries, mu - 2 * sd, mu + 2 * sd, color="C0", alpha=0.25,
                            label="mean ± 2 sd")
            ax.plot(pred.queries, mu, color="C0", lw=1.2, label="posterior mean")
            if training is not None:
                m = training.mask[:, k]
                ax.plot(training.inputs[m], training.targets[m, k], ".", color="k", ms=2.5,
                        label="empirical")
            if truth is not None:
                ax.plot(pred.queries, truth[:, k], color="C3", lw=1.0, ls="--", label="truth")
            ax.set_ylabel(name)
            ax.set_title(TASK_LABELS.get(name, name), fontsize=9)
            ax.legend(loc="upper right", fontsize=7, ncol=4)
        axes[-1, 0].set_xlabel("hour of week")
        fig.tight_layout()
        _save(fig, path)


def plot_sweep(levels, violation, runtime_s, path="sweep.svg"):
    """Mean row-sum violation (left, log scale) and fit time (right) per level."""
    levels = [str(x) for x in levels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        x = np.arange(len(levels))
        v = np.maximum(np.asarray(violation, dtype=float), 1e-300)
        ax.semilogy(x, v, "o-", color="C0", label="mean stochasticity violation")
        ax.set_xticks(x, levels)
        ax.set_xlabel("bins per hour")
        ax.set_ylabel("mean stochasticity violation")
        ax2 = ax.twinx()
        ax2.plot(x, runtime_s, "s--", color="C1", label="fit time (s)")
        ax2.set_ylabel("fit time (s)")
        lines = ax.get_lines() + ax2.get_lines()
        ax.legend(lines, [ln.get_label() for ln in lines], loc="upper center", fontsize=8)
        fig.tight_layout()
        _save(fig, path)


def plot_loss(curves, path="loss.svg"):
    """Objective per iteration, one line per labelled curve."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, trace in curves.items():
            ax.plot(np.arange(len(trace)), trace, lw=1.0, label=str(label))
        ax.set_xlabel("iteration")
        ax.set_ylabel("penalised negative log marginal likelihood")
        ax.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, path)
