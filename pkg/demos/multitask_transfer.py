"""How one task's observations inform another.

Two strongly correlated series are generated; a day of the second series
is hidden. A multi-task fit fills the gap from the first series, while a
fit of the second series alone can only interpolate across it.
"""

import numpy as np

from mobgp.gp import FitConfig, KernelSpec, TrainingSet, fit, gram


def main(seed=0):
    r = np.random.default_rng(seed)
    t = np.arange(168) + 0.5
    L = np.linalg.cholesky(gram(KernelSpec("rbf", 6.0, 1.0), t) + 1e-8 * np.eye(168))
    f, g = L @ r.standard_normal(168), L @ r.standard_normal(168)
    a = 0.5 + 0.1 * f
    b = 0.4 + 0.1 * (0.97 * f + np.sqrt(1 - 0.97 ** 2) * g)
    y = np.column_stack([a, b]) + 0.01 * r.standard_normal((168, 2))

    hidden = (t > 72) & (t < 96)
    mask = np.ones_like(y, dtype=bool)
    mask[hidden, 1] = False
    data = TrainingSet(t, y, mask, task_names=("a", "b"))

    joint = fit(data, FitConfig())
    alone = fit(data.select_tasks([1]), FitConfig())
    err_joint = np.abs(joint.posterior_mean(t[hidden])[:, 1] - b[hidden]).mean()
    err_alone = np.abs(alone.posterior_mean(t[hidden])[:, 0] - b[hidden]).mean()
    print(f"hidden-day mean abs error: multi-task {err_joint:.4f}, single-task {err_alone:.4f}")
    kf = joint.hyper.task.matrix
    print(f"learned task correlation {kf[0, 1] / np.sqrt(kf[0, 0] * kf[1, 1]):.3f}")


if __name__ == "__main__":
    main()
