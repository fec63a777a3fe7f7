import dataclasses
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mobgp.exceptions import DegenerateData, ModelMismatch, OptimizationFailed
from mobgp.gp import (FitConfig, Hyperparameters, KernelSpec, MultiTaskGP, TaskCovariance,
                      TrainingSet, fit, gram, kernel_eval, nll, nll_grad, scalar_posterior)
from mobgp.gp.likelihood import Evaluation, resolve_solver
from mobgp.gp.optim import Adam
from mobgp.gp.params import NOISE_FLOOR

from oracles import (assert_grad_close, complete_grid, fd_grad, oracle_nll, oracle_predict,
                     random_problem)

LOG_2PI = np.log(2 * np.pi)


# ----------------------------------------------------------------- kernels

def test_kernel_examples():
    k = KernelSpec("rbf", 3.0, 2.0)
    assert kernel_eval(k, 0.0) == 2.0
    assert kernel_eval(k, 3.0) == pytest.approx(2.0 * np.exp(-0.5))
    hourly = np.arange(168.0)
    assert kernel_eval(k, hourly[167]) == pytest.approx(kernel_eval(k, 1.0))
    m = KernelSpec("matern32", 2.0, 1.5, None)
    r = np.sqrt(3) * 5.0 / 2.0
    assert kernel_eval(m, 5.0) == pytest.approx(1.5 * (1 + r) * np.exp(-r))
    assert kernel_eval(m, -5.0) == kernel_eval(m, 5.0)
    with pytest.raises(ValueError):
        KernelSpec("rbf", 0.0)


def test_gram_lengthscale_derivative(rng):
    t = rng.uniform(0, 168, 7)
    for fam in ("rbf", "matern32"):
        k = KernelSpec(fam, 9.0, 1.3)
        _, dk = gram(k, t, with_grad=True)
        h = 1e-6
        up = gram(k.with_(lengthscale=9.0 * np.exp(h)), t)
        dn = gram(k.with_(lengthscale=9.0 * np.exp(-h)), t)
        np.testing.assert_allclose(dk, (up - dn) / (2 * h), atol=1e-8)


# ----------------------------------------------------------------- nll

def test_nll_single_point_closed_form():
    data = TrainingSet([10.0], [[0.0]])
    hyper = Hyperparameters(KernelSpec("rbf", 5.0, 1.0), TaskCovariance.identity(1),
                            [NOISE_FLOOR], [0.0])
    # 1/2 (0 + log(1 + 1e-8) + log 2 pi)
    assert nll(hyper, data) == pytest.approx(0.5 * (np.log1p(NOISE_FLOOR) + LOG_2PI), abs=1e-12)
    assert nll(hyper, data) == pytest.approx(0.918939, abs=1e-6)


def test_nll_independent_tasks_add(rng):
    t = np.sort(rng.uniform(0, 168, 9))
    y = rng.uniform(size=9)
    k = KernelSpec("rbf", 12.0, 0.7)
    one = Hyperparameters(k, TaskCovariance.identity(1), [0.05], [0.3])
    two = Hyperparameters(k, TaskCovariance.identity(2), [0.05, 0.05], [0.3, 0.3])
    single = nll(one, TrainingSet(t, y))
    double = nll(two, TrainingSet(t, np.column_stack([y, y])))
    assert double == pytest.approx(2 * single, rel=1e-12)


@pytest.mark.parametrize("mode", ["shared", "per_task", "complementary"])
@pytest.mark.parametrize("missing", [0.0, 0.3])
def test_nll_matches_dense_logpdf(rng, mode, missing):
    T = 4 if mode == "complementary" else 2
    for _ in range(3):
        data, hyper = random_problem(rng, N=6, T=T, mode=mode, missing=missing)
        assert nll(hyper, data, "dense") == pytest.approx(oracle_nll(hyper, data), rel=1e-9, abs=1e-8)


def test_nll_wrapped_kernel_matches_dense_logpdf(rng):
    data, hyper = random_problem(rng, N=10, T=2, period=168.0)
    hyper = dataclasses.replace(hyper, kernel=hyper.kernel.with_(lengthscale=6.0))
    assert nll(hyper, data, "dense") == pytest.approx(oracle_nll(hyper, data), abs=1e-8)


@pytest.mark.parametrize("mode", ["shared", "per_task", "complementary"])
def test_nll_grad_matches_finite_differences(rng, mode):
    T = 4 if mode == "complementary" else 2
    for fam in ("rbf", "matern32"):
        data, hyper = random_problem(rng, N=8, T=T, mode=mode, missing=0.2, family=fam)
        assert_grad_close(nll_grad(hyper, data, "dense"), fd_grad(hyper, data))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 16))
def test_nll_grad_property(seed, T, N):
    r = np.random.default_rng(seed)
    data, hyper = random_problem(r, N=N, T=T, missing=0.1)
    assert_grad_close(nll_grad(hyper, data), fd_grad(hyper, data))


def test_signal_variance_sign_on_white_noise(rng):
    """On pure noise, inflating the signal variance past the data variance raises the NLL."""
    t = np.arange(40) + 0.5
    data = TrainingSet(t, 0.1 * rng.standard_normal(40))
    hyper = Hyperparameters(KernelSpec("rbf", 0.05, 0.5), TaskCovariance.identity(1),
                            [0.005], [0.0])
    g = nll_grad(hyper, data)
    assert g[1] > 0
    assert np.sign(fd_grad(hyper, data)[1]) == np.sign(g[1])


# ----------------------------------------------------------------- prediction

@pytest.mark.parametrize("mode", ["shared", "per_task"])
def test_predict_matches_conditioning_oracle(rng, mode):
    for T in (1, 2, 4):
        data, hyper = random_problem(rng, N=6, T=T, mode=mode, missing=0.2)
        model = MultiTaskGP(hyper, data, "dense")
        q = rng.uniform(0, 168, 5)
        pred = model.predict(q)
        mean, var = oracle_predict(hyper, data, q)
        np.testing.assert_allclose(pred.mean, mean, atol=1e-8)
        np.testing.assert_allclose(pred.variance, np.maximum(var, 0), atol=1e-8)


def test_single_task_matches_scalar_formula(rng):
    data, hyper = random_problem(rng, N=12, T=1)
    q = rng.uniform(0, 168, 9)
    pred = MultiTaskGP(hyper, data).predict(q)
    # a 1x1 task covariance scales the kernel
    k = hyper.kernel.with_(signal_variance=hyper.kernel.signal_variance * hyper.task.matrix[0, 0])
    mu, var = scalar_posterior(k, data.inputs, data.targets[:, 0], hyper.noise[0], q,
                               hyper.mean[0])
    np.testing.assert_allclose(pred.mean[:, 0], mu, atol=1e-10)
    np.testing.assert_allclose(pred.variance[:, 0], var, atol=1e-10)


def test_noise_free_interpolation(rng):
    t = np.arange(0, 168, 6.0) + 0.5
    data = TrainingSet(t, np.column_stack([np.sin(t / 10), np.cos(t / 10)]))
    hyper = Hyperparameters(KernelSpec("rbf", 4.0, 1.0), TaskCovariance.identity(2),
                            [NOISE_FLOOR] * 2, data.task_means())
    mu = MultiTaskGP(hyper, data).posterior_mean(t)
    np.testing.assert_allclose(mu, data.targets, atol=1e-4)


def test_prior_reversion_far_from_data():
    t = np.array([10.0, 20.0, 30.0])
    data = TrainingSet(t, np.array([[0.9, 0.1], [0.8, 0.2], [0.7, 0.3]]))
    hyper = Hyperparameters(KernelSpec("rbf", 0.01, 0.6), TaskCovariance(np.array([[1.0, 0], [0.5, 1.0]])),
                            [0.01, 0.01], [0.4, 0.6])
    pred = MultiTaskGP(hyper, data).predict([100.0])
    np.testing.assert_allclose(pred.mean[0], [0.4, 0.6], atol=1e-12)
    np.testing.assert_allclose(pred.variance[0], 0.6 * np.diag(hyper.task.matrix), atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_variance_bounded_by_prior_plus_noise(seed):
    r = np.random.default_rng(seed)
    data, hyper = random_problem(r, N=7, T=3, missing=0.2)
    pred = MultiTaskGP(hyper, data).predict(r.uniform(0, 168, 6), include_noise=True)
    bound = hyper.kernel.signal_variance * np.diag(hyper.task.matrix) + hyper.task_noise()
    assert np.all(pred.variance <= bound + 1e-9)


@given(st.integers(0, 2**32 - 1))
def test_extra_observation_never_increases_variance(seed):
    r = np.random.default_rng(seed)
    data, hyper = random_problem(r, N=8, T=2, missing=0.4)
    hidden = np.argwhere(~data.mask)
    if hidden.size == 0:
        return
    i, k = hidden[0]
    mask = data.mask.copy()
    mask[i, k] = True
    y = np.where(np.isnan(data.targets), 0.5, data.targets)
    more = TrainingSet(data.inputs, y, mask)
    q = r.uniform(0, 168, 5)
    v0 = MultiTaskGP(hyper, data).predict(q).variance
    v1 = MultiTaskGP(hyper, more).predict(q).variance
    assert np.all(v1 <= v0 + 1e-10)


# ----------------------------------------------------------------- structured path

@pytest.mark.parametrize("mode", ["shared", "per_task", "complementary"])
def test_structured_matches_dense_on_complete_grid(rng, mode):
    data, hyper = complete_grid(rng, bph=1, mode=mode)
    dense, fast = Evaluation(hyper, data, "dense"), Evaluation(hyper, data, "structured")
    assert fast.solver == "structured" and fast.is_circulant
    assert fast.nll() == pytest.approx(dense.nll(), abs=1e-6)
    np.testing.assert_allclose(fast.nll_grad(), dense.nll_grad(), rtol=1e-6, atol=1e-6)
    q = rng.uniform(0, 168, 11)
    a = MultiTaskGP(hyper, data, "dense").predict(q)
    b = MultiTaskGP(hyper, data, "structured").predict(q)
    np.testing.assert_allclose(b.mean, a.mean, atol=1e-6)
    np.testing.assert_allclose(b.variance, a.variance, atol=1e-6)


def test_structured_unwrapped_kernel_uses_eigendecomposition(rng):
    data, hyper = complete_grid(rng, bph=1, T=2, period=None)
    fast = Evaluation(hyper, data, "structured")
    assert fast.solver == "structured" and not fast.is_circulant
    assert fast.nll() == pytest.approx(Evaluation(hyper, data, "dense").nll(), abs=1e-6)


def test_solver_resolution(rng, caplog):
    data, hyper = complete_grid(rng, bph=1, T=4)
    assert resolve_solver("auto", data, hyper.kernel) == "structured"   # 672 > 512
    small = data.select_tasks([0])
    assert resolve_solver("auto", small, hyper.kernel) == "dense"
    mask = data.mask.copy()
    mask[3, 1] = False
    holey = TrainingSet(data.inputs, data.targets, mask)
    with caplog.at_level(logging.WARNING):
        assert resolve_solver("structured", holey, hyper.kernel) == "dense"
    assert "dense" in caplog.text
    with pytest.raises(ValueError):
        resolve_solver("magic", data, hyper.kernel)


# ----------------------------------------------------------------- parameters

def test_parameter_vector_round_trip(rng):
    _, hyper = random_problem(rng, T=4, mode="complementary")
    again = hyper.from_vector(hyper.to_vector())
    np.testing.assert_allclose(again.task.matrix, hyper.task.matrix)
    np.testing.assert_allclose(again.noise, hyper.noise)
    assert len(hyper.parameter_names()) == hyper.n_params == hyper.bounds().shape[0]


def test_noise_floor_enforced():
    with pytest.raises(ValueError):
        Hyperparameters(KernelSpec(), TaskCovariance.identity(1), [1e-10], [0.0])
    with pytest.raises(ValueError):
        TaskCovariance(np.array([[0.0]]))


def test_training_set_sorts_and_masks():
    d = TrainingSet([3.0, 1.0, 2.0], [[0.3], [np.nan], [0.2]])
    np.testing.assert_array_equal(d.inputs, [1, 2, 3])
    np.testing.assert_array_equal(d.mask[:, 0], [False, True, True])
    assert d.n_observed == 2


# ----------------------------------------------------------------- fitting

def test_fit_constant_targets():
    t = np.arange(168) + 0.5
    data = TrainingSet(t, np.full((168, 1), 0.5))
    model = fit(data, FitConfig(n_iter=50, fix_noise=1e-6))
    np.testing.assert_allclose(model.posterior_mean(np.linspace(0, 167, 50)), 0.5, atol=1e-3)


def test_fit_decreases_nll_and_is_deterministic(weekly_data):
    d = weekly_data.select_tasks([1, 3])
    cfg = FitConfig(n_iter=60)
    a, b = fit(d, cfg), fit(d, cfg)
    assert a.loss_trace[-1] <= a.loss_trace[0]
    assert a.nll() <= a.loss_trace[0]
    assert a.loss_trace == b.loss_trace
    np.testing.assert_array_equal(a.hyper.to_vector(), b.hyper.to_vector())


def test_lengthscale_recovered_from_prior_sample():
    r = np.random.default_rng(4)
    t = np.arange(168) + 0.5
    truth = KernelSpec("rbf", 8.0, 1.0)
    K = gram(truth, t) + 0.01 * np.eye(168)
    y = np.linalg.cholesky(K) @ r.standard_normal(168)
    model = fit(TrainingSet(t, y), FitConfig(n_iter=400, lengthscale_init=20.0))
    assert 4.0 <= model.hyper.kernel.lengthscale <= 16.0


def test_gradient_vanishes_at_optimum():
    r = np.random.default_rng(5)
    t = np.arange(0, 168, 4.0) + 0.5
    y = np.sin(t / 8) + 0.1 * r.standard_normal(t.size)
    data = TrainingSet(t, y)
    model = fit(data, FitConfig(optimizer="lbfgs", n_iter=500))
    g = nll_grad(model.hyper, data)
    assert np.linalg.norm(g) < 1e-4


def test_fit_requires_two_points_per_task():
    data = TrainingSet([1.0, 2.0, 3.0], [[0.1, np.nan], [0.2, np.nan], [0.3, 0.4]])
    with pytest.raises(DegenerateData):
        fit(data, FitConfig(n_iter=5))


def test_nan_objective_raises_optimization_failed():
    from mobgp.gp.model import optimize
    h = Hyperparameters(KernelSpec(), TaskCovariance.identity(1), [0.1], [0.0])
    with pytest.raises(OptimizationFailed) as info:
        optimize(lambda hyper: (np.nan, np.zeros(hyper.n_params)), h, FitConfig(n_iter=5))
    assert info.value.trace == []


def test_independent_tasks_keeps_diagonal(weekly_data):
    d = weekly_data.select_tasks([1, 3])
    model = fit(d, FitConfig(n_iter=30, independent_tasks=True))
    assert model.hyper.task.cholesky_factor[1, 0] == 0.0


# ----------------------------------------------------------------- serialisation

def test_model_json_round_trip(rng):
    data, hyper = random_problem(rng, N=10, T=4, missing=0.2, mode="complementary")
    model = MultiTaskGP(hyper, data, bins_per_hour=2)
    again = MultiTaskGP.from_json(model.to_json())
    q = rng.uniform(0, 168, 7)
    # parameters are stored on the optimiser's log scale
    np.testing.assert_allclose(again.predict(q).mean, model.predict(q).mean, rtol=0, atol=1e-12)
    assert again.bins_per_hour == 2


def test_model_json_rejects_tampering(rng):
    data, hyper = random_problem(rng, N=5, T=2)
    d = MultiTaskGP(hyper, data).to_dict()
    d["training"]["targets"][0][0] = 0.123456
    with pytest.raises(ModelMismatch):
        MultiTaskGP.from_dict(d)
    d = MultiTaskGP(hyper, data).to_dict()
    d["version"] = 99
    with pytest.raises(ModelMismatch):
        MultiTaskGP.from_dict(d)


# ----------------------------------------------------------------- optimiser

def test_adam_minimises_quadratic():
    target = np.array([1.0, -2.0, 0.5])
    x, f, trace = Adam(0.1).run(lambda x: (np.sum((x - target) ** 2), 2 * (x - target)),
                                np.zeros(3), 400)
    np.testing.assert_allclose(x, target, atol=1e-3)
    assert len(trace) == 401 and f == trace[-1]


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 1e6))
def test_adam_trace_never_increases(seed, stiffness):
    """Even on a stiff, badly scaled objective the recorded values only go down."""
    r = np.random.default_rng(seed)
    scales = np.array([1.0, stiffness])
    fun = lambda x: (float(np.sum(scales * np.sin(x) ** 2)), scales * np.sin(2 * x))
    x0 = r.uniform(-1, 1, 2)
    x, f, trace = Adam(0.05).run(fun, x0, 60)
    assert len(trace) == 61
    assert np.all(np.diff(trace) <= 0)
    assert f == trace[-1] == fun(x)[0]


def test_adam_stops_at_stationary_point():
    # the reported gradient points uphill, so every step is rejected
    x, f, trace = Adam(0.05, patience=3, max_backtracks=2).run(
        lambda x: (1.0 + abs(x[0]), np.array([-1.0])), np.zeros(1), 50)
    assert len(trace) == 51 and set(trace) == {1.0}
    np.testing.assert_array_equal(x, [0.0])


def test_adam_bounds_and_frozen_coordinates():
    fun = lambda x: (np.sum((x - 5) ** 2), 2 * (x - 5))
    x, _, _ = Adam(0.5).run(fun, np.zeros(2), 200, bounds=np.array([[-1, 2], [-1, 10]]),
                            free=np.array([True, False]))
    assert x[0] == pytest.approx(2.0) and x[1] == 0.0
