"""Negative log marginal likelihood of the multi-task GP and its gradient."""

from __future__ import annotations

import logging

import numpy as np

from ..exceptions import NotPositiveDefinite
from .kernels import gram
from .system import CirculantBasis, DenseSystem, KroneckerEigenSystem

log = logging.getLogger(__name__)

SOLVERS = ("auto", "dense", "structured")
# auto picks the dense path up to this many observed targets
DENSE_LIMIT = 512
LOG_2PI = np.log(2 * np.pi)

_basis_cache = {}


def _circulant_basis(n):
    if n not in _basis_cache:
        _basis_cache[n] = CirculantBasis(n)
    return _basis_cache[n]


def grid_kind(data, kernel):
    """``"circulant"``, ``"toeplitz"`` or ``None`` for the training inputs.

    Structured solves need a fully observed, regularly spaced grid; a
    wrapped kernel additionally needs the grid to tile one period.
    """
    t = data.inputs
    if not data.mask.all() or t.size < 2:
        return None
    d = np.diff(t)
    step = d.mean()
    if step <= 0 or np.max(np.abs(d - step)) > 1e-9 * step:
        return None
    if kernel.period is None:
        return "toeplitz"
    if abs(step * t.size - kernel.period) <= 1e-9 * kernel.period:
        return "circulant"
    return None


def resolve_solver(solver, data, kernel):
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    kind = grid_kind(data, kernel)
    if solver == "dense":
        return "dense"
    if solver == "auto":
        return "structured" if kind and data.n_observed > DENSE_LIMIT else "dense"
    if kind is None:
        log.warning("structured solver needs a complete regular grid; using dense")
        return "dense"
    return "structured"


class Evaluation:
    """Everything needed for the NLL, its gradient and posterior means.

    Built once per hyperparameter setting; ``alpha`` is
    ``Sigma^-1 (y - mu)`` in ``(T, N)`` layout with zeros at masked entries.
    """

    def __init__(self, hyper, data, solver="auto"):
        if hyper.n_tasks != data.n_tasks:
            raise ValueError("hyperparameters and data disagree on the number of tasks")
        if data.n_observed == 0:
            raise ValueError("training set has no observed targets")
        self.hyper, self.data = hyper, data
        self.solver = resolve_solver(solver, data, hyper.kernel)
        self.K, self.dK = gram(hyper.kernel, data.inputs, with_grad=True)
        self.Kf = hyper.task.matrix
        self.D = hyper.noise_matrix()
        mask = data.mask
        try:
            if self.solver == "structured":
                kind = grid_kind(data, hyper.kernel)
                if kind == "circulant":
                    basis = _circulant_basis(data.n_inputs)
                    k_vals = basis.eigenvalues(self.K[:, 0])
                    self.system = KroneckerEigenSystem(self.Kf, self.D, k_vals, basis.vectors,
                                                       circulant=basis)
                else:
                    k_vals, k_vecs = np.linalg.eigh(self.K)
                    self.system = KroneckerEigenSystem(self.Kf, self.D, k_vals, k_vecs)
            else:
                self.system = DenseSystem(self.Kf, self.K, self.D, mask)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        self.resid = np.where(mask, data.targets - hyper.mean[None, :], 0.0).T
        self.alpha = self.system.solve(self.resid)
        self.n_obs = data.n_observed

    @property
    def is_circulant(self):
        return isinstance(self.system, KroneckerEigenSystem) and self.system.circulant is not None

    def nll(self):
        quad = float(np.sum(self.resid * self.alpha))
        return 0.5 * (quad + self.system.logdet + self.n_obs * LOG_2PI)

    def _kernel_trace(self, Kmat):
        col = Kmat[:, 0] if self.is_circulant else None
        return self.system.trace_matrix(Kmat, first_column=col)

    def nll_contractions(self):
        """``(CKf, {"lengthscale": C, "signal": C}, CD)`` for the NLL gradient."""
        A = self.alpha
        AK = A @ self.K
        aka = AK @ A.T
        tk = self._kernel_trace(self.K)
        ckf = 0.5 * (tk - aka)
        ck = {"lengthscale": 0.5 * (self._kernel_trace(self.dK) - A @ self.dK @ A.T),
              "signal": ckf.copy()}
        cd = 0.5 * (self.system.trace_matrix(None) - A @ A.T)
        return ckf, ck, cd

    def contract(self, ckf, ck, cd):
        """Combine contraction matrices into a gradient over the parameter vector."""
        grad = np.zeros(self.hyper.n_params)
        for p, (dkf, kpart, dd) in enumerate(self.hyper.derivatives()):
            g = 0.0
            if dkf is not None:
                g += np.sum(dkf * ckf)
            if kpart is not None:
                g += np.sum(self.Kf * ck[kpart])
            if dd is not None:
                g += np.sum(dd * cd)
            grad[p] = g
        return grad

    def nll_grad(self):
        return self.contract(*self.nll_contractions())

    def posterior_mean(self, queries):
        Kc = gram(self.hyper.kernel, queries, self.data.inputs)
        return (self.hyper.mean[:, None] + self.Kf @ self.alpha @ Kc.T).T


def nll(hyper, data, solver="auto"):
    """Negative log marginal likelihood over the unmasked targets."""
    return Evaluation(hyper, data, solver).nll()


def nll_grad(hyper, data, solver="auto"):
    """Gradient of :func:`nll` over ``hyper.to_vector()`` coordinates."""
    return Evaluation(hyper, data, solver).nll_grad()


def nll_and_grad(hyper, data, solver="auto"):
    ev = Evaluation(hyper, data, solver)
    return ev.nll(), ev.nll_grad()
