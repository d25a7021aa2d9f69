"""Exact Gaussian process regression with constant mean and RBF kernel.

One of these models is fitted per retained POD mode, mapping a (normalized)
dwell time to that mode's coefficient. Hyperparameters maximize the log
marginal likelihood with multi-start gradient ascent in log-parameter space;
the Cholesky factor and dual weights are cached for O(n) posterior evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConfigurationError, ConditioningError, ShapeError

__all__ = [
    "RbfKernel",
    "GprModel",
    "GprPrediction",
    "rbf_kernel",
    "make_gpr",
    "fit_gpr",
    "predict_gpr",
    "log_marginal_likelihood",
]

#: Default jitter, as a fraction of the target variance.
DEFAULT_JITTER_RATIO = 1e-8

#: Jitter escalation cap, as a fraction of the kernel signal variance.
MAX_JITTER_RATIO = 1e-6

#: Hyperparameter start box, relative to input range and target variance.
LENGTH_SCALE_BOX = (0.05, 2.0)
SIGNAL_VARIANCE_BOX = (0.1, 10.0)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class RbfKernel:
    """Squared-exponential covariance with signal variance and length scale."""

    signal_variance: float
    length_scale: float

    def __post_init__(self):
        for name in ("signal_variance", "length_scale"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ConfigurationError(
                    f"{name} must be finite and > 0, got {value}"
                )


def rbf_kernel(kernel: RbfKernel, mu, mu_prime):
    """Evaluate ``sv * exp(-|mu - mu'|^2 / (2 l^2))`` (symmetric, vectorized)."""
    diff = np.asarray(mu, dtype=np.float64) - np.asarray(mu_prime, dtype=np.float64)
    return kernel.signal_variance * np.exp(
        -(diff**2) / (2.0 * kernel.length_scale**2)
    )


@dataclass(frozen=True)
class GprPrediction:
    mean: float
    variance: float


@dataclass(frozen=True)
class GprModel:
    """A fitted GP: training data, hyperparameters, and cached solves."""

    train_inputs: np.ndarray
    train_targets: np.ndarray
    mean_constant: float
    kernel: RbfKernel
    noise_jitter: float
    chol_factor: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.train_inputs).shape[0]
        if n < 1:
            raise ConfigurationError("a GP needs at least one training point")
        if np.asarray(self.train_targets).shape != (n,):
            raise ShapeError("train_inputs and train_targets lengths differ")
        if self.chol_factor.shape != (n, n) or self.alpha.shape != (n,):
            raise ShapeError("cached factor/alpha inconsistent with n")
        if self.noise_jitter < 0.0:
            raise ConfigurationError("noise_jitter must be >= 0")
        for name in ("train_inputs", "train_targets", "chol_factor", "alpha"):
            arr = np.ascontiguousarray(
                np.asarray(getattr(self, name), dtype=np.float64)
            )
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None] - b[None, :]) ** 2


def _gram(kernel: RbfKernel, inputs: np.ndarray) -> np.ndarray:
    return kernel.signal_variance * np.exp(
        -_sq_dists(inputs, inputs) / (2.0 * kernel.length_scale**2)
    )


def make_gpr(inputs, targets, kernel: RbfKernel, jitter: float) -> GprModel:
    """Build a GP at fixed hyperparameters, caching Cholesky and dual weights.

    On Cholesky failure the jitter escalates tenfold up to
    ``MAX_JITTER_RATIO * signal_variance``; starting from zero jitter there is
    nothing to escalate and the singular matrix is reported directly.
    """
    inputs = np.asarray(inputs, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if inputs.shape != targets.shape:
        raise ShapeError("inputs and targets must have equal length")
    n = inputs.shape[0]
    if n < 1:
        raise ConfigurationError("need at least one training point")

    mean_constant = float(targets.mean())
    resid = targets - mean_constant
    gram = _gram(kernel, inputs)
    eye = np.eye(n)
    cap = MAX_JITTER_RATIO * kernel.signal_variance
    jit = float(jitter)
    while True:
        try:
            chol = scipy.linalg.cholesky(gram + jit * eye, lower=True)
            break
        except scipy.linalg.LinAlgError:
            if jit <= 0.0:
                raise ConditioningError(
                    "kernel matrix is singular and jitter is 0 "
                    "(duplicate or near-duplicate inputs?)"
                ) from None
            if jit * 10.0 > cap:
                raise ConditioningError(
                    f"Cholesky failed even at jitter {jit:.3e} "
                    f"(cap {cap:.3e})"
                ) from None
            jit *= 10.0
    alpha = scipy.linalg.cho_solve((chol, True), resid)
    return GprModel(
        train_inputs=inputs,
        train_targets=targets,
        mean_constant=mean_constant,
        kernel=kernel,
        noise_jitter=jit,
        chol_factor=chol,
        alpha=alpha,
    )


def _neg_lml(log_params, inputs, resid, sqd, jitter):
    """Negative log marginal likelihood and gradient in log-parameter space."""
    sv, ls = np.exp(log_params)
    n = inputs.shape[0]
    krbf = sv * np.exp(-sqd / (2.0 * ls * ls))
    k = krbf + jitter * np.eye(n)
    try:
        chol = scipy.linalg.cholesky(k, lower=True)
    except scipy.linalg.LinAlgError:
        # steer the line search away from non-positive-definite corners
        return 1e30, np.zeros(2)
    alpha = scipy.linalg.cho_solve((chol, True), resid)
    lml = (
        -0.5 * resid @ alpha
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * n * _LOG_2PI
    )
    k_inv = scipy.linalg.cho_solve((chol, True), np.eye(n))
    outer = np.outer(alpha, alpha) - k_inv
    grad_sv = 0.5 * np.sum(outer * krbf)
    grad_ls = 0.5 * np.sum(outer * (krbf * (sqd / (ls * ls))))
    return -lml, -np.array([grad_sv, grad_ls])


def fit_gpr(inputs, targets, *, jitter: float | None = None, restarts: int = 8,
            seed: int = 0, kernel: RbfKernel | None = None) -> GprModel:
    """Fit a constant-mean RBF GP by maximizing the log marginal likelihood.

    Parameters
    ----------
    inputs, targets : (n,) arrays
        Training pairs; inputs must be distinct.
    jitter : float, optional
        Diagonal conditioning term. Defaults to ``1e-8 * var(targets)``.
    restarts : int
        Number of optimizer starts, sampled log-uniformly over the start box
        (length scale 0.05..2 x input range, signal variance 0.1..10 x target
        variance).
    seed : int
        Seed for the start sampler; fits are deterministic given a seed.
    kernel : RbfKernel, optional
        Skip the search and use these hyperparameters as-is.
    """
    inputs = np.asarray(inputs, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if inputs.shape != targets.shape:
        raise ShapeError("inputs and targets must have equal length")
    n = inputs.shape[0]
    if n < 1:
        raise ConfigurationError("need at least one training point")
    if np.unique(inputs).size != n:
        raise ConfigurationError("training inputs must be distinct")

    target_var = float(np.var(targets))
    if jitter is None:
        jitter = DEFAULT_JITTER_RATIO * target_var
    if kernel is not None:
        return make_gpr(inputs, targets, kernel, jitter)

    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")
    input_range = float(inputs.max() - inputs.min()) or 1.0
    sv_scale = target_var or 1.0
    ls_box = np.log([LENGTH_SCALE_BOX[0] * input_range,
                     LENGTH_SCALE_BOX[1] * input_range])
    sv_box = np.log([SIGNAL_VARIANCE_BOX[0] * sv_scale,
                     SIGNAL_VARIANCE_BOX[1] * sv_scale])
    # generous bounds around the start box keep exp() finite while leaving
    # the optimum interior for any reasonable dataset
    bounds = [(sv_box[0] - 14.0, sv_box[1] + 14.0),
              (ls_box[0] - 14.0, ls_box[1] + 14.0)]

    resid = targets - targets.mean()
    sqd = _sq_dists(inputs, inputs)
    rng = np.random.default_rng(seed)
    starts = np.column_stack([
        rng.uniform(sv_box[0], sv_box[1], restarts),
        rng.uniform(ls_box[0], ls_box[1], restarts),
    ])

    best = None
    for x0 in starts:
        result = scipy.optimize.minimize(
            _neg_lml, x0, args=(inputs, resid, sqd, jitter),
            jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-9},
        )
        if best is None or result.fun < best.fun:
            best = result
    sv, ls = np.exp(best.x)
    return make_gpr(inputs, targets, RbfKernel(sv, ls), jitter)


def predict_gpr(model: GprModel, mu_star: float) -> GprPrediction:
    """Posterior mean and variance at one query point.

    The variance is ``k(mu*, mu*) + jitter - |L^-1 k*|^2``, clamped at zero
    (the clamp only absorbs rounding noise of order 1e-10 x signal variance).
    """
    k_star = rbf_kernel(model.kernel, model.train_inputs, mu_star)
    mean = model.mean_constant + k_star @ model.alpha
    v = scipy.linalg.solve_triangular(model.chol_factor, k_star, lower=True)
    variance = (
        model.kernel.signal_variance + model.noise_jitter - float(v @ v)
    )
    return GprPrediction(mean=float(mean), variance=max(variance, 0.0))


def log_marginal_likelihood(model: GprModel) -> float:
    """Log marginal likelihood of the training data, from the cached factor."""
    resid = model.train_targets - model.mean_constant
    return float(
        -0.5 * resid @ model.alpha
        - np.sum(np.log(np.diag(model.chol_factor)))
        - 0.5 * model.n_train * _LOG_2PI
    )
