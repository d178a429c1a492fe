"""Gaussian-process surrogate: Matern-5/2 ARD kernel, LML fitting, posterior sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from reasonbo._kernels import matern52_cross
from reasonbo.core import DimensionMismatch

LENGTHSCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-4, 1e3)
NOISE_BOUNDS = (1e-8, 10.0)
JITTER_START = 1e-10
JITTER_MAX = 1e-4
STD_FLOOR = 1e-8

LOG_2PI = math.log(2.0 * math.pi)


class ConditioningError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even after jitter escalation."""


@dataclass(frozen=True)
class KernelConfig:
    lengthscales: tuple[float, ...]
    signal_variance: float
    noise_variance: float
    jitter: float = JITTER_START

    def log_params(self) -> np.ndarray:
        """Optimization coordinates: log lengthscales, log signal var, log noise var."""
        return np.log(np.concatenate([
            np.asarray(self.lengthscales, dtype=float),
            [self.signal_variance, max(self.noise_variance, NOISE_BOUNDS[0])],
        ]))


@dataclass(frozen=True)
class PosteriorPrediction:
    mean: float
    std: float


@dataclass(frozen=True)
class GPModel:
    """Immutable fitted surrogate; factor and alpha are cached at build time."""

    inputs: np.ndarray
    targets_std: np.ndarray
    target_mean: float
    target_scale: float
    kernel: KernelConfig
    chol_lower: np.ndarray
    alpha: np.ndarray

    @property
    def n_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def _standardize(targets: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(targets))
    scale = float(np.std(targets))
    if scale < STD_FLOOR:
        scale = STD_FLOOR
    return (targets - mean) / scale, mean, scale


def _chol_with_escalation(kernel_matrix: np.ndarray, base_jitter: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky of K + jitter*I, escalating jitter tenfold up to the cap."""
    jitter = base_jitter
    n = kernel_matrix.shape[0]
    while True:
        try:
            L = cholesky(kernel_matrix + jitter * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                raise ConditioningError(
                    f"kernel matrix not positive definite at jitter {jitter:g}"
                ) from None
            jitter = min(jitter * 10.0, JITTER_MAX) if jitter > 0 else JITTER_START


def build_model(points: np.ndarray, targets: np.ndarray, config: KernelConfig) -> GPModel:
    """Assemble a model at fixed hyperparameters (no fitting)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} points vs {y.shape[0]} targets")
    if len(config.lengthscales) != X.shape[1]:
        raise DimensionMismatch(
            f"{len(config.lengthscales)} lengthscales for {X.shape[1]} input dims"
        )
    y_std, mean, scale = _standardize(y)
    K = matern52_cross(X, X, np.asarray(config.lengthscales), config.signal_variance)
    K[np.diag_indices_from(K)] += config.noise_variance
    L, jitter = _chol_with_escalation(K, config.jitter)
    alpha = cho_solve((L, True), y_std)
    return GPModel(
        inputs=X,
        targets_std=y_std,
        target_mean=mean,
        target_scale=scale,
        kernel=replace(config, jitter=jitter),
        chol_lower=L,
        alpha=alpha,
    )


def predict_batch(model: GPModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent std (original units) at each query row."""
    Xq = np.atleast_2d(np.asarray(points, dtype=float))
    if Xq.shape[1] != model.dim:
        raise DimensionMismatch(f"query width {Xq.shape[1]}, model width {model.dim}")
    ls = np.asarray(model.kernel.lengthscales)
    k_star = matern52_cross(model.inputs, Xq, ls, model.kernel.signal_variance)
    mean_std = k_star.T @ model.alpha
    v = solve_triangular(model.chol_lower, k_star, lower=True)
    var = model.kernel.signal_variance - np.sum(v * v, axis=0)
    var = np.clip(var, 0.0, None)
    mean = model.target_mean + model.target_scale * mean_std
    std = model.target_scale * np.sqrt(var)
    return mean, std


def predict(model: GPModel, point: np.ndarray) -> PosteriorPrediction:
    mean, std = predict_batch(model, np.atleast_2d(point))
    return PosteriorPrediction(mean=float(mean[0]), std=float(std[0]))


def predict_standardized(model: GPModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean/std in the model's internal standardized target units."""
    mean, std = predict_batch(model, points)
    return (mean - model.target_mean) / model.target_scale, std / model.target_scale


def joint_posterior(model: GPModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Standardized joint posterior mean vector and covariance at q query rows."""
    Xq = np.atleast_2d(np.asarray(points, dtype=float))
    if Xq.shape[1] != model.dim:
        raise DimensionMismatch(f"query width {Xq.shape[1]}, model width {model.dim}")
    ls = np.asarray(model.kernel.lengthscales)
    k_star = matern52_cross(model.inputs, Xq, ls, model.kernel.signal_variance)
    K_qq = matern52_cross(Xq, Xq, ls, model.kernel.signal_variance)
    mean = k_star.T @ model.alpha
    v = solve_triangular(model.chol_lower, k_star, lower=True)
    cov = K_qq - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def sample_posterior(
    model: GPModel, points: np.ndarray, n_samples: int, seed
) -> np.ndarray:
    """Joint posterior draws, shape (n_samples, q), in original target units.

    The covariance is factored through a symmetric eigendecomposition with
    negative eigenvalues clipped to zero, which keeps q-point draws exact even
    when query points coincide. Strongly negative eigenvalues signal a
    corrupted covariance and raise instead.
    """
    mean, cov = joint_posterior(model, points)
    eigvals, eigvecs = np.linalg.eigh(cov)
    scale_ref = max(float(eigvals[-1]), model.kernel.signal_variance * 1e-12)
    if float(eigvals[0]) < -1e-4 * scale_ref:
        raise ConditioningError(
            f"joint covariance has eigenvalue {eigvals[0]:g} (largest {eigvals[-1]:g})"
        )
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, mean.shape[0]))
    draws_std = mean[None, :] + z @ root.T
    return model.target_mean + model.target_scale * draws_std


# ---------------------------------------------------------------------------
# marginal likelihood

def _lml_terms(X: np.ndarray, y_std: np.ndarray, log_params: np.ndarray,
               base_jitter: float) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, float]:
    d = X.shape[1]
    ls = np.exp(log_params[:d])
    signal = float(np.exp(log_params[d]))
    noise = float(np.exp(log_params[d + 1]))
    K_signal = matern52_cross(X, X, ls, signal)
    K = K_signal.copy()
    K[np.diag_indices_from(K)] += noise
    L, _ = _chol_with_escalation(K, base_jitter)
    alpha = cho_solve((L, True), y_std)
    n = X.shape[0]
    lml = (-0.5 * float(y_std @ alpha)
           - float(np.sum(np.log(np.diag(L))))
           - 0.5 * n * LOG_2PI)
    return lml, L, alpha, K_signal, noise


def _lml_and_grad(X: np.ndarray, y_std: np.ndarray, log_params: np.ndarray,
                  base_jitter: float) -> tuple[float, np.ndarray]:
    d = X.shape[1]
    lml, L, alpha, K_signal, noise = _lml_terms(X, y_std, log_params, base_jitter)
    ls = np.exp(log_params[:d])
    signal = float(np.exp(log_params[d]))

    n = X.shape[0]
    K_inv = cho_solve((L, True), np.eye(n))
    # dLML/dtheta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
    inner = np.outer(alpha, alpha) - K_inv

    diff = X[:, None, :] - X[None, :, :]
    u = diff / ls[None, None, :]
    r = np.sqrt(np.clip(np.sum(u * u, axis=2), 0.0, None))
    sqrt5_r = math.sqrt(5.0) * r
    radial = signal * (5.0 / 3.0) * (1.0 + sqrt5_r) * np.exp(-sqrt5_r)

    grad = np.empty(d + 2)
    for k in range(d):
        dK = radial * (u[:, :, k] ** 2)
        grad[k] = 0.5 * float(np.sum(inner * dK))
    grad[d] = 0.5 * float(np.sum(inner * K_signal))
    grad[d + 1] = 0.5 * noise * float(np.trace(inner))
    return lml, grad


def log_marginal_likelihood(model: GPModel) -> float:
    lml, *_ = _lml_terms(
        model.inputs, model.targets_std, model.kernel.log_params(), model.kernel.jitter
    )
    return lml


def log_marginal_likelihood_gradient(model: GPModel) -> np.ndarray:
    """Gradient of the LML with respect to log hyperparameters.

    Order: log lengthscale per dim, then log signal variance, then log noise
    variance.
    """
    _, grad = _lml_and_grad(
        model.inputs, model.targets_std, model.kernel.log_params(), model.kernel.jitter
    )
    return grad


def fit(points: np.ndarray, targets: np.ndarray, restarts: int = 8, seed=0) -> GPModel:
    """Maximize LML by multi-start L-BFGS-B in log-hyperparameter space."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ValueError("fit needs at least 2 points")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    y_std, *_ = _standardize(y)
    d = X.shape[1]

    bounds_log = (
        [tuple(np.log(LENGTHSCALE_BOUNDS))] * d
        + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]
    )

    def objective(log_params: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            lml, grad = _lml_and_grad(X, y_std, log_params, JITTER_START)
        except ConditioningError:
            return 1e25, np.zeros(d + 2)
        if not np.isfinite(lml):
            return 1e25, np.zeros(d + 2)
        return -lml, -grad

    starts = [np.log(np.concatenate([np.full(d, 0.5), [1.0, 1e-4]]))]
    rng = np.random.default_rng(seed)
    for _ in range(max(restarts - 1, 0)):
        ls0 = np.exp(rng.uniform(np.log(5e-2), np.log(2.0), size=d))
        sig0 = float(np.exp(rng.uniform(np.log(0.2), np.log(5.0))))
        noi0 = float(np.exp(rng.uniform(np.log(1e-6), np.log(1e-1))))
        starts.append(np.log(np.concatenate([ls0, [sig0, noi0]])))

    best_val = np.inf
    best_params = starts[0]
    for s in starts:
        res = minimize(objective, s, jac=True, method="L-BFGS-B", bounds=bounds_log)
        val = res.fun if np.isfinite(res.fun) else objective(res.x)[0]
        # L-BFGS-B may report a line-search endpoint; guard against regressions
        start_val = objective(s)[0]
        if start_val < val:
            val, res_x = start_val, s
        else:
            res_x = res.x
        if val < best_val:
            best_val = val
            best_params = res_x

    exp_params = np.exp(best_params)
    config = KernelConfig(
        lengthscales=tuple(float(v) for v in exp_params[:d]),
        signal_variance=float(exp_params[d]),
        noise_variance=float(exp_params[d + 1]),
        jitter=JITTER_START,
    )
    return build_model(X, y, config)
