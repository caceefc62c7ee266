"""Gaussian process regression with a Matern-5/2 kernel.

Zero-mean prior on standardized targets, exact Cholesky-based posterior, and
hyperparameter selection by maximizing the log marginal likelihood over a
small grid of length scales and noise levels. Inputs are expected in the
normalized unit square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

__all__ = [
    "Matern52Kernel",
    "GpModel",
    "matern52",
    "build_model",
    "fit",
    "posterior",
    "DEFAULT_LENGTH_SCALES",
    "DEFAULT_NOISE_LEVELS",
]

DEFAULT_LENGTH_SCALES = tuple(np.geomspace(0.05, 2.0, 12))
DEFAULT_NOISE_LEVELS = (1e-6, 1e-4, 1e-2, 1e-1)

_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class Matern52Kernel:
    """Isotropic Matern-5/2 covariance with length scale ``h`` and amplitude."""

    length_scale: float
    signal_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.length_scale <= 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Covariance matrix between rows of ``a`` (n, d) and ``b`` (m, d)."""
        diff = a[:, None, :] - b[None, :, :]
        d = np.sqrt(np.sum(diff * diff, axis=-1))
        u = _SQRT5 * d / self.length_scale
        return self.signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)


def matern52(x, x2, h: float, signal_variance: float = 1.0) -> float:
    """Matern-5/2 covariance between two points at distance ``d = |x - x2|``:
    ``sv * (1 + sqrt(5) d/h + 5 d^2 / (3 h^2)) * exp(-sqrt(5) d/h)``."""
    a = np.atleast_2d(np.asarray(x, dtype=float))
    b = np.atleast_2d(np.asarray(x2, dtype=float))
    return float(Matern52Kernel(h, signal_variance).matrix(a, b)[0, 0])


@dataclass
class GpModel:
    """Fitted regression model; treat as immutable after construction.

    Targets are standardized internally (mean/scale stored) so the zero-mean
    prior is appropriate; posterior queries are returned on the raw scale.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel: Matern52Kernel
    noise_variance: float
    target_mean: float
    target_scale: float
    log_marginal_likelihood: float
    _chol: np.ndarray
    _alpha: np.ndarray

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]


def build_model(
    X: np.ndarray, f: np.ndarray, kernel: Matern52Kernel, noise_variance: float
) -> GpModel:
    """Condition the prior on ``(X, f)`` with the given hyperparameters.

    Raises ``np.linalg.LinAlgError`` when the regularized kernel matrix is not
    positive definite (e.g. duplicated inputs with zero noise).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(f, dtype=float).ravel()
    n = X.shape[0]
    if f.shape[0] != n or n < 1:
        raise ValueError(f"need matching inputs and targets, got {X.shape} vs {f.shape}")
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")

    mean = float(f.mean())
    scale = float(f.std())
    if scale < 1e-12:
        scale = 1.0
    f_std = (f - mean) / scale

    k_mat = kernel.matrix(X, X)
    k_mat[np.diag_indices_from(k_mat)] += noise_variance
    chol = np.linalg.cholesky(k_mat)
    alpha = cho_solve((chol, True), f_std, check_finite=False)
    lml = float(
        -0.5 * f_std @ alpha
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    return GpModel(
        train_inputs=X,
        train_targets=f,
        kernel=kernel,
        noise_variance=noise_variance,
        target_mean=mean,
        target_scale=scale,
        log_marginal_likelihood=lml,
        _chol=chol,
        _alpha=alpha,
    )


def fit(
    X: np.ndarray,
    f: np.ndarray,
    length_scales=DEFAULT_LENGTH_SCALES,
    noise_levels=DEFAULT_NOISE_LEVELS,
) -> GpModel:
    """Fit hyperparameters by exact log-marginal-likelihood grid search.

    Candidates whose factorization fails are skipped; raises if none succeed.
    """
    best: GpModel | None = None
    for h in length_scales:
        for noise in noise_levels:
            try:
                model = build_model(X, f, Matern52Kernel(float(h)), float(noise))
            except np.linalg.LinAlgError:
                continue
            if best is None or model.log_marginal_likelihood > best.log_marginal_likelihood:
                best = model
    if best is None:
        raise np.linalg.LinAlgError(
            "no hyperparameter candidate produced a positive-definite kernel matrix"
        )
    return best


def posterior(model: GpModel, x) -> tuple:
    """Posterior mean and standard deviation at query point(s) ``x``.

    Accepts one point of shape (d,) or a stack of shape (m, d); returns
    floats for a single point and arrays otherwise. The predictive variance
    of the latent function is clamped at zero.
    """
    q = np.asarray(x, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    k_vec = model.kernel.matrix(model.train_inputs, q)  # (n, m)
    mean_std = k_vec.T @ model._alpha
    v = solve_triangular(model._chol, k_vec, lower=True, check_finite=False)
    var = model.kernel.signal_variance - np.sum(v * v, axis=0)
    var = np.maximum(var, 0.0)
    mean = model.target_mean + model.target_scale * mean_std
    std = model.target_scale * np.sqrt(var)
    if single:
        return float(mean[0]), float(std[0])
    return mean, std
