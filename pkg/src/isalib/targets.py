"""Unnormalized log-posterior targets with graceful-failure semantics.

A target returns either a finite log-density or a Failure value.  Failure is
a distinct object (not a -inf float) so callers can count model failures
separately; importance weighting maps Failure to log-weight -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .linalg import chol_logdet


@dataclass(frozen=True)
class Failure:
    """Marker for a failed model/likelihood evaluation (likelihood zero)."""

    reason: str = ""


FAILURE = Failure()


def is_failure(value) -> bool:
    return isinstance(value, Failure)


class TargetDensity:
    """Unnormalized log-posterior interface.

    Subclasses provide `dimension` and `log_density(theta) -> float | Failure`;
    optionally `gradient(theta)`, `neg_log_posterior(theta)` (F, with +inf
    outside support), `residuals(theta)` for least-squares structure, and
    `sample_prior(rng, n)` used by initializers.  Evaluation must be free of
    shared mutable state so calls can run concurrently.
    """

    dimension: int

    def log_density(self, theta):
        raise NotImplementedError

    def neg_log_posterior(self, theta) -> float:
        value = self.log_density(theta)
        return math.inf if is_failure(value) else -value


class Toy2DTarget(TargetDensity):
    """2-d toy posterior: uniform prior on [0, 11]^2 and
    F(theta) = 1e-2 * ||theta - (5,5)||^4 + 0.2 * sin(5 ||theta||)."""

    dimension = 2
    lower = 0.0
    upper = 11.0
    center = (5.0, 5.0)

    def in_support(self, theta) -> bool:
        x, y = float(theta[0]), float(theta[1])
        return (
            self.lower <= x <= self.upper and self.lower <= y <= self.upper
        )

    def f_value(self, theta) -> float:
        dx = float(theta[0]) - self.center[0]
        dy = float(theta[1]) - self.center[1]
        return 1e-2 * (dx * dx + dy * dy) ** 2 + 0.2 * math.sin(
            5.0 * math.hypot(float(theta[0]), float(theta[1]))
        )

    def log_density(self, theta):
        # support check first: cheaper and equivalent to checking afterwards
        if not self.in_support(theta):
            return Failure("outside prior cube")
        return -self.f_value(theta)

    def gradient(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=float)
        dev = t - np.asarray(self.center)
        grad = -0.04 * float(dev @ dev) * dev
        norm = math.hypot(t[0], t[1])
        if norm > 0.0:
            grad -= math.cos(5.0 * norm) * t / norm
        return grad

    def sample_prior(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, 2))


class GaussianTarget(TargetDensity):
    """Exact multivariate normal posterior (normalized), analytic gradient."""

    def __init__(self, mean, covariance):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DomainError("mean and covariance dimensions disagree")
        try:
            chol = np.linalg.cholesky(0.5 * (cov + cov.T))
        except np.linalg.LinAlgError as exc:
            raise DomainError("covariance must be SPD") from exc
        self.mean = mean
        self.covariance = 0.5 * (cov + cov.T)
        self._chol = chol
        self._precision = np.linalg.inv(self.covariance)
        self._log_norm = -0.5 * (
            mean.size * math.log(2.0 * math.pi) + chol_logdet(chol)
        )
        self.dimension = mean.size

    def log_density(self, theta):
        dev = np.asarray(theta, dtype=float) - self.mean
        return self._log_norm - 0.5 * float(dev @ self._precision @ dev)

    def gradient(self, theta) -> np.ndarray:
        dev = np.asarray(theta, dtype=float) - self.mean
        return -self._precision @ dev

    def sample_prior(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dimension))
        return self.mean + z @ self._chol.T


class RegressionTarget(TargetDensity):
    """Additive-noise regression posterior with diagonal Gaussian noise and
    prior: F = 0.5 sum ((z_k - M_k)/sigma_k)^2 + 0.5 sum ((theta_j - m_j)/s_j)^2.

    `model` maps a parameter vector to a length-n_z prediction or a Failure;
    model failures propagate (likelihood treated as zero).
    """

    def __init__(self, model, data_z, noise_sd, prior_mean, prior_sd):
        self.model = model
        self.data_z = np.asarray(data_z, dtype=float)
        self.noise_sd = np.asarray(noise_sd, dtype=float)
        self.prior_mean = np.asarray(prior_mean, dtype=float)
        self.prior_sd = np.asarray(prior_sd, dtype=float)
        if self.data_z.shape != self.noise_sd.shape:
            raise DomainError("data and noise_sd disagree in length")
        if self.prior_mean.shape != self.prior_sd.shape:
            raise DomainError("prior mean and sd disagree in length")
        if np.any(self.noise_sd <= 0) or np.any(self.prior_sd <= 0):
            raise DomainError("noise and prior standard deviations must be positive")
        self.dimension = self.prior_mean.size

    def residuals(self, theta):
        """Whitened residual vector r with F = 0.5 ||r||^2, or Failure."""
        theta = np.asarray(theta, dtype=float)
        pred = self.model(theta)
        if is_failure(pred):
            return pred
        pred = np.asarray(pred, dtype=float)
        if pred.shape != self.data_z.shape or not np.all(np.isfinite(pred)):
            return Failure("model output has wrong shape or non-finite entries")
        return np.concatenate(
            [
                (self.data_z - pred) / self.noise_sd,
                (theta - self.prior_mean) / self.prior_sd,
            ]
        )

    def log_density(self, theta):
        r = self.residuals(theta)
        if is_failure(r):
            return r
        return -0.5 * float(r @ r)

    def noise_precision(self) -> np.ndarray:
        return np.diag(1.0 / self.noise_sd**2)

    def prior_precision(self) -> np.ndarray:
        return np.diag(1.0 / self.prior_sd**2)

    def sample_prior(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dimension))
        return self.prior_mean + z * self.prior_sd


def builtin_regression_model(n_theta: int, n_z: int):
    """Smooth, mildly nonlinear stand-in forward model:
    M(theta)_k = sum_j [theta_j * sin(k*j/n_theta) + theta_j^2 / 10]."""

    k = np.arange(n_z)[:, None]
    j = np.arange(n_theta)[None, :]
    basis = np.sin(k * j / n_theta)

    def model(theta):
        theta = np.asarray(theta, dtype=float)
        return basis @ theta + np.sum(theta**2) / 10.0

    return model


def make_synthetic_regression(
    n_theta: int,
    n_z: int,
    noise_sd,
    prior_mean,
    prior_sd,
    theta_ref,
    data_seed: int,
    model=None,
) -> RegressionTarget:
    """Build a regression target with synthetic data z = M(theta_ref) + eps,
    eps drawn once from the stated noise with the recorded seed."""
    model = model or builtin_regression_model(n_theta, n_z)
    noise_sd = np.broadcast_to(np.asarray(noise_sd, dtype=float), (n_z,)).copy()
    rng = np.random.Generator(np.random.Philox(data_seed))
    pred = np.asarray(model(np.asarray(theta_ref, dtype=float)))
    data_z = pred + rng.standard_normal(n_z) * noise_sd
    return RegressionTarget(model, data_z, noise_sd, prior_mean, prior_sd)


def toy2d_log_density(theta):
    """Convenience wrapper around the 2-d toy target."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2,):
        raise DomainError("toy2d expects a length-2 parameter vector")
    return Toy2DTarget().log_density(theta)


def gaussian_target(mean, covariance) -> GaussianTarget:
    return GaussianTarget(mean, covariance)


def regression_log_density(target: RegressionTarget, theta):
    return target.log_density(theta)
