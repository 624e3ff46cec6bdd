"""Weighted-sample container, weight normalization, and the quality measure R.

The quality measure R = E(w^2)/E(w)^2 = var(w)/E(w)^2 + 1 is estimated for
self-normalized weights as R_hat = N * sum(w_i^2); the effective sample size
is N_eff = N / R.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllWeightsZero, DegenerateEnsemble, DomainError
from .linalg import fsum, spd_repair

WEIGHT_SUM_TOL = 1e-12


def self_normalize(log_weights_raw) -> np.ndarray:
    """Turn raw log-weights (possibly -inf) into weights summing to one.

    Invariant under adding any finite constant to all entries.  Raises
    AllWeightsZero if every entry is -inf.
    """
    lw = np.asarray(log_weights_raw, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise DomainError("log weights must be a non-empty 1-d array")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise DomainError("log weights must be finite or -inf")
    finite = np.isfinite(lw)
    if not finite.any():
        raise AllWeightsZero("all raw log-weights are -inf")
    shifted = lw - lw[finite].max()
    w = np.exp(shifted)
    total = fsum(w)
    w = w / total
    # one exact renormalization pass keeps the sum within 1e-12 of one
    w = w / fsum(w)
    return w


@dataclass(frozen=True)
class WeightedEnsemble:
    """Parameter samples with self-normalized importance weights.

    samples has shape (n, n_theta); weights sum to one; weights[i] == 0
    exactly when log_weights_raw[i] == -inf.
    """

    samples: np.ndarray
    log_weights_raw: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise DomainError("samples must have shape (n, n_theta) with n >= 1")
        if not np.all(np.isfinite(s)):
            raise DomainError("samples must be finite")
        if len(self.weights) != s.shape[0] or len(self.log_weights_raw) != s.shape[0]:
            raise DomainError("samples and weights disagree in length")
        if abs(fsum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError("weights must sum to one")
        object.__setattr__(self, "samples", s)
        object.__setattr__(
            self, "log_weights_raw", np.asarray(self.log_weights_raw, dtype=float)
        )
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self.samples.setflags(write=False)
        self.log_weights_raw.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def from_log_weights(cls, samples, log_weights_raw) -> "WeightedEnsemble":
        lw = np.asarray(log_weights_raw, dtype=float)
        return cls(np.asarray(samples, dtype=float), lw, self_normalize(lw))

    @classmethod
    def uniform(cls, samples) -> "WeightedEnsemble":
        s = np.asarray(samples, dtype=float)
        return cls.from_log_weights(s, np.zeros(s.shape[0]))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def n_theta(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class QualityReport:
    """Quality measure r >= 1 and the implied effective sample size n / r."""

    r: float
    n_eff: float
    n: int


def estimate_r(weights) -> QualityReport:
    """Estimate R for self-normalized weights: R_hat = N * sum(w_i^2)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("weights must be a non-empty 1-d array")
    if abs(fsum(w) - 1.0) > WEIGHT_SUM_TOL or np.any(w < 0):
        raise DomainError("weights must be nonnegative and self-normalized")
    n = w.size
    r = n * fsum(w * w)
    r = min(max(r, 1.0), float(n))
    return QualityReport(r=r, n_eff=n / r, n=n)


def weighted_mean(ensemble: WeightedEnsemble) -> np.ndarray:
    """mu_hat = sum_i w_i theta_i, accumulated in sample-index order."""
    w = ensemble.weights
    return np.array(
        [fsum(w * ensemble.samples[:, j]) for j in range(ensemble.n_theta)]
    )


def check_collapse(ensemble: WeightedEnsemble) -> QualityReport:
    """Collapse guard: reject ensembles with n_eff < n_theta + 1."""
    report = estimate_r(ensemble.weights)
    if report.n_eff < ensemble.n_theta + 1:
        raise DegenerateEnsemble(
            f"effective sample size {report.n_eff:.3g} below n_theta + 1 "
            f"= {ensemble.n_theta + 1}"
        )
    return report


def weighted_covariance(ensemble: WeightedEnsemble, inflation: float = 1.0) -> np.ndarray:
    """Inflated self-normalized sample covariance, SPD-repaired.

    Sigma_hat = inflation * sum_i w_i (theta_i - mu)(theta_i - mu)^T.
    Raises DegenerateEnsemble on collapse or irreparable rank deficiency.
    """
    if inflation < 1.0:
        raise DomainError("inflation must be >= 1")
    check_collapse(ensemble)
    mu = weighted_mean(ensemble)
    dev = ensemble.samples - mu
    w = ensemble.weights
    d = ensemble.n_theta
    cov = np.empty((d, d))
    for a in range(d):
        for b in range(a, d):
            cov[a, b] = cov[b, a] = fsum(w * dev[:, a] * dev[:, b])
    repaired, _ = spd_repair(inflation * cov)
    return repaired


def gaussian_mismatch_r(epsilon: float, n_theta: int) -> float:
    """Closed-form R for target N(0, I) and proposal N(0, (1+eps) I):
    R = ((1+eps) / sqrt(1+2 eps))^n_theta."""
    if n_theta < 1:
        raise DomainError("n_theta must be >= 1")
    if 1.0 + 2.0 * epsilon <= 0.0:
        raise DomainError("requires 1 + 2*epsilon > 0")
    return ((1.0 + epsilon) / math.sqrt(1.0 + 2.0 * epsilon)) ** n_theta


def write_ensemble_csv(ensemble: WeightedEnsemble, path) -> None:
    """CSV with header weight,theta_0,...,theta_{n-1}; 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["weight"] + [f"theta_{j}" for j in range(ensemble.n_theta)]
        )
        for i in range(ensemble.n):
            writer.writerow(
                [f"{ensemble.weights[i]:.17g}"]
                + [f"{x:.17g}" for x in ensemble.samples[i]]
            )


def read_ensemble_csv(path) -> WeightedEnsemble:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "weight":
            raise DomainError(f"not an ensemble CSV: {path}")
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise DomainError(f"empty ensemble CSV: {path}")
    data = np.asarray(rows)
    weights = data[:, 0]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return WeightedEnsemble(data[:, 1:], logw, weights / fsum(weights))
