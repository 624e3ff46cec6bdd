"""Proposal families: Gaussian, multivariate t, and Gaussian mixture.

All log-densities carry full normalization constants, so values are
comparable across mixture components and across families.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp

from .ensemble import WeightedEnsemble, weighted_covariance, weighted_mean
from .errors import DomainError
from .linalg import chol_logdet, fsum, spd_repair

SYMMETRY_TOL = 1e-12


def _validated_spd(matrix) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("covariance must be a square matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > SYMMETRY_TOL * scale:
        raise DomainError("covariance must be symmetric")
    return spd_repair(a)


def _whiten(chol: np.ndarray, dev: np.ndarray) -> np.ndarray:
    """Solve L y = dev^T for each row of dev; returns shape (n, d)."""
    return solve_triangular(chol, dev.T, lower=True).T


@dataclass(frozen=True)
class GaussianProposal:
    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov, chol = _validated_spd(self.covariance)
        if mean.ndim != 1 or mean.size != cov.shape[0]:
            raise DomainError("mean and covariance dimensions disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dimension(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise DomainError("count must be >= 1")
        z = rng.standard_normal((count, self.dimension))
        return self.mean + z @ self.chol.T

    def log_density_batch(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        y = _whiten(self.chol, thetas - self.mean)
        maha = np.einsum("ij,ij->i", y, y)
        d = self.dimension
        return -0.5 * (maha + d * math.log(2.0 * math.pi) + chol_logdet(self.chol))

    def log_density(self, theta) -> float:
        return float(self.log_density_batch(np.asarray(theta)[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "family": "gaussian",
            "mean": self.mean.tolist(),
            "covariance": self.covariance.ravel().tolist(),
        }


@dataclass(frozen=True)
class StudentTProposal:
    location: np.ndarray
    scale_matrix: np.ndarray
    nu: float
    chol: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.nu <= 2.0:
            raise DomainError("nu must exceed 2 so the covariance exists")
        loc = np.asarray(self.location, dtype=float)
        scale, chol = _validated_spd(self.scale_matrix)
        if loc.ndim != 1 or loc.size != scale.shape[0]:
            raise DomainError("location and scale dimensions disagree")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale_matrix", scale)
        object.__setattr__(self, "chol", chol)

    @property
    def dimension(self) -> int:
        return self.location.size

    @property
    def covariance(self) -> np.ndarray:
        return self.nu / (self.nu - 2.0) * self.scale_matrix

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise DomainError("count must be >= 1")
        z = rng.standard_normal((count, self.dimension))
        g = rng.chisquare(self.nu, size=count)
        return self.location + (z @ self.chol.T) * np.sqrt(self.nu / g)[:, None]

    def log_density_batch(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        y = _whiten(self.chol, thetas - self.location)
        maha = np.einsum("ij,ij->i", y, y)
        d = self.dimension
        nu = self.nu
        const = (
            gammaln(0.5 * (nu + d))
            - gammaln(0.5 * nu)
            - 0.5 * d * math.log(nu * math.pi)
            - 0.5 * chol_logdet(self.chol)
        )
        return const - 0.5 * (nu + d) * np.log1p(maha / nu)

    def log_density(self, theta) -> float:
        return float(self.log_density_batch(np.asarray(theta)[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "family": "student_t",
            "nu": self.nu,
            "mean": self.location.tolist(),
            "covariance": self.scale_matrix.ravel().tolist(),
        }


@dataclass(frozen=True)
class GaussianMixtureProposal:
    components: tuple
    psi: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise DomainError("mixture needs at least one component")
        d = comps[0].dimension
        if any(c.dimension != d for c in comps):
            raise DomainError("mixture components disagree in dimension")
        psi = np.asarray(self.psi, dtype=float)
        if psi.size != len(comps) or np.any(psi < 0):
            raise DomainError("psi must be nonnegative, one entry per component")
        if abs(fsum(psi) - 1.0) > 1e-12:
            raise DomainError("psi must sum to one")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "psi", psi)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise DomainError("count must be >= 1")
        edges = np.cumsum(self.psi)
        idx = np.searchsorted(edges, rng.random(count), side="right")
        idx = np.minimum(idx, len(self.components) - 1)
        z = rng.standard_normal((count, self.dimension))
        out = np.empty((count, self.dimension))
        for j, comp in enumerate(self.components):
            mask = idx == j
            if mask.any():
                out[mask] = comp.mean + z[mask] @ comp.chol.T
        return out

    def log_density_batch(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        parts = np.stack(
            [c.log_density_batch(thetas) for c in self.components], axis=0
        )
        with np.errstate(divide="ignore"):
            log_psi = np.log(self.psi)
        return logsumexp(parts + log_psi[:, None], axis=0)

    def log_density(self, theta) -> float:
        return float(self.log_density_batch(np.asarray(theta)[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "family": "gaussian_mixture",
            "psi": self.psi.tolist(),
            "components": [c.to_dict() for c in self.components],
        }


def fit_gaussian(ensemble: WeightedEnsemble, inflation: float = 1.0) -> GaussianProposal:
    """Moment fit: weighted mean and inflated, SPD-repaired weighted covariance."""
    return GaussianProposal(
        weighted_mean(ensemble), weighted_covariance(ensemble, inflation)
    )


def fit_student_t(
    ensemble: WeightedEnsemble, nu: float, inflation: float = 1.0
) -> StudentTProposal:
    """Moment-matched t fit: scale = (nu-2)/nu * inflated covariance, so the
    proposal's covariance equals the inflated ensemble covariance."""
    if nu <= 2.0:
        raise DomainError("nu must exceed 2")
    cov = weighted_covariance(ensemble, inflation)
    return StudentTProposal(weighted_mean(ensemble), (nu - 2.0) / nu * cov, nu)


def gmm_weights(phi) -> np.ndarray:
    """psi_j = exp(-phi_j) / sum_i exp(-phi_i), computed with a logsumexp shift."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1 or phi.size == 0 or not np.all(np.isfinite(phi)):
        raise DomainError("phi must be a non-empty finite vector")
    shifted = -(phi - phi.min())
    w = np.exp(shifted)
    return w / fsum(w)


def proposal_from_dict(data: dict):
    family = data.get("family")
    d = len(data.get("mean", [])) if "mean" in data else None
    if family == "gaussian":
        cov = np.asarray(data["covariance"], dtype=float).reshape(d, d)
        return GaussianProposal(np.asarray(data["mean"], dtype=float), cov)
    if family == "student_t":
        cov = np.asarray(data["covariance"], dtype=float).reshape(d, d)
        return StudentTProposal(
            np.asarray(data["mean"], dtype=float), cov, float(data["nu"])
        )
    if family == "gaussian_mixture":
        comps = [proposal_from_dict(c) for c in data["components"]]
        return GaussianMixtureProposal(tuple(comps), np.asarray(data["psi"], dtype=float))
    raise DomainError(f"unknown proposal family: {family!r}")


def save_proposal(proposal, path) -> None:
    with open(path, "w") as fh:
        json.dump(proposal.to_dict(), fh, indent=2)
        fh.write("\n")


def load_proposal(path):
    with open(path) as fh:
        return proposal_from_dict(json.load(fh))
