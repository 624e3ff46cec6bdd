"""Initialization strategies: short stretch-move ensemble MCMC runs, and
Gaussian mixtures built from deduplicated multistart optimization modes."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .ensemble import WeightedEnsemble
from .errors import DomainError, EmptyInput, InitializationFailed
from .optimize import OptimizationResult, OptSettings, OptStatus, minimize
from .proposals import GaussianMixtureProposal, GaussianProposal, gmm_weights
from .targets import TargetDensity, is_failure

STRETCH_A_DEFAULT = 2.0
DEDUP_CONFIDENCE_DEFAULT = 0.95
FEASIBLE_DRAW_BUDGET = 10_000  # prior draws allowed per walker


def default_walker_count(n_theta: int) -> int:
    """2*n_theta + 2 walkers, but never fewer than 4."""
    return max(2 * n_theta + 2, 4)


@dataclass(frozen=True)
class McmcChain:
    """Stretch-move chain; samples are walker-major per step, i.e. sample
    index step * walkers + walker."""

    walkers: int
    steps: int
    samples: np.ndarray  # (steps * walkers, n_theta)
    log_densities: np.ndarray  # matching log target densities
    acceptance_rate: float

    @property
    def n_theta(self) -> int:
        return self.samples.shape[1]

    def by_walker(self) -> np.ndarray:
        """Reshape to (steps, walkers, n_theta)."""
        return self.samples.reshape(self.steps, self.walkers, self.n_theta)


def _draw_feasible_walkers(target, n_walkers, rng):
    positions = np.empty((n_walkers, target.dimension))
    logp = np.empty(n_walkers)
    for w in range(n_walkers):
        for _ in range(FEASIBLE_DRAW_BUDGET):
            candidate = target.sample_prior(rng, 1)[0]
            value = target.log_density(candidate)
            if not is_failure(value) and math.isfinite(value):
                positions[w] = candidate
                logp[w] = value
                break
        else:
            raise InitializationFailed(
                f"no feasible start for walker {w} in {FEASIBLE_DRAW_BUDGET} prior draws"
            )
    return positions, logp


def stretch_move_run(
    target: TargetDensity,
    n_walkers: int,
    n_steps: int,
    a: float = STRETCH_A_DEFAULT,
    rng: np.random.Generator | None = None,
) -> McmcChain:
    """Affine-invariant stretch-move ensemble sampler.

    Proposal Y = X_j + z (X_k - X_j) with z ~ g(z) propto 1/sqrt(z) on
    [1/a, a], accepted with probability min(1, z^(n-1) p(Y)/p(X_j)).
    Walkers update in two half-ensemble sweeps; proposals whose density is a
    Failure are rejected.
    """
    if n_walkers < 4:
        raise DomainError("need at least 4 walkers for the stretch move")
    if n_steps < 1 or a <= 1.0:
        raise DomainError("need n_steps >= 1 and stretch parameter a > 1")
    rng = rng or np.random.default_rng()
    dim = target.dimension
    positions, logp = _draw_feasible_walkers(target, n_walkers, rng)

    half = n_walkers // 2
    groups = (np.arange(half), np.arange(half, n_walkers))
    samples = np.empty((n_steps * n_walkers, dim))
    log_densities = np.empty(n_steps * n_walkers)
    accepts = 0
    for step in range(n_steps):
        for active, other in (groups, groups[::-1]):
            z = ((a - 1.0) * rng.random(active.size) + 1.0) ** 2 / a
            partners = other[rng.integers(0, other.size, size=active.size)]
            log_u = np.log(rng.random(active.size))
            for i, w in enumerate(active):
                proposal = positions[partners[i]] + z[i] * (
                    positions[w] - positions[partners[i]]
                )
                value = target.log_density(proposal)
                if is_failure(value):
                    continue
                log_accept = (dim - 1) * math.log(z[i]) + value - logp[w]
                if log_u[i] <= log_accept:
                    positions[w] = proposal
                    logp[w] = value
                    accepts += 1
        samples[step * n_walkers : (step + 1) * n_walkers] = positions
        log_densities[step * n_walkers : (step + 1) * n_walkers] = logp
    return McmcChain(
        walkers=n_walkers,
        steps=n_steps,
        samples=samples,
        log_densities=log_densities,
        acceptance_rate=accepts / (n_steps * n_walkers),
    )


def mcmc_init_ensemble(chain: McmcChain, n_keep: int) -> WeightedEnsemble:
    """The first n_keep chain samples with uniform weights (deliberately
    early, unconverged samples from a short run)."""
    if n_keep < 1 or n_keep > chain.samples.shape[0]:
        raise DomainError("n_keep must be in [1, chain length]")
    return WeightedEnsemble.uniform(chain.samples[:n_keep])


@dataclass(frozen=True)
class ModeSet:
    """Deduplicated local minima of F with approximate Hessians."""

    minimizers: np.ndarray  # (m, n_theta)
    f_mins: np.ndarray  # (m,)
    hessians: np.ndarray  # (m, n_theta, n_theta)

    def __len__(self) -> int:
        return self.minimizers.shape[0]


def _mode_distance(mu_i, hess_i, mu_j) -> float:
    # Mahalanobis distance of mu_j from mode i under covariance H_i^{-1}
    dev = mu_j - mu_i
    return float(dev @ hess_i @ dev)


def dedup_modes(
    candidates: list[OptimizationResult],
    confidence: float = DEDUP_CONFIDENCE_DEFAULT,
) -> ModeSet:
    """Greedy dedup of converged minima in ascending f_min order.

    Two minima are distinct when the symmetrized distance
    max(d_ij, d_ji), with d_ij = (mu_i - mu_j)^T H_i (mu_i - mu_j), exceeds
    the chi-square quantile at `confidence` with n_theta degrees of freedom.
    The lower-f_min representative of each cluster is kept.
    """
    converged = [c for c in candidates if c.status is OptStatus.CONVERGED]
    if not converged:
        raise EmptyInput("no converged candidates to deduplicate")
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must be in (0, 1)")
    # stable order: ascending f_min, ties by lexicographic minimizer
    converged.sort(key=lambda c: (c.f_min, tuple(c.minimizer)))
    dim = converged[0].minimizer.size
    threshold = float(chi2.ppf(confidence, df=dim))
    kept: list[OptimizationResult] = []
    for cand in converged:
        distinct = True
        for mode in kept:
            d_ij = _mode_distance(mode.minimizer, mode.hessian_approx, cand.minimizer)
            d_ji = _mode_distance(cand.minimizer, cand.hessian_approx, mode.minimizer)
            if max(d_ij, d_ji) <= threshold:
                distinct = False
                break
        if distinct:
            kept.append(cand)
    return ModeSet(
        minimizers=np.stack([m.minimizer for m in kept]),
        f_mins=np.array([m.f_min for m in kept]),
        hessians=np.stack([m.hessian_approx for m in kept]),
    )


def build_gmm(modes: ModeSet) -> GaussianMixtureProposal:
    """Mixture with one Gaussian per mode: mean at the minimizer, covariance
    the inverse approximate Hessian, weights exp(-f_min) renormalized."""
    if len(modes) == 0:
        raise EmptyInput("empty mode set")
    components = tuple(
        GaussianProposal(modes.minimizers[j], np.linalg.inv(modes.hessians[j]))
        for j in range(len(modes))
    )
    return GaussianMixtureProposal(components, gmm_weights(modes.f_mins))


def multistart(
    target: TargetDensity,
    n_starts: int,
    rng: np.random.Generator,
    settings: OptSettings | None = None,
    parallelism: int = 1,
) -> list[OptimizationResult]:
    """Run `minimize` from n_starts prior draws.  Failed results are kept
    (they are data for reporting) but carry FAILED status."""
    if n_starts < 1:
        raise DomainError("n_starts must be >= 1")
    starts = target.sample_prior(rng, n_starts)
    settings = settings or OptSettings()
    if parallelism <= 1:
        return [minimize(target, start, settings) for start in starts]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda s: minimize(target, s, settings), starts))
