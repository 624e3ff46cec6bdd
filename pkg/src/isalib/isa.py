"""Iterative importance sampling driver: sample, weigh, monitor R, refit.

Each iteration draws a fixed number of samples from the current proposal,
weighs them against the target, estimates the quality measure R, and refits
the proposal from the weighted ensemble until the relative change in R drops
below the tolerance.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .ensemble import (
    QualityReport,
    WeightedEnsemble,
    estimate_r,
    self_normalize,
)
from .errors import AllWeightsZero, DegenerateEnsemble, DomainError
from .parallel import parallel_map_density
from .proposals import fit_gaussian, fit_student_t
from .targets import is_failure

FAMILIES = ("gaussian", "student_t")
# convergence is only declared while the R estimator is not saturated:
# an estimate from N_e samples is capped near N_e, so large values are
# uncertain and must not trigger the stopping rule
SATURATION_FRACTION = 0.5


@dataclass(frozen=True)
class IsaConfig:
    samples_per_iteration: int
    max_iterations: int = 10
    tol: float = 0.05
    inflation: float = 1.0
    family: str = "gaussian"
    nu: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_iteration < 2:
            raise DomainError("samples_per_iteration must be >= 2")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if self.tol <= 0.0:
            # tol == 0 is allowed for forcing a full max_iterations run
            if self.tol < 0.0:
                raise DomainError("tol must be >= 0")
        if self.inflation < 1.0:
            raise DomainError("inflation must be >= 1")
        if self.family not in FAMILIES:
            raise DomainError(f"family must be one of {FAMILIES}")
        if self.family == "student_t" and self.nu <= 2.0:
            raise DomainError("student_t family needs nu > 2")

    def to_dict(self) -> dict:
        return {
            "samples_per_iteration": self.samples_per_iteration,
            "max_iterations": self.max_iterations,
            "tol": self.tol,
            "inflation": self.inflation,
            "family": self.family,
            "nu": self.nu,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class IterationRecord:
    k: int
    n_e: int
    r: float
    n_eff: float
    failure_count: int
    wall_time: float
    proposal: dict  # proposal snapshot (serialized form)


@dataclass(frozen=True)
class IterationTrace:
    records: tuple
    stopped_reason: str  # "converged" | "max_iterations" | "collapsed"
    final_proposal: object
    final_ensemble: WeightedEnsemble | None
    config: IsaConfig | None = None

    def r_values(self) -> list[float]:
        return [rec.r for rec in self.records]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict() if self.config else None,
            "records": [
                {
                    "k": rec.k,
                    "N_e": rec.n_e,
                    "r": rec.r,
                    "n_eff": rec.n_eff,
                    "failures": rec.failure_count,
                    "wall_time": rec.wall_time,
                    "proposal": rec.proposal,
                }
                for rec in self.records
            ],
            "stopped_reason": self.stopped_reason,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def isa_step(
    target, proposal, n_e: int, rng: np.random.Generator, workers: int = 1
) -> tuple[WeightedEnsemble, QualityReport]:
    """One importance-sampling pass: draw n_e samples from the proposal and
    self-normalize the weights log p(theta|z) - log q(theta).

    Failed target evaluations get log-weight -inf; raises AllWeightsZero if
    every sample fails.
    """
    if target.dimension != proposal.dimension:
        raise DomainError("target and proposal dimensions disagree")
    thetas = proposal.sample(rng, n_e)
    log_p = parallel_map_density(target, thetas, workers)
    log_q = proposal.log_density_batch(thetas)
    log_w = np.array(
        [
            -np.inf if is_failure(lp) else float(lp) - float(lq)
            for lp, lq in zip(log_p, log_q)
        ]
    )
    weights = self_normalize(log_w)
    ensemble = WeightedEnsemble(thetas, log_w, weights)
    return ensemble, estimate_r(weights)


def _fit(ensemble: WeightedEnsemble, config: IsaConfig):
    if config.family == "student_t":
        return fit_student_t(ensemble, config.nu, config.inflation)
    return fit_gaussian(ensemble, config.inflation)


def isa_run(
    target,
    init,
    config: IsaConfig,
    workers: int = 1,
    rng: np.random.Generator | None = None,
) -> IterationTrace:
    """Run the full iteration from an initial ensemble or proposal.

    `init` is either a WeightedEnsemble (the k=0 proposal is fit from it) or
    a proposal object used directly for the first draw.  Stops when the
    relative change |R_k+1 - R_k| / R_k falls below config.tol (and the
    estimate is not saturated), at max_iterations, or on collapse; collapse
    is recorded in stopped_reason, not raised.
    """
    rng = rng or np.random.Generator(np.random.Philox(config.seed))
    records: list[IterationRecord] = []
    ensemble = None
    try:
        if isinstance(init, WeightedEnsemble):
            proposal = _fit(init, config)
        else:
            proposal = init
    except DegenerateEnsemble:
        return IterationTrace((), "collapsed", None, None, config)

    stopped = "max_iterations"
    prev_r = None
    for k in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        try:
            ensemble, report = isa_step(
                target, proposal, config.samples_per_iteration, rng, workers
            )
        except AllWeightsZero:
            stopped = "collapsed"
            break
        records.append(
            IterationRecord(
                k=k,
                n_e=config.samples_per_iteration,
                r=report.r,
                n_eff=report.n_eff,
                failure_count=int(np.sum(np.isneginf(ensemble.log_weights_raw))),
                wall_time=time.perf_counter() - t0,
                proposal=proposal.to_dict(),
            )
        )
        if (
            prev_r is not None
            and prev_r > 0
            and abs(report.r - prev_r) / prev_r < config.tol
            and report.r < SATURATION_FRACTION * config.samples_per_iteration
        ):
            stopped = "converged"
            break
        prev_r = report.r
        if k < config.max_iterations:
            try:
                proposal = _fit(ensemble, config)
            except DegenerateEnsemble:
                stopped = "collapsed"
                break
    return IterationTrace(tuple(records), stopped, proposal, ensemble, config)
