"""Config-driven command-line front end.

Subcommands `run`, `init-mcmc`, `init-gmm`, `mcmc-baseline`, and
`export-triangle` all read the same JSON config schema and use the parts
relevant to them.  Exit codes for `run`: 0 converged, 2 max iterations,
3 collapsed, 1 config/IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import iact_ensemble, triangle_export
from .ensemble import read_ensemble_csv, write_ensemble_csv
from .errors import ConfigError, IsaError
from .init import (
    build_gmm,
    dedup_modes,
    mcmc_init_ensemble,
    multistart,
    stretch_move_run,
)
from .isa import IsaConfig, isa_run
from .optimize import OptSettings, OptStatus
from .proposals import save_proposal
from .targets import (
    Toy2DTarget,
    gaussian_target,
    make_synthetic_regression,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITERATIONS = 2
EXIT_COLLAPSED = 3

_STOP_TO_EXIT = {
    "converged": EXIT_OK,
    "max_iterations": EXIT_MAX_ITERATIONS,
    "collapsed": EXIT_COLLAPSED,
}


@dataclass(frozen=True)
class RunConfig:
    target: str
    init: dict
    isa: dict
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    gaussian: dict | None = None
    regression: dict | None = None
    opt: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in ("toy2d", "gaussian", "regression"):
            raise ConfigError(f"unknown target {self.target!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        init_keys = [k for k in ("mcmc", "gmm", "file") if k in self.init]
        if len(init_keys) != 1:
            raise ConfigError("init must contain exactly one of mcmc / gmm / file")
        if "mcmc" in self.init:
            mcmc = self.init["mcmc"]
            if int(mcmc.get("walkers", 0)) < 4:
                raise ConfigError("mcmc init needs at least 4 walkers")
            if int(mcmc.get("steps", 0)) < 1 or int(mcmc.get("keep", 0)) < 1:
                raise ConfigError("mcmc init needs steps >= 1 and keep >= 1")
        if "gmm" in self.init and int(self.init["gmm"].get("n_starts", 0)) < 1:
            raise ConfigError("gmm init needs n_starts >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = {
            "target",
            "init",
            "isa",
            "seed",
            "workers",
            "output_dir",
            "gaussian",
            "regression",
            "opt",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                target=data["target"],
                init=dict(data.get("init", {})),
                isa=dict(data.get("isa", {})),
                seed=int(data.get("seed", 0)),
                workers=int(data.get("workers", 1)),
                output_dir=str(data.get("output_dir", "out")),
                gaussian=data.get("gaussian"),
                regression=data.get("regression"),
                opt=dict(data.get("opt", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    def to_dict(self) -> dict:
        out = {
            "target": self.target,
            "init": self.init,
            "isa": self.isa,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
        }
        if self.gaussian is not None:
            out["gaussian"] = self.gaussian
        if self.regression is not None:
            out["regression"] = self.regression
        if self.opt:
            out["opt"] = self.opt
        return out

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def build_target(config: RunConfig):
    if config.target == "toy2d":
        return Toy2DTarget()
    if config.target == "gaussian":
        spec = config.gaussian or {}
        mean = np.asarray(spec.get("mean", [0.0, 0.0]), dtype=float)
        dim = mean.size
        cov = np.asarray(
            spec.get("covariance", np.eye(dim).ravel().tolist()), dtype=float
        ).reshape(dim, dim)
        return gaussian_target(mean, cov)
    spec = config.regression or {}
    try:
        return make_synthetic_regression(
            n_theta=int(spec["n_theta"]),
            n_z=int(spec["n_z"]),
            noise_sd=spec["noise_sd"],
            prior_mean=spec["prior_mean"],
            prior_sd=spec["prior_sd"],
            theta_ref=spec["theta_ref"],
            data_seed=int(spec.get("data_seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"regression config missing key {exc}") from exc


def build_isa_config(config: RunConfig) -> IsaConfig:
    spec = config.isa
    try:
        return IsaConfig(
            samples_per_iteration=int(spec.get("samples", 1000)),
            max_iterations=int(spec.get("max_iterations", 10)),
            tol=float(spec.get("tol", 0.05)),
            inflation=float(spec.get("inflation", 1.0)),
            family=str(spec.get("family", "gaussian")),
            nu=float(spec.get("nu", 3.0)),
            seed=config.seed,
        )
    except IsaError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad isa config: {exc}") from exc


def build_opt_settings(config: RunConfig) -> OptSettings:
    spec = config.opt
    return OptSettings(
        rel_step=float(spec.get("rel_step", 1e-6)),
        f_tol=float(spec.get("f_tol", 1e-10)),
        grad_tol=float(spec.get("grad_tol", 1e-6)),
        max_iter=int(spec.get("max_iter", 200)),
    )


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def build_init(config: RunConfig, target, rng):
    """Return the ISA starting point: a WeightedEnsemble or a proposal."""
    if "mcmc" in config.init:
        spec = config.init["mcmc"]
        chain = stretch_move_run(
            target,
            n_walkers=int(spec["walkers"]),
            n_steps=int(spec["steps"]),
            a=float(spec.get("a", 2.0)),
            rng=rng,
        )
        return mcmc_init_ensemble(chain, int(spec["keep"]))
    if "gmm" in config.init:
        spec = config.init["gmm"]
        results = multistart(
            target,
            int(spec["n_starts"]),
            rng,
            settings=build_opt_settings(config),
            parallelism=config.workers,
        )
        modes = dedup_modes(results, float(spec.get("confidence", 0.95)))
        return build_gmm(modes)
    return read_ensemble_csv(config.init["file"])


def cmd_run(config: RunConfig) -> int:
    target = build_target(config)
    rng = _rng(config.seed)
    init = build_init(config, target, rng)
    trace = isa_run(target, init, build_isa_config(config), workers=config.workers, rng=rng)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace.save_json(out / "trace.json")
    if trace.final_ensemble is not None:
        write_ensemble_csv(trace.final_ensemble, out / "ensemble.csv")
        triangle_export(trace.final_ensemble, out_dir=out)
    print(
        f"stopped: {trace.stopped_reason}; R sequence: "
        + ", ".join(f"{r:.4g}" for r in trace.r_values())
    )
    return _STOP_TO_EXIT[trace.stopped_reason]


def cmd_init_mcmc(config: RunConfig) -> int:
    if "mcmc" not in config.init:
        raise ConfigError("init-mcmc requires an init.mcmc section")
    target = build_target(config)
    ensemble = build_init(config, target, _rng(config.seed))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ensemble_csv(ensemble, out / "init_ensemble.csv")
    print(f"wrote {out / 'init_ensemble.csv'} ({ensemble.n} samples)")
    return EXIT_OK


def cmd_init_gmm(config: RunConfig) -> int:
    if "gmm" not in config.init:
        raise ConfigError("init-gmm requires an init.gmm section")
    target = build_target(config)
    rng = _rng(config.seed)
    spec = config.init["gmm"]
    results = multistart(
        target,
        int(spec["n_starts"]),
        rng,
        settings=build_opt_settings(config),
        parallelism=config.workers,
    )
    modes = dedup_modes(results, float(spec.get("confidence", 0.95)))
    proposal = build_gmm(modes)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_proposal(proposal, out / "init_proposal.json")
    counts = {
        status.value: sum(1 for r in results if r.status is status)
        for status in OptStatus
    }
    report = {
        "modes": [
            {
                "minimizer": modes.minimizers[j].tolist(),
                "f_min": float(modes.f_mins[j]),
            }
            for j in range(len(modes))
        ],
        "status_counts": counts,
    }
    with open(out / "modes.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"found {len(modes)} distinct modes from {len(results)} starts")
    return EXIT_OK


def cmd_mcmc_baseline(config: RunConfig) -> int:
    if "mcmc" not in config.init:
        raise ConfigError("mcmc-baseline requires an init.mcmc section")
    spec = config.init["mcmc"]
    target = build_target(config)
    chain = stretch_move_run(
        target,
        n_walkers=int(spec["walkers"]),
        n_steps=int(spec["steps"]),
        a=float(spec.get("a", 2.0)),
        rng=_rng(config.seed),
    )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        out / "chain.csv",
        chain.samples,
        delimiter=",",
        header=",".join(f"theta_{j}" for j in range(chain.n_theta)),
        comments="",
        fmt="%.17g",
    )
    by_walker = chain.by_walker()
    taus = [
        iact_ensemble(by_walker[:, :, coord]) for coord in range(chain.n_theta)
    ]
    report = {
        "walkers": chain.walkers,
        "steps": chain.steps,
        "acceptance_rate": chain.acceptance_rate,
        "iact": taus,
    }
    with open(out / "iact.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print("IACT per coordinate: " + ", ".join(f"{t:.2f}" for t in taus))
    return EXIT_OK


def cmd_export_triangle(config: RunConfig) -> int:
    if "file" not in config.init:
        raise ConfigError("export-triangle requires init.file with an ensemble CSV")
    ensemble = read_ensemble_csv(config.init["file"])
    files = triangle_export(ensemble, out_dir=config.output_dir)
    print(f"wrote {len(files)} files to {config.output_dir}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "init-mcmc": cmd_init_mcmc,
    "init-gmm": cmd_init_gmm,
    "mcmc-baseline": cmd_mcmc_baseline,
    "export-triangle": cmd_export_triangle,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isalib",
        description="Iterative importance sampling for Bayesian parameter estimation",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to JSON run config")
    parser.add_argument("--output", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    parser.add_argument("--workers", type=int, help="worker count (overrides config)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config)
        overrides = {}
        if args.output is not None:
            overrides["output_dir"] = args.output
        if args.seed is not None:
            overrides["seed"] = args.seed
        workers = args.workers
        if workers is None and os.environ.get("ISA_WORKERS"):
            workers = int(os.environ["ISA_WORKERS"])
        if workers is not None:
            overrides["workers"] = workers
        if overrides:
            config = RunConfig.from_dict({**config.to_dict(), **overrides})
        return _COMMANDS[args.command](config)
    except (IsaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
