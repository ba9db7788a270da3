"""Experiment configuration: one flat JSON file with explicit keys.

Every run is fully described by (config, seed); there are no environment
overrides apart from the output directory, so the config file doubles as
the experiment's provenance record.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

EXPERIMENT_KINDS = (
    "convergence-sweep",
    "invariant-audit",
    "design-compare",
    "keyrate-report",
    "estimation-error",
)


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    out_dir: str = "out"
    # protocol parameters
    modulation_variance: float = 4.0
    transmittance: float = 0.7
    excess_noise: float = 0.02
    perturbation: str = "none"  # none | gaussian-mixture | phase-diffusion
    mixture_weights: list = field(default_factory=list)
    mixture_transmittances: list = field(default_factory=list)
    mixture_excess_noises: list = field(default_factory=list)
    phase_sigma: float = 0.0
    postselection_rule: str = "none"  # none | amplitude-threshold | product-threshold
    postselection_threshold: float = 0.0
    # analysis parameters
    be_constant: float = 1.0
    reconciliation_efficiency: float = 0.95
    estimation_fraction: float = 0.1
    # convergence-sweep
    n_grid: list = field(default_factory=list)
    trials: object = 10000  # int, or list matching n_grid
    # single-size kinds
    n: int = 0
    # invariant-audit ensembles: shared triple, opposite symplectic products
    audit_norm_x_sq: float = 0.0  # 0 -> defaults scaled with n
    audit_norm_y_sq: float = 0.0
    audit_dot_xy: float = 0.0
    audit_symp_xy: float = 0.0
    # design-compare
    design_kind: str = "roots-of-unity"  # roots-of-unity | haar-sample
    design_size: int = 4
    design_degree: int = 1
    design_samples: int = 200
    # estimation-error
    est_m: int = 1000

    def trials_for_grid(self):
        if isinstance(self.trials, int):
            return [self.trials] * len(self.n_grid)
        return list(self.trials)

    def validate(self):
        problems = []

        def bad(name, msg):
            problems.append((name, msg))

        if self.kind not in EXPERIMENT_KINDS:
            bad("kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", "must be a nonnegative integer")
        if not self.modulation_variance > 0:
            bad("modulation_variance", "must be > 0")
        if not 0.0 <= self.transmittance <= 1.0:
            bad("transmittance", "must lie in [0, 1]")
        if self.excess_noise < 0:
            bad("excess_noise", "must be >= 0")
        if self.perturbation not in ("none", "gaussian-mixture", "phase-diffusion"):
            bad("perturbation", "must be none, gaussian-mixture or phase-diffusion")
        if self.perturbation == "gaussian-mixture":
            k = len(self.mixture_weights)
            if k == 0 or len(self.mixture_transmittances) != k or len(self.mixture_excess_noises) != k:
                bad("mixture_weights", "mixture components must have matching non-zero lengths")
            else:
                if any(w < 0 for w in self.mixture_weights) or abs(sum(self.mixture_weights) - 1.0) > 1e-9:
                    bad("mixture_weights", "must be nonnegative and sum to 1")
                if any(not 0.0 <= t <= 1.0 for t in self.mixture_transmittances):
                    bad("mixture_transmittances", "must lie in [0, 1]")
                if any(v < 0 for v in self.mixture_excess_noises):
                    bad("mixture_excess_noises", "must be >= 0")
        if self.perturbation == "phase-diffusion" and self.phase_sigma < 0:
            bad("phase_sigma", "must be >= 0")
        if self.postselection_rule not in ("none", "amplitude-threshold", "product-threshold"):
            bad("postselection_rule", "unknown rule")
        if self.postselection_threshold < 0:
            bad("postselection_threshold", "must be >= 0")
        if self.be_constant < 0:
            bad("be_constant", "must be >= 0")
        if not 0.0 < self.reconciliation_efficiency <= 1.0:
            bad("reconciliation_efficiency", "must lie in (0, 1]")
        if not 0.0 < self.estimation_fraction <= 1.0:
            bad("estimation_fraction", "must lie in (0, 1]")

        if self.kind == "convergence-sweep":
            grid = list(self.n_grid)
            if any(not isinstance(v, int) or v < 1 for v in grid):
                bad("n_grid", "entries must be positive integers")
            elif any(b <= a for a, b in zip(grid, grid[1:])):
                bad("n_grid", "must be strictly increasing")
            if isinstance(self.trials, int):
                if self.trials < 1:
                    bad("trials", "must be >= 1")
            elif isinstance(self.trials, list):
                if len(self.trials) != len(grid):
                    bad("trials", "list length must match n_grid")
                elif any(not isinstance(v, int) or v < 1 for v in self.trials):
                    bad("trials", "entries must be positive integers")
            else:
                bad("trials", "must be an integer or a list of integers")
        else:
            if not isinstance(self.n, int) or self.n < 1:
                bad("n", "must be a positive integer")
            if not isinstance(self.trials, int) or self.trials < 1:
                bad("trials", "must be a positive integer")

        if self.kind == "invariant-audit":
            if self.audit_norm_x_sq < 0 or self.audit_norm_y_sq < 0:
                bad("audit_norm_x_sq", "squared norms must be >= 0")
            cross = self.audit_dot_xy ** 2 + self.audit_symp_xy ** 2
            if self.audit_norm_x_sq > 0 and cross > self.audit_norm_x_sq * self.audit_norm_y_sq:
                bad("audit_dot_xy", "dot^2 + symp^2 exceeds the Cauchy-Schwarz budget")
        if self.kind == "design-compare":
            if self.design_kind not in ("roots-of-unity", "haar-sample"):
                bad("design_kind", "must be roots-of-unity or haar-sample")
            if self.design_kind == "roots-of-unity" and self.n != 1:
                bad("n", "roots-of-unity designs are single-mode (n must be 1)")
            if self.design_size < 1:
                bad("design_size", "must be >= 1")
            if self.design_degree < 1:
                bad("design_degree", "must be >= 1")
            if self.design_samples < 1:
                bad("design_samples", "must be >= 1")
        if self.kind == "estimation-error" and self.est_m < 10:
            bad("est_m", "must be >= 10")

        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([(name, "unknown key") for name in unknown])
        if "kind" not in data or "seed" not in data:
            raise ConfigError([(k, "required") for k in ("kind", "seed") if k not in data])
        return cls(**data)


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def dump_config(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
