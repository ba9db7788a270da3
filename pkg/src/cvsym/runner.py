"""Experiment orchestration: deterministic seeding, worker fan-out, metric assembly.

Seeding: every random stream derives from the master seed through
``SeedSequence(seed, spawn_key=(stream, ...))`` with fixed stream ids and
block indices, so results are identical across runs and across worker
counts.  Work is cut into fixed-size blocks before scheduling; workers only
change how blocks are executed, never what a block computes, and gathered
results are merged in block order.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats as sps

from . import __version__
from .errors import ConfigError
from .keyrate import estimate_channel, gaussian_keyrate
from .linalg import (
    haar_orthogonal_symplectic_stack,
    orthogonality_residual,
    symplecticity_residual,
)
from .protocol import (
    ChannelModel,
    GaussianMixture,
    ModulationParams,
    PhaseDiffusion,
    PostselectionRegion,
    channel_and_heterodyne,
    postselect,
)
from .report import ExperimentReport
from .samples import SampleBatch, mode_symplectic_products, mode_triples
from .stats import (
    GaussianBivariate,
    MomentSummary,
    berry_esseen_bound,
    columnwise_shape_stats,
    empirical_tv_3d,
    mode_triple_moments,
    scaled_estimation_errors,
    sigma_est,
    sigma_g,
    summarize_scaled_errors,
)
from .symmetrize import (
    batch_with_invariants,
    collect_audit_samples,
    finite_design_average,
    haar_design,
    roots_of_unity_design,
    witness_transform,
)

# Stream ids for SeedSequence spawn keys.
_S_SWEEP, _S_PREPASS, _S_DIAG, _S_AUDIT, _S_DESIGN = 0, 1, 2, 3, 4
_S_KEYRATE, _S_KEYRATE_ANALYSIS, _S_ESTIMATION, _S_SELFCHECK = 5, 6, 7, 8

MOMENT_PREPASS_MODES = 200_000


def _stream_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _summary_dict(summary):
    return {
        "mean": summary.mean.tolist(),
        "covariance": summary.covariance.tolist(),
        "third_abs": summary.third_abs,
        "lambda_min": summary.lambda_min,
    }


def _map_blocks(fn, args_list, workers):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list))


def _blocks(total, block_size):
    out = []
    start = 0
    index = 0
    while start < total:
        out.append((index, min(block_size, total - start)))
        start += block_size
        index += 1
    return out


def _channel_from_config(config):
    if config.perturbation == "gaussian-mixture":
        pert = GaussianMixture(tuple(config.mixture_weights),
                               tuple(config.mixture_transmittances),
                               tuple(config.mixture_excess_noises))
    elif config.perturbation == "phase-diffusion":
        pert = PhaseDiffusion(config.phase_sigma)
    else:
        pert = None
    return ChannelModel(config.transmittance, config.excess_noise, pert)


def _region_from_config(config):
    return PostselectionRegion(config.postselection_rule, config.postselection_threshold)


# ---------------------------------------------------------------------------
# triple sampling


def wishart_triples(n, trials, weights, components, rng):
    """Exact per-trial totals (X^n, Y^n, Z^n) for per-mode Gaussian(-mixture) channels.

    Grouped by component, a trial's scatter matrix is a sum of independent
    2x2 Wisharts with 2*m_k degrees of freedom, sampled through Bartlett
    factors: three scalar draws per component instead of O(n) coordinate
    draws.  Distribution-level equivalence with the coordinate-by-coordinate
    simulation is covered by tests.
    """
    out = np.zeros((trials, 3))
    weights = np.asarray(weights, dtype=float)
    if len(weights) == 1:
        counts = np.full((trials, 1), n, dtype=np.int64)
    else:
        counts = rng.multinomial(n, weights, size=trials)
    for j, (a, b, c) in enumerate(components):
        m = counts[:, j].astype(float)
        nu = 2.0 * m
        l11 = np.sqrt(a)
        l21 = c / l11
        l22 = np.sqrt(max(b - c * c / a, 0.0))
        nonzero = m > 0
        c11 = 2.0 * rng.standard_gamma(nu / 2.0)
        c22 = 2.0 * rng.standard_gamma(np.clip((nu - 1.0) / 2.0, 0.0, None)) * nonzero
        z21 = rng.standard_normal(trials) * nonzero
        a11 = np.sqrt(c11)
        b11 = l11 * a11
        b21 = l21 * a11 + l22 * z21
        b22 = l22 * np.sqrt(c22)
        out[:, 0] += b11 * b11
        out[:, 2] += b11 * b21
        out[:, 1] += b21 * b21 + b22 * b22
    return out


def coordinate_triples(n, trials, model, modulation, rng):
    """Per-trial totals (X^n, Y^n, Z^n) by simulating every coordinate."""
    sd = np.sqrt(modulation.variance_a / 2.0)
    x = sd * rng.standard_normal((trials, 2 * n))
    y = channel_and_heterodyne(x, model, rng)
    return np.stack([
        np.einsum("ij,ij->i", x, x),
        np.einsum("ij,ij->i", y, y),
        np.einsum("ij,ij->i", x, y),
    ], axis=1)


def _sweep_block(args):
    seed, grid_index, block_index, n, trials, model, modulation = args
    rng = _stream_rng(seed, _S_SWEEP, grid_index, block_index)
    comps = model.mixture_components(modulation)
    if comps is not None:
        return wishart_triples(n, trials, comps[0], comps[1], rng)
    return coordinate_triples(n, trials, model, modulation, rng)


def _sweep_block_size(n, exact):
    return 1 << 18 if exact else max(1, 4_000_000 // (2 * n))


def _loglog_slope(ns, values):
    points = [(np.log10(n), np.log10(v)) for n, v in zip(ns, values) if v > 0]
    if len(points) < 2:
        return None, len(points)
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    return float(np.polyfit(xs, ys, 1)[0]), len(points)


def _run_convergence_sweep(config, workers):
    model = _channel_from_config(config)
    modulation_proto = ModulationParams(max(config.n_grid[0] if config.n_grid else 1, 1),
                                        config.modulation_variance)
    comps = model.mixture_components(modulation_proto)
    region = _region_from_config(config)
    grid_rows = []
    for grid_index, (n, trials) in enumerate(zip(config.n_grid, config.trials_for_grid())):
        modulation = ModulationParams(n, config.modulation_variance)
        # Moment pre-pass: per-mode triples feed the quantitative CLT bound
        # (and the standardization, when no exact decomposition exists).
        prepass_rng = _stream_rng(config.seed, _S_PREPASS, grid_index)
        prepass = coordinate_triples(1, MOMENT_PREPASS_MODES, model,
                                     ModulationParams(1, config.modulation_variance), prepass_rng)
        mode_summary = MomentSummary.from_triples(prepass)
        if comps is not None:
            mu_mode, cov_mode = mode_triple_moments(comps[0], comps[1])
        else:
            mu_mode, cov_mode = mode_summary.mean, mode_summary.covariance

        block_size = _sweep_block_size(n, comps is not None)
        args = [(config.seed, grid_index, bi, n, bt, model, modulation)
                for bi, bt in _blocks(trials, block_size)]
        totals = np.concatenate(_map_blocks(_sweep_block, args, workers), axis=0)

        vals, vecs = np.linalg.eigh(cov_mode)
        whiten = (vecs / np.sqrt(vals)) @ vecs.T
        z = (totals - n * mu_mode) @ whiten / np.sqrt(n)

        diag = empirical_tv_3d(z, np.zeros(3), np.eye(3),
                               _stream_rng(config.seed, _S_DIAG, grid_index))
        # Shape statistics are per-component (skew/kurtosis are affine
        # invariant), so they come from the raw totals, not the whitened mix.
        skew, kurt, se_skew, se_kurt = columnwise_shape_stats(totals)
        bound_over_c = berry_esseen_bound(mode_summary, n, 1.0)

        if region.rule == "none":
            acceptance = 1.0
        else:
            sample_rng = _stream_rng(config.seed, _S_DIAG, grid_index, 1)
            sd = np.sqrt(config.modulation_variance / 2.0)
            px = sd * sample_rng.standard_normal((MOMENT_PREPASS_MODES, 2))
            py = channel_and_heterodyne(px, model, sample_rng)
            _, acceptance = postselect(px.ravel(), py.ravel(), region)

        row = {
            "n": n,
            "trials": int(trials),
            "tv_estimate": diag.tv_estimate,
            "tv_bias_bound": diag.tv_bias_bound,
            "ks_max": diag.ks_max,
            "ks_floor": diag.ks_floor,
            "ks_max_corrected": diag.ks_max_corrected,
            "be_bound_over_c": bound_over_c,
            "be_bound": config.be_constant * bound_over_c,
            "skew_x": float(skew[0]), "skew_y": float(skew[1]), "skew_z": float(skew[2]),
            "kurt_x": float(kurt[0]), "kurt_y": float(kurt[1]), "kurt_z": float(kurt[2]),
            "se_skew": se_skew, "se_kurt": se_kurt,
            "acceptance_fraction": acceptance,
            "mode_moments": _summary_dict(mode_summary),
            "ks_detail": diag.to_dict(),
        }
        grid_rows.append(row)

    ns = [row["n"] for row in grid_rows]
    slope_ks, used_ks = _loglog_slope(ns, [row["ks_max_corrected"] for row in grid_rows])
    slope_tv, used_tv = _loglog_slope(ns, [row["tv_estimate"] for row in grid_rows])
    return {
        "grid": grid_rows,
        "slope_ks_corrected": slope_ks,
        "slope_ks_points_used": used_ks,
        "slope_tv": slope_tv,
        "slope_tv_points_used": used_tv,
    }


# ---------------------------------------------------------------------------
# invariant audit


def _audit_defaults(config):
    n = config.n
    nx = config.audit_norm_x_sq or 2.0 * n
    ny = config.audit_norm_y_sq or 4.0 * n
    dot = config.audit_dot_xy or 0.8 * n
    symp = config.audit_symp_xy or 0.5 * n
    return nx, ny, dot, symp


def _audit_block(args):
    seed, block_index, trials, n, invariants = args
    nx, ny, dot, symp = invariants
    batch_a = batch_with_invariants(n, nx, ny, dot, symp)
    batch_b = batch_with_invariants(n, nx, ny, dot, -symp)
    rng = _stream_rng(seed, _S_AUDIT, block_index)
    return collect_audit_samples(lambda _rng: (batch_a, batch_b), trials, rng)


def _run_invariant_audit(config, workers):
    invariants = _audit_defaults(config)
    args = [(config.seed, bi, bt, config.n, invariants)
            for bi, bt in _blocks(config.trials, 512)]
    merged = {}
    for part in _map_blocks(_audit_block, args, workers):
        for name, (va, vb) in part.items():
            acc = merged.setdefault(name, ([], []))
            acc[0].append(va)
            acc[1].append(vb)
    results = {}
    for name, (va, vb) in merged.items():
        ks = sps.ks_2samp(np.concatenate(va), np.concatenate(vb))
        results[name] = {"ks_statistic": float(ks.statistic), "pvalue": float(ks.pvalue)}
    nx, ny, dot, symp = invariants
    return {
        "trials": config.trials,
        "underpowered": config.trials < 100,
        "invariants_a": {"norm_x_sq": nx, "norm_y_sq": ny, "dot_xy": dot, "symp_xy": symp},
        "invariants_b": {"norm_x_sq": nx, "norm_y_sq": ny, "dot_xy": dot, "symp_xy": -symp},
        "results": results,
    }


# ---------------------------------------------------------------------------
# design compare


def _run_design_compare(config, workers):
    del workers  # cheap enough to run in-process
    model = _channel_from_config(config)
    modulation = ModulationParams(config.n, config.modulation_variance)
    design_rng = _stream_rng(config.seed, _S_DESIGN, 0)
    if config.design_kind == "roots-of-unity":
        design = roots_of_unity_design(config.design_size)
    else:
        design = haar_design(config.n, config.design_size, design_rng)

    def sampler(rng):
        sd = np.sqrt(modulation.variance_a / 2.0)
        x = sd * rng.standard_normal(2 * modulation.n)
        y = channel_and_heterodyne(x, model, rng)
        return SampleBatch(x, y)

    report = finite_design_average(sampler, design, config.design_degree,
                                   _stream_rng(config.seed, _S_DESIGN, 1),
                                   samples=config.design_samples)
    return report.to_dict()


# ---------------------------------------------------------------------------
# keyrate report


def _keyrate_block(args):
    seed, block_index, modes, model, modulation = args
    rng = _stream_rng(seed, _S_KEYRATE, block_index)
    sd = np.sqrt(modulation.variance_a / 2.0)
    x = sd * rng.standard_normal((modes, 2))
    y = channel_and_heterodyne(x, model, rng)
    return np.concatenate([x, y], axis=1)


def _run_keyrate_report(config, workers):
    model = _channel_from_config(config)
    modulation = ModulationParams(config.n, config.modulation_variance)
    args = [(config.seed, bi, bm, model, modulation)
            for bi, bm in _blocks(config.n, 500_000)]
    data = np.concatenate(_map_blocks(_keyrate_block, args, workers), axis=0)
    x = data[:, :2].ravel()
    y = data[:, 2:].ravel()

    estimate = estimate_channel(x, y, config.modulation_variance,
                                beta=config.reconciliation_efficiency)
    rate = gaussian_keyrate(estimate)
    _, acceptance = postselect(x, y, _region_from_config(config))

    analysis_rng = _stream_rng(config.seed, _S_KEYRATE_ANALYSIS, 0)
    m_modes = max(2, int(np.ceil(config.estimation_fraction * config.n)))
    picked = analysis_rng.choice(config.n, size=m_modes, replace=False)
    triples = mode_triples(x, y)[picked]
    summary = MomentSummary.from_triples(triples)
    bound_over_c = berry_esseen_bound(summary, config.n, 1.0)

    coord_idx = np.sort(np.concatenate([2 * picked, 2 * picked + 1]))
    est = sigma_est(np.column_stack([x, y]), indices=coord_idx)
    a, b, c = model.coordinate_moments(modulation)
    gap = np.abs(est.matrix - sigma_g(a, b, c))
    with np.errstate(divide="ignore", invalid="ignore"):
        gap_in_se = np.where(est.stderr > 0, gap / est.stderr, 0.0)

    return {
        "modes": config.n,
        "transmittance_hat": estimate.transmittance,
        "se_transmittance": estimate.se_transmittance,
        "excess_noise_hat": estimate.excess_noise,
        "se_excess_noise": estimate.se_excess_noise,
        "mode_moments": _summary_dict(summary),
        "v_variance": estimate.v_variance,
        "beta": estimate.beta,
        "rate": rate.rate,
        "mutual_information": rate.mutual_information,
        "holevo_bound": rate.holevo_bound,
        "symplectic_eigenvalues": list(rate.symplectic_eigenvalues),
        "conditional_eigenvalue": rate.conditional_eigenvalue,
        "no_key": rate.no_key,
        "acceptance_fraction": acceptance,
        "estimation_modes": m_modes,
        "be_bound_over_c": bound_over_c,
        "be_bound": config.be_constant * bound_over_c,
        "sigma_gap_max_se_units": float(gap_in_se.max()),
    }


# ---------------------------------------------------------------------------
# estimation error


def _estimation_block(args):
    seed, block_index, trials, m, a, b, c = args
    rng = _stream_rng(seed, _S_ESTIMATION, block_index)
    return scaled_estimation_errors(GaussianBivariate(a, b, c), m, trials, rng)


def _run_estimation_error(config, workers):
    model = _channel_from_config(config)
    if isinstance(model.perturbation, PhaseDiffusion):
        raise ConfigError([("perturbation",
                            "estimation-error supports none and gaussian-mixture only")])
    modulation = ModulationParams(config.n, config.modulation_variance)
    a, b, c = model.coordinate_moments(modulation)
    if isinstance(model.perturbation, GaussianMixture):
        # Coordinate pairs of a mixture channel follow a mixture of bivariate
        # normals; its fourth-moment truth is the weighted component sum.
        weights, comps = model.mixture_components(modulation)
        truth = sum(w * sigma_g(*comp) for w, comp in zip(weights, comps))
        model_obj = _MixtureBivariate(tuple(weights), tuple(comps), truth)
    else:
        model_obj = GaussianBivariate(a, b, c)

    m = config.est_m
    block_size = max(1, 2_000_000 // m)
    if isinstance(model_obj, GaussianBivariate):
        args = [(config.seed, bi, bt, m, a, b, c) for bi, bt in _blocks(config.trials, block_size)]
        errors = np.concatenate(_map_blocks(_estimation_block, args, workers), axis=0)
    else:
        errors = []
        for bi, bt in _blocks(config.trials, block_size):
            rng = _stream_rng(config.seed, _S_ESTIMATION, bi)
            errors.append(scaled_estimation_errors(model_obj, m, bt, rng))
        errors = np.concatenate(errors, axis=0)
    report = summarize_scaled_errors(errors)
    out = report.to_dict()
    out["m"] = m
    with np.errstate(divide="ignore", invalid="ignore"):
        pull = np.where(report.se_mean > 0, np.abs(report.mean) / report.se_mean, 0.0)
    out["max_mean_pull"] = float(pull.max())
    return out


class _MixtureBivariate:
    """Coordinate-pair mixture model for the estimation-error study."""

    def __init__(self, weights, components, truth):
        self.weights = weights
        self.components = components
        self._truth = truth

    def draw(self, m, rng):
        comp = rng.choice(len(self.weights), size=m, p=np.asarray(self.weights))
        g = rng.standard_normal((m, 2))
        out = np.empty((m, 2))
        for j, (a, b, c) in enumerate(self.components):
            sel = comp == j
            out[sel, 0] = np.sqrt(a) * g[sel, 0]
            out[sel, 1] = (c / np.sqrt(a)) * g[sel, 0] + np.sqrt(b - c * c / a) * g[sel, 1]
        return out

    def fourth_moment_matrix(self):
        return self._truth


# ---------------------------------------------------------------------------
# self-check recorded in every report


def _invariant_selfcheck(seed, n=8, samples=16):
    """Exercise the module-level invariant checks and record their residuals."""
    rng = _stream_rng(seed, _S_SELFCHECK)
    stack = haar_orthogonal_symplectic_stack(n, samples, rng)
    orth = float(np.max(orthogonality_residual(stack)))
    symp = float(np.max(symplecticity_residual(stack)))

    x = rng.standard_normal(2 * n)
    y = rng.standard_normal(2 * n)
    t_before = mode_triples(x, y).sum(axis=0)
    w_before = mode_symplectic_products(x, y).sum()
    worst = 0.0
    for r in stack:
        xr, yr = x @ r.T, y @ r.T
        t_after = mode_triples(xr, yr).sum(axis=0)
        w_after = mode_symplectic_products(xr, yr).sum()
        scale = np.array([t_before[0], t_before[1],
                          np.sqrt(t_before[0] * t_before[1]), np.sqrt(t_before[0] * t_before[1])])
        dev = np.abs(np.concatenate([t_after - t_before, [w_after - w_before]])) / scale
        worst = max(worst, float(dev.max()))

    witness_resid = 0.0
    for r in stack[:4]:
        source = SampleBatch(rng.standard_normal(2 * n), rng.standard_normal(2 * n))
        target = SampleBatch(source.x @ r.T, source.y @ r.T)
        witness = witness_transform(source, target)
        scale = max(np.linalg.norm(source.x), np.linalg.norm(source.y))
        resid = max(np.max(np.abs(witness.apply(source.x) - target.x)),
                    np.max(np.abs(witness.apply(source.y) - target.y))) / scale
        witness_resid = max(witness_resid, float(resid))
    return {
        "group_orthogonality_residual": orth,
        "group_symplecticity_residual": symp,
        "invariant_relative_deviation": worst,
        "witness_mapping_residual": witness_resid,
    }


_RUNNERS = {
    "convergence-sweep": _run_convergence_sweep,
    "invariant-audit": _run_invariant_audit,
    "design-compare": _run_design_compare,
    "keyrate-report": _run_keyrate_report,
    "estimation-error": _run_estimation_error,
}


def run(config, workers=1):
    """Run one experiment; deterministic given (config, seed) for any worker count."""
    config.validate()
    started = time.perf_counter()
    metrics = _RUNNERS[config.kind](config, workers)
    metrics["invariant_checks"] = _invariant_selfcheck(config.seed)
    return ExperimentReport(
        config=config, metrics=metrics, version=__version__,
        wall_clock_s=time.perf_counter() - started)
