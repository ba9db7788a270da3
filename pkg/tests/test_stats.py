import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from cvsym.errors import DegenerateCovarianceError, PreconditionError
from cvsym.samples import SampleBatch
from cvsym.stats import (
    DegenerateBivariate,
    GaussianBivariate,
    MomentSummary,
    berry_esseen_bound,
    columnwise_shape_stats,
    coordinate_fourth_matrix,
    empirical_tv_3d,
    estimation_error_mc,
    gaussian_tv_1d,
    gaussian_tv_first_order,
    mode_triple_moments,
    sigma_est,
    sigma_g,
    sigma_g_centered,
    triple_reduce,
)


def test_triple_reduce_single_mode():
    batch = SampleBatch(np.array([1.0, 0.0]), np.array([0.0, 2.0]))
    np.testing.assert_array_equal(triple_reduce(batch), [[1.0, 4.0, 0.0]])


def test_triple_reduce_sums_are_exact():
    rng = np.random.default_rng(0)
    batch = SampleBatch(rng.standard_normal(40), rng.standard_normal(40))
    triples = triple_reduce(batch)
    inv = batch.invariant_triple()
    # Same arithmetic path: exact equality, no tolerance.
    assert triples[:, 0].sum() == inv.norm_x_sq
    assert triples[:, 1].sum() == inv.norm_y_sq
    assert triples[:, 2].sum() == inv.dot_xy


def test_triple_reduce_two_modes():
    batch = SampleBatch(np.array([1.0, 1.0, 1.0, 1.0]), np.array([1.0, 0.0, 0.0, 1.0]))
    np.testing.assert_array_equal(triple_reduce(batch), [[2.0, 1.0, 1.0], [2.0, 1.0, 1.0]])


def test_triples_satisfy_per_mode_cauchy_schwarz():
    rng = np.random.default_rng(40)
    for _ in range(50):
        batch = SampleBatch(rng.standard_normal(60), rng.standard_normal(60))
        t = triple_reduce(batch)
        assert np.all(t[:, 0] >= 0.0)
        assert np.all(t[:, 1] >= 0.0)
        assert np.all(t[:, 2] ** 2 <= t[:, 0] * t[:, 1] * (1.0 + 1e-12))


def test_sigma_g_unit_uncorrelated():
    np.testing.assert_allclose(sigma_g(1.0, 1.0, 0.0), [[3, 1, 0], [1, 3, 0], [0, 0, 1]])


def test_sigma_g_homogeneity():
    m1 = sigma_g(1.0, 2.0, 0.5)
    m2 = sigma_g(4.0, 8.0, 2.0)
    np.testing.assert_allclose(m2, 16.0 * m1, rtol=1e-14)


def test_sigma_g_perfect_correlation_is_rank_deficient():
    centered = sigma_g_centered(1.0, 1.0, 1.0)
    assert np.linalg.eigvalsh(centered)[0] < 1e-12


def test_sigma_g_rejects_cauchy_schwarz_violation():
    with pytest.raises(ValueError):
        sigma_g(1.0, 1.0, 1.5)


def test_single_sample_fourth_matrix():
    np.testing.assert_array_equal(
        coordinate_fourth_matrix(1.0, 2.0), [[1, 4, 2], [4, 16, 8], [2, 8, 4]])


def test_sigma_est_needs_two_samples():
    with pytest.raises(PreconditionError):
        sigma_est(np.array([[1.0, 2.0]]))


def test_sigma_est_matches_sigma_g_for_gaussian_data():
    rng = np.random.default_rng(1)
    model = GaussianBivariate(1.0, 1.0, 0.0)
    est = sigma_est(model.draw(100_000, rng))
    target = sigma_g(1.0, 1.0, 0.0)
    assert np.all(np.abs(est.matrix - target) <= 3 * est.stderr)


def test_sigma_est_error_shrinks_like_sqrt_m():
    model = GaussianBivariate(1.0, 2.0, 0.5)
    r1 = estimation_error_mc(model, 500, 400, np.random.default_rng(2))
    r2 = estimation_error_mc(model, 1000, 400, np.random.default_rng(3))
    # unscaled error std ratio: (std_m / sqrt(m)) / (std_2m / sqrt(2m))
    ratio = (r1.std / np.sqrt(500)) / (r2.std / np.sqrt(1000))
    assert np.all(ratio >= np.sqrt(2.0) * 0.8)
    assert np.all(ratio <= np.sqrt(2.0) * 1.2)


def test_moment_summary_consistency():
    rng = np.random.default_rng(4)
    triples = np.abs(rng.standard_normal((5000, 3)))
    summary = MomentSummary.from_triples(triples)
    np.testing.assert_allclose(
        summary.second_moment - np.outer(summary.mean, summary.mean),
        summary.covariance, atol=1e-10)
    assert summary.lambda_min >= 0.0


def test_berry_esseen_explicit_n_dependence():
    rng = np.random.default_rng(5)
    model = GaussianBivariate(1.0, 1.0, 0.0)
    pairs = model.draw(20_000, rng).reshape(-1, 2, 2)
    triples = np.stack([
        (pairs[:, :, 0] ** 2).sum(axis=1),
        (pairs[:, :, 1] ** 2).sum(axis=1),
        (pairs[:, :, 0] * pairs[:, :, 1]).sum(axis=1),
    ], axis=1)
    summary = MomentSummary.from_triples(triples)
    assert abs(berry_esseen_bound(summary, 400) - berry_esseen_bound(summary, 100) / 2.0) < 1e-12
    assert berry_esseen_bound(summary, 100, constant=0.0) == 0.0


def test_berry_esseen_factor_recomposition():
    # Unit Gaussian uncorrelated data, 1e6 per-mode samples; the bound must
    # equal the hand-composed product of its factors.
    rng = np.random.default_rng(6)
    coords = rng.standard_normal((1_000_000, 2, 2))
    triples = np.stack([
        (coords[:, :, 0] ** 2).sum(axis=1),
        (coords[:, :, 1] ** 2).sum(axis=1),
        (coords[:, :, 0] * coords[:, :, 1]).sum(axis=1),
    ], axis=1)
    summary = MomentSummary.from_triples(triples)
    lam = np.linalg.eigvalsh(np.cov(triples.T))[0]
    third = np.mean(np.linalg.norm(triples, axis=1) ** 3)
    hand = np.sqrt(3.0) * lam ** -1.5 * third / np.sqrt(1000.0)
    assert abs(berry_esseen_bound(summary, 1000) / hand - 1.0) < 1e-3


def test_berry_esseen_scale_invariance():
    rng = np.random.default_rng(7)
    triples = np.abs(rng.standard_normal((20_000, 3))) + 0.1
    s1 = MomentSummary.from_triples(triples)
    s2 = MomentSummary.from_triples(9.0 * triples)  # data rescaled by s=3
    b1 = berry_esseen_bound(s1, 50)
    b2 = berry_esseen_bound(s2, 50)
    assert abs(b1 / b2 - 1.0) < 1e-9


def test_berry_esseen_degenerate_covariance():
    triples = np.tile([1.0, 2.0, 3.0], (100, 1))
    summary = MomentSummary.from_triples(triples)
    with pytest.raises(DegenerateCovarianceError):
        berry_esseen_bound(summary, 10)


def _tv_quadrature(s1, s2):
    lo, hi = sorted((s1, s2))
    crossing = lo * hi * np.sqrt(2.0 * np.log(hi / lo) / (hi * hi - lo * lo))
    f = lambda t: abs(norm.pdf(t, scale=lo) - norm.pdf(t, scale=hi))
    return sum(quad(f, a, b, limit=200)[0]
               for a, b in ((-np.inf, -crossing), (-crossing, crossing), (crossing, np.inf)))


def test_gaussian_tv_equal_sigmas():
    assert gaussian_tv_1d(1.3, 1.3) == 0.0


def test_gaussian_tv_exact_matches_quadrature():
    for s1, ratio in ((1.0, 2.0), (0.5, 1.5), (2.0, 1.01)):
        exact = gaussian_tv_1d(s1, ratio * s1)
        assert abs(exact - _tv_quadrature(s1, ratio * s1)) <= 1e-6
    assert abs(gaussian_tv_1d(1.0, 2.0) - 0.645349) < 1e-4


def test_gaussian_tv_first_order_value():
    assert abs(gaussian_tv_first_order(1.0, 0.01) - 0.009679) < 1e-6


def test_gaussian_tv_first_order_is_leading_term():
    for delta in (1e-3, 1e-4):
        ratio = gaussian_tv_1d(1.0, 1.0 + delta) / gaussian_tv_first_order(1.0, delta)
        assert abs(ratio - 1.0) < 10 * delta
    ratio = gaussian_tv_1d(1.0, 1.0 + 1e-4) / gaussian_tv_first_order(1.0, 1e-4)
    assert abs(ratio - 1.0) < 0.01


def test_gaussian_tv_domain():
    with pytest.raises(ValueError):
        gaussian_tv_1d(0.0, 1.0)
    with pytest.raises(ValueError):
        gaussian_tv_first_order(-1.0, 0.1)


def test_empirical_tv_null_case():
    rng = np.random.default_rng(8)
    cov = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]])
    chol = np.linalg.cholesky(cov)
    samples = rng.standard_normal((20_000, 3)) @ chol.T
    diag = empirical_tv_3d(samples, np.zeros(3), cov, np.random.default_rng(9))
    assert diag.tv_estimate <= diag.tv_bias_bound
    # joint null consistency across 9 dependent statistics: Bonferroni level
    pvals = sorted(diag.ks_pvalues.values())
    assert pvals[0] > 0.01 / len(pvals)
    assert pvals[len(pvals) // 2] > 0.01


def test_empirical_tv_disjoint_supports():
    rng = np.random.default_rng(10)
    samples = rng.standard_normal((20_000, 3)) + 5.0
    diag = empirical_tv_3d(samples, np.zeros(3), np.eye(3), np.random.default_rng(11))
    assert diag.tv_estimate >= 0.95


def test_empirical_tv_preconditions():
    rng = np.random.default_rng(12)
    with pytest.raises(PreconditionError):
        empirical_tv_3d(rng.standard_normal((100, 3)), np.zeros(3), np.eye(3), rng)
    with pytest.raises(DegenerateCovarianceError):
        empirical_tv_3d(rng.standard_normal((2000, 3)), np.zeros(3), np.zeros((3, 3)), rng)


def test_estimation_error_centered_and_shrinking():
    model = GaussianBivariate(1.0, 1.0, 0.0)
    report = estimation_error_mc(model, 1000, 10_000, np.random.default_rng(13))
    assert np.all(np.abs(report.mean) <= 3 * report.se_mean)


def test_estimation_error_degenerate_data_is_exactly_zero():
    report = estimation_error_mc(DegenerateBivariate(1.0, 2.0), 50, 100, np.random.default_rng(14))
    assert np.all(report.mean == 0.0)
    assert np.all(report.std == 0.0)


def test_mode_triple_moments_match_monte_carlo():
    rng = np.random.default_rng(15)
    weights = [0.6, 0.4]
    comps = [(1.0, 2.0, 0.5), (1.0, 4.0, -1.0)]
    mu, cov = mode_triple_moments(weights, comps)
    # one component per mode, two coordinate pairs each
    size = 200_000
    comp = rng.choice(2, size=size, p=weights)
    triples = np.empty((size, 3))
    for j, (a, b, c) in enumerate(comps):
        sel = comp == j
        m = sel.sum()
        g = rng.standard_normal((m, 2, 2))
        x = np.sqrt(a) * g[:, :, 0]
        y = (c / np.sqrt(a)) * g[:, :, 0] + np.sqrt(b - c * c / a) * g[:, :, 1]
        triples[sel] = np.stack([(x * x).sum(1), (y * y).sum(1), (x * y).sum(1)], axis=1)
    np.testing.assert_allclose(triples.mean(axis=0), mu, atol=4 * np.sqrt(cov.max() / size))
    emp_cov = np.cov(triples.T)
    assert np.max(np.abs(emp_cov - cov)) <= 0.05 * np.max(np.abs(cov))


def test_columnwise_shape_stats_gaussian():
    rng = np.random.default_rng(16)
    z = rng.standard_normal((200_000, 3))
    skew, kurt, se_skew, se_kurt = columnwise_shape_stats(z)
    assert np.all(np.abs(skew) <= 4 * se_skew)
    assert np.all(np.abs(kurt) <= 4 * se_kurt)
