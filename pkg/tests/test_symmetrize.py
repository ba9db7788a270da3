import numpy as np
import pytest

from cvsym.errors import InvalidDimensionError, PreconditionError
from cvsym.linalg import ComplexUnitary, haar_orthogonal_symplectic, unitary_to_symplectic
from cvsym.samples import InvariantTriple, SampleBatch
from cvsym.symmetrize import (
    apply_symmetrization,
    batch_with_invariants,
    finite_design_average,
    haar_design,
    invariant_audit,
    roots_of_unity_design,
    witness_transform,
)


def _random_batch(n, rng):
    return SampleBatch(rng.standard_normal(2 * n), rng.standard_normal(2 * n))


def test_identity_leaves_batch_unchanged():
    rng = np.random.default_rng(0)
    batch = _random_batch(3, rng)
    identity = unitary_to_symplectic(ComplexUnitary(3, np.eye(3, dtype=complex)))
    out = apply_symmetrization(batch, identity)
    np.testing.assert_allclose(out.x, batch.x, atol=1e-15)
    np.testing.assert_allclose(out.y, batch.y, atol=1e-15)


def test_quarter_rotation_single_mode():
    rotation = unitary_to_symplectic(ComplexUnitary(1, np.array([[1j]])))
    batch = SampleBatch(np.array([1.0, 0.0]), np.array([0.0, 2.0]))
    out = apply_symmetrization(batch, rotation)
    np.testing.assert_allclose(out.x, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(out.y, [-2.0, 0.0], atol=1e-15)
    assert abs(np.dot(out.x, out.y) - np.dot(batch.x, batch.y)) < 1e-15


def test_all_four_invariants_preserved_at_n100():
    rng = np.random.default_rng(1)
    batch = _random_batch(100, rng)
    before = batch.invariant_triple()
    out = apply_symmetrization(batch, haar_orthogonal_symplectic(100, rng))
    _, worst = before.max_relative_deviation(out.invariant_triple())
    assert worst <= 1e-10


def test_dimension_mismatch_rejected():
    rng = np.random.default_rng(2)
    with pytest.raises(InvalidDimensionError):
        apply_symmetrization(_random_batch(3, rng), haar_orthogonal_symplectic(2, rng))


def test_composition_matches_product():
    rng = np.random.default_rng(3)
    batch = _random_batch(4, rng)
    r1 = haar_orthogonal_symplectic(4, rng)
    r2 = haar_orthogonal_symplectic(4, rng)
    twice = apply_symmetrization(apply_symmetrization(batch, r1), r2)
    once = apply_symmetrization(batch, r2.compose(r1))
    assert np.max(np.abs(twice.x - once.x)) <= 1e-10 * max(1.0, np.max(np.abs(once.x)))
    assert np.max(np.abs(twice.y - once.y)) <= 1e-10 * max(1.0, np.max(np.abs(once.y)))


def _mapping_residual(witness, source, target):
    scale = max(np.linalg.norm(source.x), np.linalg.norm(source.y))
    return max(np.max(np.abs(witness.apply(source.x) - target.x)),
               np.max(np.abs(witness.apply(source.y) - target.y))) / scale


def test_witness_accepts_identical_batches():
    rng = np.random.default_rng(4)
    batch = _random_batch(4, rng)
    witness = witness_transform(batch, batch)
    assert _mapping_residual(witness, batch, batch) <= 1e-8
    assert witness.orthogonality_residual() <= 1e-12


def test_witness_colinear_pair():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(6)
    source = SampleBatch(x, 2.0 * x)
    r0 = haar_orthogonal_symplectic(3, rng)
    target = apply_symmetrization(source, r0)
    witness = witness_transform(source, target)
    assert _mapping_residual(witness, source, target) <= 1e-8


def test_witness_sampled_oracle_general_case():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        source = _random_batch(5, rng)
        target = apply_symmetrization(source, haar_orthogonal_symplectic(5, rng))
        witness = witness_transform(source, target)
        worst = max(worst, _mapping_residual(witness, source, target))
        assert witness.orthogonality_residual() <= 1e-12
        assert witness.symplecticity_residual() <= 1e-12
    assert worst <= 1e-8


def test_witness_names_offending_invariant():
    rng = np.random.default_rng(7)
    source = _random_batch(3, rng)
    target = SampleBatch(source.x, 1.5 * source.y)
    with pytest.raises(PreconditionError, match="norm_y_sq"):
        witness_transform(source, target)


def test_witness_requires_matching_symplectic_product():
    # Matching the three norm/dot quantities is not enough for the
    # constructive witness; opposite symplectic products must be rejected.
    source = batch_with_invariants(4, 2.0, 3.0, 1.0, 0.8)
    target = batch_with_invariants(4, 2.0, 3.0, 1.0, -0.8)
    with pytest.raises(PreconditionError, match="symp_xy"):
        witness_transform(source, target)


def test_witness_zero_vector_degenerate_case():
    rng = np.random.default_rng(8)
    source = SampleBatch(np.zeros(6), rng.standard_normal(6))
    target = apply_symmetrization(source, haar_orthogonal_symplectic(3, rng))
    witness = witness_transform(source, target)
    assert np.max(np.abs(witness.apply(source.y) - target.y)) <= 1e-8 * np.linalg.norm(source.y)


def test_batch_with_invariants_hits_requested_values():
    rng = np.random.default_rng(9)
    batch = batch_with_invariants(5, 2.5, 4.0, 1.2, -0.7, rng=rng)
    inv = batch.invariant_triple()
    assert abs(inv.norm_x_sq - 2.5) <= 1e-10
    assert abs(inv.norm_y_sq - 4.0) <= 1e-10
    assert abs(inv.dot_xy - 1.2) <= 1e-10
    assert abs(inv.symp_xy + 0.7) <= 1e-10


def test_batch_with_invariants_rejects_cauchy_schwarz_violation():
    with pytest.raises(ValueError):
        batch_with_invariants(3, 1.0, 1.0, 0.9, 0.9)


def test_audit_identical_ensembles_consistent_with_null():
    batch = batch_with_invariants(4, 8.0, 16.0, 3.0, 2.0)
    report = invariant_audit(lambda rng: (batch, batch), 600, np.random.default_rng(10))
    assert not report.underpowered
    for result in report.results.values():
        assert result.pvalue > 0.01


def test_audit_fixed_rotation_related_ensembles_consistent_with_null():
    rng = np.random.default_rng(11)
    batch = batch_with_invariants(4, 8.0, 16.0, 3.0, 2.0)
    rotated = apply_symmetrization(batch, haar_orthogonal_symplectic(4, rng))
    report = invariant_audit(lambda r: (batch, rotated), 600, np.random.default_rng(12))
    for result in report.results.values():
        assert result.pvalue > 0.01


def test_audit_opposite_symplectic_products_reports_measurement():
    # Pure measurement: same (|x|^2, |y|^2, x.y), opposite symplectic
    # product; the report carries the KS statistics without a verdict.
    plus = batch_with_invariants(4, 8.0, 16.0, 3.0, 2.0)
    minus = batch_with_invariants(4, 8.0, 16.0, 3.0, -2.0)
    report = invariant_audit(lambda rng: (plus, minus), 400, np.random.default_rng(13))
    assert set(report.results) == {"y_first_coord", "mode0_dot", "mode0_symplectic", "mode0_x_power"}
    for result in report.results.values():
        assert 0.0 <= result.statistic <= 1.0
        assert 0.0 <= result.pvalue <= 1.0


def test_audit_underpowered_flag():
    batch = batch_with_invariants(2, 1.0, 1.0, 0.0, 0.0)
    report = invariant_audit(lambda rng: (batch, batch), 50, np.random.default_rng(14))
    assert report.underpowered


def test_symmetrized_statistics_well_defined():
    # Two unrelated batches sharing all four invariants produce statistically
    # indistinguishable symmetrized ensembles.
    rng = np.random.default_rng(30)
    batch_a = batch_with_invariants(5, 6.0, 14.0, 2.5, -1.5, rng=rng)
    batch_b = batch_with_invariants(5, 6.0, 14.0, 2.5, -1.5, rng=rng)
    assert np.max(np.abs(batch_a.x - batch_b.x)) > 0.1  # genuinely different vectors
    report = invariant_audit(lambda r: (batch_a, batch_b), 1000, np.random.default_rng(31))
    for name, result in report.results.items():
        assert result.pvalue > 0.01, (name, result)


def test_identity_design_reproduces_raw_moments():
    batch = SampleBatch(np.array([0.3, -0.4, 1.1, 0.2]), np.array([0.5, 0.1, -0.2, 0.9]))
    design = [ComplexUnitary(2, np.eye(2, dtype=complex))]
    report = finite_design_average(lambda rng: batch, design, 1, np.random.default_rng(15), samples=8)
    amps = {"x": batch.x[0::2] + 1j * batch.x[1::2], "y": batch.y[0::2] + 1j * batch.y[1::2]}
    for side, amp in amps.items():
        for mode in range(2):
            for p, q in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
                key = f"{side}:{mode}:{p}:{q}"
                raw = amp[mode] ** p * np.conj(amp[mode]) ** q
                assert abs(report.moments_design[key] - raw) < 1e-12


def test_roots_of_unity_design_phase_moments():
    # Orders below the design size match Haar phase moments exactly;
    # order N aliases back to 1, showing the degree bound is sharp.
    batch = SampleBatch(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    design = roots_of_unity_design(4)
    report = finite_design_average(lambda rng: batch, design, 2, np.random.default_rng(16), samples=4)
    for p in range(5):
        for q in range(5):
            if not 1 <= p + q <= 4:
                continue
            val = report.moments_design[f"x:0:{p}:{q}"]
            if p == q:
                assert abs(val - 1.0) <= 1e-12
            elif abs(p - q) < 4:
                assert abs(val) <= 1e-12
            else:
                assert abs(val - 1.0) <= 1e-12  # |p-q| = 4 aliases with a 4-element design


def test_haar_sample_design_self_consistency():
    # A design made of Haar samples must agree with a fresh Haar run within
    # Monte Carlo error.
    rng = np.random.default_rng(17)
    design = haar_design(2, 400, rng)

    def sampler(r):
        return SampleBatch(r.standard_normal(4), r.standard_normal(4))

    report = finite_design_average(sampler, design, 2, rng, samples=50)
    for degree, disc in report.max_discrepancy_by_degree.items():
        scale = report.stderr_by_degree[degree]
        assert disc <= 8 * scale + 1e-12


def test_design_validation():
    batch = SampleBatch(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        finite_design_average(lambda rng: batch, [], 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        roots_of_unity_design(0)


def test_invariant_triple_relative_scales():
    a = InvariantTriple(1.0, 4.0, 0.0, 0.0)
    b = InvariantTriple(1.0, 4.0, 2e-10, 0.0)
    # dot deviation is measured against the Cauchy-Schwarz scale sqrt(1*4).
    assert abs(a.relative_deviations(b)["dot_xy"] - 1e-10) < 1e-25
