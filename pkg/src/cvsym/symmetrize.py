"""Randomization of paired quadrature data over O(2n,R) ∩ Sp(2n,R).

Contains the data-level symmetrization map, an explicit constructive
witness connecting any two batches with matching invariants, an empirical
audit of which statistics the symmetrized distribution can depend on, and
a finite-design substitute for full Haar averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import InvalidDimensionError, PreconditionError
from .linalg import (
    ComplexUnitary,
    complex_modes,
    haar_orthogonal_symplectic,
    haar_unitary_stack,
    unitary_to_symplectic,
)
from .samples import SampleBatch

WITNESS_TOL = 1e-8
# Cauchy-Schwarz equality detection: |<a|b>|^2 >= (1 - COLINEAR_TOL) |a|^2 |b|^2
COLINEAR_TOL = 1e-12
# Gram-Schmidt completion drops candidate vectors whose residual is below this.
COMPLETION_RESIDUAL_TOL = 1e-10


def apply_symmetrization(batch, transform):
    """Rotate both halves of a batch by the same element of O(2n,R) ∩ Sp(2n,R)."""
    if transform.n * 2 != batch.x.size:
        raise InvalidDimensionError(
            f"transform acts on 2n={2 * transform.n} but batch has length {batch.x.size}")
    return SampleBatch(transform.apply(batch.x), transform.apply(batch.y))


def _phase_align_unitary(v, vp, n):
    """A unitary mapping v to vp for equal-norm complex vectors.

    Composes a phase rotation in the complex line of v (making <vp|v> real
    and nonnegative) with the Householder reflection across the mediator
    hyperplane of the rotated vector and vp.  The plain reflection alone
    maps v to vp only when <vp|v> is already real.
    """
    eye = np.eye(n, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return eye
    u = eye
    c = np.vdot(vp, v)
    if abs(c.imag) > 0.0 and abs(c) > 0.0:
        phase = (c / abs(c)).conjugate()
        vhat = v / nv
        u = eye + (phase - 1.0) * np.outer(vhat, vhat.conj())
        v = phase * v
    w = v - vp
    w_norm_sq = np.vdot(w, w).real
    if w_norm_sq > (np.finfo(float).eps * nv) ** 2:
        reflection = eye - 2.0 * np.outer(w, w.conj()) / w_norm_sq
        u = reflection @ u
    return u


def _orthonormal_extension(vectors, n):
    """Orthonormal basis of C^n whose first columns span ``vectors`` in order.

    Modified Gram-Schmidt with one re-orthogonalization pass; the basis is
    completed with standard basis vectors, skipping candidates whose
    residual after projection falls below COMPLETION_RESIDUAL_TOL.
    """
    basis = []

    def _orthogonalize(vec):
        w = vec.astype(complex)
        for _ in range(2):
            for e in basis:
                w = w - np.vdot(e, w) * e
        return w

    for vec in vectors:
        w = _orthogonalize(vec)
        norm = np.linalg.norm(w)
        if norm <= COMPLETION_RESIDUAL_TOL * max(np.linalg.norm(vec), 1.0):
            raise PreconditionError("input vectors are numerically dependent")
        basis.append(w / norm)

    for j in range(n):
        if len(basis) == n:
            break
        cand = np.zeros(n, dtype=complex)
        cand[j] = 1.0
        w = _orthogonalize(cand)
        norm = np.linalg.norm(w)
        if norm < COMPLETION_RESIDUAL_TOL:
            continue
        basis.append(w / norm)
    if len(basis) != n:
        raise RuntimeError("basis completion failed")
    return np.column_stack(basis)


def witness_transform(source, target, tol=WITNESS_TOL):
    """An element of O(2n,R) ∩ Sp(2n,R) mapping source to target.

    Both batches must agree on all four invariants (|x|^2, |y|^2, x.y and
    the symplectic product) to relative tolerance ``tol``; the symplectic
    product is required because the construction matches the full complex
    inner product of the mode amplitudes, whose imaginary part it is.

    Construction: complexify both pairs, then either reflect across the
    mediator hyperplane (colinear pairs, with a phase pre-rotation) or map
    Gram-Schmidt orthonormal bases built from each pair onto one another.
    """
    inv_s = source.invariant_triple()
    inv_t = target.invariant_triple()
    if source.x.size != target.x.size:
        raise InvalidDimensionError("source and target dimensions differ")
    devs = inv_s.relative_deviations(inv_t)
    bad = {name: dev for name, dev in devs.items() if dev > tol}
    if bad:
        worst = max(bad, key=bad.get)
        raise PreconditionError(
            f"invariant mismatch: {worst} differs by relative {bad[worst]:.3e} (> {tol:.1e}); "
            f"all mismatches: {sorted(bad)}")

    n = source.n
    a, b = complex_modes(source.x), complex_modes(source.y)
    ap, bp = complex_modes(target.x), complex_modes(target.y)
    norm_a_sq = np.vdot(a, a).real
    norm_b_sq = np.vdot(b, b).real
    inner_ab = np.vdot(a, b)

    colinear = abs(inner_ab) ** 2 >= (1.0 - COLINEAR_TOL) * norm_a_sq * norm_b_sq
    if colinear or n == 1:
        # The pair lies on one complex line (possibly degenerate); mapping the
        # longer vector carries the other along with the shared coefficient.
        if norm_a_sq >= norm_b_sq:
            u = _phase_align_unitary(a, ap, n)
        else:
            u = _phase_align_unitary(b, bp, n)
    else:
        basis_src = _orthonormal_extension([a, b], n)
        basis_tgt = _orthonormal_extension([ap, bp], n)
        u = basis_tgt @ basis_src.conj().T

    transform = unitary_to_symplectic(ComplexUnitary(n, u))
    scale = max(np.linalg.norm(source.x), np.linalg.norm(source.y), 1e-300)
    resid = max(np.max(np.abs(transform.apply(source.x) - target.x)),
                np.max(np.abs(transform.apply(source.y) - target.y))) / scale
    if resid > tol:
        raise RuntimeError(f"witness construction failed: mapping residual {resid:.3e} > {tol:.1e}")
    return transform


def batch_with_invariants(n, norm_x_sq, norm_y_sq, dot_xy, symp_xy, rng=None):
    """Construct a batch whose invariants take the prescribed values.

    With an ``rng`` the batch is additionally rotated by a Haar-random
    element of the group, randomizing its orientation without touching the
    invariants.  Requires dot_xy^2 + symp_xy^2 <= norm_x_sq * norm_y_sq.
    """
    if n < 1:
        raise InvalidDimensionError("n must be >= 1")
    if norm_x_sq < 0 or norm_y_sq < 0:
        raise ValueError("squared norms must be nonnegative")
    cross = dot_xy ** 2 + symp_xy ** 2
    budget = norm_x_sq * norm_y_sq
    if cross > budget * (1.0 + 1e-12):
        raise ValueError("dot_xy^2 + symp_xy^2 exceeds the Cauchy-Schwarz budget")
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    if norm_x_sq == 0.0:
        if cross != 0.0:
            raise ValueError("zero x-vector forces zero cross products")
        b[0] = np.sqrt(norm_y_sq)
    else:
        a[0] = np.sqrt(norm_x_sq)
        b[0] = (dot_xy + 1j * symp_xy) / a[0]
        residual = norm_y_sq - cross / norm_x_sq
        residual = max(residual, 0.0)
        if residual > 0.0:
            if n < 2:
                raise InvalidDimensionError("n must be >= 2 unless the pair is colinear")
            b[1] = np.sqrt(residual)
    x = np.empty(2 * n)
    y = np.empty(2 * n)
    x[0::2], x[1::2] = a.real, a.imag
    y[0::2], y[1::2] = b.real, b.imag
    batch = SampleBatch(x, y)
    if rng is not None:
        batch = apply_symmetrization(batch, haar_orthogonal_symplectic(n, rng))
    return batch


def default_audit_statistics():
    """Named scalar statistics evaluated on a symmetrized batch.

    Each callable takes stacked (x, y) arrays of shape (trials, 2n) and
    returns one value per trial.
    """
    return {
        "y_first_coord": lambda x, y: y[:, 0],
        "mode0_dot": lambda x, y: x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1],
        "mode0_symplectic": lambda x, y: x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0],
        "mode0_x_power": lambda x, y: x[:, 0] ** 2 + x[:, 1] ** 2,
    }


def collect_audit_samples(pair_generator, trials, rng, statistics=None):
    """Symmetrize generator output and evaluate the audit statistics.

    Returns ``{name: (samples_a, samples_b)}``: for every trial the
    generator yields one batch per ensemble and each is randomized by an
    independent Haar-random transformation.
    """
    statistics = statistics or default_audit_statistics()
    rows = {name: ([], []) for name in statistics}
    for _ in range(trials):
        batch_a, batch_b = pair_generator(rng)
        sym_a = apply_symmetrization(batch_a, haar_orthogonal_symplectic(batch_a.n, rng))
        sym_b = apply_symmetrization(batch_b, haar_orthogonal_symplectic(batch_b.n, rng))
        for name, fn in statistics.items():
            rows[name][0].append(float(fn(sym_a.x[None], sym_a.y[None])[0]))
            rows[name][1].append(float(fn(sym_b.x[None], sym_b.y[None])[0]))
    return {name: (np.array(va), np.array(vb)) for name, (va, vb) in rows.items()}


@dataclass(frozen=True)
class AuditResult:
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class InvariantAuditReport:
    trials: int
    underpowered: bool
    results: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "trials": self.trials,
            "underpowered": self.underpowered,
            "results": {k: {"ks_statistic": v.statistic, "pvalue": v.pvalue}
                        for k, v in self.results.items()},
        }


def invariant_audit(pair_generator, trials, rng, statistics=None):
    """Two-sample KS comparison of symmetrized ensembles.

    The generator controls what the two ensembles share (typically the
    three norm/dot invariants) and where they differ (typically the sign
    of the symplectic product).  Fewer than 100 trials sets the
    ``underpowered`` flag.
    """
    samples = collect_audit_samples(pair_generator, trials, rng, statistics)
    results = {}
    for name, (va, vb) in samples.items():
        ks = sps.ks_2samp(va, vb)
        results[name] = AuditResult(float(ks.statistic), float(ks.pvalue))
    return InvariantAuditReport(trials=trials, underpowered=trials < 100, results=results)


def roots_of_unity_design(count):
    """The single-mode design {e^{2 pi i j / count}}, exact for phase moments of order < count."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [ComplexUnitary(1, np.array([[np.exp(2j * np.pi * j / count)]])) for j in range(count)]


def haar_design(n, size, rng):
    """A finite design made of Haar samples (an approximate design of any degree)."""
    return [ComplexUnitary(n, u) for u in haar_unitary_stack(n, size, rng)]


@dataclass(frozen=True)
class DesignCompareReport:
    n: int
    degree: int
    design_size: int
    samples: int
    matched_count: int
    moments_design: dict
    moments_haar: dict
    max_discrepancy_by_degree: dict
    stderr_by_degree: dict

    def to_dict(self):
        def _cplx(d):
            return {k: [v.real, v.imag] for k, v in d.items()}
        return {
            "n": self.n,
            "degree": self.degree,
            "design_size": self.design_size,
            "samples": self.samples,
            "matched_count": self.matched_count,
            "moments_design": _cplx(self.moments_design),
            "moments_haar": _cplx(self.moments_haar),
            "max_discrepancy_by_degree": dict(self.max_discrepancy_by_degree),
            "stderr_by_degree": dict(self.stderr_by_degree),
        }


def _monomial_exponents(degree):
    return [(p, q) for total in range(1, 2 * degree + 1)
            for p in range(total + 1) for q in [total - p]]


def finite_design_average(sampler, design, degree, rng, samples=200):
    """Moments of symmetrized data: finite-design average vs Haar Monte Carlo.

    For every mode amplitude on each side, monomials a^p conj(a)^q with
    1 <= p+q <= 2*degree are averaged (i) over the design elements and
    (ii) over fresh Haar draws matched to the same sample count, and the
    worst absolute difference per total degree is reported.
    """
    if not design:
        raise ValueError("design must be non-empty")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    n = design[0].n
    if any(u.n != n for u in design):
        raise InvalidDimensionError("design elements have mixed mode counts")
    batches = [sampler(rng) for _ in range(samples)]
    if any(batch.n != n for batch in batches):
        raise InvalidDimensionError("sampler output does not match the design's mode count")
    amps = {
        "x": np.array([complex_modes(batch.x) for batch in batches]),
        "y": np.array([complex_modes(batch.y) for batch in batches]),
    }
    replicates = len(design)
    design_stack = np.array([u.entries for u in design])
    haar_stack = haar_unitary_stack(n, samples * replicates, rng).reshape(samples, replicates, n, n)

    exponents = _monomial_exponents(degree)
    moments_design, moments_haar, stderr_haar = {}, {}, {}
    for side, base in amps.items():
        # (samples, replicates, n): each batch pushed through every element.
        sym_design = np.einsum("rij,sj->sri", design_stack, base)
        sym_haar = np.einsum("srij,sj->sri", haar_stack, base)
        for p, q in exponents:
            term_d = sym_design ** p * np.conj(sym_design) ** q
            term_h = sym_haar ** p * np.conj(sym_haar) ** q
            mean_d = term_d.mean(axis=(0, 1))
            mean_h = term_h.mean(axis=(0, 1))
            count = samples * replicates
            se = np.sqrt((term_h.real.var(axis=(0, 1)) + term_h.imag.var(axis=(0, 1))) / count)
            for mode in range(n):
                key = f"{side}:{mode}:{p}:{q}"
                moments_design[key] = complex(mean_d[mode])
                moments_haar[key] = complex(mean_h[mode])
                stderr_haar[key] = float(se[mode])

    max_disc, max_se = {}, {}
    for (p, q) in exponents:
        d = p + q
        for side in amps:
            for mode in range(n):
                key = f"{side}:{mode}:{p}:{q}"
                disc = abs(moments_design[key] - moments_haar[key])
                max_disc[d] = max(max_disc.get(d, 0.0), disc)
                max_se[d] = max(max_se.get(d, 0.0), stderr_haar[key])
    return DesignCompareReport(
        n=n, degree=degree, design_size=len(design), samples=samples,
        matched_count=samples * replicates,
        moments_design=moments_design, moments_haar=moments_haar,
        max_discrepancy_by_degree=max_disc, stderr_by_degree=max_se)
