"""Haar-random unitaries and their phase-space image in O(2n,R) ∩ Sp(2n,R).

Vectors of quadrature data use the *interleaved* ordering
``(q_1, p_1, q_2, p_2, ..., q_n, p_n)`` everywhere in this package; the
q-first ordering ``(q_1..q_n, p_1..p_n)`` appears only inside
:func:`unitary_to_symplectic`, which is the single conversion site.

Mode ``k`` of an interleaved vector ``v`` carries the complex amplitude
``a_k = v[2k] + 1j * v[2k+1]``.  A unitary ``U`` acting on the amplitude
vector corresponds to the real matrix returned by
:func:`unitary_to_symplectic` acting on the interleaved vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, PreconditionError

UNITARITY_TOL = 1e-12


def symplectic_form(n):
    """The 2n x 2n form Omega for interleaved vectors: diag of [[0,1],[-1,0]] blocks."""
    omega = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    omega[2 * idx, 2 * idx + 1] = 1.0
    omega[2 * idx + 1, 2 * idx] = -1.0
    return omega


def omega_apply(m):
    """Compute Omega @ m for interleaved ordering without building Omega.

    Acts on axis -2, so it works for stacked matrices and for column
    vectors shaped (..., 2n, k).
    """
    out = np.empty_like(m)
    out[..., 0::2, :] = m[..., 1::2, :]
    out[..., 1::2, :] = -m[..., 0::2, :]
    return out


def qfirst_indices(n):
    """Gather indices mapping an interleaved vector to q-first ordering."""
    return np.concatenate([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])


def complex_modes(v):
    """Pack an interleaved real 2n-vector into its n complex mode amplitudes."""
    v = np.asarray(v)
    if v.shape[-1] % 2:
        raise InvalidDimensionError(f"interleaved vector length must be even, got {v.shape[-1]}")
    return v[..., 0::2] + 1j * v[..., 1::2]


def interleave_modes(a):
    """Inverse of :func:`complex_modes`."""
    a = np.asarray(a)
    out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
    out[..., 0::2] = a.real
    out[..., 1::2] = a.imag
    return out


@dataclass(frozen=True)
class OrderingPermutation:
    """Reordering between interleaved and q-first vector conventions."""

    n: int
    to_qfirst: bool = True

    def indices(self):
        perm = qfirst_indices(self.n)
        return perm if self.to_qfirst else np.argsort(perm)

    def inverse(self):
        return OrderingPermutation(self.n, not self.to_qfirst)


def reorder(v, perm):
    """Apply an :class:`OrderingPermutation` to a real 2n-vector."""
    v = np.asarray(v)
    if v.shape[-1] % 2:
        raise InvalidDimensionError(f"vector length must be even, got {v.shape[-1]}")
    if v.shape[-1] != 2 * perm.n:
        raise InvalidDimensionError(f"vector length {v.shape[-1]} does not match 2n={2 * perm.n}")
    return v[..., perm.indices()]


@dataclass(frozen=True)
class ComplexUnitary:
    """An n x n unitary matrix together with its mode count."""

    n: int
    entries: np.ndarray

    def unitarity_residual(self):
        u = self.entries
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.n))))

    @classmethod
    def from_matrix(cls, entries, tol=UNITARITY_TOL):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
            raise InvalidDimensionError(f"expected a square non-empty matrix, got shape {entries.shape}")
        u = cls(entries.shape[0], entries)
        res = u.unitarity_residual()
        if res > tol:
            raise PreconditionError(f"matrix is not unitary: residual {res:.3e} > {tol:.1e}")
        return u


@dataclass(frozen=True)
class SymplecticOrthogonal:
    """A 2n x 2n matrix in O(2n,R) ∩ Sp(2n,R), interleaved ordering.

    ``generator`` is the unitary U with U = X - iY whose real image this
    matrix is; in q-first ordering the matrix has block form
    [[X, Y], [-Y, X]].
    """

    n: int
    matrix: np.ndarray
    generator: ComplexUnitary

    def orthogonality_residual(self):
        return float(orthogonality_residual(self.matrix))

    def symplecticity_residual(self):
        return float(symplecticity_residual(self.matrix))

    def apply(self, v):
        v = np.asarray(v)
        if v.shape[-1] != 2 * self.n:
            raise InvalidDimensionError(f"vector length {v.shape[-1]} does not match 2n={2 * self.n}")
        return v @ self.matrix.T

    def compose(self, other):
        """Return the transformation 'self after other'."""
        if other.n != self.n:
            raise InvalidDimensionError("mode counts differ")
        gen = ComplexUnitary(self.n, self.generator.entries @ other.generator.entries)
        return SymplecticOrthogonal(self.n, self.matrix @ other.matrix, gen)


def orthogonality_residual(r):
    """max |R^T R - 1| over entries; accepts stacked matrices (..., 2n, 2n)."""
    r = np.asarray(r)
    d = r.shape[-1]
    g = np.swapaxes(r, -1, -2) @ r
    g[..., np.arange(d), np.arange(d)] -= 1.0
    return np.max(np.abs(g), axis=(-2, -1))


def symplecticity_residual(r):
    """max |R^T Omega R - Omega| over entries; accepts stacked matrices."""
    r = np.asarray(r)
    n = r.shape[-1] // 2
    g = np.swapaxes(r, -1, -2) @ omega_apply(r)
    idx = np.arange(n)
    g[..., 2 * idx, 2 * idx + 1] -= 1.0
    g[..., 2 * idx + 1, 2 * idx] += 1.0
    return np.max(np.abs(g), axis=(-2, -1))


def haar_unitary_stack(n, size, rng):
    """Sample ``size`` independent Haar unitaries as an array (size, n, n).

    Uses QR of a complex Ginibre matrix with the triangular factor's
    diagonal normalized to positive reals; without that phase correction
    the QR output is not Haar-distributed.
    """
    if n < 1:
        raise InvalidDimensionError(f"mode count must be >= 1, got {n}")
    z = rng.standard_normal((size, n, n)) + 1j * rng.standard_normal((size, n, n))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phases = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    return q * phases[..., None, :]


def haar_unitary(n, rng):
    """Draw one Haar-distributed element of U(n). Deterministic given ``rng``."""
    return ComplexUnitary(n, haar_unitary_stack(n, 1, rng)[0])


def realify_stack(u_stack):
    """Real interleaved-ordering image of a stack of unitaries (size, n, n) -> (size, 2n, 2n).

    No unitarity validation; callers that accept untrusted input should go
    through :func:`unitary_to_symplectic`.
    """
    u_stack = np.asarray(u_stack)
    n = u_stack.shape[-1]
    x = u_stack.real
    y = -u_stack.imag
    # q-first block form [[X, Y], [-Y, X]], then relabel rows/columns to interleaved.
    r_qf = np.empty(u_stack.shape[:-2] + (2 * n, 2 * n))
    r_qf[..., :n, :n] = x
    r_qf[..., :n, n:] = y
    r_qf[..., n:, :n] = -y
    r_qf[..., n:, n:] = x
    perm = qfirst_indices(n)
    out = np.empty_like(r_qf)
    out[..., perm[:, None], perm[None, :]] = r_qf
    return out


def unitary_to_symplectic(u, tol=UNITARITY_TOL):
    """Map U = X - iY in U(n) to its matrix in O(2n,R) ∩ Sp(2n,R).

    The returned matrix acts on interleaved vectors so that the image of
    mode amplitudes ``a`` under U matches the matrix action on the real
    vector: ``complex_modes(R @ v) == U @ complex_modes(v)``.
    """
    if not isinstance(u, ComplexUnitary):
        u = ComplexUnitary.from_matrix(u, tol=tol)
    else:
        res = u.unitarity_residual()
        if res > tol:
            raise PreconditionError(f"matrix is not unitary: residual {res:.3e} > {tol:.1e}")
    return SymplecticOrthogonal(u.n, realify_stack(u.entries[None])[0], u)


def haar_orthogonal_symplectic(n, rng):
    """Draw a Haar-distributed element of O(2n,R) ∩ Sp(2n,R) (isomorphic to U(n))."""
    return unitary_to_symplectic(haar_unitary(n, rng))


def haar_orthogonal_symplectic_stack(n, size, rng):
    """Stack version of :func:`haar_orthogonal_symplectic`, returns (size, 2n, 2n)."""
    return realify_stack(haar_unitary_stack(n, size, rng))
