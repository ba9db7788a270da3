"""Collective-Gaussian-attack key rate from estimated channel parameters.

All formulas are pinned to the package noise convention (see
:mod:`cvsym.protocol`): data y = sqrt(T) x + noise with conditional
variance 1 + T xi / 2 per coordinate.  The entangled-picture covariance
matrix in shot-noise units is then

    gamma_AB = [[V I2, c sigma_z], [c sigma_z, B I2]]

with V = variance_a + 1, B = T (V - 1) + 1 + T xi and
c = sqrt(T (V^2 - 1)).  The heterodyne mutual information and the Holevo
bound (via the purification argument and the Gaussian entropy function of
the symplectic eigenvalues) follow from this single construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovarianceError, PreconditionError

MIN_ESTIMATION_COORDS = 2000  # 10^3 modes


@dataclass(frozen=True)
class ChannelEstimate:
    """Estimated channel parameters plus the reconciliation efficiency."""

    transmittance: float
    excess_noise: float
    v_variance: float
    beta: float
    se_transmittance: float = 0.0
    se_excess_noise: float = 0.0
    samples: int = 0

    def validate(self):
        problems = []
        if not 0.0 <= self.transmittance <= 1.0:
            problems.append("transmittance outside [0, 1]")
        if self.excess_noise < 0:
            problems.append("excess_noise < 0")
        if self.v_variance < 1.0:
            problems.append("v_variance < 1")
        if not 0.0 < self.beta <= 1.0:
            problems.append("beta outside (0, 1]")
        if problems:
            raise ValueError("invalid channel estimate: " + "; ".join(problems))


def estimate_channel(x, y, modulation_variance, beta=0.95):
    """Moment-based channel estimate from paired coordinate data.

    T_hat = (<xy> / <x^2>)^2 and xi_hat solves the conditional-variance
    formula Var(y - sqrt(T) x) = 1 + T xi / 2.  Standard errors are
    first-order (delta method) and ignore the T-xi error correlation.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise PreconditionError("x and y must have equal size")
    if x.size < MIN_ESTIMATION_COORDS:
        raise PreconditionError(f"need at least {MIN_ESTIMATION_COORDS} coordinates, got {x.size}")
    count = x.size
    sxx = float(np.mean(x * x))
    if sxx == 0.0:
        raise DegenerateCovarianceError("<x^2> vanishes; transmittance is unidentifiable")
    sxy = float(np.mean(x * y))
    ratio = sxy / sxx
    influence = (x * y - ratio * x * x) / sxx
    se_ratio = float(np.std(influence) / np.sqrt(count))
    t_raw = ratio * ratio
    se_t = 2.0 * abs(ratio) * se_ratio

    residual = y - ratio * x
    var_res = float(np.mean(residual * residual))
    se_var = float(np.std(residual * residual) / np.sqrt(count))
    t_hat = min(max(t_raw, 0.0), 1.0)
    if t_raw > 0.0:
        xi_raw = 2.0 * (var_res - 1.0) / t_raw
        se_xi = 2.0 * np.sqrt((se_var / t_raw) ** 2 + ((var_res - 1.0) * se_t / t_raw ** 2) ** 2)
    else:
        xi_raw, se_xi = 0.0, float("inf")
    return ChannelEstimate(
        transmittance=t_hat, excess_noise=max(xi_raw, 0.0),
        v_variance=float(modulation_variance) + 1.0, beta=float(beta),
        se_transmittance=se_t, se_excess_noise=float(se_xi), samples=count)


def entropy_g(nu):
    """Gaussian entropy of a symplectic eigenvalue: G((nu-1)/2) with G(x) = (x+1)log2(x+1) - x log2 x."""
    nu = max(float(nu), 1.0)
    xp = (nu + 1.0) / 2.0
    xm = (nu - 1.0) / 2.0
    out = xp * np.log2(xp)
    if xm > 0.0:
        out -= xm * np.log2(xm)
    return float(out)


def two_mode_symplectic_eigenvalues(va, vb, cc):
    """Symplectic spectrum of [[va I2, cc sigma_z], [cc sigma_z, vb I2]]."""
    delta = va * va + vb * vb - 2.0 * cc * cc
    det = va * vb - cc * cc
    disc = max(delta * delta - 4.0 * det * det, 0.0)
    root = np.sqrt(disc)
    nu_plus = np.sqrt(max((delta + root) / 2.0, 0.0))
    nu_minus = np.sqrt(max((delta - root) / 2.0, 0.0))
    return float(nu_plus), float(nu_minus)


@dataclass(frozen=True)
class KeyRateResult:
    rate: float
    mutual_information: float
    holevo_bound: float
    symplectic_eigenvalues: tuple
    conditional_eigenvalue: float
    no_key: bool

    def to_dict(self):
        return {
            "rate": self.rate,
            "mutual_information": self.mutual_information,
            "holevo_bound": self.holevo_bound,
            "symplectic_eigenvalues": list(self.symplectic_eigenvalues),
            "conditional_eigenvalue": self.conditional_eigenvalue,
            "no_key": self.no_key,
        }


def gaussian_keyrate(estimate):
    """Reverse-reconciliation rate beta * I_AB - chi_BE in bits per symbol.

    I_AB is the two-quadrature Gaussian mutual information of the
    heterodyne data; chi_BE comes from the purification argument:
    S(E) = S(AB) and S(E|y_B) = S(A|y_B), each evaluated through
    :func:`entropy_g` on symplectic eigenvalues.  Negative rates are
    clamped to zero and flagged.
    """
    estimate.validate()
    t = estimate.transmittance
    xi = estimate.excess_noise
    v = estimate.v_variance
    va = v
    vb = t * (v - 1.0) + 1.0 + t * xi
    cc = np.sqrt(t * (v * v - 1.0))

    cond_b = vb - cc * cc / (va + 1.0)  # Bob's variance given Alice's heterodyne outcome
    mutual_information = float(np.log2((vb + 1.0) / (cond_b + 1.0)))

    nu_plus, nu_minus = two_mode_symplectic_eigenvalues(va, vb, cc)
    nu_cond = max(va - cc * cc / (vb + 1.0), 1.0)  # Alice's spectrum after Bob's heterodyne
    holevo = entropy_g(nu_plus) + entropy_g(nu_minus) - entropy_g(nu_cond)
    holevo = max(holevo, 0.0)

    raw = estimate.beta * mutual_information - holevo
    return KeyRateResult(
        rate=max(raw, 0.0), mutual_information=mutual_information, holevo_bound=holevo,
        symplectic_eigenvalues=(nu_plus, nu_minus), conditional_eigenvalue=float(nu_cond),
        no_key=raw < 0.0)
