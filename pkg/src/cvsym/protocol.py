"""Prepare-and-measure simulation: Gaussian modulation, channel, heterodyne, postselection.

Noise convention (used consistently by every module and test)
--------------------------------------------------------------
Data lives in heterodyne-outcome units where the outcome of measuring the
vacuum has variance 1 per coordinate.  Alice's coordinates are coherent
amplitudes with per-coordinate variance ``variance_a / 2`` so a mode's
complex amplitude has variance ``variance_a`` (the modulation variance,
V - 1 in shot-noise units).  For a channel with transmittance T and excess
noise ``xi`` (defined at the channel output, per quadrature pair):

    y = sqrt(T) * x + g,   Var(g) = 1 + T * xi / 2   per coordinate.

Equivalently, in raw quadrature units the conditional noise is one vacuum
unit, plus one extra vacuum unit added by heterodyne detection, plus the
excess-noise term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError


@dataclass(frozen=True)
class ModulationParams:
    """Alice's Gaussian modulation: mode count and modulation variance (V - 1, SNU)."""

    n: int
    variance_a: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidDimensionError("mode count must be >= 1")
        if not self.variance_a > 0:
            raise ValueError("variance_a must be positive")


@dataclass(frozen=True)
class GaussianMixture:
    """Per-mode mixture of Gaussian channels; replaces the base (T, xi) when set."""

    weights: tuple
    transmittances: tuple
    excess_noises: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        t = tuple(float(v) for v in self.transmittances)
        x = tuple(float(v) for v in self.excess_noises)
        if not (len(w) == len(t) == len(x)) or not w:
            raise ValueError("mixture components must have matching non-zero lengths")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if any(not 0.0 <= v <= 1.0 for v in t):
            raise ValueError("component transmittances must lie in [0, 1]")
        if any(v < 0 for v in x):
            raise ValueError("component excess noises must be >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "transmittances", t)
        object.__setattr__(self, "excess_noises", x)


@dataclass(frozen=True)
class PhaseDiffusion:
    """Per-mode random phase rotation with standard deviation sigma (radians)."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class ChannelModel:
    """Gaussian loss/excess-noise core with an optional non-Gaussian perturbation."""

    transmittance: float
    excess_noise: float
    perturbation: object = None

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError("transmittance must lie in [0, 1]")
        if self.excess_noise < 0:
            raise ValueError("excess_noise must be >= 0")
        if self.perturbation is not None and not isinstance(
                self.perturbation, (GaussianMixture, PhaseDiffusion)):
            raise ValueError("perturbation must be None, GaussianMixture or PhaseDiffusion")

    def coordinate_moments(self, modulation):
        """Population (⟨x²⟩, ⟨y²⟩, ⟨xy⟩) per coordinate under this channel."""
        a = modulation.variance_a / 2.0
        if isinstance(self.perturbation, GaussianMixture):
            mix = self.perturbation
            b = sum(w * (t * a + 1.0 + t * xi / 2.0)
                    for w, t, xi in zip(mix.weights, mix.transmittances, mix.excess_noises))
            c = sum(w * np.sqrt(t) * a for w, t in zip(mix.weights, mix.transmittances))
            return a, float(b), float(c)
        t, xi = self.transmittance, self.excess_noise
        b = t * a + 1.0 + t * xi / 2.0
        c = np.sqrt(t) * a
        if isinstance(self.perturbation, PhaseDiffusion):
            c *= np.exp(-self.perturbation.sigma ** 2 / 2.0)
        return a, float(b), float(c)

    def mixture_components(self, modulation):
        """Per-mode Gaussian components as (weights, [(a, b, c), ...]), or None.

        Conditioned on its component every mode's coordinate pair is exactly
        bivariate normal; phase diffusion has no such finite decomposition,
        so it returns None and callers fall back to sampling.
        """
        a = modulation.variance_a / 2.0
        if isinstance(self.perturbation, PhaseDiffusion):
            return None
        if isinstance(self.perturbation, GaussianMixture):
            mix = self.perturbation
            comps = [(a, t * a + 1.0 + t * xi / 2.0, float(np.sqrt(t)) * a)
                     for t, xi in zip(mix.transmittances, mix.excess_noises)]
            return list(mix.weights), comps
        t, xi = self.transmittance, self.excess_noise
        return [1.0], [(a, t * a + 1.0 + t * xi / 2.0, float(np.sqrt(t)) * a)]


def alice_modulate(params, rng):
    """Draw Alice's interleaved 2n-vector of i.i.d. centered Gaussian coordinates."""
    return rng.normal(0.0, np.sqrt(params.variance_a / 2.0), size=2 * params.n)


def _stacked(x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] % 2:
        raise InvalidDimensionError("interleaved vectors must have even length")
    return x, squeeze


def channel_and_heterodyne(x, model, rng):
    """Bob's heterodyne outcomes for input x; supports stacked inputs (..., 2n).

    Implements the package noise convention documented in the module
    docstring.  For stacked inputs all per-mode draws are vectorized;
    draw order is fixed, so results are reproducible for a given rng.
    """
    x, squeeze = _stacked(x)
    trials, two_n = x.shape
    n = two_n // 2
    if isinstance(model.perturbation, GaussianMixture):
        mix = model.perturbation
        comp = rng.choice(len(mix.weights), size=(trials, n), p=np.array(mix.weights))
        t_mode = np.array(mix.transmittances)[comp]
        xi_mode = np.array(mix.excess_noises)[comp]
        t = np.repeat(t_mode, 2, axis=1)
        xi = np.repeat(xi_mode, 2, axis=1)
        signal = np.sqrt(t) * x
    elif isinstance(model.perturbation, PhaseDiffusion):
        t = model.transmittance
        xi = model.excess_noise
        phi = rng.normal(0.0, model.perturbation.sigma, size=(trials, n))
        cos, sin = np.cos(phi), np.sin(phi)
        rotated = np.empty_like(x)
        rotated[:, 0::2] = cos * x[:, 0::2] - sin * x[:, 1::2]
        rotated[:, 1::2] = sin * x[:, 0::2] + cos * x[:, 1::2]
        signal = np.sqrt(t) * rotated
    else:
        t = model.transmittance
        xi = model.excess_noise
        signal = np.sqrt(t) * x
    noise_sd = np.sqrt(1.0 + t * xi / 2.0)
    y = signal + noise_sd * rng.standard_normal(x.shape)
    return y[0] if squeeze else y


def gamma_factor(v):
    """The heterodyne projection factor sqrt(2 (V - 1) / (V + 1)) for variance V >= 1."""
    if v < 1.0:
        raise ValueError(f"two-mode squeezing variance must be >= 1, got {v}")
    return float(np.sqrt(2.0 * (v - 1.0) / (v + 1.0)))


def pm_to_eb(x, y, v):
    """Map prepare-and-measure samples to the coordinates of the entangled picture.

    Per mode, (x1, x2, y1, y2) -> (x1 / gamma, -x2 / gamma, y1, y2); Bob's
    data is untouched.  The map is a bijection for V > 1.
    """
    gamma = gamma_factor(v)
    if gamma == 0.0:
        raise ValueError("degenerate map: V must exceed 1")
    x, squeeze = _stacked(x)
    out = np.empty_like(x)
    out[:, 0::2] = x[:, 0::2] / gamma
    out[:, 1::2] = -x[:, 1::2] / gamma
    return (out[0] if squeeze else out), np.asarray(y, dtype=float)


def eb_to_pm(x, y, v):
    """Inverse of :func:`pm_to_eb`."""
    gamma = gamma_factor(v)
    if gamma == 0.0:
        raise ValueError("degenerate map: V must exceed 1")
    x, squeeze = _stacked(x)
    out = np.empty_like(x)
    out[:, 0::2] = x[:, 0::2] * gamma
    out[:, 1::2] = -x[:, 1::2] * gamma
    return (out[0] if squeeze else out), np.asarray(y, dtype=float)


@dataclass(frozen=True)
class PostselectionRegion:
    """Mode-local keep/discard rule applied to the measured data.

    rule values: "none" keeps everything; "amplitude-threshold" keeps modes
    with Bob's amplitude |beta_k| >= threshold; "product-threshold" keeps
    modes with |alpha_k| * |beta_k| >= threshold and matching coordinate
    signs on both quadratures.
    """

    rule: str = "none"
    threshold: float = 0.0

    def __post_init__(self):
        if self.rule not in ("none", "amplitude-threshold", "product-threshold"):
            raise ValueError(f"unknown postselection rule {self.rule!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


def postselect(x, y, region):
    """Per-mode boolean keep-mask and the acceptance fraction; deterministic."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size % 2:
        raise InvalidDimensionError("x and y must be equal-length even 1-d vectors")
    xs = x.reshape(-1, 2)
    ys = y.reshape(-1, 2)
    if region.rule == "none":
        mask = np.ones(xs.shape[0], dtype=bool)
    elif region.rule == "amplitude-threshold":
        mask = np.hypot(ys[:, 0], ys[:, 1]) >= region.threshold
    else:
        product = np.hypot(xs[:, 0], xs[:, 1]) * np.hypot(ys[:, 0], ys[:, 1])
        signs = (np.sign(xs[:, 0]) == np.sign(ys[:, 0])) & (np.sign(xs[:, 1]) == np.sign(ys[:, 1]))
        mask = (product >= region.threshold) & signs
    return mask, float(mask.mean())
