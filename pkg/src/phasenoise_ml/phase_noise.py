"""Circular distributions for the phase-noise increment.

A model is described by its Fourier coefficients ``alpha_l`` in

    p(phi) = (1/2pi) * (alpha_0 + 2 * sum_{l>=1} alpha_l cos(l phi)),  phi in [-pi, pi)

with ``alpha_0 = 1``. The von Mises law has ``alpha_l = I_l(kappa)/I_0(kappa)``
and additionally keeps its closed-form density.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ive

from .special import MAX_ORDER, bessel_ratios

VON_MISES = "von_mises"
GENERAL_FOURIER = "general_fourier"

COEFF_TOL = 1e-14


def wrap_phase(phi):
    """Wrap angles into [-pi, pi); values already inside are returned unchanged."""
    phi = np.asarray(phi, dtype=float)
    inside = (phi >= -np.pi) & (phi < np.pi)
    out = np.where(inside, phi, np.mod(phi + np.pi, 2 * np.pi) - np.pi)
    # mod can land exactly on pi after rounding
    out = np.where(out >= np.pi, out - 2 * np.pi, out)
    return float(out) if out.ndim == 0 else out


def fourier_coefficients(kappa: float, order: int) -> np.ndarray:
    """von Mises coefficients ``(alpha_0, ..., alpha_L)``, ``alpha_l = I_l(kappa)/I_0(kappa)``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [1, {MAX_ORDER}]")
    return bessel_ratios(order, float(kappa))


def default_order(kappa: float) -> int:
    """Smallest l with alpha_l < 1e-14, capped at the Bessel order cap."""
    alpha = fourier_coefficients(kappa, MAX_ORDER)
    below = np.nonzero(alpha < COEFF_TOL)[0]
    return int(below[0]) if below.size else MAX_ORDER


@dataclass(frozen=True)
class PhaseNoiseModel:
    coefficients: np.ndarray = field(repr=False)
    kind: str = GENERAL_FOURIER
    kappa: Optional[float] = None

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def truncation_order(self) -> int:
        return self.coefficients.size - 1

    def __repr__(self):
        if self.kind == VON_MISES:
            return f"PhaseNoiseModel(von_mises, kappa={self.kappa}, L={self.truncation_order})"
        return f"PhaseNoiseModel(general_fourier, L={self.truncation_order})"


def von_mises(kappa: float, order: Optional[int] = None) -> PhaseNoiseModel:
    kappa = float(kappa)
    if order is None:
        order = default_order(kappa)
    return PhaseNoiseModel(fourier_coefficients(kappa, order), VON_MISES, kappa)


def general_fourier(coefficients: Sequence[float]) -> PhaseNoiseModel:
    """Model from an arbitrary coefficient list ``alpha_0, alpha_1, ...``.

    Raises ``ValueError`` unless ``alpha_0 == 1``, every ``|alpha_l| <= 1`` and
    the truncated density is nonnegative (up to 1e-6) on a 4096-point grid.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("need at least alpha_0 and alpha_1")
    if c.size - 1 > MAX_ORDER:
        raise ValueError(f"at most {MAX_ORDER} harmonics are supported")
    if abs(c[0] - 1.0) > 1e-12:
        raise ValueError("alpha_0 must be 1 for a normalised density")
    if np.any(np.abs(c) > 1.0 + 1e-12):
        raise ValueError("|alpha_l| must not exceed alpha_0")
    model = PhaseNoiseModel(c, GENERAL_FOURIER, None)
    grid = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
    if _series_pdf(c, grid).min() < -1e-6:
        raise ValueError("coefficients do not describe a nonnegative density")
    return model


def _series_pdf(c, phi):
    phi = np.asarray(phi, dtype=float)
    l = np.arange(1, c.size).reshape((-1,) + (1,) * phi.ndim)
    return (c[0] + 2.0 * np.sum(c[1:].reshape(l.shape) * np.cos(l * phi), axis=0)) / (2 * np.pi)


def _series_cdf(c, phi):
    # integral of the truncated series from -pi to phi
    phi = np.asarray(phi, dtype=float)
    l = np.arange(1, c.size).reshape((-1,) + (1,) * phi.ndim)
    harm = np.sum((c[1:].reshape(l.shape) / l) * np.sin(l * phi), axis=0)
    return c[0] * (phi + np.pi) / (2 * np.pi) + harm / np.pi


def pdf(model: PhaseNoiseModel, phi):
    phi = wrap_phase(phi)
    if model.kind == VON_MISES:
        k = model.kappa
        out = np.exp(k * (np.cos(phi) - 1.0)) / (2 * np.pi * ive(0, k))
    else:
        out = np.maximum(_series_pdf(model.coefficients, phi), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def cdf(model: PhaseNoiseModel, phi):
    """P(Phi <= phi) for phi in [-pi, pi], from the term-wise integrated series."""
    phi = np.clip(np.asarray(phi, dtype=float), -np.pi, np.pi)
    out = np.clip(_series_cdf(model.coefficients, phi), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def interval_probability(model: PhaseNoiseModel, half_width: float) -> float:
    """P(|Phi| <= a) = a/pi + (2/pi) * sum_l alpha_l sin(l a)/l."""
    a = float(half_width)
    if not 0 < a <= np.pi:
        raise ValueError("half_width must lie in (0, pi]")
    c = model.coefficients
    l = np.arange(1, c.size)
    # sum the small high-order terms first
    terms = (c[1:] * np.sin(l * a) / l)[::-1]
    p = a / np.pi + 2.0 / np.pi * float(np.sum(terms))
    return min(max(p, 0.0), 1.0)


# ---------------------------------------------------------------------------
# sampling

# A uniform source maps (attempt, rows) -> array (len(rows), cols, 3) of U[0,1)
UniformSource = Callable[[int, np.ndarray], np.ndarray]


def _best_fisher(kappa, source: UniformSource, rows: int, cols: int) -> np.ndarray:
    out = np.empty((rows, cols))
    pending = np.ones((rows, cols), dtype=bool)
    s = 0.5 / kappa
    r = s + np.sqrt(1.0 + s * s)
    attempt = 0
    while pending.any():
        idx = np.nonzero(pending.any(axis=1))[0]
        u = source(attempt, idx)
        z = np.cos(np.pi * u[..., 0])
        w = (1.0 + r * z) / (r + z)
        y = kappa * (r - w)
        v = u[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (y * (2.0 - y) - v >= 0) | (np.log(y / v) + 1.0 - y >= 0)
        theta = np.arccos(np.clip(w, -1.0, 1.0))
        theta = np.where(u[..., 2] < 0.5, -theta, theta)
        take = ok & pending[idx]
        sub = out[idx]
        sub[take] = theta[take]
        out[idx] = sub
        pend = pending[idx]
        pend[take] = False
        pending[idx] = pend
        attempt += 1
    return wrap_phase(out)


def _inverse_cdf(c, u):
    lo = np.full(u.shape, -np.pi)
    hi = np.full(u.shape, np.pi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _series_cdf(c, mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < 1e-13:
            break
    return wrap_phase(0.5 * (lo + hi))


def sample_from_source(model: PhaseNoiseModel, source: UniformSource, rows: int, cols: int) -> np.ndarray:
    """Draw a ``(rows, cols)`` array of increments from a uniform source.

    Entry ``(i, j)`` only ever reads the uniforms ``source(attempt, ...)[i, j, :]``,
    which is what makes per-trial streams reproducible under any batching.
    """
    if model.kind == VON_MISES:
        if model.kappa == 0:
            u = source(0, np.arange(rows))
            return wrap_phase(-np.pi + 2 * np.pi * u[..., 0])
        return _best_fisher(model.kappa, source, rows, cols)
    u = source(0, np.arange(rows))
    return _inverse_cdf(model.coefficients, u[..., 0])


def sample(model: PhaseNoiseModel, rng: np.random.Generator, size=None):
    """Draw increments in [-pi, pi) using a numpy ``Generator``."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    n = int(np.prod(shape)) if shape else 1

    def source(attempt, rows):
        return rng.random((rows.size, n, 3))

    out = sample_from_source(model, source, 1, n).reshape(shape)
    return float(out) if size is None else out
