"""Two-slot training + data frames for the phase-noise SIMO link.

    x_m = sqrt(rho) e^{j theta_m} + w_m
    y_m = sqrt(rho) e^{j (theta_m + phi_m)} s + z_m

``theta_m`` is uniform on [-pi, pi), ``phi_m`` follows the phase-noise model
and ``w, z`` are CN(0, 1) (real and imaginary parts of variance 1/2). In the
synchronous mode one ``theta`` and one ``phi`` are shared by all antennas.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .phase_noise import PhaseNoiseModel, sample_from_source
from .rng import CounterStreams, as_streams

# stream slots; the phase-noise sampler uses PHI_SLOT + attempt
THETA_SLOT = 0
W_SLOT = 1
Z_SLOT = 2
SYMBOL_SLOT = 3
PHI_SLOT = 64


class OperationMode(str, enum.Enum):
    SYNCHRONOUS = "synchronous"
    NON_SYNCHRONOUS = "non_synchronous"

    @classmethod
    def parse(cls, value) -> "OperationMode":
        if isinstance(value, cls):
            return value
        aliases = {"sync": cls.SYNCHRONOUS, "nonsync": cls.NON_SYNCHRONOUS,
                   "non-sync": cls.NON_SYNCHRONOUS}
        v = str(value).lower()
        if v in aliases:
            return aliases[v]
        return cls(v)

    @property
    def short(self) -> str:
        return "sync" if self is OperationMode.SYNCHRONOUS else "nonsync"


Models = Union[PhaseNoiseModel, Sequence[PhaseNoiseModel]]


@dataclass(frozen=True)
class ChannelParams:
    rho: float
    antennas: int
    mode: OperationMode
    phase_model: Models

    def __post_init__(self):
        object.__setattr__(self, "mode", OperationMode.parse(self.mode))
        if not np.isfinite(self.rho) or self.rho < 0:
            raise ValueError("rho must be a finite nonnegative number")
        if int(self.antennas) != self.antennas or self.antennas < 1:
            raise ValueError("antennas must be a positive integer")
        if not isinstance(self.phase_model, PhaseNoiseModel):
            models = tuple(self.phase_model)
            if self.mode is OperationMode.SYNCHRONOUS:
                raise ValueError("synchronous operation takes a single phase-noise model")
            if len(models) != self.antennas:
                raise ValueError("need one phase-noise model per antenna")
            object.__setattr__(self, "phase_model", models)

    @classmethod
    def from_db(cls, snr_db, antennas, mode, phase_model):
        return cls(10.0 ** (snr_db / 10.0), antennas, mode, phase_model)


@dataclass(frozen=True)
class Frame:
    x: np.ndarray
    y: np.ndarray
    # ground truth, for tests only
    truth_theta: np.ndarray
    truth_phi: np.ndarray
    truth_symbol: complex


@dataclass(frozen=True)
class FrameBatch:
    """``T`` frames stacked along axis 0; ``x``, ``y``, ``theta``, ``phi`` are (T, M)."""
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    symbols: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def frame(self, i: int) -> Frame:
        return Frame(self.x[i], self.y[i], self.theta[i], self.phi[i], complex(self.symbols[i]))


def complex_normal(streams: CounterStreams, trials, slot: int, m: int) -> np.ndarray:
    """CN(0, 1) entries of shape (T, m) by Box-Muller on per-trial uniforms."""
    u = streams.uniforms(trials, slot, 2 * m).reshape(-1, m, 2)
    radius = np.sqrt(-np.log1p(-u[..., 0]))
    return radius * np.exp(2j * np.pi * u[..., 1])


def _phase_increments(model_or_models, streams, trials, cols):
    def source_for(col_offset, width):
        def source(attempt, rows):
            u = streams.uniforms(trials[rows], PHI_SLOT + attempt, 3 * (col_offset + width))
            return u.reshape(rows.size, col_offset + width, 3)[:, col_offset:, :]
        return source

    if isinstance(model_or_models, PhaseNoiseModel):
        return sample_from_source(model_or_models, source_for(0, cols), trials.size, cols)
    out = np.empty((trials.size, cols))
    for m, model in enumerate(model_or_models):
        out[:, m:m + 1] = sample_from_source(model, source_for(m, 1), trials.size, 1)
    return out


def simulate_frames(params: ChannelParams, symbols, streams, trials) -> FrameBatch:
    """Simulate one frame per entry of ``trials``.

    Trial ``t`` reads only its own counter stream, so the output for a given
    trial index is identical whatever batch it is simulated in. Synchronous and
    non-synchronous runs with the same streams share the noise vectors, and the
    synchronous ``theta``/``phi`` equal antenna 0's non-synchronous draws.
    """
    streams = as_streams(streams)
    trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))
    T, M = trials.size, int(params.antennas)
    s = np.broadcast_to(np.asarray(symbols, dtype=complex), (T,))
    sync = params.mode is OperationMode.SYNCHRONOUS
    cols = 1 if sync else M

    theta = -np.pi + 2 * np.pi * streams.uniforms(trials, THETA_SLOT, cols)
    phi = _phase_increments(params.phase_model, streams, trials, cols)
    if sync:
        theta = np.broadcast_to(theta, (T, M))
        phi = np.broadcast_to(phi, (T, M))

    w = complex_normal(streams, trials, W_SLOT, M)
    z = complex_normal(streams, trials, Z_SLOT, M)
    amp = np.sqrt(params.rho)
    x = amp * np.exp(1j * theta) + w
    y = amp * np.exp(1j * (theta + phi)) * s[:, None] + z
    return FrameBatch(x, y, np.array(theta), np.array(phi), np.array(s))


def simulate_frame(params: ChannelParams, symbol: complex, rng, trial: int = 0) -> Frame:
    """Single frame; ``rng`` is a CounterStreams, a numpy Generator or an int seed."""
    return simulate_frames(params, [symbol], rng, [trial]).frame(0)
