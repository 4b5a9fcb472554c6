"""Seeded Monte Carlo SER estimation.

Trial ``t`` of SNR point ``i`` draws everything (symbol, phases, noise) from the
counter stream ``(master_seed, i, t)``. Trials are processed in fixed chunks,
so results are bit-identical for any number of workers. Because the stream
layout is shared, synchronous and non-synchronous runs with the same seed see
the same noise, symbols and (antenna 0) phase draws: the comparison is paired.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import SYMBOL_SLOT, ChannelParams, OperationMode, simulate_frames
from .detectors import (argmax_with_ties, decide_phase, high_snr_nonsync_angles,
                        high_snr_nonsync_decisions, high_snr_sync_angle, psk_logliks)
from .phase_noise import PhaseNoiseModel, von_mises
from .rng import CounterStreams

log = logging.getLogger(__name__)

CHUNK = 4096
WORKERS_ENV = "PHASENOISE_ML_WORKERS"
DETECTORS = ("exact_ml", "high_snr")


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


@dataclass(frozen=True)
class SimConfig:
    mode: OperationMode
    detector: str
    N: int
    M: int
    kappa: Optional[float]
    snr_db_points: Sequence[float] = ()
    trials: int = 10_000
    master_seed: int = 0
    trunc: Optional[int] = None
    # general Fourier model; overrides kappa when given
    phase_model: Optional[PhaseNoiseModel] = field(default=None, compare=False)
    # stop a cell once it has this many errors and at least min_trials trials
    stop_errors: Optional[int] = None
    min_trials: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", OperationMode.parse(self.mode))
        object.__setattr__(self, "snr_db_points", tuple(float(v) for v in self.snr_db_points))
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.N < 2 or self.M < 1:
            raise ValueError("need N >= 2 and M >= 1")
        if self.phase_model is None and (self.kappa is None or self.kappa < 0):
            raise ValueError("need kappa >= 0 or an explicit phase model")
        if not all(np.isfinite(self.snr_db_points)):
            raise ValueError("SNR points must be finite")

    def model(self) -> PhaseNoiseModel:
        return self.phase_model if self.phase_model is not None else von_mises(self.kappa)


@dataclass(frozen=True)
class SerEstimate:
    errors: int
    trials: int
    ser: float
    ci_low: float
    ci_high: float
    clamped: int = 0


def wilson_estimate(errors: int, trials: int, clamped: int = 0) -> SerEstimate:
    ci = binomtest(int(errors), int(trials)).proportion_ci(0.95, method="wilson")
    ser = errors / trials
    return SerEstimate(int(errors), int(trials), ser,
                       min(float(ci.low), ser), max(float(ci.high), ser), int(clamped))


def decide(config: SimConfig, model: PhaseNoiseModel, x, y, rho: float):
    """Decided symbol indices for a batch of frames."""
    if config.detector == "exact_ml":
        ll, clamped = psk_logliks(x, y, config.N, config.mode, model, rho, config.trunc)
        idx, _ = argmax_with_ties(ll)
        return idx, clamped
    if config.mode is OperationMode.SYNCHRONOUS:
        return decide_phase(high_snr_sync_angle(x, y), config.N), 0
    return high_snr_nonsync_decisions(high_snr_nonsync_angles(x, y), config.N), 0


def run_chunk(config: SimConfig, snr_db: float, snr_index: int, start: int, stop: int):
    """(errors, clamped) over trials [start, stop)."""
    model = config.model()
    rho = 10.0 ** (snr_db / 10.0)
    streams = CounterStreams(config.master_seed, snr_index)
    trials = np.arange(start, stop, dtype=np.uint64)
    sent = np.floor(streams.uniforms(trials, SYMBOL_SLOT, 1)[:, 0] * config.N).astype(np.int64)
    symbols = np.exp(2j * np.pi * sent / config.N)
    params = ChannelParams(rho, config.M, config.mode, model)
    batch = simulate_frames(params, symbols, streams, trials)
    decided, clamped = decide(config, model, batch.x, batch.y, rho)
    return int(np.count_nonzero(decided != sent)), clamped


def _run_chunk_args(args):
    return run_chunk(*args)


def estimate_ser(config: SimConfig, snr_db: float, snr_index: Optional[int] = None,
                 workers: Optional[int] = None) -> SerEstimate:
    """SER at one SNR point.

    ``snr_index`` keys the random streams; by default it is the position of
    ``snr_db`` in ``config.snr_db_points`` (0 if absent), so a standalone call
    reproduces the matching sweep row.
    """
    if snr_index is None:
        pts = list(config.snr_db_points)
        snr_index = pts.index(float(snr_db)) if float(snr_db) in pts else 0
    workers = default_workers() if workers is None else max(1, int(workers))
    bounds = [(s, min(s + CHUNK, config.trials)) for s in range(0, config.trials, CHUNK)]
    jobs = [(config, float(snr_db), int(snr_index), a, b) for a, b in bounds]

    errors = done = clamped = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and len(jobs) > 1 else None
    try:
        for wave_start in range(0, len(jobs), workers):
            wave = jobs[wave_start:wave_start + workers]
            results = pool.map(_run_chunk_args, wave) if pool else map(_run_chunk_args, wave)
            stop = False
            for (_, _, _, a, b), (e, c) in zip(wave, results):
                errors += e
                clamped += c
                done += b - a
                if (config.stop_errors is not None and errors >= config.stop_errors
                        and done >= config.min_trials):
                    stop = True
                    break
            if stop:
                break
    finally:
        if pool:
            pool.shutdown()
    if clamped:
        log.info("%d likelihood brackets clamped at %.1f dB", clamped, snr_db)
    return wilson_estimate(errors, done, clamped)


def sweep(config: SimConfig, workers: Optional[int] = None) -> list[tuple[float, SerEstimate]]:
    """One estimate per SNR point, rows sorted by SNR."""
    order = sorted(range(len(config.snr_db_points)), key=lambda i: config.snr_db_points[i])
    return [(config.snr_db_points[i], estimate_ser(config, config.snr_db_points[i], i, workers))
            for i in order]
