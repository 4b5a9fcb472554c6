"""Maximum-likelihood detection of PSK over SIMO links with oscillator phase noise."""
from .analysis import bernstein_pairwise_bound, ser_floor_sync, union_bound_ser, variance_xmn
from .channel import ChannelParams, Frame, OperationMode, simulate_frame, simulate_frames
from .detectors import (DetectionResult, PskConstellation, TruncationError, detect_high_snr_nonsync,
                        detect_high_snr_sync, detect_ml, loglik_nonsync, loglik_sync)
from .montecarlo import SerEstimate, SimConfig, estimate_ser, sweep
from .phase_noise import PhaseNoiseModel, general_fourier, von_mises
from .rng import CounterStreams

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "CounterStreams", "DetectionResult", "Frame", "OperationMode",
    "PhaseNoiseModel", "PskConstellation", "SerEstimate", "SimConfig", "TruncationError",
    "bernstein_pairwise_bound", "detect_high_snr_nonsync", "detect_high_snr_sync", "detect_ml",
    "estimate_ser", "general_fourier", "loglik_nonsync", "loglik_sync", "ser_floor_sync",
    "simulate_frame", "simulate_frames", "sweep", "union_bound_ser", "variance_xmn", "von_mises",
]
