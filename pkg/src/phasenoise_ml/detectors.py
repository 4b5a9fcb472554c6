"""Maximum-likelihood and high-SNR detectors for PSK over the phase-noise channel.

Exact likelihoods (training symbol 1, data symbol s, CN(0, 1) noise):

non-synchronous
    p(x, y | s) = A * prod_m ( beta_{m,0} + 2 sum_l beta_{m,l} cos(l zeta_m) )
    beta_{m,l}  = alpha_{m,l} I_l(2 sqrt(rho) |s| |y_m|) I_l(2 sqrt(rho) |x_m|)
    zeta_m      = arg y_m - arg x_m - arg s

synchronous
    same with a single bracket built from 1^T x and 1^T y.

with ``A = exp(-|x|^2 - |y|^2 - rho M (1 + |s|^2)) / pi^{2M}``.

Each bracket is evaluated as ``beta_0 * (1 + 2 sum_l c_l cos(l zeta))`` where
``c_l = alpha_l * (I_l/I_0)(a) * (I_l/I_0)(b)`` lies in [-1, 1], so nothing
overflows at any SNR.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .channel import ChannelParams, Frame, OperationMode
from .phase_noise import PhaseNoiseModel, wrap_phase
from .special import MAX_ORDER, bessel_ratios, log_bessel_i

log = logging.getLogger(__name__)

STOP_TOL = 1e-12
CONVERGED_TOL = 1e-9
BRACKET_FLOOR = 1e-300

Models = Union[PhaseNoiseModel, Sequence[PhaseNoiseModel]]


class TruncationError(ArithmeticError):
    """The Bessel series had not converged at the truncation order."""


@dataclass(frozen=True)
class PskConstellation:
    order: int

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError("PSK order must be an integer >= 2")

    @property
    def phases(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.order) / self.order

    @property
    def symbols(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def symbol(self, n: int) -> complex:
        return complex(np.exp(2j * np.pi * n / self.order))

    def index(self, phase: float) -> int:
        """Nearest constellation point to ``phase``."""
        return int(decide_phase(phase, self.order))


@dataclass(frozen=True)
class LikelihoodTerms:
    """Intermediates of one likelihood evaluation.

    For the non-synchronous form the arrays run over antennas; for the
    synchronous form there is a single bracket (arrays of length 1) and
    ``sum_x``/``sum_y`` hold ``1^T x`` and ``1^T y``.
    """
    log_A: float
    log_beta0: np.ndarray
    beta_ratios: np.ndarray        # (brackets, L+1), c_l = beta_l / beta_0
    zeta: np.ndarray
    log_bracket: np.ndarray
    clamped: int
    sum_x: Optional[complex] = None
    sum_y: Optional[complex] = None

    @property
    def loglik(self) -> float:
        return float(self.log_A + np.sum(self.log_beta0) + np.sum(self.log_bracket))


@dataclass(frozen=True)
class DetectionResult:
    decided_index: int
    log_likelihoods: np.ndarray
    tie_broken: bool


# ---------------------------------------------------------------------------
# series core

def coefficient_matrix(models: Models, M: int) -> np.ndarray:
    """(M, L+1) matrix of alpha_{m,l}, zero padded to the longest model."""
    if isinstance(models, PhaseNoiseModel):
        return np.broadcast_to(models.coefficients, (M, models.coefficients.size))
    models = list(models)
    if len(models) != M:
        raise ValueError(f"expected {M} phase-noise models, got {len(models)}")
    L = max(m.coefficients.size for m in models)
    out = np.zeros((M, L))
    for i, m in enumerate(models):
        out[i, :m.coefficients.size] = m.coefficients
    return out


def _series_order(alpha: np.ndarray, trunc: Optional[int]) -> tuple[int, bool]:
    """Truncation order from the coefficient envelope.

    Since every |c_l| <= |alpha_l|, stopping where ``2|alpha_l|`` drops below
    ``STOP_TOL`` times the running coefficient sum is conservative for every
    Bessel argument. Returns ``(L, converged_by_envelope)``.
    """
    cap = MAX_ORDER if trunc is None else int(trunc)
    if not 1 <= cap <= MAX_ORDER:
        raise ValueError(f"truncation must be in [1, {MAX_ORDER}]")
    env = np.max(np.abs(alpha / alpha[:, :1]), axis=0)
    cap = min(cap, env.size - 1)
    partial = 1.0 + 2.0 * np.cumsum(env[1:])
    small = np.nonzero(2.0 * env[1:cap + 1] < STOP_TOL * partial[:cap])[0]
    if small.size:
        return int(small[0]) + 1, True
    # a model truncated at its own order is exact for that model
    return cap, cap == env.size - 1


def series_ratios(alpha: np.ndarray, a, b, trunc: Optional[int] = None) -> np.ndarray:
    """c_l = (alpha_l/alpha_0) (I_l/I_0)(a) (I_l/I_0)(b), shape (L+1, *a.shape).

    ``alpha`` is (M, L+1) and ``a``, ``b`` broadcast to (..., M).
    """
    L, converged = _series_order(alpha, trunc)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(a.shape, b.shape)
    ratios = bessel_ratios(L, np.broadcast_to(a, shape)) * bessel_ratios(L, np.broadcast_to(b, shape))
    c = (alpha[:, :L + 1] / alpha[:, :1]).T.reshape((L + 1,) + (1,) * (len(shape) - 1) + (alpha.shape[0],))
    c = c * ratios
    if not converged:
        total = 1.0 + 2.0 * np.sum(np.abs(c[1:]), axis=0)
        if np.any(2.0 * np.abs(c[L]) > CONVERGED_TOL * total):
            raise TruncationError(f"Bessel series not converged at L={L}")
    return c


def log_brackets(c: np.ndarray, zeta) -> tuple[np.ndarray, int]:
    """ln(1 + 2 sum_l c_l cos(l zeta)) with the floor guard.

    ``c`` is (L+1, *S) and ``zeta`` has shape ``S + (K,)`` for K candidate
    angles. Returns the log brackets and the number of clamped entries.
    """
    zeta = np.asarray(zeta, dtype=float)
    acc = np.zeros(zeta.shape)
    for l in range(c.shape[0] - 1, 0, -1):
        acc += c[l][..., None] * np.cos(l * zeta)
    bracket = 1.0 + 2.0 * acc
    low = bracket < BRACKET_FLOOR
    n = int(np.count_nonzero(low))
    if n:
        log.debug("clamped %d likelihood brackets", n)
        bracket = np.where(low, BRACKET_FLOOR, bracket)
    return np.log(bracket), n


def _log_i0(x):
    return log_bessel_i(0, np.asarray(x, dtype=float))


def _log_A(x, y, rho, s_abs2):
    M = x.shape[-1]
    return (-np.sum(np.abs(x) ** 2, axis=-1) - np.sum(np.abs(y) ** 2, axis=-1)
            - rho * M * (1.0 + s_abs2) - 2 * M * np.log(np.pi))


# ---------------------------------------------------------------------------
# single-frame likelihoods

def likelihood_terms(frame: Frame, symbol: complex, models: Models, rho: float,
                     mode, trunc: Optional[int] = None) -> LikelihoodTerms:
    mode = OperationMode.parse(mode)
    x = np.asarray(frame.x, dtype=complex)
    y = np.asarray(frame.y, dtype=complex)
    M = x.size
    s = complex(symbol)
    amp = 2.0 * np.sqrt(rho)
    if mode is OperationMode.NON_SYNCHRONOUS:
        alpha = coefficient_matrix(models, M)
        a, b = amp * np.abs(x), amp * abs(s) * np.abs(y)
        zeta = wrap_phase(np.angle(y) - np.angle(x) - np.angle(s))
        sx = sy = None
    else:
        if not isinstance(models, PhaseNoiseModel):
            raise ValueError("synchronous likelihood takes a single phase-noise model")
        alpha = coefficient_matrix(models, 1)
        sx, sy = complex(np.sum(x)), complex(np.sum(y))
        a, b = np.array([amp * abs(sx)]), np.array([amp * abs(s) * abs(sy)])
        zeta = wrap_phase(np.array([np.angle(sy) - np.angle(sx) - np.angle(s)]))
    c = series_ratios(alpha, a, b, trunc)
    lb, n = log_brackets(c, zeta[:, None])
    log_beta0 = np.log(alpha[:, 0]) + _log_i0(a) + _log_i0(b)
    return LikelihoodTerms(
        log_A=float(_log_A(x, y, rho, abs(s) ** 2)),
        log_beta0=log_beta0,
        beta_ratios=c.T.copy(),
        zeta=zeta,
        log_bracket=lb[:, 0],
        clamped=n,
        sum_x=sx,
        sum_y=sy,
    )


def loglik_nonsync(frame: Frame, symbol: complex, models: Models, rho: float,
                   trunc: Optional[int] = None) -> float:
    """ln p(x, y | s) for independent oscillators; ``models`` may be per antenna."""
    return likelihood_terms(frame, symbol, models, rho, OperationMode.NON_SYNCHRONOUS, trunc).loglik


def loglik_sync(frame: Frame, symbol: complex, model: PhaseNoiseModel, rho: float,
                trunc: Optional[int] = None) -> float:
    """ln p(x, y | s) for a common oscillator."""
    return likelihood_terms(frame, symbol, model, rho, OperationMode.SYNCHRONOUS, trunc).loglik


def _psk_terms(x, y, N, mode, models, rho, trunc):
    # shared by the PSK log-likelihoods: brackets over all N symbols at once
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    amp = 2.0 * np.sqrt(rho)
    shifts = 2 * np.pi * np.arange(N) / N
    if OperationMode.parse(mode) is OperationMode.NON_SYNCHRONOUS:
        alpha = coefficient_matrix(models, x.shape[-1])
        a, b = amp * np.abs(x), amp * np.abs(y)
        omega = np.angle(y) - np.angle(x)
    else:
        if not isinstance(models, PhaseNoiseModel):
            raise ValueError("synchronous likelihood takes a single phase-noise model")
        alpha = coefficient_matrix(models, 1)
        sx, sy = np.sum(x, axis=-1, keepdims=True), np.sum(y, axis=-1, keepdims=True)
        a, b = amp * np.abs(sx), amp * np.abs(sy)
        omega = np.angle(sy) - np.angle(sx)
    c = series_ratios(alpha, a, b, trunc)
    lb, clamped = log_brackets(c, wrap_phase(omega[..., None] - shifts))
    log_beta0 = np.log(alpha[:, 0]) + _log_i0(a) + _log_i0(b)
    return np.sum(log_beta0[..., None] + lb, axis=-2), clamped


def psk_logliks(x, y, N: int, mode, models: Models, rho: float,
                trunc: Optional[int] = None) -> tuple[np.ndarray, int]:
    """PSK log-likelihoods ``LR_n`` for a batch: x, y (T, M) -> ((T, N), clamped).

    ``LR_n`` is the full log-likelihood of symbol n minus the symbol-independent
    ``ln A``.
    """
    return _psk_terms(x, y, N, mode, models, rho, trunc)


def loglik_psk_nonsync(frame: Frame, n: int, N: int, models: Models, rho: float,
                       trunc: Optional[int] = None) -> float:
    """LR_n = sum_m ln f_{m,0}(arg y_m - arg x_m - 2 pi n / N)."""
    ll, _ = _psk_terms(frame.x, frame.y, N, OperationMode.NON_SYNCHRONOUS, models, rho, trunc)
    return float(ll[n])


def loglik_psk_sync(frame: Frame, n: int, N: int, model: PhaseNoiseModel, rho: float,
                    trunc: Optional[int] = None) -> float:
    ll, _ = _psk_terms(frame.x, frame.y, N, OperationMode.SYNCHRONOUS, model, rho, trunc)
    return float(ll[n])


def sync_psk_difference_series(frame: Frame, n: int, N: int, model: PhaseNoiseModel,
                               rho: float, trunc: Optional[int] = None) -> float:
    """Experimental comparator: sum_l (beta_l/beta_0) sin(l pi n/N) sin(l (Delta - pi n/N)).

    ``Delta = arg(1^T y) - arg(1^T x)``. Not used for detection.
    """
    x, y = np.asarray(frame.x), np.asarray(frame.y)
    sx, sy = np.sum(x), np.sum(y)
    amp = 2.0 * np.sqrt(rho)
    c = series_ratios(coefficient_matrix(model, 1), [amp * abs(sx)], [amp * abs(sy)], trunc)[:, 0]
    l = np.arange(1, c.size)
    delta = np.angle(sy) - np.angle(sx)
    return float(np.sum(c[1:] * np.sin(l * np.pi * n / N) * np.sin(l * (delta - np.pi * n / N))))


# ---------------------------------------------------------------------------
# decisions

def argmax_with_ties(scores) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax, ties to the smallest index; also returns the tie flags."""
    scores = np.asarray(scores)
    idx = np.argmax(scores, axis=-1)
    best = np.take_along_axis(scores, idx[..., None], axis=-1)
    ties = np.sum(scores == best, axis=-1) > 1
    return idx, ties


def detect_ml(frame: Frame, constellation: PskConstellation, params: ChannelParams,
              trunc: Optional[int] = None) -> DetectionResult:
    N = constellation.order
    x = np.asarray(frame.x)[None, :]
    y = np.asarray(frame.y)[None, :]
    ll, _ = psk_logliks(x, y, N, params.mode, params.phase_model, params.rho, trunc)
    ll = ll[0] + float(_log_A(x[0], y[0], params.rho, 1.0))
    idx, tie = argmax_with_ties(ll)
    return DetectionResult(int(idx), ll, bool(tie))


def decide_phase(psi, N: int):
    """Index of the decision region [2 pi n/N - pi/N, 2 pi n/N + pi/N) containing psi."""
    t = np.asarray(psi, dtype=float) * N / (2 * np.pi)
    # absorb the rounding of pi/N * N/(2 pi) so region boundaries stay half-open
    k = np.floor(t + 0.5 + 1e-12).astype(np.int64) % N
    return int(k) if np.ndim(k) == 0 else k


def high_snr_sync_angle(x, y):
    """psi = arg(x^H y) along the last axis."""
    return np.angle(np.sum(np.conj(x) * y, axis=-1))


def high_snr_nonsync_angles(x, y):
    """psi_m = arg(x_m^* y_m)."""
    return np.angle(np.conj(x) * y)


def high_snr_nonsync_decisions(psis, N: int):
    """argmax_n sum_m cos(psi_m - 2 pi n/N), via the resultant angle.

    ``sum_m cos(psi_m - t) = |R| cos(arg R - t)`` with ``R = sum_m e^{j psi_m}``,
    so the maximiser is the constellation phase nearest ``arg R``.
    """
    R = np.sum(np.exp(1j * np.asarray(psis)), axis=-1)
    return decide_phase(np.angle(R), N)


def _high_snr_result(psi_scores, decided, N):
    phases = 2 * np.pi * np.arange(N) / N
    scores = psi_scores(phases)
    tie = bool(np.sum(np.isclose(scores, scores.max(), rtol=0, atol=1e-12)) > 1)
    return DetectionResult(int(decided), scores, tie)


def detect_high_snr_sync(frame: Frame, N: int) -> DetectionResult:
    """Nearest PSK phase to arg(x^H y); scores are cos(psi - 2 pi n/N)."""
    psi = float(high_snr_sync_angle(np.asarray(frame.x), np.asarray(frame.y)))
    return _high_snr_result(lambda p: np.cos(psi - p), decide_phase(psi, N), N)


def llr_high_snr_nonsync(psis, n: int, N: int) -> float:
    """(1/M) sum_m sin(pi n/N) sin(psi_m - pi n/N)."""
    psis = np.asarray(psis, dtype=float)
    a = np.pi * n / N
    return float(np.mean(np.sin(a) * np.sin(psis - a)))


def detect_high_snr_nonsync(frame: Frame, N: int) -> DetectionResult:
    psis = high_snr_nonsync_angles(np.asarray(frame.x), np.asarray(frame.y))
    decided = high_snr_nonsync_decisions(psis, N)
    return _high_snr_result(lambda p: np.sum(np.cos(psis[:, None] - p), axis=0), decided, N)
