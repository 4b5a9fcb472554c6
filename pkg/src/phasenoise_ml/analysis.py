"""Closed-form performance predictors at high SNR (von Mises phase noise).

* synchronous SER floor: ``1 - P(|phi| < pi/N)``, independent of M;
* variance of the per-antenna pairwise statistic
  ``X_{m,n} = sin(a) sin(psi_m - a) + sin^2(a) A(kappa)``, ``a = pi n/N``,
  ``A = I_1/I_0``;
* Bernstein bound on the non-synchronous pairwise error and the union bound
  over the N-1 competitors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ive

from .phase_noise import interval_probability, von_mises
from .special import bessel_ratio

QUAD_CHECK_TOL = 1e-9


class NonPositiveVariance(ArithmeticError):
    pass


@dataclass(frozen=True)
class FloorResult:
    N: int
    kappa: float
    floor: float


@dataclass(frozen=True)
class PairwiseBound:
    n: int
    N: int
    kappa: float
    M: int
    C: float
    variance: float
    bound: float

    @property
    def exponent_per_antenna(self) -> float:
        """-ln(bound)/M before clipping."""
        return pairwise_exponent(self.n, self.N, self.kappa)


def _von_mises_mass(kappa, a):
    # adaptive quadrature of the closed-form density over [-a, a]
    norm = 2 * math.pi * float(ive(0, kappa))
    val, _ = integrate.quad(lambda p: math.exp(kappa * (math.cos(p) - 1.0)) / norm,
                            -a, a, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def ser_floor_sync(N: int, kappa: float) -> float:
    """High-SNR SER of the synchronous receiver for N-PSK.

    Evaluated from the integrated Fourier series and checked against adaptive
    quadrature of the closed-form density; raises ``ArithmeticError`` if the
    two disagree by more than 1e-9.
    """
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    a = math.pi / N
    p_series = interval_probability(von_mises(kappa), a)
    p_quad = _von_mises_mass(kappa, a)
    if abs(p_series - p_quad) > QUAD_CHECK_TOL:
        raise ArithmeticError(f"floor series/quadrature mismatch: {p_series} vs {p_quad}")
    return min(max(1.0 - p_series, 0.0), 1.0)


def floor_result(N: int, kappa: float) -> FloorResult:
    return FloorResult(int(N), float(kappa), ser_floor_sync(N, kappa))


def _check_pair(n, N):
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")
    if not 1 <= n <= N - 1:
        raise ValueError("n must lie in [1, N-1]")


def _ratio_over_kappa(kappa):
    # I_1(k)/(k I_0(k)), with its limit 1/2 at k = 0
    if kappa == 0:
        return 0.5
    if kappa < 1e-4:
        return 0.5 - kappa * kappa / 16.0
    return bessel_ratio(kappa) / kappa


def variance_xmn(n: int, N: int, kappa: float) -> float:
    _check_pair(n, N)
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    a = math.pi * n / N
    s2 = math.sin(a) ** 2
    A = bessel_ratio(kappa)
    var = s2 * (_ratio_over_kappa(kappa) * math.cos(2 * a) + s2 * (1.0 - A * A))
    if var <= 0:
        raise NonPositiveVariance(f"VAR(X) = {var} for n={n}, N={N}, kappa={kappa}")
    return var


def bound_constant(n: int, N: int, kappa: float) -> float:
    """Almost-sure bound C on |X_{m,n}|."""
    a = math.pi * n / N
    return math.sin(a) + math.sin(a) ** 2 * bessel_ratio(kappa)


def pairwise_exponent(n: int, N: int, kappa: float) -> float:
    """E such that the pairwise bound equals exp(-E M).

    Bernstein: P(S > t s) <= exp(-t^2 / (2 + (2/3)(C/s) t)) with S the sum of
    M centred X_{m,n}, s = sqrt(M var), and t s = M sin^2(a) A.
    """
    _check_pair(n, N)
    if kappa <= 0:
        return 0.0
    a = math.pi * n / N
    var = variance_xmn(n, N, kappa)
    shift = math.sin(a) ** 2 * bessel_ratio(kappa)  # per-antenna mean separation
    C = bound_constant(n, N, kappa)
    # t = sqrt(M) shift / sqrt(var), C t / s = C shift / var (M cancels)
    t2_per_M = shift * shift / var
    return t2_per_M / (2.0 + (2.0 / 3.0) * C * shift / var)


def bernstein_pairwise_bound(n: int, N: int, kappa: float, M: int) -> float:
    """Upper bound on P(LLR_n > 0 | s_0 sent); 1 for kappa = 0."""
    if M < 1:
        raise ValueError("M must be positive")
    return min(1.0, math.exp(-M * pairwise_exponent(n, N, kappa)))


def pairwise_bound(n: int, N: int, kappa: float, M: int) -> PairwiseBound:
    var = variance_xmn(n, N, kappa)
    return PairwiseBound(int(n), int(N), float(kappa), int(M), bound_constant(n, N, kappa),
                         var, bernstein_pairwise_bound(n, N, kappa, M))


def union_bound_ser(N: int, kappa: float, M: int) -> float:
    """min(1, sum over the N-1 competitors of the pairwise bound)."""
    return min(1.0, sum(bernstein_pairwise_bound(n, N, kappa, M) for n in range(1, N)))


def bernstein_bound_displayed(n: int, N: int, kappa: float, M: int) -> float:
    """Same bound written directly as one closed-form expression.

    exp(-M (sin^2(a) A / sqrt(var))^2 / (2 + (2/3) C sin^2(a) A / var)).
    Kept for cross-checking :func:`bernstein_pairwise_bound`.
    """
    a = math.pi * n / N
    A = bessel_ratio(kappa)
    var = variance_xmn(n, N, kappa)
    C = bound_constant(n, N, kappa)
    s2 = math.sin(a) ** 2
    num = M * (s2 / math.sqrt(var) * A) ** 2
    den = 2.0 + (2.0 / 3.0) * C * s2 / var * A
    return min(1.0, math.exp(-num / den))


def pairwise_statistic(psi, n: int, N: int, kappa: float):
    """X_{m,n} for phase observations psi (zero mean when psi ~ vM(0, kappa))."""
    a = math.pi * n / N
    return math.sin(a) * np.sin(np.asarray(psi) - a) + math.sin(a) ** 2 * bessel_ratio(kappa)
