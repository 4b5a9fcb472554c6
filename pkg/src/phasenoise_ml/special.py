"""Modified Bessel functions of the first kind, integer order.

Plain values are provided for completeness and tests; the likelihood code only
uses the exponentially scaled form ``e^{-x} I_l(x)``, logarithms and order
ratios ``I_l(x)/I_0(x)``, which stay finite for any SNR.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, iv, ive

MAX_ORDER = 256

# scaled values below this are recomputed from the log-series
_UNDERFLOW = 1e-280


def _check(l, x):
    l = np.asarray(l)
    x = np.asarray(x, dtype=float)
    if np.any(l < 0) or np.any(l != np.floor(l)):
        raise ValueError("order must be a nonnegative integer")
    if np.any(l > MAX_ORDER):
        raise ValueError(f"order exceeds the hard cap of {MAX_ORDER}")
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("argument must be nonnegative")
    return l.astype(float), x


def _scalar(out, *args):
    if all(np.ndim(a) == 0 for a in args):
        return float(out)
    return out


def bessel_i(l, x):
    """I_l(x). Overflows to ``inf`` past x ~ 713; use :func:`log_bessel_i` there."""
    lf, xf = _check(l, x)
    with np.errstate(over="ignore"):
        out = iv(lf, xf)
    return _scalar(out, l, x)


def bessel_ie(l, x):
    """Exponentially scaled ``e^{-x} I_l(x)``."""
    lf, xf = _check(l, x)
    return _scalar(ive(lf, xf), l, x)


def _log_series(l, x):
    # ln I_l(x) from the ascending series; used where the scaled value underflows
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 2000):
        term = term * q / (k * (l + k))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return l * np.log(0.5 * x) - gammaln(l + 1.0) + np.log(total)


def log_bessel_i(l, x):
    """ln I_l(x); ``-inf`` for l >= 1 at x = 0."""
    lf, xf = _check(l, x)
    lf, xf = np.broadcast_arrays(lf, xf)
    scaled = ive(lf, xf)
    with np.errstate(divide="ignore"):
        out = np.log(scaled) + xf
    small = (scaled < _UNDERFLOW) & (xf > 0)
    if np.any(small):
        out = np.array(out, dtype=float)
        out[small] = _log_series(lf[small], xf[small])
    return _scalar(out, l, x)


def bessel_ratio(kappa):
    """A(kappa) = I_1(kappa)/I_0(kappa), in [0, 1)."""
    _, k = _check(1, kappa)
    return _scalar(ive(1.0, k) / ive(0.0, k), kappa)


def bessel_ratios(order: int, x) -> np.ndarray:
    """Ratios ``I_l(x)/I_0(x)`` for ``l = 0..order``.

    Returns an array of shape ``(order + 1, *x.shape)``. Every entry lies in
    [0, 1] and the first row is exactly 1.
    """
    _check(order, 0.0)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be nonnegative")
    ls = np.arange(order + 1, dtype=float).reshape((-1,) + (1,) * x.ndim)
    return ive(ls, x) / ive(0.0, x)


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    value: float
    log_value: float
    scaled_value: float


def evaluate(l: int, x: float) -> BesselEval:
    """All three representations of I_l(x) at once."""
    return BesselEval(
        order=int(l),
        argument=float(x),
        value=bessel_i(l, x),
        log_value=log_bessel_i(l, x),
        scaled_value=bessel_ie(l, x),
    )
