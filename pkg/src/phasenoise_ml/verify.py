"""Self-checks run by ``phasenoise-ml verify``.

Each check compares a production path with an independent route (quadrature,
Monte Carlo moments, empirical error rates) and returns a :class:`Check`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy import integrate
from scipy.special import ive

from . import analysis
from .channel import ChannelParams, simulate_frame
from .detectors import loglik_nonsync, loglik_sync
from .phase_noise import interval_probability, pdf, sample, von_mises


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _quad_loglik(xs, ys, s, rho, kappa):
    # direct double integral over (theta, phi) of the joint Gaussian laws
    r = math.sqrt(rho)
    norm = 2 * math.pi * float(ive(0, kappa))

    def exponent(t, p):
        et = r * cmath.exp(1j * t)
        ets = r * cmath.exp(1j * (t + p)) * s
        return -sum(abs(v - et) ** 2 for v in xs) - sum(abs(v - ets) ** 2 for v in ys)

    g = np.linspace(-math.pi, math.pi, 48, endpoint=False)
    top = max(exponent(t, p) for t in g for p in g)
    val, _ = integrate.dblquad(
        lambda p, t: math.exp(exponent(t, p) - top + kappa * (math.cos(p) - 1)) / norm,
        -math.pi, math.pi, -math.pi, math.pi, epsabs=0, epsrel=1e-10)
    return top + math.log(val) - math.log(2 * math.pi) - 2 * len(xs) * math.log(math.pi)


def check_likelihood_quadrature(seed: int = 0, frames: int = 3) -> Check:
    worst = 0.0
    model = von_mises(3.0)
    rng = np.random.default_rng(seed)
    for mode in ("nonsync", "sync"):
        params = ChannelParams(4.0, 2, mode, model)
        for _ in range(frames):
            s = complex(np.exp(2j * np.pi * rng.integers(4) / 4))
            f = simulate_frame(params, s, rng)
            if mode == "sync":
                ref = _quad_loglik(list(f.x), list(f.y), s, 4.0, 3.0)
                got = loglik_sync(f, s, model, 4.0)
            else:
                ref = sum(_quad_loglik([xm], [ym], s, 4.0, 3.0) for xm, ym in zip(f.x, f.y))
                got = loglik_nonsync(f, s, model, 4.0)
            worst = max(worst, abs(got - ref) / abs(ref))
    return Check("likelihood-vs-quadrature", worst <= 1e-6, f"max relative error {worst:.2e}")


def check_pdf_normalisation() -> Check:
    worst = 0.0
    for kappa in (0.0, 2.0, 3.0, 5.0, 10.0):
        m = von_mises(kappa)
        q, _ = integrate.quad(lambda p: pdf(m, p), -math.pi, math.pi, epsabs=1e-13, limit=200)
        worst = max(worst, abs(interval_probability(m, math.pi) - 1), abs(q - 1))
    return Check("pdf-normalisation", worst <= 1e-9, f"max deviation {worst:.2e}")


def check_variance_formula(seed: int = 0, draws: int = 200_000) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N in (2, 4, 8):
        for kappa in (0.5, 2.0, 10.0):
            psi = sample(von_mises(kappa), rng, draws)
            for n in range(1, N):
                x = analysis.pairwise_statistic(psi, n, N, kappa)
                d2 = (x - x.mean()) ** 2
                se = math.sqrt(np.var(d2) / draws)
                worst = max(worst, abs(d2.mean() - analysis.variance_xmn(n, N, kappa)) / se)
    return Check("variance-formula", worst <= 4.0, f"max deviation {worst:.2f} standard errors")


def check_bound_dominance(seed: int = 0, trials: int = 100_000) -> Check:
    rng = np.random.default_rng(seed)
    ok = True
    details = []
    for N, kappa, M in ((2, 5.0, 10), (8, 10.0, 5), (4, 2.0, 8)):
        psi = sample(von_mises(kappa), rng, (trials, M))
        for n in range(1, N):
            a = math.pi * n / N
            p = float(np.mean(np.mean(np.sin(a) * np.sin(psi - a), axis=1) > 0))
            bound = analysis.bernstein_pairwise_bound(n, N, kappa, M)
            slack = 3 * math.sqrt(max(p * (1 - p), 1.0 / trials) / trials)
            ok &= p <= bound + slack
            details.append(f"N={N},n={n}:{p:.2e}<={bound:.2e}")
    return Check("bound-dominance", ok, " ".join(details))


CHECKS: List[Callable[[], Check]] = [
    check_likelihood_quadrature,
    check_pdf_normalisation,
    check_variance_formula,
    check_bound_dominance,
]


def run_all() -> List[Check]:
    return [c() for c in CHECKS]
