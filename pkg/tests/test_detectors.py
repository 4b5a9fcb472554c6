import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import loglik_nonsync_quadrature, loglik_sync_quadrature
from phasenoise_ml.channel import ChannelParams, Frame, simulate_frame, simulate_frames
from phasenoise_ml.detectors import (
    PskConstellation, TruncationError, decide_phase, detect_high_snr_nonsync,
    detect_high_snr_sync, detect_ml, likelihood_terms, llr_high_snr_nonsync, log_brackets,
    loglik_nonsync, loglik_psk_nonsync, loglik_psk_sync, loglik_sync, psk_logliks,
    sync_psk_difference_series)
from phasenoise_ml.analysis import union_bound_ser
from phasenoise_ml.phase_noise import general_fourier, sample, von_mises
from phasenoise_ml.rng import CounterStreams


def make_frame(x, y):
    x = np.asarray(x, dtype=complex)
    return Frame(x, np.asarray(y, dtype=complex), np.zeros(x.size), np.zeros(x.size), 1.0)


def random_frame(M, rho, kappa, seed, mode="nonsync", symbol=1.0):
    return simulate_frame(ChannelParams(rho, M, mode, von_mises(kappa)), symbol, CounterStreams(seed))


def test_constellation():
    c = PskConstellation(8)
    assert c.symbol(0) == 1
    assert np.allclose(np.abs(c.symbols), 1)
    assert abs(c.symbols.sum()) < 1e-12
    assert c.index(2 * np.pi * 3 / 8) == 3
    with pytest.raises(ValueError):
        PskConstellation(1)


@pytest.mark.parametrize("seed", range(5))
def test_single_antenna_modes_coincide(seed):
    m = von_mises(3.0)
    f = random_frame(1, 4.0, 3.0, seed)
    s = np.exp(1j * 0.3 * seed)
    assert loglik_nonsync(f, s, m, 4.0) == pytest.approx(loglik_sync(f, s, m, 4.0), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_nonsync_per_antenna_rotation_invariance(seed):
    m = von_mises(5.0)
    f = random_frame(4, 10.0, 5.0, seed)
    g = np.exp(1j * np.random.default_rng(seed).uniform(-np.pi, np.pi, 4))
    rot = make_frame(f.x * g, f.y * g)
    s = np.exp(2j * np.pi / 8)
    assert loglik_nonsync(rot, s, m, 10.0) == pytest.approx(loglik_nonsync(f, s, m, 10.0), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_sync_common_rotation_invariance(seed):
    m = von_mises(5.0)
    f = random_frame(4, 10.0, 5.0, seed, mode="sync")
    g = np.exp(1j * (seed + 0.5))
    rot = make_frame(f.x * g, f.y * g)
    s = np.exp(2j * np.pi / 8)
    assert loglik_sync(rot, s, m, 10.0) == pytest.approx(loglik_sync(f, s, m, 10.0), abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_nonsync_matches_quadrature(seed):
    f = random_frame(2, 4.0, 3.0, seed)
    s = np.exp(2j * np.pi * seed / 4)
    ref = loglik_nonsync_quadrature(f.x, f.y, s, 4.0, 3.0)
    assert loglik_nonsync(f, s, von_mises(3.0), 4.0) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_sync_matches_quadrature(seed):
    f = random_frame(2, 4.0, 3.0, seed, mode="sync")
    s = np.exp(2j * np.pi * seed / 4)
    ref = loglik_sync_quadrature(f.x, f.y, s, 4.0, 3.0)
    assert loglik_sync(f, s, von_mises(3.0), 4.0) == pytest.approx(ref, rel=1e-6)


def test_general_symbol_matches_quadrature():
    # non-unit-modulus symbols go through the same general likelihood
    f = random_frame(1, 4.0, 2.0, 3, symbol=1.3 - 0.4j)
    for s in [1.3 - 0.4j, 0.5 + 0.5j]:
        ref = loglik_nonsync_quadrature(f.x, f.y, s, 4.0, 2.0)
        assert loglik_nonsync(f, s, von_mises(2.0), 4.0) == pytest.approx(ref, rel=1e-6)


def test_per_antenna_models_match_quadrature():
    f = random_frame(2, 4.0, 3.0, 7)
    models = [von_mises(2.0), von_mises(5.0)]
    s = 1j
    ref = sum(loglik_nonsync_quadrature([xm], [ym], s, 4.0, k)
              for xm, ym, k in zip(f.x, f.y, [2.0, 5.0]))
    assert loglik_nonsync(f, s, models, 4.0) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_psk_shift_identity(n):
    N = 8
    m = von_mises(3.0)
    f = random_frame(3, 6.0, 3.0, n)
    shifted = make_frame(f.x, f.y * np.exp(-2j * np.pi * n / N))
    assert loglik_psk_nonsync(f, n, N, m, 6.0) == pytest.approx(loglik_psk_nonsync(shifted, 0, N, m, 6.0), abs=1e-10)
    assert loglik_psk_sync(f, n, N, m, 6.0) == pytest.approx(loglik_psk_sync(shifted, 0, N, m, 6.0), abs=1e-10)


def test_psk_form_differs_by_constant():
    N = 4
    m = von_mises(2.0)
    f = random_frame(3, 3.0, 2.0, 1)
    for n, s in enumerate(PskConstellation(N).symbols):
        t = likelihood_terms(f, s, m, 3.0, "nonsync")
        assert loglik_psk_nonsync(f, n, N, m, 3.0) == pytest.approx(t.loglik - t.log_A, abs=1e-10)
        t = likelihood_terms(f, s, m, 3.0, "sync")
        assert loglik_psk_sync(f, n, N, m, 3.0) == pytest.approx(t.loglik - t.log_A, abs=1e-10)


def test_likelihood_terms_invariants():
    f = random_frame(4, 10.0, 5.0, 2)
    t = likelihood_terms(f, 1j, von_mises(5.0), 10.0, "nonsync")
    assert t.beta_ratios.shape[0] == 4
    assert np.all(np.abs(t.beta_ratios) <= 1)
    assert np.all((t.zeta >= -np.pi) & (t.zeta < np.pi))
    assert t.clamped == 0
    ts = likelihood_terms(f, 1j, von_mises(5.0), 10.0, "sync")
    assert ts.sum_x == pytest.approx(f.x.sum())
    assert ts.beta_ratios.shape[0] == 1


@pytest.mark.parametrize("mode", ["sync", "nonsync"])
@pytest.mark.parametrize("N", [2, 8])
def test_argmax_equivalence_general_vs_psk(mode, N):
    m = von_mises(3.0)
    params = ChannelParams(3.0, 3, mode, m)
    c = PskConstellation(N)
    b = simulate_frames(params, 1.0, CounterStreams(N), np.arange(300))
    ll_psk, _ = psk_logliks(b.x, b.y, N, mode, m, 3.0)
    fn = loglik_sync if mode == "sync" else loglik_nonsync
    for i in range(len(b)):
        f = b.frame(i)
        full = [fn(f, s, m, 3.0) for s in c.symbols]
        assert int(np.argmax(full)) == int(np.argmax(ll_psk[i]))


def test_detect_ml_noiseless_limit():
    N, target = 8, 2
    c = PskConstellation(N)
    for mode in ["sync", "nonsync"]:
        params = ChannelParams(1e6, 4, mode, von_mises(1e3))
        b = simulate_frames(params, c.symbol(target), CounterStreams(5), np.arange(1000))
        for i in range(len(b)):
            assert detect_ml(b.frame(i), c, params).decided_index == target


@pytest.mark.parametrize("mode", ["sync", "nonsync"])
@pytest.mark.parametrize("k", [0, 1, 5])
def test_detect_ml_exact_phase_offset(mode, k):
    N = 8
    x = np.exp(1j * np.array([0.3, -2.0, 1.1])) * 100
    f = make_frame(x, x * np.exp(2j * np.pi * k / N))
    params = ChannelParams(1e4, 3, mode, von_mises(5.0))
    assert detect_ml(f, PskConstellation(N), params).decided_index == k


def test_detect_ml_tie_flag():
    # zero SNR: every symbol is equally likely
    f = make_frame([0.3 + 0.1j, -1.0], [0.2j, 0.5])
    r = detect_ml(f, PskConstellation(4), ChannelParams(0.0, 2, "nonsync", von_mises(2.0)))
    assert r.decided_index == 0 and r.tie_broken


def test_symbol_relabeling_permutes_loglikelihoods():
    N = 8
    m = von_mises(3.0)
    for mode in ["sync", "nonsync"]:
        f = random_frame(3, 5.0, 3.0, 9, mode=mode)
        p = ChannelParams(5.0, 3, mode, m)
        base = detect_ml(f, PskConstellation(N), p).log_likelihoods
        for k in range(1, N):
            g = make_frame(f.x, f.y * np.exp(2j * np.pi * k / N))
            rolled = detect_ml(g, PskConstellation(N), p).log_likelihoods
            assert np.allclose(rolled, np.roll(base, k), atol=1e-10)


def test_truncation_error_signalled():
    f = random_frame(2, 1e4, 5.0, 1)
    with pytest.raises(TruncationError):
        loglik_nonsync(f, 1.0, von_mises(5.0), 1e4, trunc=3)
    # small Bessel arguments converge with few terms
    assert math.isfinite(loglik_nonsync(random_frame(2, 1e-4, 5.0, 1), 1.0, von_mises(5.0), 1e-4, trunc=3))
    with pytest.raises(ValueError):
        loglik_nonsync(f, 1.0, von_mises(5.0), 1e4, trunc=500)


def test_bracket_floor_guard():
    c = np.array([[1.0], [0.6]])
    lb, n = log_brackets(c, np.array([[np.pi, 0.0]]))
    assert n == 1
    assert lb[0, 0] == pytest.approx(math.log(1e-300))
    assert lb[0, 1] == pytest.approx(math.log(2.2))


def test_general_fourier_model_detection():
    m = general_fourier([1.0, 0.45, 0.1])
    params = ChannelParams(100.0, 4, "nonsync", m)
    c = PskConstellation(4)
    f = simulate_frame(params, c.symbol(1), CounterStreams(3))
    r = detect_ml(f, c, params)
    assert r.log_likelihoods.shape == (4,)


def test_high_snr_sync_regions():
    for N in [2, 4, 8, 16]:
        assert decide_phase(0.0, N) == 0
        assert decide_phase(2 * np.pi / N, N) == 1
        assert decide_phase(np.pi / N, N) == 1
        assert decide_phase(np.pi / N - 1e-9, N) == 0
        assert decide_phase(-np.pi / N, N) == 0
        assert decide_phase(-2 * np.pi / N, N) == N - 1


def test_high_snr_sync_frame():
    x = np.array([1.0, 1.0])
    for N in [2, 8]:
        for psi, expected in [(0.0, 0), (2 * np.pi / N, 1), (np.pi / N, 1)]:
            f = make_frame(x, x * np.exp(1j * psi))
            assert detect_high_snr_sync(f, N).decided_index == expected
    f = make_frame(x, x * np.exp(1j * np.pi / 8))
    assert detect_high_snr_sync(f, 8).tie_broken


def test_llr_examples():
    N = 8
    for n in range(1, N):
        a = math.sin(math.pi * n / N) ** 2
        assert llr_high_snr_nonsync(np.zeros(5), n, N) == pytest.approx(-a, abs=1e-15)
        assert llr_high_snr_nonsync(np.full(5, 2 * np.pi * n / N), n, N) == pytest.approx(a, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(psis=st.lists(st.floats(-math.pi, math.pi, exclude_max=True), min_size=1, max_size=12),
       n=st.integers(1, 7), kappa=st.floats(0.1, 20.0))
def test_llr_matches_likelihood_ratio(psis, n, kappa):
    N, M = 8, len(psis)
    psis = np.array(psis)

    def loglik(mean):
        return kappa * np.sum(np.cos(psis - mean)) - M * math.log(2 * math.pi * np.i0(kappa))

    ref = (loglik(2 * math.pi * n / N) - loglik(0.0)) / (2 * kappa * M)
    assert llr_high_snr_nonsync(psis, n, N) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(psis=st.lists(st.floats(-math.pi, math.pi, exclude_max=True), min_size=1, max_size=12))
def test_nonsync_decision_consistent_with_pairwise_llr(psis):
    N = 8
    psis = np.array(psis)
    f = make_frame(np.ones(psis.size), np.exp(1j * psis))
    r = detect_high_snr_nonsync(f, N)
    scores = r.log_likelihoods
    if np.sort(scores)[-1] - np.sort(scores)[-2] < 1e-9:
        return
    assert r.decided_index == int(np.argmax(scores))
    # the winner beats the others pairwise: rotate so the winner sits at 0
    rot = psis - 2 * np.pi * r.decided_index / N
    for n in range(1, N):
        assert llr_high_snr_nonsync(rot, n, N) < 1e-12


def test_high_snr_nonsync_examples():
    N = 8
    for k in range(N):
        psis = np.full(6, 2 * np.pi * k / N)
        f = make_frame(np.ones(6), np.exp(1j * psis))
        assert detect_high_snr_nonsync(f, N).decided_index == k


def test_single_antenna_high_snr_detectors_agree():
    b = simulate_frames(ChannelParams(30.0, 1, "nonsync", von_mises(2.0)), 1.0, CounterStreams(4), np.arange(2000))
    for i in range(len(b)):
        f = b.frame(i)
        assert detect_high_snr_nonsync(f, 8).decided_index == detect_high_snr_sync(f, 8).decided_index


def test_many_antennas_below_union_bound():
    N, M, kappa, trials = 8, 64, 10.0, 20_000
    psi = sample(von_mises(kappa), np.random.default_rng(2), (trials, M))
    f_err = 0
    from phasenoise_ml.detectors import high_snr_nonsync_decisions
    f_err = np.count_nonzero(high_snr_nonsync_decisions(psi, N) != 0)
    assert f_err / trials <= union_bound_ser(N, kappa, M)


def test_sync_difference_series_report():
    """The displayed synchronous PSK series is only compared, never asserted."""
    N = 8
    m = von_mises(3.0)
    b = simulate_frames(ChannelParams(4.0, 3, "sync", m), 1.0, CounterStreams(31), np.arange(300))
    ll, _ = psk_logliks(b.x, b.y, N, "sync", m, 4.0)
    agree = 0
    for i in range(len(b)):
        f = b.frame(i)
        d = [sync_psk_difference_series(f, n, N, m, 4.0) for n in range(N)]
        agree += int(np.argmax(d) == np.argmax(ll[i]))
    print(f"difference-series argmax agreement: {agree}/{len(b)}")
