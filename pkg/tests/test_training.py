import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfleo.channel import ChannelRealization, LargeScaleParams, draw_channel
from cfleo.training import (DegenerateEstimate, assign_pilots, estimate_statistics,
                            estimator_moment_check, innovation_variance, mmse_estimate, pilot_book,
                            receive_and_despread)
from cfleo.validation import canonical_inputs, estimator_errors


def test_orthogonal_when_pilots_suffice():
    pa = assign_pilots(30, 30)
    assert all(s == frozenset({k}) for k, s in enumerate(pa.copilot_sets))


def test_round_robin_pairs():
    pa = assign_pilots(60, 30)
    sizes = np.bincount(pa.pilot_index, minlength=30)
    assert np.all(sizes == 2)
    assert pa.copilot_sets[3] == frozenset({3, 33})


def test_default_pilot_power_is_5dbw():
    assert assign_pilots(4, 2).pilot_power[0] == pytest.approx(10 ** 0.5)


def test_scalar_pilot_book():
    np.testing.assert_allclose(pilot_book(1), [[1.0]])


@given(st.integers(1, 64))
def test_pilot_book_orthogonal(tau):
    book = pilot_book(tau)
    np.testing.assert_allclose(book.conj().T @ book, tau * np.eye(tau), atol=1e-9)


def test_assign_rejects_zero_pilots():
    with pytest.raises(ValueError):
        assign_pilots(3, 0)


def test_clean_despread_singleton(rng):
    ls = LargeScaleParams.from_gain(np.ones((2, 3)), 2.0)
    pa = assign_pilots(3, 3, pilot_power=2.0)
    ch = draw_channel(ls, rng)
    obs = receive_and_despread(ch, pa, 0.0, rng)
    np.testing.assert_allclose(obs.despread, np.sqrt(2.0) * 3 * ch.h, atol=1e-12)


def test_clean_despread_copilots(rng):
    ls = LargeScaleParams.from_gain(np.ones((2, 2)), 2.0)
    pa = assign_pilots(2, 1, pilot_power=1.0)
    pa = type(pa)(1, pa.pilot_index, np.array([1.0, 4.0]))
    ch = draw_channel(ls, rng)
    obs = receive_and_despread(ch, pa, 0.0, rng)
    expect = 1 * (1.0 * ch.h[:, 0] + 2.0 * ch.h[:, 1])
    np.testing.assert_allclose(obs.despread[:, 0], expect, atol=1e-12)
    np.testing.assert_allclose(obs.despread[:, 1], expect, atol=1e-12)


def test_projected_noise_variance(rng):
    tau, sigma2 = 5, 0.7
    ls = LargeScaleParams.from_gain(np.zeros((1, 1)), 1.0)
    pa = assign_pilots(1, tau)
    zero = np.zeros((100_000, 1, 1), complex)
    obs = receive_and_despread(ChannelRealization(zero, zero.real, zero), pa, sigma2, rng)
    assert np.var(obs.despread) == pytest.approx(tau * sigma2, rel=0.02)


def test_deterministic_channel_estimate(rng):
    ls = LargeScaleParams.from_gain(np.array([[0.5, 2.0]]), np.inf)
    pa = assign_pilots(2, 1)
    ch = draw_channel(ls, rng)
    obs = receive_and_despread(ch, pa, 0.3, rng)
    est = mmse_estimate(obs, ls, ch.phase, pa)
    np.testing.assert_allclose(est.hhat, np.sqrt(ls.beta) * np.exp(1j * ch.phase))


def test_no_pilot_energy(rng):
    ls = LargeScaleParams.from_gain(np.ones((2, 2)), 1.0)
    pa = assign_pilots(2, 1, pilot_power=0.0)
    np.testing.assert_allclose(innovation_variance(ls, pa, 0.4), 0.4)
    ch = draw_channel(ls, rng)
    est = mmse_estimate(receive_and_despread(ch, pa, 0.4, rng), ls, ch.phase, pa)
    np.testing.assert_allclose(est.hhat, est.mean)


def test_degenerate_estimate():
    ls = LargeScaleParams.from_gain(np.ones((1, 1)), np.inf)
    with pytest.raises(DegenerateEstimate):
        estimate_statistics(ls, assign_pilots(1, 1), 0.0)


def test_innovation_variance_oracle():
    inp = canonical_inputs()
    gamma = innovation_variance(inp.ls, inp.pa, 0.5)
    lam = inp.ls.lam
    # UTs 0/2 share pilot 0, 1/3 share pilot 1; q = 1, tau = 2
    np.testing.assert_allclose(gamma[:, 0], 2 * (lam[:, 0] + lam[:, 2]) + 0.5)
    np.testing.assert_allclose(gamma[:, 3], 2 * (lam[:, 1] + lam[:, 3]) + 0.5)


@given(st.lists(st.floats(0.01, 10), min_size=4, max_size=4), st.floats(0.01, 100), st.floats(1e-3, 1))
def test_estimate_variance_bounded_by_nlos(gains, kappa, noise):
    ls = LargeScaleParams.from_gain(np.array(gains).reshape(2, 2), kappa)
    st_ = estimate_statistics(ls, assign_pilots(2, 1), noise)
    assert np.all(st_.variance >= 0)
    assert np.all(st_.variance <= ls.lam * (1 + 1e-12))
    np.testing.assert_allclose(st_.second_moment, ls.beta + st_.variance)


def test_estimator_moments_fixed_phase():
    errs = estimator_errors(100_000, seed=7)
    assert max(errs.values()) < 0.02, errs


def test_estimator_check_returns_closed_forms(rng):
    inp = canonical_inputs()
    phases = rng.uniform(-np.pi, np.pi, inp.ls.shape)
    res = estimator_moment_check(inp.ls, inp.pa, 0.5, phases, 20_000, rng)
    closed_cov = res["copilot_cov"][0]
    assert closed_cov[0, 0, 2] > 0 and closed_cov[0, 0, 1] == 0
