import numpy as np
import pytest

from ratl.errors import RankDeficientError
from ratl.precoding import (
    Precoder,
    coupled_precoder,
    precoder,
    sinr_allactive,
    sinr_mamp,
)

P_MAX = 10.0
SIGMA2 = 1.0
KINDS = ("mf", "zf", "wf")


def rand_channel(rng, m, k):
    return (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))) / np.sqrt(2)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(6))
def test_power_constraint_at_equality(kind, seed):
    rng = np.random.default_rng(seed)
    h = rand_channel(rng, 5, 3)
    p = precoder(h, kind, P_MAX, SIGMA2)
    assert abs(np.trace(p.W.conj().T @ p.W).real - P_MAX) <= 1e-9 * P_MAX
    assert np.allclose(p.W, p.alpha * p.F)


def test_mf_single_user_unit_direction():
    h = np.zeros((4, 1), dtype=complex)
    h[0, 0] = 1.0
    p = precoder(h, "mf", P_MAX, SIGMA2)
    want = np.zeros((4, 1), dtype=complex)
    want[0, 0] = np.sqrt(P_MAX)
    assert np.allclose(p.W, want)
    point = sinr_mamp(h, p.W, SIGMA2)
    assert point.sinr[0] == pytest.approx(P_MAX / SIGMA2)


@pytest.mark.parametrize("seed", range(4))
def test_zf_nulls_interference(seed):
    rng = np.random.default_rng(seed)
    h = rand_channel(rng, 6, 3)
    p = precoder(h, "zf", P_MAX, SIGMA2)
    gram = h.conj().T @ p.F
    assert np.allclose(gram, np.eye(3), atol=1e-9)
    cross = h.conj().T @ p.W
    off = cross - np.diag(np.diag(cross))
    norms = np.abs(h).sum() * np.abs(p.W).sum()
    assert np.max(np.abs(off)) <= 1e-9 * norms


def test_wf_approaches_zf_direction_at_vanishing_noise():
    rng = np.random.default_rng(3)
    h = rand_channel(rng, 5, 2)
    f_zf = precoder(h, "zf", P_MAX, SIGMA2).F
    # zeta = sigma2 K / P_max = 1e-12
    f_wf = precoder(h, "wf", 2e12, 1.0).F
    for k in range(2):
        a, b = f_wf[:, k], f_zf[:, k]
        cos = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        assert np.arccos(min(cos, 1.0)) < 1e-3


def test_zf_rank_deficient():
    rng = np.random.default_rng(0)
    with pytest.raises(RankDeficientError):
        precoder(rand_channel(rng, 2, 3), "zf", P_MAX, SIGMA2)  # K > M
    h = rand_channel(rng, 4, 2)
    h[:, 1] = h[:, 0]  # duplicated user
    with pytest.raises(RankDeficientError):
        precoder(h, "zf", P_MAX, SIGMA2)


def test_pmax_zero_silences_array():
    rng = np.random.default_rng(1)
    h = rand_channel(rng, 4, 2)
    p = precoder(h, "wf", 0.0, SIGMA2)
    assert p.alpha == 0.0
    assert np.allclose(p.W, 0.0)
    point = sinr_mamp(h, p.W, SIGMA2)
    assert point.sum_rate == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_sinr_mamp_matches_scalar_loop(seed):
    rng = np.random.default_rng(seed)
    h = rand_channel(rng, 5, 3)
    w = rand_channel(rng, 5, 3) * 2.0
    point = sinr_mamp(h, w, SIGMA2)
    for k in range(3):
        cross = [abs(np.vdot(h[:, k], w[:, i])) ** 2 for i in range(3)]
        gamma = cross[k] / (sum(cross) - cross[k] + SIGMA2)
        assert point.sinr[k] == pytest.approx(gamma, rel=1e-12)
        assert point.rates[k] == pytest.approx(np.log2(1 + gamma), rel=1e-12)
    assert point.sum_rate == pytest.approx(point.rates.sum())
    assert point.noise_power == SIGMA2


@pytest.mark.parametrize("seed", range(5))
def test_sinr_allactive_matches_scalar_loop(seed):
    rng = np.random.default_rng(seed + 10)
    h = rand_channel(rng, 4, 2)
    f = rand_channel(rng, 4, 2)
    f_scale = 0.7
    point = sinr_allactive(h, f, f_scale, SIGMA2)
    for k in range(2):
        cross = [abs(np.vdot(h[:, k], f[:, i])) ** 2 for i in range(2)]
        gamma = cross[k] / (sum(cross) - cross[k] + f_scale**2 * SIGMA2)
        assert point.sinr[k] == pytest.approx(gamma, rel=1e-12)


def test_sinr_allactive_f_quadruples_noise():
    rng = np.random.default_rng(2)
    h = rand_channel(rng, 4, 1)
    f = rand_channel(rng, 4, 1)
    a = sinr_allactive(h, f, 1.0, SIGMA2)
    b = sinr_allactive(h, f, 2.0, SIGMA2)
    assert b.sinr[0] == pytest.approx(a.sinr[0] / 4)


def test_sinr_allactive_equals_mamp_with_scaled_noise():
    rng = np.random.default_rng(4)
    h = rand_channel(rng, 4, 2)
    f = rand_channel(rng, 4, 2)
    f_scale = 1.3
    a = sinr_allactive(h, f, f_scale, SIGMA2)
    b = sinr_mamp(h, f, f_scale**2 * SIGMA2)
    assert np.allclose(a.sinr, b.sinr)
    # but the reported receiver noise stays sigma^2
    assert a.noise_power == SIGMA2


@pytest.mark.parametrize("seed", range(4))
def test_coupled_precoder_power_and_identity(seed):
    rng = np.random.default_rng(seed + 20)
    h_bar = rand_channel(rng, 4, 2)
    c = np.eye(4) + 0.2 * rand_channel(rng, 4, 4)
    v, f = coupled_precoder(h_bar, c, "wf", P_MAX, SIGMA2)
    assert np.sum(np.abs(v) ** 2) == pytest.approx(P_MAX, rel=1e-9)
    # end-to-end: H^dag C V = (1/f) H^dag F for any H
    h = rand_channel(rng, 4, 3)
    f_mat = precoder(h_bar, "wf", P_MAX, SIGMA2).F
    lhs = h.conj().T @ c @ v
    rhs = h.conj().T @ f_mat / f
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_coupled_precoder_identity_c_reduces_to_normalized():
    rng = np.random.default_rng(30)
    h_bar = rand_channel(rng, 3, 2)
    v, f = coupled_precoder(h_bar, np.eye(3), "wf", P_MAX, SIGMA2)
    p = precoder(h_bar, "wf", P_MAX, SIGMA2)
    assert f == pytest.approx(np.linalg.norm(p.F) / np.sqrt(P_MAX))
    assert np.allclose(v, p.F / (f if f else 1.0))
    assert np.allclose(v, p.W)


def test_rate_point_is_frozen_value_object():
    rng = np.random.default_rng(5)
    h = rand_channel(rng, 3, 2)
    point = sinr_mamp(h, precoder(h, "wf", P_MAX, SIGMA2).W, SIGMA2)
    assert np.all(point.sinr >= 0)
    assert point.sum_rate >= 0
