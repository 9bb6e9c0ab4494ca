import numpy as np
import pytest

from ratl.channel import (
    RayleighChannelParams,
    SVChannelParams,
    apply_correlation,
    correlation_matrix,
    select_ports,
    steering_vector_sv,
    synthesize_rayleigh,
    synthesize_sv,
)
from ratl.geometry import build_grid
from ratl.special import bessel_j0

GRID = build_grid(3, 4, 1.0 / 16.0, 28e9)
WIDE_GRID = build_grid(4, 4, 0.25, 3e9)


def test_sv_power_normalization():
    # E||h_k||^2 = L; average over many draws
    rng = np.random.default_rng(0)
    total, draws = 0.0, 400
    for _ in range(draws):
        h = synthesize_sv(GRID, 2, SVChannelParams(), rng).port_channels
        total += np.mean(np.sum(np.abs(h) ** 2, axis=0))
    mean_power = total / draws
    assert abs(mean_power - GRID.num_ports) / GRID.num_ports < 0.03


def test_sv_shapes_and_determinism():
    h1 = synthesize_sv(GRID, 3, SVChannelParams(), np.random.default_rng(5)).port_channels
    h2 = synthesize_sv(GRID, 3, SVChannelParams(), np.random.default_rng(5)).port_channels
    assert h1.shape == (12, 3)
    assert np.array_equal(h1, h2)


def test_sv_with_pinned_angles_and_gains():
    params = SVChannelParams(num_clusters=1, paths_per_cluster=1)
    # cos-convention: the phase ramp vanishes at aod = pi/2 (endfire-normal)
    aods = np.full((1, 1, 1), np.pi / 2)
    gains = np.ones((1, 1, 1), dtype=complex)
    h = synthesize_sv(GRID, 1, params, np.random.default_rng(0), gains=gains, aods=aods).port_channels
    assert np.allclose(h, h[0, 0])
    assert np.sum(np.abs(h) ** 2) == pytest.approx(GRID.num_ports)


def test_steering_vector_rejects_out_of_sector():
    with pytest.raises(ValueError):
        steering_vector_sv(GRID, np.pi / 2 + 0.01)
    v = steering_vector_sv(GRID, 0.3)
    assert v.shape == (12,)
    # unit-norm vector with equal-magnitude entries
    assert np.allclose(np.abs(v), 1.0 / np.sqrt(12))
    assert np.vdot(v, v).real == pytest.approx(1.0)


def test_correlation_matrix_is_j0_of_spacing():
    r = correlation_matrix(GRID)
    assert np.allclose(np.diag(r), 1.0)
    assert np.allclose(r, r.T)
    d01 = abs(GRID.positions[0] - GRID.positions[1])
    assert r[0, 1] == pytest.approx(bessel_j0(2 * np.pi * d01))
    d03 = abs(GRID.positions[0] - GRID.positions[3])
    assert r[0, 3] == pytest.approx(bessel_j0(2 * np.pi * d03))


def test_apply_correlation_identity_is_noop():
    rng = np.random.default_rng(1)
    h = synthesize_sv(GRID, 2, SVChannelParams(), rng).port_channels
    out = apply_correlation(h, np.eye(GRID.num_ports))
    assert np.allclose(out, h)


def test_apply_correlation_shapes_second_moment():
    # columns of R^(1/2) h have covariance R when h is white
    rng = np.random.default_rng(2)
    r = correlation_matrix(GRID)
    l = GRID.num_ports
    acc = np.zeros((l, l), dtype=complex)
    draws = 3000
    for _ in range(draws):
        white = (rng.standard_normal((l, 1)) + 1j * rng.standard_normal((l, 1))) / np.sqrt(2)
        shaped = apply_correlation(white, r)
        acc += shaped @ shaped.conj().T
    emp = acc / draws
    assert np.linalg.norm(emp - r) / np.linalg.norm(r) < 0.1


def test_apply_correlation_rejects_asymmetric():
    r = np.eye(GRID.num_ports)
    r[0, 1] = 0.5
    with pytest.raises(ValueError):
        apply_correlation(np.zeros((GRID.num_ports, 1), dtype=complex), r)


def test_apply_correlation_rejects_indefinite():
    r = np.eye(GRID.num_ports)
    r[0, 1] = r[1, 0] = 1.5  # 2x2 block eigenvalues 1 +- 1.5
    with pytest.raises(ValueError):
        apply_correlation(np.zeros((GRID.num_ports, 1), dtype=complex), r)


def test_rayleigh_power_and_determinism():
    rng = np.random.default_rng(3)
    params = RayleighChannelParams()
    total, draws = 0.0, 300
    for _ in range(draws):
        h = synthesize_rayleigh(WIDE_GRID, 2, params, rng).port_channels
        total += np.mean(np.abs(h) ** 2)
    # per-port power N_r (unnormalized steering rows)
    assert abs(total / draws - params.num_directions) / params.num_directions < 0.05
    h1 = synthesize_rayleigh(WIDE_GRID, 2, params, np.random.default_rng(9)).port_channels
    h2 = synthesize_rayleigh(WIDE_GRID, 2, params, np.random.default_rng(9)).port_channels
    assert np.array_equal(h1, h2)


def test_rayleigh_center_aods_validated():
    with pytest.raises(ValueError):
        synthesize_rayleigh(
            WIDE_GRID, 2, RayleighChannelParams(), np.random.default_rng(0),
            center_aods=np.zeros(3),
        )


def test_select_ports_gathers_rows():
    h = np.arange(32, dtype=float).reshape(16, 2) + 0j
    cfg = np.array([1, 0, 3, 2])
    out = select_ports(h, cfg, 4)
    assert np.array_equal(out, h[[1, 4, 11, 14]])


@pytest.mark.parametrize("cfg", [np.array([4, 0, 0, 0]), np.array([-1, 0, 0, 0])])
def test_select_ports_validates_range(cfg):
    h = np.zeros((16, 2), dtype=complex)
    with pytest.raises(ValueError):
        select_ports(h, cfg, 4)


def test_select_ports_validates_overflow():
    h = np.zeros((8, 2), dtype=complex)
    with pytest.raises(ValueError):
        select_ports(h, np.array([0, 0, 0]), 4)
