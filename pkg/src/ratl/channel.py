"""Per-user channel synthesis over the full port grid.

Two models:

- clustered geometric model (mmWave, used with the active/passive array):
  normalized steering vectors, i.i.d. CN(0,1) path gains, followed by a
  Bessel-J0 spatial correlation stage;
- correlated Rayleigh (mid-band, all-active array): unnormalized
  phase-ramp steering rows summed over N_r directions around a per-user
  center angle.

Conventions (documented, enforced by tests): the clustered steering
vector uses exp(-j 2 pi x_l cos(aod)) / sqrt(L); the Rayleigh steering
row uses exp(+j 2 pi (l) d sin(aod)) with unit modulus. Channels are
stored as [L, K] with one column per user; adjoints in the formulas
below act on columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PortGrid
from .special import bessel_j0_array


@dataclass(frozen=True)
class SVChannelParams:
    """Clustered-channel parameters (N_c clusters, N_p paths each)."""

    num_clusters: int = 3
    paths_per_cluster: int = 10

    def __post_init__(self) -> None:
        if self.num_clusters < 1 or self.paths_per_cluster < 1:
            raise ValueError("cluster/path counts must be positive")


@dataclass(frozen=True)
class RayleighChannelParams:
    """Correlated-Rayleigh parameters (N_r directions per user)."""

    num_directions: int = 50
    angular_spread: float = np.pi / 8

    def __post_init__(self) -> None:
        if self.num_directions < 1:
            raise ValueError("num_directions must be positive")
        if self.angular_spread < 0:
            raise ValueError("angular_spread must be nonnegative")


@dataclass(frozen=True)
class ChannelSet:
    """Port-level channels [L, K] plus the model tag."""

    port_channels: np.ndarray = field(repr=False)
    model: str = "sv"

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.port_channels)):
            raise ValueError("channel entries must be finite")

    @property
    def num_users(self) -> int:
        return self.port_channels.shape[1]


def steering_vector_sv(grid: PortGrid, aod: float) -> np.ndarray:
    """Unit-norm steering vector over all L ports for one departure angle.

    Entry l is exp(-j 2 pi x_l cos(aod)) / sqrt(L). The angle must lie
    in [-pi/2, pi/2].
    """
    if abs(aod) > np.pi / 2:
        raise ValueError(f"departure angle {aod} outside [-pi/2, pi/2]")
    length = grid.num_ports
    phase = -2j * np.pi * grid.positions * np.cos(aod)
    return np.exp(phase) / np.sqrt(length)


def synthesize_sv(
    grid: PortGrid,
    num_users: int,
    params: SVChannelParams,
    rng: np.random.Generator,
    gains: np.ndarray | None = None,
    aods: np.ndarray | None = None,
) -> ChannelSet:
    """Draw clustered channels for all users over the full grid.

    h_k = sqrt(L / (N_c N_p)) * sum_{c,p} beta_{c,p,k} a(aod_{c,p,k}),
    with beta i.i.d. CN(0,1) and aods i.i.d. uniform on [-pi/2, pi/2]
    unless supplied. E[||h_k||^2] = L under the defaults.

    Parameters
    ----------
    gains : complex [N_c, N_p, K], optional
    aods : real [N_c, N_p, K], optional

    Returns
    -------
    ChannelSet with port_channels of shape [L, K].
    """
    n_c, n_p = params.num_clusters, params.paths_per_cluster
    if aods is None:
        aods = rng.uniform(-np.pi / 2, np.pi / 2, size=(n_c, n_p, num_users))
    else:
        aods = np.asarray(aods, dtype=float)
        if np.any(np.abs(aods) > np.pi / 2):
            raise ValueError("departure angles outside [-pi/2, pi/2]")
    if gains is None:
        gains = _complex_normal(rng, (n_c, n_p, num_users))
    else:
        gains = np.asarray(gains, dtype=complex)
    if gains.shape != (n_c, n_p, num_users) or aods.shape != (n_c, n_p, num_users):
        raise ValueError("gain/aod arrays must have shape [N_c, N_p, K]")

    length = grid.num_ports
    # [L, N_c*N_p] steering matrix per user would be K small matmuls; the
    # flat einsum over all paths at once is clearer and just as fast here.
    cosines = np.cos(aods.reshape(-1, num_users))  # [P, K]
    phases = np.exp(-2j * np.pi * grid.positions[:, None, None] * cosines[None, :, :])
    scale = np.sqrt(length / (n_c * n_p)) / np.sqrt(length)
    h = scale * np.einsum("lpk,pk->lk", phases, gains.reshape(-1, num_users))
    return ChannelSet(port_channels=h, model="sv")


def correlation_matrix(grid: PortGrid) -> np.ndarray:
    """Port-to-port spatial correlation: J0(2 pi |x_l - x_l'|), ones on the diagonal."""
    diffs = np.abs(grid.positions[:, None] - grid.positions[None, :])
    corr = bessel_j0_array(2 * np.pi * diffs)
    np.fill_diagonal(corr, 1.0)
    return corr


def apply_correlation(h_port: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """Color port-level channels with the principal square root of `corr`.

    For the real symmetric correlation used here the adjoint convention
    reduces to left-multiplication: returns R^{1/2} @ h_port. Eigenvalues
    in [-1e-10, 0) are clamped to zero; anything lower is rejected as
    indefinite.
    """
    corr = np.asarray(corr)
    if corr.shape[0] != corr.shape[1] or corr.shape[0] != h_port.shape[0]:
        raise ValueError("correlation matrix shape mismatch")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(corr)
    if np.any(eigvals < -1e-10):
        raise ValueError(f"correlation matrix indefinite (min eigenvalue {eigvals.min():.3e})")
    eigvals = np.clip(eigvals, 0.0, None)
    sqrt_corr = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return sqrt_corr @ h_port


def synthesize_rayleigh(
    grid: PortGrid,
    num_users: int,
    params: RayleighChannelParams,
    rng: np.random.Generator,
    center_aods: np.ndarray | None = None,
) -> ChannelSet:
    """Draw correlated-Rayleigh channels for all users.

    Per user: N_r departure angles uniform in [center - spread,
    center + spread] (center itself uniform on [-pi/2, pi/2] unless
    given), fading g ~ CN(0, I_{N_r}), and
    h_k = A_k^H g_k with steering rows a_l = exp(j 2 pi l d sin(aod)).
    Per-port power E[|h_{k,l}|^2] = N_r (steering rows are unnormalized).
    """
    n_r = params.num_directions
    if center_aods is None:
        center_aods = rng.uniform(-np.pi / 2, np.pi / 2, size=num_users)
    else:
        center_aods = np.asarray(center_aods, dtype=float)
        if center_aods.shape != (num_users,):
            raise ValueError("need one center angle per user")
    offsets = rng.uniform(-params.angular_spread, params.angular_spread, size=(num_users, n_r))
    aods = center_aods[:, None] + offsets  # [K, N_r]
    fading = _complex_normal(rng, (num_users, n_r))

    # steering[k, r, l] = exp(j 2 pi l d sin(aod_{k,r}))
    ramp = grid.positions  # l * d
    phases = np.exp(2j * np.pi * ramp[None, None, :] * np.sin(aods)[:, :, None])
    h = np.einsum("kr,krl->lk", fading.conj(), phases).conj()
    return ChannelSet(port_channels=h, model="rayleigh")


def select_ports(h_port: np.ndarray, config: np.ndarray, ports_per_ra: int) -> np.ndarray:
    """Gather the selected-port rows: output row m = h_port[m*N + config[m]].

    `config` holds one 0-based port index per antenna.
    """
    config = np.asarray(config)
    if config.ndim != 1:
        raise ValueError("config must be a flat per-antenna port vector")
    if np.any(config < 0) or np.any(config >= ports_per_ra):
        raise ValueError("config entries must lie in [0, ports_per_ra)")
    rows = np.arange(config.size) * ports_per_ra + config
    if rows[-1] >= h_port.shape[0]:
        raise ValueError("config addresses rows beyond the port channel matrix")
    return h_port[rows, :]


def _complex_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """i.i.d. CN(0, 1) draws: unit total variance split over re/im."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
