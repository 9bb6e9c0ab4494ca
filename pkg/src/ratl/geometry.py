"""Port grid and active/passive array partition.

All positions are wavelength-normalized. The grid is a uniform line of
L = N*M candidate ports; RA m (0-based) owns the contiguous block of N
ports starting at row m*N, and a configuration assigns each RA one port
index in [0, N).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError


@dataclass(frozen=True)
class PortGrid:
    """Uniform grid of discrete candidate antenna positions.

    Attributes
    ----------
    num_ras : int
        Number of reconfigurable antennas M.
    ports_per_ra : int
        Ports per antenna N.
    port_spacing : float
        Inter-port spacing d in wavelengths.
    carrier_freq_hz : float
        Carrier frequency (only used to derive metric positions).
    positions : ndarray [L]
        x_l = l * d for l in 0..L-1, L = N*M.
    """

    num_ras: int
    ports_per_ra: int
    port_spacing: float
    carrier_freq_hz: float
    positions: np.ndarray = field(repr=False)

    @property
    def num_ports(self) -> int:
        return self.num_ras * self.ports_per_ra

    def port_row(self, ra: int, port: int) -> int:
        """Global row index of `port` (0-based) within RA `ra`'s block."""
        return ra * self.ports_per_ra + port

    def config_rows(self, config: np.ndarray) -> np.ndarray:
        """Global row indices selected by a full configuration [M]."""
        return np.arange(self.num_ras) * self.ports_per_ra + np.asarray(config)

    def config_positions(self, config: np.ndarray) -> np.ndarray:
        """Wavelength-normalized positions of the selected ports [M]."""
        return self.positions[self.config_rows(config)]

    def metric_positions(self) -> np.ndarray:
        """Positions in meters, derived from the carrier frequency."""
        wavelength = 299_792_458.0 / self.carrier_freq_hz
        return self.positions * wavelength


def build_grid(
    num_ras: int,
    ports_per_ra: int,
    port_spacing: float,
    carrier_freq_hz: float = 3e9,
) -> PortGrid:
    """Construct a PortGrid, validating all parameters."""
    if num_ras < 1 or ports_per_ra < 1:
        raise ValueError("num_ras and ports_per_ra must be positive integers")
    if port_spacing <= 0:
        raise ValueError("port_spacing must be positive")
    if carrier_freq_hz <= 0:
        raise ValueError("carrier_freq_hz must be positive")
    length = num_ras * ports_per_ra
    positions = np.arange(length) * float(port_spacing)
    return PortGrid(
        num_ras=int(num_ras),
        ports_per_ra=int(ports_per_ra),
        port_spacing=float(port_spacing),
        carrier_freq_hz=float(carrier_freq_hz),
        positions=positions,
    )


def ra_distance(grid: PortGrid, config: np.ndarray, m: int, m_other: int) -> float:
    """Wavelength-normalized distance between two configured antennas.

    Raises DegenerateGeometryError if the two antennas resolve to the
    same physical position (impossible on the block-disjoint grid, but
    validated so future geometries fail loudly).
    """
    if m == m_other:
        raise ValueError("ra_distance requires two distinct antennas")
    pos = grid.config_positions(np.asarray(config))
    dist = abs(float(pos[m_other] - pos[m]))
    if dist < 1e-12:
        raise DegenerateGeometryError(
            f"antennas {m} and {m_other} occupy the same position {pos[m]:.6f}"
        )
    return dist


@dataclass(frozen=True)
class ArrayPartition:
    """Active/passive split of the M antennas into per-active sub-arrays.

    Each of the M_a sub-arrays holds one active (RF-fed) antenna and Q
    passive ones, contiguous in physical order. The active sits at the
    middle of its block for even Q; for odd Q the slot is picked between
    the two central candidates by a seeded fair coin.
    """

    num_active: int
    passive_per_active: int
    active_offsets: tuple[int, ...]
    rng_seed: int

    def __post_init__(self) -> None:
        if self.num_active < 1:
            raise ValueError("need at least one active antenna")
        if self.passive_per_active < 0:
            raise ValueError("passive_per_active must be nonnegative")
        if len(self.active_offsets) != self.num_active:
            raise ValueError("one active offset per sub-array required")
        for off in self.active_offsets:
            if not 0 <= off <= self.passive_per_active:
                raise ValueError(f"active offset {off} outside its sub-array")

    @property
    def num_passive(self) -> int:
        return self.num_active * self.passive_per_active

    @property
    def num_ras(self) -> int:
        return self.num_active + self.num_passive

    @property
    def subarray_size(self) -> int:
        return self.passive_per_active + 1

    def subarray_members(self, s: int) -> np.ndarray:
        """Physical RA indices of sub-array s, in grid order."""
        start = s * self.subarray_size
        return np.arange(start, start + self.subarray_size)

    def active_index(self, s: int) -> int:
        """Physical RA index of sub-array s's active antenna."""
        return s * self.subarray_size + self.active_offsets[s]

    @property
    def active_mask(self) -> np.ndarray:
        """Boolean [M]: True where the antenna is active."""
        mask = np.zeros(self.num_ras, dtype=bool)
        for s in range(self.num_active):
            mask[self.active_index(s)] = True
        return mask

    @property
    def active_indices(self) -> np.ndarray:
        return np.nonzero(self.active_mask)[0]

    @property
    def passive_indices(self) -> np.ndarray:
        return np.nonzero(~self.active_mask)[0]


def build_partition(
    num_active: int, passive_per_active: int, seed: int = 0
) -> ArrayPartition:
    """Build an ArrayPartition, tossing the seeded coin for odd Q."""
    q = int(passive_per_active)
    if q % 2 == 0:
        offsets = tuple([q // 2] * num_active)
    else:
        rng = np.random.default_rng(seed)
        offsets = tuple(int(q // 2 + rng.integers(0, 2)) for _ in range(num_active))
    return ArrayPartition(
        num_active=int(num_active),
        passive_per_active=q,
        active_offsets=offsets,
        rng_seed=int(seed),
    )
