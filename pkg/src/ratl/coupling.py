"""Induced-EMF impedance physics and the circuit coupling layer.

Self and mutual impedances of thin parallel dipoles follow the classical
induced-EMF closed forms in terms of Si/Ci (wavelength-normalized length
l and radius a). The circuit layer assembles the mutual impedance matrix
Z for a configured array, the admittance-like transfer matrix
Z_T = (Z + diag(z_L))^-1, and the coupling matrix C = (z_A I + X) Z_T
that maps uncoupled to coupled channels via H_bar^H = H^H C.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NearSingularError
from .geometry import PortGrid, ra_distance
from .special import EULER_GAMMA, sin_cos_integrals

FREE_SPACE_IMPEDANCE = 120.0 * np.pi  # ohms

COND_LIMIT = 1e12


@dataclass(frozen=True)
class DipoleSpec:
    """Thin-dipole element description (lengths in wavelengths).

    The default half-wave, a = 1e-4 dipole gives the textbook
    73.1 + j42.5 ohm self impedance. `source_impedance` defaults to the
    conjugate of the self impedance (maximum power transfer).
    """

    length: float = 0.5
    radius: float = 1e-4
    source_impedance: complex | None = None

    def __post_init__(self) -> None:
        if self.length <= 0 or self.radius <= 0:
            raise ValueError("dipole length and radius must be positive")
        if self.radius >= self.length / 10:
            raise ValueError("thin-dipole model requires radius < length/10")

    @cached_property
    def z_self(self) -> complex:
        return self_impedance(self)

    @cached_property
    def z_source(self) -> complex:
        if self.source_impedance is not None:
            return complex(self.source_impedance)
        return self.z_self.conjugate()


def self_impedance(spec: DipoleSpec) -> complex:
    """Self impedance of a thin dipole via the induced-EMF closed form.

    Uses u = 2*pi*l; the trailing Ci argument is 4*pi*a^2/l. Output is
    independent of the source impedance.
    """
    length, radius = spec.length, spec.radius
    u = 2 * np.pi * length
    si_u, ci_u = sin_cos_integrals(u)
    si_2u, ci_2u = sin_cos_integrals(2 * u)
    _, ci_a = sin_cos_integrals(4 * np.pi * radius**2 / length)
    eta = FREE_SPACE_IMPEDANCE
    resistance = (eta / (2 * np.pi)) * (
        EULER_GAMMA
        + np.log(u)
        - ci_u
        + 0.5 * np.sin(u) * (si_2u - 2 * si_u)
        + 0.5 * np.cos(u) * (EULER_GAMMA + np.log(u / 2) + ci_2u - 2 * ci_u)
    )
    reactance = (eta / (4 * np.pi)) * (
        2 * si_u
        + np.cos(u) * (2 * si_u - si_2u)
        - np.sin(u) * (2 * ci_u - ci_2u - ci_a)
    )
    if resistance <= 0:
        raise ValueError(f"nonphysical self resistance {resistance:.3e} for l={length}")
    return complex(resistance, reactance)


def mutual_impedance(spec: DipoleSpec, dist: float) -> complex:
    """Mutual impedance of two parallel side-by-side dipoles at distance `dist`.

    Arguments of the integrals: u0 = 2 pi d, u1/u2 = 2 pi (sqrt(d^2+l^2) +- l).
    Symmetric in the pair (depends only on |dist|); diverges as dist -> 0.
    """
    if dist <= 0:
        raise ValueError("mutual impedance requires a positive distance")
    length = spec.length
    u0 = 2 * np.pi * dist
    hyp = np.sqrt(dist * dist + length * length)
    u1 = 2 * np.pi * (hyp + length)
    u2 = 2 * np.pi * (hyp - length)
    si_0, ci_0 = sin_cos_integrals(u0)
    si_1, ci_1 = sin_cos_integrals(u1)
    si_2, ci_2 = sin_cos_integrals(u2)
    eta = FREE_SPACE_IMPEDANCE
    resistance = (eta / (4 * np.pi)) * (2 * ci_0 - ci_1 - ci_2)
    reactance = -(eta / (4 * np.pi)) * (2 * si_0 - si_1 - si_2)
    return complex(resistance, reactance)


def build_impedance_matrix(
    spec: DipoleSpec, grid: PortGrid, config: np.ndarray
) -> np.ndarray:
    """Mutual impedance matrix Z [M, M] for a configured array.

    Diagonal = self impedance; off-diagonal (m, m') = mutual impedance at
    the configured spacing. Symmetric by construction; generally not
    Toeplitz because the selected positions are non-uniform.
    """
    m_count = grid.num_ras
    z = np.zeros((m_count, m_count), dtype=complex)
    np.fill_diagonal(z, spec.z_self)
    for m in range(m_count):
        for mp in range(m + 1, m_count):
            zm = mutual_impedance(spec, ra_distance(grid, config, m, mp))
            z[m, mp] = zm
            z[mp, m] = zm
    return z


@dataclass(frozen=True)
class CouplingState:
    """Circuit matrices for one array configuration and load vector.

    Z_T = (Z + diag(z_L))^-1 and C = (z_A I + diag(z_L)) Z_T.
    """

    Z: np.ndarray = field(repr=False)
    z_L: np.ndarray = field(repr=False)
    Z_T: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)

    @property
    def X(self) -> np.ndarray:
        return np.diag(self.z_L)

    @property
    def z_self(self) -> complex:
        return complex(self.Z[0, 0])


def effective_coupling(Z: np.ndarray, z_L: np.ndarray) -> CouplingState:
    """Invert the loaded circuit and assemble the coupling matrix.

    Refuses to proceed when cond(Z + diag(z_L)) exceeds 1e12 rather than
    return garbage. The self impedance z_A is read off Z's diagonal.
    """
    Z = np.asarray(Z, dtype=complex)
    z_L = np.asarray(z_L, dtype=complex)
    loaded = Z + np.diag(z_L)
    cond = np.linalg.cond(loaded)
    if not cond < COND_LIMIT:
        raise NearSingularError(
            f"loaded impedance matrix is near singular (cond ~ {cond:.3e})"
        )
    z_t = np.linalg.inv(loaded)
    z_a = Z[0, 0]
    c = (z_a * np.eye(Z.shape[0]) + np.diag(z_L)) @ z_t
    return CouplingState(Z=Z, z_L=z_L, Z_T=z_t, C=c)


def coupled_channel(h_selected: np.ndarray, state: CouplingState) -> np.ndarray:
    """Coupled channel H_bar with H_bar^H = H^H C, i.e. H_bar = C^H H."""
    return state.C.conj().T @ h_selected
