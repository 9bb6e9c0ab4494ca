"""Linear precoders (MF/ZF/WF), power normalization, SINR and sum-rate.

Shapes: channels H are [M, K] with one column h_k per user; precoders W
and F are [M, K] with one column per user. All adjoint products reduce
to (H^H W)[k, i] = h_k^H w_i.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientError

PRECODER_KINDS = ("mf", "zf", "wf")

_ZF_RCOND = 1e-10


@dataclass(frozen=True)
class Precoder:
    """Unnormalized direction matrix F plus the power scaling alpha."""

    kind: str
    F: np.ndarray = field(repr=False)
    alpha: float

    @property
    def W(self) -> np.ndarray:
        """Power-normalized precoding matrix alpha * F."""
        return self.alpha * self.F


@dataclass(frozen=True)
class RatePoint:
    """Per-user SINRs/rates and the sum rate at one operating point."""

    sinr: np.ndarray
    rates: np.ndarray
    sum_rate: float
    noise_power: float


def precoder(
    h: np.ndarray, kind: str, p_max: float, sigma2: float
) -> Precoder:
    """Build an MF/ZF/WF precoder for channel `h` [M, K].

    F_mf = H; F_zf = H (H^H H)^+; F_wf = H (H^H H + zeta I)^-1 with
    zeta = sigma2*K/p_max. alpha = sqrt(p_max / tr(F F^H)) so that
    tr(W^H W) = p_max exactly; p_max = 0 yields the all-zero precoder.
    """
    if kind not in PRECODER_KINDS:
        raise ValueError(f"unknown precoder kind {kind!r}")
    h = np.asarray(h, dtype=complex)
    m_count, n_users = h.shape
    if p_max < 0:
        raise ValueError("p_max must be nonnegative")

    if kind == "zf" and n_users > m_count:
        raise RankDeficientError(
            f"zero-forcing needs at least as many antennas as users ({m_count} < {n_users})"
        )
    if kind == "mf":
        f = h.copy()
    elif kind == "zf":
        gram = h.conj().T @ h
        singvals = np.linalg.svd(gram, compute_uv=False)
        if singvals[-1] <= _ZF_RCOND * singvals[0]:
            raise RankDeficientError(
                "channel is rank deficient under zero-forcing "
                f"(singular value ratio {singvals[-1] / singvals[0]:.3e})"
            )
        f = h @ np.linalg.pinv(gram, rcond=_ZF_RCOND, hermitian=True)
    else:
        if p_max == 0:
            f = h.copy()  # direction is irrelevant, alpha will be 0
        else:
            zeta = sigma2 * n_users / p_max
            f = h @ np.linalg.inv(h.conj().T @ h + zeta * np.eye(n_users))

    trace = float(np.vdot(f, f).real)
    alpha = np.sqrt(p_max / trace) if (p_max > 0 and trace > 0) else 0.0
    return Precoder(kind=kind, F=f, alpha=float(alpha))


def sinr_mamp(h: np.ndarray, w: np.ndarray, sigma2: float) -> RatePoint:
    """SINR and rates with direct per-user noise:

    gamma_k = |h_k^H w_k|^2 / (sum_{i != k} |h_k^H w_i|^2 + sigma2).
    """
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    cross = np.abs(h.conj().T @ w) ** 2
    signal = np.diagonal(cross).copy()
    interference = cross.sum(axis=1) - signal
    sinr = signal / (interference + sigma2)
    rates = np.log2(1.0 + sinr)
    return RatePoint(
        sinr=sinr, rates=rates, sum_rate=float(rates.sum()), noise_power=float(sigma2)
    )


def coupled_precoder(
    h_bar: np.ndarray,
    c_matrix: np.ndarray,
    kind: str,
    p_max: float,
    sigma2: float,
) -> tuple[np.ndarray, float]:
    """Coupling-compensated precoder V = (1/f) C^-1 F and its scaling f.

    F is the unnormalized precoder for the coupled channel `h_bar`;
    f = ||C^-1 F||_F / sqrt(p_max), so that ||V||_F^2 = p_max exactly.
    The end-to-end identity H^H C V = (1/f) H^H F holds by construction.
    """
    if p_max <= 0:
        raise ValueError("coupled precoder requires a positive power budget")
    f_dir = precoder(h_bar, kind, p_max, sigma2).F
    compensated = np.linalg.solve(c_matrix, f_dir)
    f_scale = float(np.linalg.norm(compensated) / np.sqrt(p_max))
    if f_scale <= 0:
        raise ValueError("degenerate precoder direction (zero norm)")
    return compensated / f_scale, f_scale


def sinr_allactive(
    h: np.ndarray, f_dir: np.ndarray, f_scale: float, sigma2: float
) -> RatePoint:
    """SINR with the scaling factor acting as noise amplification:

    gamma_k = |h_k^H f_k|^2 / (sum_{i != k} |h_k^H f_i|^2 + f_scale^2 sigma2).

    `f_dir` is the unnormalized direction matrix; the result is invariant
    to rescaling f_dir -> c*f_dir (f_scale scales with it).
    """
    if f_scale <= 0:
        raise ValueError("scaling factor must be positive")
    effective_noise = f_scale * f_scale * sigma2
    point = sinr_mamp(h, f_dir, effective_noise)
    return RatePoint(
        sinr=point.sinr,
        rates=point.rates,
        sum_rate=point.sum_rate,
        noise_power=float(sigma2),
    )
