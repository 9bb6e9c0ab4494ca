"""Quantized-load error model and the two robust designs.

Finite-resolution tunable loads realize values on a square grid of step
D (real and imaginary parts are integer multiples of D). The resulting
deviation is modeled as additive complex Gaussian error e_m with
variance eps = beta * mean(|load|^2) on the loaded antennas, which
perturbs the circuit currents and adds an effective noise term
sigma_q^2 = M * ||A^-1||_F^2 * eps to every user's SINR
(A = Z_T^-1 + diag(e)).

Robust designs:
- voltage compensation (active/passive array): a nonnegative-real-part
  increment dv to the feed voltages minimizing ||A^-1 dv - A^-1 E q i||^2,
  solved by accelerated projected gradient;
- quantize-and-iterate (all-active array): alternate continuous descent
  toward the unquantized optimum's objective value with grid snapping,
  plus a final greedy polish over single-coordinate grid moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingularError
from .loads import (
    GradDescentParams,
    LoadOptResult,
    grad_load_gradient,
    grad_load_objective,
    optimize_loads_allactive,
)
from .precoding import RatePoint, sinr_mamp

_PG_MAX_ITER = 10_000
_PG_TOL = 1e-10


@dataclass(frozen=True)
class QuantModel:
    """Quantization error scale: eps = beta * mean squared load magnitude."""

    beta: float
    grid_step: float | None = None  # derived from eps when absent

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.grid_step is not None and self.grid_step <= 0:
            raise ValueError("grid_step must be positive")

    def error_variance(self, loads: np.ndarray) -> float:
        """eps for a realized set of loaded-antenna impedances."""
        loads = np.asarray(loads)
        if loads.size == 0:
            return 0.0
        return float(self.beta * np.mean(np.abs(loads) ** 2))

    def step_for(self, eps: float) -> float:
        """Grid step with matching error variance: D = sqrt(6 eps).

        A uniform rounding error on a square grid of step D has variance
        D^2/12 per real dimension, i.e. D^2/6 per complex sample.
        """
        if self.grid_step is not None:
            return self.grid_step
        return float(np.sqrt(6.0 * eps))


@dataclass(frozen=True)
class QuantizedState:
    """Perturbed circuit state A = Z_T^-1 + E_q and derived noise power."""

    A: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    error_variance: float = 0.0
    xi: float = 0.0
    sigma_q2: float = 0.0


def draw_errors(
    num_ras: int,
    loaded_indices: np.ndarray,
    eps: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """i.i.d. CN(0, eps) on the loaded antennas, exact zeros elsewhere."""
    e = np.zeros(num_ras, dtype=complex)
    if eps > 0:
        count = len(loaded_indices)
        noise = (rng.standard_normal(count) + 1j * rng.standard_normal(count))
        e[loaded_indices] = np.sqrt(eps / 2.0) * noise
    return e


def quantized_state(Z_T: np.ndarray, errors: np.ndarray, eps: float) -> QuantizedState:
    """Assemble A = Z_T^-1 + diag(errors) and the analytic noise power."""
    z_t_inv = np.linalg.inv(Z_T)
    a = z_t_inv + np.diag(errors)
    cond = np.linalg.cond(a)
    if not cond < 1e12:
        raise NearSingularError(f"perturbed circuit matrix near singular (cond ~ {cond:.3e})")
    a_inv = np.linalg.inv(a)
    xi = float(np.linalg.norm(a_inv) ** 2)
    m_count = Z_T.shape[0]
    return QuantizedState(
        A=a,
        errors=np.asarray(errors, dtype=complex),
        error_variance=float(eps),
        xi=xi,
        sigma_q2=float(m_count * xi * eps),
    )


def perturbed_currents(
    Z_T: np.ndarray, errors: np.ndarray, i_ideal: np.ndarray
) -> np.ndarray:
    """Currents under perturbed loads: i - A^-1 E i, A = Z_T^-1 + E.

    Algebraically identical to A^-1 Z_T^-1 i (the direct form); the two
    routes are cross-checked in the tests.
    """
    z_t_inv = np.linalg.inv(Z_T)
    a = z_t_inv + np.diag(errors)
    return i_ideal - np.linalg.solve(a, errors * i_ideal)


def quantized_sinr_mamp(
    h: np.ndarray, w: np.ndarray, sigma2: float, state: QuantizedState
) -> RatePoint:
    """Per-user SINR with the quantization noise power added:

    gamma_k = |h_k^H w_k|^2 / (sum_{i!=k} |h_k^H w_i|^2 + sigma2 + sigma_q^2).
    """
    point = sinr_mamp(h, w, sigma2 + state.sigma_q2)
    return RatePoint(
        sinr=point.sinr,
        rates=point.rates,
        sum_rate=point.sum_rate,
        noise_power=float(sigma2),
    )


def robust_mamp(A: np.ndarray, errors: np.ndarray, i_ideal: np.ndarray) -> np.ndarray:
    """Voltage compensation dv minimizing ||A^-1 dv - A^-1 (e * i)||^2
    subject to Re(dv) >= 0 (imaginary parts free).

    The unconstrained minimizer dv = e * i zeroes the objective and is
    returned directly whenever it is feasible. Otherwise the problem is
    solved by projected gradient with Nesterov acceleration (monotone
    restart), which the tests pin against a plain projected-gradient
    oracle and the KKT conditions.
    """
    target = errors * i_ideal
    if np.all(target.real >= 0):
        return target

    a_inv = np.linalg.inv(A)
    quad = a_inv.conj().T @ a_inv  # Hermitian PSD
    lipschitz = 2.0 * float(np.linalg.norm(a_inv, 2) ** 2)
    step = 1.0 / lipschitz

    def project(v: np.ndarray) -> np.ndarray:
        return np.maximum(v.real, 0.0) + 1j * v.imag

    def value(v: np.ndarray) -> float:
        r = a_inv @ (v - target)
        return float(np.vdot(r, r).real)

    x = project(target)
    y = x
    t_momentum = 1.0
    best = x
    best_val = value(x)
    for _ in range(_PG_MAX_ITER):
        grad = 2.0 * (quad @ (y - target))
        x_next = project(y - step * grad)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2))
        y = x_next + ((t_momentum - 1.0) / t_next) * (x_next - x)
        moved = float(np.linalg.norm(x_next - x))
        x, t_momentum = x_next, t_next
        val = value(x)
        if val < best_val:
            best, best_val = x, val
        else:
            # monotone restart keeps the accelerated sequence from cycling
            y, t_momentum = x, 1.0
        if moved <= _PG_TOL * (1.0 + float(np.linalg.norm(x))):
            break
    return best


def quantize_to_grid(z: np.ndarray, step: float) -> np.ndarray:
    """Round real and imaginary parts independently to multiples of `step`."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    z = np.asarray(z, dtype=complex)
    return (np.round(z.real / step) + 1j * np.round(z.imag / step)) * step


def robust_allactive(
    Z: np.ndarray,
    F: np.ndarray,
    z_self: complex,
    step: float,
    params: GradDescentParams,
    z_init: np.ndarray,
    continuous: LoadOptResult | None = None,
    max_rounds: int = 20,
) -> np.ndarray:
    """Grid-feasible loads tracking the unquantized optimum.

    Pipeline: continuous descent (or a precomputed result) gives z* and
    its objective J*; then alternate (a) a short continuous descent on
    (J(z) - J*)^2 started from the current grid point and (b) grid
    snapping, until the snapped iterate repeats; finally polish with
    single-coordinate +-D moves on real or imaginary parts. The naive
    snap of z* always stays in the candidate set, so the result is never
    worse than naive rounding (in |J - J*|).
    """
    if continuous is None:
        continuous = optimize_loads_allactive(Z, F, z_self, params, z_init)
    z_star = continuous.z_opt
    j_star = grad_load_objective(z_star, Z, F, z_self)

    def mismatch(z: np.ndarray) -> float:
        try:
            return abs(grad_load_objective(z, Z, F, z_self) - j_star)
        except NearSingularError:
            return np.inf

    def grid_key(z: np.ndarray) -> tuple:
        return tuple(np.round(z.real / step).astype(int)) + tuple(
            np.round(z.imag / step).astype(int)
        )

    naive = quantize_to_grid(z_star, step)
    best = naive
    best_val = mismatch(naive)
    seen = {grid_key(naive)}
    current = naive
    inner = GradDescentParams(
        step=params.step, tol=params.tol, max_iter=min(params.max_iter, 50)
    )
    for _ in range(max_rounds):
        pulled = _descend_mismatch(current, Z, F, z_self, j_star, inner)
        snapped = quantize_to_grid(pulled, step)
        val = mismatch(snapped)
        if val < best_val:
            best, best_val = snapped, val
        key = grid_key(snapped)
        if key in seen:
            break
        seen.add(key)
        current = snapped

    polished, polished_val = _grid_polish(best, best_val, mismatch, step)
    return polished if polished_val <= best_val else best


def _descend_mismatch(
    z0: np.ndarray,
    Z: np.ndarray,
    F: np.ndarray,
    z_self: complex,
    j_target: float,
    params: GradDescentParams,
) -> np.ndarray:
    """Backtracking descent on (J(z) - J_target)^2 from a grid point."""
    z = z0.copy()
    value = (grad_load_objective(z, Z, F, z_self) - j_target) ** 2
    for _ in range(params.max_iter):
        j_val = grad_load_objective(z, Z, F, z_self)
        grad = 2.0 * (j_val - j_target) * grad_load_gradient(z, Z, F, z_self)
        norm2 = float(np.vdot(grad, grad).real)
        if np.sqrt(norm2) <= params.tol:
            break
        step = params.step
        accepted = False
        for _ in range(_MAX_INNER_HALVINGS):
            candidate = z - step * grad
            try:
                cand_j = grad_load_objective(candidate, Z, F, z_self)
            except NearSingularError:
                step *= 0.5
                continue
            cand_value = (cand_j - j_target) ** 2
            if cand_value <= value - 1e-4 * step * norm2:
                z, value = candidate, cand_value
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return z


_MAX_INNER_HALVINGS = 40


def _grid_polish(z, z_val, mismatch, step):
    """Greedy single-coordinate +-step moves, accepted while improving."""
    best = z.copy()
    best_val = z_val
    moves = (step, -step, 1j * step, -1j * step)
    improving = True
    rounds = 0
    while improving and rounds < 50:
        improving = False
        rounds += 1
        for m in range(best.size):
            for delta in moves:
                candidate = best.copy()
                candidate[m] += delta
                val = mismatch(candidate)
                if val < best_val - 1e-15:
                    best, best_val = candidate, val
                    improving = True
    return best, best_val
