"""Load-impedance and source-voltage computation.

Two regimes:

- active/passive array: the feeding voltages of the active antennas and
  the passive termination loads follow in closed form from the target
  currents i = W s (per symbol vector), with negative load resistances
  replaced by their absolute value afterwards (passive realizability);
- all-active array: the termination vector is tuned by gradient descent
  on J(z) = ||C^-1(z) F||_F, the noise-amplification factor of the
  coupling-compensated precoder (f = J / sqrt(P_max)).

Gradient convention: J is real-valued over complex loads; gradients are
returned as the packed real gradient g = dJ/dRe(z) + j dJ/dIm(z)
(equal to twice the conjugate Wirtinger derivative), which is what the
finite-difference oracle measures and what descent steps consume.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSymbolError, NearSingularError
from .geometry import ArrayPartition

_DENOM_GUARD = 1e-9
_MAX_HALVINGS = 50
_ARMIJO_C = 1e-4

TERM_CONVERGED = "converged"
TERM_MAX_ITER = "max_iter"
TERM_STAGNATION = "stagnation"


@dataclass(frozen=True)
class MampDrive:
    """Closed-form drive for the active/passive array.

    voltages: [M], zero at passive antennas (they are not fed);
    passive_loads_raw: load value per passive antenna, as computed;
    passive_loads: same after the abs-policy on negative real parts;
    target_currents: i = W s.
    """

    voltages: np.ndarray = field(repr=False)
    passive_loads_raw: np.ndarray = field(repr=False)
    passive_loads: np.ndarray = field(repr=False)
    symbol_vector: np.ndarray = field(repr=False)
    target_currents: np.ndarray = field(repr=False)

    def termination_vector(self, z_source: complex, partition: ArrayPartition) -> np.ndarray:
        """Full [M] load vector: z_source at actives, realizable loads at passives."""
        z_l = np.empty(partition.num_ras, dtype=complex)
        z_l[partition.active_indices] = z_source
        z_l[partition.passive_indices] = self.passive_loads
        return z_l

    def termination_vector_raw(
        self, z_source: complex, partition: ArrayPartition
    ) -> np.ndarray:
        """Pre-abs-policy variant (used by the round-trip invariant)."""
        z_l = np.empty(partition.num_ras, dtype=complex)
        z_l[partition.active_indices] = z_source
        z_l[partition.passive_indices] = self.passive_loads_raw
        return z_l


@dataclass(frozen=True)
class GradDescentParams:
    step: float = 1.0  # initial line-search step
    tol: float = 1e-6  # stop when the gradient norm falls below this
    max_iter: int = 300
    line_search: str = "backtracking"  # or "fixed"

    def __post_init__(self) -> None:
        if self.step <= 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("step, tol and max_iter must be positive")
        if self.line_search not in ("backtracking", "fixed"):
            raise ValueError("line_search must be 'backtracking' or 'fixed'")


@dataclass
class LoadOptResult:
    z_opt: np.ndarray
    objective_trace: list[float]
    iterations: int
    terminated_by: str

    def __iter__(self):
        # allow `z, trace = optimize_loads_allactive(...)`
        yield self.z_opt
        yield self.objective_trace


def mamp_drive(
    Z: np.ndarray,
    W: np.ndarray,
    symbols: np.ndarray,
    z_source: complex,
    partition: ArrayPartition,
) -> MampDrive:
    """Voltages and passive loads realizing the currents i = W s.

    Active antenna m is fed v_m = (Z i)_m + z_source * i_m; passive
    antenna m is terminated in X_m = -(Z i)_m / i_m, which nulls its KVL
    row. Negative load resistances are then flipped to their absolute
    value (the realizable-passive policy); the round-trip identity
    (Z + diag(z_L)) i = v holds exactly for the raw values.

    Raises DegenerateSymbolError when a passive current denominator
    nearly vanishes (|i_m| < 1e-9 ||w_m||): the caller should resample
    the symbol vector.
    """
    currents = W @ symbols
    coupled = Z @ currents
    passive = partition.passive_indices
    row_norms = np.linalg.norm(W[passive, :], axis=1)
    denom = currents[passive]
    bad = np.abs(denom) < _DENOM_GUARD * np.maximum(row_norms, 1e-300)
    if np.any(bad):
        raise DegenerateSymbolError(
            f"passive currents vanish at antennas {passive[bad].tolist()}"
        )
    loads_raw = -coupled[passive] / denom
    loads = np.where(loads_raw.real < 0, -loads_raw.real + 1j * loads_raw.imag, loads_raw)

    voltages = np.zeros(partition.num_ras, dtype=complex)
    active = partition.active_indices
    voltages[active] = coupled[active] + z_source * currents[active]
    return MampDrive(
        voltages=voltages,
        passive_loads_raw=loads_raw,
        passive_loads=loads,
        symbol_vector=np.asarray(symbols, dtype=complex),
        target_currents=currents,
    )


def _scaled_direction(z_load: np.ndarray, Z: np.ndarray, F: np.ndarray, z_self: complex):
    """G = (Z + diag(z)) diag(1/(z_self + z)) F, the compensated direction."""
    denom = z_self + z_load
    if np.any(np.abs(denom) < 1e-12):
        raise NearSingularError("a load cancels the self impedance")
    return (Z + np.diag(z_load)) @ (F / denom[:, None])


def grad_load_objective(
    z_load: np.ndarray, Z: np.ndarray, F: np.ndarray, z_self: complex
) -> float:
    """J(z) = ||C^-1(z) F||_F, the noise-amplification objective."""
    return float(np.linalg.norm(_scaled_direction(z_load, Z, F, z_self)))


def grad_load_gradient(
    z_load: np.ndarray, Z: np.ndarray, F: np.ndarray, z_self: complex
) -> np.ndarray:
    """Packed real gradient of J (see module docstring for the convention).

    Derivation: with G = (Z + X) D F, D = diag(1/(z_self + z)),
    d(J^2)/dz_m = [D F G^H]_mm - (z_self + z_m)^-2 [F G^H (Z + X)]_mm;
    the returned vector is 2 * conj(d J / d z).
    """
    denom = z_self + z_load
    g_mat = _scaled_direction(z_load, Z, F, z_self)
    j_val = float(np.linalg.norm(g_mat))
    if j_val <= 0:
        raise ValueError("objective vanished; gradient undefined")
    df = F / denom[:, None]  # D F
    fg = F @ g_mat.conj().T  # F G^H
    term1 = np.einsum("mk,mk->m", df, g_mat.conj())
    term2 = np.einsum("mk,km->m", fg, (Z + np.diag(z_load))) / denom**2
    wirtinger = (term1 - term2) / (2.0 * j_val)
    return 2.0 * np.conj(wirtinger)


def optimize_loads_allactive(
    Z: np.ndarray,
    F: np.ndarray,
    z_self: complex,
    params: GradDescentParams,
    z_init: np.ndarray,
) -> LoadOptResult:
    """Descend J(z) = ||C^-1 F||_F over the termination vector.

    Backtracking Armijo line search (c = 1e-4, halving); the objective
    trace is monotone nonincreasing by construction. The working step is
    carried across iterations and doubled after each accepted move, so
    the search can grow out of small-gradient regions (`params.step`
    only sets the initial trial step). Terminates when the gradient norm
    falls below `params.tol`, at the iteration budget, or when 50
    halvings cannot find a descent step (stagnation).
    """
    z = np.asarray(z_init, dtype=complex).copy()
    value = grad_load_objective(z, Z, F, z_self)
    trace = [value]
    terminated = TERM_MAX_ITER
    iterations = 0
    working_step = params.step
    for it in range(params.max_iter):
        iterations = it + 1
        grad = grad_load_gradient(z, Z, F, z_self)
        grad_norm2 = float(np.vdot(grad, grad).real)
        if np.sqrt(grad_norm2) <= params.tol:
            terminated = TERM_CONVERGED
            iterations = it
            break
        if params.line_search == "fixed":
            candidate = z - params.step * grad
            try:
                cand_value = grad_load_objective(candidate, Z, F, z_self)
            except NearSingularError:
                terminated = TERM_STAGNATION
                break
            if cand_value >= value:
                terminated = TERM_STAGNATION
                break
            z, value = candidate, cand_value
        else:
            step = working_step
            accepted = False
            for _ in range(_MAX_HALVINGS):
                candidate = z - step * grad
                try:
                    cand_value = grad_load_objective(candidate, Z, F, z_self)
                except NearSingularError:
                    step *= 0.5
                    continue
                if cand_value <= value - _ARMIJO_C * step * grad_norm2:
                    z, value = candidate, cand_value
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                terminated = TERM_STAGNATION
                break
            working_step = 2.0 * step
        trace.append(value)
    return LoadOptResult(
        z_opt=z, objective_trace=trace, iterations=iterations, terminated_by=terminated
    )
