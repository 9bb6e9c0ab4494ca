"""Port-selection search: exhaustive, BPSO, tabu, and greedy solvers.

A configuration assigns each of the M antennas one of its N ports
(0-based). Fitness functions map a configuration to a sum rate and must
be deterministic for a fixed channel draw; during the search the
objective deliberately ignores mutual coupling (selection runs on the
spatially-correlated channel alone, load tuning happens afterwards).

Greedy solvers evaluate partially assigned configurations: entries of -1
mean "not placed yet" and the fitness factory evaluates the sum rate of
the assigned rows only.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import backend
from .errors import SearchSpaceError
from .geometry import ArrayPartition

FitnessFn = Callable[[np.ndarray], float]

ES_GUARD = 1_000_000
GREEDY_STAGE_GUARD = 100_000

TERM_CONVERGED = "converged"
TERM_MAX_ITER = "max_iter"
TERM_STAGNATION = "stagnation"


@dataclass(frozen=True)
class SelectionMatrix:
    """Block one-hot selection: one chosen port per antenna.

    Stored compactly as the per-antenna port vector; the one-hot [M, N]
    block form and the [L, M] block-diagonal gather matrix are derived.
    """

    config: np.ndarray
    num_ports: int

    def __post_init__(self) -> None:
        config = np.asarray(self.config, dtype=np.int64)
        if config.ndim != 1:
            raise ValueError("config must be one port index per antenna")
        if np.any(config < 0) or np.any(config >= self.num_ports):
            raise ValueError("port index outside [0, num_ports)")
        object.__setattr__(self, "config", config)

    @property
    def block_onehot(self) -> np.ndarray:
        """One-hot rows B [M, N]: row m has a single 1 at the chosen port."""
        m_count = self.config.size
        b = np.zeros((m_count, self.num_ports))
        b[np.arange(m_count), self.config] = 1.0
        return b

    @property
    def gather_matrix(self) -> np.ndarray:
        """Block-diagonal [L, M] matrix S with H_selected = S^T H_port."""
        m_count = self.config.size
        sigma = np.zeros((m_count * self.num_ports, m_count))
        sigma[np.arange(m_count) * self.num_ports + self.config, np.arange(m_count)] = 1.0
        return sigma


@dataclass
class SolverTrace:
    """Search outcome plus the bookkeeping used by the convergence plots."""

    best: SelectionMatrix
    best_fitness: float
    per_iteration_best: list[float] = field(default_factory=list)
    evaluations: int = 0
    iterations: int = 0
    terminated_by: str = TERM_CONVERGED

    def as_record(self) -> dict:
        """JSON-serializable form for the trace sink."""
        return {
            "config": self.best.config.tolist(),
            "best_fitness": self.best_fitness,
            "per_iteration_best": list(self.per_iteration_best),
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "terminated_by": self.terminated_by,
        }


@dataclass(frozen=True)
class BpsoParams:
    num_particles: int = 30
    max_iter: int = 200
    c1: float = 2.0
    c2: float = 2.0
    tol: float = 1e-4
    inertia_start: float = 0.9
    inertia_decay: float = 0.5  # w(t) = start - decay * t / max_iter

    def __post_init__(self) -> None:
        if self.num_particles < 1 or self.max_iter < 1:
            raise ValueError("swarm size and iteration budget must be positive")
        if min(self.c1, self.c2, self.tol) <= 0:
            raise ValueError("c1, c2 and tol must be positive")


@dataclass(frozen=True)
class TabuParams:
    max_iter: int = 200
    tenure: int | None = None  # default ceil(sqrt(M*N))
    intensify_every: int | None = None  # default M
    diversify_every: int | None = None  # default 2M + 1
    stagnation_limit: int | None = None  # default ceil(M * log2(N))


def make_sum_rate_fitness(
    port_channels: np.ndarray,
    ports_per_ra: int,
    kind: str,
    p_max: float,
    sigma2: float,
) -> FitnessFn:
    """Fitness closure: config -> coupling-free sum rate of the selection.

    Supports partial configurations (entries -1 are skipped). Runs on the
    active kernel backend.
    """
    h = np.ascontiguousarray(port_channels, dtype=np.complex128)
    kind_code = backend.KIND_CODES[kind]
    all_rows = np.arange(h.shape[0] // ports_per_ra, dtype=np.intp) * ports_per_ra

    def fitness(config: np.ndarray) -> float:
        mask = config >= 0
        if not mask.all():
            if not mask.any():
                return 0.0
            rows = all_rows[mask] + config[mask]
        else:
            rows = all_rows + config
        return backend.sum_rate_rows(h, rows.astype(np.intp), kind_code, p_max, sigma2)

    return fitness


def exhaustive_search(fitness: FitnessFn, num_ras: int, num_ports: int) -> SolverTrace:
    """Enumerate all N^M configurations; ties go to the first (smallest) one.

    Guarded at 1e6 configurations.
    """
    total = num_ports**num_ras
    if total > ES_GUARD:
        raise SearchSpaceError(
            f"{num_ports}^{num_ras} = {total} configurations exceeds the {ES_GUARD} guard"
        )
    best_fit = -np.inf
    best = None
    config = np.empty(num_ras, dtype=np.int64)
    for combo in itertools.product(range(num_ports), repeat=num_ras):
        config[:] = combo
        value = fitness(config)
        if value > best_fit:
            best_fit = value
            best = config.copy()
    trace = SolverTrace(
        best=SelectionMatrix(best, num_ports),
        best_fitness=float(best_fit),
        per_iteration_best=[float(best_fit)],
        evaluations=total,
        iterations=1,
        terminated_by=TERM_CONVERGED,
    )
    return trace


def _one_hot(configs: np.ndarray, num_ports: int) -> np.ndarray:
    """[P, M] int configs -> [P, M, N] one-hot float positions."""
    out = np.zeros(configs.shape + (num_ports,))
    p_idx, m_idx = np.indices(configs.shape)
    out[p_idx, m_idx, configs] = 1.0
    return out


def bpso(
    fitness: FitnessFn,
    num_ras: int,
    num_ports: int,
    params: BpsoParams,
    rng: np.random.Generator,
) -> SolverTrace:
    """Binary particle swarm over one-hot position matrices.

    Velocities live in R^{M x N}; each particle's row is re-binarized
    every iteration as the argmax of the sigmoid-squashed velocity row
    (ties to the lowest port index), which keeps every position feasible
    by construction. r1/r2 are scalar draws per particle per iteration.
    Stops when the global best moves by at most `tol` between successive
    iterations, or at the iteration budget.
    """
    pop = params.num_particles
    configs = rng.integers(0, num_ports, size=(pop, num_ras))
    positions = _one_hot(configs, num_ports)
    velocity = rng.uniform(-1.0, 1.0, size=(pop, num_ras, num_ports))

    fits = np.array([fitness(c) for c in configs])
    evaluations = pop
    pbest_pos = positions.copy()
    pbest_fit = fits.copy()
    g_idx = int(np.argmax(pbest_fit))
    gbest_pos = pbest_pos[g_idx].copy()
    gbest_cfg = configs[g_idx].copy()
    gbest_fit = float(pbest_fit[g_idx])

    history = [gbest_fit]
    prev_fit = gbest_fit
    terminated = TERM_MAX_ITER
    iterations = 0
    for t in range(1, params.max_iter + 1):
        iterations = t
        inertia = params.inertia_start - params.inertia_decay * t / params.max_iter
        r1 = rng.random(pop)[:, None, None]
        r2 = rng.random(pop)[:, None, None]
        velocity = (
            inertia * velocity
            + params.c1 * r1 * (pbest_pos - positions)
            + params.c2 * r2 * (gbest_pos[None] - positions)
        )
        squashed = 1.0 / (1.0 + np.exp(-velocity))
        configs = np.argmax(squashed, axis=2)
        positions = _one_hot(configs, num_ports)

        fits = np.array([fitness(c) for c in configs])
        evaluations += pop
        improved = fits > pbest_fit
        pbest_fit[improved] = fits[improved]
        pbest_pos[improved] = positions[improved]
        g_idx = int(np.argmax(pbest_fit))
        if pbest_fit[g_idx] > gbest_fit:
            gbest_fit = float(pbest_fit[g_idx])
            gbest_pos = pbest_pos[g_idx].copy()
            gbest_cfg = np.argmax(gbest_pos, axis=1)
        history.append(gbest_fit)

        if abs(gbest_fit - prev_fit) <= params.tol:
            terminated = TERM_CONVERGED
            break
        prev_fit = gbest_fit

    return SolverTrace(
        best=SelectionMatrix(gbest_cfg, num_ports),
        best_fitness=gbest_fit,
        per_iteration_best=history,
        evaluations=evaluations,
        iterations=iterations,
        terminated_by=terminated,
    )


def tabu_search(
    fitness: FitnessFn,
    num_ras: int,
    num_ports: int,
    params: TabuParams,
    rng: np.random.Generator,
) -> SolverTrace:
    """Tabu search over single-antenna port swaps.

    Neighborhood: all M*(N-1) single swaps. A move (m, old, new) is tabu
    while it or its reverse sits in the FIFO list (tenure
    ceil(sqrt(M*N))), unless it beats the best-so-far (aspiration).
    Periodically intensifies (returns to the incumbent) and diversifies
    (reassigns floor(M/4) random antennas and clears the list). Stops at
    the iteration budget or after ceil(M*log2 N) non-improving steps.
    """
    if num_ports < 2:
        raise ValueError("tabu search needs at least two ports per antenna")
    tenure = params.tenure or int(np.ceil(np.sqrt(num_ras * num_ports)))
    intensify_every = params.intensify_every or num_ras
    diversify_every = params.diversify_every or (2 * num_ras + 1)
    stagnation_limit = params.stagnation_limit or int(
        np.ceil(num_ras * np.log2(num_ports))
    )

    current = rng.integers(0, num_ports, size=num_ras).astype(np.int64)
    current_fit = fitness(current)
    evaluations = 1
    best = current.copy()
    best_fit = current_fit
    tabu: deque[tuple[int, int, int]] = deque(maxlen=tenure)
    history = [best_fit]
    non_improving = 0
    terminated = TERM_MAX_ITER
    iterations = 0

    for t in range(params.max_iter):
        iterations = t + 1
        if t % intensify_every == 0:
            current = best.copy()
            current_fit = best_fit
        if t % diversify_every == 0:
            shaken = num_ras // 4
            if shaken:
                rows = rng.choice(num_ras, size=shaken, replace=False)
                for m in rows:
                    step = int(rng.integers(0, num_ports - 1))
                    current[m] = step if step < current[m] else step + 1
                current_fit = fitness(current)
                evaluations += 1
            tabu.clear()

        best_move = None
        best_move_fit = -np.inf
        candidate = current.copy()
        for m in range(num_ras):
            old = int(current[m])
            for new in range(num_ports):
                if new == old:
                    continue
                candidate[m] = new
                value = fitness(candidate)
                evaluations += 1
                is_tabu = (m, old, new) in tabu or (m, new, old) in tabu
                if (not is_tabu or value > best_fit) and value > best_move_fit:
                    best_move_fit = value
                    best_move = (m, old, new)
            candidate[m] = old

        if best_move is not None:
            m, old, new = best_move
            current[m] = new
            current_fit = best_move_fit
            tabu.append(best_move)

        if current_fit > best_fit:
            best = current.copy()
            best_fit = current_fit
            non_improving = 0
        else:
            non_improving += 1
        history.append(best_fit)

        if non_improving >= stagnation_limit:
            terminated = TERM_STAGNATION
            break

    return SolverTrace(
        best=SelectionMatrix(best, num_ports),
        best_fitness=float(best_fit),
        per_iteration_best=history,
        evaluations=evaluations,
        iterations=iterations,
        terminated_by=terminated,
    )


def greedy_mamp(
    fitness: FitnessFn, partition: ArrayPartition, num_ports: int
) -> SolverTrace:
    """Greedy placement for the active/passive array, one sub-array at a time.

    For each sub-array, jointly sweep the active antenna's N ports and
    all N^Q passive combinations, keeping the assignment with the best
    fitness over the antennas placed so far (ties to the first, i.e.
    lexicographically smallest, assignment).
    """
    q = partition.passive_per_active
    stage_size = num_ports**q
    if stage_size > GREEDY_STAGE_GUARD:
        raise SearchSpaceError(
            f"{num_ports}^{q} passive combinations exceed the {GREEDY_STAGE_GUARD} guard"
        )
    config = np.full(partition.num_ras, -1, dtype=np.int64)
    history: list[float] = []
    evaluations = 0
    for s in range(partition.num_active):
        members = partition.subarray_members(s)
        active = partition.active_index(s)
        passives = [m for m in members if m != active]
        best_fit = -np.inf
        best_assign: tuple[int, tuple[int, ...]] | None = None
        for n_active in range(num_ports):
            config[active] = n_active
            for combo in itertools.product(range(num_ports), repeat=q):
                for m, port in zip(passives, combo):
                    config[m] = port
                value = fitness(config)
                evaluations += 1
                if value > best_fit:
                    best_fit = value
                    best_assign = (n_active, combo)
        n_active, combo = best_assign
        config[active] = n_active
        for m, port in zip(passives, combo):
            config[m] = port
        history.append(float(best_fit))

    return SolverTrace(
        best=SelectionMatrix(config, num_ports),
        best_fitness=history[-1],
        per_iteration_best=history,
        evaluations=evaluations,
        iterations=partition.num_active,
        terminated_by=TERM_CONVERGED,
    )


def greedy_allactive(fitness: FitnessFn, num_ras: int, num_ports: int) -> SolverTrace:
    """Greedy placement for the all-active array: exactly M*N evaluations."""
    config = np.full(num_ras, -1, dtype=np.int64)
    history: list[float] = []
    evaluations = 0
    for m in range(num_ras):
        best_fit = -np.inf
        best_port = 0
        for n in range(num_ports):
            config[m] = n
            value = fitness(config)
            evaluations += 1
            if value > best_fit:
                best_fit = value
                best_port = n
        config[m] = best_port
        history.append(float(best_fit))
    return SolverTrace(
        best=SelectionMatrix(config, num_ports),
        best_fitness=history[-1],
        per_iteration_best=history,
        evaluations=evaluations,
        iterations=num_ras,
        terminated_by=TERM_CONVERGED,
    )


def expand_active_config(
    reduced: np.ndarray, partition: ArrayPartition
) -> np.ndarray:
    """Lift an [M_a] active-only configuration to the full [M] array.

    Every passive antenna inherits its sub-array's active port index —
    within its own block, so the placement is always valid and keeps the
    sub-array tightly clustered.
    """
    full = np.empty(partition.num_ras, dtype=np.int64)
    for s in range(partition.num_active):
        full[partition.subarray_members(s)] = reduced[s]
    return full


def sparse_wrap(
    solver: Callable[..., SolverTrace],
    fitness: FitnessFn,
    partition: ArrayPartition,
    num_ports: int,
    params,
    rng: np.random.Generator,
) -> SolverTrace:
    """Run a swarm/tabu solver over the active antennas only.

    The wrapped solver sees an M_a-antenna problem whose fitness expands
    each reduced configuration to the full array (passives follow their
    active's port index) and evaluates the full-array objective. The
    returned trace carries the expanded full-array selection.
    """

    def reduced_fitness(reduced: np.ndarray) -> float:
        return fitness(expand_active_config(reduced, partition))

    trace = solver(reduced_fitness, partition.num_active, num_ports, params, rng)
    full = expand_active_config(trace.best.config, partition)
    return SolverTrace(
        best=SelectionMatrix(full, num_ports),
        best_fitness=trace.best_fitness,
        per_iteration_best=trace.per_iteration_best,
        evaluations=trace.evaluations,
        iterations=trace.iterations,
        terminated_by=trace.terminated_by,
    )
