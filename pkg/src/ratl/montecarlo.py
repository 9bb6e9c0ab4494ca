"""Seeded trial orchestration: sweeps, paired comparisons, aggregation.

A trial runs the full decoupled cycle for one channel draw: synthesize
the port-level channel, search the port selection on the coupling-free
objective, build the mutual-impedance matrix for the chosen positions,
tune loads/voltages, and score the coupled sum rate (plus the quantized
and robust variants when a quantization model is configured).

Reproducibility: every random draw comes from a stream keyed by
(master seed, sweep-point index, trial index, stream id), so trials can
run in any order or in parallel without changing results, and paired
array modes (with/without load tuning, RA vs fixed array) consume
identical environment draws at a fixed (point, trial).
"""
from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel import (
    RayleighChannelParams,
    SVChannelParams,
    apply_correlation,
    correlation_matrix,
    select_ports,
    synthesize_rayleigh,
    synthesize_sv,
)
from .coupling import DipoleSpec, build_impedance_matrix, coupled_channel, effective_coupling
from .errors import ConfigError, DegenerateSymbolError, NearSingularError
from .geometry import build_grid, build_partition
from .loads import GradDescentParams, grad_load_objective, mamp_drive, optimize_loads_allactive
from .precoding import precoder, sinr_allactive, sinr_mamp
from .quantization import (
    QuantModel,
    draw_errors,
    perturbed_currents,
    quantize_to_grid,
    quantized_state,
    robust_allactive,
    robust_mamp,
)
from .solvers import (
    BpsoParams,
    TabuParams,
    bpso,
    exhaustive_search,
    greedy_allactive,
    greedy_mamp,
    make_sum_rate_fitness,
    sparse_wrap,
    tabu_search,
)

MODE_MAMP = "mamp-with-loads"
MODE_ALLACTIVE_LOADS = "all-active-with-loads"
MODE_ALLACTIVE_NOLOADS = "all-active-no-loads"
MODE_FPA = "fpa-fixed"
MODES = (MODE_MAMP, MODE_ALLACTIVE_LOADS, MODE_ALLACTIVE_NOLOADS, MODE_FPA)

# rng stream ids; modes never enter the key, so paired modes share draws
_STREAM_ENV = 0
_STREAM_SOLVER = 1
_STREAM_PARTITION = 2
_STREAM_SYMBOLS = 3
_STREAM_QUANT = 4

_MAX_SYMBOL_RESAMPLES = 50

# quantized variants appended to the mode label in result rows; the
# unsuffixed row is always the unquantized pipeline
VARIANT_BASE = ""
VARIANT_QUANT = "quant"
VARIANT_ROBUST = "robust"


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario; field names mirror the config-file keys.

    Zero/empty values for `channel_model`, `port_spacing`,
    `carrier_freq_hz` and `solver` mean "use the mode's default"
    (resolved once by `resolved()`).
    """

    mode: str = MODE_ALLACTIVE_LOADS
    channel_model: str = ""
    num_users: int = 2
    num_ras: int = 4
    ports_per_ra: int = 4
    num_active: int = 3
    passive_per_active: int = 2
    port_spacing: float = 0.0
    carrier_freq_hz: float = 0.0
    snr_db: float = 20.0
    precoder_kind: str = "wf"
    solver: str = ""
    solver_max_iter: int = 200
    num_clusters: int = 3
    paths_per_cluster: int = 10
    num_directions: int = 50
    angular_spread: float = float(np.pi / 8)
    dipole_length: float = 0.5
    dipole_radius: float = 1e-4
    load_step_scale: float = 1e-2  # initial descent step = scale * |z_A|
    load_tol: float = 1e-6
    load_max_iter: int = 300
    quant_beta: float = 0.0  # 0 disables the quantization stage
    quant_grid_step: float = 0.0  # 0 derives the step from the error variance
    symbol_draws: int = 4
    num_trials: int = 50
    seed: int = 0
    point_index: int = 0
    force_identity_coupling: bool = False  # testing hook: Z = z_A I

    @property
    def num_antennas(self) -> int:
        """Total antenna count M (actives + passives in MAMP mode)."""
        if self.mode == MODE_MAMP:
            return self.num_active * (1 + self.passive_per_active)
        return self.num_ras

    def quant_model(self) -> QuantModel | None:
        if self.quant_beta <= 0:
            return None
        step = self.quant_grid_step if self.quant_grid_step > 0 else None
        return QuantModel(beta=self.quant_beta, grid_step=step)

    def resolved(self) -> "ScenarioConfig":
        """Fill mode defaults and validate cross-field consistency."""
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        updates: dict = {}
        if self.mode == MODE_MAMP:
            updates["channel_model"] = self.channel_model or "sv"
            updates["port_spacing"] = self.port_spacing or 1.0 / 16.0
            updates["carrier_freq_hz"] = self.carrier_freq_hz or 28e9
            updates["solver"] = self.solver or "greedy"
        elif self.mode == MODE_FPA:
            updates["channel_model"] = self.channel_model or "rayleigh"
            updates["port_spacing"] = self.port_spacing or 0.5
            updates["carrier_freq_hz"] = self.carrier_freq_hz or 3e9
            updates["solver"] = "fixed"
            updates["ports_per_ra"] = 1
        else:
            updates["channel_model"] = self.channel_model or "rayleigh"
            updates["port_spacing"] = self.port_spacing or 0.25
            updates["carrier_freq_hz"] = self.carrier_freq_hz or 3e9
            updates["solver"] = self.solver or "tabu"
        cfg = dataclasses.replace(self, **updates)
        if cfg.channel_model not in ("sv", "rayleigh"):
            raise ConfigError(f"unknown channel model {cfg.channel_model!r}")
        if cfg.num_users < 1 or cfg.ports_per_ra < 1:
            raise ConfigError("num_users and ports_per_ra must be positive")
        if cfg.mode == MODE_MAMP:
            allowed = ("greedy", "exhaustive", "tabu", "bpso", "sparse-tabu", "sparse-bpso")
        elif cfg.mode == MODE_FPA:
            allowed = ("fixed",)
        else:
            allowed = ("tabu", "bpso", "exhaustive", "greedy")
        if cfg.solver not in allowed:
            raise ConfigError(
                f"solver {cfg.solver!r} not valid for mode {cfg.mode!r}; expected one of {allowed}"
            )
        if cfg.num_trials < 0:
            raise ConfigError("num_trials must be nonnegative")
        if cfg.symbol_draws < 1:
            raise ConfigError("symbol_draws must be positive")
        return cfg


@dataclass
class TrialResult:
    """Outcome of one trial; `sum_rate` is the unquantized pipeline's."""

    sum_rate: float
    per_user_rates: np.ndarray
    solver_trace_ref: dict | None
    wall_time: float
    seed_used: int
    env_digest: str = ""
    variant_rates: dict = field(default_factory=dict)
    config_used: list = field(default_factory=list)


def _stream_rng(cfg: ScenarioConfig, trial_idx: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=cfg.seed, spawn_key=(cfg.point_index, trial_idx, stream)
    )
    return np.random.default_rng(ss)


def _partition_seed(cfg: ScenarioConfig, trial_idx: int) -> int:
    ss = np.random.SeedSequence(
        entropy=cfg.seed, spawn_key=(cfg.point_index, trial_idx, _STREAM_PARTITION)
    )
    return int(ss.generate_state(1)[0])


def _digest(h_port: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(h_port).tobytes()).hexdigest()[:16]


def _complex_symbols(rng: np.random.Generator, k: int) -> np.ndarray:
    return (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)


def _rates_with_extra_noise(
    h_sel: np.ndarray, w: np.ndarray, sigma2: float, extra: np.ndarray
) -> np.ndarray:
    """Per-user rates with an additional per-user noise power term."""
    cross = np.abs(h_sel.conj().T @ w) ** 2
    signal = np.diag(cross)
    interference = cross.sum(axis=1) - signal
    return np.log2(1.0 + signal / (interference + sigma2 + extra))


def _impedance_matrix(cfg, spec, grid, config):
    if cfg.force_identity_coupling:
        return spec.z_self * np.eye(cfg.num_antennas, dtype=complex)
    return build_impedance_matrix(spec, grid, config)


def _search_mamp(cfg, fitness, partition, rng):
    n = cfg.ports_per_ra
    if cfg.solver == "greedy":
        return greedy_mamp(fitness, partition, n)
    if cfg.solver == "exhaustive":
        return exhaustive_search(fitness, partition.num_ras, n)
    if cfg.solver == "tabu":
        return tabu_search(fitness, partition.num_ras, n, TabuParams(max_iter=cfg.solver_max_iter), rng)
    if cfg.solver == "bpso":
        return bpso(fitness, partition.num_ras, n, BpsoParams(max_iter=cfg.solver_max_iter), rng)
    if cfg.solver == "sparse-tabu":
        return sparse_wrap(tabu_search, fitness, partition, n, TabuParams(max_iter=cfg.solver_max_iter), rng)
    if cfg.solver == "sparse-bpso":
        return sparse_wrap(bpso, fitness, partition, n, BpsoParams(max_iter=cfg.solver_max_iter), rng)
    raise ConfigError(f"unsupported solver {cfg.solver!r}")


def _search_allactive(cfg, fitness, num_ras, rng):
    n = cfg.ports_per_ra
    if cfg.solver == "exhaustive":
        return exhaustive_search(fitness, num_ras, n)
    if cfg.solver == "greedy":
        return greedy_allactive(fitness, num_ras, n)
    if cfg.solver == "tabu":
        return tabu_search(fitness, num_ras, n, TabuParams(max_iter=cfg.solver_max_iter), rng)
    if cfg.solver == "bpso":
        return bpso(fitness, num_ras, n, BpsoParams(max_iter=cfg.solver_max_iter), rng)
    raise ConfigError(f"unsupported solver {cfg.solver!r}")


def run_trial(cfg: ScenarioConfig, trial_idx: int) -> TrialResult:
    """Execute one full decoupled cycle; deterministic in (cfg.seed, trial_idx)."""
    cfg = cfg.resolved()
    started = time.perf_counter()
    try:
        if cfg.mode == MODE_MAMP:
            out = _mamp_trial(cfg, trial_idx)
        else:
            out = _allactive_trial(cfg, trial_idx)
    except Exception as exc:
        context = f"[trial {trial_idx}, mode {cfg.mode!r}, point {cfg.point_index}]"
        head = f"{exc.args[0]} {context}" if exc.args else context
        exc.args = (head,) + exc.args[1:]
        raise
    out.wall_time = time.perf_counter() - started
    return out


def _mamp_trial(cfg: ScenarioConfig, trial_idx: int) -> TrialResult:
    p_max = 10.0 ** (cfg.snr_db / 10.0)
    sigma2 = 1.0
    n = cfg.ports_per_ra

    partition = build_partition(
        cfg.num_active, cfg.passive_per_active, seed=_partition_seed(cfg, trial_idx)
    )
    grid = build_grid(partition.num_ras, n, cfg.port_spacing, cfg.carrier_freq_hz)
    env_rng = _stream_rng(cfg, trial_idx, _STREAM_ENV)
    sv = synthesize_sv(
        grid,
        cfg.num_users,
        SVChannelParams(cfg.num_clusters, cfg.paths_per_cluster),
        env_rng,
    )
    h_port = apply_correlation(sv.port_channels, correlation_matrix(grid))

    fitness = make_sum_rate_fitness(h_port, n, cfg.precoder_kind, p_max, sigma2)
    trace = _search_mamp(cfg, fitness, partition, _stream_rng(cfg, trial_idx, _STREAM_SOLVER))
    config = trace.best.config
    h_sel = select_ports(h_port, config, n)

    prec = precoder(h_sel, cfg.precoder_kind, p_max, sigma2)
    ideal = sinr_mamp(h_sel, prec.W, sigma2)

    spec = DipoleSpec(length=cfg.dipole_length, radius=cfg.dipole_radius)
    z_matrix = _impedance_matrix(cfg, spec, grid, config)
    z_src = spec.z_source

    symbol_rng = _stream_rng(cfg, trial_idx, _STREAM_SYMBOLS)
    drives = [
        _drive_with_resampling(z_matrix, prec.W, symbol_rng, z_src, partition, cfg.num_users)
        for _ in range(cfg.symbol_draws)
    ]

    variants = {VARIANT_BASE: ideal.sum_rate}
    model = cfg.quant_model()
    if model is not None:
        quant_rng = _stream_rng(cfg, trial_idx, _STREAM_QUANT)
        naive_noise = np.zeros(cfg.num_users)
        robust_noise = np.zeros(cfg.num_users)
        for drive in drives:
            z_loads = drive.termination_vector(z_src, partition)
            state = effective_coupling(z_matrix, z_loads)
            eps = model.error_variance(drive.passive_loads)
            errors = draw_errors(
                partition.num_ras, partition.passive_indices, eps, quant_rng
            )
            qstate = quantized_state(state.Z_T, errors, eps)
            i_ideal = drive.target_currents
            # naive deviation A^-1 E i; robust residual A^-1(dv - E i)
            delta_naive = i_ideal - perturbed_currents(state.Z_T, errors, i_ideal)
            dv = robust_mamp(qstate.A, errors, i_ideal)
            delta_robust = np.linalg.solve(qstate.A, dv) - delta_naive
            naive_noise += np.abs(h_sel.conj().T @ delta_naive) ** 2
            robust_noise += np.abs(h_sel.conj().T @ delta_robust) ** 2
        naive_noise /= cfg.symbol_draws
        robust_noise /= cfg.symbol_draws
        variants[VARIANT_QUANT] = float(
            _rates_with_extra_noise(h_sel, prec.W, sigma2, naive_noise).sum()
        )
        variants[VARIANT_ROBUST] = float(
            _rates_with_extra_noise(h_sel, prec.W, sigma2, robust_noise).sum()
        )

    return TrialResult(
        sum_rate=ideal.sum_rate,
        per_user_rates=ideal.rates,
        solver_trace_ref=trace.as_record(),
        wall_time=0.0,
        seed_used=cfg.seed,
        env_digest=_digest(h_port),
        variant_rates=variants,
        config_used=config.tolist(),
    )


def _drive_with_resampling(z_matrix, w, rng, z_src, partition, num_users):
    """Closed-form drive; resample the symbol vector on degenerate draws."""
    last_error: DegenerateSymbolError | None = None
    for _ in range(_MAX_SYMBOL_RESAMPLES):
        symbols = _complex_symbols(rng, num_users)
        try:
            return mamp_drive(z_matrix, w, symbols, z_src, partition)
        except DegenerateSymbolError as exc:
            last_error = exc
    raise DegenerateSymbolError(
        f"no usable symbol vector after {_MAX_SYMBOL_RESAMPLES} resamples"
    ) from last_error


def _allactive_trial(cfg: ScenarioConfig, trial_idx: int) -> TrialResult:
    p_max = 10.0 ** (cfg.snr_db / 10.0)
    sigma2 = 1.0
    n = cfg.ports_per_ra
    m_count = cfg.num_ras

    grid = build_grid(m_count, n, cfg.port_spacing, cfg.carrier_freq_hz)
    env_rng = _stream_rng(cfg, trial_idx, _STREAM_ENV)
    chan = synthesize_rayleigh(
        grid,
        cfg.num_users,
        RayleighChannelParams(cfg.num_directions, cfg.angular_spread),
        env_rng,
    )
    h_port = chan.port_channels

    if cfg.solver == "fixed" or n == 1:
        config = np.zeros(m_count, dtype=np.int64)
        trace = None
    else:
        fitness = make_sum_rate_fitness(h_port, n, cfg.precoder_kind, p_max, sigma2)
        trace = _search_allactive(
            cfg, fitness, m_count, _stream_rng(cfg, trial_idx, _STREAM_SOLVER)
        )
        config = trace.best.config
    h_sel = select_ports(h_port, config, n)

    spec = DipoleSpec(length=cfg.dipole_length, radius=cfg.dipole_radius)
    z_matrix = _impedance_matrix(cfg, spec, grid, config)
    z_src = spec.z_source

    pre = precoder(h_sel, cfg.precoder_kind, p_max, sigma2)
    z_init = np.full(m_count, z_src, dtype=complex)
    tune = cfg.mode == MODE_ALLACTIVE_LOADS

    if tune:
        # compensated transmit V = (1/f) C^-1 F: the propagation channel
        # is restored and the tuned loads shrink the noise factor f.
        f_dir = pre.F
        params = GradDescentParams(
            step=cfg.load_step_scale * abs(spec.z_self),
            tol=cfg.load_tol,
            max_iter=cfg.load_max_iter,
        )
        result = optimize_loads_allactive(z_matrix, f_dir, spec.z_self, params, z_init)
        z_final = result.z_opt
        j_final = result.objective_trace[-1]
        point = sinr_allactive(h_sel, f_dir, j_final / np.sqrt(p_max), sigma2)
    else:
        # benchmark arms (no tunable loads / fixed array): conventional
        # precoding on the propagation channel, transmitted through the
        # physical coupling uncompensated.
        state = effective_coupling(z_matrix, z_init)
        point = sinr_mamp(coupled_channel(h_sel, state), pre.W, sigma2)

    variants = {VARIANT_BASE: point.sum_rate}

    model = cfg.quant_model()
    if model is not None and tune:
        eps = model.error_variance(z_final)
        step = model.step_for(eps)
        naive = quantize_to_grid(z_final, step)
        robust = robust_allactive(
            z_matrix, f_dir, spec.z_self, step, params, z_init, continuous=result
        )
        variants[VARIANT_QUANT] = _allactive_rate_at(
            h_sel, f_dir, z_matrix, spec.z_self, naive, p_max, sigma2
        )
        variants[VARIANT_ROBUST] = _allactive_rate_at(
            h_sel, f_dir, z_matrix, spec.z_self, robust, p_max, sigma2
        )

    return TrialResult(
        sum_rate=point.sum_rate,
        per_user_rates=point.rates,
        solver_trace_ref=trace.as_record() if trace is not None else None,
        wall_time=0.0,
        seed_used=cfg.seed,
        env_digest=_digest(h_port),
        variant_rates=variants,
        config_used=config.tolist(),
    )


def _allactive_rate_at(h_sel, f_dir, z_matrix, z_self, z_loads, p_max, sigma2) -> float:
    try:
        j_val = grad_load_objective(z_loads, z_matrix, f_dir, z_self)
    except NearSingularError:
        return 0.0
    return sinr_allactive(h_sel, f_dir, j_val / np.sqrt(p_max), sigma2).sum_rate


def _sweep_worker(payload: tuple) -> tuple:
    cfg, trial_idx = payload
    return trial_idx, run_trial(cfg, trial_idx)


_INT_FIELDS = frozenset(
    f.name
    for f in dataclasses.fields(ScenarioConfig)
    if f.type in ("int", int)
)


def axis_field(axis: str) -> str:
    """Resolve a sweep-axis name (kebab or snake case) to a config field."""
    name = axis.replace("-", "_")
    valid = {f.name for f in dataclasses.fields(ScenarioConfig)}
    if name not in valid or name in ("seed", "point_index"):
        raise ConfigError(f"sweep axis {axis!r} is not a sweepable scenario field")
    return name


def apply_axis(cfg: ScenarioConfig, axis: str, value, point_index: int) -> ScenarioConfig:
    """Rebind one swept field (plus the point index used for seeding)."""
    name = axis_field(axis)
    if name in _INT_FIELDS:
        value = int(value)
    return dataclasses.replace(cfg, **{name: value, "point_index": point_index})


def run_sweep(
    cfg_template: ScenarioConfig,
    sweep_axis: str | None,
    values,
    trials: int | None = None,
    threads: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Run the configured trials at every sweep point and aggregate.

    Returns (rows, trace_records): `rows` has one dict per (point,
    variant) with keys matching the result-file columns (`sweep_axis`,
    `value`, `mode`, `solver`, `mean_sr`, `stderr`, `trials`);
    `trace_records` holds one JSON-ready dict per trial.
    """
    if sweep_axis is None:
        points = [(None, cfg_template.resolved())]
        axis_label = "none"
    else:
        points = [
            (value, apply_axis(cfg_template, sweep_axis, value, idx).resolved())
            for idx, value in enumerate(values)
        ]
        axis_label = sweep_axis

    rows: list[dict] = []
    traces: list[dict] = []
    for value, cfg in points:
        n_trials = cfg.num_trials if trials is None else int(trials)
        results = _run_point(cfg, n_trials, threads)
        for trial_idx, res in results:
            traces.append(
                {
                    "sweep_axis": axis_label,
                    "value": value,
                    "mode": cfg.mode,
                    "solver": cfg.solver,
                    "trial": trial_idx,
                    "env_digest": res.env_digest,
                    "config": res.config_used,
                    "variant_rates": {k or "base": v for k, v in res.variant_rates.items()},
                    "solver_trace": res.solver_trace_ref,
                }
            )
        if not results:
            continue
        labels = [VARIANT_BASE]
        for extra in (VARIANT_QUANT, VARIANT_ROBUST):
            if extra in results[0][1].variant_rates:
                labels.append(extra)
        for label in labels:
            samples = np.array([res.variant_rates[label] for _, res in results])
            stderr = float(samples.std(ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else 0.0
            rows.append(
                {
                    "sweep_axis": axis_label,
                    "value": value,
                    "mode": cfg.mode if label == VARIANT_BASE else f"{cfg.mode}:{label}",
                    "solver": cfg.solver,
                    "mean_sr": float(samples.mean()),
                    "stderr": stderr,
                    "trials": len(samples),
                }
            )
    return rows, traces


def _run_point(cfg: ScenarioConfig, n_trials: int, threads: int) -> list[tuple[int, TrialResult]]:
    if n_trials <= 0:
        return []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, [(cfg, t) for t in range(n_trials)]))
    else:
        results = [_sweep_worker((cfg, t)) for t in range(n_trials)]
    results.sort(key=lambda item: item[0])
    return results
