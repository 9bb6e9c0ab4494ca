"""Command-line front end: `ratl run` executes a scenario file, `ratl
verify` runs the independent numerical cross-checks.

Scenario files are TOML with kebab-case keys mirroring ScenarioConfig
(e.g. `ports-per-ra = 4`); an optional `[sweep]` table names an axis and
its values. SNR is given in dB and converted as P_max = 10^(SNR/10)
with the noise power normalized to 1.

`run` writes three files to --out: results.csv (one row per sweep point
and mode variant), traces.jsonl (per-trial solver traces), and
manifest.json (config echo + seed + version). results.csv is
byte-identical across reruns of the same manifest.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import difflib
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, backend
from .errors import ConfigError, RatlError
from .montecarlo import ScenarioConfig, apply_axis, axis_field, run_sweep

CSV_COLUMNS = ("sweep_axis", "value", "mode", "solver", "mean_sr", "stderr", "trials")

_KEY_TO_FIELD = {
    f.name.replace("_", "-"): f for f in dataclasses.fields(ScenarioConfig)
}
_CASTS = {"int": int, "float": float, "str": str, "bool": bool}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ratl",
        description="Reconfigurable-antenna array simulations: port selection, "
        "load tuning, quantization robustness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("config", help="TOML scenario file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--threads", type=int, default=1, help="worker processes")
    run_p.add_argument("--seed-override", type=int, default=None)

    ver_p = sub.add_parser("verify", help="run the numerical cross-check suites")
    ver_p.add_argument(
        "--suite",
        default="all",
        help="special_fns | gradient | oracle | circuit | all",
    )

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, threads=args.threads, seed_override=args.seed_override)
    return cmd_verify(args.suite)


# ---------------------------------------------------------------- run


def cmd_run(config_path: str, out_dir: str, threads: int = 1, seed_override: int | None = None) -> int:
    try:
        raw_text, data = _load_toml(config_path)
        cfg, axis, values = _parse_scenario(data, raw_text, config_path)
        if seed_override is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed_override))
        cfg.resolved()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        rows, traces = run_sweep(cfg, axis, values, threads=threads)
        _write_outputs(Path(out_dir), rows, traces, data, cfg, threads)
    except Exception as exc:  # noqa: BLE001 - any trial failure is exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def _load_toml(path: str) -> tuple[str, dict]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw_text = p.read_text()
    try:
        return raw_text, tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as exc:  # message carries line/column
        raise ConfigError(f"{path}: {exc}") from exc


def _key_line(raw_text: str, key: str) -> str:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        if pattern.match(line):
            return str(lineno)
    return "?"


def _parse_scenario(data: dict, raw_text: str, path: str):
    data = dict(data)
    sweep = data.pop("sweep", None)
    kwargs = {}
    for key, value in data.items():
        if key not in _KEY_TO_FIELD:
            hints = difflib.get_close_matches(key, _KEY_TO_FIELD, n=1)
            hint = f" (did you mean {hints[0]!r}?)" if hints else ""
            raise ConfigError(f"{path}:{_key_line(raw_text, key)}: unknown key {key!r}{hint}")
        field = _KEY_TO_FIELD[key]
        cast = _CASTS.get(str(field.type))
        try:
            kwargs[field.name] = cast(value) if cast else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{path}:{_key_line(raw_text, key)}: bad value for {key!r}: {exc}"
            ) from exc
    cfg = ScenarioConfig(**kwargs)

    axis = values = None
    if sweep is not None:
        if not isinstance(sweep, dict) or "axis" not in sweep or "values" not in sweep:
            raise ConfigError(
                f"{path}:{_key_line(raw_text, 'axis') if isinstance(sweep, dict) else '?'}: "
                "[sweep] requires 'axis' and 'values'"
            )
        axis = str(sweep["axis"])
        axis_field(axis)  # raises ConfigError on an unknown axis
        values = list(sweep["values"])
        if values:
            apply_axis(cfg, axis, values[0], 0)
    return cfg, axis, values


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_outputs(out_dir: Path, rows, traces, config_echo, cfg: ScenarioConfig, threads: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in CSV_COLUMNS])
    with open(out_dir / "traces.jsonl", "w") as fh:
        for record in traces:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    manifest = {
        "config": config_echo,
        "seed": cfg.seed,
        "version": __version__,
        "backend": backend.backend_name(),
        "threads": threads,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- verify


def cmd_verify(suite: str = "all") -> int:
    suites = {
        "special_fns": _suite_special_fns,
        "gradient": _suite_gradient,
        "oracle": _suite_oracle,
        "circuit": _suite_circuit,
    }
    if suite == "all":
        selected = list(suites)
    elif suite in suites:
        selected = [suite]
    else:
        hints = difflib.get_close_matches(suite, [*suites, "all"], n=1)
        hint = f"; did you mean {hints[0]!r}?" if hints else ""
        print(f"unknown suite {suite!r}{hint}", file=sys.stderr)
        return 1

    all_ok = True
    for name in selected:
        for check, ok, detail in suites[name]():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}:{check} {detail}")
            all_ok = all_ok and ok
    return 0 if all_ok else 1


def _suite_special_fns():
    from scipy.integrate import quad
    from scipy.optimize import brentq

    from .special import bessel_j0, sin_cos_integrals

    checks = []
    si_ref = quad(lambda t: np.sinc(t / np.pi), 0.0, 100.0, limit=400)[0]
    si_val = sin_cos_integrals(100.0)[0]
    checks.append(("si_100", abs(si_val - si_ref) <= 1e-9, f"|err|={abs(si_val - si_ref):.3e}"))

    # Ci(x) = gamma + ln x + integral_0^x (cos t - 1)/t dt
    euler_gamma = 0.5772156649015329
    ci_ref = euler_gamma + quad(lambda t: (np.cos(t) - 1.0) / t if t > 1e-12 else 0.0, 0.0, 1.0)[0]
    ci_val = sin_cos_integrals(1.0)[1]
    checks.append(("ci_1", abs(ci_val - ci_ref) <= 1e-9, f"|err|={abs(ci_val - ci_ref):.3e}"))

    zero = brentq(bessel_j0, 2.0, 3.0, xtol=1e-12)
    checks.append(
        ("j0_first_zero", abs(zero - 2.404825557695773) <= 1e-6, f"zero={zero:.9f}")
    )
    return checks


def _gradient_instances(rng: np.random.Generator):
    from .coupling import DipoleSpec, build_impedance_matrix
    from .geometry import build_grid
    from .precoding import precoder

    spec = DipoleSpec()
    for m_count in (2, 3, 4):
        grid = build_grid(m_count, 2, 0.25)
        config = rng.integers(0, 2, size=m_count)
        z_matrix = build_impedance_matrix(spec, grid, config)
        h = (rng.standard_normal((m_count, 2)) + 1j * rng.standard_normal((m_count, 2))) / np.sqrt(2)
        f_dir = precoder(h, "wf", 100.0, 1.0).F
        z_loads = np.full(m_count, spec.z_source) + 5.0 * (
            rng.standard_normal(m_count) + 1j * rng.standard_normal(m_count)
        )
        yield z_matrix, f_dir, spec.z_self, z_loads


def _fd_gradient(z_matrix, f_dir, z_self, z_loads):
    from .loads import grad_load_objective

    fd = np.empty_like(z_loads)
    for m in range(z_loads.size):
        h_step = 1e-4 * (1.0 + abs(z_loads[m]))
        for axis, unit in enumerate((1.0, 1j)):
            plus = z_loads.copy()
            plus[m] += h_step * unit
            minus = z_loads.copy()
            minus[m] -= h_step * unit
            deriv = (
                grad_load_objective(plus, z_matrix, f_dir, z_self)
                - grad_load_objective(minus, z_matrix, f_dir, z_self)
            ) / (2 * h_step)
            if axis == 0:
                fd[m] = deriv
            else:
                fd[m] += 1j * deriv
    return fd


def _suite_gradient():
    from .loads import grad_load_gradient

    rng = np.random.default_rng(20240817)
    checks = []
    worst = 0.0
    for z_matrix, f_dir, z_self, z_loads in _gradient_instances(rng):
        analytic = grad_load_gradient(z_loads, z_matrix, f_dir, z_self)
        fd = _fd_gradient(z_matrix, f_dir, z_self, z_loads)
        rel = np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-12)
        worst = max(worst, float(rel.max()))
    checks.append(("fd_match", worst <= 1e-3, f"max rel err={worst:.3e}"))

    # mutation self-test: a +10% scaling of the analytic gradient must be flagged
    z_matrix, f_dir, z_self, z_loads = next(_gradient_instances(rng))
    mutated = 1.1 * grad_load_gradient(z_loads, z_matrix, f_dir, z_self)
    fd = _fd_gradient(z_matrix, f_dir, z_self, z_loads)
    rel = np.abs(mutated - fd) / np.maximum(np.abs(fd), 1e-12)
    checks.append(
        ("mutation_detected", float(rel.max()) > 1e-3, f"max rel err={float(rel.max()):.3e}")
    )
    return checks


def _suite_oracle():
    """Exhaustive search against an independent nested-loop enumeration."""
    from .solvers import exhaustive_search, make_sum_rate_fitness

    rng = np.random.default_rng(7)
    m_count, n_ports, users = 3, 3, 2
    p_max, sigma2 = 100.0, 1.0
    h_port = (
        rng.standard_normal((m_count * n_ports, users))
        + 1j * rng.standard_normal((m_count * n_ports, users))
    ) / np.sqrt(2)

    def direct_rate(cfg: tuple) -> float:
        rows = [m * n_ports + cfg[m] for m in range(m_count)]
        hs = h_port[rows, :]
        gram = hs.conj().T @ hs
        f = hs @ np.linalg.inv(gram + (sigma2 * users / p_max) * np.eye(users))
        alpha2 = p_max / np.vdot(f, f).real
        cross = alpha2 * np.abs(hs.conj().T @ f) ** 2
        sig = np.diag(cross).real
        gamma = sig / (cross.sum(axis=1).real - sig + sigma2)
        return float(np.log2(1.0 + gamma).sum())

    best_direct, best_cfg = -np.inf, None
    for c0 in range(n_ports):
        for c1 in range(n_ports):
            for c2 in range(n_ports):
                val = direct_rate((c0, c1, c2))
                if val > best_direct:
                    best_direct, best_cfg = val, (c0, c1, c2)

    fitness = make_sum_rate_fitness(h_port, n_ports, "wf", p_max, sigma2)
    trace = exhaustive_search(fitness, m_count, n_ports)
    same_cfg = tuple(trace.best.config) == best_cfg
    close = abs(trace.best_fitness - best_direct) <= 1e-9 * max(1.0, abs(best_direct))
    return [
        ("es_config", same_cfg, f"{tuple(int(c) for c in trace.best.config)} vs {best_cfg}"),
        ("es_fitness", close, f"|diff|={abs(trace.best_fitness - best_direct):.3e}"),
    ]


def _suite_circuit():
    from .coupling import DipoleSpec, build_impedance_matrix, effective_coupling
    from .geometry import build_grid, build_partition
    from .loads import mamp_drive

    rng = np.random.default_rng(99)
    spec = DipoleSpec()
    checks = []

    worst_resid = 0.0
    for _ in range(20):
        m_count = int(rng.integers(2, 7))
        grid = build_grid(m_count, 2, 0.25)
        config = rng.integers(0, 2, size=m_count)
        z_matrix = build_impedance_matrix(spec, grid, config)
        z_loads = 30.0 + 50.0 * rng.random(m_count) + 1j * 40.0 * (rng.random(m_count) - 0.5)
        state = effective_coupling(z_matrix, z_loads)
        resid = np.linalg.norm(state.Z_T @ (z_matrix + np.diag(z_loads)) - np.eye(m_count))
        worst_resid = max(worst_resid, float(resid))
    checks.append(("zt_inverse", worst_resid <= 1e-9, f"max resid={worst_resid:.3e}"))

    worst_rt = 0.0
    for _ in range(20):
        partition = build_partition(2, 2, seed=int(rng.integers(1_000_000)))
        m_count = partition.num_ras
        grid = build_grid(m_count, 2, 1.0 / 16.0)
        config = rng.integers(0, 2, size=m_count)
        z_matrix = build_impedance_matrix(spec, grid, config)
        w = (rng.standard_normal((m_count, 2)) + 1j * rng.standard_normal((m_count, 2))) / np.sqrt(2)
        symbols = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / np.sqrt(2)
        drive = mamp_drive(z_matrix, w, symbols, spec.z_source, partition)
        z_raw = drive.termination_vector_raw(spec.z_source, partition)
        target = w @ symbols
        solved = np.linalg.solve(z_matrix + np.diag(z_raw), drive.voltages)
        err = np.linalg.norm(solved - target) / np.linalg.norm(target)
        worst_rt = max(worst_rt, float(err))
    checks.append(("mamp_round_trip", worst_rt <= 1e-8, f"max rel err={worst_rt:.3e}"))
    return checks


if __name__ == "__main__":
    raise SystemExit(main())
