import numpy as np
import pytest

from ratl.errors import ConfigError
from ratl.montecarlo import (
    MODE_ALLACTIVE_LOADS,
    MODE_ALLACTIVE_NOLOADS,
    MODE_FPA,
    MODE_MAMP,
    ScenarioConfig,
    apply_axis,
    axis_field,
    run_sweep,
    run_trial,
)

FAST = dict(num_ras=3, ports_per_ra=2, solver_max_iter=30, load_max_iter=50)


def test_resolved_defaults_per_mode():
    mamp = ScenarioConfig(mode=MODE_MAMP).resolved()
    assert mamp.channel_model == "sv"
    assert mamp.port_spacing == pytest.approx(1 / 16)
    assert mamp.carrier_freq_hz == 28e9
    assert mamp.solver == "greedy"
    aa = ScenarioConfig(mode=MODE_ALLACTIVE_LOADS).resolved()
    assert aa.channel_model == "rayleigh"
    assert aa.port_spacing == pytest.approx(0.25)
    assert aa.carrier_freq_hz == 3e9
    assert aa.solver == "tabu"
    fpa = ScenarioConfig(mode=MODE_FPA).resolved()
    assert fpa.ports_per_ra == 1
    assert fpa.port_spacing == pytest.approx(0.5)
    assert fpa.solver == "fixed"


def test_resolved_rejects_bad_mode_and_solver():
    with pytest.raises(ConfigError):
        ScenarioConfig(mode="warp-drive").resolved()
    with pytest.raises(ConfigError):
        ScenarioConfig(mode=MODE_MAMP, solver="fixed").resolved()
    with pytest.raises(ConfigError):
        ScenarioConfig(mode=MODE_ALLACTIVE_LOADS, solver="greedy-mamp").resolved()


@pytest.mark.parametrize(
    "mode", [MODE_MAMP, MODE_ALLACTIVE_LOADS, MODE_ALLACTIVE_NOLOADS, MODE_FPA]
)
def test_run_trial_is_deterministic(mode):
    cfg = ScenarioConfig(mode=mode, seed=5, **FAST).resolved()
    a = run_trial(cfg, 2)
    b = run_trial(cfg, 2)
    assert a.sum_rate == b.sum_rate
    assert np.array_equal(a.per_user_rates, b.per_user_rates)
    assert a.env_digest == b.env_digest
    assert a.sum_rate == pytest.approx(float(np.sum(a.per_user_rates)))


def test_paired_modes_share_environment():
    with_l = ScenarioConfig(mode=MODE_ALLACTIVE_LOADS, seed=7, **FAST).resolved()
    no_l = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=7, **FAST).resolved()
    for t in range(4):
        assert run_trial(with_l, t).env_digest == run_trial(no_l, t).env_digest
    # trials draw different environments
    assert run_trial(with_l, 0).env_digest != run_trial(with_l, 1).env_digest


def test_identity_coupling_matches_uncoupled_path():
    from ratl.channel import RayleighChannelParams, select_ports, synthesize_rayleigh
    from ratl.geometry import build_grid
    from ratl.montecarlo import _STREAM_ENV, _STREAM_SOLVER, _stream_rng
    from ratl.precoding import precoder, sinr_mamp
    from ratl.solvers import TabuParams, make_sum_rate_fitness, tabu_search

    cfg = ScenarioConfig(
        mode=MODE_ALLACTIVE_NOLOADS, seed=1, force_identity_coupling=True
    ).resolved()
    got = run_trial(cfg, 3)
    grid = build_grid(cfg.num_ras, cfg.ports_per_ra, cfg.port_spacing, cfg.carrier_freq_hz)
    h = synthesize_rayleigh(
        grid,
        cfg.num_users,
        RayleighChannelParams(cfg.num_directions, cfg.angular_spread),
        _stream_rng(cfg, 3, _STREAM_ENV),
    ).port_channels
    p_max = 10.0 ** (cfg.snr_db / 10.0)
    fitness = make_sum_rate_fitness(h, cfg.ports_per_ra, cfg.precoder_kind, p_max, 1.0)
    trace = tabu_search(
        fitness,
        cfg.num_ras,
        cfg.ports_per_ra,
        TabuParams(max_iter=cfg.solver_max_iter),
        _stream_rng(cfg, 3, _STREAM_SOLVER),
    )
    h_sel = select_ports(h, trace.best.config, cfg.ports_per_ra)
    want = sinr_mamp(h_sel, precoder(h_sel, cfg.precoder_kind, p_max, 1.0).W, 1.0).sum_rate
    assert got.sum_rate == pytest.approx(want, abs=1e-12)


def test_fpa_runs_single_port_pipeline():
    cfg = ScenarioConfig(mode=MODE_FPA, seed=2, num_ras=3).resolved()
    r = run_trial(cfg, 0)
    assert cfg.ports_per_ra == 1
    assert r.config_used == [0, 0, 0]
    assert r.solver_trace_ref is None
    assert r.sum_rate > 0


def test_mamp_trial_has_quant_variants_when_configured():
    cfg = ScenarioConfig(mode=MODE_MAMP, seed=3, quant_beta=1e-2, symbol_draws=2).resolved()
    r = run_trial(cfg, 0)
    assert set(r.variant_rates) == {"", "quant", "robust"}
    assert r.variant_rates["robust"] >= r.variant_rates["quant"] - 1e-9
    cfg_plain = ScenarioConfig(mode=MODE_MAMP, seed=3, symbol_draws=2).resolved()
    assert set(run_trial(cfg_plain, 0).variant_rates) == {""}


def test_axis_field_validation():
    assert axis_field("num-ras") == "num_ras"
    assert axis_field("snr_db") == "snr_db"
    for bad in ("seed", "point_index", "wavelength"):
        with pytest.raises(ConfigError):
            axis_field(bad)


def test_apply_axis_coerces_int_fields():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS)
    out = apply_axis(cfg, "num-ras", 6.0, point_index=2)
    assert out.num_ras == 6 and isinstance(out.num_ras, int)
    assert out.point_index == 2
    out2 = apply_axis(cfg, "snr-db", 12.5, point_index=0)
    assert out2.snr_db == 12.5


def test_run_sweep_rows_schema_and_pairing():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=4, num_trials=3, **FAST)
    rows, traces = run_sweep(cfg, "num-ras", [3, 4])
    assert len(rows) == 2
    assert [r["value"] for r in rows] == [3, 4]
    for row in rows:
        assert set(row) == {"sweep_axis", "value", "mode", "solver", "mean_sr", "stderr", "trials"}
        assert row["sweep_axis"] == "num-ras"
        assert row["mode"] == MODE_ALLACTIVE_NOLOADS
        assert row["trials"] == 3
        assert row["stderr"] >= 0
    assert len(traces) == 6
    assert {t["trial"] for t in traces} == {0, 1, 2}
    for t in traces:
        assert "base" in t["variant_rates"]


def test_run_sweep_no_axis_single_point():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=4, num_trials=2, **FAST)
    rows, traces = run_sweep(cfg, None, [])
    assert len(rows) == 1
    assert rows[0]["sweep_axis"] == "none"
    assert rows[0]["value"] is None
    assert rows[0]["trials"] == 2


def test_run_sweep_zero_values_empty():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=4, num_trials=2, **FAST)
    rows, traces = run_sweep(cfg, "num-ras", [])
    assert rows == []
    assert traces == []


def test_run_sweep_single_trial_mean_is_trial():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=4, num_trials=1, **FAST)
    rows, traces = run_sweep(cfg, None, [])
    point_cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=4, num_trials=1, **FAST).resolved()
    want = run_trial(point_cfg, 0).sum_rate
    assert rows[0]["mean_sr"] == pytest.approx(want)
    assert rows[0]["stderr"] == 0.0


def test_run_sweep_quant_variant_rows():
    cfg = ScenarioConfig(
        mode=MODE_ALLACTIVE_LOADS, seed=4, num_trials=2, quant_beta=1e-2, **FAST
    )
    rows, _ = run_sweep(cfg, None, [])
    modes = sorted(r["mode"] for r in rows)
    assert modes == [
        MODE_ALLACTIVE_LOADS,
        MODE_ALLACTIVE_LOADS + ":quant",
        MODE_ALLACTIVE_LOADS + ":robust",
    ]


def test_run_sweep_threads_match_serial():
    cfg = ScenarioConfig(mode=MODE_ALLACTIVE_NOLOADS, seed=6, num_trials=4, **FAST)
    serial, _ = run_sweep(cfg, "num-ras", [3, 4], threads=1)
    parallel, _ = run_sweep(cfg, "num-ras", [3, 4], threads=2)
    assert serial == parallel


def test_trial_errors_carry_context():
    # dipole radius out of range surfaces at impedance-build time
    cfg = ScenarioConfig(
        mode=MODE_ALLACTIVE_NOLOADS, seed=1, dipole_radius=0.3, **FAST
    ).resolved()
    with pytest.raises(ValueError, match="trial"):
        run_trial(cfg, 0)
