import os
import subprocess
import sys

import numpy as np
import pytest

from ratl import _pykern, backend

try:
    from ratl import _cykern
except ImportError:
    _cykern = None

needs_compiled = pytest.mark.skipif(_cykern is None, reason="compiled kernel not built")

SEED = 20240817

# Dense grid straddling both branch seams of each special function.
SICI_XS = np.concatenate(
    [
        np.linspace(0.01, 5.9, 40),
        np.linspace(5.9, 6.1, 21),
        np.linspace(6.2, 80.0, 40),
    ]
)
J0_XS = np.concatenate(
    [
        np.linspace(0.0, 11.9, 40),
        np.linspace(11.9, 12.1, 21),
        np.linspace(12.2, 90.0, 40),
    ]
)


def random_instance(rng, num_ports, num_sel, num_users):
    h = (rng.standard_normal((num_ports, num_users)) + 1j * rng.standard_normal((num_ports, num_users))) / np.sqrt(2)
    rows = rng.choice(num_ports, size=num_sel, replace=False).astype(np.intp)
    return h, np.sort(rows)


def test_active_backend_is_consistent():
    assert backend.backend_name() == backend.impl.BACKEND
    assert backend.backend_name() in ("python", "cython")


def test_kind_codes_cover_public_kinds():
    assert set(backend.KIND_CODES) == {"mf", "zf", "wf"}
    assert backend.KIND_CODES["mf"] == _pykern.KIND_MF
    assert backend.KIND_CODES["zf"] == _pykern.KIND_ZF
    assert backend.KIND_CODES["wf"] == _pykern.KIND_WF


@needs_compiled
def test_kind_codes_match_compiled():
    assert _cykern.KIND_MF == _pykern.KIND_MF
    assert _cykern.KIND_ZF == _pykern.KIND_ZF
    assert _cykern.KIND_WF == _pykern.KIND_WF


@needs_compiled
def test_sici_agrees_across_backends():
    for x in SICI_XS:
        si_py, ci_py = _pykern.sici(float(x))
        si_cy, ci_cy = _cykern.sici(float(x))
        assert si_cy == pytest.approx(si_py, abs=1e-13)
        assert ci_cy == pytest.approx(ci_py, abs=1e-13)


@needs_compiled
def test_j0_agrees_across_backends():
    for x in J0_XS:
        assert _cykern.j0(float(x)) == pytest.approx(_pykern.j0(float(x)), abs=1e-13)


@needs_compiled
def test_sici_domain_error_parity():
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            _pykern.sici(bad)
        with pytest.raises(ValueError):
            _cykern.sici(bad)


@needs_compiled
@pytest.mark.parametrize("kind", ["mf", "zf", "wf"])
@pytest.mark.parametrize("trial", range(10))
def test_sum_rate_rows_agrees_across_backends(kind, trial):
    rng = np.random.default_rng(SEED + trial)
    num_ports = int(rng.integers(6, 20))
    num_users = int(rng.integers(1, 5))
    num_sel = int(rng.integers(num_users, min(num_ports, 8) + 1))
    h, rows = random_instance(rng, num_ports, num_sel, num_users)
    code = backend.KIND_CODES[kind]
    ref = _pykern.sum_rate_rows(h, rows, code, 10.0, 1.0)
    got = _cykern.sum_rate_rows(h, rows, code, 10.0, 1.0)
    assert got == pytest.approx(ref, rel=1e-9)


@needs_compiled
def test_sum_rate_rows_zero_power_parity():
    rng = np.random.default_rng(SEED)
    h, rows = random_instance(rng, 8, 4, 2)
    code = backend.KIND_CODES["zf"]
    assert _pykern.sum_rate_rows(h, rows, code, 0.0, 1.0) == 0.0
    assert _cykern.sum_rate_rows(h, rows, code, 0.0, 1.0) == 0.0


@needs_compiled
def test_rank_deficient_zf_falls_back_to_reference():
    rng = np.random.default_rng(SEED + 99)
    h = (rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))) / np.sqrt(2)
    h[:, 2] = h[:, 1]  # duplicate user column: singular Gram matrix
    rows = np.arange(5, dtype=np.intp)
    code = backend.KIND_CODES["zf"]
    assert np.isnan(_cykern.sum_rate_rows(h, rows, code, 10.0, 1.0))
    ref = _pykern.sum_rate_rows(h, rows, code, 10.0, 1.0)
    assert np.isfinite(ref)
    assert backend.sum_rate_rows(h, rows, code, 10.0, 1.0) == pytest.approx(ref, rel=1e-12)


def test_wrapper_matches_reference_for_wellposed_calls():
    rng = np.random.default_rng(SEED + 7)
    for trial in range(6):
        h, rows = random_instance(rng, 12, 5, 3)
        for kind, code in backend.KIND_CODES.items():
            ref = _pykern.sum_rate_rows(h, rows, code, 4.0, 0.5)
            assert backend.sum_rate_rows(h, rows, code, 4.0, 0.5) == pytest.approx(ref, rel=1e-9)


def test_force_python_env_pins_reference_backend():
    env = dict(os.environ, RATL_FORCE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from ratl import backend; print(backend.backend_name())"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "python"
