"""Compiled kernels against their pure-python/numpy counterparts."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from helpers import crandn
from torsionlab import kernels
from torsionlab._accel import USE_NUMBA


def test_eval_trig_matches_numpy(rng):
    coeffs = crandn(rng, 7, 2, 2)
    for theta in (0.0, 1.3, 5.9):
        expected = kernels._eval_trig_numpy(coeffs, theta)
        np.testing.assert_allclose(kernels.eval_trig(coeffs, theta), expected, atol=1e-13)
        np.testing.assert_allclose(kernels._eval_trig_loops.py_func(coeffs, theta), expected, atol=1e-13)


@pytest.mark.parametrize("k,deg,M", [(1, 2, 8), (2, 3, 6), (3, 1, 5), (2, 6, 4)])
def test_galerkin_assembly_paths_agree(rng, k, deg, M):
    first, zeroth = crandn(rng, 2 * deg + 1, k, k), crandn(rng, 2 * deg + 3, k, k)
    ref = kernels._galerkin_assemble_numpy(first, zeroth, M)
    np.testing.assert_allclose(kernels._galerkin_assemble_loops(first, zeroth, M), ref, atol=1e-14)
    np.testing.assert_allclose(kernels._galerkin_assemble_loops.py_func(first, zeroth, M), ref, atol=1e-14)
    np.testing.assert_allclose(kernels.galerkin_assemble(first, zeroth, M), ref, atol=1e-14)


def test_galerkin_assembly_diagonal_operator():
    k, M = 1, 3
    first = np.zeros((1, k, k), dtype=complex)
    zeroth = np.full((1, k, k), 0.25, dtype=complex)
    G = kernels.galerkin_assemble(first, zeroth, M)
    np.testing.assert_allclose(G, np.diag(np.arange(-M, M + 1) ** 2 + 0.25))


def test_transport_constant_scalar():
    c = 0.3 - 0.2j
    coeffs = np.array([[[c]]])
    Y, steps, status = kernels.transport_dopri5(coeffs, 1e-12, 1e-14, 100000)
    assert status == 0 and steps > 0
    assert abs(Y[0, 0] - np.exp(2 * np.pi * c)) <= 1e-10 * abs(Y[0, 0])
    Y4 = kernels.transport_rk4(coeffs, 512)
    assert abs(Y4[0, 0] - np.exp(2 * np.pi * c)) <= 1e-8 * abs(Y4[0, 0])


def test_transport_paths_agree(rng):
    coeffs = 0.2 * crandn(rng, 5, 2, 2)
    Y, _, _ = kernels.transport_dopri5(coeffs, 1e-10, 1e-12, 100000)
    for variant in (kernels._dopri5_loops, kernels._dopri5_loops.py_func, kernels._dopri5_numpy):
        Yv, _, status = variant(coeffs, 1e-10, 1e-12, 100000)
        assert status == 0
        np.testing.assert_allclose(Yv, Y, rtol=1e-12, atol=1e-12)
    Y4 = kernels.transport_rk4(coeffs, 64)
    for variant in (kernels._rk4_loops, kernels._rk4_loops.py_func, kernels._rk4_numpy):
        np.testing.assert_allclose(variant(coeffs, 64), Y4, rtol=1e-12, atol=1e-12)


def test_step_limit_reports_status():
    coeffs = np.array([[[5.0 + 0j]]])
    _, steps, status = kernels.transport_dopri5(coeffs, 1e-12, 1e-14, 3)
    assert status != 0 and steps <= 3


def test_numpy_fallback_subprocess():
    code = (
        "import json, numpy as np\n"
        "from torsionlab._accel import USE_NUMBA\n"
        "from torsionlab import CircleBundle, monodromy, galerkin_spectrum\n"
        "B = CircleBundle.from_modes({0: 0.3, 1: 0.1, -1: 0.1}, {0: 1.0, 1: 0.1, -1: 0.1})\n"
        "A = monodromy(B).A[0, 0]\n"
        "ev = galerkin_spectrum(B, 1, 8).eigenvalues[:3]\n"
        "print(json.dumps([USE_NUMBA, [A.real, A.imag], [[e.real, e.imag] for e in ev]]))\n"
    )
    env = dict(os.environ, TORSIONLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    use_numba, A, ev = json.loads(out.stdout)
    assert use_numba is False
    from torsionlab import CircleBundle, galerkin_spectrum, monodromy
    B = CircleBundle.from_modes({0: 0.3, 1: 0.1, -1: 0.1}, {0: 1.0, 1: 0.1, -1: 0.1})
    assert abs(complex(*A) - monodromy(B).A[0, 0]) <= 1e-10
    np.testing.assert_allclose([complex(*e) for e in ev], galerkin_spectrum(B, 1, 8).eigenvalues[:3], atol=1e-10)


def test_numba_active_by_default():
    if os.environ.get("TORSIONLAB_DISABLE_NUMBA"):
        pytest.skip("numba explicitly disabled")
    assert USE_NUMBA


def test_benchmark_script_runs():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--repeat", "1"], capture_output=True, text=True, check=True)
    rows = [line.split() for line in out.stdout.splitlines() if line.split()[0] in
            {"monodromy", "dopri5", "rk4_2048", "galerkin_M64"}]
    assert len(rows) == 4 and all(float(r[1]) > 0 and float(r[2]) > 0 for r in rows)
