"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from torsionlab import CircleBundle, monodromy
from torsionlab import kernels
from torsionlab._accel import USE_NUMBA

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
k = 2
a = {m: 0.3 * (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) for m in range(-2, 3)}
bundle = CircleBundle.from_modes(a, {0: np.eye(k), 1: 0.05 * np.eye(k), -1: 0.05 * np.eye(k)}, rank=k)
first = rng.standard_normal((7, k, k)) + 0j
zeroth = rng.standard_normal((9, k, k)) + 0j

def timed(fn):
    fn()  # warm-up, includes compilation on the numba path
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat

print(json.dumps({
    "numba": USE_NUMBA,
    "monodromy": timed(lambda: monodromy(bundle)),
    "dopri5": timed(lambda: kernels.transport_dopri5(bundle.a.coeffs, 1e-12, 1e-14, 10_000_000)),
    "rk4_2048": timed(lambda: kernels.transport_rk4(bundle.a.coeffs, 2048)),
    "galerkin_M64": timed(lambda: kernels.galerkin_assemble(first, zeroth, 64)),
}))
"""


def run_backend(disable, repeat):
    env = dict(os.environ)
    env.pop("TORSIONLAB_DISABLE_NUMBA", None)
    if disable:
        env["TORSIONLAB_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    compiled = run_backend(False, args.repeat)
    fallback = run_backend(True, args.repeat)
    if not compiled["numba"]:
        print("warning: numba is not available, both columns use numpy")
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")
    for name in ("monodromy", "dopri5", "rk4_2048", "galerkin_M64"):
        c, f = 1e3 * compiled[name], 1e3 * fallback[name]
        print(f"{name:<14}{c:>12.3f}{f:>12.3f}{f / c:>8.1f}")


if __name__ == "__main__":
    main()
