"""Compare the compiled and numpy RK4 characteristic tracers.

The workload is the one behind the control-to-state operator: every node of
an n x n grid traced backward through the observable drift over one phase.

    python benchmarks/bench_kernels.py --n 128 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tsteer import _kernels_py, kernels
from tsteer.cutoffs import build_covering
from tsteer.flows import ObservableSpec, _observable_nodes, build_return_profile
from tsteer.saturation import GeneratorSet
from tsteer.spectral import grid_of


def workload(n: int, steps_per_phase: int):
    _, schedule = build_return_profile(build_covering((0.5, 4.7, 0.5, 4.7), 36))
    spec = ObservableSpec(GeneratorSet(((1, 0), (0, 1))), schedule.phase, strength=1.0)
    T = spec.phase
    nodes, record = _observable_nodes(spec, [T, 0.0], T / steps_per_phase)
    times = np.stack([nodes[:-1], 0.5 * (nodes[:-1] + nodes[1:]), nodes[1:]], 1)
    return grid_of(n).points, spec.modes, spec.coefficients(times), np.diff(nodes), record


def best_of(func, args, repeat: int) -> tuple[float, np.ndarray]:
    best, out = float("inf"), None
    for _ in range(repeat):
        started = time.perf_counter()
        out = func(*args)
        best = min(best, time.perf_counter() - started)
    return best, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=128)
    parser.add_argument("--steps", type=int, default=256, help="RK4 steps per phase")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    data = workload(args.n, args.steps)
    print(f"points {len(data[0])}, steps {len(data[3])}, modes {len(data[1])}")
    numpy_time, reference = best_of(_kernels_py.rk4_trig_flow, data, args.repeat)
    print(f"numpy    {numpy_time:8.3f} s")
    if kernels.BACKEND != "compiled":
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 0
    compiled_time, result = best_of(kernels.rk4_trig_flow, data, args.repeat)
    gap = float(np.max(np.abs(result - reference)))
    print(f"compiled {compiled_time:8.3f} s  speedup {numpy_time / compiled_time:5.1f}x  max difference {gap:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
