import os
import subprocess
import sys

import numpy as np
import pytest

from tsteer import _kernels_py, kernels

BACKENDS = [_kernels_py.rk4_trig_flow]
if kernels.BACKEND == "compiled":
    BACKENDS.append(kernels.rk4_trig_flow)


@pytest.mark.parametrize("flow", BACKENDS)
def test_steady_shear_is_integrated_exactly(flow):
    # mode (1, 0) with sine amplitude c moves x2 by c sin(x1) per unit time
    c, steps = 0.7, 10
    modes = np.array([[1.0, 0.0]])
    coefs = np.zeros((steps, 3, 1, 2))
    coefs[..., 0] = c
    pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (50, 2))
    out = flow(pts, modes, coefs, np.full(steps, 0.1), np.array([0, 5, steps]))
    assert np.array_equal(out[0], pts)
    assert np.max(np.abs(out[1, :, 0] - pts[:, 0])) == 0.0
    assert np.max(np.abs(out[2, :, 1] - (pts[:, 1] + c * np.sin(pts[:, 0])))) < 1e-14


@pytest.mark.parametrize("flow", BACKENDS)
def test_backward_steps_undo_forward_steps(flow):
    rng = np.random.default_rng(1)
    modes = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    coefs = np.broadcast_to(rng.normal(size=(1, 1, 3, 2)), (40, 3, 3, 2)).copy()
    pts = rng.uniform(0, 2 * np.pi, (20, 2))
    there = flow(pts, modes, coefs, np.full(40, 0.01), np.array([40]))[0]
    back = flow(there, modes, coefs, np.full(40, -0.01), np.array([40]))[0]
    assert np.max(np.abs(back - pts)) < 1e-9


def test_trig_velocity_is_divergence_free():
    rng = np.random.default_rng(2)
    modes = np.array([[1.0, 2.0], [-3.0, 1.0]])
    coefs = rng.normal(size=(2, 2))
    x = rng.uniform(0, 2 * np.pi, (30, 2))
    h = 1e-5
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    div = ((_kernels_py.trig_velocity(x + dx, modes, coefs) - _kernels_py.trig_velocity(x - dx, modes, coefs))[:, 0]
           + (_kernels_py.trig_velocity(x + dy, modes, coefs) - _kernels_py.trig_velocity(x - dy, modes, coefs))[:, 1])
    assert np.max(np.abs(div)) / (2 * h) < 1e-8


def test_environment_forces_numpy_fallback():
    env = dict(os.environ, TSTEER_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from tsteer import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
