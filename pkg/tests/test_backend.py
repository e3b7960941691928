import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgflow import _backend, _fallback

core = pytest.importorskip("sgflow._core")


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("odd", [False, True])
def test_trig_sums_match(odd):
    r = rng(1)
    z = r.uniform(-30, 30, 5000)
    nodes, weights = r.uniform(0, 8, 37), r.normal(size=37)
    a = core.trig_sums(z, nodes, weights, odd)
    b = _fallback.trig_sums(z, nodes, weights, odd)
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("kind", [_fallback.PLAIN, _fallback.MINUS_STEP, _fallback.MINUS_RAMP])
def test_hermite_eval_match(kind):
    r = rng(2)
    vals, slopes = r.normal(size=200), r.normal(size=200)
    z = np.concatenate([r.uniform(-2, 12, 3000), [-1.0, 0.0, 9.95, 11.0]])
    a = core.hermite_eval(vals, slopes, -1.0, 0.05, z, kind)
    b = _fallback.hermite_eval(vals, slopes, -1.0, 0.05, z, kind)
    assert np.max(np.abs(a - b)) < 1e-13


def test_hermite_reproduces_cubic():
    zg = np.linspace(-1, 1, 41)
    f = lambda z: 2 * z ** 3 - z + 0.5
    df = lambda z: 6 * z ** 2 - 1
    z = np.linspace(-1, 1, 777)
    for impl in (core, _fallback):
        out = impl.hermite_eval(f(zg), df(zg), -1.0, 0.05, z, _fallback.PLAIN)
        assert np.max(np.abs(out - f(z))) < 1e-13


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.integers(0, 2), st.integers(0, 1000))
def test_ramp_sum_match(s, kind, seed):
    r = rng(seed)
    vals, slopes = r.normal(size=161), r.normal(size=161)
    kappa = r.normal(size=300)
    x = r.uniform(-2, 8, 200)
    args = (x, -1.0, 0.02, kappa, vals, slopes, -4.0, 0.05, s, kind)
    assert np.max(np.abs(core.ramp_sum(*args) - _fallback.ramp_sum(*args))) < 1e-11


def test_ball_scan_match():
    r = rng(3)
    cum = np.cumsum(r.uniform(size=(6, 400)), axis=1) * 0.01
    weights = r.uniform(size=(4, 6))
    weights[1, 2] = 0.0
    radii = np.array([0.05, 0.1, 0.4, 1.0])
    centers = r.uniform(-0.5, 2.5, 90)
    a = core.ball_scan_1d(cum, -1.0, 0.01, weights, radii, centers, 1.5)
    b = _fallback.ball_scan_1d(cum, -1.0, 0.01, weights, radii, centers, 1.5)
    assert np.max(np.abs(a - b)) < 1e-12


def test_default_backend_is_compiled():
    if not os.environ.get("SGFLOW_PURE_PYTHON"):
        assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, SGFLOW_PURE_PYTHON="1")
    code = "from sgflow import _backend; print(_backend.BACKEND)"
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert res.stdout.strip() == "python"


def test_kernel_constants_agree_across_backends():
    code = ("from sgflow import kernel as K; t = K.build_kernel(dz=1/64); "
            "c = K.kernel_constants(t); print(repr(c.g0), repr(c.c4))")
    outs = []
    for flag in ("", "1"):
        env = dict(os.environ)
        env.pop("SGFLOW_PURE_PYTHON", None)
        if flag:
            env["SGFLOW_PURE_PYTHON"] = flag
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append([float(v) for v in res.stdout.split()])
    assert outs[0] == pytest.approx(outs[1], rel=1e-12)
