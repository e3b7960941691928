import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from sgflow import field as F
from sgflow import gallery as G
from sgflow import kernel as K
from sgflow import solver as S

TWO_PI = 2 * math.pi


def band_limited(seed, n=128, L=TWO_PI, kmax=None, dim=1):
    rng = np.random.default_rng(seed)
    kmax = n // 3 if kmax is None else kmax
    x = np.arange(n) * (L / n)
    axes = np.meshgrid(*([x] * dim), indexing="ij")
    vals = np.zeros((n,) * dim)
    for _ in range(6):
        ks = rng.integers(-kmax, kmax + 1, size=dim)
        ph = rng.uniform(0, TWO_PI)
        arg = sum(k * TWO_PI / L * a for k, a in zip(ks, axes))
        vals += rng.normal() * np.cos(arg + ph)
    return F.TorusField.from_values(vals, L)


# --------------------------------------------------------------- torus

def test_semigroup_constant_and_modes():
    c = F.TorusField.from_function(lambda x: 3.0 + 0 * x, 64, TWO_PI)
    assert np.allclose(F.semigroup_apply(c, 5.0).values(), 3.0, atol=1e-15)
    s = F.TorusField.from_function(np.sin, 64, TWO_PI)
    x = s.grid()
    assert np.allclose(F.semigroup_apply(s, 1.0).values(), math.exp(-1) * np.sin(x), atol=1e-15)
    assert F.semigroup_apply(s, 0.0) is s


def test_semigroup_against_time_stepping():
    f = F.TorusField.from_function(lambda x: np.sin(2 * x), 64, TWO_PI)
    x = f.grid()
    exact = math.exp(-1.6) * np.sin(2 * x)
    assert np.allclose(F.semigroup_apply(f, 0.1).values(), exact, atol=1e-14)
    stepped = S.reference_solve(f, 0.1, 50, nonlinear=False, check=False)
    assert np.allclose(stepped.fields[-1].values(), exact, atol=1e-12)


def test_negative_time_rejected():
    with pytest.raises(F.FieldError):
        F.semigroup_apply(F.TorusField.zeros(16, 1.0), -1.0)


def test_bad_resolution_rejected():
    with pytest.raises(F.FieldError):
        F.TorusField(1, 12, 1.0, np.zeros(12, complex))


def test_gradient_exact_and_fd():
    L = 3.0
    f = F.TorusField.from_function(lambda x: np.sin(TWO_PI * x / L), 64, L)
    x = f.grid()
    g = F.gradient(f)[0].values()
    assert np.allclose(g, TWO_PI / L * np.cos(TWO_PI * x / L), atol=1e-13)
    const = F.TorusField.from_function(lambda x: 1.0 + 0 * x, 64, L)
    assert np.allclose(F.gradient(const)[0].values(), 0.0)
    # centred differences converge at second order
    errs = []
    for n in (256, 512):
        h = band_limited(3, n=n, kmax=6)
        v = h.values()
        dx = TWO_PI / n
        fd = (np.roll(v, -1) - np.roll(v, 1)) / (2 * dx)
        errs.append(np.max(np.abs(fd - F.gradient(h)[0].values())))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_nonlinearity_sine_identity():
    f = F.TorusField.from_function(np.sin, 64, TWO_PI)
    x = f.grid()
    assert np.allclose(F.nonlinearity(f).values(), -2 * np.cos(2 * x), atol=1e-11)
    assert np.allclose(F.nonlinearity(F.TorusField.zeros(64, TWO_PI)).values(), 0)


def test_nonlinearity_two_dimensional():
    f = F.TorusField.from_function(lambda x, y: np.sin(x) + np.cos(y), 32, TWO_PI, dim=2)
    X, Y = np.meshgrid(f.grid(), f.grid(), indexing="ij")
    assert np.allclose(F.nonlinearity(f).values(), -2 * np.cos(2 * X) + 2 * np.cos(2 * Y), atol=1e-11)


def _oversampled_nonlinearity(f, factor=4):
    """Independent route: zero-pad to factor*n, product in physical space, truncate."""
    n = f.n
    N = factor * n
    k = np.fft.fftfreq(n, 1.0 / n)
    kappa = TWO_PI * k / f.L
    keep = np.abs(k) <= n / 3
    c = np.where(keep, f.coeffs, 0) * (np.abs(k) != n // 2)
    big = np.zeros(N, complex)
    big[k.astype(int) % N] = 1j * kappa * c
    gx = np.fft.ifft(big).real * N
    prod = np.fft.fft(gx * gx) / N
    out = prod[k.astype(int) % N] * keep
    return -(kappa ** 2) * out


def test_nonlinearity_matches_oversampled_oracle():
    f = band_limited(11, n=128)
    got = F.nonlinearity(f).coeffs
    ref = _oversampled_nonlinearity(f)
    assert np.max(np.abs(got - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_dealias_no_op_on_band_limited():
    f = band_limited(5, n=128)
    assert np.max(np.abs(F.dealias(f).coeffs - f.coeffs)) < 1e-14 * np.max(np.abs(f.coeffs))


def test_derivative_orders():
    f = F.TorusField.from_function(np.sin, 64, TWO_PI)
    x = f.grid()
    assert np.allclose(F.derivative(f, [3]).values(), -np.cos(x), atol=1e-12)
    assert np.allclose(F.laplacian(f).values(), -np.sin(x), atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_semigroup_property(seed, t, s):
    f = band_limited(seed, n=64)
    a = F.semigroup_apply(f, t + s).coeffs
    b = F.semigroup_apply(F.semigroup_apply(f, t), s).coeffs
    assert np.max(np.abs(a - b)) <= 1e-13 * max(1.0, np.max(np.abs(f.coeffs)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_round_trip_and_hermitian(seed, dim):
    f = band_limited(seed, n=32, dim=dim)
    back = F.TorusField.from_values(f.values(), f.L)
    assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-13 * max(1.0, np.max(np.abs(f.coeffs)))
    assert f.hermitian_defect() < 1e-13


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_nonlinearity_has_zero_mean(seed, dim):
    f = band_limited(seed, n=32, dim=dim)
    assert abs(F.nonlinearity(f).mean()) < 1e-13


# ---------------------------------------------------------------- line

def test_indicator_closed_form(table):
    f = G.make(G.parse_item("indicator"), 1.0)
    x = f.grid()
    for t in (1e-3, 0.1, 1.0):
        s = t ** 0.25
        got = s * F.line_semigroup_values(f, table, t, 1)
        exact = K.eval_kernel(table, (x + 1) / s) - K.eval_kernel(table, (x - 1) / s)
        assert np.max(np.abs(got - exact)) < 1e-12


def test_constant_and_linear(table):
    W = 4.0
    y = np.linspace(-W, W, 257)
    c = F.LineField(W, np.full_like(y, 2.5), F.EdgeExtension("constant", {"left": 2.5, "right": 2.5}))
    assert np.allclose(F.line_semigroup_values(c, table, 0.3, 0), 2.5, atol=1e-12)
    assert np.allclose(F.line_semigroup_values(c, table, 0.3, 1), 0.0, atol=1e-12)
    lin = G.make(G.parse_item("linear"), 1.0)
    for t in (0.01, 1.0):
        assert np.allclose(F.line_semigroup_values(lin, table, t, 1), 1.0, atol=1e-10)
        assert np.allclose(F.line_semigroup_values(lin, table, t, 0), lin.grid(), atol=1e-10)


def _quad_derivative(table, fn, x, t, m=1):
    s = t ** 0.25
    kern = lambda y: s ** (-1 - m) * K.eval_kernel(table, (x - y) / s, m) * fn(y)
    reach = 36 * s
    pts = sorted({x - reach, -1e-300, 0.0, x, x + reach})
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        if b > a:
            total += quad(kern, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return total


@pytest.mark.parametrize("item,fn", [
    ("power:0.5", lambda y: abs(y) ** 0.5),
    ("log", lambda y: math.log(abs(y)) if y != 0 else 0.0),
    ("bounded_uc:0.5", lambda y: math.copysign(min(abs(y), 1.0) ** 0.5, y)),
])
def test_line_semigroup_against_quadrature(table, item, fn):
    spec = G.parse_item(item)
    f = G.make(spec, 0.25)
    t = 0.25 ** 4
    for x0 in (0.3, -0.7, 2.0):
        got = F.line_semigroup_values(f, table, t, 1, x=np.array([x0]))[0]
        ref = _quad_derivative(table, fn, x0, t)
        # piecewise-linear data vs the exact function: second order in dx
        assert got == pytest.approx(ref, abs=5e-4 * max(1.0, abs(ref)))


def test_dense_and_pointwise_paths_agree(table):
    f = G.make(G.parse_item("bounded_uc:0.5"), 0.5)
    y = f.grid()
    for m in range(4):
        dense = F.line_semigroup_values(f, table, 0.02, m)
        point = F.line_semigroup_values(f, table, 0.02, m, x=y.copy())
        assert np.max(np.abs(dense - point)) < 1e-11


def test_window_too_small(table):
    f = G.make(G.parse_item("indicator"), 1.0)
    with pytest.raises(F.WindowTooSmallError):
        F.line_semigroup_values(f, table, 1e6, 0)


def test_edge_consistency_check():
    y = np.linspace(-2, 2, 9)
    bad = F.LineField(2.0, y.copy(), F.EdgeExtension("constant", {"left": 0.0, "right": 0.0}))
    with pytest.raises(F.FieldError):
        bad.validate()


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(1e-3, 1.0))
def test_line_semigroup_linear_in_data(a, b, t):
    tab = K.default_table(1)
    f = G.make(G.parse_item("indicator"), 1.0)
    # linear near the jump nodes, where samples are replaced by neighbour averages
    y = f.grid()
    g = F.LineField(f.W, np.clip(y, -3, 3) / 3, F.EdgeExtension("constant", {"left": -1.0, "right": 1.0}))
    combo = F.LineField(f.W, a * f.samples + b * g.samples,
                        F.EdgeExtension("constant", {"left": -b, "right": b}),
                        tuple((p, a * c) for p, c in f.jumps))
    lhs = F.line_semigroup_values(combo, tab, t, 1)
    rhs = a * F.line_semigroup_values(f, tab, t, 1) + b * F.line_semigroup_values(g, tab, t, 1)
    assert np.max(np.abs(lhs - rhs)) < 1e-11


# ------------------------------------------------------------ snapshots

def test_snapshot_round_trip(tmp_path):
    f = band_limited(2, n=64, dim=2)
    F.save_field(f, tmp_path / "torus", time=0.5)
    back = F.load_field(tmp_path / "torus")
    assert np.allclose(back.coeffs, f.coeffs, atol=1e-14)
    line = G.make(G.parse_item("power:0.5"), 1.0)
    F.save_field(line, tmp_path / "line")
    lb = F.load_field(tmp_path / "line")
    assert np.array_equal(lb.samples, line.samples) and lb.extension == line.extension
    raw = (tmp_path / "line.bin").read_bytes()
    assert len(raw) == 8 * line.m


def test_snapshot_size_mismatch(tmp_path):
    f = band_limited(2, n=64)
    F.save_field(f, tmp_path / "s")
    (tmp_path / "s.bin").write_bytes(b"\0" * 16)
    with pytest.raises(F.FieldError):
        F.load_field(tmp_path / "s")
