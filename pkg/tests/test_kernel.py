import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgflow import kernel as K

# g^(m)(z) from 30-digit mpmath quadrature of (1/pi) int_0^inf xi^m exp(-xi^4) trig(xi z)
MP_VALUES = {
    0.0: (0.28851686930823484, 0.0, -0.097515562772351693, 0.0),
    1.0: (0.24266509456410372, -0.086085957305421606, -0.06437621026812509, 0.06066627364102593),
    2.5: (0.079478597791707336, -0.10578474823691636, 0.035071404887849548, 0.049674123619817085),
    10.0: (-0.00042879435390473928, -0.00080736287060555259, 0.0019301778507424087,
           -0.0010719858847618482),
}
MP_PARSEVAL = 0.24261280114151914  # (1/pi) int_0^inf exp(-2 xi^4)
MP_BETA = 5.2441151085842396


def test_g0_matches_gamma(table):
    assert abs(K.eval_kernel(table, 0.0) - math.gamma(1.25) / math.pi) < 1e-12


@pytest.mark.parametrize("z", sorted(MP_VALUES))
@pytest.mark.parametrize("m", range(4))
def test_table_matches_mpmath(table, z, m):
    assert K.eval_kernel(table, z, m) == pytest.approx(MP_VALUES[z][m], abs=1e-13)


def test_g10_is_not_tiny(table):
    # the true value is about -4.29e-4, so a bound like |g(10)| < 1e-8 cannot hold
    assert K.eval_kernel(table, 10.0) == pytest.approx(-4.2879435390473928e-4, rel=1e-10)


def test_table_invariants(table):
    assert K.check_table(table) == []
    g = table.samples[0]
    assert np.max(np.abs(g - g[::-1])) <= table.quad_tol
    assert abs(np.trapezoid(g, dx=table.dz) - 1) < 10 * table.quad_tol
    assert abs(np.trapezoid(table.samples[1], dx=table.dz)) < 10 * table.quad_tol
    assert np.argmax(g) == len(g) // 2
    assert abs(g[0]) < 1e-12 and abs(g[-1]) < 1e-12


def test_parseval(table):
    val = np.trapezoid(table.samples[0] ** 2, dx=table.dz)
    assert abs(val - MP_PARSEVAL) < 10 * table.quad_tol


def test_constants(table, consts):
    c = consts
    assert c.linf_g == c.g0
    assert c.c4 == c.beta_half_quarter * c.w31_g
    assert c.l1_g >= 1
    assert all(v > 0 for v in (c.g0, c.l1_g, c.linf_g, c.l1_grad_g, c.w31_g, c.c4))
    assert c.beta_half_quarter == pytest.approx(MP_BETA, rel=1e-14)
    # independent route: Beta integral by substitution s = sin^2, no singularity left
    from scipy.integrate import quad
    val, _ = quad(lambda th: 2 * math.sin(th) ** 0 * math.cos(th) ** -0.5, 0, math.pi / 2)
    assert val == pytest.approx(MP_BETA, rel=1e-9)
    # g changes sign away from 0, so the total variation exceeds 2 g(0)
    assert c.l1_grad_g > 2 * c.g0


def test_l1_grad_sign_structure(table, consts):
    # |g'| integrates to the total variation of g; sample it from the table directly
    tv = np.sum(np.abs(np.diff(table.samples[0])))
    assert consts.l1_grad_g == pytest.approx(tv, rel=1e-6)


def test_eval_truncation_and_orders(table):
    assert K.eval_kernel(table, 0.0, 1) == 0.0
    assert K.eval_kernel(table, table.z_max + 1.0) == 0.0
    with pytest.raises(K.UnsupportedOrderError):
        K.eval_kernel(table, 0.0, 4)


def test_semigroup_consistency(table):
    # G(t, .) * G(s, .) = G(t + s, .)
    G = lambda t, x: t ** -0.25 * K.eval_kernel(table, x * t ** -0.25)
    y = np.linspace(-30, 30, 24001)
    for t, s, x, w in [(0.3, 0.7, 0.4, -0.2), (1.0, 2.0, 1.5, 0.0), (0.05, 0.2, 0.0, 0.3)]:
        lhs = np.trapezoid(G(t, x - y) * G(s, y - w), y)
        assert lhs == pytest.approx(G(t + s, x - w), abs=1e-9)


def test_antiderivatives(table):
    z = np.linspace(-40, 40, 81)
    G1 = K.eval_antiderivative(table, z, 1)
    assert G1[0] == 0.0 and G1[-1] == 1.0
    assert K.eval_antiderivative(table, 0.0, 1) == pytest.approx(0.5, abs=1e-14)
    h = 1e-4
    zz = np.array([-3.0, -0.5, 0.7, 2.0])
    fd1 = (K.eval_antiderivative(table, zz + h, 1) - K.eval_antiderivative(table, zz - h, 1)) / (2 * h)
    assert np.allclose(fd1, K.eval_kernel(table, zz), atol=1e-8)
    fd = (K.eval_antiderivative(table, zz + h, 2) - K.eval_antiderivative(table, zz - h, 2)) / (2 * h)
    assert np.allclose(fd, K.eval_antiderivative(table, zz, 1), atol=1e-8)


def test_interp_error_bound(table):
    zs = np.linspace(0.001, 8, 997)
    for m in range(4):
        truth = np.array([K.eval_kernel(table, z, m) for z in MP_VALUES])
        ref = np.array([MP_VALUES[z][m] for z in MP_VALUES])
        assert np.max(np.abs(truth - ref)) <= table.interp_error_bound(m) + 1e-13
    assert table.interp_error_bound(0) < 1e-10
    assert np.all(np.isfinite(K.eval_kernel(table, zs, 3)))


def test_cache_round_trip(table, tmp_path):
    K.save_table(table, tmp_path / "tab")
    back = K.load_table(tmp_path / "tab")
    assert back.dim == table.dim and back.dz == table.dz and back.z_max == table.z_max
    assert np.array_equal(back.samples, table.samples)
    for order in table.extra:
        assert np.array_equal(back.column(order), table.column(order))
    raw = (tmp_path / "tab.bin").read_bytes()
    assert len(raw) == 8 * len(table.z) * (4 + len(table.extra))


def test_corrupt_cache_rejected(table, tmp_path):
    K.save_table(table, tmp_path / "tab")
    data = np.frombuffer((tmp_path / "tab.bin").read_bytes(), dtype="<f8").copy()
    orders = sorted(set(range(4)) | set(table.extra))
    data[orders.index(0) * len(table.z)] = 1e-3  # breaks decay of g at -z_max
    (tmp_path / "tab.bin").write_bytes(data.tobytes())
    with pytest.raises(K.KernelError):
        K.load_table(tmp_path / "tab")


def test_bad_parameters():
    with pytest.raises(K.KernelError):
        K.build_kernel(1, z_max=-1.0)
    with pytest.raises(K.KernelError):
        K.build_kernel(3)


def test_short_table_fails_decay():
    with pytest.raises(K.KernelError):
        K.build_kernel(1, z_max=16.0)


def test_two_dimensional_table():
    tab = K.default_table(2)
    c = K.kernel_constants(tab)
    assert c.g0 == pytest.approx(1 / (8 * math.sqrt(math.pi)), abs=1e-10)
    assert K.check_table(tab) == []
    # radial evaluation accepts Cartesian points
    assert K.eval_kernel(tab, np.array([[0.6, 0.8]]))[0] == pytest.approx(K.eval_kernel(tab, 1.0))
    assert c.c4 == c.beta_half_quarter * c.w31_g


@settings(max_examples=60, deadline=None)
@given(st.floats(-35.0, 35.0), st.integers(0, 3))
def test_parity(z, m):
    tab = K.default_table(1)
    a, b = K.eval_kernel(tab, z, m), K.eval_kernel(tab, -z, m)
    assert a == pytest.approx((-1) ** m * b, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 30.0))
def test_max_at_origin(z):
    tab = K.default_table(1)
    assert K.eval_kernel(tab, z) <= K.eval_kernel(tab, 0.0)
