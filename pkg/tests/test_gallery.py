import math

import numpy as np
import pytest

from sgflow import gallery as G
from sgflow import norms as Nm


def report(text, table, **kw):
    return G.membership_report(G.parse_item(text), table=table, **kw)


def test_parse_item():
    assert G.parse_item("power:0.25").params == {"alpha": 0.25}
    assert G.parse_item("sine:0.01").params == {"A": 0.01, "k": 1.0}
    assert G.parse_item("hhalf:3,0.5").params == {"seed": 3, "eps": 0.5}
    assert G.parse_item("indicator").domain == "line"
    assert G.parse_item("sine").domain == "torus"
    for bad in ("blob", "power:-1", "bounded_uc:2", "step:1,2", "hhalf:0,0"):
        with pytest.raises(G.GalleryError):
            G.parse_item(bad)


def test_line_grid_scales_with_R():
    f1 = G.make(G.parse_item("indicator"), 1.0)
    f2 = G.make(G.parse_item("indicator"), 0.25)
    assert f1.dx == pytest.approx(1 / 64)
    assert f2.dx == pytest.approx(1 / 256)
    assert f1.W >= 1 + 16 and f2.W >= 1 + 4


def test_indicator_is_not_in_class(table, consts):
    r = report("indicator", table)
    assert r["classification"] == G.NOT_IN_Z
    # small-R limit is the jump size times g(0)
    assert r["small_R_limit"] == pytest.approx(consts.g0, rel=1e-4)
    assert min(v for _, v in r["profile"]) > 0.9 * consts.g0


def test_step_limit_is_scale_free(table, consts):
    r = report("step:0.1", table, R_list=(1.0, 0.25, 0.0625))
    for _, v in r["profile"]:
        assert v == pytest.approx(0.1 * consts.g0, rel=1e-5)


def test_power_in_class_with_growth(table):
    r = report("power:0.5", table)
    assert r["classification"] == G.IN_Z
    vals = [v for _, v in r["profile"]]
    # |x|^alpha scales as R^alpha
    assert vals[-1] / vals[0] == pytest.approx(2.0 ** (-8 * 0.5), rel=1e-3)
    growth = [v for _, v in r["growth"]]
    assert all(b > a for a, b in zip(growth, growth[1:]))
    assert growth[-1] / growth[0] == pytest.approx(8 ** 0.5, rel=1e-3)


def test_log_not_in_class(table):
    r = report("log", table, R_list=(1.0, 0.5, 0.25, 0.125))
    assert r["classification"] == G.NOT_IN_Z
    vals = [v for _, v in r["profile"]]
    assert max(vals) - min(vals) < 1e-3 * vals[0]


def test_log_central_cell_average():
    f = G.make(G.parse_item("log"), 1.0)
    dx = f.dx
    mid = f.m // 2
    assert f.grid()[mid] == 0.0
    assert f.samples[mid] == pytest.approx(math.log(dx / 2) - 1.0)


def test_hhalf_in_class(table):
    r = report("hhalf", table)
    assert r["classification"] == G.IN_Z


def test_hhalf_norm_formula():
    f = G.make(G.parse_item("hhalf:1,0.5"))
    kap = np.abs(f.ops.kappa[0])
    direct = math.sqrt(sum(kap[i] * abs(f.coeffs[i]) ** 2 for i in range(f.n)))
    assert G.hhalf_norm(f) == pytest.approx(direct, rel=1e-13)
    assert np.max(np.abs(f.coeffs - np.conj(np.roll(f.coeffs[::-1], 1)))) == 0.0
    # the same seed reproduces the field
    assert np.array_equal(f.coeffs, G.make(G.parse_item("hhalf:1,0.5")).coeffs)


def test_bounded_uc_below_bound(table):
    r = report("bounded_uc:0.5", table)
    assert r["classification"] == G.IN_Z
    for (R, v), (R2, bound) in zip(r["profile"], r["uc_bound"]):
        assert R == R2
        assert v <= bound


def test_thresholds():
    assert G.classify([(1.0, 1.0), (0.5, 0.5), (0.25, 0.05)])[0] == G.IN_Z
    assert G.classify([(1.0, 1.0), (0.5, 0.8), (0.25, 0.8)])[0] == G.NOT_IN_Z
    assert G.classify([(1.0, 1.0), (0.5, 0.6), (0.25, 0.3)])[0] == G.UNDECIDED
    assert G.classify([(1.0, 0.0), (0.5, 0.0)])[0] == G.UNDECIDED


def test_norm_ratios_bounds(table):
    rows = G.norm_ratios(("indicator", "sine:1,1", "linear"), table=table)
    for row in rows:
        assert row["B0"] >= row["B"] * (1 - 1e-12)
    assert rows[2]["BMO"] is None
    assert rows[0]["bmo_ratio"] <= 2.0
    assert G.measure_c1(rows) == pytest.approx(math.sqrt(2), rel=1e-3)


def test_torus_sine_values(table):
    one = Nm.b_norm(G.make(G.parse_item("sine:1,1")), 0.25, table).value
    two = Nm.b_norm(G.make(G.parse_item("sine:2,1")), 0.25, table).value
    assert two == pytest.approx(2 * one, rel=1e-12)
