"""Acceptance suite: fifteen end-to-end checks with runtime budgets.

Each check returns ``(passed, details)``; :func:`run_all` times it, adds the
runtime budget to the verdict and prints one line per check.
"""
import math
import sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as F
from . import gallery as G
from . import kernel as K
from . import norms as N
from . import solver as S
from . import stochastic as St
from .trajectory import caloric_extension, graded_grid


@dataclass
class Outcome:
    number: int
    name: str
    passed: bool
    seconds: float
    budget: float
    details: dict = dc_field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name} ({self.seconds:.1f} s / {self.budget:.0f} s)"


_CACHE = {}


def _table():
    return K.default_table(1)


def _ratio_rows():
    if "ratios" not in _CACHE:
        _CACHE["ratios"] = G.norm_ratios(table=_table())
    return _CACHE["ratios"]


def _loglog_slope(R, v):
    return float(np.polyfit(np.log(R), np.log(v), 1)[0])


def check_kernel_anchor():
    table = K.build_kernel(1)
    g0 = float(K.eval_kernel(table, 0.0))
    exact = math.gamma(1.25) / math.pi
    mass = float(np.trapezoid(table.samples[0], table.z))
    ok = abs(g0 - exact) < 1e-8 and abs(mass - 1.0) < 1e-10
    return ok, {"g0": g0, "gamma_value": exact, "mass": mass}


def check_semigroup_exactness():
    rng = np.random.default_rng(20240611)
    n, L = 256, 2 * math.pi
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, n // 3))
        kap4 = (2 * math.pi * k / L) ** 4
        # keep exp(-t kappa^4) far from underflow so the relative error is meaningful
        t = float(10 ** rng.uniform(-4, 0)) * 30.0 / kap4
        f = F.TorusField.from_function(lambda x: np.cos(k * x), n, L)
        g = F.semigroup_apply(f, t)
        expect = math.exp(-t * kap4)
        err = abs(g.coeffs[k] / f.coeffs[k] - expect) / expect
        worst = err if not err <= worst else worst
    return bool(worst < 1e-12), {"max_relative_error": float(worst)}


def check_mass_conservation():
    h0 = F.TorusField.from_function(lambda x: 1.0 + 0.1 * np.sin(x) + 0.05 * np.cos(3 * x),
                                    512, 2 * math.pi)
    m0 = h0.mean()
    pic = S.picard_solve(h0, 1.0, tol=1e-12)
    orc = S.reference_solve(h0, 1.0, 500, check=False)
    drift = {name: max(abs(f.mean() - m0) / abs(m0) for f in tr.fields)
             for name, tr in (("picard", pic), ("oracle", orc))}
    return max(drift.values()) < 1e-9, drift


def check_scaling():
    fn = lambda x: 0.05 * np.sin(x) + 0.03 * np.cos(2 * x)
    lam = 2.0
    h0 = F.TorusField.from_function(fn, 256, 2 * math.pi)
    hs = F.TorusField.from_function(lambda x: fn(lam * x), 512, 2 * math.pi)
    base = S.picard_solve(h0, 1.0, tol=1e-13)
    scaled = S.picard_solve(hs, 1.0 / lam, tol=1e-13)
    if not np.allclose(base.t_grid / lam ** 4, scaled.t_grid, rtol=1e-14):
        return False, {"reason": "time grids do not correspond"}
    x = np.ravel(hs.grid())
    gap = max(float(np.max(np.abs(S.eval_fourier(a, lam * x) - b.values())))
              for a, b in zip(base.fields, scaled.fields))
    return gap < 1e-6, {"max_discrepancy": gap, "lambda": lam}


def check_picard_oracle():
    h0 = F.TorusField.from_function(lambda x: 0.01 * np.sin(x), 512, 2 * math.pi)
    pic = S.picard_solve(h0, 1.0, tol=1e-12)
    orc = S.reference_solve(h0, 1.0, 1000)
    info = pic.provenance["picard"]
    d = info["deltas"]
    ratios = [b / a for a, b in zip(d, d[1:])]
    gap = float(np.max(np.abs(pic.fields[-1].values() - orc.fields[-1].values())))
    c1 = G.measure_c1(_ratio_rows())
    cert = S.smallness_certificate(h0, 1.0, c1, _table())
    ok = gap < 1e-6 and info["iterations"] <= 15 and all(r < 1 for r in ratios[1:])
    return ok, {"sup_gap": gap, "iterations": info["iterations"], "ratios": ratios,
                "certificate": {"c1": c1, "delta": cert.delta, "b0": cert.b_norm_h0,
                                "satisfied": cert.satisfied}}


def check_mild_residual():
    tol = 1e-12
    h0 = F.TorusField.from_function(lambda x: 0.02 * np.sin(x) + 0.01 * np.cos(2 * x),
                                    256, 2 * math.pi)
    tr = S.picard_solve(h0, 1.0, tol=tol)
    res = S.mild_residual(tr)
    return res < 10 * tol, {"residual": res, "tol": tol}


def check_weak_form():
    tests = [S.BumpTest(0.5, 0.45, math.pi, 2.5), S.BumpTest(0.55, 0.35, 2.5, 1.8)]
    res = []
    for n, steps in ((512, 400), (1024, 800)):
        h0 = F.TorusField.from_function(lambda x: 0.3 * (np.sin(x) + 0.5 * np.cos(2 * x)),
                                        n, 2 * math.pi)
        tr = S.reference_solve(h0, 1.0, steps, check=False)
        res.append([S.weak_residual(tr, t) for t in tests])
    coarse, fine = res
    ratios = [c / f for c, f in zip(coarse, fine)]
    ok = all(v < 1e-5 for v in coarse + fine) and all(r >= 4 for r in ratios)
    return ok, {"coarse": coarse, "fine": fine, "ratios": ratios}


def check_indicator():
    table = _table()
    g0 = K.kernel_constants(table).g0
    prof = N.z_profile(G.factory(G.parse_item("indicator")), G.DEFAULT_R_LIST, table)
    vals = [v for _, v in prof]
    gaps = [abs(v - g0) for v in vals]
    above = all(v >= 0.9 * g0 for v in vals)
    # nested sup sets: the profile settles on g(0) and never moves away from it
    settling = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(gaps, gaps[1:]))
    near = gaps[-1] < 0.01 * g0
    return above and settling and near, {"profile": prof, "g0": g0}


def check_power_law():
    table = _table()
    Rs = [2.0 ** -j for j in range(1, 7)]
    slopes = {}
    for alpha in (0.25, 0.5, 1.0):
        prof = N.z_profile(G.factory(G.parse_item(f"power:{alpha}")), Rs, table)
        slopes[alpha] = _loglog_slope([r for r, _ in prof], [v for _, v in prof])
    return all(abs(s - a) < 0.02 for a, s in slopes.items()), {"slopes": slopes}


def check_log_flat():
    Rs = [10.0, 3.0, 1.0, 0.3, 0.1]
    prof = N.z_profile(G.factory(G.parse_item("log")), Rs, _table())
    vals = [v for _, v in prof]
    spread = (max(vals) - min(vals)) / min(vals)
    return spread < 0.01, {"profile": prof, "relative_spread": spread}


def check_norm_equivalence():
    rows = G.norm_ratios(table=_table())
    _CACHE["ratios"] = rows
    ratios = [r["ratio"] for r in rows]
    bmo = [r["bmo_ratio"] for r in rows if r["bounded"]]
    c3 = 2.0
    spread = max(ratios) / min(ratios)
    ok = spread < 20 and all(v <= c3 for v in bmo)
    return ok, {"interval": [min(ratios), max(ratios)], "spread": spread, "c3": c3,
                "max_bmo_ratio": max(bmo), "rows": rows}


def check_self_similar():
    table = _table()
    a = 0.1
    h0 = S.square_wave(a, 4096, 64.0)
    tr = S.picard_solve(h0, 0.16 ** 0.25, tol=1e-10, J=64)
    col = S.self_similar_check(tr, [(0.01, 0.16)])
    g0 = K.kernel_constants(table).g0
    step = G.parse_item(f"step:{a}")
    prof = [(R, N.b_norm(G.make(step, R), R, table).value) for R in (1.0, 0.5, 0.25, 0.125)]
    rel = max(abs(v / (a * g0) - 1) for _, v in prof)
    ok = col.collapse_error < 1e-3 and rel < 0.01
    return ok, {"collapse_error": col.collapse_error, "profile_residual": col.profile_residual,
                "step_profile": prof, "max_relative_deviation": rel}


def check_ou_statistics():
    spec = St.power_law_noise(1, 32, 2 * math.pi, 1.0, 0.0, 5)
    tg = np.array([0.01, 0.1, 1.0])
    modes = [1, 2, 3, 4, 5]
    M = 2000
    Z = np.array([St.ou_coefficients(spec.with_stream(stream_id=p), tg)[:, modes]
                  for p in range(M)])
    worst = 0.0
    for a, t in enumerate(tg):
        for b, k in enumerate(modes):
            v = np.abs(Z[:, a, b]) ** 2
            expect = St.ou_variance(spec.sigma[k], spec.ops.k4[k], t)
            worst = max(worst, abs(v.mean() - expect) / (v.std(ddof=1) / math.sqrt(M)))
    Rs = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
    noise = St.power_law_noise(1, 64, 2 * math.pi, 0.01, 0.0, 8)
    profiles = []
    decreasing = True
    for seed in range(5):
        prof = St.z_regularity_profile(noise.with_stream(seed=seed), Rs)
        vals = [v for _, v in prof]
        decreasing &= all(b <= a for a, b in zip(vals, vals[1:])) and vals[-1] < 0.2 * vals[0]
        profiles.append(prof)
    return worst < 3 and decreasing, {"max_standard_errors": worst, "profiles": profiles}


def check_stochastic_consistency():
    spec = St.power_law_noise(1, 64, 2 * math.pi, 0.01, 0.0, 8)
    h0 = F.TorusField.from_function(lambda x: 0.01 * np.sin(x), 64, 2 * math.pi)
    gaps = []
    for p in range(10):
        sp = spec.with_stream(seed=7, stream_id=p)
        a = St.spde_solve(h0, sp, 1.0, "mild_direct")
        b = St.spde_solve(h0, sp, 1.0, "random_pde")
        gaps.append(max(float(np.max(np.abs(x.values() - y.values())))
                        for x, y in zip(a.fields, b.fields)))
    return max(gaps) < 1e-5, {"per_path": gaps}


def check_smoothness():
    table = _table()
    kc = K.kernel_constants(table)
    R = 0.01 ** 0.25
    norms = {}
    for n in (2048, 4096):
        tr = S.picard_solve(S.square_wave(0.1, n, 64.0), R, tol=1e-12, J=64)
        norms[n] = [N.higher_norm(tr, m, R).value for m in (1, 2, 3)]
    stable = all(math.isfinite(b) and abs(b - a) <= 0.01 * abs(b)
                 for a, b in zip(norms[2048], norms[4096]))
    h0 = S.square_wave(0.1, 4096, 64.0)
    lin = caloric_extension(h0, graded_grid(R ** 4, 64))
    b0 = N.b_norm(G.make(G.parse_item("step:0.1"), R), R, table, flavor="X0").value
    bound_rows = []
    for m in (1, 2, 3):
        lhs = N.higher_norm(lin, m, R).value
        rhs = m * (m + 1) ** ((m + 1) / 4) * kc.l1_grad_g ** m * b0
        bound_rows.append({"m": m, "norm": lhs, "bound": rhs})
    bounded = all(r["norm"] <= r["bound"] for r in bound_rows)
    return stable and bounded, {"nonlinear_norms": norms, "linear_bound": bound_rows}


CRITERIA = [
    (1, "kernel anchor", 5, check_kernel_anchor),
    (2, "semigroup exactness", 1, check_semigroup_exactness),
    (3, "mass conservation", 30, check_mass_conservation),
    (4, "scaling invariance", 60, check_scaling),
    (5, "picard vs oracle", 60, check_picard_oracle),
    (6, "mild residual", 60, check_mild_residual),
    (7, "weak form", 120, check_weak_form),
    (8, "indicator non-membership", 30, check_indicator),
    (9, "power-law scaling", 60, check_power_law),
    (10, "log flatness", 30, check_log_flat),
    (11, "norm equivalence", 120, check_norm_equivalence),
    (12, "self-similar collapse", 120, check_self_similar),
    (13, "OU statistics", 180, check_ou_statistics),
    (14, "stochastic consistency", 180, check_stochastic_consistency),
    (15, "smoothness proxy", 120, check_smoothness),
]


def run_one(number):
    num, name, budget, fn = CRITERIA[number - 1]
    _table()  # table construction is shared, not charged to a single check
    t0 = time.perf_counter()
    try:
        ok, details = fn()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
    dt = time.perf_counter() - t0
    details["within_budget"] = dt < budget
    return Outcome(num, name, bool(ok) and dt < budget, dt, budget, details)


def run_all(numbers=None, stream=sys.stdout):
    numbers = numbers or [c[0] for c in CRITERIA]
    out = []
    for k in numbers:
        res = run_one(k)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
        out.append(res)
    return out
