"""Example initial data and a numerical classifier for vanishing ``B_R`` norms.

Whole-line items are discretised relative to the probe scale ``R``: the
grid step is ``R / points_per_R`` (rounded so that 0 and +-1 are nodes)
and the window covers the features plus ``window_factor * R``.  Because the
grid follows ``R``, scale-invariant data produce scale-invariant
discretisations and power laws are not polluted by a fixed grid.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as F
from .kernel import kernel_constants
from .norms import b_norm, z_profile

KINDS = ("indicator", "power", "log", "step", "sine", "linear", "hhalf", "bounded_uc")
LINE_KINDS = ("indicator", "power", "log", "step", "linear", "bounded_uc")
DEFAULT_R_LIST = tuple(2.0 ** -j for j in range(0, 9))

IN_Z, NOT_IN_Z, UNDECIDED = "IN_Z", "NOT_IN_Z", "UNDECIDED"


class GalleryError(ValueError):
    pass


@dataclass(frozen=True)
class GallerySpec:
    """One gallery item.

    Parameters by kind: ``power`` alpha; ``step`` a; ``sine`` A, k;
    ``linear`` c; ``hhalf`` seed, eps; ``bounded_uc`` beta (the function
    ``sign(x) min(|x|, 1)**beta``).  Torus items use ``n`` and ``L``.
    """
    kind: str
    params: dict = dc_field(default_factory=dict)
    n: int = 512
    L: float = 2 * math.pi
    points_per_R: int = 64
    window_factor: float = 16.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GalleryError(f"unknown gallery kind {self.kind!r}")
        p = self.params
        if self.kind == "power" and not p.get("alpha", 0) > 0:
            raise GalleryError("power needs alpha > 0")
        if self.kind == "hhalf" and not p.get("eps", 0) > 0:
            raise GalleryError("hhalf needs eps > 0")
        if self.kind == "bounded_uc" and not 0 < p.get("beta", 0) <= 1:
            raise GalleryError("bounded_uc needs 0 < beta <= 1")

    @property
    def domain(self):
        return "line" if self.kind in LINE_KINDS else "torus"


def parse_item(text):
    """``"power:0.5"``, ``"sine:0.01,1"``, ``"step:0.1"`` or a bare kind."""
    kind, _, rest = text.partition(":")
    vals = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    names = {"power": ["alpha"], "step": ["a"], "sine": ["A", "k"], "linear": ["c"],
             "hhalf": ["seed", "eps"], "bounded_uc": ["beta"]}
    defaults = {"power": [0.5], "step": [1.0], "sine": [1.0, 1.0], "linear": [1.0],
                "hhalf": [0, 0.25], "bounded_uc": [0.5]}
    keys = names.get(kind, [])
    if len(vals) > len(keys):
        raise GalleryError(f"too many parameters for {kind!r}")
    merged = list(defaults.get(kind, []))
    merged[:len(vals)] = vals
    params = dict(zip(keys, merged))
    if "seed" in params:
        params["seed"] = int(params["seed"])
    return GallerySpec(kind, params)


def _line_grid(spec, R, feature):
    dx = 1.0 / math.ceil(spec.points_per_R / R)
    W0 = max(feature, 0.0) + spec.window_factor * R if feature > 0 else spec.window_factor * R
    W = dx * math.ceil(W0 / dx)
    m = int(round(2 * W / dx)) + 1
    return W, np.linspace(-W, W, m), dx


def _hhalf_coeffs(spec):
    n, L = spec.n, spec.L
    ops = F.TorusOps.get(1, n, L)
    k = ops.k[0]
    rng = np.random.Generator(np.random.Philox(key=int(spec.params["seed"])))
    zeta = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    kap = np.abs(ops.kappa[0])
    live = (np.abs(k) > 0) & (np.abs(k) <= n / 3)
    amp = np.where(live, np.where(kap > 0, kap, 1.0) ** (-1.0 - spec.params["eps"]), 0.0)
    c = zeta * amp
    # enforce c_{-k} = conj(c_k)
    partner = np.conj(np.roll(c[::-1], 1))
    return np.where(k >= 0, c, partner)


def hhalf_norm(f):
    """``(sum_k |kappa| |c_k|^2)^(1/2)`` for a one-dimensional torus field."""
    return float(math.sqrt(np.sum(np.abs(f.ops.kappa[0]) * np.abs(f.coeffs) ** 2)))


def make(spec, R=1.0):
    """Build the field for ``spec``; line items are discretised for scale ``R``."""
    kind, p = spec.kind, spec.params
    if kind == "sine":
        A, k = p.get("A", 1.0), p.get("k", 1.0)
        return F.TorusField.from_function(lambda x: A * np.sin(k * x), spec.n, spec.L)
    if kind == "hhalf":
        return F.TorusField(1, spec.n, float(spec.L), _hhalf_coeffs(spec))
    const = lambda l, r: F.EdgeExtension("constant", {"left": l, "right": r})
    if kind == "indicator":
        W, y, dx = _line_grid(spec, R, 1.0)
        vals = ((y >= -1) & (y <= 1)).astype(float)
        return F.LineField(W, vals, const(0.0, 0.0), ((-1.0, 1.0), (1.0, -1.0))).validate()
    if kind == "step":
        a = p.get("a", 1.0)
        W, y, dx = _line_grid(spec, R, 0.0)
        return F.LineField(W, 0.5 * a * np.sign(y), const(-0.5 * a, 0.5 * a), ((0.0, a),)).validate()
    if kind == "bounded_uc":
        beta = p["beta"]
        W, y, dx = _line_grid(spec, R, 1.0)
        vals = np.sign(y) * np.minimum(np.abs(y), 1.0) ** beta
        return F.LineField(W, vals, const(-1.0, 1.0)).validate()
    if kind == "linear":
        c = p.get("c", 1.0)
        W, y, dx = _line_grid(spec, R, 0.0)
        ext = F.EdgeExtension("power", {"alpha": 1.0, "c_left": -c, "c_right": c})
        return F.LineField(W, c * y, ext).validate()
    if kind == "power":
        alpha = p["alpha"]
        W, y, dx = _line_grid(spec, R, 0.0)
        ext = F.EdgeExtension("power", {"alpha": alpha, "c_left": 1.0, "c_right": 1.0})
        return F.LineField(W, np.abs(y) ** alpha, ext).validate()
    if kind == "log":
        W, y, dx = _line_grid(spec, R, 0.0)
        safe = np.where(y == 0, 1.0, np.abs(y))
        # exact average of log|x| over the central cell [-dx/2, dx/2]
        vals = np.where(y == 0, math.log(dx / 2) - 1.0, np.log(safe))
        ext = F.EdgeExtension("log", {"coef": 1.0, "offset": 0.0})
        return F.LineField(W, vals, ext).validate()
    raise GalleryError(f"no constructor for {kind!r}")


def factory(spec):
    """``R -> field`` for use with :func:`sgflow.norms.z_profile`."""
    return lambda R: make(spec, R)


def classify(profile):
    """IN_Z / NOT_IN_Z / UNDECIDED from a profile ordered by decreasing R.

    IN_Z: the value at the smallest R is below 10% of the value at the
    largest R.  NOT_IN_Z: it is at least 50% of that value and the last
    log-log slope is below 0.05 (the profile has levelled off).
    """
    Rs = np.array([r for r, _ in profile])
    vals = np.array([v for _, v in profile])
    first, last = vals[0], vals[-1]
    if first <= 0:
        return UNDECIDED, math.nan
    if last < 0.1 * first:
        return IN_Z, math.nan
    slope = math.nan
    if vals[-2] > 0 and last > 0:
        slope = math.log(vals[-2] / last) / math.log(Rs[-2] / Rs[-1])
    if last >= 0.5 * first and abs(slope) < 0.05:
        return NOT_IN_Z, slope
    return UNDECIDED, slope


def membership_report(spec, R_list=DEFAULT_R_LIST, table=None, growth_R=(1.0, 2.0, 4.0, 8.0)):
    """Classify ``spec`` against the class of data with vanishing ``B_R`` norm."""
    profile = z_profile(factory(spec), R_list, table)
    label, slope = classify(profile)
    report = {"kind": spec.kind, "params": dict(spec.params), "domain": spec.domain,
              "classification": label, "profile": [[r, v] for r, v in profile],
              "small_R_limit": profile[-1][1], "final_log_slope": slope,
              "thresholds": {"in_z_fraction": 0.1, "not_in_z_fraction": 0.5,
                             "flat_slope": 0.05}}
    if spec.kind == "power":
        report["growth"] = [[R, b_norm(make(spec, R), R, table).value] for R in growth_R]
    if spec.kind == "bounded_uc":
        report["uc_bound"] = [[R, bounded_uc_bound(spec, R, table)] for R, _ in profile]
    return report


def bounded_uc_bound(spec, R, table, n_delta=200):
    """Right side ``min_delta 2||k||_inf int_{|z|>=delta/R} |g'| + omega(delta) ||g'||_L1``.

    ``omega(delta) = 2**(1-beta) delta**beta`` is the modulus of continuity
    of ``sign(x) min(|x|, 1)**beta``; ``||k||_inf = 1``.
    """
    beta = spec.params["beta"]
    z = table.z
    dz = table.dz
    g1 = np.abs(table.samples[1])
    # tail[i] = int_{|z| >= z_i} |g'| for z_i >= 0
    half = g1[z >= 0]
    tail_one = np.concatenate([np.cumsum((0.5 * (half[1:] + half[:-1]) * dz)[::-1])[::-1], [0.0]])
    tails = 2 * tail_one
    l1 = kernel_constants(table).l1_grad_g
    zpos = z[z >= 0]
    best = math.inf
    for delta in R * np.geomspace(1e-3, table.z_max, n_delta):
        tail = np.interp(delta / R, zpos, tails)
        best = min(best, 2 * tail + 2 ** (1 - beta) * delta ** beta * l1)
    return float(best)


RATIO_ITEMS = ("indicator", "power:0.5", "log", "step:0.1", "sine:1,1", "linear",
               "hhalf", "bounded_uc:0.5")
BOUNDED_KINDS = ("indicator", "step", "sine", "hhalf", "bounded_uc")


def norm_ratios(items=RATIO_ITEMS, R=1.0, table=None):
    """``B``, ``B0`` and BMO-Carleson values at scale ``R`` for each item.

    Returns one dict per item with the ratios ``B0/B`` and ``B0/BMO``; the
    BMO entries are only filled for bounded kinds.
    """
    from .norms import bmo_carleson
    rows = []
    for text in items:
        spec = parse_item(text)
        f = make(spec, R)
        b = b_norm(f, R, table).value
        b0 = b_norm(f, R, table, flavor="X0").value
        row = {"item": text, "B": b, "B0": b0, "ratio": b0 / b if b > 0 else math.nan,
               "bounded": spec.kind in BOUNDED_KINDS, "BMO": None, "bmo_ratio": None}
        if row["bounded"]:
            bmo = bmo_carleson(f, table, R).value
            row["BMO"] = bmo
            row["bmo_ratio"] = b0 / bmo if bmo > 0 else math.nan
        rows.append(row)
    return rows


def measure_c1(rows):
    """Smallest ``B0/B`` ratio over a :func:`norm_ratios` table."""
    return float(min(r["ratio"] for r in rows if math.isfinite(r["ratio"])))
