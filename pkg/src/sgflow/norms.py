"""Sup-scan estimators for the scaling-critical norms.

Every estimator returns a :class:`NormReport` carrying the grids it scanned,
so each value is a reproducible lower bound for the continuous supremum
(up to the quadrature error of the inner integrals).

Conventions used throughout:

* local norms take ``t <= R**4``;
* ``X0`` and the BMO Carleson norm are reported as square roots of the
  supremum of the box averages;
* time integrals use the trapezoid rule on the stored time levels, with
  the piece ``[0, t_0]`` below the first level estimated as ``t_0 F(t_0)``.
"""
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from . import _backend
from . import field as F
from .trajectory import Trajectory, caloric_extension, geometric_grid

NORM_NAMES = ("X", "X_R", "X0", "X0_R", "B", "B_R", "BMO_CARLESON", "X_R_M")
CSV_HEADER = ("norm_name", "R", "m", "value", "argmax_t", "argmax_x", "argmax_r")


class NormError(ValueError):
    pass


@dataclass
class NormReport:
    norm_name: str
    value: float
    R: float
    m: int = 0
    scan_grid: dict = dc_field(default_factory=dict)
    argmax: dict = dc_field(default_factory=dict)
    flavor: str = ""

    def __post_init__(self):
        if self.norm_name not in NORM_NAMES:
            raise NormError(f"unknown norm {self.norm_name!r}")
        if not self.value >= 0:
            raise NormError("norm values are nonnegative")

    def to_json(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v
        return conv(asdict(self))

    def csv_row(self):
        a = self.argmax
        return [self.norm_name, _fmt(self.R), self.m, _fmt(self.value),
                _fmt(a.get("t")), _fmt(a.get("x")), _fmt(a.get("r"))]


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def reports_to_json(reports):
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True)


# ------------------------------------------------------------------- helpers

def _select_times(traj, R):
    if len(traj) == 0:
        raise NormError("empty trajectory")
    upper = math.inf if math.isinf(R) else R ** 4
    idx = np.flatnonzero(traj.t_grid <= upper * (1 + 1e-12))
    if idx.size == 0:
        raise NormError(f"trajectory has no time level at or below R**4 = {upper:g}")
    return idx


def _point(traj, flat_index):
    grid = traj.space_grid()
    if traj.dim == 1:
        return float(grid[flat_index])
    i, j = np.unravel_index(flat_index, (grid.size, grid.size))
    return (float(grid[i]), float(grid[j]))


def _grid_record(traj):
    grid = traj.space_grid()
    return {"x_min": float(grid[0]), "dx": float(grid[1] - grid[0]), "x_count": int(grid.size),
            "dim": traj.dim}


def x_norm(traj, R=math.inf):
    """``sup_{t <= R^4} t^(1/4) max_x |grad h(t, x)|`` over the stored levels."""
    idx = _select_times(traj, R)
    best, arg = -1.0, None
    for i in idx:
        g = traj.gradient_values(i)
        mag = np.sqrt(np.sum(g ** 2, axis=0)).ravel()
        j = int(np.argmax(mag))
        v = traj.t_grid[i] ** 0.25 * mag[j]
        if v > best:
            best, arg = v, {"t": float(traj.t_grid[i]), "x": _point(traj, j)}
    name = "X" if math.isinf(R) else "X_R"
    grid = {"t": traj.t_grid[idx], **_grid_record(traj)}
    return NormReport(name, float(best), R, 0, grid, arg)


def trapezoid_weights(t_grid, upper):
    """Weights ``w`` with ``sum w_l F(t_l) ~ int_0^upper F dt``.

    Trapezoid on the levels below ``upper`` with a linearly interpolated
    last partial panel, and ``t_0 F(t_0)`` for ``[0, t_0]``.
    """
    t = np.asarray(t_grid, dtype=np.float64)
    w = np.zeros(t.size)
    if upper <= 0:
        return w
    if upper <= t[0]:
        w[0] = upper
        return w
    w[0] = t[0]
    for l in range(t.size - 1):
        a, b = t[l], t[l + 1]
        if a >= upper:
            break
        if b <= upper:
            w[l] += 0.5 * (b - a)
            w[l + 1] += 0.5 * (b - a)
        else:
            # F(upper) = (1-th) F_a + th F_b
            h = upper - a
            th = h / (b - a)
            w[l] += 0.5 * h * (2 - th)
            w[l + 1] += 0.5 * h * th
    return w


def _weights_matrix(t_grid, radii, power_time, density=None):
    """Rows of time weights for each radius: ``int_0^{r^4} density(t) F dt``."""
    out = np.zeros((len(radii), len(t_grid)))
    for a, r in enumerate(radii):
        w = trapezoid_weights(t_grid, r ** power_time)
        if density is not None:
            w = w * density(np.asarray(t_grid))
        out[a] = w
    return out


def _box_scan(traj, radii, centers, weights, power):
    """``r^-power * sum_l w[a, l] int_{B_r(x)} |grad h(t_l)|^2`` on (radii, centers)."""
    d = traj.dim
    levels = np.flatnonzero(np.any(weights != 0, axis=0))
    if traj.is_torus and d == 1:
        grid = traj.space_grid()
        L = traj.fields[0].L
        n = grid.size
        dx = L / n
        ext = np.concatenate([grid - L, grid, grid + L, [2 * L]])
        cum = np.zeros((levels.size, ext.size))
        for q, l in enumerate(levels):
            e = np.sum(traj.gradient_values(l) ** 2, axis=0)
            e3 = np.concatenate([e, e, e, e[:1]])
            cum[q, 1:] = np.cumsum(0.5 * (e3[1:] + e3[:-1]) * dx)
        return _backend.ball_scan_1d(cum, float(ext[0]), dx, np.ascontiguousarray(weights[:, levels]),
                                     np.asarray(radii, float), np.asarray(centers, float), float(power))
    if not traj.is_torus:
        grid = traj.space_grid()
        dx = float(grid[1] - grid[0])
        cum = np.zeros((levels.size, grid.size))
        for q, l in enumerate(levels):
            e = traj.gradient_values(l)[0] ** 2
            cum[q, 1:] = np.cumsum(0.5 * (e[1:] + e[:-1]) * dx)
        return _backend.ball_scan_1d(cum, float(grid[0]), dx, np.ascontiguousarray(weights[:, levels]),
                                     np.asarray(radii, float), np.asarray(centers, float), float(power))
    # d = 2 on the torus: ball sums by FFT convolution with a cell-centre mask
    f0 = traj.fields[0]
    n, L = f0.n, f0.L
    dx = L / n
    off = np.fft.fftfreq(n, 1.0 / n) * dx
    OX, OY = np.meshgrid(off, off, indexing="ij")
    dist = np.hypot(OX, OY)
    energies = {l: np.sum(traj.gradient_values(l) ** 2, axis=0) for l in levels}
    out = np.empty((len(radii), len(centers)))
    ci = np.asarray(centers, dtype=np.int64)
    for a, r in enumerate(radii):
        acc = np.zeros((n, n))
        for l in levels:
            if weights[a, l] != 0:
                acc += weights[a, l] * energies[l]
        mask = (dist <= r).astype(float)
        conv = np.real(np.fft.ifft2(np.fft.fft2(acc) * np.conj(np.fft.fft2(mask)))) * dx * dx
        out[a] = conv.ravel()[ci] / r ** power
    return out


def _default_centers(traj, r_max, x_grid):
    if x_grid is not None:
        return np.asarray(x_grid, dtype=np.float64)
    grid = traj.space_grid()
    if traj.is_torus:
        if traj.dim == 1:
            return grid
        return np.arange(grid.size ** 2)
    W = traj.h0.W if traj.h0 is not None else traj.fields[0].W
    return grid[np.abs(grid) <= W - r_max + 1e-12]


def _carleson_scan(traj, R, x_grid, r_grid, time_power, density, power, name, flavor):
    if len(traj) == 0:
        raise NormError("empty trajectory")
    if r_grid is None:
        r_grid = R * 2.0 ** -np.arange(0, 11)
    r_grid = np.asarray(r_grid, dtype=np.float64)
    if np.any(r_grid <= 0) or np.any(r_grid > R * (1 + 1e-12)):
        raise NormError("radii must lie in (0, R]")
    if traj.horizon < r_grid.max() ** 4 * (1 - 1e-12):
        raise NormError("trajectory does not reach r**4 for the largest radius")
    if traj.is_torus and r_grid.max() > traj.fields[0].L / 2:
        raise NormError("radii beyond half the box wrap around the torus")
    centers = _default_centers(traj, r_grid.max(), x_grid)
    if centers.size == 0:
        raise NormError("no admissible centres (window too small for the radii)")
    weights = _weights_matrix(traj.t_grid, r_grid, time_power, density)
    box = _box_scan(traj, r_grid, centers, weights, power)
    a, b = np.unravel_index(int(np.argmax(box)), box.shape)
    best = max(float(box[a, b]), 0.0)
    x_arg = centers[b]
    if traj.is_torus and traj.dim == 2 and x_grid is None:
        x_arg = _point(traj, int(centers[b]))
    argmax = {"t": float(r_grid[a] ** time_power), "x": x_arg, "r": float(r_grid[a])}
    grid = {"t": traj.t_grid, "r": r_grid, "centers": centers if traj.dim == 1 else int(centers.size),
            **_grid_record(traj)}
    return NormReport(name, math.sqrt(best), R, 0, grid, argmax, flavor)


def x0_norm(traj, R, x_grid=None, r_grid=None):
    """``sup_{x, r<=R} (r^-(d+2) int_0^{r^4} int_{B_r(x)} |grad h|^2)^(1/2)``.

    Default radii are ``R 2^-k`` for ``k = 0..10``; default centres are all
    grid points (line: those whose ball fits inside the window).
    """
    name = "X0" if math.isinf(R) else "X0_R"
    return _carleson_scan(traj, R, x_grid, r_grid, 4, None, traj.dim + 2, name, "")


def bmo_carleson(k, table, R=1.0, x_grid=None, r_grid=None, traj=None, levels=40, substeps=4,
                 t_floor=None):
    """Carleson-box form of the BMO norm with test function ``g``.

    With ``phi = g`` one has ``(grad phi)_s * k = s grad exp(-s^4 A) k``, so
    after ``tau = s^4`` the box integral becomes
    ``R^-d int_0^{R^4} int_{B_R(x)} |grad exp(-tau A) k|^2 / (4 sqrt(tau))``.
    """
    if traj is None:
        traj = caloric_extension(k, geometric_grid(R ** 4, levels, substeps,
                                                    _resolution_floor(k, t_floor)), table)
    density = lambda t: 0.25 / np.sqrt(t)
    rep = _carleson_scan(traj, R, x_grid, r_grid, 4, density, traj.dim, "BMO_CARLESON", "")
    return rep


def _resolution_floor(k, t_floor=None):
    """Smallest scanned time.

    Line data are piecewise linear on a grid of step ``dx`` and are only
    trusted for ``t >= dx**4``.  A torus field is an exact trigonometric
    polynomial, so no floor applies unless the caller passes one (e.g.
    when the polynomial truncates rough data).
    """
    if t_floor is not None:
        return t_floor
    if isinstance(k, F.TorusField):
        return 0.0
    return k.dx ** 4


def b_norm(k, R, table, flavor="X", levels=40, substeps=None, x_grid=None, r_grid=None,
           return_traj=False, t_floor=None):
    """``||k||_{B_R}`` (flavor ``"X"``) or ``||k||_{B0_R}`` (flavor ``"X0"``).

    The caloric extension is sampled at ``t_j = R^4 2^(-j/substeps)``,
    ``j = 0..levels*substeps``, keeping only levels above the resolution
    floor (``dx^4`` for line data, none for torus data unless ``t_floor``
    is given).  Defaults: one level per octave for ``X``, four for
    ``X0`` (whose time integral needs the finer grid).
    """
    if flavor not in ("X", "X0"):
        raise NormError(f"flavor must be 'X' or 'X0', got {flavor!r}")
    if substeps is None:
        substeps = 1 if flavor == "X" else 4
    tg = geometric_grid(R ** 4, levels, substeps, _resolution_floor(k, t_floor))
    traj = caloric_extension(k, tg, table)
    if flavor == "X":
        rep = x_norm(traj, R)
    else:
        rep = x0_norm(traj, R, x_grid, r_grid)
    name = "B" if math.isinf(R) else "B_R"
    rep = NormReport(name, rep.value, R, 0, rep.scan_grid, rep.argmax, flavor)
    return (rep, traj) if return_traj else rep


def _multi_indices(d, order):
    return [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) == order]


def higher_norm(traj, m, R=math.inf):
    """``sup_{t<=R^4} t^((m+1)/4) sum_{|a|=m+1} max_x |D^a h(t)|``."""
    if m < 1:
        raise NormError("higher_norm needs m >= 1; use x_norm for m = 0")
    if not traj.is_torus and m + 1 > 3:
        raise NormError("line trajectories provide derivatives up to order 3")
    idx = _select_times(traj, R)
    best, arg = -1.0, None
    alphas = _multi_indices(traj.dim, m + 1)
    for i in idx:
        total = 0.0
        for a in alphas:
            total += float(np.max(np.abs(traj.derivative_values(i, list(a)))))
        v = traj.t_grid[i] ** ((m + 1) / 4.0) * total
        if v > best:
            best, arg = v, {"t": float(traj.t_grid[i])}
    grid = {"t": traj.t_grid[idx], **_grid_record(traj)}
    return NormReport("X_R_M", float(best), R, m, grid, arg)


def z_profile(k, R_list, table, flavor="X", return_reports=False, **kw):
    """``[(R, ||k||_{B_R})]`` for a decreasing ``R_list``.

    ``k`` is either a field or a callable ``R -> field`` so that the
    discretisation can follow the scale being probed.
    """
    R_list = [float(r) for r in R_list]
    if any(b >= a for a, b in zip(R_list, R_list[1:])):
        raise NormError("R_list must be strictly decreasing")
    out, reps = [], []
    for R in R_list:
        field_R = k(R) if callable(k) else k
        rep = b_norm(field_R, R, table, flavor=flavor, **kw)
        out.append((R, rep.value))
        reps.append(rep)
    return (out, reps) if return_reports else out
