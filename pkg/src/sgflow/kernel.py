"""Biharmonic heat kernel ``g`` with ``ghat(xi) = exp(-|xi|^4)``.

The kernel and its derivatives are tabulated once by Gauss-Legendre
quadrature of their Fourier integrals and then interpolated with cubic
Hermite splines (the slope of order ``m`` is the tabulated order ``m + 1``,
so interpolation error is ``O(dz^4)``).  In one dimension the table also
carries the first two antiderivatives

    G1(z) = int_{-inf}^z g,        G2(z) = int_{-inf}^z G1,

which the whole-line convolution code needs for exact jump and ramp
responses.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from . import _backend

FORMAT_VERSION = 1

# exp(-XI_MAX**4) underflows to 0, so the Fourier integrals stop here.
XI_MAX = 6.0
GL_ORDER = 16

DEFAULT_Z_MAX = 36.0
DEFAULT_DZ = 1.0 / 256.0
DEFAULT_QUAD_TOL = 1e-12


class KernelError(ValueError):
    pass


class KernelConstructionError(KernelError):
    """Quadrature did not settle to ``quad_tol`` at some abscissa."""

    def __init__(self, z, order, discrepancy):
        self.z = z
        self.order = order
        self.discrepancy = discrepancy
        super().__init__(
            f"kernel quadrature did not converge at z={z!r} (order {order}, "
            f"discrepancy {discrepancy:.3e})")


class UnsupportedOrderError(KernelError):
    pass


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Tabulated kernel ``g`` and derivatives on ``[-z_max, z_max]``.

    ``samples[m]`` holds ``g^(m)`` for m = 0..3.  For ``dim == 2`` the grid
    is the radius ``[0, z_max]`` and the derivatives are radial.
    """
    dim: int
    z_max: float
    dz: float
    quad_tol: float
    z: np.ndarray
    samples: np.ndarray
    # orders -2, -1 (1-D only) and 4 used for Hermite slopes
    extra: dict = field(default_factory=dict, repr=False)
    panels: int = 0

    @property
    def z0(self):
        return float(self.z[0])

    def column(self, order):
        if 0 <= order <= 3:
            return self.samples[order]
        try:
            return self.extra[order]
        except KeyError:
            raise UnsupportedOrderError(f"order {order} is not tabulated") from None

    def interp_error_bound(self, order):
        """Bound on cubic Hermite error for ``g^(order)``: dz^4/384 * max|g^(order+4)|.

        Uses ``|g^(k)| <= (1/pi) int xi^k exp(-xi^4) = Gamma((k+1)/4) / (4 pi)``
        (one dimension).
        """
        k = order + 4
        return self.dz ** 4 / 384.0 * math.gamma((k + 1) / 4.0) / (4.0 * math.pi)


@dataclass(frozen=True)
class KernelConstants:
    g0: float
    l1_g: float
    linf_g: float
    l1_grad_g: float
    w31_g: float
    beta_half_quarter: float
    c4: float


def _gl_rule(panels):
    x, w = np.polynomial.legendre.leggauss(GL_ORDER)
    edges = np.linspace(0.0, XI_MAX, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x[None, :] + 0.5 * (b + a)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel()
    return nodes, weights


def _line_columns(z, panels):
    """Orders -2..4 on ``z >= 0`` from the even/odd cosine/sine forms."""
    xi, w = _gl_rule(panels)
    base = w * np.exp(-xi ** 4) / np.pi
    cols = {}
    # g^(m) = (1/pi) int xi^m exp(-xi^4) Re[i^m exp(i xi z)]
    for m in range(5):
        odd = m % 2 == 1
        sign = (1, -1, -1, 1)[m % 4]
        cols[m] = sign * _backend.trig_sums(z, xi, base * xi ** m, odd)
    cols[-1] = 0.5 + _backend.trig_sums(z, xi, base / xi, True)
    # 1 - cos(xi z) = 2 sin^2(xi z / 2); Gamma(3/4)/pi fixes G2(-inf) = 0
    half = np.sin(np.outer(z, xi) * 0.5)
    cols[-2] = 0.5 * z + math.gamma(0.75) / np.pi + (2.0 * half ** 2) @ (base / xi ** 2)
    return cols


def _radial_columns(r, panels):
    xi, w = _gl_rule(panels)
    base = w * np.exp(-xi ** 4) / (2.0 * np.pi)
    arg = np.outer(r, xi)
    return {m: (special.jvp(0, arg, m) * xi ** (m + 1)) @ base for m in range(5)}


def build_kernel(dim=1, z_max=DEFAULT_Z_MAX, dz=DEFAULT_DZ, quad_tol=DEFAULT_QUAD_TOL,
                 max_panels=512):
    """Tabulate ``g`` and its derivatives.

    The quadrature panel count doubles until two successive rules agree to
    ``quad_tol`` at every abscissa (antiderivative ``G2`` grows linearly, so
    it is compared relative to ``1 + |z|``).
    """
    if dim not in (1, 2):
        raise KernelError(f"dim must be 1 or 2, got {dim}")
    if not (z_max > 0 and dz > 0 and quad_tol > 0):
        raise KernelError("z_max, dz and quad_tol must be positive")
    n_half = int(round(z_max / dz))
    zpos = dz * np.arange(n_half + 1)
    columns = _line_columns if dim == 1 else _radial_columns

    panels = 16
    prev = columns(zpos, panels)
    while True:
        panels *= 2
        cur = columns(zpos, panels)
        worst = None
        for order in cur:
            scale = 1.0 + zpos if order == -2 else 1.0
            diff = np.abs(cur[order] - prev[order]) / scale
            k = int(np.argmax(diff))
            if diff[k] > quad_tol and (worst is None or diff[k] > worst[2]):
                worst = (float(zpos[k]), order, float(diff[k]))
        if worst is None:
            break
        if panels >= max_panels:
            raise KernelConstructionError(*worst)
        prev = cur

    if dim == 1:
        zfull = np.concatenate([-zpos[:0:-1], zpos])
        full = {}
        for order, col in cur.items():
            if order == -1:
                left = 1.0 - col[:0:-1]
            elif order == -2:
                # G2(-z) = G2(z) - z
                left = col[:0:-1] - zpos[:0:-1]
            else:
                left = (-1) ** order * col[:0:-1]
            full[order] = np.concatenate([left, col])
    else:
        zfull = zpos
        full = cur

    samples = np.vstack([full[m] for m in range(4)])
    samples.setflags(write=False)
    extra = {k: v for k, v in full.items() if k not in (0, 1, 2, 3)}
    table = KernelTable(dim=dim, z_max=float(n_half * dz), dz=float(dz),
                        quad_tol=float(quad_tol), z=zfull, samples=samples,
                        extra=extra, panels=panels)
    problems = check_table(table)
    if problems:
        raise KernelError("kernel table fails invariants: " + "; ".join(problems))
    return table


def check_table(table):
    """Return the list of violated table invariants (empty when valid)."""
    problems = []
    g = table.samples[0]
    tol = table.quad_tol
    if table.dim == 1:
        if np.max(np.abs(g - g[::-1])) > tol:
            problems.append("g is not even")
        mass = np.trapezoid(g, dx=table.dz)
        if abs(mass - 1.0) > 10 * tol:
            problems.append(f"int g = {mass!r}")
        g1 = table.samples[1]
        if np.max(np.abs(g1 + g1[::-1])) > tol:
            problems.append("g' is not odd")
        if abs(np.trapezoid(g1, dx=table.dz)) > 10 * tol:
            problems.append("int g' != 0")
        centre = len(g) // 2
    else:
        # r*g(r) is odd, so the only Euler-Maclaurin term is the one at r = 0
        mass = 2 * np.pi * (np.trapezoid(g * table.z, dx=table.dz) + table.dz ** 2 / 12 * g[0])
        if abs(mass - 1.0) > 1e-8:
            problems.append(f"int g = {mass!r}")
        centre = 0
    if int(np.argmax(g)) != centre:
        problems.append("max of g is not at the origin")
    if abs(g[-1]) >= 1e-12:
        problems.append(f"|g(z_max)| = {abs(g[-1]):.2e} is not below 1e-12")
    return problems


def eval_kernel(table, z, deriv_order=0):
    """Interpolate ``g^(deriv_order)`` at ``z``; zero beyond ``z_max``.

    In two dimensions ``z`` is the radius (or an array of points whose last
    axis has length 2) and the derivative is radial.
    """
    if deriv_order not in (0, 1, 2, 3):
        raise UnsupportedOrderError(f"deriv_order must be in 0..3, got {deriv_order}")
    z = np.asarray(z, dtype=np.float64)
    if table.dim == 2 and z.ndim >= 1 and z.shape[-1] == 2:
        z = np.hypot(z[..., 0], z[..., 1])
    out = _backend.hermite_eval(table.column(deriv_order), table.column(deriv_order + 1),
                                table.z0, table.dz, z, _backend.PLAIN)
    return out if out.ndim else float(out)


def eval_antiderivative(table, z, which):
    """``G1`` (``which=1``) or ``G2`` (``which=2``) at ``z``, exact outside the table."""
    if table.dim != 1:
        raise KernelError("antiderivatives are tabulated only in one dimension")
    z = np.asarray(z, dtype=np.float64)
    order = -which
    kind = _backend.MINUS_STEP if which == 1 else _backend.MINUS_RAMP
    decayed = _backend.hermite_eval(table.column(order), table.column(order + 1),
                                    table.z0, table.dz, z, kind)
    if which == 1:
        base = np.where(z > 0, 1.0, np.where(z < 0, 0.0, 0.5))
    else:
        base = np.maximum(z, 0.0)
    return decayed + base


def decayed_column(table, order):
    """(values, slopes, order_kind) for the decaying version of ``g^(order)``."""
    kind = {-2: _backend.MINUS_RAMP, -1: _backend.MINUS_STEP}.get(order, _backend.PLAIN)
    return table.column(order), table.column(order + 1), kind


def beta_half_quarter():
    return math.gamma(0.5) * math.gamma(0.25) / math.gamma(0.75)


def _cartesian_l1_2d(table, h=1.0 / 16.0):
    """L1 norms of all Cartesian partials of the radial kernel up to order 3."""
    ax = np.arange(-table.z_max + h / 2, table.z_max, h)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    r = np.hypot(X, Y)
    f = [eval_kernel(table, r, m) for m in range(4)]
    u = (X / r, Y / r)
    cell = h * h
    norms = {0: [np.abs(f[0]).sum() * cell]}
    norms[1] = [np.abs(f[1] * u[i]).sum() * cell for i in range(2)]
    d = lambda i, j: 1.0 if i == j else 0.0
    second = []
    for i in range(2):
        for j in range(2):
            part = f[2] * u[i] * u[j] + f[1] / r * (d(i, j) - u[i] * u[j])
            second.append(np.abs(part).sum() * cell)
    norms[2] = second
    third = []
    for i in range(2):
        for j in range(2):
            for k in range(2):
                sym = d(i, j) * u[k] + d(i, k) * u[j] + d(j, k) * u[i] - 3 * u[i] * u[j] * u[k]
                part = f[3] * u[i] * u[j] * u[k] + (f[2] / r - f[1] / r ** 2) * sym
                third.append(np.abs(part).sum() * cell)
    norms[3] = third
    return norms


def kernel_constants(table):
    """Scalar constants derived from the kernel table.

    ``w31_g`` sums the L1 norms of all partial derivatives of order <= 3
    (each multi-index counted once, as in the usual Sobolev norm).
    """
    b = beta_half_quarter()
    if table.dim == 1:
        dz = table.dz
        l1 = [np.trapezoid(np.abs(table.samples[m]), dx=dz) for m in range(4)]
        g0 = float(table.samples[0][len(table.z) // 2])
        l1_g, l1_grad = l1[0], l1[1]
        w31 = float(sum(l1))
    else:
        norms = _cartesian_l1_2d(table)
        g0 = float(table.samples[0][0])
        l1_g = norms[0][0]
        l1_grad = 2 * np.pi * np.trapezoid(np.abs(table.samples[1]) * table.z, dx=table.dz)
        w31 = float(sum(sum(v) for v in norms.values()))
    linf = float(np.max(np.abs(table.samples[0])))
    return KernelConstants(g0=g0, l1_g=float(l1_g), linf_g=linf, l1_grad_g=float(l1_grad),
                           w31_g=w31, beta_half_quarter=b, c4=b * w31)


# ---------------------------------------------------------------- persistence

def save_table(table, path):
    """Write ``<path>.json`` (metadata) and ``<path>.bin`` (raw ``<f8`` array).

    The binary file holds the rows ``orders`` listed in the metadata, each of
    length ``n_points``, in C order.
    """
    path = Path(path)
    orders = sorted(set(range(4)) | set(table.extra))
    data = np.vstack([table.column(o) for o in orders]).astype("<f8")
    meta = {"format_version": FORMAT_VERSION, "kind": "KernelTable", "dim": table.dim,
            "z_max": table.z_max, "dz": table.dz, "quad_tol": table.quad_tol,
            "z0": table.z0, "n_points": int(data.shape[1]), "orders": orders,
            "panels": table.panels, "dtype": "<f8"}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    path.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    return path.with_suffix(".json"), path.with_suffix(".bin")


def load_table(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("format_version") != FORMAT_VERSION or meta.get("kind") != "KernelTable":
        raise KernelError(f"unsupported kernel cache {path}")
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    orders = meta["orders"]
    n = meta["n_points"]
    if raw.size != n * len(orders):
        raise KernelError("kernel cache size does not match its metadata")
    rows = dict(zip(orders, raw.reshape(len(orders), n).astype(np.float64)))
    z = meta["z0"] + meta["dz"] * np.arange(n)
    samples = np.vstack([rows[m] for m in range(4)])
    samples.setflags(write=False)
    table = KernelTable(dim=meta["dim"], z_max=meta["z_max"], dz=meta["dz"],
                        quad_tol=meta["quad_tol"], z=z, samples=samples,
                        extra={o: rows[o] for o in orders if o not in range(4)},
                        panels=meta["panels"])
    problems = check_table(table)
    if problems:
        raise KernelError("kernel cache fails invariants: " + "; ".join(problems))
    return table


_DEFAULT = {}


def default_table(dim=1):
    """Process-wide cached table with default parameters."""
    if dim not in _DEFAULT:
        if dim == 1:
            _DEFAULT[dim] = build_kernel(1)
        else:
            _DEFAULT[dim] = build_kernel(2, z_max=DEFAULT_Z_MAX, dz=1.0 / 64.0, quad_tol=1e-10)
    return _DEFAULT[dim]
