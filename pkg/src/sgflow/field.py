"""Scalar fields on the periodic box and on a truncated real line.

Torus fields are stored spectrally with numpy's FFT layout and the
normalisation ``coeffs = fft(values) / n**dim``, so that
``h(x) = sum_k coeffs[k] exp(2 pi i k.x / L)``.

Line fields carry samples on a uniform window ``[-W, W]`` together with an
analytic description of the data outside the window and a list of jump
discontinuities.  The semigroup is evaluated without differencing: inside
the window the data are split into jumps and a piecewise linear remainder
whose responses are closed-form kernel antiderivatives, and the two tails
are integrated by Gauss-Legendre quadrature against the kernel.
"""
import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy import signal

from . import _backend
from .kernel import decayed_column

FORMAT_VERSION = 1


class FieldError(ValueError):
    pass


class WindowTooSmallError(FieldError):
    pass


def _heaviside(x):
    return np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))


# --------------------------------------------------------------------- torus

class TorusOps:
    """Precomputed wavenumber arrays for one ``(dim, n, L)`` box."""

    _cache = {}

    def __init__(self, dim, n, L):
        self.dim, self.n, self.L = dim, n, float(L)
        k1 = np.fft.fftfreq(n, 1.0 / n)
        shape = (n,) * dim
        self.k = [k1.reshape([-1 if a == i else 1 for a in range(dim)]) for i in range(dim)]
        self.kappa = [2 * np.pi * k / self.L for k in self.k]
        k2 = np.zeros(shape)
        for kap in self.kappa:
            k2 = k2 + kap ** 2
        self.k2 = k2
        self.k4 = k2 ** 2
        # derivative multipliers with the unpaired Nyquist mode removed
        self.ikappa = [np.where(np.abs(k) == n // 2, 0.0, 1j * kap)
                       for k, kap in zip(self.k, self.kappa)]
        keep = np.ones(shape, dtype=bool)
        for k in self.k:
            keep = keep & (np.abs(k) <= n / 3.0)
        self.keep = keep

    @classmethod
    def get(cls, dim, n, L):
        key = (dim, n, float(L))
        if key not in cls._cache:
            cls._cache[key] = cls(dim, n, L)
        return cls._cache[key]

    def to_values(self, coeffs):
        return np.real(np.fft.ifftn(coeffs)) * self.n ** self.dim

    def to_coeffs(self, values):
        return np.fft.fftn(values) / self.n ** self.dim

    def grad_dot(self, a, b):
        """Dealiased coefficients of ``grad a . grad b`` from coefficient arrays."""
        a = a * self.keep
        b = a if b is None else b * self.keep
        acc = 0.0
        for ik in self.ikappa:
            ga = self.to_values(ik * a)
            gb = ga if b is a else self.to_values(ik * b)
            acc = acc + ga * gb
        return self.to_coeffs(acc) * self.keep

    def nonlin(self, a):
        """Coefficients of ``Lap |grad a|^2``."""
        return -self.k2 * self.grad_dot(a, None)


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class TorusField:
    """Real field on the box ``[0, L)^dim`` held by its Fourier coefficients."""
    dim: int
    n: int
    L: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise FieldError(f"dim must be 1 or 2, got {self.dim}")
        if not _is_pow2(self.n):
            raise FieldError(f"n must be a power of two, got {self.n}")
        if not self.L > 0:
            raise FieldError("box length must be positive")
        if self.coeffs.shape != (self.n,) * self.dim:
            raise FieldError(f"coeffs shape {self.coeffs.shape} does not match n={self.n}")

    @property
    def ops(self):
        return TorusOps.get(self.dim, self.n, self.L)

    @classmethod
    def from_values(cls, values, L):
        values = np.asarray(values, dtype=np.float64)
        dim, n = values.ndim, values.shape[0]
        return cls(dim, n, float(L), TorusOps.get(dim, n, L).to_coeffs(values))

    @classmethod
    def from_function(cls, fn, n, L, dim=1):
        axes = np.meshgrid(*([np.arange(n) * (L / n)] * dim), indexing="ij")
        return cls.from_values(fn(*axes), L)

    @classmethod
    def zeros(cls, n, L, dim=1):
        return cls(dim, n, float(L), np.zeros((n,) * dim, dtype=complex))

    def grid(self):
        return np.arange(self.n) * (self.L / self.n)

    def values(self):
        return self.ops.to_values(self.coeffs)

    def with_coeffs(self, coeffs):
        return TorusField(self.dim, self.n, self.L, coeffs)

    def mean(self):
        return float(self.coeffs.flat[0].real)

    def hermitian_defect(self):
        c = self.coeffs
        flipped = np.conj(np.roll(np.flip(c), 1, axis=tuple(range(self.dim))))
        scale = max(np.max(np.abs(c)), 1e-300)
        return float(np.max(np.abs(c - flipped)) / scale)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scale(self, a):
        return self.with_coeffs(a * self.coeffs)


def semigroup_apply(f, t):
    """``exp(-tA) f`` with ``A`` the bi-Laplacian, mode by mode."""
    if t < 0:
        raise FieldError(f"time must be nonnegative, got {t}")
    if t == 0:
        return f
    return f.with_coeffs(f.coeffs * np.exp(-t * f.ops.k4))


def gradient(f):
    return [f.with_coeffs(ik * f.coeffs) for ik in f.ops.ikappa]


def laplacian(f):
    return f.with_coeffs(-f.ops.k2 * f.coeffs)


def dealias(f):
    return f.with_coeffs(f.coeffs * f.ops.keep)


def grad_product(f, g):
    """Dealiased ``grad f . grad g``."""
    return f.with_coeffs(f.ops.grad_dot(f.coeffs, g.coeffs))


def nonlinearity(f):
    """``Lap |grad f|^2`` with the 2/3 rule applied before and after the product."""
    return f.with_coeffs(f.ops.nonlin(f.coeffs))


def derivative(f, orders):
    """Spectral partial derivative; ``orders`` gives the count per axis."""
    mult = 1.0
    for ik, q in zip(f.ops.ikappa, orders):
        mult = mult * ik ** q
    return f.with_coeffs(mult * f.coeffs)


# ---------------------------------------------------------------------- line

@dataclass(frozen=True)
class EdgeExtension:
    """Closed-form data outside the window.

    kind ``constant``: ``left`` for x < -W, ``right`` for x > W.
    kind ``power``:    ``c_left |x|**alpha`` and ``c_right |x|**alpha``.
    kind ``log``:      ``coef * log|x| + offset`` on both sides.
    """
    kind: str
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("constant", "power", "log"):
            raise FieldError(f"unknown edge extension {self.kind!r}")

    def left(self, x):
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["left"], dtype=float)
        if self.kind == "power":
            return p["c_left"] * np.abs(x) ** p["alpha"]
        return p["coef"] * np.log(np.abs(x)) + p.get("offset", 0.0)

    def right(self, x):
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["right"], dtype=float)
        if self.kind == "power":
            return p["c_right"] * np.abs(x) ** p["alpha"]
        return p["coef"] * np.log(np.abs(x)) + p.get("offset", 0.0)

    def to_json(self):
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass(frozen=True, eq=False)
class LineField:
    """Samples on the uniform grid of ``[-W, W]`` plus edge data and jumps.

    ``jumps`` lists ``(position, size)`` pairs; positions must be interior
    grid nodes.  The value stored at a jump node is irrelevant to the
    semigroup (a jump node carries no mass).
    """
    W: float
    samples: np.ndarray
    extension: EdgeExtension
    jumps: tuple = ()

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def dx(self):
        return 2.0 * self.W / (self.m - 1)

    def grid(self):
        return np.linspace(-self.W, self.W, self.m)

    def check(self, tol=1e-8):
        problems = []
        if not np.all(np.isfinite(self.samples)):
            problems.append("non-finite samples")
        edge = np.array([-self.W, self.W])
        lv = float(self.extension.left(edge[:1])[0])
        rv = float(self.extension.right(edge[1:])[0])
        if abs(lv - self.samples[0]) > tol or abs(rv - self.samples[-1]) > tol:
            problems.append("edge extension inconsistent with boundary samples")
        for p, _ in self.jumps:
            j = (p + self.W) / self.dx
            if abs(j - round(j)) > 1e-9 or not 0 < round(j) < self.m - 1:
                problems.append(f"jump at {p} is not an interior grid node")
        return problems

    def validate(self):
        problems = self.check()
        if problems:
            raise FieldError("; ".join(problems))
        return self

    def continuous_part(self):
        """Samples with the jumps removed; jump nodes take the neighbour average."""
        y = self.grid()
        d = self.samples.astype(np.float64).copy()
        nodes = []
        for p, size in self.jumps:
            d -= size * _heaviside(y - p)
            nodes.append(int(round((p + self.W) / self.dx)))
        for j in nodes:
            d[j] = 0.5 * (d[j - 1] + d[j + 1])
        return d


def _kernel_sum(x, nodes, coefs, table, order, s, dense, on_grid=False):
    """``sum_j coefs[j] * K_order((x - nodes[j]) / s)`` with decaying K.

    ``dense = (y0, dy)`` means the coefficients sit on every node of that
    uniform grid.  When ``x`` is that same grid the sum is a discrete
    convolution and is done by FFT; otherwise the direct local sum runs.
    """
    values, slopes, kind = decayed_column(table, order)
    if dense is not None:
        y0, dy = dense
        if on_grid:
            reach = int(math.floor(s * table.z_max / dy))
            lags = dy * np.arange(-reach, reach + 1)
            ker = _backend.hermite_eval(values, slopes, table.z0, table.dz, lags / s, kind)
            full = signal.fftconvolve(coefs, ker)
            return full[reach:reach + coefs.size]
        return _backend.ramp_sum(x, y0, dy, coefs, values, slopes, table.z0, table.dz, s, kind)
    out = np.zeros_like(x)
    for p, c in zip(nodes, coefs):
        if c != 0.0:
            out += c * _backend.hermite_eval(values, slopes, table.z0, table.dz, (x - p) / s, kind)
    return out


_TAIL_RULES = {}


def _tail_rule(panels, order=8):
    """Composite Gauss-Legendre rule with ``panels`` pieces on [0, 1]."""
    if panels not in _TAIL_RULES:
        u, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, 1.0, panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        _TAIL_RULES[panels] = ((0.5 * (b - a) * u + 0.5 * (a + b)).ravel(),
                               (0.5 * (b - a) * w).ravel())
    return _TAIL_RULES[panels]


def _tail_quadrature(x, fn, lo, hi, table, order, s):
    """``s**-order * int_lo^hi g^(order)(z) fn(x - s z) dz`` per point."""
    out = np.zeros_like(x)
    live = hi > lo
    if not np.any(live):
        return out
    xl, a, b = x[live], lo[live], hi[live]
    # panels of width <= 3/4 resolve the kernel's oscillation
    u, w = _tail_rule(max(1, int(math.ceil(float(np.max(b - a)) / 0.75))))
    z = a[:, None] + (b - a)[:, None] * u[None, :]
    kv = _backend.hermite_eval(table.column(order), table.column(order + 1),
                               table.z0, table.dz, z.ravel(), _backend.PLAIN).reshape(z.shape)
    vals = fn(xl[:, None] - s * z)
    out[live] = ((kv * vals) @ w) * (b - a) / s ** order
    return out


def line_semigroup_values(f, table, t, deriv_order=0, x=None):
    """``D^m exp(-tA) f`` at the points ``x`` (default: the window grid)."""
    if table.dim != 1:
        raise FieldError("line fields need a one-dimensional kernel table")
    if deriv_order not in (0, 1, 2, 3):
        raise FieldError(f"deriv_order must be in 0..3, got {deriv_order}")
    if not t > 0:
        raise FieldError(f"time must be positive, got {t}")
    s = t ** 0.25
    zmax = table.z_max
    if s * zmax > 10.0 * f.W:
        raise WindowTooSmallError(
            f"kernel reach {s * zmax:.4g} exceeds ten window half-widths ({10 * f.W:.4g})")
    m = deriv_order
    y = f.grid()
    on_grid = x is None
    x = y if x is None else np.asarray(x, dtype=np.float64)
    dx = f.dx
    d = f.continuous_part()
    ext = f.extension
    out = np.zeros_like(x)

    # step sources: the jumps, the window cut-offs and constant tails
    step_pos = [p for p, _ in f.jumps] + [y[0], y[-1]]
    step_size = [c for _, c in f.jumps] + [d[0], -d[-1]]
    if ext.kind == "constant":
        # left tail c*(1 - H(y + W)) = c - c*H(y + W); right tail c*H(y - W)
        step_pos += [-f.W, f.W]
        step_size += [-ext.params["left"], ext.params["right"]]
        if m == 0:
            out += ext.params["left"]
    out += s ** (-m) * _kernel_sum(x, step_pos, step_size, table, m - 1, s, None)
    if m == 0:
        for p, c in zip(step_pos, step_size):
            out += c * _heaviside(x - p)

    # ramps: d on the window is d0 + sum_j kappa_j (y - y_j)_+
    slope = np.diff(d) / dx
    kappa = np.zeros(f.m)
    kappa[0] = slope[0]
    kappa[1:-1] = np.diff(slope)
    kappa[-1] = -slope[-1]
    idx = np.flatnonzero(kappa)
    if idx.size > 64:
        ramps = _kernel_sum(x, None, kappa, table, m - 2, s, (y[0], dx), on_grid)
    else:
        ramps = _kernel_sum(x, y[idx], kappa[idx], table, m - 2, s, None)
    out += s ** (1 - m) * ramps
    if m == 0:
        # sum_j kappa_j (x - y_j)_+ is the interpolant minus d0, frozen past y[-1]
        out += np.where(x >= y[0], np.interp(x, y, d) - d[0], 0.0)
    elif m == 1:
        out += sum_ramps_heaviside(x, y, kappa)

    # analytic tails
    if ext.kind != "constant":
        hi = np.minimum((x - f.W) / s, zmax)
        out += _tail_quadrature(x, ext.right, np.full_like(x, -zmax), hi, table, m, s)
        lo = np.maximum((x + f.W) / s, -zmax)
        out += _tail_quadrature(x, ext.left, lo, np.full_like(x, zmax), table, m, s)
    return out


def sum_ramps_heaviside(x, nodes, kappa):
    """``sum_j kappa_j H(x - nodes_j)`` with ``H(0) = 1/2``, for sorted nodes."""
    csum = np.concatenate([[0.0], np.cumsum(kappa)])
    lo = np.searchsorted(nodes, x, side="left")
    hi = np.searchsorted(nodes, x, side="right")
    return 0.5 * (csum[lo] + csum[hi])


def line_semigroup(f, table, t, deriv_order=0):
    """``D^m exp(-tA) f`` on the window grid, returned as a LineField.

    The result's edge extension is the constant continuation of its two
    boundary values; it is a container for samples, not a model of the
    evolved field outside the window.
    """
    vals = line_semigroup_values(f, table, t, deriv_order)
    ext = EdgeExtension("constant", {"left": float(vals[0]), "right": float(vals[-1])})
    return LineField(f.W, vals, ext)


# ----------------------------------------------------------------- snapshots

def save_field(f, path, time=None):
    """Write ``<path>.json`` metadata and ``<path>.bin`` little-endian doubles.

    Torus fields store physical values on the ``n**dim`` grid in C order;
    line fields store the ``m`` window samples.
    """
    path = Path(path)
    if isinstance(f, TorusField):
        data = f.values()
        meta = {"type": "TorusField", "dim": f.dim, "n": f.n, "L": f.L}
    elif isinstance(f, LineField):
        data = f.samples
        meta = {"type": "LineField", "dim": 1, "m": f.m, "W": f.W,
                "extension": f.extension.to_json(), "jumps": [list(j) for j in f.jumps]}
    else:
        raise FieldError(f"cannot save {type(f).__name__}")
    meta.update({"format_version": FORMAT_VERSION, "time": time, "dtype": "<f8"})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    path.with_suffix(".bin").write_bytes(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return path.with_suffix(".json"), path.with_suffix(".bin")


def load_field(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise FieldError(f"unsupported snapshot version in {path}")
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8").astype(np.float64)
    if meta["type"] == "TorusField":
        shape = (meta["n"],) * meta["dim"]
        if raw.size != math.prod(shape):
            raise FieldError("snapshot size does not match metadata")
        f = TorusField.from_values(raw.reshape(shape), meta["L"])
        if f.hermitian_defect() > 1e-13:
            raise FieldError("loaded torus field is not real")
        return f
    if meta["type"] == "LineField":
        if raw.size != meta["m"]:
            raise FieldError("snapshot size does not match metadata")
        ext = EdgeExtension(meta["extension"]["kind"], meta["extension"]["params"])
        return LineField(meta["W"], raw, ext, tuple(tuple(j) for j in meta["jumps"])).validate()
    raise FieldError(f"unknown snapshot type {meta['type']!r}")
