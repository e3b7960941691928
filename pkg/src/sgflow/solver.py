"""Mild solutions on the torus and the checks that go with them.

The Duhamel term

    V(h, k)(t) = int_0^t Lap exp(-(t-s)A) (grad h(s) . grad k(s)) ds

is integrated mode by mode with the product ``grad h . grad k`` linearly
interpolated between stored times; the exponential is integrated exactly
against each linear piece, so stiff high modes cost nothing extra.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import field as F
from .kernel import kernel_constants
from .trajectory import Trajectory, graded_grid


class SolverError(ValueError):
    pass


class PicardDivergenceError(SolverError):
    """Picard iteration failed to reach the tolerance; carries the delta history."""

    def __init__(self, deltas, reason):
        self.deltas = list(deltas)
        super().__init__(f"Picard iteration diverged ({reason}); deltas: "
                         + ", ".join(f"{d:.3e}" for d in self.deltas))


class AccuracyWarning(UserWarning):
    pass


# ------------------------------------------------------------ phi functions

def _series(z, coef):
    out = np.zeros_like(z)
    for c in reversed(coef):
        out = out * z + c
    return out


_N_TERMS = 16
# (1 - e^-z)/z, (1 - e^-z (1+z))/z^2 and (e^-z - 1 + z)/z^2 as power series in z
_PHI1 = [(-1) ** n / math.factorial(n + 1) for n in range(_N_TERMS)]
_WPREV = [(-1) ** n * (n + 1) / math.factorial(n + 2) for n in range(_N_TERMS)]
_PHI2 = [(-1) ** n / math.factorial(n + 2) for n in range(_N_TERMS)]


def _phi(z, which):
    z = np.asarray(z, dtype=np.float64)
    small = z < 0.1
    zs = np.where(small, z, 0.0)
    zl = np.where(small, 1.0, z)
    e = np.exp(-zl)
    if which == 1:
        direct, coef = (1 - e) / zl, _PHI1
    elif which == "prev":
        direct, coef = (1 - e * (1 + zl)) / zl ** 2, _WPREV
    else:
        direct, coef = (e - 1 + zl) / zl ** 2, _PHI2
    return np.where(small, _series(zs, coef), direct)


def panel_weights(lam, dt):
    """Exact weights for ``int_0^dt exp(-lam (dt-u)) N(u) du`` with N linear.

    Returns ``(decay, w_prev, w_next)`` so the integral equals
    ``w_prev N(0) + w_next N(dt)``.
    """
    z = lam * dt
    wp = dt * _phi(z, "prev")
    wn = dt * _phi(z, 1) - wp
    return np.exp(-z), wp, wn


# ------------------------------------------------------------ Duhamel map

def _coeff_stack(traj):
    return np.stack([f.coeffs for f in traj.fields])


def _initial_coeffs(traj):
    src = traj.h0 if traj.h0 is not None else traj.fields[0]
    return src.coeffs


def _products(ops, h_stack, k_stack):
    """``grad h . grad k`` coefficients at every stored node (dealiased)."""
    same = h_stack is k_stack
    return np.stack([ops.grad_dot(a, None if same else b) for a, b in zip(h_stack, k_stack)])


def _duhamel_nodes(ops, nodes, prods):
    """V at every node given products ``prods[j]`` at ``nodes[j]`` (``nodes[0] = 0``)."""
    out = np.zeros_like(prods)
    v = np.zeros_like(prods[0])
    for j in range(len(nodes) - 1):
        dec, wp, wn = panel_weights(ops.k4, nodes[j + 1] - nodes[j])
        v = dec * v - ops.k2 * (wp * prods[j] + wn * prods[j + 1])
        out[j + 1] = v
    return out


def duhamel_bilinear(h, k, t):
    """``V(h, k)(t)`` as a TorusField, for trajectories on a common grid.

    The time levels of ``h`` and ``k`` plus ``s = 0`` (from their ``h0``)
    are the interpolation nodes; ``t`` may fall between levels.
    """
    if not (h.is_torus and k.is_torus):
        raise SolverError("the Duhamel map is implemented on the torus")
    if h.t_grid.shape != k.t_grid.shape or np.any(h.t_grid != k.t_grid):
        raise SolverError("trajectories must share a time grid")
    if t < 0 or t > h.horizon * (1 + 1e-12):
        raise SolverError(f"t = {t} lies outside the trajectory horizon {h.horizon}")
    ops = h.fields[0].ops
    nodes = np.concatenate([[0.0], h.t_grid])
    hs = np.concatenate([_initial_coeffs(h)[None], _coeff_stack(h)])
    ks = hs if k is h else np.concatenate([_initial_coeffs(k)[None], _coeff_stack(k)])
    prods = _products(ops, hs, ks)
    j = int(np.searchsorted(nodes, t, side="right")) - 1
    j = min(j, len(nodes) - 2)
    head = _duhamel_nodes(ops, nodes[:j + 1], prods[:j + 1])[-1] if j > 0 else np.zeros_like(prods[0])
    dt = t - nodes[j]
    if dt > 0:
        th = dt / (nodes[j + 1] - nodes[j])
        p_end = (1 - th) * prods[j] + th * prods[j + 1]
        dec, wp, wn = panel_weights(ops.k4, dt)
        head = dec * head - ops.k2 * (wp * prods[j] + wn * p_end)
    return h.fields[0].with_coeffs(head)


# ----------------------------------------------------------------- Picard

def _xr_distance(ops, t_grid, diff_stack):
    """``sup_j t_j^(1/4) max_x |grad diff_j|`` on the stored levels."""
    best = 0.0
    for t, c in zip(t_grid, diff_stack):
        g2 = 0.0
        for ik in ops.ikappa:
            g2 = g2 + ops.to_values(ik * c) ** 2
        best = max(best, t ** 0.25 * math.sqrt(float(np.max(g2))))
    return best


def _max_distance(ops, a, b):
    return float(max(np.max(np.abs(ops.to_values(x - y))) for x, y in zip(a, b)))


def picard_iterate(h0, t_grid, forcing=None, max_iter=50, tol=1e-12):
    """Fixed point of ``H = exp(-tA) h0 + forcing - V(H, H)`` on ``t_grid``.

    Returns ``(stack, info)`` with ``stack[j]`` the coefficients at
    ``t_grid[j]``.  ``forcing`` is an optional stack on the same grid.
    """
    ops = h0.ops
    t_grid = np.asarray(t_grid, dtype=np.float64)
    nodes = np.concatenate([[0.0], t_grid])
    base = np.exp(-t_grid[:, None] * ops.k4.ravel()[None, :]).reshape((t_grid.size,) + ops.k4.shape)
    base = base * h0.coeffs[None]
    if forcing is not None:
        # forcing vanishes at t = 0, so the s = 0 node still carries h0
        base = base + forcing
    h0c = h0.coeffs
    H = np.zeros_like(base)
    deltas, maxdist = [], []
    converged = False
    for it in range(1, max_iter + 1):
        stack = np.concatenate([h0c[None], H])
        V = _duhamel_nodes(ops, nodes, _products(ops, stack, stack))[1:]
        H_new = base - V
        delta = _xr_distance(ops, t_grid, H_new - H)
        maxdist.append(_max_distance(ops, H_new, H))
        deltas.append(float(delta))
        H = H_new
        if not math.isfinite(delta) or delta > 1e8:
            raise PicardDivergenceError(deltas, "iterates blew up")
        if delta < tol:
            converged = True
            break
    if not converged:
        raise PicardDivergenceError(deltas, f"no convergence within {max_iter} iterations")
    stack = np.concatenate([h0c[None], H])
    V = _duhamel_nodes(ops, nodes, _products(ops, stack, stack))[1:]
    residual = _xr_distance(ops, t_grid, H - base + V)
    info = {"iterations": len(deltas), "deltas": deltas, "max_norm_deltas": maxdist,
            "mild_residual": residual, "tol": tol}
    return H, info


def picard_solve(h0, R, table=None, max_iter=50, tol=1e-12, J=64, t_grid=None):
    """Mild solution on ``(0, R^4]`` by Picard iteration from ``H_0 = 0``.

    The grid defaults to ``t_j = R^4 (j/J)^4``.  Raises
    :class:`PicardDivergenceError` when the tolerance is not met.
    """
    if not isinstance(h0, F.TorusField):
        raise SolverError("picard_solve works on torus fields")
    if not R > 0:
        raise SolverError("R must be positive")
    tg = graded_grid(R ** 4, J) if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    H, info = picard_iterate(h0, tg, None, max_iter, tol)
    prov = {"picard": info, "R": R, "J": int(tg.size)}
    if table is not None:
        prov["c4"] = kernel_constants(table).c4
    return Trajectory(tg, [h0.with_coeffs(c) for c in H], h0, prov)


def mild_residual(traj):
    """``||h - exp(-tA) h0 + V(h, h)||_{X_R}`` recomputed from a trajectory."""
    ops = traj.fields[0].ops
    nodes = np.concatenate([[0.0], traj.t_grid])
    stack = np.concatenate([traj.h0.coeffs[None], _coeff_stack(traj)])
    V = _duhamel_nodes(ops, nodes, _products(ops, stack, stack))[1:]
    base = np.stack([np.exp(-t * ops.k4) * traj.h0.coeffs for t in traj.t_grid])
    return _xr_distance(ops, traj.t_grid, stack[1:] - base + V)


# ------------------------------------------------------- time-stepping oracle

SCHEMES = ("etdrk2", "ifrk2")


def _rhs(ops, c, nonlinear, forcing=None):
    out = -ops.nonlin(c) if nonlinear else np.zeros_like(c)
    if forcing is not None:
        out = out + forcing
    return out


def _step(ops, c, dt, scheme, nonlinear, extra=None):
    """One step of size ``dt``; ``extra(c, which)`` adds state-dependent terms."""
    lam = ops.k4
    e = np.exp(-lam * dt)
    rhs = (lambda u, w: _rhs(ops, u, nonlinear) + (extra(u, w) if extra else 0.0))
    n0 = rhs(c, 0)
    if scheme == "etdrk2":
        a = e * c + dt * _phi(lam * dt, 1) * n0
        return a + dt * _phi(lam * dt, 2) * (rhs(a, 1) - n0)
    if scheme == "ifrk2":
        pred = e * (c + dt * n0)
        return e * c + 0.5 * dt * (e * n0 + rhs(pred, 1))
    raise SolverError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _march(h0, T, steps, scheme, nonlinear):
    ops = h0.ops
    dt = T / steps
    c = h0.coeffs
    out = []
    for _ in range(steps):
        c = _step(ops, c, dt, scheme, nonlinear)
        out.append(c)
    return out


def reference_solve(h0, T, steps, scheme="etdrk2", nonlinear=True, check=True):
    """Uniform-step exponential integrator with exact linear propagation.

    ``etdrk2`` is the Cox-Matthews scheme, ``ifrk2`` integrating-factor Heun.
    With ``check`` the run is repeated at half the step and the max-norm
    difference at ``T`` is stored in the provenance; above 1e-5 an
    :class:`AccuracyWarning` is issued and flagged.
    """
    if not isinstance(h0, F.TorusField):
        raise SolverError("reference_solve works on torus fields")
    if scheme not in SCHEMES:
        raise SolverError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if steps < 1 or not T > 0:
        raise SolverError("need T > 0 and at least one step")
    stack = _march(h0, T, steps, scheme, nonlinear)
    tg = T * np.arange(1, steps + 1) / steps
    prov = {"oracle": {"scheme": scheme, "steps": steps, "nonlinear": nonlinear}}
    if check:
        fine = _march(h0, T, 2 * steps, scheme, nonlinear)[-1]
        err = float(np.max(np.abs(h0.ops.to_values(fine - stack[-1]))))
        prov["oracle"]["halving_error"] = err
        prov["oracle"]["accuracy_warning"] = err > 1e-5
        if err > 1e-5:
            warnings.warn(f"step-halving error {err:.2e} exceeds 1e-5", AccuracyWarning)
    return Trajectory(tg, [h0.with_coeffs(c) for c in stack], h0, prov)


# ------------------------------------------------------ smallness certificate

@dataclass(frozen=True)
class SmallnessCertificate:
    """Data for the contraction argument.  ``K_high`` is the supremum
    ``1/(2 c4)`` of admissible K, which itself is not admissible."""
    c1: float
    c4: float
    delta: float
    K_low: float
    K_high: float
    b_norm_h0: float
    satisfied: bool


def smallness_certificate(h0, R, c1, table, b_norm_h0=None):
    """Threshold ``delta = c1/(8 c4)`` against the measured ``||h0||_{B0_R}``."""
    from .norms import b_norm
    if not c1 > 0:
        raise SolverError("c1 must be positive")
    c4 = kernel_constants(table).c4
    delta = c1 / (8.0 * c4)
    disc = 1.0 - 4.0 * c4 * delta / c1
    K_low = (1.0 - math.sqrt(disc)) / (2.0 * c4)
    K_high = 1.0 / (2.0 * c4)
    if b_norm_h0 is None:
        if isinstance(h0, F.TorusField) and not np.any(h0.coeffs.ravel()[1:]):
            b_norm_h0 = 0.0
        else:
            b_norm_h0 = b_norm(h0, R, table, flavor="X0").value
    return SmallnessCertificate(c1, c4, delta, K_low, K_high, float(b_norm_h0),
                                bool(b_norm_h0 <= delta))


# ------------------------------------------------------------ weak residual

def _bump_polys(kmax):
    """Polynomials ``P_k`` with ``d^k/du^k psi = P_k(u) psi / (1-u^2)^(2k)``."""
    P = [np.polynomial.Polynomial([1.0])]
    u = np.polynomial.Polynomial([0.0, 1.0])
    one_m = 1 - u ** 2
    for k in range(kmax):
        p = P[-1]
        P.append(p.deriv() * one_m ** 2 + 4 * k * u * p * one_m - 2 * u * p)
    return P


_BUMP_P = _bump_polys(4)


def bump(u, order=0):
    """``psi(u) = exp(-1/(1-u^2))`` on ``|u| < 1`` and its derivatives."""
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) < 1
    us = np.where(inside, u, 0.0)
    q = 1 - us ** 2
    val = _BUMP_P[order](us) * np.exp(-1.0 / q) / q ** (2 * order)
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class BumpTest:
    """``phi(t, x) = psi((t - tc)/tw) psi((x - xc)/xw)``."""
    tc: float
    tw: float
    xc: float
    xw: float

    def time(self, t, order=0):
        return bump((t - self.tc) / self.tw, order) / self.tw ** order

    def space(self, x, order=0):
        return bump((x - self.xc) / self.xw, order) / self.xw ** order


def weak_residual(traj, test, nonlinear=True):
    """``|int int h phi_t - h Lap^2 phi - |grad h|^2 Lap phi + int h0 phi(0)|``.

    One-dimensional torus trajectories on a uniform time grid; the level
    ``t = 0`` is taken from ``h0``.  Trapezoid rule in ``x`` and ``t``.
    ``nonlinear=False`` drops the quadratic term (weak form of the linear
    equation).
    """
    if not traj.is_torus or traj.dim != 1:
        raise SolverError("weak_residual expects a one-dimensional torus trajectory")
    f0 = traj.fields[0]
    L = f0.L
    x = f0.grid()
    T = traj.horizon
    if test.tc - test.tw < 0 or test.tc + test.tw > T:
        raise SolverError("test function support leaves (0, T) in time")
    if test.xc - test.xw < 0 or test.xc + test.xw > L:
        raise SolverError("test function support leaves the box in space")
    times = np.concatenate([[0.0], traj.t_grid])
    fields = [traj.h0] + list(traj.fields)
    b0, b2, b4 = test.space(x, 0), test.space(x, 2), test.space(x, 4)
    dx = L / f0.n
    integrand = np.empty(times.size)
    for i, (t, f) in enumerate(zip(times, fields)):
        h = f.values()
        gx = F.gradient(f)[0].values()
        a0, a1 = test.time(t, 0), test.time(t, 1)
        quad = gx ** 2 * a0 * b2 if nonlinear else 0.0
        integrand[i] = dx * np.sum(h * a1 * b0 - h * a0 * b4 - quad)
    total = np.trapezoid(integrand, times)
    total += dx * np.sum(traj.h0.values() * test.time(0.0) * b0)
    return float(abs(total))


# ----------------------------------------------------------- self-similarity

def square_wave(a, n, L):
    """``(a/2) sign(sin(2 pi x / L))`` from its exact Fourier series, |k| < n/2."""
    k = np.fft.fftfreq(n, 1.0 / n)
    c = np.zeros(n, dtype=complex)
    odd = (np.abs(k) % 2 == 1) & (np.abs(k) < n // 2)
    c[odd] = (a / 2.0) * (-2j / (np.pi * k[odd]))
    return F.TorusField(1, n, float(L), c)


def eval_fourier(f, x, deriv=0):
    """Evaluate a one-dimensional torus field (or its derivative) at arbitrary x."""
    kap = f.ops.kappa[0]
    mult = f.coeffs * (1j * kap) ** deriv
    if deriv:
        mult = np.where(np.abs(f.ops.k[0]) == f.n // 2, 0.0, mult)
    phase = np.exp(1j * np.outer(np.asarray(x, dtype=np.float64), kap))
    return np.real(phase @ mult)


@dataclass(frozen=True)
class CollapseResult:
    collapse_error: float
    profile_residual: float
    z: np.ndarray
    profiles: tuple
    times: tuple


def _field_at(traj, t):
    if t <= 0 or t > traj.horizon * (1 + 1e-12):
        raise SolverError(f"time {t} is outside the trajectory horizon {traj.horizon}")
    i = int(np.argmin(np.abs(traj.t_grid - t)))
    if abs(traj.t_grid[i] - t) > 1e-9 * max(t, 1.0):
        raise SolverError(f"time {t} is not a stored level")
    return traj.fields[i]


def self_similar_check(traj, t_pairs, z_max=8.0, nz=801, linear=False, profile_time=None):
    """Collapse of ``h(t, z t^(1/4))`` across times, plus the profile residual.

    ``collapse_error`` is the largest pairwise sup-difference of the
    rescaled profiles on ``|z| <= z_max``, divided by the largest profile
    magnitude.  ``profile_residual`` is the sup over the same ``z`` range of
    ``|psi'''' + (psi'^2)'' - z psi' / 4|`` for ``psi = h(t_p, z t_p^(1/4))``
    (without the quadratic term when ``linear``), from spectral derivatives.
    """
    if not traj.is_torus or traj.dim != 1:
        raise SolverError("self_similar_check expects a one-dimensional torus trajectory")
    z = np.linspace(-z_max, z_max, nz)
    times = sorted({float(t) for pair in t_pairs for t in pair})
    profiles = {t: eval_fourier(_field_at(traj, t), z * t ** 0.25) for t in times}
    scale = max(float(np.max(np.abs(p))) for p in profiles.values())
    err = 0.0
    for a, b in t_pairs:
        err = max(err, float(np.max(np.abs(profiles[float(a)] - profiles[float(b)]))))
    err = err / scale if scale > 0 else err
    tp = times[-1] if profile_time is None else profile_time
    f = _field_at(traj, tp)
    x = z * tp ** 0.25
    d = [tp ** (k / 4.0) * eval_fourier(f, x, k) for k in range(5)]
    res = d[4] - 0.25 * z * d[1]
    if not linear:
        res = res + 2 * d[2] ** 2 + 2 * d[1] * d[3]
    return CollapseResult(err, float(np.max(np.abs(res))), z,
                          tuple(profiles[t] for t in times), tuple(times))


def scaled_initial(h0, lam):
    """``h0(lam x)`` on the box shrunk by ``lam`` (same Fourier coefficients)."""
    return F.TorusField(h0.dim, h0.n, h0.L / lam, h0.coeffs.copy())
