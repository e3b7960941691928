"""Additive spectral noise: the Ornstein-Uhlenbeck convolution and the
forced equation, either as a mild fixed point with the noise response
frozen, or as a random PDE for ``v = h - Z``.

Random numbers come from a Philox counter generator keyed by
``(seed, stream_id)`` with the step index in the counter, so any step of
any path can be regenerated independently of the others.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import field as F
from . import solver as S
from .norms import x_norm
from .trajectory import Trajectory, graded_grid


class NoiseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Per-mode amplitudes ``sigma`` in the torus FFT layout."""
    dim: int
    n: int
    L: float
    sigma: np.ndarray
    cutoff: float
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        ops = F.TorusOps.get(self.dim, self.n, self.L)
        if self.sigma.shape != ops.k4.shape:
            raise NoiseError("sigma must match the torus grid")
        if np.any(self.sigma < 0):
            raise NoiseError("sigma must be nonnegative")
        kabs = np.sqrt(sum(k ** 2 for k in ops.k)) * np.ones(ops.k4.shape)
        if np.any(self.sigma[kabs > self.cutoff] != 0) or self.sigma.flat[0] != 0:
            raise NoiseError("sigma must vanish at k = 0 and beyond the cutoff")
        flipped = np.roll(np.flip(self.sigma), 1, axis=tuple(range(self.dim)))
        if np.any(flipped != self.sigma):
            raise NoiseError("sigma must be symmetric under k -> -k")

    @property
    def ops(self):
        return F.TorusOps.get(self.dim, self.n, self.L)

    def with_stream(self, seed=None, stream_id=None):
        return NoiseSpec(self.dim, self.n, self.L, self.sigma, self.cutoff,
                         self.seed if seed is None else seed,
                         self.stream_id if stream_id is None else stream_id)

    def scaled(self, factor):
        return NoiseSpec(self.dim, self.n, self.L, factor * self.sigma, self.cutoff,
                         self.seed, self.stream_id)


def power_law_noise(dim, n, L, sigma0, gamma, cutoff, seed=0, stream_id=0):
    """``sigma_k = sigma0 |k|^-gamma`` for ``0 < |k| <= cutoff`` (integer k)."""
    ops = F.TorusOps.get(dim, n, L)
    kabs = np.sqrt(sum(k ** 2 for k in ops.k)) * np.ones(ops.k4.shape)
    if cutoff >= n / 2:
        raise NoiseError("cutoff must stay below the Nyquist mode")
    sigma = np.where((kabs > 0) & (kabs <= cutoff), sigma0 * np.where(kabs > 0, kabs, 1.0) ** -gamma, 0.0)
    return NoiseSpec(dim, n, float(L), sigma, float(cutoff), int(seed), int(stream_id))


def _normals(spec, step):
    """Hermitian-paired complex normals with ``E|xi_k|^2 = 1`` for ``k != -k``."""
    bitgen = np.random.Philox(key=np.array([spec.seed, spec.stream_id], dtype=np.uint64),
                              counter=np.array([0, step, 0, 0], dtype=np.uint64))
    rng = np.random.Generator(bitgen)
    shape = spec.sigma.shape
    xi = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    partner = np.conj(np.roll(np.flip(xi), 1, axis=tuple(range(spec.dim))))
    return (xi + partner) / math.sqrt(2.0)


def ou_coefficients(spec, t_grid):
    """Coefficient stack of ``Z`` at ``t_grid`` (exact per-mode transitions)."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size == 0 or t_grid[0] <= 0 or np.any(np.diff(t_grid) <= 0):
        raise NoiseError("t_grid must be positive and increasing")
    lam = spec.ops.k4
    z = np.zeros(lam.shape, dtype=complex)
    out = np.empty((t_grid.size,) + lam.shape, dtype=complex)
    prev = 0.0
    live = spec.sigma > 0
    lam_safe = np.where(live, lam, 1.0)
    for i, t in enumerate(t_grid):
        dt = t - prev
        decay = np.exp(-dt * lam)
        amp = np.where(live, spec.sigma * np.sqrt(-np.expm1(-2 * dt * lam_safe) / (2 * lam_safe)), 0.0)
        z = decay * z + amp * _normals(spec, i)
        out[i] = z
        prev = t
    return out


def ou_convolution(spec, t_grid):
    """Trajectory of ``Z(t) = int_0^t exp(-(t-s)A) dW`` sampled exactly in law."""
    stack = ou_coefficients(spec, t_grid)
    zero = F.TorusField.zeros(spec.n, spec.L, spec.dim)
    fields = [zero.with_coeffs(c) for c in stack]
    prov = {"stochastic": {"seed": spec.seed, "stream_id": spec.stream_id}}
    return Trajectory(np.asarray(t_grid, dtype=np.float64), fields, zero, prov)


def ou_variance(sigma_k, kappa4, t):
    """``E|Z_k(t)|^2 = sigma_k^2 (1 - exp(-2 t |kappa|^4)) / (2 |kappa|^4)``."""
    return sigma_k ** 2 * -np.expm1(-2 * t * kappa4) / (2 * kappa4)


MODES = ("mild_direct", "random_pde")


def spde_solve(h0, spec, R, mode="mild_direct", J=64, max_iter=60, tol=1e-12, nonlinear=True):
    """Solve the forced equation on ``(0, R^4]`` for one noise path.

    ``mild_direct`` iterates ``h = exp(-tA) h0 + Z - V(h, h)``.
    ``random_pde`` steps ``v = h - Z`` through
    ``v_t + Lap^2 v = -Lap(|grad v|^2 + 2 grad v.grad Z + |grad Z|^2)``
    with the exponential-integrator scheme on the same grid and returns
    ``v + Z``.  Both use the same ``Z`` path.
    """
    if mode not in MODES:
        raise NoiseError(f"mode must be one of {MODES}")
    if (h0.dim, h0.n, float(h0.L)) != (spec.dim, spec.n, float(spec.L)):
        raise NoiseError("h0 and the noise must live on the same torus")
    tg = graded_grid(R ** 4, J)
    Z = ou_coefficients(spec, tg)
    ops = h0.ops
    prov = {"stochastic": {"seed": spec.seed, "stream_id": spec.stream_id, "mode": mode}}
    if mode == "mild_direct":
        if nonlinear:
            H, info = S.picard_iterate(h0, tg, Z, max_iter, tol)
            prov["picard"] = info
        else:
            H = np.stack([np.exp(-t * ops.k4) * h0.coeffs for t in tg]) + Z
    else:
        H = np.empty_like(Z)
        v = h0.coeffs
        prev_t, prev_z = 0.0, np.zeros_like(h0.coeffs)
        for i, t in enumerate(tg):
            zs = (prev_z, Z[i])

            def extra(u, which, zs=zs):
                # cross terms of Lap |grad(v + Z)|^2 not contained in Lap |grad v|^2
                zc = zs[which]
                return ops.k2 * (2 * ops.grad_dot(u, zc) + ops.grad_dot(zc, None))

            if nonlinear:
                v = S._step(ops, v, t - prev_t, "etdrk2", True, extra)
            else:
                v = np.exp(-(t - prev_t) * ops.k4) * v
            H[i] = v + Z[i]
            prev_t, prev_z = t, Z[i]
    fields = [h0.with_coeffs(c) for c in H]
    return Trajectory(tg, fields, h0, prov)


def z_regularity_profile(spec, R_list, levels=40, substeps=1):
    """``[(R, ||Z||_{X_R})]`` along one path for a decreasing ``R_list``.

    One path is sampled on a geometric grid below ``max(R)^4`` and every
    ``R`` reads from it, so the profile is monotone in ``R`` by nesting.
    """
    R_list = [float(r) for r in R_list]
    if any(b >= a for a, b in zip(R_list, R_list[1:])):
        raise NoiseError("R_list must be strictly decreasing")
    T = R_list[0] ** 4
    j = np.arange(levels * substeps + 1)
    tg = (T * 2.0 ** (-j / substeps))[::-1]
    traj = ou_convolution(spec, tg)
    return [(R, x_norm(traj, R).value) for R in R_list]
