"""Pure NumPy implementations of the hot kernels.

Every function here has a compiled twin in ``_core.pyx`` with the same
signature and the same summation order; ``sgflow._backend`` picks one at
import time.
"""
import numpy as np

# order_kind codes shared with the compiled core
PLAIN, MINUS_STEP, MINUS_RAMP = 0, 1, 2


def trig_sums(z, nodes, weights, odd):
    """Return ``sum_k weights[k] * trig(nodes[k] * z[i])`` for every ``z[i]``.

    ``trig`` is ``sin`` when ``odd`` is true and ``cos`` otherwise.  The sum
    over ``k`` runs in index order so the result does not depend on how the
    ``z`` axis is chunked.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros(z.shape[0])
    fn = np.sin if odd else np.cos
    chunk = 2048
    for start in range(0, z.shape[0], chunk):
        zz = z[start:start + chunk, None] * nodes[None, :]
        terms = fn(zz) * weights[None, :]
        acc = np.zeros(zz.shape[0])
        for k in range(nodes.shape[0]):
            acc += terms[:, k]
        out[start:start + chunk] = acc
    return out


def hermite_eval(values, slopes, z0, dz, z, order_kind):
    """Cubic Hermite interpolation on the uniform grid ``z0 + j*dz``.

    Outside the tabulated range the result is 0.  ``order_kind`` selects a
    post-correction: MINUS_STEP subtracts the Heaviside step (with H(0)=1/2),
    MINUS_RAMP subtracts ``max(z, 0)``; both make antiderivative tables decay
    on both sides.
    """
    z = np.asarray(z, dtype=np.float64)
    n = values.shape[0]
    u = (z - z0) / dz
    inside = (u >= 0.0) & (u <= n - 1)
    j = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
    th = u - j
    th2 = th * th
    th3 = th2 * th
    h00 = 2 * th3 - 3 * th2 + 1
    h10 = th3 - 2 * th2 + th
    h01 = -2 * th3 + 3 * th2
    h11 = th3 - th2
    out = (h00 * values[j] + h10 * dz * slopes[j]
           + h01 * values[j + 1] + h11 * dz * slopes[j + 1])
    if order_kind == MINUS_STEP:
        out = out - np.where(z > 0, 1.0, np.where(z < 0, 0.0, 0.5))
    elif order_kind == MINUS_RAMP:
        out = out - np.maximum(z, 0.0)
    return np.where(inside, out, 0.0)


def ramp_sum(x, y0, dy, kappa, values, slopes, z0, dz, s, order_kind):
    """Local correlation ``sum_j kappa[j] * K((x[i] - y0 - j*dy) / s)``.

    ``K`` is the tabulated kernel (see :func:`hermite_eval`); only nodes
    with ``|x - y_j| <= s * zmax`` contribute, zmax being the table's reach.
    """
    x = np.asarray(x, dtype=np.float64)
    m = kappa.shape[0]
    zmax = max(abs(z0), abs(z0 + (values.shape[0] - 1) * dz))
    out = np.zeros(x.shape[0])
    reach = s * zmax
    lo = np.clip(np.ceil((x - reach - y0) / dy).astype(np.int64), 0, m)
    hi = np.clip(np.floor((x + reach - y0) / dy).astype(np.int64) + 1, 0, m)
    width = int((hi - lo).max()) if x.size else 0
    if width <= 0:
        return out
    offs = np.arange(width)
    chunk = max(1, 2_000_000 // width)
    for start in range(0, x.shape[0], chunk):
        sl = slice(start, start + chunk)
        idx = lo[sl, None] + offs[None, :]
        valid = idx < hi[sl, None]
        idx_c = np.where(valid, idx, 0)
        zz = (x[sl, None] - (y0 + idx_c * dy)) / s
        kv = hermite_eval(values, slopes, z0, dz, zz.ravel(), order_kind).reshape(zz.shape)
        terms = np.where(valid, kv * kappa[idx_c], 0.0)
        acc = np.zeros(terms.shape[0])
        for k in range(width):
            acc += terms[:, k]
        out[sl] = acc
    return out


def ball_scan_1d(cum, y0, dy, weights, radii, centers, power):
    """Parabolic-box averages for a one-dimensional sup-scan.

    ``cum[l]`` is the cumulative spatial integral of the integrand at time
    level ``l`` on the grid ``y0 + j*dy``.  For radius ``radii[a]`` and centre
    ``centers[b]`` the result is
    ``radii[a]**(-power) * sum_l weights[a, l] * (C_l(x + r) - C_l(x - r))``
    with ``C_l`` linearly interpolated.
    """
    grid = y0 + dy * np.arange(cum.shape[1])
    out = np.empty((radii.shape[0], centers.shape[0]))
    for a in range(radii.shape[0]):
        r = radii[a]
        acc = np.zeros(centers.shape[0])
        for lvl in range(cum.shape[0]):
            w = weights[a, lvl]
            if w == 0.0:
                continue
            acc += w * (np.interp(centers + r, grid, cum[lvl])
                        - np.interp(centers - r, grid, cum[lvl]))
        out[a] = acc / r ** power
    return out
