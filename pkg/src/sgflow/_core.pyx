# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; signatures and summation order mirror ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, floor, ceil, fabs

cnp.import_array()

cdef enum:
    PLAIN = 0
    MINUS_STEP = 1
    MINUS_RAMP = 2


def trig_sums(z, nodes, weights, bint odd):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] xi = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], nk = xi.shape[0], i, k
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double acc, zi
    for i in range(n):
        zi = zv[i]
        acc = 0.0
        if odd:
            for k in range(nk):
                acc += sin(xi[k] * zi) * w[k]
        else:
            for k in range(nk):
                acc += cos(xi[k] * zi) * w[k]
        o[i] = acc
    return out


cdef inline double _herm(const double[::1] v, const double[::1] sl, double z0,
                         double dz, Py_ssize_t n, double z, int kind) nogil:
    cdef double u = (z - z0) / dz
    cdef Py_ssize_t j
    cdef double th, th2, th3, out
    if u < 0.0 or u > n - 1:
        return 0.0
    j = <Py_ssize_t>floor(u)
    if j > n - 2:
        j = n - 2
    th = u - j
    th2 = th * th
    th3 = th2 * th
    out = ((2 * th3 - 3 * th2 + 1) * v[j] + (th3 - 2 * th2 + th) * dz * sl[j]
           + (-2 * th3 + 3 * th2) * v[j + 1] + (th3 - th2) * dz * sl[j + 1])
    if kind == MINUS_STEP:
        if z > 0:
            out -= 1.0
        elif z == 0:
            out -= 0.5
    elif kind == MINUS_RAMP:
        if z > 0:
            out -= z
    return out


def hermite_eval(values, slopes, double z0, double dz, z, int order_kind):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] sl = np.ascontiguousarray(slopes, dtype=np.float64)
    zarr = np.asarray(z, dtype=np.float64)
    flat = np.ascontiguousarray(zarr.ravel())
    cdef const double[::1] zv = flat
    cdef Py_ssize_t n = v.shape[0], m = zv.shape[0], i
    out = np.empty(m)
    cdef double[::1] o = out
    for i in range(m):
        o[i] = _herm(v, sl, z0, dz, n, zv[i], order_kind)
    return out.reshape(zarr.shape)


def ramp_sum(x, double y0, double dy, kappa, values, slopes, double z0,
             double dz, double s, int order_kind):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] kp = np.ascontiguousarray(kappa, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] sl = np.ascontiguousarray(slopes, dtype=np.float64)
    cdef Py_ssize_t nx = xv.shape[0], m = kp.shape[0], nt = v.shape[0]
    cdef Py_ssize_t i, j, lo, hi
    cdef double zmax = max(fabs(z0), fabs(z0 + (nt - 1) * dz))
    cdef double reach = s * zmax, acc, xi
    out = np.zeros(nx)
    cdef double[::1] o = out
    for i in range(nx):
        xi = xv[i]
        lo = <Py_ssize_t>ceil((xi - reach - y0) / dy)
        hi = <Py_ssize_t>floor((xi + reach - y0) / dy) + 1
        if lo < 0:
            lo = 0
        if hi > m:
            hi = m
        acc = 0.0
        for j in range(lo, hi):
            acc += _herm(v, sl, z0, dz, nt, (xi - (y0 + j * dy)) / s, order_kind) * kp[j]
        o[i] = acc
    return out


cdef inline double _interp(const double[:] c, double y0, double dy,
                           Py_ssize_t n, double x) nogil:
    cdef double u = (x - y0) / dy
    cdef Py_ssize_t j
    if u <= 0.0:
        return c[0]
    if u >= n - 1:
        return c[n - 1]
    j = <Py_ssize_t>floor(u)
    return c[j] + (u - j) * (c[j + 1] - c[j])


def ball_scan_1d(cum, double y0, double dy, weights, radii, centers, double power):
    cdef const double[:, ::1] C = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] rr = np.ascontiguousarray(radii, dtype=np.float64)
    cdef const double[::1] cx = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t nr = rr.shape[0], nc = cx.shape[0], nl = C.shape[0], n = C.shape[1]
    cdef Py_ssize_t a, b, l
    cdef double r, acc, w, scale
    out = np.empty((nr, nc))
    cdef double[:, ::1] o = out
    for a in range(nr):
        r = rr[a]
        scale = r ** power
        for b in range(nc):
            acc = 0.0
            for l in range(nl):
                w = W[a, l]
                if w == 0.0:
                    continue
                acc += w * (_interp(C[l], y0, dy, n, cx[b] + r)
                            - _interp(C[l], y0, dy, n, cx[b] - r))
            o[a, b] = acc / scale
    return out
