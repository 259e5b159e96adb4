"""Numba kernels for the lattice random fields.

Cell values come from a counter-based hash so that any cell of the infinite
space-time lattice can be drawn lazily, in any order, with the same result.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

K_MAX = 15.0 / 16.0


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def cell_uniform(seed, stream, m, n1, n2):
    """Uniform [0, 1) value attached to lattice cell (m, n1, n2) of `stream`."""
    z = _mix(np.uint64(seed) + _GAMMA * np.uint64(stream + 1))
    z = _mix(z ^ (np.uint64(m) + _GAMMA))
    z = _mix(z ^ (np.uint64(n1) + _GAMMA * np.uint64(2)))
    z = _mix(z ^ (np.uint64(n2) + _GAMMA * np.uint64(3)))
    return np.float64(z >> np.uint64(11)) * _INV53


@njit(cache=True, inline="always")
def kernel_cdf(u):
    # biweight kernel on [-1, 1]
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    u2 = u * u
    return 0.5 + K_MAX * u * (1.0 - u2 * (2.0 / 3.0) + u2 * u2 * 0.2)


@njit(cache=True, inline="always")
def kernel_pdf(u):
    if u <= -1.0 or u >= 1.0:
        return 0.0
    w = 1.0 - u * u
    return K_MAX * w * w


@njit(cache=True, inline="always")
def axis_weights(coord, length, radius):
    """Mollified indicators of the two cells that can see `coord`.

    Returns the lower cell index c0, the weights of cells c0 and c0 + 1 and
    their derivatives with respect to `coord`. Requires radius <= length / 2.
    """
    q = np.floor(coord / length)
    s = coord - q * length
    c0 = np.int64(q)
    if radius > 0.0 and s < radius:
        k = kernel_cdf(s / radius)
        dk = kernel_pdf(s / radius) / radius
        return c0 - 1, 1.0 - k, k, -dk, dk
    if radius > 0.0 and s > length - radius:
        k = kernel_cdf((s - length) / radius)
        dk = kernel_pdf((s - length) / radius) / radius
        return c0, 1.0 - k, k, -dk, dk
    return c0, 1.0, 0.0, 0.0, 0.0


@njit(cache=True, inline="always")
def _layer1(seed, stream, m, n0, xw0, xw1):
    s = xw0 * cell_uniform(seed, stream, m, n0, 0)
    if xw1 != 0.0:
        s += xw1 * cell_uniform(seed, stream, m, n0 + 1, 0)
    return s


@njit(cache=True, inline="always")
def _layer2(seed, stream, m, n0, xw0, xw1, p0, yw0, yw1):
    a = yw0 * cell_uniform(seed, stream, m, n0, p0)
    if yw1 != 0.0:
        a += yw1 * cell_uniform(seed, stream, m, n0, p0 + 1)
    s = xw0 * a
    if xw1 != 0.0:
        b = yw0 * cell_uniform(seed, stream, m, n0 + 1, p0)
        if yw1 != 0.0:
            b += yw1 * cell_uniform(seed, stream, m, n0 + 1, p0 + 1)
        s += xw1 * b
    return s


@njit(cache=True, inline="always")
def combine(lo, span, tw0, s0, tw1, s1):
    """Map a time blend of two layers onto the coefficient range."""
    return lo + span * (tw0 * s0 + tw1 * s1)


@njit(cache=True)
def grid_layers(seed, streams, m, axes_c0, axes_w0, axes_w1):
    """Spatial layer values of each stream for time cell m on a tensor grid.

    axes_* have shape (d, N); the result has shape (nstreams, N[, N]).
    """
    d = axes_c0.shape[0]
    n = axes_c0.shape[1]
    ns = streams.shape[0]
    if d == 1:
        out1 = np.empty((ns, n))
        for f in range(ns):
            for i in range(n):
                out1[f, i] = _layer1(seed, streams[f], m, axes_c0[0, i],
                                     axes_w0[0, i], axes_w1[0, i])
        return out1.reshape((ns, n, 1))
    out = np.empty((ns, n, n))
    for f in range(ns):
        for i in range(n):
            for j in range(n):
                out[f, i, j] = _layer2(seed, streams[f], m,
                                       axes_c0[0, i], axes_w0[0, i], axes_w1[0, i],
                                       axes_c0[1, j], axes_w0[1, j], axes_w1[1, j])
    return out


@njit(cache=True)
def point_values(seed, streams, lo, span, tcoord, xcoord, tlen, xlen, radius):
    """Coefficient values and spatial gradients at scattered points.

    tcoord has shape (P,), xcoord (P, d). Returns values (P, nstreams) and
    gradients (P, nstreams, d).
    """
    npt = xcoord.shape[0]
    d = xcoord.shape[1]
    ns = streams.shape[0]
    val = np.empty((npt, ns))
    grad = np.zeros((npt, ns, d))
    for p in range(npt):
        m0, tw0, tw1, _, _ = axis_weights(tcoord[p], tlen, radius)
        n0, xw0, xw1, dx0, dx1 = axis_weights(xcoord[p, 0], xlen, radius)
        if d == 2:
            p0, yw0, yw1, dy0, dy1 = axis_weights(xcoord[p, 1], xlen, radius)
        for f in range(ns):
            st = streams[f]
            if d == 1:
                s0 = _layer1(seed, st, m0, n0, xw0, xw1)
                g0 = _layer1(seed, st, m0, n0, dx0, dx1)
                s1 = 0.0
                g1 = 0.0
                if tw1 != 0.0:
                    s1 = _layer1(seed, st, m0 + 1, n0, xw0, xw1)
                    g1 = _layer1(seed, st, m0 + 1, n0, dx0, dx1)
                val[p, f] = combine(lo[f], span[f], tw0, s0, tw1, s1)
                grad[p, f, 0] = span[f] * (tw0 * g0 + tw1 * g1)
            else:
                s0 = _layer2(seed, st, m0, n0, xw0, xw1, p0, yw0, yw1)
                gx0 = _layer2(seed, st, m0, n0, dx0, dx1, p0, yw0, yw1)
                gy0 = _layer2(seed, st, m0, n0, xw0, xw1, p0, dy0, dy1)
                s1 = 0.0
                gx1 = 0.0
                gy1 = 0.0
                if tw1 != 0.0:
                    s1 = _layer2(seed, st, m0 + 1, n0, xw0, xw1, p0, yw0, yw1)
                    gx1 = _layer2(seed, st, m0 + 1, n0, dx0, dx1, p0, yw0, yw1)
                    gy1 = _layer2(seed, st, m0 + 1, n0, xw0, xw1, p0, dy0, dy1)
                val[p, f] = combine(lo[f], span[f], tw0, s0, tw1, s1)
                grad[p, f, 0] = span[f] * (tw0 * gx0 + tw1 * gx1)
                grad[p, f, 1] = span[f] * (tw0 * gy0 + tw1 * gy1)
    return val, grad


@njit(cache=True)
def grid_combine(layer0, layer1, tw0, tw1, lo, span):
    """Coefficient arrays on a grid from two time layers."""
    out = np.empty_like(layer0)
    ns, n1, n2 = layer0.shape
    for f in range(ns):
        for i in range(n1):
            for j in range(n2):
                out[f, i, j] = combine(lo[f], span[f], tw0, layer0[f, i, j],
                                       tw1, layer1[f, i, j])
    return out
