"""Numba update kernels for the KPP and G-equation solvers and the oracles."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._fields import combine

RANGE_TOL = 1e-12
FLUSH = 1e-30


# ----------------------------------------------------------------------
# KPP: explicit monotone scheme, Dirichlet boundary
# ----------------------------------------------------------------------
@njit(cache=True, inline="always")
def _reaction(form, g, u):
    if form == 0:
        return g * u * (1.0 - u)
    return g * min(u, 1.0 - u)


@njit(cache=True)
def kpp_step_2d(u, out, l0, l1, tw0, tw1, lo, span, dt, h, form, box):
    """One explicit step on the nodes within one cell of `box`.

    `box` holds the inclusive index ranges (i0, i1, j0, j1) outside of which
    u vanishes; it is enlarged in place to cover the new support. Values
    below FLUSH are set to zero, a monotone map, so order is preserved.
    Returns (range breach or nan seen, max on the ring next to the boundary).
    """
    n1, n2 = u.shape
    i0 = max(box[0] - 1, 1)
    i1 = min(box[1] + 1, n1 - 2)
    j0 = max(box[2] - 1, 1)
    j1 = min(box[3] + 1, n2 - 2)
    inv_h2 = 1.0 / (h * h)
    inv_h = 1.0 / h
    hi = 1.0 + RANGE_TOL
    bad = False
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            uc = u[i, j]
            a1 = combine(lo[0], span[0], tw0, l0[0, i, j], tw1, l1[0, i, j])
            a2 = combine(lo[1], span[1], tw0, l0[1, i, j], tw1, l1[1, i, j])
            b1 = combine(lo[2], span[2], tw0, l0[2, i, j], tw1, l1[2, i, j])
            b2 = combine(lo[3], span[3], tw0, l0[3, i, j], tw1, l1[3, i, j])
            g = combine(lo[4], span[4], tw0, l0[4, i, j], tw1, l1[4, i, j])
            uxm = u[i - 1, j]
            uxp = u[i + 1, j]
            uym = u[i, j - 1]
            uyp = u[i, j + 1]
            diff = (a1 * (uxp - 2.0 * uc + uxm) + a2 * (uyp - 2.0 * uc + uym)) * inv_h2
            adv = (max(b1, 0.0) * (uxp - uc) + min(b1, 0.0) * (uc - uxm)
                   + max(b2, 0.0) * (uyp - uc) + min(b2, 0.0) * (uc - uym)) * inv_h
            val = uc + dt * (diff + adv + _reaction(form, g, uc))
            bad |= not (val >= -RANGE_TOL and val <= hi)
            out[i, j] = val if val >= FLUSH else 0.0
    # grow the support box where the new outer rows or columns are nonzero
    if i0 < box[0] and _any_row(out, i0, j0, j1):
        box[0] = i0
    if i1 > box[1] and _any_row(out, i1, j0, j1):
        box[1] = i1
    if j0 < box[2] and _any_col(out, j0, i0, i1):
        box[2] = j0
    if j1 > box[3] and _any_col(out, j1, i0, i1):
        box[3] = j1
    ring = 0.0
    for j in range(1, n2 - 1):
        ring = max(ring, out[1, j], out[n1 - 2, j])
    for i in range(1, n1 - 1):
        ring = max(ring, out[i, 1], out[i, n2 - 2])
    return bad, ring


@njit(cache=True, inline="always")
def _any_row(a, i, j0, j1):
    for j in range(j0, j1 + 1):
        if a[i, j] != 0.0:
            return True
    return False


@njit(cache=True, inline="always")
def _any_col(a, j, i0, i1):
    for i in range(i0, i1 + 1):
        if a[i, j] != 0.0:
            return True
    return False


@njit(cache=True)
def kpp_step_1d(u, out, l0, l1, tw0, tw1, lo, span, dt, h, form, box):
    """One-dimensional counterpart of :func:`kpp_step_2d`."""
    n = u.shape[0]
    i0 = max(box[0] - 1, 1)
    i1 = min(box[1] + 1, n - 2)
    inv_h2 = 1.0 / (h * h)
    inv_h = 1.0 / h
    hi = 1.0 + RANGE_TOL
    bad = False
    for i in range(i0, i1 + 1):
        uc = u[i]
        a = combine(lo[0], span[0], tw0, l0[0, i, 0], tw1, l1[0, i, 0])
        b = combine(lo[1], span[1], tw0, l0[1, i, 0], tw1, l1[1, i, 0])
        g = combine(lo[2], span[2], tw0, l0[2, i, 0], tw1, l1[2, i, 0])
        um = u[i - 1]
        up = u[i + 1]
        diff = a * (up - 2.0 * uc + um) * inv_h2
        adv = (max(b, 0.0) * (up - uc) + min(b, 0.0) * (uc - um)) * inv_h
        val = uc + dt * (diff + adv + _reaction(form, g, uc))
        bad |= not (val >= -RANGE_TOL and val <= hi)
        out[i] = val if val >= FLUSH else 0.0
    if i0 < box[0] and out[i0] != 0.0:
        box[0] = i0
    if i1 > box[1] and out[i1] != 0.0:
        box[1] = i1
    return bad, max(out[1], out[n - 2])


# ----------------------------------------------------------------------
# G-equation: Godunov expansion term + upwind transport
# ----------------------------------------------------------------------
@njit(cache=True, inline="always")
def _psi(lo, span, tw0, l0, tw1, l1, i, j):
    return combine(lo[1], span[1], tw0, l0[1, i, j], tw1, l1[1, i, j])


@njit(cache=True)
def hj_step_2d(phi, out, l0, l1, tw0, tw1, lo, span, mean, dt, h):
    """One explicit step of u_t = c|grad u| - v.grad u.

    Layers are padded by one node; v is the centred curl of psi. Ghost
    values copy the nearest node. Returns (nan seen, max on the outer ring).
    """
    n1, n2 = phi.shape
    inv_h = 1.0 / h
    inv_2h = 0.5 / h
    bad = False
    for i in range(n1):
        im = max(i - 1, 0)
        ip = min(i + 1, n1 - 1)
        for j in range(n2):
            jm = max(j - 1, 0)
            jp = min(j + 1, n2 - 1)
            pc = phi[i, j]
            c = combine(lo[0], span[0], tw0, l0[0, i + 1, j + 1], tw1, l1[0, i + 1, j + 1])
            vx = mean[0] - (_psi(lo, span, tw0, l0, tw1, l1, i + 1, j + 2)
                            - _psi(lo, span, tw0, l0, tw1, l1, i + 1, j)) * inv_2h
            vy = mean[1] + (_psi(lo, span, tw0, l0, tw1, l1, i + 2, j + 1)
                            - _psi(lo, span, tw0, l0, tw1, l1, i, j + 1)) * inv_2h
            dxm = (pc - phi[im, j]) * inv_h
            dxp = (phi[ip, j] - pc) * inv_h
            dym = (pc - phi[i, jm]) * inv_h
            dyp = (phi[i, jp] - pc) * inv_h
            a = min(dxm, 0.0)
            b = max(dxp, 0.0)
            e = min(dym, 0.0)
            f = max(dyp, 0.0)
            grad = math.sqrt(a * a + b * b + e * e + f * f)
            adv = (max(vx, 0.0) * dxm + min(vx, 0.0) * dxp
                   + max(vy, 0.0) * dym + min(vy, 0.0) * dyp)
            val = pc + dt * (c * grad - adv)
            bad |= val != val
            out[i, j] = val
    ring = -np.inf
    for j in range(n2):
        ring = max(ring, out[0, j], out[n1 - 1, j])
    for i in range(n1):
        ring = max(ring, out[i, 0], out[i, n2 - 1])
    return bad, ring


@njit(cache=True)
def hj_step_1d(phi, out, l0, l1, tw0, tw1, lo, span, dt, h):
    n = phi.shape[0]
    inv_h = 1.0 / h
    bad = False
    for i in range(n):
        pc = phi[i]
        c = combine(lo[0], span[0], tw0, l0[0, i + 1, 0], tw1, l1[0, i + 1, 0])
        a = min((pc - phi[max(i - 1, 0)]) * inv_h, 0.0)
        b = max((phi[min(i + 1, n - 1)] - pc) * inv_h, 0.0)
        val = pc + dt * c * math.sqrt(a * a + b * b)
        bad |= val != val
        out[i] = val
    return bad, max(out[0], out[n - 1])


# ----------------------------------------------------------------------
# target bookkeeping
# ----------------------------------------------------------------------
@njit(cache=True)
def check_balls(flat, idx, starts, hit_step, step, level):
    """Mark targets whose every ball node reached `level`. Returns #pending."""
    pending = 0
    for k in range(starts.shape[0] - 1):
        if hit_step[k] >= 0:
            continue
        ok = True
        for q in range(starts[k], starts[k + 1]):
            if flat[idx[q]] < level:
                ok = False
                break
        if ok:
            hit_step[k] = step
        else:
            pending += 1
    return pending


@njit(cache=True)
def check_points(flat, idx, wts, hit_step, step, level):
    """Mark targets whose interpolated value reached `level`. Returns #pending."""
    pending = 0
    for k in range(idx.shape[0]):
        if hit_step[k] >= 0:
            continue
        val = 0.0
        for q in range(idx.shape[1]):
            val += wts[k, q] * flat[idx[k, q]]
        if val >= level:
            hit_step[k] = step
        else:
            pending += 1
    return pending


# ----------------------------------------------------------------------
# control oracles
# ----------------------------------------------------------------------
@njit(cache=True)
def frontier_advance(pts, vel, speed, dtau, controls, dirs, origin, h, size):
    """Advance every point by each control and keep extreme representatives.

    Child positions are p + dtau * (v(p) + c(p) * alpha). For every grid
    cell and each direction in `dirs` the child maximizing the projection
    on that direction is kept. Returns (kept points, escaped flag).
    """
    npt = pts.shape[0]
    nc = controls.shape[0]
    nd = dirs.shape[0]
    ncell = size * size
    best = np.full((nd, ncell), -np.inf)
    arg = np.full((nd, ncell), -1, dtype=np.int64)
    escaped = False
    for p in range(npt):
        for a in range(nc):
            x = pts[p, 0] + dtau * (vel[p, 0] + speed[p] * controls[a, 0])
            y = pts[p, 1] + dtau * (vel[p, 1] + speed[p] * controls[a, 1])
            ci = int(np.floor((x - origin[0]) / h + 0.5))
            cj = int(np.floor((y - origin[1]) / h + 0.5))
            if ci < 0 or cj < 0 or ci >= size or cj >= size:
                escaped = True
                continue
            cell = ci * size + cj
            for q in range(nd):
                s = x * dirs[q, 0] + y * dirs[q, 1]
                if s > best[q, cell]:
                    best[q, cell] = s
                    arg[q, cell] = p * nc + a
    keep = np.zeros(npt * nc, dtype=np.bool_)
    for q in range(nd):
        for cell in range(ncell):
            if arg[q, cell] >= 0:
                keep[arg[q, cell]] = True
    count = 0
    for k in range(npt * nc):
        if keep[k]:
            count += 1
    out = np.empty((count, 2))
    m = 0
    for k in range(npt * nc):
        if keep[k]:
            p = k // nc
            a = k % nc
            out[m, 0] = pts[p, 0] + dtau * (vel[p, 0] + speed[p] * controls[a, 0])
            out[m, 1] = pts[p, 1] + dtau * (vel[p, 1] + speed[p] * controls[a, 1])
            m += 1
    return out, escaped


@njit(cache=True)
def points_to_mask(pts, origin, h, size):
    mask = np.zeros((size, size), dtype=np.bool_)
    for p in range(pts.shape[0]):
        ci = int(np.floor((pts[p, 0] - origin[0]) / h + 0.5))
        cj = int(np.floor((pts[p, 1] - origin[1]) / h + 0.5))
        if 0 <= ci < size and 0 <= cj < size:
            mask[ci, cj] = True
    return mask


@njit(cache=True, inline="always")
def _bilinear(u, x, y, origin, h):
    n1, n2 = u.shape
    fx = (x - origin[0]) / h
    fy = (y - origin[1]) / h
    fx = min(max(fx, 0.0), n1 - 1.0)
    fy = min(max(fy, 0.0), n2 - 1.0)
    i = min(int(fx), n1 - 2)
    j = min(int(fy), n2 - 2)
    sx = fx - i
    sy = fy - j
    return ((1 - sx) * ((1 - sy) * u[i, j] + sy * u[i, j + 1])
            + sx * ((1 - sy) * u[i + 1, j] + sy * u[i + 1, j + 1]))


@njit(cache=True)
def dp_step(u, out, vel, speed, dtau, controls, origin, h):
    """Dynamic programming step: best value among origins reachable in dtau."""
    n1, n2 = u.shape
    for i in range(n1):
        x = origin[0] + i * h
        for j in range(n2):
            y = origin[1] + j * h
            best = -np.inf
            for a in range(controls.shape[0]):
                px = x - dtau * (vel[i, j, 0] + speed[i, j] * controls[a, 0])
                py = y - dtau * (vel[i, j, 1] + speed[i, j] * controls[a, 1])
                val = _bilinear(u, px, py, origin, h)
                if val > best:
                    best = val
            out[i, j] = best


@njit(cache=True)
def ball_min(phi, origin, h, center, radius):
    """Minimum of phi over nodes within `radius` of `center` (inf if none)."""
    best = np.inf
    n = phi.shape[0]
    i0 = max(0, int(np.ceil((center[0] - radius - origin[0]) / h)))
    i1 = min(n - 1, int(np.floor((center[0] + radius - origin[0]) / h)))
    r2 = radius * radius
    if phi.ndim == 1:
        for i in range(i0, i1 + 1):
            dx = origin[0] + i * h - center[0]
            if dx * dx <= r2 and phi[i] < best:
                best = phi[i]
        return best
    m = phi.shape[1]
    j0 = max(0, int(np.ceil((center[1] - radius - origin[1]) / h)))
    j1 = min(m - 1, int(np.floor((center[1] + radius - origin[1]) / h)))
    for i in range(i0, i1 + 1):
        dx = origin[0] + i * h - center[0]
        for j in range(j0, j1 + 1):
            dy = origin[1] + j * h - center[1]
            if dx * dx + dy * dy <= r2 and phi[i, j] < best:
                best = phi[i, j]
    return best
