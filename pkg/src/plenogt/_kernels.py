"""Compiled inner loops for sampling, camera tracing and tiled rendering.

Everything here is scalar numba code operating on packed parameter arrays
built by :mod:`plenogt.camera` and :mod:`plenogt.render`. Per-pixel sums run
sequentially in sample order, so results do not depend on the thread count.
"""

from __future__ import annotations

import math
import os

if "PLENOGT_NUM_THREADS" in os.environ and "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = os.environ["PLENOGT_NUM_THREADS"]

import numba as nb
import numpy as np

nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# trace status codes
OK = 0
MLA_GAP = 1
STOP = 2
MOUNT = 3
TIR = 4

# diffusor modes
DIFF_NONE = 0
DIFF_UNIFORM = 1
DIFF_COSINE = 2

# element kinds in the objective table
ELEM_SURFACE = 0
ELEM_STOP = 1

# columns of the MLA parameter vector
MLA_ENABLED, MLA_DIST, MLA_PITCH, MLA_IOR, MLA_OFFX, MLA_OFFY = 0, 1, 2, 3, 4, 5
MLA_R0, MLA_R1, MLA_R2, MLA_PASS, MLA_NRADII = 6, 7, 8, 9, 10
MLA_NPARAMS = 11

# shading kinds
SHADE_UNIFORM = 0
SHADE_CHECKER = 1
SHADE_DOTS = 2

SQRT3_2 = math.sqrt(3.0) / 2.0
TILE = 32

_JIT = dict(nogil=True, cache=True, error_model="numpy")


@nb.njit(inline="always", **_JIT)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(**_JIT)
def pixel_key(seed, scale, width, col, row):
    key = mix64(np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15))
    key = mix64(key ^ (np.uint64(scale) * np.uint64(0xD6E8FEB86659FD93)))
    return mix64(key ^ (np.uint64(row) * np.uint64(width) + np.uint64(col)))


@nb.njit(inline="always", **_JIT)
def uniform01(key, counter):
    h = mix64(key ^ (np.uint64(counter) * np.uint64(0xD1B54A32D192ED03)))
    return np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(inline="always", **_JIT)
def sincos_turn(u):
    """(cos, sin) of 2*pi*u for u in [0, 1) without libm calls, so block loops vectorise.

    Quadrant reduction to |r| <= pi/4 followed by Taylor polynomials; agrees with
    libm to a few ulp.
    """
    q = np.rint(4.0 * u)
    r = (u - 0.25 * q) * (2.0 * math.pi)
    r2 = r * r
    s = r * (1.0 + r2 * (-1.0 / 6.0 + r2 * (1.0 / 120.0 + r2 * (-1.0 / 5040.0 + r2 * (
        1.0 / 362880.0 + r2 * (-1.0 / 39916800.0 + r2 * (1.0 / 6227020800.0 + r2 * (
            -1.0 / 1307674368000.0))))))))
    c = 1.0 + r2 * (-0.5 + r2 * (1.0 / 24.0 + r2 * (-1.0 / 720.0 + r2 * (1.0 / 40320.0 + r2 * (
        -1.0 / 3628800.0 + r2 * (1.0 / 479001600.0 + r2 * (-1.0 / 87178291200.0)))))))
    quad = q - 4.0 * math.floor(q * 0.25)
    cos_v = c if quad == 0.0 else (-s if quad == 1.0 else (-c if quad == 2.0 else s))
    sin_v = s if quad == 0.0 else (c if quad == 1.0 else (-s if quad == 2.0 else -c))
    return cos_v, sin_v


@nb.njit(inline="always", **_JIT)
def sample_sensor_ray(key, k, strata, x0, y0, foot, diff_mode, diff_param):
    """Sample ``k`` of a pixel whose footprint is centred at (x0, y0)."""
    u1 = uniform01(key, 4 * k)
    u2 = uniform01(key, 4 * k + 1)
    x = x0 + foot * (((k % strata) + u1) / strata - 0.5)
    y = y0 + foot * (((k // strata) + u2) / strata - 0.5)
    if diff_mode == DIFF_NONE:
        return x, y, 0.0, 0.0, 1.0
    u3 = uniform01(key, 4 * k + 2)
    u4 = uniform01(key, 4 * k + 3)
    if diff_mode == DIFF_UNIFORM:
        # diff_param = cos(theta_max)
        cos_t = 1.0 - u3 * (1.0 - diff_param)
        sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    else:
        # diff_param = sin^2(theta_max)
        s2 = u3 * diff_param
        sin_t = math.sqrt(s2)
        cos_t = math.sqrt(1.0 - s2)
    cos_p, sin_p = sincos_turn(u4)
    return x, y, sin_t * cos_p, sin_t * sin_p, cos_t


@nb.njit(inline="always", **_JIT)
def refract3(dx, dy, dz, nx, ny, nz, eta):
    """Snell refraction with relative index eta = n1/n2; ok flag false on TIR."""
    cos_i = -(dx * nx + dy * ny + dz * nz)
    if cos_i < 0.0:
        nx, ny, nz = -nx, -ny, -nz
        cos_i = -cos_i
    k = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    if k < 0.0:
        return False, dx, dy, dz
    f = eta * cos_i - math.sqrt(k)
    # unit in, unit out: no renormalisation needed
    return True, eta * dx + f * nx, eta * dy + f * ny, eta * dz + f * nz


@nb.njit(inline="always", **_JIT)
def nearest_cell(px, py, pitch, offx, offy):
    qx = px - offx
    qy = py - offy
    jf = qy / (SQRT3_2 * pitch)
    i_f = (qx - 0.5 * pitch * jf) / pitch
    i0 = np.int64(np.rint(i_f))
    j0 = np.int64(np.rint(jf))
    best_i = i0
    best_j = j0
    best_d = np.inf
    for dj in range(-1, 2):
        for di in range(-1, 2):
            ci = i0 + di
            cj = j0 + dj
            cx = ci * pitch + cj * (0.5 * pitch)
            cy = cj * (SQRT3_2 * pitch)
            d2 = (qx - cx) ** 2 + (qy - cy) ** 2
            if d2 < best_d:
                best_d = d2
                best_i = ci
                best_j = cj
    return best_i, best_j, best_d


@nb.njit(inline="always", **_JIT)
def trace_camera(x, y, dx, dy, dz, mla, elems):
    """Trace a sensor ray (camera frame, +z towards the scene) out of the camera.

    Returns ``(status, ox, oy, oz, dx, dy, dz)``; the ray is only meaningful
    when status == OK.
    """
    z = 0.0
    if mla[MLA_ENABLED] != 0.0:
        if dz <= 0.0:
            return MLA_GAP, x, y, z, dx, dy, dz
        dist = mla[MLA_DIST]
        t = dist / dz
        x += t * dx
        y += t * dy
        z = dist
        pitch = mla[MLA_PITCH]
        ci, cj, d2 = nearest_cell(x, y, pitch, mla[MLA_OFFX], mla[MLA_OFFY])
        if d2 > 0.25 * pitch * pitch:
            if mla[MLA_PASS] == 0.0:
                return MLA_GAP, x, y, z, dx, dy, dz
        else:
            lens_type = (ci - cj) % 3
            if mla[MLA_NRADII] == 3.0:
                radius = mla[MLA_R0 + lens_type]
            else:
                radius = mla[MLA_R0]
            ior = mla[MLA_IOR]
            ok, dx, dy, dz = refract3(dx, dy, dz, 0.0, 0.0, -1.0, 1.0 / ior)
            if not ok:
                return TIR, x, y, z, dx, dy, dz
            ox = x - (mla[MLA_OFFX] + ci * pitch + cj * (0.5 * pitch))
            oy = y - (mla[MLA_OFFY] + cj * (SQRT3_2 * pitch))
            inv_r = 1.0 / radius
            h = math.sqrt(radius * radius - ox * ox - oy * oy)
            ok, dx, dy, dz = refract3(dx, dy, dz, ox * inv_r, oy * inv_r, h * inv_r, ior)
            if not ok:
                return TIR, x, y, z, dx, dy, dz
    for e in range(elems.shape[0]):
        kind = elems[e, 0]
        zv = elems[e, 1]
        if kind == ELEM_STOP:
            if dz == 0.0:
                return STOP, x, y, z, dx, dy, dz
            t = (zv - z) / dz
            if t < 0.0:
                return STOP, x, y, z, dx, dy, dz
            x += t * dx
            y += t * dy
            z = zv
            r = elems[e, 3]
            if r <= 0.0 or x * x + y * y > r * r:
                return STOP, x, y, z, dx, dy, dz
            continue
        c = elems[e, 2]
        oz = z - zv
        a = c
        b = c * (x * dx + y * dy + oz * dz) - dz
        cc = c * (x * x + y * y + oz * oz) - 2.0 * oz
        disc = b * b - a * cc
        if disc < 0.0:
            return MOUNT, x, y, z, dx, dy, dz
        root = math.sqrt(disc)
        denom = -b + root if -b >= 0.0 else -b - root
        if denom == 0.0:
            return MOUNT, x, y, z, dx, dy, dz
        t = cc / denom
        if t < 0.0:
            return MOUNT, x, y, z, dx, dy, dz
        x += t * dx
        y += t * dy
        z += t * dz
        ap = elems[e, 3]
        if x * x + y * y > ap * ap:
            return MOUNT, x, y, z, dx, dy, dz
        # (c*x, c*y, c*(z - zv) - 1) has unit length on the sphere
        ok, dx, dy, dz = refract3(dx, dy, dz, c * x, c * y, c * (z - zv) - 1.0, elems[e, 6])
        if not ok:
            return TIR, x, y, z, dx, dy, dz
    return OK, x, y, z, dx, dy, dz


@nb.njit(**_JIT)
def trace_batch(o, d, mla, elems):
    out = np.empty((o.shape[0], 7))
    for r in range(o.shape[0]):
        st, x, y, z, dx, dy, dz = trace_camera(o[r, 0], o[r, 1], d[r, 0], d[r, 1], d[r, 2],
                                               mla, elems)
        out[r, 0] = st
        out[r, 1] = x
        out[r, 2] = y
        out[r, 3] = z
        out[r, 4] = dx
        out[r, 5] = dy
        out[r, 6] = dz
    return out


@nb.njit(**_JIT)
def pixel_samples(seed, scale, width, col, row, n, x0, y0, foot, diff_mode, diff_param):
    """All ``n`` sensor rays of one pixel as arrays (camera frame)."""
    key = pixel_key(seed, scale, width, col, row)
    strata = np.int64(math.ceil(math.sqrt(n)))
    if strata * strata < n:
        strata += 1
    out = np.empty((n, 5))
    for k in range(n):
        x, y, dx, dy, dz = sample_sensor_ray(key, k, strata, x0, y0, foot, diff_mode, diff_param)
        out[k, 0] = x
        out[k, 1] = y
        out[k, 2] = dx
        out[k, 3] = dy
        out[k, 4] = dz
    return out


@nb.njit(**_JIT)
def _strata(n):
    s = np.int64(math.ceil(math.sqrt(n)))
    if s * s < n:
        s += 1
    return s


# --------------------------------------------------------------------------
# block-structured tracing: same per-sample arithmetic as trace_camera, laid
# out over BLOCK lanes without early exits so LLVM can vectorise it

BLOCK = 64


@nb.njit(inline="always", **_JIT)
def _sample_block(key, start, m, strata, x0, y0, foot, diff_mode, diff_param,
                  x, y, z, dx, dy, dz, alive):
    for q in range(m):
        k = start + q
        u1 = uniform01(key, 4 * k)
        u2 = uniform01(key, 4 * k + 1)
        x[q] = x0 + foot * (((k % strata) + u1) / strata - 0.5)
        y[q] = y0 + foot * (((k // strata) + u2) / strata - 0.5)
        z[q] = 0.0
        dx[q] = 0.0
        dy[q] = 0.0
        dz[q] = 1.0
        alive[q] = 1.0
    if diff_mode == DIFF_NONE:
        return
    for q in range(m):
        k = start + q
        u3 = uniform01(key, 4 * k + 2)
        u4 = uniform01(key, 4 * k + 3)
        if diff_mode == DIFF_UNIFORM:
            cos_t = 1.0 - u3 * (1.0 - diff_param)
            sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
        else:
            s2 = u3 * diff_param
            sin_t = math.sqrt(s2)
            cos_t = math.sqrt(1.0 - s2)
        cos_p, sin_p = sincos_turn(u4)
        dx[q] = sin_t * cos_p
        dy[q] = sin_t * sin_p
        dz[q] = cos_t


@nb.njit(inline="always", **_JIT)
def _trace_block(m, x, y, z, dx, dy, dz, alive, mla, elems):
    if mla[MLA_ENABLED] != 0.0:
        dist = mla[MLA_DIST]
        pitch = mla[MLA_PITCH]
        offx = mla[MLA_OFFX]
        offy = mla[MLA_OFFY]
        ior = mla[MLA_IOR]
        three = mla[MLA_NRADII] == 3.0
        r0 = mla[MLA_R0]
        r1 = mla[MLA_R1] if three else r0
        r2 = mla[MLA_R2] if three else r0
        passthrough = mla[MLA_PASS] != 0.0
        eta_in = 1.0 / ior
        for q in range(m):
            ddz = dz[q]
            t = dist / ddz
            px = x[q] + t * dx[q]
            py = y[q] + t * dy[q]
            qx = px - offx
            qy = py - offy
            jf = qy / (SQRT3_2 * pitch)
            i_f = (qx - 0.5 * pitch * jf) / pitch
            i0 = np.rint(i_f)
            j0 = np.rint(jf)
            best_i = i0
            best_j = j0
            best_d = np.inf
            for dj in range(-1, 2):
                for di in range(-1, 2):
                    ci = i0 + di
                    cj = j0 + dj
                    cx = ci * pitch + cj * (0.5 * pitch)
                    cy = cj * (SQRT3_2 * pitch)
                    d2 = (qx - cx) ** 2 + (qy - cy) ** 2
                    if d2 < best_d:
                        best_d = d2
                        best_i = ci
                        best_j = cj
            inside = best_d <= 0.25 * pitch * pitch
            diff = best_i - best_j
            lens_type = diff - 3.0 * math.floor(diff / 3.0)
            radius = r0 if lens_type == 0.0 else (r1 if lens_type == 1.0 else r2)
            # flat entry face, normal (0, 0, -1)
            ex = dx[q]
            ey = dy[q]
            ez = ddz
            cos_i = ez
            nz_sign = -1.0
            if cos_i < 0.0:
                nz_sign = 1.0
                cos_i = -cos_i
            kk = 1.0 - eta_in * eta_in * (1.0 - cos_i * cos_i)
            f = eta_in * cos_i - math.sqrt(max(kk, 0.0))
            ok1 = kk >= 0.0
            ex2 = eta_in * ex
            ey2 = eta_in * ey
            ez2 = eta_in * ez + f * nz_sign
            # curved exit face with the cell's sphere normal
            ox = px - (offx + best_i * pitch + best_j * (0.5 * pitch))
            oy = py - (offy + best_j * (SQRT3_2 * pitch))
            inv_r = 1.0 / radius
            h = math.sqrt(max(radius * radius - ox * ox - oy * oy, 0.0))
            nx = ox * inv_r
            ny = oy * inv_r
            nz = h * inv_r
            cos_i = -(ex2 * nx + ey2 * ny + ez2 * nz)
            if cos_i < 0.0:
                nx = -nx
                ny = -ny
                nz = -nz
                cos_i = -cos_i
            kk2 = 1.0 - ior * ior * (1.0 - cos_i * cos_i)
            f2 = ior * cos_i - math.sqrt(max(kk2, 0.0))
            ok2 = kk2 >= 0.0
            lensed = inside
            blocked = (ddz <= 0.0) | ((not inside) & (not passthrough)) | (lensed & ((not ok1) | (not ok2)))
            alive[q] = 0.0 if blocked else alive[q]
            x[q] = px
            y[q] = py
            z[q] = dist
            if lensed:
                dx[q] = ior * ex2 + f2 * nx
                dy[q] = ior * ey2 + f2 * ny
                dz[q] = ior * ez2 + f2 * nz
    for e in range(elems.shape[0]):
        zv = elems[e, 1]
        c = elems[e, 2]
        ap = elems[e, 3]
        eta = elems[e, 6]
        if elems[e, 0] == ELEM_STOP:
            closed = ap <= 0.0
            for q in range(m):
                t = (zv - z[q]) / dz[q]
                xn = x[q] + t * dx[q]
                yn = y[q] + t * dy[q]
                bad = closed | (dz[q] == 0.0) | (t < 0.0) | (xn * xn + yn * yn > ap * ap)
                alive[q] = 0.0 if bad else alive[q]
                x[q] = xn
                y[q] = yn
                z[q] = zv
            continue
        for q in range(m):
            oz = z[q] - zv
            b = c * (x[q] * dx[q] + y[q] * dy[q] + oz * dz[q]) - dz[q]
            cc = c * (x[q] * x[q] + y[q] * y[q] + oz * oz) - 2.0 * oz
            disc = b * b - c * cc
            root = math.sqrt(max(disc, 0.0))
            denom = -b + root if -b >= 0.0 else -b - root
            t = cc / denom
            xn = x[q] + t * dx[q]
            yn = y[q] + t * dy[q]
            zn = z[q] + t * dz[q]
            nx = c * xn
            ny = c * yn
            nz = c * (zn - zv) - 1.0
            cos_i = -(dx[q] * nx + dy[q] * ny + dz[q] * nz)
            if cos_i < 0.0:
                nx = -nx
                ny = -ny
                nz = -nz
                cos_i = -cos_i
            kk = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
            f = eta * cos_i - math.sqrt(max(kk, 0.0))
            bad = (disc < 0.0) | (denom == 0.0) | (t < 0.0) | (xn * xn + yn * yn > ap * ap) | (kk < 0.0)
            alive[q] = 0.0 if bad else alive[q]
            x[q] = xn
            y[q] = yn
            z[q] = zn
            dx[q] = eta * dx[q] + f * nx
            dy[q] = eta * dy[q] + f * ny
            dz[q] = eta * dz[q] + f * nz


@nb.njit(inline="always", **_JIT)
def _plane_block(m, x, y, z, dx, dy, dz, alive, pl, hu, hv, hit):
    """Intersect camera-frame lanes with a world plane; writes (u, v, hit)."""
    for q in range(m):
        # camera frame -> world frame (x, -y, -z)
        ox = x[q]
        oy = -y[q]
        oz = -z[q]
        wx = dx[q]
        wy = -dy[q]
        wz = -dz[q]
        denom = wx * pl[3] + wy * pl[4] + wz * pl[5]
        t = ((pl[0] - ox) * pl[3] + (pl[1] - oy) * pl[4] + (pl[2] - oz) * pl[5]) / denom
        px = ox + t * wx
        py = oy + t * wy
        pz = oz + t * wz
        rx = px - pl[6]
        ry = py - pl[7]
        rz = pz - pl[8]
        rb = rx * pl[9] + ry * pl[10] + rz * pl[11]
        rc = rx * pl[12] + ry * pl[13] + rz * pl[14]
        hu[q] = pl[15] * rb + pl[16] * rc
        hv[q] = pl[17] * rb + pl[18] * rc
        ok = (alive[q] != 0.0) & (abs(denom) >= 1e-15) & (t >= 0.0)
        hit[q] = 1.0 if ok else 0.0


@nb.njit(parallel=True, **_JIT)
def render_positional_kernel(width, height, scale, cx, cy, pitch, n, seed,
                             diff_mode, diff_param, mla, elems, planes,
                             col0, row0, win_w, win_h):
    """Packed positional render: per plane (sum u / n, sum v / n, hits / n).

    Only the window [col0, col0 + win_w) x [row0, row0 + win_h) of the
    width x height image is traced; samples depend on global pixel indices, so
    a window equals the same crop of a full render bit for bit.
    """
    n_planes = planes.shape[0]
    out = np.zeros((n_planes, win_h, win_w, 3), dtype=np.float32)
    tiles_x = (win_w + TILE - 1) // TILE
    tiles_y = (win_h + TILE - 1) // TILE
    strata = _strata(n)
    foot = pitch / scale
    for tile in nb.prange(tiles_x * tiles_y):
        ty = tile // tiles_x
        tx = tile % tiles_x
        x = np.empty(BLOCK)
        y = np.empty(BLOCK)
        z = np.empty(BLOCK)
        dx = np.empty(BLOCK)
        dy = np.empty(BLOCK)
        dz = np.empty(BLOCK)
        alive = np.empty(BLOCK)
        hu = np.empty(BLOCK)
        hv = np.empty(BLOCK)
        hit = np.empty(BLOCK)
        su = np.zeros(n_planes)
        sv = np.zeros(n_planes)
        hits = np.zeros(n_planes)
        for lrow in range(ty * TILE, min(win_h, (ty + 1) * TILE)):
            row = row0 + lrow
            y0 = -(row / scale - cy) * pitch
            for lcol in range(tx * TILE, min(win_w, (tx + 1) * TILE)):
                col = col0 + lcol
                x0 = -(col / scale - cx) * pitch
                key = pixel_key(seed, scale, width, col, row)
                su[:] = 0.0
                sv[:] = 0.0
                hits[:] = 0.0
                for start in range(0, n, BLOCK):
                    m = min(BLOCK, n - start)
                    _sample_block(key, start, m, strata, x0, y0, foot, diff_mode, diff_param,
                                  x, y, z, dx, dy, dz, alive)
                    _trace_block(m, x, y, z, dx, dy, dz, alive, mla, elems)
                    for p in range(n_planes):
                        _plane_block(m, x, y, z, dx, dy, dz, alive, planes[p], hu, hv, hit)
                        acc_u = su[p]
                        acc_v = sv[p]
                        acc_h = hits[p]
                        for q in range(m):
                            if hit[q] != 0.0:
                                acc_u += hu[q]
                                acc_v += hv[q]
                                acc_h += 1.0
                        su[p] = acc_u
                        sv[p] = acc_v
                        hits[p] = acc_h
                for p in range(n_planes):
                    out[p, lrow, lcol, 0] = su[p] / n
                    out[p, lrow, lcol, 1] = sv[p] / n
                    out[p, lrow, lcol, 2] = hits[p] / n
    return out


@nb.njit(inline="always", **_JIT)
def shade_uv(u, v, shading):
    """shading: kind, rows, cols, size, dot_radius, margin, dark(3), light(3), background(3)."""
    kind = shading[0]
    rows = shading[1]
    cols = shading[2]
    size = shading[3]
    margin = shading[5]
    w = (cols + 1.0) * size
    h = (rows + 1.0) * size
    if kind == SHADE_UNIFORM:
        w = shading[1]
        h = shading[2]
    if u < -margin or v < -margin or u > w + margin or v > h + margin:
        return shading[12], shading[13], shading[14]
    if kind == SHADE_UNIFORM:
        return shading[6], shading[7], shading[8]
    if u < 0.0 or v < 0.0 or u > w or v > h:
        return shading[9], shading[10], shading[11]
    if kind == SHADE_CHECKER:
        parity = (np.int64(math.floor(u / size)) + np.int64(math.floor(v / size))) % 2
        if parity == 0:
            return shading[6], shading[7], shading[8]
        return shading[9], shading[10], shading[11]
    # dot grid: dots on the interior lattice points, none on the border
    ci = math.floor(u / size + 0.5)
    ri = math.floor(v / size + 0.5)
    if 1.0 <= ci <= cols and 1.0 <= ri <= rows:
        du = u - ci * size
        dv = v - ri * size
        if du * du + dv * dv <= shading[4] * shading[4]:
            return shading[6], shading[7], shading[8]
    return shading[9], shading[10], shading[11]


@nb.njit(parallel=True, **_JIT)
def render_color_kernel(width, height, scale, cx, cy, pitch, n, seed,
                        diff_mode, diff_param, mla, elems, plane, shading):
    """Mean colour over all samples; blocked rays add zero, plane misses add background."""
    out = np.zeros((height, width, 3), dtype=np.float32)
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    strata = _strata(n)
    foot = pitch / scale
    for tile in nb.prange(tiles_x * tiles_y):
        ty = tile // tiles_x
        tx = tile % tiles_x
        x = np.empty(BLOCK)
        y = np.empty(BLOCK)
        z = np.empty(BLOCK)
        dx = np.empty(BLOCK)
        dy = np.empty(BLOCK)
        dz = np.empty(BLOCK)
        alive = np.empty(BLOCK)
        hu = np.empty(BLOCK)
        hv = np.empty(BLOCK)
        hit = np.empty(BLOCK)
        for row in range(ty * TILE, min(height, (ty + 1) * TILE)):
            y0 = -(row / scale - cy) * pitch
            for col in range(tx * TILE, min(width, (tx + 1) * TILE)):
                x0 = -(col / scale - cx) * pitch
                key = pixel_key(seed, scale, width, col, row)
                r = 0.0
                g = 0.0
                b = 0.0
                for start in range(0, n, BLOCK):
                    m = min(BLOCK, n - start)
                    _sample_block(key, start, m, strata, x0, y0, foot, diff_mode, diff_param,
                                  x, y, z, dx, dy, dz, alive)
                    _trace_block(m, x, y, z, dx, dy, dz, alive, mla, elems)
                    _plane_block(m, x, y, z, dx, dy, dz, alive, plane, hu, hv, hit)
                    for q in range(m):
                        if alive[q] == 0.0:
                            continue
                        if hit[q] != 0.0:
                            cr, cg, cb = shade_uv(hu[q], hv[q], shading)
                        else:
                            cr, cg, cb = shading[12], shading[13], shading[14]
                        r += cr
                        g += cg
                        b += cb
                out[row, col, 0] = r / n
                out[row, col, 1] = g / n
                out[row, col, 2] = b / n
    return out
