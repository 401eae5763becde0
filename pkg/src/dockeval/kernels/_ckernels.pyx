# cython: language_level=3
"""Compiled twins of the kernels in ``_pykernels``.

Squared distances are accumulated as ``dx*dx + dy*dy + dz*dz`` in that
order, matching the numpy fallback exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, INFINITY

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def min_distance_brute(a, b):
    cdef const f64[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const f64[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t i, j, bi = -1, bj = -1
    cdef f64 dx, dy, dz, d2, best = INFINITY
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            dx = A[i, 0] - B[j, 0]
            dy = A[i, 1] - B[j, 1]
            dz = A[i, 2] - B[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
                bi = i
                bj = j
    return best, bi, bj


def pairs_within(a, b, cutoff):
    cdef const f64[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const f64[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0]
    if na == 0 or nb == 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))

    cdef f64 cell = float(cutoff)
    cdef f64 c2 = cell * cell
    if cell <= 0.0:
        cell = 1.0
    bnp = np.asarray(B)
    lo = bnp.min(axis=0)
    hi = bnp.max(axis=0)
    # keep the cell table bounded; larger cells stay correct for the 27-cell search
    while np.prod(np.floor((hi - lo) / cell) + 1.0) > 16_000_000:
        cell *= 2.0
    cdef f64 ox = lo[0], oy = lo[1], oz = lo[2]
    cdef i64 nx = <i64>floor((hi[0] - ox) / cell) + 1
    cdef i64 ny = <i64>floor((hi[1] - oy) / cell) + 1
    cdef i64 nz = <i64>floor((hi[2] - oz) / cell) + 1

    cdef i64[::1] start = np.zeros(nx * ny * nz + 1, dtype=np.int64)
    cdef i64[::1] cell_of = np.empty(nb, dtype=np.int64)
    cdef i64[::1] order = np.empty(nb, dtype=np.int64)
    cdef i64[::1] fill
    cdef Py_ssize_t j, i, c
    cdef i64 cx, cy, cz, gx, gy, gz, x0, x1, y0, y1, z0, z1, p, key
    for j in range(nb):
        cx = <i64>floor((B[j, 0] - ox) / cell)
        cy = <i64>floor((B[j, 1] - oy) / cell)
        cz = <i64>floor((B[j, 2] - oz) / cell)
        key = (cx * ny + cy) * nz + cz
        cell_of[j] = key
        start[key + 1] += 1
    for c in range(nx * ny * nz):
        start[c + 1] += start[c]
    fill = np.array(start[:nx * ny * nz], dtype=np.int64)
    for j in range(nb):
        key = cell_of[j]
        order[fill[key]] = j
        fill[key] += 1

    cdef f64 dx, dy, dz, d2
    cdef Py_ssize_t count = 0, pass_no
    cdef i64[::1] oi = np.empty(0, np.int64)
    cdef i64[::1] oj = np.empty(0, np.int64)
    cdef f64[::1] od = np.empty(0, np.float64)
    for pass_no in range(2):
        if pass_no == 1:
            oi = np.empty(count, np.int64)
            oj = np.empty(count, np.int64)
            od = np.empty(count, np.float64)
            count = 0
        for i in range(na):
            cx = <i64>floor((A[i, 0] - ox) / cell)
            cy = <i64>floor((A[i, 1] - oy) / cell)
            cz = <i64>floor((A[i, 2] - oz) / cell)
            x0 = cx - 1 if cx - 1 > 0 else 0
            y0 = cy - 1 if cy - 1 > 0 else 0
            z0 = cz - 1 if cz - 1 > 0 else 0
            x1 = cx + 1 if cx + 1 < nx - 1 else nx - 1
            y1 = cy + 1 if cy + 1 < ny - 1 else ny - 1
            z1 = cz + 1 if cz + 1 < nz - 1 else nz - 1
            for gx in range(x0, x1 + 1):
                for gy in range(y0, y1 + 1):
                    for gz in range(z0, z1 + 1):
                        key = (gx * ny + gy) * nz + gz
                        for p in range(start[key], start[key + 1]):
                            j = order[p]
                            dx = A[i, 0] - B[j, 0]
                            dy = A[i, 1] - B[j, 1]
                            dz = A[i, 2] - B[j, 2]
                            d2 = dx * dx + dy * dy + dz * dz
                            if d2 <= c2:
                                if pass_no == 1:
                                    oi[count] = i
                                    oj[count] = j
                                    od[count] = d2
                                count += 1
    ri = np.asarray(oi)
    rj = np.asarray(oj)
    rd = np.asarray(od)
    idx = np.lexsort((rj, ri))
    return ri[idx], rj[idx], rd[idx]


def pair_terms(coords, pi, pj, r0, k, bint repulsive_only):
    cdef const f64[:, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    cdef const i64[::1] I = np.ascontiguousarray(pi, dtype=np.int64)
    cdef const i64[::1] J = np.ascontiguousarray(pj, dtype=np.int64)
    cdef const f64[::1] R0 = np.ascontiguousarray(r0, dtype=np.float64)
    cdef const f64[::1] K = np.ascontiguousarray(np.broadcast_to(k, (len(pi),)), dtype=np.float64)
    grad_np = np.zeros((X.shape[0], 3), dtype=np.float64)
    cdef f64[:, ::1] G = grad_np
    cdef Py_ssize_t t, a, b
    cdef f64 dx, dy, dz, d, delta, ux, uy, uz, f, energy = 0.0
    for t in range(I.shape[0]):
        a = I[t]
        b = J[t]
        dx = X[a, 0] - X[b, 0]
        dy = X[a, 1] - X[b, 1]
        dz = X[a, 2] - X[b, 2]
        d = sqrt(dx * dx + dy * dy + dz * dz)
        delta = d - R0[t]
        if repulsive_only and delta >= 0.0:
            continue
        energy += 0.5 * K[t] * delta * delta
        if d > 0.0:
            ux = dx / d
            uy = dy / d
            uz = dz / d
        else:
            ux = 1.0
            uy = 0.0
            uz = 0.0
        f = K[t] * delta
        G[a, 0] += f * ux
        G[a, 1] += f * uy
        G[a, 2] += f * uz
        G[b, 0] -= f * ux
        G[b, 1] -= f * uy
        G[b, 2] -= f * uz
    return energy, grad_np


def rasterize(ax, ay, az, centers, radii):
    cdef const f64[::1] AX = np.ascontiguousarray(ax, dtype=np.float64)
    cdef const f64[::1] AY = np.ascontiguousarray(ay, dtype=np.float64)
    cdef const f64[::1] AZ = np.ascontiguousarray(az, dtype=np.float64)
    cdef const f64[:, ::1] C = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
    cdef const f64[::1] R = np.ascontiguousarray(radii, dtype=np.float64)
    mask_np = np.zeros((AX.shape[0], AY.shape[0], AZ.shape[0]), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] M = mask_np
    cdef Py_ssize_t t, x, y, z, x0, x1, y0, y1, z0, z1
    cdef f64 cx, cy, cz, r, r2, dx, dy, dz, dxx, dyy
    for t in range(C.shape[0]):
        cx = C[t, 0]
        cy = C[t, 1]
        cz = C[t, 2]
        r = R[t]
        r2 = r * r
        x0 = _lower(AX, cx - r)
        x1 = _upper(AX, cx + r)
        y0 = _lower(AY, cy - r)
        y1 = _upper(AY, cy + r)
        z0 = _lower(AZ, cz - r)
        z1 = _upper(AZ, cz + r)
        for x in range(x0, x1):
            dx = AX[x] - cx
            dxx = dx * dx
            for y in range(y0, y1):
                dy = AY[y] - cy
                dyy = dxx + dy * dy
                for z in range(z0, z1):
                    dz = AZ[z] - cz
                    if dyy + dz * dz <= r2:
                        M[x, y, z] = 1
    return mask_np


cdef Py_ssize_t _lower(const f64[::1] arr, f64 v) noexcept:
    # first index with arr[idx] >= v (searchsorted "left")
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t _upper(const f64[::1] arr, f64 v) noexcept:
    # first index with arr[idx] > v (searchsorted "right")
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def nw_matrix(a, b, i64 match, i64 mismatch, i64 gap):
    cdef const i64[::1] A = np.ascontiguousarray(a, dtype=np.int64)
    cdef const i64[::1] B = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    h_np = np.empty((n + 1, m + 1), dtype=np.int64)
    cdef i64[:, ::1] H = h_np
    cdef i64 best, v
    for j in range(m + 1):
        H[0, j] = gap * j
    for i in range(1, n + 1):
        H[i, 0] = gap * i
        for j in range(1, m + 1):
            best = H[i - 1, j - 1] + (match if A[i - 1] == B[j - 1] else mismatch)
            v = H[i - 1, j] + gap
            if v > best:
                best = v
            v = H[i, j - 1] + gap
            if v > best:
                best = v
            H[i, j] = best
    return h_np
