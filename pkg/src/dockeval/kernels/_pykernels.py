"""Numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point operation order for squared distances, so the
two backends agree bit-for-bit on neighbour sets and minimum indices.
"""
import numpy as np

_CHUNK = 2048


def _sq_dist_block(a, b):
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    dz = a[:, 2][:, None] - b[:, 2][None, :]
    return dx * dx + dy * dy + dz * dz


def min_distance_brute(a, b):
    """Exact minimum squared distance between two point sets.

    Returns ``(d2, i, j)``; ties resolve to the lowest ``(i, j)``.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    best = (np.inf, -1, -1)
    for start in range(0, len(a), _CHUNK):
        d2 = _sq_dist_block(a[start:start + _CHUNK], b)
        flat = int(np.argmin(d2))
        i, j = divmod(flat, d2.shape[1])
        val = float(d2[i, j])
        if val < best[0]:
            best = (val, start + i, j)
    return best


def pairs_within(a, b, cutoff):
    """All ``(i, j)`` with ``|a[i] - b[j]| <= cutoff``, sorted by ``(i, j)``.

    Returns ``(i, j, d2)`` arrays.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    c2 = float(cutoff) * float(cutoff)
    out_i, out_j, out_d = [], [], []
    if len(a) and len(b):
        for start in range(0, len(a), _CHUNK):
            d2 = _sq_dist_block(a[start:start + _CHUNK], b)
            ii, jj = np.nonzero(d2 <= c2)
            out_i.append(ii + start)
            out_j.append(jj)
            out_d.append(d2[ii, jj])
    if not out_i:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
    return (np.concatenate(out_i).astype(np.int64),
            np.concatenate(out_j).astype(np.int64),
            np.concatenate(out_d))


def pair_terms(coords, pi, pj, r0, k, repulsive_only):
    """Harmonic pair energy ``0.5 k (d - r0)^2`` and its gradient.

    With ``repulsive_only`` a term is active only while ``d < r0``.
    Coincident pairs use +x as the separation direction.
    """
    coords = np.asarray(coords, dtype=np.float64)
    grad = np.zeros_like(coords)
    if len(pi) == 0:
        return 0.0, grad
    diff = coords[pi] - coords[pj]
    d = np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2])
    delta = d - r0
    if repulsive_only:
        delta = np.where(delta < 0.0, delta, 0.0)
    energy = float(np.sum(0.5 * k * delta * delta))
    unit = np.zeros_like(diff)
    nz = d > 0.0
    unit[nz] = diff[nz] / d[nz, None]
    unit[~nz, 0] = 1.0
    f = (k * delta)[:, None] * unit
    np.add.at(grad, pi, f)
    np.add.at(grad, pj, -f)
    return energy, grad


def rasterize(ax, ay, az, centers, radii):
    """Boolean occupancy of a rectilinear grid by a union of spheres.

    A node is occupied when its squared distance to some center is at most
    the squared radius.
    """
    ax = np.asarray(ax, dtype=np.float64)
    ay = np.asarray(ay, dtype=np.float64)
    az = np.asarray(az, dtype=np.float64)
    mask = np.zeros((len(ax), len(ay), len(az)), dtype=np.uint8)
    for (cx, cy, cz), r in zip(np.asarray(centers, dtype=np.float64), np.asarray(radii, dtype=np.float64)):
        x0, x1 = np.searchsorted(ax, cx - r, "left"), np.searchsorted(ax, cx + r, "right")
        y0, y1 = np.searchsorted(ay, cy - r, "left"), np.searchsorted(ay, cy + r, "right")
        z0, z1 = np.searchsorted(az, cz - r, "left"), np.searchsorted(az, cz + r, "right")
        if x0 >= x1 or y0 >= y1 or z0 >= z1:
            continue
        dx = ax[x0:x1] - cx
        dy = ay[y0:y1] - cy
        dz = az[z0:z1] - cz
        d2 = (dx * dx)[:, None, None] + (dy * dy)[None, :, None] + (dz * dz)[None, None, :]
        mask[x0:x1, y0:y1, z0:z1] |= (d2 <= r * r)
    return mask


def nw_matrix(a, b, match, mismatch, gap):
    """Global alignment score matrix with a linear gap penalty.

    ``a`` and ``b`` are integer-coded sequences. Row ``i`` is filled with a
    prefix max-scan, which resolves the left-gap dependency in one pass.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n, m = len(a), len(b)
    h = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    h[0, :] = gap * cols
    offset = gap * cols
    for i in range(1, n + 1):
        sub = np.where(b == a[i - 1], match, mismatch)
        t = np.empty(m + 1, dtype=np.int64)
        t[0] = gap * i
        t[1:] = np.maximum(h[i - 1, :-1] + sub, h[i - 1, 1:] + gap)
        h[i, :] = np.maximum.accumulate(t - offset) + offset
    return h
