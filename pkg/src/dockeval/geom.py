"""Geometric primitives shared by every evaluation module."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import kernels

# element: (van der Waals radius, covalent radius), Å.
# vdW: Bondi (1964); elements Bondi omits take Mantina et al. (2009) values,
#      and transition metals absent from both take the 2.0 Å toolkit default.
# covalent: Cordero et al. (2008), sp3 carbon, low-spin transition metals.
RADII_VERSION = "bondi1964+mantina2009/cordero2008 v1"
_RADII = {
    "H": (1.20, 0.31), "He": (1.40, 0.28), "Li": (1.82, 1.28), "Be": (1.53, 0.96),
    "B": (1.92, 0.84), "C": (1.70, 0.76), "N": (1.55, 0.71), "O": (1.52, 0.66),
    "F": (1.47, 0.57), "Ne": (1.54, 0.58), "Na": (2.27, 1.66), "Mg": (1.73, 1.41),
    "Al": (1.84, 1.21), "Si": (2.10, 1.11), "P": (1.80, 1.07), "S": (1.80, 1.05),
    "Cl": (1.75, 1.02), "Ar": (1.88, 1.06), "K": (2.75, 2.03), "Ca": (2.31, 1.76),
    "Ti": (2.00, 1.60), "V": (2.00, 1.53), "Cr": (2.00, 1.39), "Mn": (2.00, 1.39),
    "Fe": (2.00, 1.32), "Co": (2.00, 1.26), "Ni": (1.63, 1.24), "Cu": (1.40, 1.32),
    "Zn": (1.39, 1.22), "Ga": (1.87, 1.22), "Ge": (2.11, 1.20), "As": (1.85, 1.19),
    "Se": (1.90, 1.20), "Br": (1.85, 1.20), "Kr": (2.02, 1.16), "Rb": (3.03, 2.20),
    "Sr": (2.49, 1.95), "Mo": (2.00, 1.54), "Ru": (2.00, 1.46), "Rh": (2.00, 1.42),
    "Pd": (1.63, 1.39), "Ag": (1.72, 1.45), "Cd": (1.58, 1.44), "In": (1.93, 1.42),
    "Sn": (2.17, 1.39), "Sb": (2.06, 1.39), "Te": (2.06, 1.38), "I": (1.98, 1.39),
    "Xe": (2.16, 1.40), "Cs": (3.43, 2.44), "Ba": (2.68, 2.15), "W": (2.00, 1.62),
    "Re": (2.00, 1.51), "Os": (2.00, 1.44), "Ir": (2.00, 1.41), "Pt": (1.72, 1.36),
    "Au": (1.66, 1.36), "Hg": (1.55, 1.32), "Tl": (1.96, 1.45), "Pb": (2.02, 1.46),
    "Bi": (2.07, 1.48),
}
DEFAULT_VDW = 2.0
DEFAULT_COVALENT = 1.5

BRUTE_FORCE_LIMIT = 256


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class RadiusTable:
    vdw: dict
    covalent: dict
    version: str = RADII_VERSION

    @classmethod
    def default(cls) -> "RadiusTable":
        return cls({e: v for e, (v, _) in _RADII.items()},
                   {e: c for e, (_, c) in _RADII.items()})

    def vdw_radius(self, element: str) -> float:
        return self.vdw.get(element, DEFAULT_VDW)

    def covalent_radius(self, element: str) -> float:
        return self.covalent.get(element, DEFAULT_COVALENT)

    def vdw_array(self, elements) -> np.ndarray:
        return np.array([self.vdw_radius(e) for e in elements], dtype=np.float64)

    def covalent_array(self, elements) -> np.ndarray:
        return np.array([self.covalent_radius(e) for e in elements], dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["element", "vdw", "covalent"])
        for el in sorted(self.vdw):
            writer.writerow([el, f"{self.vdw[el]:.2f}", f"{self.covalent[el]:.2f}"])
        return buf.getvalue()


DEFAULT_RADII = RadiusTable.default()


@dataclass(frozen=True)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def is_proper(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return (np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0)
                and abs(np.linalg.det(r) - 1.0) <= tol)


def _as_points(points, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"{name} must be an (n, 3) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite coordinates")
    return arr


def kabsch_superpose(moving, target) -> tuple[RigidTransform, float]:
    """Least-squares proper rigid motion mapping ``moving`` onto ``target``.

    Returns the transform and the RMSD remaining after applying it.
    """
    p = _as_points(moving, "moving")
    q = _as_points(target, "target")
    if len(p) != len(q):
        raise GeometryError(f"point count mismatch: {len(p)} vs {len(q)}")
    if len(p) < 3:
        raise GeometryError("superposition needs at least 3 points")
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    p0, q0 = p - pc, q - qc
    scale = max(np.abs(p0).max(), np.abs(q0).max(), 1.0)
    for arr, label in ((p0, "moving"), (q0, "target")):
        sv = np.linalg.svd(arr, compute_uv=False)
        if sv[1] <= 1e-9 * scale * np.sqrt(len(arr)):
            raise GeometryError(f"degenerate {label} point set (collinear or coincident)")
    h = p0.T @ q0
    u, _, vt = np.linalg.svd(h)
    d = 1.0 if np.linalg.det(vt.T @ u.T) >= 0 else -1.0
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    translation = qc - rotation @ pc
    transform = RigidTransform(rotation, translation)
    diff = transform.apply(p) - q
    rmsd = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
    return transform, rmsd


def rmsd(a, b) -> float:
    """Plain coordinate RMSD, no superposition."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def fit_plane(points) -> tuple[np.ndarray, float, float]:
    """Least-squares plane through ``points``.

    Returns ``(normal, offset, max_deviation)`` with ``normal · x = offset``
    on the plane. The normal's first non-zero component is positive.
    """
    p = _as_points(points, "points")
    if len(p) < 3:
        raise GeometryError("plane fit needs at least 3 points")
    centroid = p.mean(axis=0)
    centered = p - centroid
    _, sv, vt = np.linalg.svd(centered, full_matrices=True)
    if sv[0] == 0.0:
        raise GeometryError("all points coincide")
    normal = vt[2]
    for comp in normal:
        if abs(comp) > 1e-12:
            if comp < 0:
                normal = -normal
            break
    normal = normal / np.linalg.norm(normal)
    dev = centered @ normal
    if len(p) == 3:
        dev = np.zeros(3)
    return normal, float(normal @ centroid), float(np.max(np.abs(dev)))


def min_pairwise_distance(a, b, cutoff: float = 6.0) -> tuple[float, tuple[int, int]]:
    """Exact minimum distance between two point sets and its index pair.

    Ties resolve to the lowest ``(i, j)``. When both sets exceed
    ``BRUTE_FORCE_LIMIT`` points a uniform grid with cell size ``cutoff``
    restricts the search; if no pair lies within ``cutoff`` the exact brute
    force result is returned instead.
    """
    a = _as_points(a, "A")
    b = _as_points(b, "B")
    if len(a) == 0 or len(b) == 0:
        raise GeometryError("min_pairwise_distance needs non-empty point sets")
    if len(a) > BRUTE_FORCE_LIMIT and len(b) > BRUTE_FORCE_LIMIT:
        ii, jj, d2 = kernels.pairs_within(a, b, cutoff)
        if len(d2):
            # pairs come sorted by (i, j), so argmin picks the lowest pair on ties
            k = int(np.argmin(d2))
            return float(np.sqrt(d2[k])), (int(ii[k]), int(jj[k]))
    d2, i, j = kernels.min_distance_brute(a, b)
    return float(np.sqrt(d2)), (int(i), int(j))


def pairwise_distances(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def signed_volume(center, b, c, d) -> float:
    """``det[(b - a), (c - a), (d - a)]`` with ``a = center``."""
    a = np.asarray(center, dtype=np.float64)
    m = np.array([np.asarray(b) - a, np.asarray(c) - a, np.asarray(d) - a])
    return float(np.linalg.det(m))


def dihedral(p0, p1, p2, p3) -> float:
    """Dihedral angle in degrees, in (-180, 180]."""
    p0, p1, p2, p3 = (np.asarray(x, dtype=np.float64) for x in (p0, p1, p2, p3))
    b0 = p0 - p1
    b1 = p2 - p1
    b2 = p3 - p2
    n1 = np.linalg.norm(b1)
    if n1 == 0:
        return 0.0
    b1 = b1 / n1
    v = b0 - (b0 @ b1) * b1
    w = b2 - (b2 @ b1) * b1
    x = v @ w
    y = np.cross(b1, v) @ w
    return float(np.degrees(np.arctan2(y, x)))


def angle(a, b, c) -> float:
    """Angle a-b-c in degrees."""
    u = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    v = np.asarray(c, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    cos = np.clip((u @ v) / (nu * nv), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)))
