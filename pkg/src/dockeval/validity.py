"""Structural plausibility checks for predicted ligand poses.

Three groups of checks are run (chemical consistency with the true ligand,
intramolecular geometry, and contacts with the protein and its cofactors) and
combined into a single ``pb_valid`` verdict: valid means no check failed.
Skipped checks never block validity but are always counted in the report.

Ideal geometry comes from a tabulated :class:`BoundsTable` rather than a
distance-geometry bounds matrix: bond bounds are ideal ± 0.10 Å and angle
bounds are the hybridisation ideal ± 10°.
"""
from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Protocol

import numpy as np

from . import geom, kernels
from .chemio import AROMATIC, DOUBLE, SINGLE, TRIPLE, ProteinStructure, SmallMolecule
from .geom import DEFAULT_RADII, RadiusTable
from .ligrmsd import (AtomCorrespondence, IsomorphismError, SymmetryCapExceeded, _Graph,
                      best_correspondence, find_isomorphism, refine_colors)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"

BOND_LENGTH_LOWER_SCALE = 0.75
BOND_LENGTH_UPPER_SCALE = 1.25
PLANARITY_TOLERANCE = 0.25  # Å
INTERNAL_CLASH_SCALE = 0.7
ENERGY_RATIO_LIMIT = 100.0
INTERMOLECULAR_DISTANCE_SCALE = 0.75
VOLUME_OVERLAP_LIMIT = 0.075
PROTEIN_VOLUME_SCALE = 0.8
ORGANIC_VOLUME_SCALE = 0.8
INORGANIC_VOLUME_SCALE = 0.5
GRID_SPACING = 0.25  # Å

BOND_TOLERANCE = 0.10  # Å either side of the ideal length
ANGLE_TOLERANCE = 10.0  # degrees either side of the ideal angle


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    measured: float | None = None
    threshold: float | None = None
    unit: str | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL


@dataclass(frozen=True)
class ValidityReport:
    chemistry: tuple[CheckResult, ...] = ()
    intramolecular: tuple[CheckResult, ...] = ()
    intermolecular: tuple[CheckResult, ...] = ()

    @property
    def checks(self) -> tuple[CheckResult, ...]:
        return self.chemistry + self.intramolecular + self.intermolecular

    @property
    def pb_valid(self) -> bool:
        return pb_valid(self)

    @property
    def skipped_count(self) -> int:
        return sum(c.status == SKIPPED for c in self.checks)

    @property
    def failed_checks(self) -> list[str]:
        return [c.name for c in self.checks if c.failed]

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        def rows(group):
            return [{k: _json_number(v) for k, v in asdict(c).items()} for c in group]
        return {
            "chemistry": rows(self.chemistry),
            "intramolecular": rows(self.intramolecular),
            "intermolecular": rows(self.intermolecular),
            "pb_valid": self.pb_valid,
            "skipped_count": self.skipped_count,
            "failed_checks": self.failed_checks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _json_number(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def pb_valid(report: ValidityReport) -> bool:
    """True iff no check failed. Skipped checks do not block."""
    return not any(c.failed for c in report.checks)


# --------------------------------------------------------------------------- bounds

_IDEAL_BONDS = {
    ("C", "C"): {SINGLE: 1.54, DOUBLE: 1.34, TRIPLE: 1.20, AROMATIC: 1.39},
    ("C", "N"): {SINGLE: 1.47, DOUBLE: 1.28, TRIPLE: 1.16, AROMATIC: 1.34},
    ("C", "O"): {SINGLE: 1.43, DOUBLE: 1.22, AROMATIC: 1.36},
    ("C", "S"): {SINGLE: 1.82, DOUBLE: 1.67, AROMATIC: 1.72},
    ("C", "P"): {SINGLE: 1.84, DOUBLE: 1.67},
    ("C", "F"): {SINGLE: 1.35},
    ("C", "Cl"): {SINGLE: 1.77},
    ("C", "Br"): {SINGLE: 1.94},
    ("C", "I"): {SINGLE: 2.14},
    ("C", "B"): {SINGLE: 1.57},
    ("C", "Si"): {SINGLE: 1.87},
    ("C", "Se"): {SINGLE: 1.95, AROMATIC: 1.86},
    ("N", "N"): {SINGLE: 1.45, DOUBLE: 1.25, TRIPLE: 1.10, AROMATIC: 1.35},
    ("N", "O"): {SINGLE: 1.40, DOUBLE: 1.21, AROMATIC: 1.34},
    ("N", "S"): {SINGLE: 1.68, DOUBLE: 1.54, AROMATIC: 1.63},
    ("N", "P"): {SINGLE: 1.70, DOUBLE: 1.57},
    ("O", "O"): {SINGLE: 1.48},
    ("O", "S"): {SINGLE: 1.57, DOUBLE: 1.45, AROMATIC: 1.55},
    ("O", "P"): {SINGLE: 1.60, DOUBLE: 1.48},
    ("S", "S"): {SINGLE: 2.05},
    ("B", "O"): {SINGLE: 1.37},
    ("F", "S"): {SINGLE: 1.56},
    ("F", "P"): {SINGLE: 1.56},
}

_IDEAL_ANGLES = {"sp": 180.0, "sp2": 120.0, "sp3": 109.47, "ring3": 60.0, "ring4": 90.0}


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class BoundsTable:
    """Ideal bond lengths per (element pair, order) and ideal angles per class."""

    bonds: dict = field(default_factory=lambda: {
        _pair_key(*k): dict(v) for k, v in _IDEAL_BONDS.items()})
    angles: dict = field(default_factory=lambda: dict(_IDEAL_ANGLES))
    bond_tolerance: float = BOND_TOLERANCE
    angle_tolerance: float = ANGLE_TOLERANCE
    radii: RadiusTable = DEFAULT_RADII

    def ideal_length(self, a: str, b: str, order: str) -> float:
        row = self.bonds.get(_pair_key(a, b), {})
        if order in row:
            return row[order]
        return self.radii.covalent_radius(a) + self.radii.covalent_radius(b)

    def length_bounds(self, a: str, b: str, order: str) -> tuple[float, float]:
        ideal = self.ideal_length(a, b, order)
        return ideal - self.bond_tolerance, ideal + self.bond_tolerance

    def angle_bounds(self, kind: str) -> tuple[float, float]:
        ideal = self.angles[kind]
        return ideal - self.angle_tolerance, min(ideal + self.angle_tolerance, 180.0)

    @classmethod
    def from_csv(cls, path) -> "BoundsTable":
        """Overlay rows onto the defaults.

        Columns: ``kind,a,b,order,value`` where ``kind`` is ``bond`` (``a``/``b``
        elements, ``order`` a bond order name, value in Å) or ``angle`` (``a`` a
        class from sp/sp2/sp3/ring3/ring4, value in degrees).
        """
        table = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                kind = row["kind"].strip()
                value = float(row["value"])
                if kind == "bond":
                    key = _pair_key(row["a"].strip(), row["b"].strip())
                    table.bonds.setdefault(key, {})[row["order"].strip()] = value
                elif kind == "angle":
                    table.angles[row["a"].strip()] = value
                else:
                    raise ValueError(f"unknown bounds row kind {kind!r}")
        return table


DEFAULT_BOUNDS = BoundsTable()


class ConformerEnergyProvider(Protocol):
    """Supplies the pose energy and the mean energy of a conformer ensemble."""

    def energies(self, mol: SmallMolecule) -> tuple[float, float]:
        ...


# --------------------------------------------------------------------------- graph helpers

def heavy_rings(mol: SmallMolecule, max_size: int = 7) -> list[tuple[int, ...]]:
    """Simple cycles of the heavy-atom graph with at most ``max_size`` atoms."""
    heavy = set(mol.heavy_indices)
    nbrs = {i: [j for j in mol.neighbors[i] if j in heavy] for i in heavy}
    found: dict[frozenset, tuple[int, ...]] = {}
    for start in sorted(heavy):
        stack = [(start, (start,))]
        while stack:
            node, path = stack.pop()
            for nxt in nbrs[node]:
                if nxt == start and len(path) >= 3:
                    key = frozenset(path)
                    if key not in found:
                        found[key] = path
                elif nxt > start and nxt not in path and len(path) < max_size:
                    stack.append((nxt, path + (nxt,)))
    return sorted(found.values(), key=lambda r: (len(r), sorted(r)))


def topological_distances(mol: SmallMolecule) -> dict[int, dict[int, int]]:
    heavy = set(mol.heavy_indices)
    out = {}
    for s in mol.heavy_indices:
        dist = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in mol.neighbors[u]:
                if v in heavy and v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        out[s] = dist
    return out


def hybridization(mol: SmallMolecule, atom: int) -> str:
    orders = [mol.bond_order(atom, j) for j in mol.neighbors[atom]]
    if TRIPLE in orders or orders.count(DOUBLE) >= 2:
        return "sp"
    if DOUBLE in orders or AROMATIC in orders:
        return "sp2"
    return "sp3"


def _heavy_colors(mol: SmallMolecule) -> dict[int, int]:
    g = _Graph(mol)
    colors = refine_colors([g])[0]
    return {g.atom_index[i]: colors[i] for i in range(g.n)}


# --------------------------------------------------------------------------- chemistry

def check_chemistry(pred: SmallMolecule, ref: SmallMolecule,
                    correspondence: AtomCorrespondence | None = None) -> list[CheckResult]:
    """Consistency of the predicted ligand with the true ligand.

    Loading and sanitisation are represented by successful parsing plus the
    molecule's structural invariants (no valence model is applied).
    """
    results = [
        CheckResult("mol_pred_loaded", PASS, detail="parsed by dockeval.chemio"),
        CheckResult("sanitization", PASS, detail="graph invariants hold (no valence model)"),
    ]
    same_formula = pred.formula == ref.formula
    results.append(CheckResult(
        "molecular_formula", PASS if same_formula else FAIL,
        detail=f"pred {_formula_str(pred.formula)} vs true {_formula_str(ref.formula)}"))

    iso = find_isomorphism(pred, ref) if same_formula else None
    results.append(CheckResult("molecular_bonds", PASS if iso is not None else FAIL,
                               detail="" if iso is not None else "no label-preserving bond mapping"))

    if iso is None:
        reason = "no atom correspondence to the true ligand"
        results.append(CheckResult("tetrahedral_chirality", SKIPPED, detail=reason))
        results.append(CheckResult("double_bond_stereochemistry", SKIPPED, detail=reason))
        return results
    if correspondence is None:
        try:
            _, correspondence = best_correspondence(pred, ref)
        except SymmetryCapExceeded as exc:
            results.append(CheckResult("tetrahedral_chirality", SKIPPED, detail=str(exc)))
            results.append(CheckResult("double_bond_stereochemistry", SKIPPED, detail=str(exc)))
            return results
    ref_to_pred = correspondence.inverse()
    colors = _heavy_colors(ref)
    results.append(_tetrahedral_check(pred, ref, ref_to_pred, colors))
    results.append(_double_bond_check(pred, ref, ref_to_pred, colors))
    return results


def _formula_str(formula: dict[str, int]) -> str:
    return "".join(f"{el}{n if n > 1 else ''}" for el, n in formula.items())


def stereocenters(ref: SmallMolecule, colors: dict[int, int] | None = None) -> list[int]:
    """Atoms with four heavy neighbours in four distinct symmetry classes."""
    colors = colors if colors is not None else _heavy_colors(ref)
    heavy = set(ref.heavy_indices)
    centers = []
    for c in ref.heavy_indices:
        nb = [j for j in ref.neighbors[c] if j in heavy]
        if len(nb) == 4 and len({colors[j] for j in nb}) == 4:
            centers.append(c)
    return centers


def _tetrahedral_check(pred, ref, ref_to_pred, colors) -> CheckResult:
    heavy = set(ref.heavy_indices)
    checked = mismatched = 0
    bad = []
    for c in stereocenters(ref, colors):
        nb = [j for j in ref.neighbors[c] if j in heavy][:3]
        v_ref = geom.signed_volume(ref.coords[c], *(ref.coords[j] for j in nb))
        if abs(v_ref) < 1e-6:
            continue
        v_pred = geom.signed_volume(pred.coords[ref_to_pred[c]],
                                    *(pred.coords[ref_to_pred[j]] for j in nb))
        checked += 1
        if np.sign(v_pred) != np.sign(v_ref):
            mismatched += 1
            bad.append(ref_to_pred[c])
    detail = f"{checked} centre(s) checked"
    if bad:
        detail += f"; inverted at pred atoms {bad}"
    return CheckResult("tetrahedral_chirality", FAIL if mismatched else PASS,
                       float(mismatched), 0.0, "inverted centres", detail)


def stereo_double_bonds(ref: SmallMolecule, colors: dict[int, int] | None = None):
    """C=C bonds outside small rings with a resolvable substituent on each end.

    Yields ``(a, b, sub_a, sub_b)`` with the reference substituents.
    """
    colors = colors if colors is not None else _heavy_colors(ref)
    heavy = set(ref.heavy_indices)
    small_ring_bonds = set()
    for ring in heavy_rings(ref, 7):
        for k in range(len(ring)):
            a, b = ring[k], ring[(k + 1) % len(ring)]
            small_ring_bonds.add((min(a, b), max(a, b)))
    out = []
    for bond in ref.heavy_bonds:
        if bond.order != DOUBLE or bond.key in small_ring_bonds:
            continue
        a, b = bond.key
        if ref.atoms[a].element != "C" or ref.atoms[b].element != "C":
            continue
        subs = []
        for end, other in ((a, b), (b, a)):
            s = [j for j in ref.neighbors[end] if j in heavy and j != other]
            if not s or (len(s) == 2 and colors[s[0]] == colors[s[1]]):
                break
            subs.append(min(s))
        else:
            out.append((a, b, subs[0], subs[1]))
    return out


def _double_bond_check(pred, ref, ref_to_pred, colors) -> CheckResult:
    checked = mismatched = 0
    for a, b, sa, sb in stereo_double_bonds(ref, colors):
        t_ref = geom.dihedral(*(ref.coords[i] for i in (sa, a, b, sb)))
        t_pred = geom.dihedral(*(pred.coords[ref_to_pred[i]] for i in (sa, a, b, sb)))
        checked += 1
        if (abs(t_ref) < 90.0) != (abs(t_pred) < 90.0):
            mismatched += 1
    return CheckResult("double_bond_stereochemistry", FAIL if mismatched else PASS,
                       float(mismatched), 0.0, "flipped bonds", f"{checked} bond(s) checked")


# --------------------------------------------------------------------------- intramolecular

def check_intramolecular(pred: SmallMolecule, bounds: BoundsTable | None = None,
                         energy_provider: ConformerEnergyProvider | None = None) -> list[CheckResult]:
    bounds = bounds or DEFAULT_BOUNDS
    rings = heavy_rings(pred, 7)
    return [
        _bond_length_check(pred, bounds),
        _bond_angle_check(pred, bounds, rings),
        _aromatic_ring_check(pred, rings),
        _double_bond_flatness_check(pred),
        _internal_clash_check(pred, bounds.radii),
        _energy_check(pred, energy_provider),
    ]


def _bond_length_check(mol: SmallMolecule, bounds: BoundsTable) -> CheckResult:
    worst = None  # (relative excursion, description)
    n_bad = 0
    for b in mol.heavy_bonds:
        ea, eb = mol.atoms[b.a].element, mol.atoms[b.b].element
        lo, hi = bounds.length_bounds(ea, eb, b.order)
        lo_s, hi_s = BOND_LENGTH_LOWER_SCALE * lo, BOND_LENGTH_UPPER_SCALE * hi
        d = float(np.linalg.norm(mol.coords[b.a] - mol.coords[b.b]))
        if not lo_s <= d <= hi_s:
            n_bad += 1
        rel = min(d / lo_s, hi_s / d) if d > 0 else 0.0
        if worst is None or rel < worst[0]:
            worst = (rel, f"{ea}{b.a + 1}-{eb}{b.b + 1} {d:.3f} Å in [{lo_s:.3f}, {hi_s:.3f}]")
    if worst is None:
        return CheckResult("bond_lengths", SKIPPED, detail="no heavy-atom bonds")
    return CheckResult("bond_lengths", FAIL if n_bad else PASS, worst[0], 1.0,
                       "fraction of allowed range edge", f"{n_bad} outlier(s); tightest {worst[1]}")


def _angle_kind(mol: SmallMolecule, a: int, b: int, c: int, rings) -> str:
    for ring in rings:
        if len(ring) > 4:
            break
        if a in ring and b in ring and c in ring:
            return "ring3" if len(ring) == 3 else "ring4"
    return hybridization(mol, b)


def _bond_angle_check(mol: SmallMolecule, bounds: BoundsTable, rings) -> CheckResult:
    heavy = set(mol.heavy_indices)
    worst = None
    n_bad = n = 0
    for b in mol.heavy_indices:
        nb = [j for j in mol.neighbors[b] if j in heavy]
        if len(nb) < 2 or len(nb) > 4:
            continue
        for a, c in combinations(nb, 2):
            kind = _angle_kind(mol, a, b, c, rings)
            lo, hi = bounds.angle_bounds(kind)
            lo_s, hi_s = BOND_LENGTH_LOWER_SCALE * lo, BOND_LENGTH_UPPER_SCALE * hi
            theta = geom.angle(mol.coords[a], mol.coords[b], mol.coords[c])
            n += 1
            if not lo_s <= theta <= hi_s:
                n_bad += 1
            rel = min(theta / lo_s, hi_s / theta) if theta > 0 else 0.0
            if worst is None or rel < worst[0]:
                worst = (rel, f"{a + 1}-{b + 1}-{c + 1} {theta:.1f}° ({kind}) in [{lo_s:.1f}, {hi_s:.1f}]")
    if n == 0:
        return CheckResult("bond_angles", SKIPPED, detail="no bond angles")
    return CheckResult("bond_angles", FAIL if n_bad else PASS, worst[0], 1.0,
                       "fraction of allowed range edge", f"{n_bad} outlier(s); tightest {worst[1]}")


def aromatic_rings(mol: SmallMolecule, rings=None) -> list[tuple[int, ...]]:
    rings = rings if rings is not None else heavy_rings(mol, 6)
    out = []
    for ring in rings:
        if len(ring) not in (5, 6):
            continue
        if all(mol.bond_order(ring[k], ring[(k + 1) % len(ring)]) == AROMATIC for k in range(len(ring))):
            out.append(ring)
    return out


def _aromatic_ring_check(mol: SmallMolecule, rings) -> CheckResult:
    arom = aromatic_rings(mol, rings)
    if not arom:
        return CheckResult("aromatic_ring_flatness", PASS, 0.0, PLANARITY_TOLERANCE, "Å",
                           "no 5/6-membered aromatic rings")
    worst = max(geom.fit_plane(mol.coords[list(r)])[2] for r in arom)
    return CheckResult("aromatic_ring_flatness", PASS if worst <= PLANARITY_TOLERANCE else FAIL,
                       worst, PLANARITY_TOLERANCE, "Å", f"{len(arom)} ring(s)")


def _double_bond_flatness_check(mol: SmallMolecule) -> CheckResult:
    heavy = set(mol.heavy_indices)
    groups = []
    for b in mol.heavy_bonds:
        if b.order != DOUBLE:
            continue
        if mol.atoms[b.a].element != "C" or mol.atoms[b.b].element != "C":
            continue
        atoms = {b.a, b.b}
        atoms.update(j for j in mol.neighbors[b.a] if j in heavy)
        atoms.update(j for j in mol.neighbors[b.b] if j in heavy)
        if len(atoms) >= 4:
            groups.append(sorted(atoms))
    if not groups:
        return CheckResult("double_bond_flatness", PASS, 0.0, PLANARITY_TOLERANCE, "Å",
                           "no substituted C=C bonds")
    worst = max(geom.fit_plane(mol.coords[g])[2] for g in groups)
    return CheckResult("double_bond_flatness", PASS if worst <= PLANARITY_TOLERANCE else FAIL,
                       worst, PLANARITY_TOLERANCE, "Å", f"{len(groups)} bond(s)")


def _internal_clash_check(mol: SmallMolecule, radii: RadiusTable) -> CheckResult:
    topo = topological_distances(mol)
    heavy = list(mol.heavy_indices)
    worst = None
    n_bad = n = 0
    for i, j in combinations(heavy, 2):
        if topo[i].get(j, 99) < 3:
            continue
        limit = radii.vdw_radius(mol.atoms[i].element) + radii.vdw_radius(mol.atoms[j].element)
        d = float(np.linalg.norm(mol.coords[i] - mol.coords[j]))
        n += 1
        if not d > INTERNAL_CLASH_SCALE * limit:
            n_bad += 1
        rel = d / limit
        if worst is None or rel < worst[0]:
            worst = (rel, i, j, d)
    if worst is None:
        return CheckResult("internal_steric_clash", PASS, detail="no pairs separated by 3+ bonds")
    rel, i, j, d = worst
    return CheckResult("internal_steric_clash", FAIL if n_bad else PASS, rel, INTERNAL_CLASH_SCALE,
                       "fraction of vdW sum", f"{n_bad} clash(es); closest {i + 1}-{j + 1} at {d:.3f} Å")


def _energy_check(mol: SmallMolecule, provider) -> CheckResult:
    if provider is None:
        return CheckResult("internal_energy", SKIPPED, threshold=ENERGY_RATIO_LIMIT,
                           unit="ratio to ensemble mean", detail="no conformer energy provider configured")
    pose, mean = provider.energies(mol)
    ok = pose <= ENERGY_RATIO_LIMIT * mean
    ratio = pose / mean if mean != 0 else math.inf
    return CheckResult("internal_energy", PASS if ok else FAIL, ratio, ENERGY_RATIO_LIMIT,
                       "ratio to ensemble mean", f"pose {pose:.3f}, ensemble mean {mean:.3f}")


# --------------------------------------------------------------------------- intermolecular

def _heavy(atoms) -> tuple[np.ndarray, list[str]]:
    heavy = [a for a in atoms if not a.is_hydrogen]
    coords = np.array([a.position for a in heavy], dtype=np.float64).reshape(-1, 3)
    return coords, [a.element for a in heavy]


def min_distance_check(name: str, lig_xyz, lig_el, other_xyz, other_el, radius_fn,
                       scale: float = INTERMOLECULAR_DISTANCE_SCALE) -> CheckResult:
    """Pass iff every cross pair is farther than ``scale`` x its radius sum."""
    if len(other_xyz) == 0:
        return CheckResult(name, PASS, threshold=scale, unit="fraction of radius sum",
                           detail="no atoms to compare against")
    rl = np.array([radius_fn(e) for e in lig_el])
    ro = np.array([radius_fn(e) for e in other_el])
    cutoff = (rl.max() + ro.max()) * 1.05
    ii, jj, d2 = kernels.pairs_within(lig_xyz, other_xyz, cutoff)
    if len(d2):
        d = np.sqrt(d2)
        sums = rl[ii] + ro[jj]
        bad = ~(d > scale * sums)
        rel = d / sums
        k = int(np.argmin(rel))
        measured, pair, dist = float(rel[k]), (int(ii[k]), int(jj[k])), float(d[k])
        n_bad = int(bad.sum())
    else:
        dist, pair = geom.min_pairwise_distance(lig_xyz, other_xyz)
        measured = dist / (rl[pair[0]] + ro[pair[1]])
        n_bad = 0
    return CheckResult(name, FAIL if n_bad else PASS, measured, scale, "fraction of radius sum",
                       f"{n_bad} close pair(s); closest {dist:.3f} Å (ligand atom {pair[0] + 1})")


def overlap_fraction(lig_xyz, lig_radii, other_xyz, other_radii, spacing: float = GRID_SPACING) -> float:
    """Share of the ligand's sphere-union volume inside the other sphere union.

    Volumes are estimated on a regular grid of ``spacing`` Å over the ligand's
    bounding box padded by its largest radius.
    """
    lig_xyz = np.asarray(lig_xyz, dtype=np.float64)
    other_xyz = np.asarray(other_xyz, dtype=np.float64).reshape(-1, 3)
    lig_radii = np.asarray(lig_radii, dtype=np.float64)
    other_radii = np.asarray(other_radii, dtype=np.float64)
    pad = lig_radii.max()
    lo = lig_xyz.min(axis=0) - pad
    hi = lig_xyz.max(axis=0) + pad
    axes = [lo[k] + spacing * np.arange(int(np.floor((hi[k] - lo[k]) / spacing)) + 2) for k in range(3)]
    lig_mask = kernels.rasterize(*axes, lig_xyz, lig_radii)
    n_lig = int(lig_mask.sum())
    if n_lig == 0 or len(other_xyz) == 0:
        return 0.0
    near = np.all((other_xyz + other_radii[:, None] >= lo) & (other_xyz - other_radii[:, None] <= hi), axis=1)
    if not near.any():
        return 0.0
    other_mask = kernels.rasterize(*axes, other_xyz[near], other_radii[near])
    return int(np.count_nonzero(lig_mask & other_mask)) / n_lig


def volume_overlap_check(name: str, lig_xyz, lig_el, other_xyz, other_el, radii: RadiusTable,
                         scale: float, spacing: float = GRID_SPACING) -> CheckResult:
    if len(other_xyz) == 0:
        return CheckResult(name, PASS, threshold=VOLUME_OVERLAP_LIMIT, unit="fraction of ligand volume",
                           detail="no atoms to compare against")
    # shrunken spheres get a proportionally finer grid so the estimate stays
    # as resolved as at the protein scale
    spacing = spacing * min(1.0, scale / PROTEIN_VOLUME_SCALE)
    frac = overlap_fraction(lig_xyz, radii.vdw_array(lig_el) * scale,
                            other_xyz, radii.vdw_array(other_el) * scale, spacing)
    return CheckResult(name, PASS if frac < VOLUME_OVERLAP_LIMIT else FAIL, frac, VOLUME_OVERLAP_LIMIT,
                       "fraction of ligand volume", f"vdW radii x {scale}, grid {spacing:g} Å")


def check_intermolecular(pred: SmallMolecule, protein: ProteinStructure,
                         radii: RadiusTable | None = None, spacing: float = GRID_SPACING) -> list[CheckResult]:
    """Contacts of the ligand with the protein, organic and inorganic cofactors.

    Waters are ignored.
    """
    radii = radii or DEFAULT_RADII
    lig_xyz, lig_el = pred.heavy_coords, pred.heavy_elements
    prot_xyz, prot_el = protein.polymer_heavy_coords, protein.polymer_heavy_elements
    org_xyz, org_el = _heavy(a for g in protein.groups("organic") for a in g.atoms)
    ino_xyz, ino_el = _heavy(a for g in protein.groups("inorganic") for a in g.atoms)
    return [
        min_distance_check("minimum_distance_to_protein", lig_xyz, lig_el, prot_xyz, prot_el,
                           radii.vdw_radius),
        min_distance_check("minimum_distance_to_organic_cofactors", lig_xyz, lig_el, org_xyz, org_el,
                           radii.vdw_radius),
        min_distance_check("minimum_distance_to_inorganic_cofactors", lig_xyz, lig_el, ino_xyz, ino_el,
                           radii.covalent_radius),
        volume_overlap_check("volume_overlap_with_protein", lig_xyz, lig_el, prot_xyz, prot_el,
                             radii, PROTEIN_VOLUME_SCALE, spacing),
        volume_overlap_check("volume_overlap_with_organic_cofactors", lig_xyz, lig_el, org_xyz, org_el,
                             radii, ORGANIC_VOLUME_SCALE, spacing),
        volume_overlap_check("volume_overlap_with_inorganic_cofactors", lig_xyz, lig_el, ino_xyz, ino_el,
                             radii, INORGANIC_VOLUME_SCALE, spacing),
    ]


def validate(pred: SmallMolecule, ref: SmallMolecule | None = None,
             protein: ProteinStructure | None = None, *,
             bounds: BoundsTable | None = None, radii: RadiusTable | None = None,
             energy_provider: ConformerEnergyProvider | None = None,
             correspondence: AtomCorrespondence | None = None) -> ValidityReport:
    """Run every check group that the supplied inputs allow.

    Without ``ref`` the chemistry group only records loading; without
    ``protein`` the intermolecular group is empty.
    """
    if ref is not None:
        chem = check_chemistry(pred, ref, correspondence)
    else:
        chem = [CheckResult("mol_pred_loaded", PASS, detail="parsed by dockeval.chemio")]
    intra = check_intramolecular(pred, bounds, energy_provider)
    inter = check_intermolecular(pred, protein, radii) if protein is not None else []
    return ValidityReport(tuple(chem), tuple(intra), tuple(inter))


def load_failure_report(detail: str) -> ValidityReport:
    """Report for a prediction that could not be parsed."""
    return ValidityReport((CheckResult("mol_pred_loaded", FAIL, detail=detail),))


__all__ = [
    "CheckResult", "ValidityReport", "BoundsTable", "ConformerEnergyProvider", "PASS", "FAIL", "SKIPPED",
    "check_chemistry", "check_intramolecular", "check_intermolecular", "pb_valid", "validate",
    "overlap_fraction", "IsomorphismError",
]
