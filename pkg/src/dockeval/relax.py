"""Restrained energy minimisation of a predicted protein-ligand complex.

The potential is deliberately simple and fully analytic:

* harmonic positional restraints ``0.5 k |r - r0|^2`` on backbone N, CA, C, O
  (``k = 10`` kJ/mol/nm^2 by default);
* harmonic bond restraints holding every covalent bond at its input length;
* a soft one-sided repulsion between ligand atoms and protein atoms, and
  between ligand atoms three or more bonds apart, active below
  ``0.75 x`` the van der Waals radius sum plus a small margin.

Coordinates are in nm internally; conversion from Å happens once in
:func:`build_system` and once on the way out of :func:`relax_complex`.
Hydrogens are carried along with their parent heavy atom.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .chemio import BACKBONE_NAMES, ProteinStructure, SmallMolecule
from .geom import DEFAULT_RADII, RadiusTable
from .validity import INTERMOLECULAR_DISTANCE_SCALE, topological_distances

log = logging.getLogger(__name__)

ANGSTROM_TO_NM = 0.1
NM_TO_ANGSTROM = 10.0

_BACKBONE_BONDS = (("N", "CA"), ("CA", "C"), ("C", "O"), ("C", "OXT"))
_SIDE_CHAINS = {
    "ALA": ["CA-CB"],
    "ARG": ["CA-CB", "CB-CG", "CG-CD", "CD-NE", "NE-CZ", "CZ-NH1", "CZ-NH2"],
    "ASN": ["CA-CB", "CB-CG", "CG-OD1", "CG-ND2"],
    "ASP": ["CA-CB", "CB-CG", "CG-OD1", "CG-OD2"],
    "CYS": ["CA-CB", "CB-SG"],
    "GLN": ["CA-CB", "CB-CG", "CG-CD", "CD-OE1", "CD-NE2"],
    "GLU": ["CA-CB", "CB-CG", "CG-CD", "CD-OE1", "CD-OE2"],
    "GLY": [],
    "HIS": ["CA-CB", "CB-CG", "CG-ND1", "ND1-CE1", "CE1-NE2", "NE2-CD2", "CD2-CG"],
    "ILE": ["CA-CB", "CB-CG1", "CG1-CD1", "CB-CG2"],
    "LEU": ["CA-CB", "CB-CG", "CG-CD1", "CG-CD2"],
    "LYS": ["CA-CB", "CB-CG", "CG-CD", "CD-CE", "CE-NZ"],
    "MET": ["CA-CB", "CB-CG", "CG-SD", "SD-CE"],
    "MSE": ["CA-CB", "CB-CG", "CG-SE", "SE-CE"],
    "PHE": ["CA-CB", "CB-CG", "CG-CD1", "CD1-CE1", "CE1-CZ", "CZ-CE2", "CE2-CD2", "CD2-CG"],
    "PRO": ["CA-CB", "CB-CG", "CG-CD", "CD-N"],
    "SER": ["CA-CB", "CB-OG"],
    "THR": ["CA-CB", "CB-OG1", "CB-CG2"],
    "TRP": ["CA-CB", "CB-CG", "CG-CD1", "CD1-NE1", "NE1-CE2", "CE2-CD2", "CD2-CG", "CE2-CZ2",
            "CZ2-CH2", "CH2-CZ3", "CZ3-CE3", "CE3-CD2"],
    "TYR": ["CA-CB", "CB-CG", "CG-CD1", "CD1-CE1", "CE1-CZ", "CZ-CE2", "CE2-CD2", "CD2-CG", "CZ-OH"],
    "VAL": ["CA-CB", "CB-CG1", "CB-CG2"],
}
_ALIASES = {"HID": "HIS", "HIE": "HIS", "HIP": "HIS", "HSD": "HIS", "HSE": "HIS", "HSP": "HIS",
            "CYX": "CYS", "CYM": "CYS", "ASH": "ASP", "GLH": "GLU", "LYN": "LYS"}
PEPTIDE_BOND_MAX = 0.2  # nm; longer C-N gaps are chain breaks


class RelaxError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxConfig:
    k_backbone: float = 10.0          # kJ/mol/nm^2
    k_bond: float = 1.0e5             # kJ/mol/nm^2
    k_rep: float = 1.0e4              # kJ/mol/nm^2
    gradient_tolerance: float = 10.0  # kJ/mol/nm, max per-atom gradient norm
    max_iterations: int = 2000
    neighbor_cutoff: float = 1.2      # nm
    clash_scale: float = INTERMOLECULAR_DISTANCE_SCALE
    clash_margin: float = 0.01        # nm added to the repulsion onset
    armijo_c: float = 1e-4
    shrink: float = 0.5

    def __post_init__(self):
        for name in ("k_backbone", "k_bond", "k_rep", "gradient_tolerance", "max_iterations",
                     "neighbor_cutoff", "clash_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.clash_margin < 0:
            raise ValueError("clash_margin must be non-negative")


@dataclass
class RelaxSystem:
    """Energy terms over mutable heavy-atom coordinates (nm)."""

    coords: np.ndarray
    restraint_atoms: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    restraint_anchors: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    restraint_k: np.ndarray = field(default_factory=lambda: np.empty(0))
    bond_i: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    bond_j: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    bond_length: np.ndarray = field(default_factory=lambda: np.empty(0))
    bond_k: np.ndarray = field(default_factory=lambda: np.empty(0))
    rep_i: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    rep_j: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    rep_distance: np.ndarray = field(default_factory=lambda: np.empty(0))
    rep_k: np.ndarray = field(default_factory=lambda: np.empty(0))
    # provenance: index into protein.atoms() order, or into ligand.atoms
    protein_atom_index: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ligand_atom_index: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    n_ligand_bonds: int = 0
    n_ligand_protein_pairs: int = 0

    def __post_init__(self):
        self.coords = np.array(self.coords, dtype=np.float64).reshape(-1, 3)
        n = len(self.coords)
        for name in ("restraint_atoms", "bond_i", "bond_j", "rep_i", "rep_j"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise ValueError(f"{name} references atoms outside 0..{n - 1}")
            setattr(self, name, arr)
        if np.any(self.bond_i == self.bond_j) or np.any(self.rep_i == self.rep_j):
            raise ValueError("pair terms need two distinct atoms")
        for name in ("restraint_k", "bond_k", "rep_k", "bond_length", "rep_distance"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.restraint_anchors = np.asarray(self.restraint_anchors, dtype=np.float64).reshape(-1, 3)
        if np.any(self.restraint_k < 0):
            raise ValueError("restraint constants must be non-negative")

    @property
    def n_atoms(self) -> int:
        return len(self.coords)

    @property
    def n_ligand_atoms(self) -> int:
        return len(self.ligand_atom_index)


def energy_gradient(system: RelaxSystem, coords=None) -> tuple[float, np.ndarray]:
    """Total energy (kJ/mol) and its exact gradient (kJ/mol/nm) at ``coords``."""
    x = system.coords if coords is None else np.asarray(coords, dtype=np.float64)
    if x.shape != system.coords.shape:
        raise ValueError(f"coords shape {x.shape} does not match system {system.coords.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinate")
    e_bond, grad = kernels.pair_terms(x, system.bond_i, system.bond_j, system.bond_length,
                                      system.bond_k, False)
    e_rep, g_rep = kernels.pair_terms(x, system.rep_i, system.rep_j, system.rep_distance,
                                      system.rep_k, True)
    grad += g_rep
    e_res = 0.0
    if len(system.restraint_atoms):
        diff = x[system.restraint_atoms] - system.restraint_anchors
        e_res = float(np.sum(0.5 * system.restraint_k * np.sum(diff * diff, axis=1)))
        np.add.at(grad, system.restraint_atoms, system.restraint_k[:, None] * diff)
    return e_res + e_bond + e_rep, grad


def max_atom_gradient(grad: np.ndarray) -> float:
    if len(grad) == 0:
        return 0.0
    return float(np.sqrt(np.max(np.sum(grad * grad, axis=1))))


class MinimizeResult(NamedTuple):
    coords: np.ndarray
    iterations: int
    final_max_gradient: float
    converged: bool
    energies: list
    diagnostic: str


def minimize(system: RelaxSystem, config: RelaxConfig = RelaxConfig()) -> MinimizeResult:
    """Steepest descent with Armijo backtracking.

    Stops when the largest per-atom gradient norm is at most
    ``gradient_tolerance`` or after ``max_iterations`` accepted steps. If no
    decreasing step exists at machine precision the current state is
    returned unconverged. ``energies`` holds the energy after every accepted
    step (preceded by the initial energy) and is non-increasing.
    """
    x = system.coords.copy()
    energy, grad = energy_gradient(system, x)
    energies = [energy]
    gmax = max_atom_gradient(grad)
    # first trial step moves the steepest atom by 0.01 nm
    step = 0.01 / gmax if gmax > 0 else 0.0
    iterations = 0
    diagnostic = ""
    while gmax > config.gradient_tolerance and iterations < config.max_iterations:
        g2 = float(np.sum(grad * grad))
        while True:
            trial = x - step * grad
            e_trial, g_trial = energy_gradient(system, trial)
            if e_trial <= energy - config.armijo_c * step * g2:
                break
            step *= config.shrink
            if step * gmax <= 1e-15 * max(1.0, float(np.abs(x).max())):
                diagnostic = f"line search failed at iteration {iterations}: no decreasing step"
                break
        if diagnostic:
            break
        x, energy, grad = trial, e_trial, g_trial
        energies.append(energy)
        iterations += 1
        gmax = max_atom_gradient(grad)
        step *= 2.0
    converged = gmax <= config.gradient_tolerance
    if not converged and not diagnostic:
        diagnostic = f"iteration budget {config.max_iterations} exhausted"
    return MinimizeResult(x, iterations, gmax, converged, energies, diagnostic)


# --------------------------------------------------------------------------- system construction

def _template_bonds(resname: str) -> list[tuple[str, str]]:
    name = _ALIASES.get(resname, resname)
    if name not in _SIDE_CHAINS:
        raise RelaxError(f"unknown residue template {resname!r}")
    return list(_BACKBONE_BONDS) + [tuple(b.split("-")) for b in _SIDE_CHAINS[name]]


def build_system(protein: ProteinStructure, ligand: SmallMolecule,
                 config: RelaxConfig = RelaxConfig(), radii: RadiusTable = DEFAULT_RADII) -> RelaxSystem:
    if not ligand.heavy_indices:
        raise RelaxError("empty ligand")
    coords, elements = [], []
    prot_index, is_backbone = [], []
    bonds: list[tuple[int, int]] = []
    atom_counter = 0
    for chain in protein.chains:
        prev_c = None
        for res in chain.residues:
            local = {}
            for atom in res.atoms:
                if not atom.is_hydrogen:
                    local[atom.name] = len(coords)
                    coords.append(atom.position)
                    elements.append(atom.element)
                    prot_index.append(atom_counter)
                    is_backbone.append(atom.name in BACKBONE_NAMES)
                atom_counter += 1
            for a, b in _template_bonds(res.name):
                if a in local and b in local:
                    bonds.append((local[a], local[b]))
            if prev_c is not None and "N" in local:
                d = np.linalg.norm(np.subtract(coords[prev_c], coords[local["N"]])) * ANGSTROM_TO_NM
                if d <= PEPTIDE_BOND_MAX:
                    bonds.append((prev_c, local["N"]))
            prev_c = local.get("C")
    n_protein = len(coords)
    lig_index = list(ligand.heavy_indices)
    lig_local = {g: n_protein + k for k, g in enumerate(lig_index)}
    for g in lig_index:
        coords.append(ligand.atoms[g].position)
        elements.append(ligand.atoms[g].element)
    lig_bonds = [(lig_local[b.a], lig_local[b.b]) for b in ligand.heavy_bonds]
    bonds += lig_bonds

    x = np.array(coords, dtype=np.float64).reshape(-1, 3) * ANGSTROM_TO_NM
    bi = np.array([b[0] for b in bonds], dtype=np.int64)
    bj = np.array([b[1] for b in bonds], dtype=np.int64)
    blen = np.linalg.norm(x[bi] - x[bj], axis=1) if len(bonds) else np.empty(0)
    if np.any(blen <= 0):
        raise RelaxError("zero-length bond in input")

    vdw = radii.vdw_array(elements) * ANGSTROM_TO_NM
    backbone = np.flatnonzero(np.array(is_backbone, dtype=bool))

    lig_x = x[n_protein:]
    pi, pj, _ = kernels.pairs_within(lig_x, x[:n_protein], config.neighbor_cutoff) if n_protein else (
        np.empty(0, np.int64), np.empty(0, np.int64), None)
    rep_i = list(pi + n_protein)
    rep_j = list(pj)
    n_lp = len(rep_i)
    topo = topological_distances(ligand)
    for a in range(len(lig_index)):
        for b in range(a + 1, len(lig_index)):
            if topo[lig_index[a]].get(lig_index[b], 99) < 3:
                continue
            if np.linalg.norm(lig_x[a] - lig_x[b]) <= config.neighbor_cutoff:
                rep_i.append(n_protein + a)
                rep_j.append(n_protein + b)
    rep_i = np.array(rep_i, dtype=np.int64)
    rep_j = np.array(rep_j, dtype=np.int64)
    rep_d = config.clash_scale * (vdw[rep_i] + vdw[rep_j]) + config.clash_margin if len(rep_i) else np.empty(0)

    return RelaxSystem(
        coords=x,
        restraint_atoms=backbone,
        restraint_anchors=x[backbone].copy(),
        restraint_k=np.full(len(backbone), config.k_backbone),
        bond_i=bi, bond_j=bj, bond_length=blen, bond_k=np.full(len(bi), config.k_bond),
        rep_i=rep_i, rep_j=rep_j, rep_distance=rep_d, rep_k=np.full(len(rep_i), config.k_rep),
        protein_atom_index=np.array(prot_index, dtype=np.int64),
        ligand_atom_index=np.array(lig_index, dtype=np.int64),
        n_ligand_bonds=len(lig_bonds),
        n_ligand_protein_pairs=n_lp,
    )


# --------------------------------------------------------------------------- complex-level driver

def count_clashes(protein: ProteinStructure, ligand: SmallMolecule,
                  radii: RadiusTable = DEFAULT_RADII, scale: float = INTERMOLECULAR_DISTANCE_SCALE) -> int:
    """Ligand-protein heavy pairs at or below ``scale`` x vdW radius sum."""
    prot = protein.polymer_heavy_coords
    if len(prot) == 0:
        return 0
    rl = radii.vdw_array(ligand.heavy_elements)
    rp = radii.vdw_array(protein.polymer_heavy_elements)
    ii, jj, d2 = kernels.pairs_within(ligand.heavy_coords, prot, scale * (rl.max() + rp.max()))
    return int(np.count_nonzero(~(np.sqrt(d2) > scale * (rl[ii] + rp[jj]))))


@dataclass(frozen=True)
class RelaxStats:
    clash_count_before: int
    clash_count_after: int
    backbone_rmsd_from_input: float  # Å
    iterations: int
    final_max_gradient: float        # kJ/mol/nm
    converged: bool
    initial_energy: float
    final_energy: float
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class RelaxResult(NamedTuple):
    protein: ProteinStructure
    ligand: SmallMolecule
    stats: RelaxStats


def relax_complex(protein: ProteinStructure, ligand: SmallMolecule,
                  config: RelaxConfig = RelaxConfig(), radii: RadiusTable = DEFAULT_RADII) -> RelaxResult:
    """Minimise the complex and re-emit it with unchanged topology."""
    system = build_system(protein, ligand, config, radii)
    before = count_clashes(protein, ligand, radii)
    result = minimize(system, config)
    delta = (result.coords - system.coords) * NM_TO_ANGSTROM
    n_protein = len(system.protein_atom_index)

    prot_atoms = list(protein.atoms())
    prot_xyz = np.array([a.position for a in prot_atoms], dtype=np.float64).reshape(-1, 3)
    prot_shift = np.zeros_like(prot_xyz)
    prot_shift[system.protein_atom_index] = delta[:n_protein]
    _carry_protein_hydrogens(protein, prot_shift)
    new_protein = protein.with_positions(prot_xyz + prot_shift)

    lig_xyz = ligand.coords.copy()
    lig_shift = np.zeros_like(lig_xyz)
    lig_shift[system.ligand_atom_index] = delta[n_protein:]
    for h, a in enumerate(ligand.atoms):
        if a.is_hydrogen:
            parents = [j for j in ligand.neighbors[h] if not ligand.atoms[j].is_hydrogen]
            if parents:
                lig_shift[h] = lig_shift[parents[0]]
    new_ligand = ligand.with_positions(lig_xyz + lig_shift)

    bb = system.restraint_atoms
    bb_rmsd = float(np.sqrt(np.mean(np.sum(delta[bb] ** 2, axis=1)))) if len(bb) else 0.0
    stats = RelaxStats(before, count_clashes(new_protein, new_ligand, radii), bb_rmsd,
                       result.iterations, result.final_max_gradient, result.converged,
                       result.energies[0], result.energies[-1], result.diagnostic)
    if not result.converged:
        log.warning("relaxation did not converge: %s", result.diagnostic)
    return RelaxResult(new_protein, new_ligand, stats)


def _carry_protein_hydrogens(protein: ProteinStructure, shift: np.ndarray) -> None:
    # a hydrogen follows the nearest heavy atom of its own residue
    k = 0
    for res in protein.residues():
        idx = list(range(k, k + len(res.atoms)))
        heavy = [(i, a) for i, a in zip(idx, res.atoms) if not a.is_hydrogen]
        for i, a in zip(idx, res.atoms):
            if a.is_hydrogen and heavy:
                p = np.asarray(a.position)
                j = min(heavy, key=lambda t: float(np.sum((np.asarray(t[1].position) - p) ** 2)))[0]
                shift[i] = shift[j]
        k += len(res.atoms)
