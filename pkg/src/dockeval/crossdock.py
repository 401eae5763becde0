"""Cross-docking construction: superpose candidate structures onto a
reference by their C-alpha atoms, carry ligands into the reference frame and
reject poor alignments or displaced ligands.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import seqalign
from .chemio import ProteinStructure, SmallMolecule
from .geom import GeometryError, RigidTransform, kabsch_superpose

MAX_CHAINS = 4
MAX_CA_RMSD = 2.0  # Å
MAX_LIGAND_DISPLACEMENT = 4.0  # Å

ACCEPT = "accept"
REJECT_ALIGNMENT = "alignment"
REJECT_LIGAND_SHIFT = "ligand-shift"


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentResult:
    transform: RigidTransform
    ca_rmsd: float
    matched_residue_pairs: int
    chain_pairs: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class FilterDecision:
    accepted: bool
    reason: str | None = None

    @property
    def label(self) -> str:
        return ACCEPT if self.accepted else "reject"


def _chain_table(structure: ProteinStructure):
    out = []
    for chain in structure.chains:
        residues = chain.ca_residues()
        if residues:
            seq = "".join(r.one_letter for r in residues)
            ca = np.array([r.atom("CA").position for r in residues], dtype=np.float64)
            out.append((chain.chain_id, seq, ca))
    return out


def align_to_reference(candidate: ProteinStructure, reference: ProteinStructure) -> AlignmentResult:
    """Transform taking ``candidate`` coordinates into the ``reference`` frame.

    Chains are paired greedily by global alignment score; residues correspond
    where the alignment places identical residues in the same column.
    """
    cand = _chain_table(candidate)
    ref = _chain_table(reference)
    if not cand or not ref:
        raise AlignmentError("both structures need at least one chain with C-alpha atoms")
    if len(cand) > MAX_CHAINS or len(ref) > MAX_CHAINS:
        raise AlignmentError(f"more than {MAX_CHAINS} chains; select the relevant chains before aligning")

    scored = []
    for ci, (cid, cseq, _) in enumerate(cand):
        for ri, (rid, rseq, _) in enumerate(ref):
            aln = seqalign.align(cseq, rseq)
            ident = aln.identical_pairs(cseq, rseq)
            if ident:
                scored.append((-aln.score, ci, ri, ident))
    scored.sort(key=lambda t: (t[0], t[1], t[2]))
    used_c, used_r = set(), set()
    moving, target, chain_pairs = [], [], []
    for _, ci, ri, ident in scored:
        if ci in used_c or ri in used_r:
            continue
        used_c.add(ci)
        used_r.add(ri)
        chain_pairs.append((cand[ci][0], ref[ri][0]))
        for i, j in ident:
            moving.append(cand[ci][2][i])
            target.append(ref[ri][2][j])
    if len(moving) < 3:
        raise AlignmentError("no correspondence: fewer than 3 aligned identical residues")
    try:
        transform, rmsd = kabsch_superpose(np.array(moving), np.array(target))
    except GeometryError as exc:
        raise AlignmentError(f"degenerate C-alpha geometry: {exc}") from None
    return AlignmentResult(transform, rmsd, len(moving), tuple(chain_pairs))


def transfer_ligand(ligand: SmallMolecule, alignment: AlignmentResult | RigidTransform) -> SmallMolecule:
    """Map every atom of ``ligand`` through the alignment transform."""
    transform = alignment.transform if isinstance(alignment, AlignmentResult) else alignment
    return ligand.with_positions(transform.apply(ligand.coords))


def transfer_structure(structure: ProteinStructure, alignment: AlignmentResult | RigidTransform) -> ProteinStructure:
    transform = alignment.transform if isinstance(alignment, AlignmentResult) else alignment
    coords = np.array([a.position for a in structure.atoms()], dtype=np.float64)
    return structure.with_positions(transform.apply(coords))


def ligand_displacement(ligand: SmallMolecule, reference_ligand: SmallMolecule) -> float:
    """Distance between heavy-atom centroids, Å."""
    return float(np.linalg.norm(ligand.heavy_coords.mean(axis=0) - reference_ligand.heavy_coords.mean(axis=0)))


def candidate_filter(alignment: AlignmentResult | float, ligand_displacement: float,
                     max_ca_rmsd: float = MAX_CA_RMSD,
                     max_displacement: float = MAX_LIGAND_DISPLACEMENT) -> FilterDecision:
    ca_rmsd = alignment.ca_rmsd if isinstance(alignment, AlignmentResult) else float(alignment)
    if ca_rmsd > max_ca_rmsd:
        return FilterDecision(False, REJECT_ALIGNMENT)
    if ligand_displacement > max_displacement:
        return FilterDecision(False, REJECT_LIGAND_SHIFT)
    return FilterDecision(True)


@dataclass(frozen=True)
class CandidateReport:
    candidate_id: str
    ca_rmsd: float | None
    displacement: float | None
    decision: str
    reason: str


def report_csv(rows: list[CandidateReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["candidate_id", "ca_rmsd", "displacement", "decision", "reason"])
    for r in rows:
        writer.writerow([r.candidate_id,
                         "" if r.ca_rmsd is None else f"{r.ca_rmsd:.4f}",
                         "" if r.displacement is None else f"{r.displacement:.4f}",
                         r.decision, r.reason])
    return buf.getvalue()


def evaluate_candidate(candidate_id: str, candidate: ProteinStructure, candidate_ligand: SmallMolecule,
                       reference: ProteinStructure, reference_ligand: SmallMolecule,
                       max_ca_rmsd: float = MAX_CA_RMSD, max_displacement: float = MAX_LIGAND_DISPLACEMENT):
    """Align one candidate and decide on it.

    Returns ``(report_row, alignment or None, transferred ligand or None)``.
    """
    try:
        aln = align_to_reference(candidate, reference)
    except AlignmentError as exc:
        return CandidateReport(candidate_id, None, None, "reject", f"error: {exc}"), None, None
    moved = transfer_ligand(candidate_ligand, aln)
    shift = ligand_displacement(moved, reference_ligand)
    decision = candidate_filter(aln, shift, max_ca_rmsd, max_displacement)
    row = CandidateReport(candidate_id, aln.ca_rmsd, shift, decision.label, decision.reason or "")
    return row, aln, moved
