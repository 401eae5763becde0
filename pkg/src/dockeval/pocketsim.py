"""Binding-pocket extraction and pocket-to-pocket TM-score similarity.

A pocket is the set of polymer residues with any heavy atom within a cutoff
(10 Å by default, inclusive) of any ligand heavy atom. Two pockets are
compared by aligning their C-alpha sequences, superposing the identically
aligned C-alpha atoms and scoring with the TM-score normalised by the
reference pocket size.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels, seqalign
from .chemio import ProteinStructure, Residue, SmallMolecule, read_ligand, read_pdb
from .geom import GeometryError, kabsch_superpose

log = logging.getLogger(__name__)

POCKET_CUTOFF = 10.0  # Å
SIMILARITY_THRESHOLD = 0.70
MIN_POCKET_CA = 5
MIN_MATCHED = 3


class PocketError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Pocket:
    residues: tuple[Residue, ...]
    ca_coords: np.ndarray = field(repr=False)
    ca_sequence: str
    source_entry: str = ""

    @property
    def size(self) -> int:
        return len(self.ca_sequence)


def tm_d0(l_ref: int) -> float:
    """TM-score distance scale for a reference of ``l_ref`` residues, floored at 0.5 Å."""
    if l_ref < 1:
        raise ValueError("reference length must be positive")
    if l_ref <= 15:
        return 0.5
    return max(0.5, 1.24 * (l_ref - 15) ** (1.0 / 3.0) - 1.8)


def extract_pocket(protein: ProteinStructure, ligand: SmallMolecule, cutoff: float = POCKET_CUTOFF,
                   source_entry: str = "") -> Pocket:
    lig = ligand.heavy_coords
    residues = list(protein.residues())
    owner, coords = [], []
    for k, res in enumerate(residues):
        for a in res.atoms:
            if not a.is_hydrogen:
                owner.append(k)
                coords.append(a.position)
    if not coords:
        raise PocketError("protein has no heavy atoms")
    _, jj, _ = kernels.pairs_within(lig, np.array(coords, dtype=np.float64), cutoff)
    hit = sorted({owner[j] for j in jj.tolist()})
    if not hit:
        raise PocketError(f"no residue within {cutoff} Å of the ligand")
    chosen = tuple(residues[k] for k in hit)
    with_ca = [r for r in chosen if r.atom("CA") is not None]
    ca = np.array([r.atom("CA").position for r in with_ca], dtype=np.float64).reshape(-1, 3)
    seq = "".join(r.one_letter for r in with_ca)
    return Pocket(chosen, ca, seq, source_entry)


def pocket_tm_score(query: Pocket, reference: Pocket) -> float:
    """TM-score of ``query`` against ``reference`` (normalised by the reference)."""
    if query.size < MIN_POCKET_CA or reference.size < MIN_POCKET_CA:
        raise PocketError(f"pockets need at least {MIN_POCKET_CA} C-alpha atoms "
                          f"({query.size} vs {reference.size})")
    aln = seqalign.align(query.ca_sequence, reference.ca_sequence)
    pairs = aln.identical_pairs(query.ca_sequence, reference.ca_sequence)
    if len(pairs) < MIN_MATCHED:
        raise PocketError(f"only {len(pairs)} matched residues")
    qi = [i for i, _ in pairs]
    ri = [j for _, j in pairs]
    try:
        transform, _ = kabsch_superpose(query.ca_coords[qi], reference.ca_coords[ri])
    except GeometryError as exc:
        raise PocketError(str(exc)) from None
    moved = transform.apply(query.ca_coords[qi])
    diff = moved - reference.ca_coords[ri]
    d = np.sqrt(np.sum(diff * diff, axis=1))
    d0 = tm_d0(reference.size)
    return float(np.sum(1.0 / (1.0 + (d / d0) ** 2)) / reference.size)


class CorpusMatch(NamedTuple):
    score: float
    best_match_id: str
    failed: int


def max_similarity_vs_corpus(query: Pocket, corpus: list[tuple[str, Pocket]] | dict) -> CorpusMatch:
    """Best TM-score of ``query`` over a corpus of ``(id, pocket)`` entries.

    Failed comparisons are skipped and counted. Ties go to the lowest id.
    """
    items = list(corpus.items()) if isinstance(corpus, dict) else list(corpus)
    if not items:
        raise PocketError("empty corpus")
    best: tuple[float, str] | None = None
    failed = 0
    for cid, pocket in items:
        try:
            s = pocket_tm_score(query, pocket)
        except PocketError as exc:
            failed += 1
            log.debug("pocket comparison %s failed: %s", cid, exc)
            continue
        if best is None or s > best[0] or (s == best[0] and cid < best[1]):
            best = (s, cid)
    if best is None:
        raise PocketError(f"all {failed} corpus comparisons failed")
    if failed:
        log.warning("%d of %d corpus comparisons failed", failed, len(items))
    return CorpusMatch(best[0], best[1], failed)


def stratify(entries, threshold: float = SIMILARITY_THRESHOLD):
    """Split ``(id, similarity)`` pairs into similar (>= threshold) and dissimilar."""
    similar, dissimilar = [], []
    for item in entries:
        (similar if item[1] >= threshold else dissimilar).append(item)
    return similar, dissimilar


@dataclass(frozen=True)
class CorpusEntry:
    entry_id: str
    protein_path: Path
    ligand_path: Path
    release_date: str


def read_corpus_index(path, released_before: str | None = None) -> list[CorpusEntry]:
    """Rows of ``entry_id,protein_path,ligand_path,release_date``.

    Relative paths resolve against the index file's directory. With
    ``released_before`` (ISO date) later entries are dropped.
    """
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            date = (row.get("release_date") or "").strip()
            if released_before and date and date >= released_before:
                continue
            out.append(CorpusEntry(row["entry_id"].strip(),
                                   (path.parent / row["protein_path"].strip()),
                                   (path.parent / row["ligand_path"].strip()), date))
    return out


def load_corpus(entries: list[CorpusEntry], cutoff: float = POCKET_CUTOFF) -> list[tuple[str, Pocket]]:
    pockets = []
    for e in entries:
        try:
            pocket = extract_pocket(read_pdb(e.protein_path), read_ligand(e.ligand_path), cutoff, e.entry_id)
        except (OSError, ValueError) as exc:
            log.warning("corpus entry %s skipped: %s", e.entry_id, exc)
            continue
        pockets.append((e.entry_id, pocket))
    return pockets
