"""Benchmark-set construction over a local manifest.

Each manifest row describes one (PDB entry, ligand CCD id) pair together with
the precomputed quantities the selection rows test. The self-docking
pipeline runs the sequential filters, picks unique pdb/ccd pairs with a
maximum bipartite matching and keeps one entry per sequence cluster. The
cross-docking pipeline filters, clusters at 90% identity / 80% coverage,
aligns each cluster onto a reference and emits cross pairs.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping

from . import crossdock, seqalign
from .chemio import ProteinStructure, SmallMolecule

log = logging.getLogger(__name__)

ALLOWED_ELEMENTS = frozenset({"H", "C", "O", "N", "P", "S", "F", "Cl"})
UNKNOWN_LIGANDS = frozenset({"UNX", "UNL", "UNK"})

SELF_DOCK = "self"
CROSS_DOCK = "cross"


class ManifestError(ValueError):
    """Malformed manifest or a field missing for an enabled filter."""


@dataclass(frozen=True)
class ManifestEntry:
    pdb_id: str
    ccd_id: str
    release_date: str | None = None
    resolution: float | None = None
    ligand_mw: float | None = None
    heavy_atom_count: int | None = None
    elements: frozenset = frozenset()
    covalently_bound: bool | None = None
    rsr: float | None = None
    rscc: float | None = None
    completeness: float | None = None
    stereo_errors: bool | None = None
    atomic_clashes: bool | None = None
    sequences: tuple[str, ...] = ()
    min_protein_distance: float | None = None
    min_other_ligand_distance: float | None = None
    min_symmetry_mate_distance: float | None = None
    # optional rows; absent means the row passes
    min_ion_distance: float | None = None
    has_unknown_atoms: bool = False
    conformer_generated: bool = True
    sdf_loadable: bool = True
    # keys absent from the source row (None in a present key means "no neighbour")
    missing: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if not self.pdb_id or not self.ccd_id:
            raise ManifestError("pdb_id and ccd_id are required")
        if self.resolution is not None and not self.resolution > 0:
            raise ManifestError(f"{self.key}: resolution must be positive")
        if self.completeness is not None and not 0 <= self.completeness <= 100:
            raise ManifestError(f"{self.key}: completeness must be in [0, 100]")
        if self.rscc is not None and not -1 <= self.rscc <= 1:
            raise ManifestError(f"{self.key}: rscc must be in [-1, 1]")

    @property
    def key(self) -> str:
        return f"{self.pdb_id}_{self.ccd_id}"

    @property
    def longest_sequence(self) -> str:
        return max(self.sequences, key=len) if self.sequences else ""

    @classmethod
    def from_dict(cls, row: Mapping) -> "ManifestEntry":
        known = {f.name for f in fields(cls)} - {"missing"}
        unknown = set(row) - known
        if unknown:
            raise ManifestError(f"unknown manifest field(s): {', '.join(sorted(unknown))}")
        kw = dict(row)
        if "elements" in kw:
            kw["elements"] = frozenset(_norm_element(e) for e in (kw["elements"] or ()))
        if "sequences" in kw:
            kw["sequences"] = tuple(kw["sequences"] or ())
        for name in ("pdb_id", "ccd_id"):
            kw[name] = str(kw.get(name, "")).strip()
        kw["missing"] = frozenset(known - set(row))
        return cls(**kw)


def _norm_element(e: str) -> str:
    e = str(e).strip()
    return e[:1].upper() + e[1:].lower()


@dataclass(frozen=True)
class FilterConfig:
    pipeline: str = SELF_DOCK
    release_start: str = "2022-01-01"
    release_end: str = "2025-01-01"  # exclusive
    max_resolution: float = 2.0
    max_sequence_length: int = 2000
    min_mw: float = 100.0
    max_mw: float = 900.0
    min_heavy_atoms: int = 3
    allowed_elements: frozenset = ALLOWED_ELEMENTS
    max_rsr: float = 0.2
    min_rscc: float = 0.95
    min_completeness: float = 100.0
    min_protein_distance: float = 0.2
    min_other_molecule_distance: float = 0.2  # self-dock
    min_ion_distance: float = 0.2              # self-dock
    min_other_ligand_distance: float = 5.0     # cross-dock
    min_symmetry_mate_distance: float = 5.0    # strict
    disabled: frozenset = frozenset()

    def __post_init__(self):
        if self.pipeline not in (SELF_DOCK, CROSS_DOCK):
            raise ValueError(f"pipeline must be {SELF_DOCK!r} or {CROSS_DOCK!r}")


def _dist(v) -> float:
    return math.inf if v is None else float(v)


def _steps(cfg: FilterConfig):
    """(name, required fields, predicate) in selection-table order."""
    steps = [
        ("release_and_resolution", ("release_date", "resolution"),
         lambda e: cfg.release_start <= e.release_date < cfg.release_end and e.resolution <= cfg.max_resolution),
        ("known_ligand", (), lambda e: e.ccd_id.upper() not in UNKNOWN_LIGANDS),
        ("sequence_length", ("sequences",),
         lambda e: bool(e.sequences) and max(map(len, e.sequences)) <= cfg.max_sequence_length),
        ("molecular_weight", ("ligand_mw",), lambda e: cfg.min_mw <= e.ligand_mw <= cfg.max_mw),
        ("heavy_atoms", ("heavy_atom_count",), lambda e: e.heavy_atom_count >= cfg.min_heavy_atoms),
        ("elements", ("elements",), lambda e: e.elements <= cfg.allowed_elements),
        ("not_covalent", ("covalently_bound",), lambda e: not e.covalently_bound),
        ("no_unknown_atoms", (), lambda e: not e.has_unknown_atoms),
        ("rsr", ("rsr",), lambda e: e.rsr <= cfg.max_rsr),
        ("rscc", ("rscc",), lambda e: e.rscc >= cfg.min_rscc),
        ("completeness", ("completeness",), lambda e: e.completeness >= cfg.min_completeness),
        ("conformer_generated", (), lambda e: e.conformer_generated),
        ("sdf_loadable", (), lambda e: e.sdf_loadable),
        ("no_stereo_errors", ("stereo_errors",), lambda e: not e.stereo_errors),
        ("no_clashes", ("atomic_clashes",), lambda e: not e.atomic_clashes),
        ("single_conformation", (), lambda e: True),
        ("protein_distance", ("min_protein_distance",),
         lambda e: _dist(e.min_protein_distance) >= cfg.min_protein_distance),
    ]
    if cfg.pipeline == SELF_DOCK:
        steps += [
            ("other_molecule_distance", ("min_other_ligand_distance",),
             lambda e: _dist(e.min_other_ligand_distance) >= cfg.min_other_molecule_distance),
            ("ion_distance", (), lambda e: _dist(e.min_ion_distance) >= cfg.min_ion_distance),
        ]
    else:
        steps.append(("other_ligand_distance", ("min_other_ligand_distance",),
                      lambda e: _dist(e.min_other_ligand_distance) >= cfg.min_other_ligand_distance))
    steps.append(("symmetry_mate_distance", ("min_symmetry_mate_distance",),
                  lambda e: _dist(e.min_symmetry_mate_distance) > cfg.min_symmetry_mate_distance))
    return [s for s in steps if s[0] not in cfg.disabled]


@dataclass(frozen=True)
class TraceRow:
    step: str
    survivors: int
    unique_pdb: int
    unique_ccd: int
    rejected_ids: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()


@dataclass
class FilterTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def record(self, step: str, survivors: list[ManifestEntry], rejected=(), notes=()) -> None:
        if self.rows and len(survivors) > self.rows[-1].survivors:
            raise AssertionError(f"survivor count increased at step {step}")
        self.rows.append(TraceRow(step, len(survivors), len({e.pdb_id for e in survivors}),
                                  len({e.ccd_id for e in survivors}), tuple(sorted(rejected)), tuple(notes)))

    @property
    def counts(self) -> list[int]:
        return [r.survivors for r in self.rows]

    def get(self, step: str) -> TraceRow:
        for r in self.rows:
            if r.step == step:
                return r
        raise KeyError(step)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "survivors", "unique_pdb", "unique_ccd"])
        for r in self.rows:
            w.writerow([r.step, r.survivors, r.unique_pdb, r.unique_ccd])
        return buf.getvalue()


def _canonical(entries) -> list[ManifestEntry]:
    entries = sorted(entries, key=lambda e: (e.pdb_id, e.ccd_id))
    for a, b in zip(entries, entries[1:]):
        if a.key == b.key:
            raise ManifestError(f"duplicate manifest entry {a.key}")
    return entries


def apply_filters(entries, config: FilterConfig = FilterConfig(), trace: FilterTrace | None = None):
    """Run the sequential selection rows. Returns ``(survivors, trace)``.

    Survivors come back sorted by ``(pdb_id, ccd_id)`` so that the input order
    never influences later steps.
    """
    entries = _canonical(entries)
    steps = _steps(config)
    for e in entries:
        missing = sorted(f for f in {f for _, req, _ in steps for f in req}
                         if f in e.missing or (getattr(e, f) is None and not f.startswith("min_")))
        if missing:
            raise ManifestError(f"{e.key}: manifest field(s) missing for enabled filters: {', '.join(missing)}")
    trace = trace if trace is not None else FilterTrace()
    current = entries
    for name, _, pred in steps:
        keep, drop = [], []
        for e in current:
            (keep if pred(e) else drop).append(e)
        current = keep
        trace.record(name, current, [e.key for e in drop])
    return current, trace


# --------------------------------------------------------------------------- matching

@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple[str, ...]
    right: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        object.__setattr__(self, "edges", tuple(dict.fromkeys(tuple(e) for e in self.edges)))
        ls, rs = set(self.left), set(self.right)
        for u, v in self.edges:
            if u not in ls or v not in rs:
                raise ValueError(f"edge ({u}, {v}) references an undeclared vertex")

    @classmethod
    def from_edges(cls, edges) -> "BipartiteGraph":
        edges = list(edges)
        return cls(tuple(dict.fromkeys(u for u, _ in edges)), tuple(dict.fromkeys(v for _, v in edges)), edges)


def hopcroft_karp(graph: BipartiteGraph) -> list[tuple[str, str]]:
    """Maximum-cardinality matching; neighbours visited in declared order.

    Returns pairs ordered by the left vertex declaration order.
    """
    li = {u: k for k, u in enumerate(graph.left)}
    ri = {v: k for k, v in enumerate(graph.right)}
    adj: list[list[int]] = [[] for _ in graph.left]
    for u, v in graph.edges:
        adj[li[u]].append(ri[v])
    n = len(graph.left)
    match_l = [-1] * n
    match_r = [-1] * len(graph.right)
    inf = n + 1
    dist = [0] * n

    def bfs() -> bool:
        q = deque()
        for u in range(n):
            if match_l[u] < 0:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = inf
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w < 0:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return found

    def dfs(root: int) -> bool:
        # iterative augmenting-path search along the BFS layering
        stack = [(root, iter(adj[root]))]
        path = []
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r[v]
                if w < 0:
                    path.append((u, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[w] == dist[u] + 1:
                    path.append((u, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[u] = inf
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in range(n):
            if match_l[u] < 0:
                dfs(u)
    return [(graph.left[u], graph.right[match_l[u]]) for u in range(n) if match_l[u] >= 0]


def unique_pairs(entries: list[ManifestEntry]) -> list[ManifestEntry]:
    """Entries chosen so every pdb id and every ccd id appears at most once."""
    entries = _canonical(entries)
    graph = BipartiteGraph(sorted({e.pdb_id for e in entries}), sorted({e.ccd_id for e in entries}),
                           [(e.pdb_id, e.ccd_id) for e in entries])
    chosen = set(hopcroft_karp(graph))
    return [e for e in entries if (e.pdb_id, e.ccd_id) in chosen]


# --------------------------------------------------------------------------- clustering

def cluster_sequences(seqs, identity_threshold: float, coverage_threshold: float) -> list[list[str]]:
    """Greedy centroid clustering; each cluster lists its representative first.

    Thresholds are fractions in [0, 1]. Sequences are visited longest first
    (ties by id) and join the first centroid they reach both thresholds
    against.
    """
    items = list(seqs)
    for sid, s in items:
        if not s:
            raise ValueError(f"empty sequence for {sid}")
    items.sort(key=lambda t: (-len(t[1]), t[0]))
    clusters: list[list[str]] = []
    centroids: list[str] = []
    for sid, s in items:
        for k, c in enumerate(centroids):
            aln = seqalign.align(s, c)
            if aln.identity >= identity_threshold and aln.coverage >= coverage_threshold:
                clusters[k].append(sid)
                break
        else:
            clusters.append([sid])
            centroids.append(s)
    return clusters


def _cluster_entries(entries, identity, coverage) -> list[list[ManifestEntry]]:
    by_key = {e.key: e for e in entries}
    missing = [e.key for e in entries if not e.sequences]
    if missing:
        raise ManifestError(f"entries without sequences cannot be clustered: {', '.join(missing)}")
    groups = cluster_sequences([(e.key, e.longest_sequence) for e in entries], identity, coverage)
    return [[by_key[k] for k in g] for g in groups]


# --------------------------------------------------------------------------- pipelines

@dataclass
class SelfDockSet:
    entries: list[ManifestEntry]
    trace: FilterTrace


def build_self_dock_set(entries, config: FilterConfig | None = None,
                        identity: float = 0.0, coverage: float = 1.0) -> SelfDockSet:
    config = config or FilterConfig(pipeline=SELF_DOCK)
    survivors, trace = apply_filters(entries, config)
    matched = unique_pairs(survivors)
    trace.record("unique_pairs", matched, sorted({e.key for e in survivors} - {e.key for e in matched}))
    reps = [g[0] for g in _cluster_entries(matched, identity, coverage)] if matched else []
    reps.sort(key=lambda e: (e.pdb_id, e.ccd_id))
    trace.record("cluster_representatives", reps, sorted({e.key for e in matched} - {e.key for e in reps}))
    return SelfDockSet(reps, trace)


@dataclass(frozen=True)
class CrossPair:
    target: str           # cluster id (reference entry key)
    protein_entry: str
    ligand_entry: str
    protein: ProteinStructure
    ligand: SmallMolecule


@dataclass
class CrossDockSet:
    pairs: list[CrossPair]
    clusters: dict[str, list[str]]          # reference key -> member keys kept
    reports: list[crossdock.CandidateReport]
    trace: FilterTrace


StructureSource = Callable[[ManifestEntry], tuple[ProteinStructure, SmallMolecule]]


def _loader(structures) -> StructureSource:
    if callable(structures):
        return structures
    return lambda e: structures[e.key]


def pick_reference(members: list[ManifestEntry], policy: str = "resolution") -> ManifestEntry:
    if policy != "resolution":
        raise ValueError(f"unknown reference policy {policy!r}")
    return min(members, key=lambda e: (e.resolution, e.pdb_id, e.ccd_id))


def build_cross_dock_set(entries, structures, config: FilterConfig | None = None,
                         identity: float = 0.9, coverage: float = 0.8,
                         reference_policy: str = "resolution",
                         max_ca_rmsd: float = crossdock.MAX_CA_RMSD,
                         max_displacement: float = crossdock.MAX_LIGAND_DISPLACEMENT,
                         workers: int = 1) -> CrossDockSet:
    """Cross-docking pipeline.

    ``structures`` maps an entry key to ``(protein, ligand)`` or is a callable
    taking the entry. Candidates whose C-alpha fit exceeds ``max_ca_rmsd`` are
    dropped entirely; a candidate whose ligand lands more than
    ``max_displacement`` from the reference ligand loses the ligand but its
    protein stays available as a receptor.
    """
    config = config or FilterConfig(pipeline=CROSS_DOCK)
    load = _loader(structures)
    survivors, trace = apply_filters(entries, config)
    groups = _cluster_entries(survivors, identity, coverage) if survivors else []
    multi = [g for g in groups if len(g) > 1]
    clustered = sorted((e for g in multi for e in g), key=lambda e: (e.pdb_id, e.ccd_id))
    trace.record("sequence_clusters", clustered,
                 sorted(e.key for g in groups if len(g) == 1 for e in g))

    jobs = []
    for g in multi:
        ref = pick_reference(g, reference_policy)
        for e in sorted(g, key=lambda e: e.key):
            jobs.append((ref, e))

    def run(job):
        ref, e = job
        ref_protein, ref_ligand = load(ref)
        protein, ligand = load(e)
        if e.key == ref.key:
            row = crossdock.CandidateReport(e.key, 0.0, 0.0, crossdock.ACCEPT, "reference")
            return row, protein, ligand, None
        row, aln, moved = crossdock.evaluate_candidate(e.key, protein, ligand, ref_protein, ref_ligand,
                                                       max_ca_rmsd, max_displacement)
        moved_protein = crossdock.transfer_structure(protein, aln) if aln is not None else None
        return row, moved_protein, moved, aln

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    reports, pairs, clusters = [], [], {}
    kept_entries, rejected, notes = [], [], []
    by_ref: dict[str, list] = {}
    for (ref, e), res in zip(jobs, results):
        by_ref.setdefault(ref.key, []).append((e, res))
    for ref_key in sorted(by_ref):
        proteins, ligands = [], []
        for e, (row, protein, ligand, _) in by_ref[ref_key]:
            reports.append(row)
            if row.decision != crossdock.ACCEPT and row.reason != crossdock.REJECT_LIGAND_SHIFT:
                rejected.append(e.key)
                notes.append(f"{e.key}: {row.reason}")
                continue
            proteins.append((e, protein))
            if row.reason == crossdock.REJECT_LIGAND_SHIFT:
                rejected.append(e.key)
                notes.append(f"{e.key}: {row.reason}")
            else:
                ligands.append((e, ligand))
        cluster_pairs = [CrossPair(ref_key, pe.key, le.key, prot, lig)
                         for le, lig in ligands for pe, prot in proteins if pe.key != le.key]
        if not cluster_pairs:
            continue
        pairs.extend(cluster_pairs)
        members = sorted({p.protein_entry for p in cluster_pairs} | {p.ligand_entry for p in cluster_pairs})
        clusters[ref_key] = members
        kept_entries.extend(e for e, _ in ligands)
    kept_entries.sort(key=lambda e: (e.pdb_id, e.ccd_id))
    trace.record("aligned_to_reference", kept_entries, rejected, notes)
    return CrossDockSet(pairs, clusters, reports, trace)


# --------------------------------------------------------------------------- manifest IO

_BOOL_FIELDS = {"covalently_bound", "stereo_errors", "atomic_clashes", "has_unknown_atoms",
                "conformer_generated", "sdf_loadable"}
_FLOAT_FIELDS = {"resolution", "ligand_mw", "rsr", "rscc", "completeness", "min_protein_distance",
                 "min_other_ligand_distance", "min_symmetry_mate_distance", "min_ion_distance"}


def _csv_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        v = (v or "").strip()
        if k in _BOOL_FIELDS:
            if v.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ManifestError(f"field {k}: expected a boolean, got {v!r}")
            out[k] = v.lower() in ("true", "1", "yes")
        elif k in _FLOAT_FIELDS:
            out[k] = None if v in ("", "none", "null") else float(v)
        elif k == "heavy_atom_count":
            out[k] = int(v)
        elif k in ("elements", "sequences"):
            out[k] = [x for x in v.split(";") if x]
        else:
            out[k] = v
    return out


def load_manifest(path) -> list[ManifestEntry]:
    """Read a manifest: a JSON array of objects or a CSV with ``;``-joined lists."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".csv":
            rows = [_csv_row(r) for r in csv.DictReader(io.StringIO(text))]
        else:
            rows = json.loads(text)
            if not isinstance(rows, list):
                raise ManifestError("manifest JSON must be an array of objects")
    except (json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"{path}: {exc}") from None
    entries = []
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ManifestError(f"manifest row {k} is not an object")
        entries.append(ManifestEntry.from_dict(row))
    return entries
