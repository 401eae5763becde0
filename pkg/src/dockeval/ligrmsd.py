"""Symmetry-corrected heavy-atom RMSD between ligand poses.

Poses are compared in the shared protein frame; no superposition is applied.
The RMSD is minimised over every label-preserving graph isomorphism between
the predicted and reference heavy-atom graphs (element labels on atoms, bond
order labels on edges, aromatic kept distinct).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chemio import SmallMolecule

MAX_ISOMORPHISMS = 10_000


class IsomorphismError(ValueError):
    """The two ligands are not label-isomorphic."""


class SymmetryCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class AtomCorrespondence:
    """Heavy-atom bijection: ``pred_indices[k]`` pairs with ``ref_indices[k]``.

    Indices are positions in the molecules' full ``atoms`` tuples;
    ``pred_indices`` is ascending.
    """

    pred_indices: tuple[int, ...]
    ref_indices: tuple[int, ...]

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.pred_indices, self.ref_indices))

    def inverse(self) -> dict[int, int]:
        return dict(zip(self.ref_indices, self.pred_indices))


class _Graph:
    """Heavy-atom graph in local indices 0..n-1."""

    def __init__(self, mol: SmallMolecule):
        self.atom_index = list(mol.heavy_indices)
        local = {g: i for i, g in enumerate(self.atom_index)}
        self.n = len(self.atom_index)
        self.labels = [mol.atoms[g].element for g in self.atom_index]
        self.adj: list[dict[int, str]] = [{} for _ in range(self.n)]
        for b in mol.heavy_bonds:
            i, j = local[b.a], local[b.b]
            self.adj[i][j] = b.order
            self.adj[j][i] = b.order

    def connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n


def refine_colors(graphs: list[_Graph], rounds: int | None = None) -> list[list[int]]:
    """Colour refinement run jointly over ``graphs`` so colours are comparable.

    Start from (element, degree) and repeatedly split classes by the multiset
    of (bond order, neighbour colour) until stable.
    """
    colors = [[(g.labels[i], len(g.adj[i])) for i in range(g.n)] for g in graphs]
    palette = {c: k for k, c in enumerate(sorted({c for cs in colors for c in cs}))}
    current = [[palette[c] for c in cs] for cs in colors]
    n_classes = len(palette)
    limit = rounds if rounds is not None else max((g.n for g in graphs), default=0) + 1
    for _ in range(limit):
        sigs = [[(cur[i], tuple(sorted((order, cur[j]) for j, order in g.adj[i].items())))
                 for i in range(g.n)] for g, cur in zip(graphs, current)]
        palette = {s: k for k, s in enumerate(sorted({s for ss in sigs for s in ss}))}
        current = [[palette[s] for s in ss] for ss in sigs]
        if len(palette) == n_classes:
            break
        n_classes = len(palette)
    return current


def _search_order(g: _Graph, colors: list[int]) -> list[int]:
    # start at the rarest colour, then grow breadth-first so every new atom
    # (within a component) has an already-mapped neighbour to constrain it
    freq: dict[int, int] = {}
    for c in colors:
        freq[c] = freq.get(c, 0) + 1
    remaining = set(range(g.n))
    order: list[int] = []
    while remaining:
        start = min(remaining, key=lambda i: (freq[colors[i]], i))
        queue = [start]
        remaining.discard(start)
        while queue:
            u = queue.pop(0)
            order.append(u)
            for v in sorted(g.adj[u], key=lambda i: (freq[colors[i]], i)):
                if v in remaining:
                    remaining.discard(v)
                    queue.append(v)
    return order


def _isomorphisms(g1: _Graph, g2: _Graph, cap: int, stop_after: int | None = None) -> list[list[int]]:
    """All label-preserving bijections ``m`` with ``g1`` atom i -> ``g2`` atom m[i]."""
    if g1.n != g2.n or sorted(g1.labels) != sorted(g2.labels):
        return []
    if sum(map(len, g1.adj)) != sum(map(len, g2.adj)):
        return []
    c1, c2 = refine_colors([g1, g2])
    if sorted(c1) != sorted(c2):
        return []
    by_color: dict[int, list[int]] = {}
    for j, c in enumerate(c2):
        by_color.setdefault(c, []).append(j)
    order = _search_order(g1, c1)
    mapping = [-1] * g1.n
    used = [False] * g2.n
    results: list[list[int]] = []

    def extend(depth: int) -> bool:
        if depth == g1.n:
            results.append(mapping.copy())
            if len(results) > cap:
                raise SymmetryCapExceeded(f"more than {cap} isomorphisms")
            return stop_after is not None and len(results) >= stop_after
        u = order[depth]
        mapped_nbrs = [(mapping[w], order_uw) for w, order_uw in g1.adj[u].items() if mapping[w] >= 0]
        for v in by_color[c1[u]]:
            if used[v]:
                continue
            adj_v = g2.adj[v]
            ok = True
            for mv, bo in mapped_nbrs:
                if adj_v.get(mv) != bo:
                    ok = False
                    break
            if not ok:
                continue
            # v must not be bonded to images of u's non-neighbours
            n_mapped_v = sum(1 for w in adj_v if used[w])
            if n_mapped_v != len(mapped_nbrs):
                continue
            mapping[u] = v
            used[v] = True
            if extend(depth + 1):
                return True
            mapping[u] = -1
            used[v] = False
        return False

    extend(0)
    return results


def enumerate_automorphisms(mol: SmallMolecule, cap: int = MAX_ISOMORPHISMS) -> list[AtomCorrespondence]:
    """Every label-preserving automorphism of the heavy-atom graph."""
    g = _Graph(mol)
    if not g.connected():
        raise ValueError(f"{mol.name!r}: heavy-atom graph is disconnected")
    maps = _isomorphisms(g, g, cap)
    idx = g.atom_index
    out = [AtomCorrespondence(tuple(idx), tuple(idx[m[i]] for i in range(g.n))) for m in maps]
    out.sort(key=lambda c: c.ref_indices)
    return out


def find_isomorphism(pred: SmallMolecule, ref: SmallMolecule) -> AtomCorrespondence | None:
    """Any one label-preserving correspondence, or None."""
    g1, g2 = _Graph(pred), _Graph(ref)
    maps = _isomorphisms(g1, g2, cap=1, stop_after=1)
    if not maps:
        return None
    m = maps[0]
    return AtomCorrespondence(tuple(g1.atom_index), tuple(g2.atom_index[m[i]] for i in range(g1.n)))


def best_correspondence(pred: SmallMolecule, ref: SmallMolecule,
                        cap: int = MAX_ISOMORPHISMS) -> tuple[float, AtomCorrespondence]:
    """Minimum-RMSD isomorphism and its RMSD (Å).

    Among correspondences with equal RMSD the lexicographically smallest
    ``ref_indices`` tuple wins.
    """
    g1, g2 = _Graph(pred), _Graph(ref)
    maps = _isomorphisms(g1, g2, cap)
    if not maps:
        raise IsomorphismError(
            f"{pred.name!r} and {ref.name!r} are not isomorphic "
            f"(formula {pred.formula} vs {ref.formula}, "
            f"{len(pred.heavy_bonds)} vs {len(ref.heavy_bonds)} heavy bonds)")
    p = pred.coords[g1.atom_index]
    r = ref.coords[g2.atom_index]
    perms = np.asarray(maps, dtype=np.int64)
    diff = p[None, :, :] - r[perms]
    msd = np.sum(np.sum(diff * diff, axis=2), axis=1) / g1.n
    best = msd.min()
    ties = np.flatnonzero(msd <= best)
    candidates = [tuple(g2.atom_index[k] for k in perms[t]) for t in ties]
    ref_idx = min(candidates)
    return float(np.sqrt(best)), AtomCorrespondence(tuple(g1.atom_index), ref_idx)


def symmetry_rmsd(pred: SmallMolecule, ref: SmallMolecule, symmetric: bool = True) -> float:
    """Heavy-atom RMSD in the shared frame, minimised over ligand symmetry.

    ``symmetric=False`` gives the naive RMSD in file atom order.
    """
    if not symmetric:
        return naive_rmsd(pred, ref)
    return best_correspondence(pred, ref)[0]


def naive_rmsd(pred: SmallMolecule, ref: SmallMolecule) -> float:
    p, r = pred.heavy_coords, ref.heavy_coords
    if p.shape != r.shape:
        raise IsomorphismError(f"heavy atom counts differ: {len(p)} vs {len(r)}")
    diff = p - r
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
