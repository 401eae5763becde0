"""Global (Needleman-Wunsch) sequence alignment with a linear gap penalty.

Shared by chain pairing in cross-docking, pocket correspondence and
sequence clustering. Scoring: match +1, mismatch -1, gap -2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

MATCH, MISMATCH, GAP = 1, -1, -2


@dataclass(frozen=True)
class Alignment:
    score: int
    pairs: tuple[tuple[int, int], ...]  # aligned (i, j) columns, gaps excluded
    columns: int
    matches: int
    len_a: int
    len_b: int

    @property
    def identity(self) -> float:
        """Identical columns over all alignment columns."""
        return self.matches / self.columns if self.columns else 0.0

    @property
    def coverage(self) -> float:
        """Aligned columns over the longer sequence length (both-sided coverage)."""
        longest = max(self.len_a, self.len_b)
        return len(self.pairs) / longest if longest else 0.0

    def identical_pairs(self, a: str, b: str) -> list[tuple[int, int]]:
        return [(i, j) for i, j in self.pairs if a[i] == b[j]]


def _encode(seq: str) -> np.ndarray:
    return np.frombuffer(seq.encode("ascii", errors="replace"), dtype=np.uint8).astype(np.int64)


def align(a: str, b: str, match: int = MATCH, mismatch: int = MISMATCH, gap: int = GAP) -> Alignment:
    """Optimal global alignment of ``a`` and ``b``.

    Traceback prefers diagonal, then a gap in ``b``, then a gap in ``a``.
    """
    h = kernels.nw_matrix(_encode(a), _encode(b), match, mismatch, gap)
    i, j = len(a), len(b)
    pairs = []
    columns = matches = 0
    while i > 0 or j > 0:
        columns += 1
        if i > 0 and j > 0:
            s = match if a[i - 1] == b[j - 1] else mismatch
            if h[i, j] == h[i - 1, j - 1] + s:
                pairs.append((i - 1, j - 1))
                matches += s == match
                i -= 1
                j -= 1
                continue
        if i > 0 and h[i, j] == h[i - 1, j] + gap:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return Alignment(int(h[len(a), len(b)]), tuple(pairs), columns, matches, len(a), len(b))
