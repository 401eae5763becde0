import numpy as np
import pytest

from builders import ca_protein, chain_molecule, isotropic_shell, make_protein, random_rotation
from dockeval import crossdock, seqalign
from dockeval.chemio import ProteinStructure
from dockeval.geom import RigidTransform

# --------------------------------------------------------------------------- sequence alignment

def test_identical_sequences():
    aln = seqalign.align("ACDEFG", "ACDEFG")
    assert aln.score == 6 and aln.identity == 1.0 and aln.coverage == 1.0
    assert aln.pairs == tuple((i, i) for i in range(6))


def test_gap_costs():
    aln = seqalign.align("ACDEFG", "ACDFG")
    assert aln.score == 5 - 2
    assert len(aln.pairs) == 5 and aln.columns == 6


def test_coverage_uses_longer_sequence():
    aln = seqalign.align("AAAAAAAAAA", "AAAAAAAA")
    assert aln.coverage == pytest.approx(0.8)


def test_empty_sequence():
    aln = seqalign.align("", "ACD")
    assert aln.score == -6 and aln.pairs == ()


def _brute_score(a, b):
    # exhaustive recursion over alignments of short strings
    from functools import lru_cache

    @lru_cache(None)
    def best(i, j):
        if i == len(a):
            return -2 * (len(b) - j)
        if j == len(b):
            return -2 * (len(a) - i)
        return max(best(i + 1, j + 1) + (1 if a[i] == b[j] else -1), best(i + 1, j) - 2, best(i, j + 1) - 2)
    return best(0, 0)


def test_score_matches_recursion(rng):
    for _ in range(40):
        a = "".join(rng.choice(list("ACDG"), size=rng.integers(0, 9)))
        b = "".join(rng.choice(list("ACDG"), size=rng.integers(0, 9)))
        aln = seqalign.align(a, b)
        assert aln.score == _brute_score(a, b)
        # the traceback reproduces the reported score
        cols = aln.columns
        s = sum(1 if a[i] == b[j] else -1 for i, j in aln.pairs) - 2 * (cols - len(aln.pairs))
        assert s == aln.score


# --------------------------------------------------------------------------- cross-docking alignment

def test_recovers_rigid_motion(rng):
    ref = make_protein("ACDEFGHIKLMNPQ", zigzag=1.5)
    rot, shift = random_rotation(rng), rng.normal(size=3) * 10
    coords = np.array([a.position for a in ref.atoms()])
    moved = ref.with_positions(coords @ rot.T + shift)
    res = crossdock.align_to_reference(moved, ref)
    assert res.ca_rmsd < 1e-8
    assert res.matched_residue_pairs == 14
    back = crossdock.transfer_structure(moved, res)
    assert np.allclose([a.position for a in back.atoms()], coords, atol=1e-8)


def test_chain_pairing_by_sequence():
    a = make_protein("ACDEFGHIK", chain="A", zigzag=1.5)
    b = make_protein("WWYYWWYYWW", chain="B", origin=(0, 20, 0), zigzag=1.5)
    ref = ProteinStructure(a.chains + b.chains)
    swapped = ProteinStructure((b.chains[0], a.chains[0]))
    res = crossdock.align_to_reference(swapped, ref)
    assert sorted(res.chain_pairs) == [("A", "A"), ("B", "B")]
    assert res.ca_rmsd < 1e-9


def test_only_identical_residues_correspond():
    ref = ca_protein(isotropic_shell()[:10], "ACDEFGHIKL")
    cand = ca_protein(isotropic_shell()[:10], "ACDEFGHIKW")
    assert crossdock.align_to_reference(cand, ref).matched_residue_pairs == 9


def test_no_correspondence():
    ref = ca_protein(isotropic_shell()[:6], "AAAAAA")
    cand = ca_protein(isotropic_shell()[:6], "WWWWWW")
    with pytest.raises(crossdock.AlignmentError, match="correspondence"):
        crossdock.align_to_reference(cand, ref)


def test_too_many_chains():
    chains = tuple(make_protein("ACD", chain=c).chains[0] for c in "ABCDE")
    s = ProteinStructure(chains)
    with pytest.raises(crossdock.AlignmentError, match="chains"):
        crossdock.align_to_reference(s, s)


def test_radial_scaling_gives_exact_rmsd():
    shell = isotropic_shell(5.0)
    seq = "ACDEFGHIKLMNPQRSTVWYACDEFGHIKLMNPQRSTV"[:len(shell)]
    ref = ca_protein(shell, seq)
    cand = ca_protein(shell * 1.5, seq)
    res = crossdock.align_to_reference(cand, ref)
    assert res.ca_rmsd == pytest.approx(2.5, abs=1e-9)
    assert crossdock.candidate_filter(res, 0.0).reason == crossdock.REJECT_ALIGNMENT


@pytest.mark.parametrize("rmsd,shift,expected", [
    (2.0, 4.0, "accept"),
    (2.0001, 0.0, "alignment"),
    (0.5, 4.0001, "ligand-shift"),
    (2.5, 4.5, "alignment"),
])
def test_filter_is_strict(rmsd, shift, expected):
    d = crossdock.candidate_filter(rmsd, shift)
    assert (d.reason or "accept") == expected


def test_displacement_is_centroid_distance():
    lig = chain_molecule(5)
    assert crossdock.ligand_displacement(lig.with_positions(lig.coords + (0, 4.5, 0)), lig) == pytest.approx(4.5)


def test_evaluate_candidate_shifted_ligand():
    ref = make_protein("ACDEFGHIKL", zigzag=1.5)
    lig = chain_molecule(4, start=(5, 5, 5))
    row, aln, moved = crossdock.evaluate_candidate("x", ref, lig.with_positions(lig.coords + (4.5, 0, 0)), ref, lig)
    assert row.decision == "reject" and row.reason == crossdock.REJECT_LIGAND_SHIFT
    assert row.displacement == pytest.approx(4.5)
    text = crossdock.report_csv([row])
    assert text.splitlines()[0] == "candidate_id,ca_rmsd,displacement,decision,reason"


def test_evaluate_candidate_error_row():
    ref = ca_protein(isotropic_shell()[:6], "AAAAAA")
    cand = ca_protein(isotropic_shell()[:6], "WWWWWW")
    row, aln, moved = crossdock.evaluate_candidate("y", cand, chain_molecule(3), ref, chain_molecule(3))
    assert aln is None and moved is None and row.reason.startswith("error")


def test_transfer_ligand_uses_transform():
    lig = chain_molecule(3)
    t = RigidTransform(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(crossdock.transfer_ligand(lig, t).coords, lig.coords + (1, 2, 3))
