import mpmath
import numpy as np
import pytest

from builders import isotropic_shell, make_protein, molecule, random_rotation
from dockeval import pocketsim
from dockeval.pocketsim import Pocket, PocketError


def pocket(coords, seq=None, source=""):
    coords = np.asarray(coords, dtype=float)
    return Pocket((), coords, seq or "A" * len(coords), source)


def test_d0_values():
    expected = float(mpmath.mpf("1.24") * mpmath.cbrt(70) - mpmath.mpf("1.8"))
    assert pocketsim.tm_d0(85) == pytest.approx(expected, abs=1e-9)
    assert pocketsim.tm_d0(10) == 0.5
    assert pocketsim.tm_d0(19) == 0.5  # the formula dips below the floor for small pockets
    with pytest.raises(ValueError):
        pocketsim.tm_d0(0)


def test_self_similarity(rng):
    p = pocket(rng.normal(size=(30, 3)) * 6)
    assert pocketsim.pocket_tm_score(p, p) == pytest.approx(1.0, abs=1e-9)
    rot = random_rotation(rng)
    moved = pocket(p.ca_coords @ rot.T + (5, -3, 2))
    assert pocketsim.pocket_tm_score(moved, p) == pytest.approx(1.0, abs=1e-9)


def test_all_pairs_at_d0():
    ref = pocket(isotropic_shell(8.0))
    d0 = pocketsim.tm_d0(ref.size)
    assert d0 > 0.5
    query = pocket(isotropic_shell(8.0 + d0))
    assert pocketsim.pocket_tm_score(query, ref) == pytest.approx(0.5, abs=1e-9)


def test_normalised_by_reference(rng):
    seq = "ACDEFGHIKLMNPQRSTVWY"
    ref = pocket(rng.normal(size=(20, 3)) * 5, seq)
    sub = pocket(ref.ca_coords[:10], seq[:10])
    assert pocketsim.pocket_tm_score(sub, ref) == pytest.approx(0.5, abs=1e-9)
    assert pocketsim.pocket_tm_score(ref, sub) == pytest.approx(1.0, abs=1e-9)


def test_score_range(rng):
    for _ in range(20):
        a = pocket(rng.normal(size=(12, 3)) * 5)
        b = pocket(rng.normal(size=(15, 3)) * 5)
        assert 0.0 <= pocketsim.pocket_tm_score(a, b) <= 1.0


def test_small_pocket_errors():
    with pytest.raises(PocketError):
        pocketsim.pocket_tm_score(pocket(np.zeros((4, 3))), pocket(np.eye(6, 3)))
    with pytest.raises(PocketError, match="matched"):
        pocketsim.pocket_tm_score(pocket(np.eye(6, 3), "WWWWWW"), pocket(np.eye(6, 3), "AAAAAA"))


def test_extraction_cutoff_inclusive():
    # residue 1 CB sits at x = 0; put the ligand atom 10 Å away along -x from the N atom
    protein = make_protein("ACDEFGHIKLMNPQRSTVWY", spacing=3.8)
    n_atom = protein.chains[0].residues[0].atom("N").position
    lig = molecule(["C"], [np.subtract(n_atom, (10.0, 0.0, 0.0))])
    p = pocketsim.extract_pocket(protein, lig)
    assert [r.seq_number for r in p.residues] == [1]
    lig_far = molecule(["C"], [np.subtract(n_atom, (10.0 + 1e-9, 0.0, 0.0))])
    with pytest.raises(PocketError):
        pocketsim.extract_pocket(protein, lig_far)


def test_extraction_ignores_hydrogens():
    from dockeval.chemio import Atom, Chain, ProteinStructure, Residue
    res = Residue("A", "ALA", 1, "", (Atom("C", (20.0, 0, 0), name="CA"), Atom("H", (1.0, 0, 0), name="H")))
    prot = ProteinStructure((Chain("A", (res,)),))
    with pytest.raises(PocketError):
        pocketsim.extract_pocket(prot, molecule(["C"], [(0, 0, 0)]))


def test_corpus_max_and_ties(rng):
    q = pocket(rng.normal(size=(10, 3)) * 5)
    corpus = [("b", q), ("a", q), ("c", pocket(rng.normal(size=(10, 3)) * 5)), ("bad", pocket(np.zeros((3, 3))))]
    m = pocketsim.max_similarity_vs_corpus(q, corpus)
    assert m.best_match_id == "a" and m.score == pytest.approx(1.0) and m.failed == 1
    with pytest.raises(PocketError):
        pocketsim.max_similarity_vs_corpus(q, [])


def test_stratify_boundary():
    sim, dis = pocketsim.stratify([("x", 0.70), ("y", 0.6999)])
    assert [s[0] for s in sim] == ["x"] and [d[0] for d in dis] == ["y"]


def test_corpus_index_date_filter(tmp_path):
    idx = tmp_path / "corpus.csv"
    idx.write_text("entry_id,protein_path,ligand_path,release_date\n"
                   "old,p.pdb,l.sdf,2020-05-01\nnew,p.pdb,l.sdf,2023-01-01\n")
    rows = pocketsim.read_corpus_index(idx, released_before="2021-09-30")
    assert [r.entry_id for r in rows] == ["old"]
    assert rows[0].protein_path == tmp_path / "p.pdb"
