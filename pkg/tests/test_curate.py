import json

import pytest

from builders import ca_protein, chain_molecule, isotropic_shell
from dockeval import curate
from dockeval.curate import BipartiteGraph, FilterConfig, ManifestEntry, ManifestError
from oracles import brute_force_matching

SEQ_A = "ACDEFGHIKLMNPQRSTVWY" * 3
SEQ_B = "MKTAYIAKQRQISFVKSHFSRQ" * 2

GOOD = dict(release_date="2023-03-01", resolution=1.8, ligand_mw=300.0, heavy_atom_count=20,
            elements=["C", "N", "O"], covalently_bound=False, rsr=0.1, rscc=0.97, completeness=100.0,
            stereo_errors=False, atomic_clashes=False, sequences=[SEQ_A], min_protein_distance=3.0,
            min_other_ligand_distance=8.0, min_symmetry_mate_distance=9.0)


def entry(pdb, ccd, **kw):
    return ManifestEntry.from_dict({"pdb_id": pdb, "ccd_id": ccd, **{**GOOD, **kw}})


def eight_entries():
    return [
        entry("1AAA", "LIG"),
        entry("1AAB", "LIG", ligand_mw=95.0),
        entry("1AAC", "LIG", heavy_atom_count=2),
        entry("1AAD", "LIG", elements=["C", "Br"]),
        entry("1AAE", "LIG", resolution=2.5),
        entry("1AAF", "LIG", rscc=0.90),
        entry("1AAA", "LG2"),
        entry("2BBB", "LIG", sequences=[SEQ_B]),
    ]


EXPECTED_SELF = {
    "release_and_resolution": 7, "known_ligand": 7, "sequence_length": 7, "molecular_weight": 6,
    "heavy_atoms": 5, "elements": 4, "not_covalent": 4, "no_unknown_atoms": 4, "rsr": 4, "rscc": 3,
    "completeness": 3, "conformer_generated": 3, "sdf_loadable": 3, "no_stereo_errors": 3,
    "no_clashes": 3, "single_conformation": 3, "protein_distance": 3, "other_molecule_distance": 3,
    "ion_distance": 3, "symmetry_mate_distance": 3, "unique_pairs": 2, "cluster_representatives": 2,
}


def test_eight_entry_self_dock_trace():
    result = curate.build_self_dock_set(eight_entries())
    assert {r.step: r.survivors for r in result.trace.rows} == EXPECTED_SELF
    assert [r.step for r in result.trace.rows] == list(EXPECTED_SELF)
    assert [e.key for e in result.entries] == ["1AAA_LG2", "2BBB_LIG"]
    t = result.trace
    assert t.get("molecular_weight").rejected_ids == ("1AAB_LIG",)
    assert t.get("heavy_atoms").rejected_ids == ("1AAC_LIG",)
    assert t.get("elements").rejected_ids == ("1AAD_LIG",)
    assert t.get("release_and_resolution").rejected_ids == ("1AAE_LIG",)
    assert t.get("unique_pairs").unique_pdb == 2 and t.get("unique_pairs").unique_ccd == 2


def test_trace_independent_of_input_order(rng):
    base = curate.build_self_dock_set(eight_entries())
    shuffled = eight_entries()
    rng.shuffle(shuffled)
    other = curate.build_self_dock_set(shuffled)
    assert other.trace.to_csv() == base.trace.to_csv()
    assert [e.key for e in other.entries] == [e.key for e in base.entries]


@pytest.mark.parametrize("kw,step", [
    (dict(release_date="2021-12-31"), "release_and_resolution"),
    (dict(release_date="2025-01-01"), "release_and_resolution"),
    (dict(resolution=2.01), "release_and_resolution"),
    (dict(ligand_mw=900.1), "molecular_weight"),
    (dict(covalently_bound=True), "not_covalent"),
    (dict(has_unknown_atoms=True), "no_unknown_atoms"),
    (dict(rsr=0.21), "rsr"),
    (dict(completeness=99.0), "completeness"),
    (dict(stereo_errors=True), "no_stereo_errors"),
    (dict(atomic_clashes=True), "no_clashes"),
    (dict(min_protein_distance=0.1), "protein_distance"),
    (dict(min_other_ligand_distance=0.1), "other_molecule_distance"),
    (dict(min_ion_distance=0.1), "ion_distance"),
    (dict(min_symmetry_mate_distance=5.0), "symmetry_mate_distance"),
    (dict(sequences=["A" * 2001]), "sequence_length"),
])
def test_single_predicates(kw, step):
    _, trace = curate.apply_filters([entry("1XYZ", "LIG", **kw)])
    assert trace.get(step).rejected_ids == ("1XYZ_LIG",)


@pytest.mark.parametrize("kw", [
    dict(release_date="2022-01-01"), dict(resolution=2.0), dict(ligand_mw=100.0), dict(ligand_mw=900.0),
    dict(heavy_atom_count=3), dict(rsr=0.2), dict(rscc=0.95), dict(min_protein_distance=0.2),
    dict(min_symmetry_mate_distance=5.01), dict(min_other_ligand_distance=None), dict(elements=["Cl", "P", "F", "S"]),
])
def test_boundaries_pass(kw):
    survivors, _ = curate.apply_filters([entry("1XYZ", "LIG", **kw)])
    assert len(survivors) == 1


def test_unknown_ligand_ids():
    survivors, trace = curate.apply_filters([entry("1XYZ", "UNL"), entry("1XYZ", "UNX")])
    assert survivors == [] and trace.get("known_ligand").survivors == 0


def test_cross_dock_other_ligand_threshold():
    cfg = FilterConfig(pipeline=curate.CROSS_DOCK)
    survivors, trace = curate.apply_filters([entry("1XYZ", "LIG", min_other_ligand_distance=4.9)], cfg)
    assert survivors == [] and trace.rows[-2].step == "other_ligand_distance"


def test_missing_field_is_an_error():
    row = {"pdb_id": "1XYZ", "ccd_id": "LIG", **GOOD}
    del row["rscc"]
    with pytest.raises(ManifestError, match="rscc"):
        curate.apply_filters([ManifestEntry.from_dict(row)])
    # disabling the filter lifts the requirement
    survivors, _ = curate.apply_filters([ManifestEntry.from_dict(row)], FilterConfig(disabled=frozenset({"rscc"})))
    assert len(survivors) == 1


def test_unknown_field_and_duplicates():
    with pytest.raises(ManifestError, match="unknown"):
        ManifestEntry.from_dict({"pdb_id": "1", "ccd_id": "A", "colour": "red"})
    with pytest.raises(ManifestError, match="duplicate"):
        curate.apply_filters([entry("1XYZ", "LIG"), entry("1XYZ", "LIG")])


def test_manifest_json_and_csv(tmp_path):
    rows = [{"pdb_id": "1AAA", "ccd_id": "LIG", **GOOD}]
    jp = tmp_path / "m.json"
    jp.write_text(json.dumps(rows))
    (e,) = curate.load_manifest(jp)
    assert e.elements == frozenset({"C", "N", "O"}) and e.sequences == (SEQ_A,)
    cp = tmp_path / "m.csv"
    header = list(rows[0])
    vals = [";".join(v) if isinstance(v, list) else str(v) for v in rows[0].values()]
    cp.write_text(",".join(header) + "\n" + ",".join(vals) + "\n")
    (c,) = curate.load_manifest(cp)
    assert c == e


# --------------------------------------------------------------------------- matching

def random_bipartite(rng):
    nl, nr = int(rng.integers(1, 11)), int(rng.integers(1, 11))
    left = [f"l{i}" for i in range(nl)]
    right = [f"r{j}" for j in range(nr)]
    p = rng.uniform(0.05, 0.6)
    edges = [(u, v) for u in left for v in right if rng.random() < p]
    return BipartiteGraph(left, right, edges)


def test_hopcroft_karp_against_brute_force(rng):
    for _ in range(200):
        g = random_bipartite(rng)
        m = curate.hopcroft_karp(g)
        assert len(m) == brute_force_matching(g.left, g.right, g.edges)
        assert len({u for u, _ in m}) == len(m) == len({v for _, v in m})
        assert set(m) <= set(g.edges)


def test_matching_examples():
    assert curate.hopcroft_karp(BipartiteGraph.from_edges([("a", "x"), ("b", "x")])) == [("a", "x")]
    g = BipartiteGraph.from_edges([("a", "x"), ("a", "y"), ("b", "x")])
    assert sorted(curate.hopcroft_karp(g)) == [("a", "y"), ("b", "x")]
    with pytest.raises(ValueError):
        BipartiteGraph(["a"], ["x"], [("a", "z")])


def test_unique_pairs_prefers_full_cover():
    es = [entry("1AAA", "LIG"), entry("1AAA", "LG2"), entry("2BBB", "LIG")]
    chosen = curate.unique_pairs(es)
    assert [e.key for e in chosen] == ["1AAA_LG2", "2BBB_LIG"]


# --------------------------------------------------------------------------- clustering

def test_cluster_sequences():
    seqs = [("a", SEQ_A), ("b", SEQ_A[:-1]), ("c", SEQ_B)]
    clusters = curate.cluster_sequences(seqs, 0.9, 0.8)
    assert clusters == [["a", "b"], ["c"]]
    # full coverage demanded: the shorter copy no longer joins
    assert curate.cluster_sequences(seqs, 0.9, 1.0) == [["a"], ["b"], ["c"]]
    with pytest.raises(ValueError):
        curate.cluster_sequences([("x", "")], 0.9, 0.8)


# --------------------------------------------------------------------------- cross-docking

def cross_fixture():
    shell = isotropic_shell(5.0)
    seq = SEQ_A[:len(shell)]
    protein = ca_protein(shell, seq)
    ligand = chain_molecule(4, start=(0.5, 0.5, 0.5))
    entries = [
        entry("1REF", "LIG", resolution=1.2, sequences=[seq]),
        entry("2AAA", "LG2", resolution=1.8, sequences=[seq]),
        entry("3BAD", "LG3", resolution=1.9, sequences=[seq]),   # ca_rmsd 2.5
        entry("4SHF", "LG4", resolution=1.9, sequences=[seq]),   # ligand displaced 4.5
        entry("5ONE", "LG5", resolution=1.5, sequences=[SEQ_B]),  # singleton cluster
        entry("6OUT", "LG6", resolution=1.5, sequences=[seq], min_other_ligand_distance=4.0),
    ]
    structures = {
        "1REF_LIG": (protein, ligand),
        "2AAA_LG2": (protein, ligand),
        "3BAD_LG3": (ca_protein(shell * 1.5, seq), ligand),
        "4SHF_LG4": (protein, ligand.with_positions(ligand.coords + (4.5, 0, 0))),
        "5ONE_LG5": (ca_protein(shell, SEQ_B[:len(shell)]), ligand),
    }
    return entries, structures


def test_cross_dock_pipeline():
    entries, structures = cross_fixture()
    result = curate.build_cross_dock_set(entries, structures)
    rows = {r.step: r for r in result.trace.rows}
    assert rows["other_ligand_distance"].rejected_ids == ("6OUT_LG6",)
    assert rows["sequence_clusters"].survivors == 4
    assert rows["sequence_clusters"].rejected_ids == ("5ONE_LG5",)
    aligned = rows["aligned_to_reference"]
    assert aligned.survivors == 2
    assert aligned.rejected_ids == ("3BAD_LG3", "4SHF_LG4")
    reports = {r.candidate_id: r for r in result.reports}
    assert reports["3BAD_LG3"].ca_rmsd == pytest.approx(2.5, abs=1e-9)
    assert reports["3BAD_LG3"].reason == "alignment"
    assert reports["4SHF_LG4"].displacement == pytest.approx(4.5, abs=1e-9)
    assert reports["4SHF_LG4"].reason == "ligand-shift"
    pairs = sorted((p.protein_entry, p.ligand_entry) for p in result.pairs)
    assert pairs == [("1REF_LIG", "2AAA_LG2"), ("2AAA_LG2", "1REF_LIG"),
                     ("4SHF_LG4", "1REF_LIG"), ("4SHF_LG4", "2AAA_LG2")]
    assert list(result.clusters) == ["1REF_LIG"]


def test_cross_dock_workers_match_serial():
    entries, structures = cross_fixture()
    a = curate.build_cross_dock_set(entries, structures)
    b = curate.build_cross_dock_set(entries, structures, workers=3)
    assert a.trace.to_csv() == b.trace.to_csv()
    assert [(p.protein_entry, p.ligand_entry) for p in a.pairs] == [(p.protein_entry, p.ligand_entry) for p in b.pairs]


def test_pick_reference_tie_break():
    es = [entry("9ZZZ", "LIG", resolution=1.0), entry("1AAA", "LIG", resolution=1.0), entry("0BBB", "X", resolution=1.5)]
    assert curate.pick_reference(es).key == "1AAA_LIG"


def test_trace_never_increases():
    t = curate.FilterTrace()
    t.record("a", [entry("1AAA", "LIG")])
    with pytest.raises(AssertionError):
        t.record("b", [entry("1AAA", "LIG"), entry("2BBB", "LIG")])
