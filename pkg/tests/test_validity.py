import json
import math

import numpy as np
import pytest

from builders import benzene, chain_molecule, make_protein, molecule
from dockeval import validity
from dockeval.chemio import DOUBLE, Atom, Chain, ProteinStructure, Residue, SmallMolecule
from dockeval.validity import FAIL, PASS, SKIPPED, CheckResult, ValidityReport


def _intra(mol, name, **kw):
    return next(c for c in validity.check_intramolecular(mol, **kw) if c.name == name)


def _inter(mol, protein, name):
    return next(c for c in validity.check_intermolecular(mol, protein) if c.name == name)


def protein_atom(xyz, element="C", name="CB"):
    atoms = (Atom(element, tuple(xyz), name=name),)
    return ProteinStructure((Chain("A", (Residue("A", "ALA", 1, "", atoms),)),))


def with_cofactor(xyz, element, resname, category):
    group = SmallMolecule(resname, (Atom(element, tuple(xyz), hetero=True),), category=category)
    far = protein_atom((100.0, 100.0, 100.0))
    return ProteinStructure(far.chains, (group,))


# --------------------------------------------------------------------------- report semantics

def test_pb_valid_conjunction_and_skips():
    ok = CheckResult("a", PASS)
    rep = ValidityReport((ok,), (CheckResult("b", SKIPPED),))
    assert rep.pb_valid and rep.skipped_count == 1
    assert not ValidityReport((ok, CheckResult("c", FAIL))).pb_valid


def test_report_json_is_stable():
    mol = chain_molecule(5)
    a = validity.validate(mol, mol, make_protein()).to_json()
    b = validity.validate(mol, mol, make_protein()).to_json()
    assert a == b
    data = json.loads(a)
    assert set(data) >= {"chemistry", "intramolecular", "intermolecular", "pb_valid", "skipped_count"}


def test_load_failure_report():
    rep = validity.load_failure_report("bad file")
    assert not rep.pb_valid
    assert rep.failed_checks == ["mol_pred_loaded"]


# --------------------------------------------------------------------------- chemistry

def test_identical_ligand_chemistry_passes():
    mol = chain_molecule(6)
    assert all(c.status == PASS for c in validity.check_chemistry(mol, mol))


def test_formula_mismatch():
    a = chain_molecule(4)
    b = molecule(["C", "C", "C", "N"], a.coords, [(0, 1), (1, 2), (2, 3)])
    res = {c.name: c.status for c in validity.check_chemistry(a, b)}
    assert res["molecular_formula"] == FAIL and res["molecular_bonds"] == FAIL
    assert res["tetrahedral_chirality"] == SKIPPED


def test_bond_mismatch_same_formula():
    a = molecule(["C"] * 4, np.eye(4, 3) * 1.5, [(0, 1), (1, 2), (2, 3)])
    b = molecule(["C"] * 4, np.eye(4, 3) * 1.5, [(0, 1), (0, 2), (0, 3)])
    res = {c.name: c.status for c in validity.check_chemistry(a, b)}
    assert res["molecular_formula"] == PASS and res["molecular_bonds"] == FAIL


def _chiral():
    # C bonded to N, O, S and a methyl carbon: four distinct neighbours
    xyz = np.array([[0, 0, 0], [1.0, 1, 1], [-1, -1, 1], [-1, 1, -1], [1, -1, -1]], dtype=float)
    return molecule(["C", "N", "O", "S", "C"], xyz, [(0, 1), (0, 2), (0, 3), (0, 4)])


def test_tetrahedral_inversion_detected():
    ref = _chiral()
    mirror = ref.with_positions(ref.coords * (1, 1, -1))
    res = {c.name: c.status for c in validity.check_chemistry(mirror, ref)}
    assert res["tetrahedral_chirality"] == FAIL
    res = {c.name: c.status for c in validity.check_chemistry(ref, ref)}
    assert res["tetrahedral_chirality"] == PASS


def _alkene(trans: bool):
    y = -1.2 if trans else 1.2
    xyz = [(-0.67, 0, 0), (0.67, 0, 0), (-1.4, 1.2, 0), (1.4, y, 0)]
    return molecule(["C", "C", "N", "O"], xyz, [(0, 1, DOUBLE), (0, 2), (1, 3)])


def test_double_bond_flip_detected():
    res = {c.name: c.status for c in validity.check_chemistry(_alkene(True), _alkene(False))}
    assert res["double_bond_stereochemistry"] == FAIL
    res = {c.name: c.status for c in validity.check_chemistry(_alkene(True), _alkene(True))}
    assert res["double_bond_stereochemistry"] == PASS


# --------------------------------------------------------------------------- intramolecular

def test_ideal_geometry_passes():
    for mol in (chain_molecule(6), benzene()):
        checks = {c.name: c.status for c in validity.check_intramolecular(mol)}
        assert checks["bond_lengths"] == PASS
        assert checks["bond_angles"] == PASS
        assert checks["internal_energy"] == SKIPPED


def test_compressed_bond_fails():
    mol = chain_molecule(3)
    xyz = mol.coords.copy()
    xyz[1] = xyz[0] + 0.5 * (xyz[1] - xyz[0])
    xyz[2] = xyz[1] + (mol.coords[2] - mol.coords[1])
    assert _intra(mol.with_positions(xyz), "bond_lengths").status == FAIL


def _two_atoms(d):
    return molecule(["C", "C"], [(0, 0, 0), (d, 0, 0)], [(0, 1)])


@pytest.mark.parametrize("d,status", [(1.07, FAIL), (1.09, PASS), (2.04, PASS), (2.06, FAIL)])
def test_bond_length_boundaries(d, status):
    # C-C single: ideal 1.54 +- 0.10, scaled to [0.75 * 1.44, 1.25 * 1.64] = [1.08, 2.05]
    assert _intra(_two_atoms(d), "bond_lengths").status == status


def _angle(theta_deg):
    t = math.radians(theta_deg)
    return molecule(["C"] * 3, [(1.54, 0, 0), (0, 0, 0), (1.54 * math.cos(t), 1.54 * math.sin(t), 0)],
                    [(0, 1), (1, 2)])


@pytest.mark.parametrize("theta,status", [(74.5, FAIL), (74.7, PASS), (149.2, PASS), (149.5, FAIL)])
def test_bond_angle_boundaries(theta, status):
    # sp3 ideal 109.47 +- 10, scaled to [0.75 * 99.47, 1.25 * 119.47] = [74.60, 149.34]
    assert _intra(_angle(theta), "bond_angles").status == status


def _puckered_ring(t):
    ring = benzene()
    z = np.array([t, -t] * 3)
    return ring.with_positions(ring.coords + np.c_[np.zeros((6, 2)), z])


@pytest.mark.parametrize("t,status", [(0.24, PASS), (0.25, PASS), (0.26, FAIL)])
def test_aromatic_flatness_boundaries(t, status):
    # alternating +-t puckering: the best plane stays z = 0, max deviation t
    c = _intra(_puckered_ring(t), "aromatic_ring_flatness")
    assert c.measured == pytest.approx(t, abs=1e-9)
    assert c.status == status


def test_ring_atom_displaced_half_angstrom_fails():
    ring = benzene()
    xyz = ring.coords.copy()
    xyz[[0, 3], 2] += 0.5
    assert _intra(ring.with_positions(xyz), "aromatic_ring_flatness").status == FAIL


def _twisted_alkene(t):
    xyz = np.array([(-0.67, 0, 0), (0.67, 0, 0), (-1.4, 1.2, t), (-1.4, -1.2, -t),
                    (1.4, 1.2, -t), (1.4, -1.2, t)])
    return molecule(["C"] * 6, xyz, [(0, 1, DOUBLE), (0, 2), (0, 3), (1, 4), (1, 5)])


@pytest.mark.parametrize("t,status", [(0.24, PASS), (0.26, FAIL)])
def test_double_bond_flatness_boundaries(t, status):
    c = _intra(_twisted_alkene(t), "double_bond_flatness")
    assert c.measured == pytest.approx(t, abs=1e-9)
    assert c.status == status


def _clash_chain(d):
    # 0-1-2-3 with atoms 0 and 3 at distance d (three bonds apart)
    xyz = [(0, 0, 0), (0, 1.5, 0), (d, 1.5, 0), (d, 0, 0)]
    return molecule(["C"] * 4, xyz, [(0, 1), (1, 2), (2, 3)])


@pytest.mark.parametrize("d,status", [(2.37, FAIL), (2.38, FAIL), (2.39, PASS)])
def test_internal_clash_boundaries(d, status):
    # strict: distance must exceed 0.7 * (1.7 + 1.7) = 2.38 Å
    assert _intra(_clash_chain(d), "internal_steric_clash").status == status


class _Energies:
    def __init__(self, pose, mean):
        self.values = (pose, mean)

    def energies(self, mol):
        return self.values


@pytest.mark.parametrize("pose,status", [(100.0, PASS), (100.01, FAIL)])
def test_energy_ratio_boundaries(pose, status):
    c = _intra(chain_molecule(4), "internal_energy", energy_provider=_Energies(pose, 1.0))
    assert c.status == status


def test_bounds_from_csv(tmp_path):
    p = tmp_path / "bounds.csv"
    p.write_text("kind,a,b,order,value\nbond,C,C,single,1.20\nangle,sp3,,,100\n")
    table = validity.BoundsTable.from_csv(p)
    assert table.ideal_length("C", "C", "single") == 1.20
    assert table.angles["sp3"] == 100.0


# --------------------------------------------------------------------------- intermolecular

def test_far_ligand_passes_everything():
    lig = chain_molecule(4, start=(0, 0, 60))
    assert all(c.status == PASS for c in validity.check_intermolecular(lig, make_protein()))


def test_coincident_atom_fails():
    lig = molecule(["C"], [(0, 0, 0)])
    assert _inter(lig, protein_atom((0, 0, 0)), "minimum_distance_to_protein").status == FAIL


@pytest.mark.parametrize("d,status", [(2.54, FAIL), (2.55, FAIL), (2.56, PASS)])
def test_protein_distance_boundaries(d, status):
    lig = molecule(["C"], [(0, 0, 0)])
    assert _inter(lig, protein_atom((d, 0, 0)), "minimum_distance_to_protein").status == status


@pytest.mark.parametrize("d,status", [(2.54, FAIL), (2.56, PASS)])
def test_organic_cofactor_distance_boundaries(d, status):
    lig = molecule(["C"], [(0, 0, 0)])
    prot = with_cofactor((d, 0, 0), "C", "LIG", "organic")
    assert _inter(lig, prot, "minimum_distance_to_organic_cofactors").status == status


@pytest.mark.parametrize("d,status", [(1.47, FAIL), (1.50, PASS)])
def test_inorganic_cofactor_distance_boundaries(d, status):
    # covalent radii: 0.75 * (0.76 + 1.22) = 1.485 Å
    lig = molecule(["C"], [(0, 0, 0)])
    prot = with_cofactor((d, 0, 0), "Zn", "ZN", "inorganic")
    assert _inter(lig, prot, "minimum_distance_to_inorganic_cofactors").status == status


def test_waters_ignored():
    lig = molecule(["C"], [(0, 0, 0)])
    prot = with_cofactor((0.5, 0, 0), "O", "HOH", "water")
    assert all(c.status == PASS for c in validity.check_intermolecular(lig, prot))


def _lens_fraction(r, d):
    return math.pi * (4 * r + d) * (2 * r - d) ** 2 / 12 / (4 / 3 * math.pi * r ** 3)


def _distance_for_fraction(r, frac):
    lo, hi = 0.0, 2 * r
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if _lens_fraction(r, mid) > frac else (lo, mid)
    return (lo + hi) / 2


@pytest.mark.parametrize("frac,status", [(0.07, PASS), (0.08, FAIL)])
def test_volume_overlap_boundaries(backend, frac, status):
    r = 1.7 * validity.PROTEIN_VOLUME_SCALE
    d = _distance_for_fraction(r, frac)
    lig = molecule(["C"], [(0, 0, 0)])
    c = _inter(lig, protein_atom((d, 0, 0)), "volume_overlap_with_protein")
    assert c.measured == pytest.approx(frac, abs=0.004)
    assert c.status == status


def _unequal_lens_fraction(r1, r2, d):
    if d >= r1 + r2:
        return 0.0
    v = math.pi * (r1 + r2 - d) ** 2 * (d * d + 2 * d * (r1 + r2) - 3 * (r1 - r2) ** 2) / (12 * d)
    return v / (4 / 3 * math.pi * r1 ** 3)


def _inorganic_distance(frac):
    rc, rz = 1.7 * validity.INORGANIC_VOLUME_SCALE, 1.39 * validity.INORGANIC_VOLUME_SCALE
    lo, hi = abs(rc - rz) + 1e-6, rc + rz
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if _unequal_lens_fraction(rc, rz, mid) > frac else (lo, mid)
    return lo


@pytest.mark.parametrize("frac,status", [(0.07, PASS), (0.08, FAIL)])
def test_inorganic_overlap_uses_half_radii(frac, status):
    lig = molecule(["C"], [(0, 0, 0)])
    prot = with_cofactor((_inorganic_distance(frac), 0, 0), "Zn", "ZN", "inorganic")
    c = _inter(lig, prot, "volume_overlap_with_inorganic_cofactors")
    assert c.measured == pytest.approx(frac, abs=0.006)
    assert c.status == status


@pytest.mark.parametrize("scale", [validity.PROTEIN_VOLUME_SCALE, validity.INORGANIC_VOLUME_SCALE])
def test_overlap_grid_converged(scale):
    # halving the grid spacing moves the estimate by under one percentage point
    rng = np.random.default_rng(3)
    prot = make_protein("ACDEFGHIKLMN", zigzag=1.5).polymer_heavy_coords
    spacing = validity.GRID_SPACING * min(1.0, scale / validity.PROTEIN_VOLUME_SCALE)
    worst = 0.0
    for t in range(60):
        lig = chain_molecule(int(rng.integers(3, 12))) if t % 2 else benzene()
        x = lig.coords - lig.coords.mean(0) + prot[rng.integers(len(prot))] + rng.normal(size=3) * 1.5 + (0, 0, 2.5)
        rl, rp = np.full(len(x), 1.7 * scale), np.full(len(prot), 1.7 * scale)
        a = validity.overlap_fraction(x, rl, prot, rp, spacing)
        b = validity.overlap_fraction(x, rl, prot, rp, spacing / 2)
        worst = max(worst, abs(a - b))
    assert worst < 0.01


def test_overlap_fraction_full_containment():
    assert validity.overlap_fraction([[0, 0, 0]], [1.0], [[0, 0, 0]], [2.0]) == 1.0
    assert validity.overlap_fraction([[0, 0, 0]], [1.0], [[10, 0, 0]], [1.0]) == 0.0


def test_validate_without_protein_or_reference():
    rep = validity.validate(chain_molecule(4))
    assert rep.intermolecular == ()
    assert rep.pb_valid


def test_aromatic_ring_check_skipped_rings():
    assert _intra(chain_molecule(4), "aromatic_ring_flatness").status == PASS
