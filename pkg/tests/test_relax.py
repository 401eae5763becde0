import time

import numpy as np
import pytest

from builders import chain_molecule, clash_fixture, make_protein
from dockeval import relax, validity
from dockeval.relax import RelaxConfig, RelaxSystem

H = 1e-5  # nm


def numeric_gradient(system, x, h=H):
    g = np.zeros_like(x)
    for a in range(len(x)):
        for c in range(3):
            xp, xm = x.copy(), x.copy()
            xp[a, c] += h
            xm[a, c] -= h
            g[a, c] = (relax.energy_gradient(system, xp)[0] - relax.energy_gradient(system, xm)[0]) / (2 * h)
    return g


def random_system(rng, term: str, n: int = 5) -> RelaxSystem:
    x = rng.normal(size=(n, 3)) * 0.3
    i = np.arange(n - 1)
    j = i + 1
    if term == "restraint":
        return RelaxSystem(x, restraint_atoms=np.arange(n), restraint_anchors=x + rng.normal(size=(n, 3)) * 0.2,
                           restraint_k=rng.uniform(1, 50, n))
    if term == "bond":
        return RelaxSystem(x, bond_i=i, bond_j=j, bond_length=rng.uniform(0.1, 0.2, n - 1),
                           bond_k=rng.uniform(1e3, 1e5, n - 1))
    # repulsion onsets longer than typical separations so most pairs are active
    return RelaxSystem(x, rep_i=i, rep_j=j, rep_distance=rng.uniform(0.4, 1.2, n - 1),
                       rep_k=rng.uniform(1e2, 1e4, n - 1))


def relative_gradient_error(system) -> float:
    _, g = relax.energy_gradient(system)
    num = numeric_gradient(system, system.coords)
    return float(np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-12))


@pytest.mark.parametrize("term", ["restraint", "bond", "repulsion"])
def test_gradient_matches_finite_differences(backend, term):
    rng = np.random.default_rng(7)
    worst = max(relative_gradient_error(random_system(rng, term)) for _ in range(100))
    assert worst < 1e-4


def test_restraint_example():
    s = RelaxSystem(np.array([[1.0, 0.0, 0.0]]), restraint_atoms=[0], restraint_anchors=[[0.0, 0.0, 0.0]],
                    restraint_k=[10.0])
    e, g = relax.energy_gradient(s)
    assert e == 5.0
    assert np.linalg.norm(g) == 10.0


def test_repulsion_is_one_sided():
    s = RelaxSystem(np.array([[0.0, 0, 0], [0.5, 0, 0]]), rep_i=[0], rep_j=[1], rep_distance=[0.3], rep_k=[100.0])
    e, g = relax.energy_gradient(s)
    assert e == 0.0 and not g.any()


def test_bad_coordinates_rejected():
    s = RelaxSystem(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        relax.energy_gradient(s, np.full((2, 3), np.nan))
    with pytest.raises(ValueError):
        relax.energy_gradient(s, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        RelaxSystem(np.zeros((2, 3)), bond_i=[0], bond_j=[5], bond_length=[0.1], bond_k=[1.0])


def test_config_validation():
    with pytest.raises(ValueError):
        RelaxConfig(k_bond=0)
    with pytest.raises(ValueError):
        RelaxConfig(clash_margin=-1)


# --------------------------------------------------------------------------- system construction

def test_backbone_restraints_per_residue():
    protein, lig = clash_fixture()
    s = relax.build_system(protein, lig)
    assert len(s.restraint_atoms) == 40
    assert np.all(s.restraint_k == RelaxConfig().k_backbone)


def test_repulsion_pairs_respect_cutoff():
    protein, lig = clash_fixture()
    cfg = RelaxConfig()
    s = relax.build_system(protein, lig, cfg)
    assert s.n_ligand_protein_pairs > 0
    d = np.linalg.norm(s.coords[s.rep_i] - s.coords[s.rep_j], axis=1)
    assert np.all(d <= cfg.neighbor_cutoff)
    far = chain_molecule(4, start=(0, 0, 80))
    assert relax.build_system(protein, far, cfg).n_ligand_protein_pairs == 0


def test_ligand_bonds_kept():
    protein, lig = clash_fixture()
    s = relax.build_system(protein, lig)
    assert s.n_ligand_bonds == 3


# --------------------------------------------------------------------------- minimisation

def test_fixed_point_without_forces():
    protein = make_protein("AAAAA")
    lig = chain_molecule(4, start=(0, 0, 80))
    res = relax.relax_complex(protein, lig)
    assert res.stats.iterations == 0 and res.stats.converged
    assert np.array_equal(res.ligand.coords, lig.coords)


def test_clash_fixture_relaxes():
    protein, lig = clash_fixture(depth=1.0)
    t0 = time.perf_counter()
    system = relax.build_system(protein, lig)
    result = relax.minimize(system)
    assert result.converged and result.iterations <= 2000
    assert result.final_max_gradient <= 10.0
    assert all(b <= a for a, b in zip(result.energies, result.energies[1:]))

    out = relax.relax_complex(protein, lig)
    assert time.perf_counter() - t0 < 30
    before = next(c for c in validity.check_intermolecular(lig, protein) if c.name == "minimum_distance_to_protein")
    after = next(c for c in validity.check_intermolecular(out.ligand, out.protein)
                 if c.name == "minimum_distance_to_protein")
    assert before.status == "fail" and after.status == "pass"
    assert out.stats.clash_count_before > 0 and out.stats.clash_count_after == 0

    bb = [k for k, a in enumerate(protein.atoms()) if a.name in ("N", "CA", "C", "O")]
    p0 = np.array([a.position for a in protein.atoms()])
    p1 = np.array([a.position for a in out.protein.atoms()])
    backbone_disp = np.linalg.norm(p1[bb] - p0[bb], axis=1).mean()
    ligand_disp = np.linalg.norm(out.ligand.coords - lig.coords, axis=1).mean()
    assert backbone_disp < ligand_disp


def test_deterministic():
    protein, lig = clash_fixture()
    a = relax.relax_complex(protein, lig)
    b = relax.relax_complex(protein, lig)
    assert np.array_equal(a.ligand.coords, b.ligand.coords)
    assert a.stats == b.stats


def test_budget_exhaustion_reported():
    protein, lig = clash_fixture()
    res = relax.relax_complex(protein, lig, RelaxConfig(max_iterations=1))
    assert not res.stats.converged
    assert "budget" in res.stats.diagnostic


def test_hydrogens_follow_parent():
    from builders import molecule
    protein, lig = clash_fixture()
    xyz = np.vstack([lig.coords, lig.coords[0] + (0.0, 1.0, 0.0)])
    with_h = molecule(["C"] * 4 + ["H"], xyz, [(0, 1), (1, 2), (2, 3), (0, 4)])
    out = relax.relax_complex(protein, with_h)
    shift = out.ligand.coords - with_h.coords
    assert np.allclose(shift[4], shift[0])


def test_topology_unchanged():
    protein, lig = clash_fixture()
    out = relax.relax_complex(protein, lig)
    assert [a.name for a in out.protein.atoms()] == [a.name for a in protein.atoms()]
    assert out.ligand.bonds == lig.bonds


def test_rigid_motion_invariance(rng):
    from builders import random_rotation
    protein, lig = clash_fixture()
    s = relax.build_system(protein, lig)
    e0, g0 = relax.energy_gradient(s)
    rot, shift = random_rotation(rng), rng.normal(size=3)
    moved = RelaxSystem(s.coords @ rot.T + shift, s.restraint_atoms, s.restraint_anchors @ rot.T + shift,
                        s.restraint_k, s.bond_i, s.bond_j, s.bond_length, s.bond_k,
                        s.rep_i, s.rep_j, s.rep_distance, s.rep_k)
    e1, g1 = relax.energy_gradient(moved)
    assert e1 == pytest.approx(e0, rel=1e-10)
    assert np.allclose(np.linalg.norm(g1, axis=1), np.linalg.norm(g0, axis=1), rtol=1e-8, atol=1e-8)


def test_construction_errors():
    from dockeval.chemio import Atom, Chain, ProteinStructure, Residue, SmallMolecule
    protein, lig = clash_fixture()
    # the model refuses hydrogen-only molecules, so bypass its validation
    hydrogen_only = object.__new__(SmallMolecule)
    for k, v in dict(name="h", atoms=(Atom("H", (0.0, 0, 0)),), bonds=(), category=None, properties={}).items():
        object.__setattr__(hydrogen_only, k, v)
    with pytest.raises(relax.RelaxError, match="empty"):
        relax.build_system(protein, hydrogen_only)
    odd = ProteinStructure((Chain("A", (Residue("A", "XYZ", 1, "", (Atom("C", (0.0, 0, 0), name="CA"),)),)),))
    with pytest.raises(relax.RelaxError, match="template"):
        relax.build_system(odd, lig)
