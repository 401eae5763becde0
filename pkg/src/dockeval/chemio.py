"""Readers and writers for SDF V2000 ligands and fixed-column PDB proteins.

Parsed structures are immutable dataclasses. Hydrogens are kept but every
geometric routine downstream works on heavy atoms only.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn "
    "Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl "
    "Mc Lv Ts Og"
).split()
_ELEMENT_SET = frozenset(ELEMENTS)
_ELEMENT_LOOKUP = {e.upper(): e for e in ELEMENTS}
_ELEMENT_LOOKUP.update({"D": "H", "T": "H"})

METALS = frozenset(
    "Li Be Na Mg Al K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn Ga Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag "
    "Cd In Sn Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au "
    "Hg Tl Pb Bi Po Fr Ra Ac Th Pa U Np Pu Am".split()
)

WATER_NAMES = frozenset({"HOH", "WAT", "DOD", "H2O", "TIP", "TIP3", "SOL"})
# residue names treated as inorganic even when polyatomic
ION_NAMES = frozenset({
    "NA", "K", "LI", "MG", "CA", "ZN", "FE", "FE2", "FE3", "MN", "MN3", "CU", "CU1", "CU3",
    "CO", "3CO", "NI", "CD", "HG", "SR", "BA", "CS", "RB", "AL", "GA", "PT", "AU", "AG",
    "PB", "CL", "BR", "IOD", "F", "SO4", "PO4", "NO3", "SCN", "CYN", "AZI", "FES", "SF4",
    "F3S", "MOO", "WO4", "VO4", "NH4", "OH",
})
# HETATM residues that belong to the polymer chain
MODIFIED_RESIDUES = frozenset({"MSE", "SEP", "TPO", "PTR", "CSO", "HYP", "MLY", "KCX", "LLP"})

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C", "GLN": "Q", "GLU": "E",
    "GLY": "G", "HIS": "H", "ILE": "I", "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F",
    "PRO": "P", "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
    "MSE": "M", "SEP": "S", "TPO": "T", "PTR": "Y", "HID": "H", "HIE": "H", "HIP": "H",
    "HSD": "H", "HSE": "H", "HSP": "H", "CYX": "C", "CSO": "C", "HYP": "P", "MLY": "K",
    "KCX": "K", "LLP": "K", "SEC": "U", "PYL": "O",
}

BACKBONE_NAMES = ("N", "CA", "C", "O")

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
_ORDER_FROM_CODE = {1: SINGLE, 2: DOUBLE, 3: TRIPLE, 4: AROMATIC}
_CODE_FROM_ORDER = {v: k for k, v in _ORDER_FROM_CODE.items()}

_SDF_CHARGE_CODES = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}
_SDF_CODE_FROM_CHARGE = {v: k for k, v in _SDF_CHARGE_CODES.items() if k != 4}


class ParseError(ValueError):
    """Malformed structure input. ``line`` is 1-based, or None if unknown."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def normalize_element(symbol: str) -> str:
    """Canonical element symbol, or raise ``KeyError`` for unknown symbols."""
    return _ELEMENT_LOOKUP[symbol.strip().upper()]


@dataclass(frozen=True)
class Atom:
    element: str
    position: tuple[float, float, float]
    formal_charge: int = 0
    serial: int = 0
    name: str = ""
    altloc: str = ""
    occupancy: float = 1.0
    bfactor: float = 0.0
    hetero: bool = False

    def __post_init__(self):
        if self.element not in _ELEMENT_SET:
            raise ValueError(f"unknown element {self.element!r}")
        if not all(np.isfinite(self.position)):
            raise ValueError(f"non-finite position for atom {self.serial}")

    @property
    def is_hydrogen(self) -> bool:
        return self.element == "H"

    def moved(self, position) -> "Atom":
        return dataclasses.replace(self, position=tuple(float(v) for v in position))


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str = SINGLE

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("bond endpoints must differ")
        if self.order not in _CODE_FROM_ORDER:
            raise ValueError(f"unknown bond order {self.order!r}")

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True)
class SmallMolecule:
    """A ligand (or hetero group): labelled graph plus 3D coordinates in Å.

    ``category`` is set for hetero groups parsed out of a PDB file
    (``organic``, ``inorganic`` or ``water``).
    """

    name: str
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = ()
    category: str | None = None
    properties: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        n = len(self.atoms)
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond {bond.a}-{bond.b} out of range for {n} atoms")
            if bond.key in seen:
                raise ValueError(f"duplicate bond {bond.key}")
            seen.add(bond.key)
        if not any(not a.is_hydrogen for a in self.atoms):
            raise ValueError(f"molecule {self.name!r} has no heavy atoms")

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=np.float64).reshape(-1, 3)

    @cached_property
    def heavy_indices(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.atoms) if not a.is_hydrogen)

    @property
    def heavy_coords(self) -> np.ndarray:
        return self.coords[list(self.heavy_indices)]

    @property
    def heavy_elements(self) -> list[str]:
        return [self.atoms[i].element for i in self.heavy_indices]

    @cached_property
    def heavy_bonds(self) -> tuple[Bond, ...]:
        return tuple(b for b in self.bonds
                     if not self.atoms[b.a].is_hydrogen and not self.atoms[b.b].is_hydrogen)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in self.atoms]
        for b in self.bonds:
            nbrs[b.a].append(b.b)
            nbrs[b.b].append(b.a)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def bond_lookup(self) -> dict[tuple[int, int], str]:
        return {b.key: b.order for b in self.bonds}

    def bond_order(self, i: int, j: int) -> str | None:
        return self.bond_lookup.get((i, j) if i < j else (j, i))

    @cached_property
    def n_components(self) -> int:
        """Connected components of the heavy-atom graph."""
        heavy = set(self.heavy_indices)
        seen: set[int] = set()
        count = 0
        for start in self.heavy_indices:
            if start in seen:
                continue
            count += 1
            stack = [start]
            seen.add(start)
            while stack:
                u = stack.pop()
                for v in self.neighbors[u]:
                    if v in heavy and v not in seen:
                        seen.add(v)
                        stack.append(v)
        return count

    @property
    def formula(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for el in self.heavy_elements:
            counts[el] = counts.get(el, 0) + 1
        return dict(sorted(counts.items()))

    def with_positions(self, positions) -> "SmallMolecule":
        """Copy with all atom positions replaced (same order as ``atoms``)."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != (len(self.atoms), 3):
            raise ValueError(f"expected ({len(self.atoms)}, 3) positions, got {positions.shape}")
        atoms = tuple(a.moved(p) for a, p in zip(self.atoms, positions))
        return dataclasses.replace(self, atoms=atoms, properties=dict(self.properties))


@dataclass(frozen=True)
class Residue:
    chain_id: str
    name: str
    seq_number: int
    insertion_code: str = ""
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        names = [a.name for a in self.atoms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate atom names in residue {self.label}")

    @property
    def label(self) -> str:
        return f"{self.chain_id}:{self.name}{self.seq_number}{self.insertion_code}"

    @property
    def one_letter(self) -> str:
        return THREE_TO_ONE.get(self.name, "X")

    def atom(self, name: str) -> Atom | None:
        for a in self.atoms:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class Chain:
    chain_id: str
    residues: tuple[Residue, ...]

    @property
    def sequence(self) -> str:
        return "".join(r.one_letter for r in self.residues)

    def ca_residues(self) -> list[Residue]:
        return [r for r in self.residues if r.atom("CA") is not None]


@dataclass(frozen=True)
class ProteinStructure:
    chains: tuple[Chain, ...]
    hetero_groups: tuple[SmallMolecule, ...] = ()
    multi_model: bool = False

    def residues(self) -> Iterator[Residue]:
        for chain in self.chains:
            yield from chain.residues

    def polymer_atoms(self) -> Iterator[Atom]:
        for res in self.residues():
            yield from res.atoms

    def atoms(self) -> Iterator[Atom]:
        """All atoms: polymer atoms in chain order, then hetero groups."""
        yield from self.polymer_atoms()
        for group in self.hetero_groups:
            yield from group.atoms

    @cached_property
    def polymer_heavy_coords(self) -> np.ndarray:
        return np.array([a.position for a in self.polymer_atoms() if not a.is_hydrogen],
                        dtype=np.float64).reshape(-1, 3)

    @cached_property
    def polymer_heavy_elements(self) -> list[str]:
        return [a.element for a in self.polymer_atoms() if not a.is_hydrogen]

    def groups(self, category: str) -> list[SmallMolecule]:
        return [g for g in self.hetero_groups if g.category == category]

    def with_positions(self, positions) -> "ProteinStructure":
        """Copy with atom positions replaced, in :meth:`atoms` order."""
        positions = np.asarray(positions, dtype=np.float64)
        it = iter(positions)
        chains = []
        for chain in self.chains:
            residues = []
            for res in chain.residues:
                atoms = tuple(a.moved(next(it)) for a in res.atoms)
                residues.append(dataclasses.replace(res, atoms=atoms))
            chains.append(Chain(chain.chain_id, tuple(residues)))
        groups = []
        for g in self.hetero_groups:
            groups.append(g.with_positions([next(it) for _ in g.atoms]))
        if next(it, None) is not None:
            raise ValueError("too many positions for structure")
        return ProteinStructure(tuple(chains), tuple(groups), self.multi_model)


def classify_hetero(resname: str, elements: Sequence[str]) -> str:
    """Classify a hetero group as ``water``, ``inorganic`` or ``organic``."""
    name = resname.strip().upper()
    if name in WATER_NAMES:
        return "water"
    heavy = [e for e in elements if e != "H"]
    if name in ION_NAMES or (len(heavy) == 1 and heavy[0] in METALS):
        return "inorganic"
    return "organic"


# --------------------------------------------------------------------------- SDF

def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data).decode("utf-8", errors="replace")
    return str(data)


def _int_field(line: str, lo: int, hi: int, lineno: int, what: str) -> int:
    text = line[lo:hi].strip()
    if not text:
        return 0
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"invalid {what} {text!r}", lineno) from None


def parse_sdf(data) -> list[SmallMolecule]:
    """Parse every record of a V2000 SDF/MOL file.

    Raises :class:`ParseError` naming the offending line.
    """
    text = _decode(data)
    lines = text.splitlines()
    mols: list[SmallMolecule] = []
    pos = 0
    while pos < len(lines):
        # skip blank separation between records
        if not any(l.strip() for l in lines[pos:]):
            break
        mol, pos = _parse_record(lines, pos)
        mols.append(mol)
    if not mols:
        raise ParseError("no SDF records found")
    return mols


def _parse_record(lines: list[str], start: int) -> tuple[SmallMolecule, int]:
    if start + 3 >= len(lines):
        raise ParseError("truncated header block", start + 1)
    name = lines[start].strip()
    counts_no = start + 3
    counts = lines[counts_no]
    if "V3000" in counts:
        raise ParseError("V3000 records are not supported", counts_no + 1)
    if len(counts.rstrip()) < 6:
        raise ParseError("malformed counts line", counts_no + 1)
    n_atoms = _int_field(counts, 0, 3, counts_no + 1, "atom count")
    n_bonds = _int_field(counts, 3, 6, counts_no + 1, "bond count")
    if n_atoms < 0 or n_bonds < 0:
        raise ParseError("negative counts", counts_no + 1)

    atoms: list[Atom] = []
    line_no = counts_no + 1
    for k in range(n_atoms):
        if line_no >= len(lines) or lines[line_no].startswith("M  "):
            raise ParseError(f"atom block ends after {k} of {n_atoms} atoms", line_no + 1)
        atoms.append(_parse_atom_line(lines[line_no], line_no + 1, k + 1))
        line_no += 1

    bonds: list[Bond] = []
    seen: set[tuple[int, int]] = set()
    for k in range(n_bonds):
        if line_no >= len(lines) or lines[line_no].startswith("M  "):
            raise ParseError(f"bond block ends after {k} of {n_bonds} bonds", line_no + 1)
        line = lines[line_no]
        a = _int_field(line, 0, 3, line_no + 1, "bond atom")
        b = _int_field(line, 3, 6, line_no + 1, "bond atom")
        code = _int_field(line, 6, 9, line_no + 1, "bond order")
        if not (1 <= a <= n_atoms and 1 <= b <= n_atoms):
            raise ParseError(f"bond index out of range ({a}, {b}) for {n_atoms} atoms", line_no + 1)
        if a == b:
            raise ParseError("bond joins an atom to itself", line_no + 1)
        if code not in _ORDER_FROM_CODE:
            raise ParseError(f"unsupported bond order {code}", line_no + 1)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ParseError(f"duplicate bond {a}-{b}", line_no + 1)
        seen.add(key)
        bonds.append(Bond(a - 1, b - 1, _ORDER_FROM_CODE[code]))
        line_no += 1

    charges: dict[int, int] = {}
    properties: dict[str, str] = {}
    while line_no < len(lines):
        line = lines[line_no]
        if line.startswith("$$$$"):
            line_no += 1
            break
        if line.startswith("M  CHG"):
            fields = line[6:].split()
            try:
                n = int(fields[0])
                for t in range(n):
                    idx, chg = int(fields[1 + 2 * t]), int(fields[2 + 2 * t])
                    if not 1 <= idx <= n_atoms:
                        raise ParseError(f"charge on atom {idx} out of range", line_no + 1)
                    charges[idx - 1] = chg
            except (ValueError, IndexError):
                raise ParseError("malformed M  CHG line", line_no + 1) from None
        elif line.startswith(">"):
            tag_start = line.find("<")
            tag_end = line.find(">", tag_start + 1)
            tag = line[tag_start + 1:tag_end] if 0 <= tag_start < tag_end else line[1:].strip()
            values = []
            line_no += 1
            while line_no < len(lines) and lines[line_no].strip() and not lines[line_no].startswith("$$$$"):
                values.append(lines[line_no])
                line_no += 1
            properties[tag] = "\n".join(values)
            continue
        line_no += 1

    if charges:
        atoms = [dataclasses.replace(a, formal_charge=charges.get(i, 0)) if i in charges or a.formal_charge
                 else a for i, a in enumerate(atoms)]
    try:
        mol = SmallMolecule(name, tuple(atoms), tuple(bonds), properties=properties)
    except ValueError as exc:
        raise ParseError(str(exc), start + 1) from None
    return mol, line_no


def _parse_atom_line(line: str, lineno: int, serial: int) -> Atom:
    try:
        x, y, z = float(line[0:10]), float(line[10:20]), float(line[20:30])
    except ValueError:
        raise ParseError("invalid atom coordinates", lineno) from None
    if not all(np.isfinite((x, y, z))):
        raise ParseError("non-finite atom coordinates", lineno)
    symbol = line[31:34].strip()
    try:
        element = normalize_element(symbol)
    except KeyError:
        raise ParseError(f"unknown element {symbol!r}", lineno) from None
    code = _int_field(line, 36, 39, lineno, "charge code")
    if code not in _SDF_CHARGE_CODES:
        raise ParseError(f"invalid charge code {code}", lineno)
    return Atom(element, (x, y, z), _SDF_CHARGE_CODES[code], serial)


def write_sdf(mol: SmallMolecule | Sequence[SmallMolecule]) -> bytes:
    """Serialize one molecule (or several) as V2000 SDF bytes."""
    mols = [mol] if isinstance(mol, SmallMolecule) else list(mol)
    out: list[str] = []
    for m in mols:
        if len(m.atoms) > 999 or len(m.bonds) > 999:
            raise ValueError(f"{m.name!r}: V2000 holds at most 999 atoms and 999 bonds")
        out += [m.name, "  dockeval", ""]
        out.append(f"{len(m.atoms):3d}{len(m.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
        for a in m.atoms:
            x, y, z = a.position
            code = _SDF_CODE_FROM_CHARGE.get(a.formal_charge, 0)
            out.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {a.element:<3} 0{code:3d}  0  0  0  0  0  0  0  0  0  0")
        for b in m.bonds:
            out.append(f"{b.a + 1:3d}{b.b + 1:3d}{_CODE_FROM_ORDER[b.order]:3d}  0")
        charged = [(i + 1, a.formal_charge) for i, a in enumerate(m.atoms) if a.formal_charge]
        for start in range(0, len(charged), 8):
            chunk = charged[start:start + 8]
            out.append(f"M  CHG{len(chunk):3d}" + "".join(f" {i:3d} {c:3d}" for i, c in chunk))
        out.append("M  END")
        for key, value in m.properties.items():
            out += [f">  <{key}>", value, ""]
        out.append("$$$$")
    return ("\n".join(out) + "\n").encode()


# --------------------------------------------------------------------------- PDB

def _pdb_element(line: str, atom_name: str, hetero: bool, lineno: int) -> str:
    symbol = line[76:78].strip()
    if symbol:
        try:
            return normalize_element(symbol)
        except KeyError:
            raise ParseError(f"unknown element {symbol!r}", lineno) from None
    # fall back to the atom-name convention: column 13 holds the second
    # letter of a two-letter element only when the name starts at column 13
    raw = line[12:16]
    letters = "".join(c for c in raw if c.isalpha())
    if not letters:
        raise ParseError(f"cannot infer element from atom name {atom_name!r}", lineno)
    if hetero and raw[0] != " " and len(letters) >= 2:
        try:
            return normalize_element(letters[:2])
        except KeyError:
            pass
    try:
        return normalize_element(letters[0])
    except KeyError:
        raise ParseError(f"cannot infer element from atom name {atom_name!r}", lineno) from None


def parse_pdb(data) -> ProteinStructure:
    """Parse ATOM/HETATM records of a PDB file into a :class:`ProteinStructure`.

    Only the first MODEL is read (``multi_model`` is set when more exist) and
    only the first alternate location of each atom is kept.
    """
    text = _decode(data)
    if not text.strip():
        raise ParseError("empty PDB input")
    residues: dict[tuple, dict] = {}
    hetero: dict[tuple, dict] = {}
    chain_order: list[str] = []
    multi_model = False
    models_seen = 0
    n_atoms = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        record = line[0:6].strip()
        if record == "MODEL":
            models_seen += 1
            if models_seen > 1:
                multi_model = True
                break
            continue
        if record == "ENDMDL":
            multi_model = "\nMODEL" in text[text.find("ENDMDL"):]
            break
        if record not in ("ATOM", "HETATM"):
            continue
        if len(line) < 54:
            raise ParseError("truncated coordinate record", lineno)
        name = line[12:16].strip()
        altloc = line[16:17].strip()
        resname = line[17:20].strip()
        chain_id = line[21:22].strip()
        try:
            resseq = int(line[22:26])
        except ValueError:
            raise ParseError(f"invalid residue number {line[22:26]!r}", lineno) from None
        icode = line[26:27].strip()
        try:
            xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except ValueError:
            raise ParseError("non-numeric coordinate field", lineno) from None
        if not all(np.isfinite(xyz)):
            raise ParseError("non-finite coordinate", lineno)
        try:
            serial = int(line[6:11])
        except ValueError:
            serial = n_atoms + 1
        occupancy = _float_or(line[54:60], 1.0)
        bfactor = _float_or(line[60:66], 0.0)
        is_het = record == "HETATM"
        element = _pdb_element(line, name, is_het, lineno)
        charge = _pdb_charge(line[78:80])
        atom = Atom(element, xyz, charge, serial, name, altloc, occupancy, bfactor, is_het)
        key = (chain_id, resseq, icode, resname)
        polymer = not is_het or resname in MODIFIED_RESIDUES
        table = residues if polymer else hetero
        slot = table.setdefault(key, {"atoms": {}, "altloc": None})
        if altloc:
            if slot["altloc"] is None:
                slot["altloc"] = altloc
            elif altloc != slot["altloc"]:
                continue
        if name in slot["atoms"]:
            continue
        slot["atoms"][name] = atom
        if polymer and chain_id not in chain_order:
            chain_order.append(chain_id)
        n_atoms += 1
    if n_atoms == 0:
        raise ParseError("no ATOM/HETATM records")

    chains = []
    for cid in chain_order:
        res = [Residue(c, rn, seq, ic, tuple(slot["atoms"].values()))
               for (c, seq, ic, rn), slot in residues.items() if c == cid]
        res.sort(key=lambda r: (r.seq_number, r.insertion_code))
        chains.append(Chain(cid, tuple(res)))
    groups = []
    for (c, seq, ic, rn), slot in hetero.items():
        atoms = tuple(slot["atoms"].values())
        if all(a.is_hydrogen for a in atoms):
            continue
        groups.append(SmallMolecule(f"{rn}_{c}_{seq}{ic}", atoms, (),
                                    category=classify_hetero(rn, [a.element for a in atoms]),
                                    properties={"resname": rn, "chain_id": c,
                                                "seq_number": seq, "insertion_code": ic}))
    return ProteinStructure(tuple(chains), tuple(groups), multi_model)


def _float_or(text: str, default: float) -> float:
    try:
        return float(text)
    except ValueError:
        return default


def _pdb_charge(text: str) -> int:
    text = text.strip()
    if len(text) == 2 and text[0].isdigit() and text[1] in "+-":
        return int(text[0]) * (1 if text[1] == "+" else -1)
    return 0


def _pdb_atom_line(record: str, serial: int, atom: Atom, resname: str, chain: str,
                   resseq: int, icode: str) -> str:
    name = atom.name or atom.element
    # four-character names and two-letter elements start in column 13
    padded = name if len(name) >= 4 or len(atom.element) == 2 else f" {name}"
    x, y, z = atom.position
    charge = ""
    if atom.formal_charge:
        charge = f"{abs(atom.formal_charge)}{'+' if atom.formal_charge > 0 else '-'}"
    return (f"{record:<6}{serial % 100000:5d} {padded:<4}{atom.altloc[:1] or ' '}{resname:>3} "
            f"{chain[:1] or ' '}{resseq:4d}{icode[:1] or ' '}   {x:8.3f}{y:8.3f}{z:8.3f}"
            f"{atom.occupancy:6.2f}{atom.bfactor:6.2f}          {atom.element.upper():>2}{charge:<2}")


def write_pdb(structure: ProteinStructure) -> bytes:
    """Serialize a structure as fixed-column PDB text (polymer, then hetero groups)."""
    out: list[str] = []
    serial = 1
    for chain in structure.chains:
        last = None
        for res in chain.residues:
            for atom in res.atoms:
                record = "HETATM" if res.name in MODIFIED_RESIDUES else "ATOM"
                out.append(_pdb_atom_line(record, serial, atom, res.name, chain.chain_id,
                                          res.seq_number, res.insertion_code))
                serial += 1
            last = res
        if last is not None:
            out.append(f"TER   {serial % 100000:5d}      {last.name:>3} {chain.chain_id[:1] or ' '}"
                       f"{last.seq_number:4d}{last.insertion_code[:1] or ' '}")
            serial += 1
    for group in structure.hetero_groups:
        props = group.properties
        resname = props.get("resname", group.name[:3])
        for atom in group.atoms:
            out.append(_pdb_atom_line("HETATM", serial, atom, resname, props.get("chain_id", ""),
                                      int(props.get("seq_number", 1)), props.get("insertion_code", "")))
            serial += 1
    out.append("END")
    return ("\n".join(out) + "\n").encode()


def read_sdf(path) -> list[SmallMolecule]:
    with open(path, "rb") as fh:
        return parse_sdf(fh.read())


def read_ligand(path) -> SmallMolecule:
    """First record of an SDF file."""
    return read_sdf(path)[0]


def read_pdb(path) -> ProteinStructure:
    with open(path, "rb") as fh:
        return parse_pdb(fh.read())
