"""Per-atom molecule embeddings from a descriptor fallback encoder.

Structure strings use the common line notation for molecules: bare organic
subset atoms (C, N, O, ...), bracket atoms with charge and hydrogen counts,
bonds - = # :, branches in parentheses, ring closure digits, and dots for
disconnected fragments.  The parser builds the heavy-atom graph, folds any
explicit hydrogens into their neighbor's hydrogen count, and emits one
descriptor row per heavy atom.  No pretrained weights are involved, so the
output is a deterministic function of the input string.

Stereo markers (/ \\ @ @@), isotope prefixes, and atom class tags are parsed
and ignored; they do not affect the descriptors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import MoleculeError

# symbol -> (atomic number, period, electronegativity, covalent radius A, valence)
_ELEMENTS = {
    "H": (1, 1, 2.20, 0.31, 1),
    "Li": (3, 2, 0.98, 1.28, 1),
    "B": (5, 2, 2.04, 0.84, 3),
    "C": (6, 2, 2.55, 0.76, 4),
    "N": (7, 2, 3.04, 0.71, 3),
    "O": (8, 2, 3.44, 0.66, 2),
    "F": (9, 2, 3.98, 0.57, 1),
    "Na": (11, 3, 0.93, 1.66, 1),
    "Mg": (12, 3, 1.31, 1.41, 2),
    "Si": (14, 3, 1.90, 1.11, 4),
    "P": (15, 3, 2.19, 1.07, 3),
    "S": (16, 3, 2.58, 1.05, 2),
    "Cl": (17, 3, 3.16, 1.02, 1),
    "K": (19, 4, 0.82, 2.03, 1),
    "Ca": (20, 4, 1.00, 1.76, 2),
    "Fe": (26, 4, 1.83, 1.32, 2),
    "Zn": (30, 4, 1.65, 1.22, 2),
    "As": (33, 4, 2.18, 1.19, 3),
    "Se": (34, 4, 2.55, 1.20, 2),
    "Br": (35, 4, 2.96, 1.20, 1),
    "I": (53, 5, 2.66, 1.39, 1),
}

_HALOGENS = {"F", "Cl", "Br", "I"}
_ORGANIC_TWO = ("Cl", "Br")
_ORGANIC_ONE = set("BCNOPSFI")
_AROMATIC_ONE = set("bcnops")
_BOND_ORDERS = {"-": 1.0, "=": 2.0, "#": 3.0, ":": 1.5, "/": 1.0, "\\": 1.0}

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>se|as|[bcnops]|[A-Z][a-z]?)"
    r"(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\d+|-\d+|\++|-+)?"
    r"(?::\d+)?$"
)

ATOM_FEATURE_NAMES = [
    "atomic_number",
    "period",
    "electronegativity",
    "covalent_radius",
    "valence",
    "aromatic",
    "formal_charge",
    "degree",
    "in_ring",
    "hydrogen_count",
    "heteroatom",
    "halogen",
]
MOLECULE_WIDTH = len(ATOM_FEATURE_NAMES)


@dataclass
class Atom:
    symbol: str
    aromatic: bool = False
    charge: int = 0
    explicit_h: int | None = None
    folded_h: int = 0
    pos: int = 0


@dataclass
class MoleculeGraph:
    """Heavy-atom graph parsed from one structure string."""

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[tuple[int, int, float]] = field(default_factory=list)


def _parse_bracket(body: str, pos: int) -> Atom:
    match = _BRACKET_RE.match(body)
    if match is None:
        raise MoleculeError(f"cannot parse bracket atom '[{body}]' at position {pos}")
    raw = match.group("symbol")
    aromatic = raw[0].islower()
    symbol = raw.capitalize()
    if symbol not in _ELEMENTS:
        raise MoleculeError(f"unknown element {raw!r} at position {pos}")
    hcount = match.group("hcount")
    explicit_h = 0
    if hcount is not None:
        explicit_h = int(hcount[1:]) if len(hcount) > 1 else 1
    charge_text = match.group("charge")
    charge = 0
    if charge_text is not None:
        if charge_text[-1].isdigit():
            charge = int(charge_text)
        else:
            charge = len(charge_text) * (1 if charge_text[0] == "+" else -1)
    return Atom(symbol=symbol, aromatic=aromatic, charge=charge, explicit_h=explicit_h, pos=pos)


def parse_structure(text: str) -> MoleculeGraph:
    """Parse a structure string into a heavy-atom graph.

    Raises MoleculeError with the offending position for anything the
    grammar does not cover, and for structural faults such as unbalanced
    branches, unclosed ring bonds, or dangling bond symbols.
    """
    if not isinstance(text, str):
        raise MoleculeError(f"structure must be a string, got {type(text).__name__}")
    if not text.strip():
        raise MoleculeError("structure string is empty")

    atoms: list[Atom] = []
    bonds: list[tuple[int, int, float]] = []
    branch_stack: list[int] = []
    rings: dict[str, tuple[int, float | None]] = {}
    prev: int | None = None
    pending: float | None = None
    pending_pos = 0

    def place_atom(atom: Atom) -> None:
        nonlocal prev, pending
        if prev is None and pending is not None:
            raise MoleculeError(f"bond symbol at position {pending_pos} has no preceding atom")
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            order = pending
            if order is None:
                order = 1.5 if (atoms[prev].aromatic and atom.aromatic) else 1.0
            bonds.append((prev, idx, order))
        prev = idx
        pending = None

    def close_ring(key: str, pos: int) -> None:
        nonlocal pending
        if prev is None:
            raise MoleculeError(f"ring bond {key} at position {pos} has no preceding atom")
        if key in rings:
            other, opened_order = rings.pop(key)
            if other == prev:
                raise MoleculeError(f"ring bond {key} at position {pos} connects an atom to itself")
            order = pending if pending is not None else opened_order
            if order is None:
                order = 1.5 if (atoms[other].aromatic and atoms[prev].aromatic) else 1.0
            bonds.append((other, prev, order))
        else:
            rings[key] = (prev, pending)
        pending = None

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _BOND_ORDERS:
            if pending is not None:
                raise MoleculeError(f"two bond symbols in a row at position {i}")
            pending = _BOND_ORDERS[ch]
            pending_pos = i
            i += 1
        elif ch == "(":
            if prev is None:
                raise MoleculeError(f"branch opened before any atom at position {i}")
            if pending is not None:
                raise MoleculeError(f"bond symbol before branch at position {pending_pos}")
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise MoleculeError(f"unmatched ')' at position {i}")
            if pending is not None:
                raise MoleculeError(f"dangling bond before ')' at position {pending_pos}")
            prev = branch_stack.pop()
            i += 1
        elif ch == ".":
            if pending is not None:
                raise MoleculeError(f"bond symbol before '.' at position {pending_pos}")
            if prev is None:
                raise MoleculeError(f"'.' at position {i} has no preceding atom")
            prev = None
            i += 1
        elif ch.isdigit():
            close_ring(ch, i)
            i += 1
        elif ch == "%":
            if i + 2 >= n or not (text[i + 1].isdigit() and text[i + 2].isdigit()):
                raise MoleculeError(f"'%' at position {i} must be followed by two digits")
            close_ring(text[i + 1 : i + 3], i)
            i += 3
        elif ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise MoleculeError(f"unclosed bracket atom at position {i}")
            place_atom(_parse_bracket(text[i + 1 : end], i))
            i = end + 1
        elif text[i : i + 2] in _ORGANIC_TWO:
            place_atom(Atom(symbol=text[i : i + 2], pos=i))
            i += 2
        elif ch in _ORGANIC_ONE:
            place_atom(Atom(symbol=ch, pos=i))
            i += 1
        elif ch in _AROMATIC_ONE:
            place_atom(Atom(symbol=ch.upper(), aromatic=True, pos=i))
            i += 1
        else:
            raise MoleculeError(f"unexpected character {ch!r} at position {i}")

    if pending is not None:
        raise MoleculeError(f"structure string ends with a dangling bond at position {pending_pos}")
    if branch_stack:
        raise MoleculeError(f"{len(branch_stack)} unclosed branch(es), missing ')'")
    if rings:
        keys = ", ".join(sorted(rings))
        raise MoleculeError(f"unclosed ring bond number(s): {keys}")

    return _fold_hydrogens(MoleculeGraph(atoms=atoms, bonds=bonds))


def _fold_hydrogens(graph: MoleculeGraph) -> MoleculeGraph:
    """Fold explicit hydrogen atoms into their heavy neighbor's count."""
    h_idx = {i for i, atom in enumerate(graph.atoms) if atom.symbol == "H"}
    if not h_idx:
        return graph
    for i, j, order in graph.bonds:
        if i in h_idx and j in h_idx:
            raise MoleculeError("hydrogen-hydrogen bond has no heavy atom to attach to")
        if order != 1.0 and (i in h_idx or j in h_idx):
            raise MoleculeError("explicit hydrogen with a non-single bond")
    touched: set[int] = set()
    for i, j, _ in graph.bonds:
        if i in h_idx or j in h_idx:
            h, heavy = (i, j) if i in h_idx else (j, i)
            if h in touched:
                raise MoleculeError("explicit hydrogen bonded to more than one atom")
            touched.add(h)
            graph.atoms[heavy].folded_h += 1
    heavy_order = [i for i in range(len(graph.atoms)) if i not in h_idx]
    if not heavy_order:
        raise MoleculeError("structure contains no heavy atoms")
    remap = {old: new for new, old in enumerate(heavy_order)}
    new_bonds = [
        (remap[i], remap[j], order)
        for i, j, order in graph.bonds
        if i not in h_idx and j not in h_idx
    ]
    return MoleculeGraph(atoms=[graph.atoms[i] for i in heavy_order], bonds=new_bonds)


def _cycle_edges(n_atoms: int, bonds: list[tuple[int, int, float]]) -> set[int]:
    """Indices of bonds that lie on a cycle.

    A bond is a cycle edge exactly when its endpoints stay connected after
    removing it.  Molecules are small, so the direct check per edge is fine.
    """
    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for b, (i, j, _) in enumerate(bonds):
        adjacency[i].append((j, b))
        adjacency[j].append((i, b))
    in_cycle: set[int] = set()
    for b, (start, goal, _) in enumerate(bonds):
        seen = {start}
        frontier = [start]
        found = False
        while frontier and not found:
            node = frontier.pop()
            for nxt, edge in adjacency[node]:
                if edge == b or nxt in seen:
                    continue
                if nxt == goal:
                    found = True
                    break
                seen.add(nxt)
                frontier.append(nxt)
        if found:
            in_cycle.add(b)
    return in_cycle


def molecule_embedding(text: str) -> np.ndarray:
    """Embed one structure string as a float32 matrix, one row per heavy atom.

    Row order follows the order in which atoms appear in the string.
    """
    graph = parse_structure(text)
    n = len(graph.atoms)
    degree = [0] * n
    bond_sum = [0.0] * n
    for i, j, order in graph.bonds:
        degree[i] += 1
        degree[j] += 1
        bond_sum[i] += order
        bond_sum[j] += order
    cycle = _cycle_edges(n, graph.bonds)
    ring_atom = [False] * n
    for b in cycle:
        i, j, _ = graph.bonds[b]
        ring_atom[i] = True
        ring_atom[j] = True

    out = np.empty((n, MOLECULE_WIDTH), dtype=np.float64)
    for k, atom in enumerate(graph.atoms):
        number, period, electroneg, radius, valence = _ELEMENTS[atom.symbol]
        if atom.explicit_h is not None:
            hydrogens = atom.explicit_h + atom.folded_h
        else:
            free = valence + atom.charge - math.ceil(bond_sum[k]) - atom.folded_h
            hydrogens = max(0, free) + atom.folded_h
        out[k] = (
            number / 100.0,
            period / 7.0,
            electroneg / 4.0,
            radius / 2.5,
            valence / 8.0,
            1.0 if atom.aromatic else 0.0,
            float(atom.charge),
            degree[k] / 8.0,
            1.0 if ring_atom[k] else 0.0,
            hydrogens / 8.0,
            0.0 if atom.symbol == "C" else 1.0,
            1.0 if atom.symbol in _HALOGENS else 0.0,
        )
    return out.astype(np.float32)


def heavy_atom_count(text: str) -> int:
    """Number of heavy atoms in a structure string (the embedding row count)."""
    return len(parse_structure(text).atoms)


def read_structure_file(path) -> list[tuple[str, str]]:
    """Read (record id, structure string) pairs from a text file.

    Each non-blank, non-comment line holds a structure string optionally
    followed by an id.  Missing ids are generated from the record position.
    """
    records: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) > 2:
                raise MoleculeError(
                    f"{path}: line {line_no} has {len(tokens)} fields, expected"
                    " 'structure [id]'"
                )
            rid = tokens[1] if len(tokens) == 2 else f"mol{len(records):04d}"
            records.append((rid, tokens[0]))
    if not records:
        raise MoleculeError(f"{path}: no records found")
    seen: set[str] = set()
    for rid, _ in records:
        if rid in seen:
            raise MoleculeError(f"{path}: duplicate record id {rid!r}")
        seen.add(rid)
    return records
