"""SMILES parser.

Grammar scope: organic subset, bracket atoms (isotope, charge, H count,
@/@@ tetrahedral tags), branches, ring closures including %nn, dot
fragments, and bond symbols ``- = # : / \\``. Directional bonds are read as
single bonds (E/Z perception is out of scope). Wildcard atoms and reaction
arrows are rejected.

Aromaticity is perceived from lowercase input atoms: unspecified bonds
between two aromatic atoms become aromatic when they close a ring, single
otherwise. Kekulé-form input is kept as written; no kekulisation round-trip
is attempted. Implicit hydrogens are recorded as counts on organic-subset
atoms and never materialised as nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fingertrain.chem import elements as el
from fingertrain.chem.graph import Atom, BondOrder, Chirality, MolecularGraph, Slot
from fingertrain.errors import SmilesParseError

_BOND_CHARS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
}


@dataclass
class _PendingBond:
    order: BondOrder | None  # None: written without a symbol


def parse_smiles(text: str) -> MolecularGraph:
    """Parse one SMILES string into a molecular graph.

    Raises SmilesParseError for syntax errors, unmatched ring bonds,
    unbalanced branches, unknown elements, and bracket-atom valence
    violations. Organic-subset atoms are never valence-rejected here; the
    standardisation step owns that check.
    """
    smiles = text.strip()
    if not smiles:
        raise SmilesParseError("empty SMILES", text)

    graph = MolecularGraph(smiles)
    slots: list[list[Slot]] = []  # parse-order neighbor slots per atom
    raw_tags: list[Chirality] = []
    from_bracket: list[bool] = []
    bonds: list[tuple[int, int, BondOrder | None]] = []

    prev: int | None = None
    pending: BondOrder | None = None
    stack: list[int] = []
    # open ring digit -> (atom, written order or None, placeholder slot pos)
    ring_open: dict[int, tuple[int, BondOrder | None, int]] = {}

    def add_parsed_atom(atom: Atom, tag: Chirality, bracket: bool, pos: int) -> int:
        nonlocal prev, pending
        idx = graph.add_atom(atom)
        slots.append([])
        raw_tags.append(tag)
        from_bracket.append(bracket)
        if prev is not None:
            bonds.append((prev, idx, pending))
            slots[prev].append(("a", idx))
            slots[idx].append(("a", prev))
        elif pending is not None:
            raise SmilesParseError("bond with no preceding atom", smiles, pos)
        if tag is not Chirality.NONE and atom.hcount == 1 and bracket:
            slots[idx].append(("h", None))
        pending = None
        prev = idx
        return idx

    def close_ring(digit: int, pos: int) -> None:
        nonlocal pending
        if prev is None:
            raise SmilesParseError("ring bond digit before any atom", smiles, pos)
        if digit in ring_open:
            other, other_order, other_slot = ring_open.pop(digit)
            if other == prev:
                raise SmilesParseError("ring bond to the same atom", smiles, pos)
            if other_order is not None and pending is not None and other_order is not pending:
                raise SmilesParseError("conflicting ring bond orders", smiles, pos)
            order = pending if pending is not None else other_order
            bonds.append((other, prev, order))
            slots[other][other_slot] = ("a", prev)
            slots[prev].append(("a", other))
        else:
            ring_open[digit] = (prev, pending, len(slots[prev]))
            slots[prev].append(("r", digit))
        pending = None

    i = 0
    n = len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            end = smiles.find("]", i)
            if end < 0:
                raise SmilesParseError("unterminated bracket atom", smiles, i)
            atom, tag = _parse_bracket(smiles[i + 1 : end], smiles, i)
            add_parsed_atom(atom, tag, bracket=True, pos=i)
            i = end + 1
        elif ch.isalpha():
            sym2 = smiles[i : i + 2]
            if sym2 in ("Cl", "Br"):
                add_parsed_atom(Atom(element=el.ATOMIC_NUMBER[sym2]), Chirality.NONE, False, i)
                i += 2
            elif ch in el.ORGANIC_SUBSET and len(ch) == 1:
                add_parsed_atom(Atom(element=el.ATOMIC_NUMBER[ch]), Chirality.NONE, False, i)
                i += 1
            elif ch in el.AROMATIC_ORGANIC:
                atom = Atom(element=el.ATOMIC_NUMBER[ch.upper()], aromatic=True)
                add_parsed_atom(atom, Chirality.NONE, False, i)
                i += 1
            else:
                raise SmilesParseError(f"unknown element symbol {ch!r}", smiles, i)
        elif ch.isdigit():
            close_ring(int(ch), i)
            i += 1
        elif ch == "%":
            if i + 2 >= n or not smiles[i + 1 : i + 3].isdigit():
                raise SmilesParseError("'%' ring bond needs two digits", smiles, i)
            close_ring(int(smiles[i + 1 : i + 3]), i)
            i += 3
        elif ch in _BOND_CHARS:
            if pending is not None:
                raise SmilesParseError("two bond symbols in a row", smiles, i)
            pending = _BOND_CHARS[ch]
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesParseError("branch before any atom", smiles, i)
            if pending is not None:
                raise SmilesParseError("bond symbol before branch open", smiles, i)
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise SmilesParseError("unbalanced branch parenthesis", smiles, i)
            if pending is not None:
                raise SmilesParseError("dangling bond before branch close", smiles, i)
            prev = stack.pop()
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesParseError("bond symbol before dot", smiles, i)
            prev = None
            i += 1
        elif ch == "*":
            raise SmilesParseError("wildcard atoms are not supported", smiles, i)
        elif ch == ">":
            raise SmilesParseError("reaction SMILES are not supported", smiles, i)
        else:
            raise SmilesParseError(f"unexpected character {ch!r}", smiles, i)

    if ring_open:
        digits = ",".join(str(d) for d in sorted(ring_open))
        raise SmilesParseError(f"unmatched ring bond digit(s) {digits}", smiles)
    if stack:
        raise SmilesParseError("unbalanced branch parenthesis", smiles)
    if pending is not None:
        raise SmilesParseError("dangling bond at end of input", smiles)
    if not graph.atoms:
        raise SmilesParseError("no atoms", smiles)

    _finalize(graph, bonds, slots, raw_tags, from_bracket, smiles)
    return graph


def _parse_bracket(body: str, smiles: str, pos: int) -> tuple[Atom, Chirality]:
    i = 0
    n = len(body)
    isotope = None
    start = i
    while i < n and body[i].isdigit():
        i += 1
    if i > start:
        isotope = int(body[start:i])
    if i >= n:
        raise SmilesParseError("bracket atom missing element", smiles, pos)

    aromatic = False
    symbol = None
    if body[i : i + 2] in el.AROMATIC_BRACKET:
        symbol = body[i : i + 2].capitalize()
        aromatic = True
        i += 2
    elif body[i].isupper():
        if i + 1 < n and body[i + 1].islower() and body[i : i + 2] in el.ATOMIC_NUMBER:
            symbol = body[i : i + 2]
            i += 2
        else:
            symbol = body[i]
            i += 1
    elif body[i] in el.AROMATIC_ORGANIC:
        symbol = body[i].upper()
        aromatic = True
        i += 1
    elif body[i] == "*":
        raise SmilesParseError("wildcard atoms are not supported", smiles, pos)
    if symbol is None or symbol not in el.ATOMIC_NUMBER:
        raise SmilesParseError(f"unknown element symbol {symbol or body[i]!r}", smiles, pos)
    element = el.ATOMIC_NUMBER[symbol]
    if aromatic and element not in el.AROMATIC_ELEMENTS:
        raise SmilesParseError(f"element {symbol} cannot be aromatic", smiles, pos)

    tag = Chirality.NONE
    if i < n and body[i] == "@":
        if i + 1 < n and body[i + 1] == "@":
            tag = Chirality.CLOCKWISE
            i += 2
        else:
            tag = Chirality.COUNTERCLOCKWISE
            i += 1
        if i < n and body[i].isalpha() and body[i] not in "H" and body[i : i + 2] in ("TH", "AL", "SP", "TB", "OH"):
            raise SmilesParseError("extended chirality classes are not supported", smiles, pos)

    hcount = 0
    if i < n and body[i] == "H":
        i += 1
        start = i
        while i < n and body[i].isdigit():
            i += 1
        hcount = int(body[start:i]) if i > start else 1

    charge = 0
    if i < n and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        ch = body[i]
        i += 1
        if i < n and body[i].isdigit():
            start = i
            while i < n and body[i].isdigit():
                i += 1
            charge = sign * int(body[start:i])
        else:
            count = 1
            while i < n and body[i] == ch:
                count += 1
                i += 1
            charge = sign * count

    if i < n and body[i] == ":":
        raise SmilesParseError("atom maps are not supported", smiles, pos)
    if i != n:
        raise SmilesParseError(f"trailing characters in bracket atom {body!r}", smiles, pos)

    return Atom(element=element, charge=charge, hcount=hcount, aromatic=aromatic, isotope=isotope, chirality=tag), tag


def expected_implicit_h(graph: MolecularGraph, idx: int, assume_hcount: int | None = None) -> int:
    """Implicit hydrogen count the organic-subset fill rule assigns.

    ``assume_hcount`` feeds the aromatic pyrrole/pyridine decision; the
    writer passes 0 to see the molecule as a bare re-parsed token would.
    """
    atom = graph.atoms[idx]
    valences = el.DEFAULT_VALENCES.get(atom.element)
    if valences is None or atom.charge != 0:
        return 0
    sigma = 0.0
    arom_sigma = graph.aromatic_pi(idx, hcount=assume_hcount)[0] if atom.aromatic else 1.5
    for _, bidx in graph.adjacency[idx]:
        order = graph.bonds[bidx].order
        sigma += arom_sigma if order is BondOrder.AROMATIC else order.order_value
    needed = math.ceil(sigma - 1e-9)
    for v in valences:
        if v >= needed:
            return v - needed
    return 0


def _finalize(graph, bonds, slots, raw_tags, from_bracket, smiles) -> None:
    # Bonds enter with provisional single order so ring topology can resolve
    # the unspecified aromatic/single ambiguity.
    unspecified = []
    for a, b, order in bonds:
        bidx = _add_bond_checked(graph, a, b, order or BondOrder.SINGLE, smiles)
        if order is None:
            unspecified.append(bidx)

    ring_flags = graph.ring_bond_flags()
    for bidx in unspecified:
        bond = graph.bonds[bidx]
        if ring_flags[bidx] and graph.atoms[bond.a].aromatic and graph.atoms[bond.b].aromatic:
            graph.set_bond_order(bidx, BondOrder.AROMATIC)
    graph.refresh_ring_flags()

    for idx, atom in enumerate(graph.atoms):
        if not from_bracket[idx]:
            atom.hcount = expected_implicit_h(graph, idx)

    for idx, atom in enumerate(graph.atoms):
        if not from_bracket[idx]:
            continue
        allowed = el.ALLOWED_VALENCES.get((atom.element, atom.charge))
        if allowed and graph.used_valence(idx) > max(allowed) + 1e-9:
            raise SmilesParseError(
                f"valence violation on bracket atom {el.SYMBOL[atom.element]}"
                f" (used {graph.used_valence(idx):g}, max {max(allowed)})",
                smiles,
            )

    for idx, tag in enumerate(raw_tags):
        if tag is not Chirality.NONE:
            graph.atoms[idx].chiral_slots = slots[idx]
    graph.canonicalize_chirality()


def _add_bond_checked(graph, a, b, order, smiles):
    try:
        return graph.add_bond(a, b, order)
    except ValueError as exc:
        raise SmilesParseError(str(exc), smiles) from None
