"""SMILES emission with controllable atom ordering.

The writer exists mainly to exercise parser/fingerprint invariance: any
priority permutation of the atoms yields a different but equivalent SMILES
string for the same molecule. Chirality tags are re-derived from the
canonical neighbor frame so the emitted tag matches the emitted neighbor
order.
"""

from __future__ import annotations

import heapq

import numpy as np

from fingertrain.chem import elements as el
from fingertrain.chem.graph import BondOrder, Chirality, MolecularGraph
from fingertrain.chem.parser import expected_implicit_h


def to_smiles(
    graph: MolecularGraph,
    order: list[int] | None = None,
    rng: np.random.Generator | None = None,
) -> str:
    """Write a SMILES string visiting atoms by the given priority order.

    ``order`` lists atom indices from highest to lowest priority; when
    omitted, ``rng`` draws a random permutation, and identity is the final
    fallback.
    """
    n = graph.n_atoms()
    if n == 0:
        raise ValueError("empty graph")
    if order is None:
        order = list(rng.permutation(n)) if rng is not None else list(range(n))
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of all atom indices")
    priority = {atom: pos for pos, atom in enumerate(order)}

    ranks = graph.refinement_ranks(use_chirality=False)

    visited = [False] * n
    parent: dict[int, int | None] = {}
    children: dict[int, list[int]] = {i: [] for i in range(n)}
    back_edges: dict[int, list[int]] = {i: [] for i in range(n)}
    roots = []
    visit_seq: list[int] = []

    for root in sorted(range(n), key=lambda i: priority[i]):
        if visited[root]:
            continue
        roots.append(root)
        stack = [(root, None)]
        visited[root] = True
        parent[root] = None
        while stack:
            node, par = stack.pop()
            visit_seq.append(node)
            nbrs = sorted(graph.neighbors(node), key=lambda i: priority[i])
            for nbr in nbrs:
                if not visited[nbr]:
                    visited[nbr] = True
                    parent[nbr] = node
                    children[node].append(nbr)
                    stack.append((nbr, node))
                elif nbr != par and node not in back_edges[nbr] and nbr not in back_edges[node]:
                    back_edges[node].append(nbr)

    # Iterative DFS above visits children in reverse push order; re-sort the
    # child lists so emission follows priority directly.
    for node in range(n):
        children[node].sort(key=lambda i: priority[i])

    emit_pos = {a: i for i, a in enumerate(visit_seq)}
    digit_of: dict[frozenset[int], int] = {}
    free_digits = list(range(1, 100))
    heapq.heapify(free_digits)

    pieces: list[str] = []

    def bond_symbol(a: int, b: int) -> str:
        bond = graph.bond_between(a, b)
        assert bond is not None
        if bond.order is BondOrder.SINGLE:
            if graph.atoms[a].aromatic and graph.atoms[b].aromatic:
                return "-"
            return ""
        if bond.order is BondOrder.DOUBLE:
            return "="
        if bond.order is BondOrder.TRIPLE:
            return "#"
        if graph.atoms[a].aromatic and graph.atoms[b].aromatic:
            return ""
        return ":"

    def emit_atom(idx: int) -> None:
        atom = graph.atoms[idx]
        ring_partners = sorted(
            set(back_edges[idx]) | {b for b in range(n) if idx in back_edges[b]},
            key=lambda b: emit_pos[b],
        )
        # Slot order seen by a future parser: parent, bracket H, ring
        # closures in digit order, then children.
        slots: list[int | None] = []
        if parent[idx] is not None:
            slots.append(parent[idx])
        tag = atom.chirality
        use_tag = tag is not Chirality.NONE and atom.hcount <= 1
        if use_tag and atom.hcount == 1:
            slots.append(None)  # implicit hydrogen
        slots.extend(ring_partners)
        slots.extend(children[idx])
        if use_tag and len(slots) != 4:
            use_tag = False

        written_tag = Chirality.NONE
        if use_tag:
            keys = [-1 if s is None else ranks[s] for s in slots]
            if len(set(keys)) != 4:
                use_tag = False
            else:
                written_tag = tag if _parity(keys) == 0 else tag.flipped()

        pieces.append(_atom_token(graph, idx, written_tag))

        for partner in ring_partners:
            key = frozenset((idx, partner))
            if key in digit_of:
                digit = digit_of.pop(key)
                heapq.heappush(free_digits, digit)
                pieces.append(str(digit) if digit < 10 else f"%{digit:02d}")
            else:
                digit = heapq.heappop(free_digits)
                digit_of[key] = digit
                pieces.append(bond_symbol(idx, partner))
                pieces.append(str(digit) if digit < 10 else f"%{digit:02d}")

        kids = children[idx]
        for pos, kid in enumerate(kids):
            last = pos == len(kids) - 1
            if not last:
                pieces.append("(")
            pieces.append(bond_symbol(idx, kid))
            emit_atom(kid)
            if not last:
                pieces.append(")")

    for pos, root in enumerate(roots):
        if pos:
            pieces.append(".")
        emit_atom(root)

    return "".join(pieces)


def _atom_token(graph: MolecularGraph, idx: int, tag: Chirality) -> str:
    atom = graph.atoms[idx]
    symbol = el.SYMBOL[atom.element]
    aromatic_bare = atom.aromatic and symbol.lower() in el.AROMATIC_ORGANIC
    bare_ok = (
        symbol in el.ORGANIC_SUBSET
        and (not atom.aromatic or aromatic_bare)
        and atom.charge == 0
        and atom.isotope is None
        and tag is Chirality.NONE
        and atom.hcount == expected_implicit_h(graph, idx, assume_hcount=0)
    )
    if bare_ok:
        return symbol.lower() if atom.aromatic else symbol

    sym = symbol.lower() if atom.aromatic else symbol
    body = ""
    if atom.isotope is not None:
        body += str(atom.isotope)
    body += sym
    if tag is Chirality.COUNTERCLOCKWISE:
        body += "@"
    elif tag is Chirality.CLOCKWISE:
        body += "@@"
    if atom.hcount == 1:
        body += "H"
    elif atom.hcount > 1:
        body += f"H{atom.hcount}"
    if atom.charge == 1:
        body += "+"
    elif atom.charge == -1:
        body += "-"
    elif atom.charge > 1:
        body += f"+{atom.charge}"
    elif atom.charge < -1:
        body += f"-{-atom.charge}"
    return f"[{body}]"


def _parity(keys: list[int]) -> int:
    inv = 0
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if keys[i] > keys[j]:
                inv += 1
    return inv & 1
