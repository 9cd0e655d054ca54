"""Molecular graph model.

Atoms carry element/charge/hydrogen-count state; bonds are typed edges.
Aromaticity follows a constrained, documented model: lowercase input atoms
are aromatic, ring membership is required, and each aromatic ring must pass
a Hückel 4n+2 electron count. Tetrahedral chirality tags are normalised at
parse time to a canonical neighbor frame so that graphs and fingerprints do
not depend on SMILES atom numbering.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace

from fingertrain.chem import elements as el


class BondOrder(enum.Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def order_value(self) -> float:
        """Bond order contribution to valence; aromatic counts 1.5."""
        return {1: 1.0, 2: 2.0, 3: 3.0, 4: 1.5}[self.value]


class Chirality(enum.Enum):
    NONE = 0
    COUNTERCLOCKWISE = 1  # written '@'
    CLOCKWISE = 2  # written '@@'

    def flipped(self) -> "Chirality":
        if self is Chirality.NONE:
            return self
        if self is Chirality.CLOCKWISE:
            return Chirality.COUNTERCLOCKWISE
        return Chirality.CLOCKWISE


# Neighbor-slot markers used for chirality bookkeeping. A slot is either
# ("a", atom_index) or ("h", None) for the in-bracket implicit hydrogen.
Slot = tuple[str, int | None]


@dataclass
class Atom:
    element: int
    charge: int = 0
    hcount: int = 0
    aromatic: bool = False
    isotope: int | None = None
    chirality: Chirality = Chirality.NONE
    in_ring: bool = False
    # Parse-order neighbor slots; retained only for atoms written with a
    # chirality tag so edits (explicit-H removal) can re-derive the tag.
    chiral_slots: list[Slot] | None = field(default=None, compare=False, repr=False)

    def key(self) -> tuple:
        """Identity tuple used for graph equality (ring flag is derived)."""
        return (
            self.element,
            self.charge,
            self.hcount,
            self.aromatic,
            self.isotope or 0,
            self.chirality.value,
        )


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


class MolecularGraph:
    """Atoms, typed bonds, and adjacency, plus derived ring/chirality state."""

    def __init__(self, source_smiles: str = ""):
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self.adjacency: list[list[tuple[int, int]]] = []  # (neighbor, bond index)
        self.source_smiles = source_smiles

    # -- construction ------------------------------------------------------

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        self.adjacency.append([])
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: BondOrder) -> int:
        if a == b:
            raise ValueError("self bond")
        if not (0 <= a < len(self.atoms) and 0 <= b < len(self.atoms)):
            raise ValueError("bond endpoint out of range")
        if any(nbr == b for nbr, _ in self.adjacency[a]):
            raise ValueError(f"duplicate bond between atoms {a} and {b}")
        self.bonds.append(Bond(a, b, order))
        idx = len(self.bonds) - 1
        self.adjacency[a].append((b, idx))
        self.adjacency[b].append((a, idx))
        return idx

    def set_bond_order(self, bond_idx: int, order: BondOrder) -> None:
        b = self.bonds[bond_idx]
        self.bonds[bond_idx] = Bond(b.a, b.b, order)

    # -- basic queries -----------------------------------------------------

    def n_atoms(self) -> int:
        return len(self.atoms)

    def degree(self, idx: int) -> int:
        """Heavy-atom neighbor count (explicit H nodes excluded)."""
        return sum(1 for nbr, _ in self.adjacency[idx] if self.atoms[nbr].element != 1)

    def total_degree(self, idx: int) -> int:
        return len(self.adjacency[idx])

    def neighbors(self, idx: int) -> list[int]:
        return [nbr for nbr, _ in self.adjacency[idx]]

    def bond_between(self, a: int, b: int) -> Bond | None:
        for nbr, bidx in self.adjacency[a]:
            if nbr == b:
                return self.bonds[bidx]
        return None

    def connected_components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        comps = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            comp = []
            queue = deque([start])
            seen[start] = True
            while queue:
                i = queue.popleft()
                comp.append(i)
                for nbr, _ in self.adjacency[i]:
                    if not seen[nbr]:
                        seen[nbr] = True
                        queue.append(nbr)
            comps.append(sorted(comp))
        return comps

    # -- valence model -----------------------------------------------------

    def _has_exocyclic_multiple(self, idx: int) -> bool:
        for _, bidx in self.adjacency[idx]:
            if self.bonds[bidx].order in (BondOrder.DOUBLE, BondOrder.TRIPLE):
                return True
        return False

    def aromatic_pi(self, idx: int, hcount: int | None = None) -> tuple[float, int]:
        """(sigma order per aromatic bond, Hückel pi-electron contribution).

        Lone-pair donors (pyrrole N, furan O, thiophene S) have plain sigma
        ring bonds and contribute two electrons; pi-bonded members count ring
        bonds at 1.5 and contribute one; quinoid carbons and bare borons
        contribute none. ``hcount`` overrides the stored hydrogen count for
        the pyrrole-versus-pyridine decision (the parser fills hydrogens
        before they exist on the atom).
        """
        a = self.atoms[idx]
        e, q = a.element, a.charge
        h = a.hcount if hcount is None else hcount
        if e == 6:
            if q == -1:
                return 1.0, 2
            if q == 1:
                return 1.0, 0
            if self._has_exocyclic_multiple(idx):
                return 1.0, 0
            return 1.5, 1
        if e in (7, 15, 33):  # N, P, As
            if q == 1:
                return 1.5, 1
            if h >= 1 or self.degree(idx) >= 3 or q == -1:
                return 1.0, 2
            return 1.5, 1
        if e in (8, 16, 34, 52):  # O, S, Se, Te
            if q == 1:
                return 1.5, 1
            return 1.0, 2
        if e == 5:  # B
            if q == -1:
                return 1.0, 2
            return 1.0, 0
        return 1.0, 0

    def valence_sum(self, idx: int) -> float:
        """Sigma-model bond order sum (aromatic bonds weighted per pi type)."""
        total = 0.0
        arom_sigma = self.aromatic_pi(idx)[0] if self.atoms[idx].aromatic else 1.5
        for _, bidx in self.adjacency[idx]:
            order = self.bonds[bidx].order
            if order is BondOrder.AROMATIC:
                total += arom_sigma
            else:
                total += order.order_value
        return total

    def used_valence(self, idx: int) -> float:
        return self.valence_sum(idx) + self.atoms[idx].hcount

    # -- ring perception ---------------------------------------------------

    def ring_bond_flags(self) -> list[bool]:
        """True for bonds on a cycle (non-bridges), via iterative Tarjan."""
        n = len(self.atoms)
        disc = [-1] * n
        low = [0] * n
        is_bridge = [False] * len(self.bonds)
        timer = 0
        for root in range(n):
            if disc[root] != -1:
                continue
            stack = [(root, -1, iter(self.adjacency[root]))]
            disc[root] = low[root] = timer
            timer += 1
            while stack:
                node, parent_edge, it = stack[-1]
                advanced = False
                for nbr, bidx in it:
                    if bidx == parent_edge:
                        continue
                    if disc[nbr] == -1:
                        disc[nbr] = low[nbr] = timer
                        timer += 1
                        stack.append((nbr, bidx, iter(self.adjacency[nbr])))
                        advanced = True
                        break
                    low[node] = min(low[node], disc[nbr])
                if not advanced:
                    stack.pop()
                    if stack:
                        pnode = stack[-1][0]
                        low[pnode] = min(low[pnode], low[node])
                        if low[node] > disc[pnode]:
                            is_bridge[parent_edge] = True
            # loop continues for other components
        return [not b for b in is_bridge]

    def refresh_ring_flags(self) -> None:
        ring_bonds = self.ring_bond_flags()
        in_ring = [False] * len(self.atoms)
        for bidx, flag in enumerate(ring_bonds):
            if flag:
                in_ring[self.bonds[bidx].a] = True
                in_ring[self.bonds[bidx].b] = True
        for atom, flag in zip(self.atoms, in_ring):
            atom.in_ring = flag

    def smallest_rings(self) -> list[tuple[int, ...]]:
        """One shortest cycle through every ring bond (deduplicated)."""
        ring_bonds = self.ring_bond_flags()
        rings: dict[frozenset[int], tuple[int, ...]] = {}
        for bidx, flag in enumerate(ring_bonds):
            if not flag:
                continue
            bond = self.bonds[bidx]
            path = self._shortest_path_avoiding(bond.a, bond.b, bidx)
            if path is None:
                continue
            key = frozenset(path)
            if key not in rings or len(path) < len(rings[key]):
                rings[key] = tuple(path)
        return sorted(rings.values(), key=lambda r: (len(r), r))

    def _shortest_path_avoiding(self, src: int, dst: int, skip_bond: int):
        prev = {src: None}
        queue = deque([src])
        while queue:
            i = queue.popleft()
            if i == dst:
                break
            for nbr, bidx in self.adjacency[i]:
                if bidx == skip_bond or nbr in prev:
                    continue
                prev[nbr] = i
                queue.append(nbr)
        if dst not in prev:
            return None
        path = []
        node: int | None = dst
        while node is not None:
            path.append(node)
            node = prev[node]
        return path

    def aromatic_rings(self) -> list[tuple[int, ...]]:
        """Rings whose atoms are all aromatic and whose Hückel count is 4n+2."""
        out = []
        for ring in self.smallest_rings():
            if not all(self.atoms[i].aromatic for i in ring):
                continue
            electrons = sum(self.aromatic_pi(i)[1] for i in ring)
            if electrons % 4 == 2:
                out.append(ring)
        return out

    # -- canonical ranks and chirality --------------------------------------

    def refinement_ranks(self, use_chirality: bool = False) -> list[int]:
        """Morgan-style iterative neighborhood refinement, order independent."""
        n = len(self.atoms)
        keys: list[tuple] = []
        for i, a in enumerate(self.atoms):
            key = (a.element, a.charge, a.hcount, a.isotope or 0, a.aromatic, self.total_degree(i))
            if use_chirality:
                key = key + (a.chirality.value,)
            keys.append(key)
        ranks = _dense_ranks(keys)
        for _ in range(max(n, 1)):
            new_keys = []
            for i in range(n):
                nbrs = sorted(
                    (self.bonds[bidx].order.value, ranks[nbr])
                    for nbr, bidx in self.adjacency[i]
                )
                new_keys.append((ranks[i], tuple(nbrs)))
            new_ranks = _dense_ranks(new_keys)
            if len(set(new_ranks)) == len(set(ranks)):
                ranks = new_ranks
                break
            ranks = new_ranks
        return ranks

    def canonicalize_chirality(self) -> None:
        """Rewrite parse-order chirality tags into the canonical neighbor frame.

        The canonical frame orders the four substituents by refinement rank
        with the implicit hydrogen first. Tags on centers that are not plain
        tetrahedral (wrong substituent count, duplicate ranks) are dropped.
        """
        ranks = self.refinement_ranks(use_chirality=False)
        for idx, atom in enumerate(self.atoms):
            if atom.chirality is Chirality.NONE or atom.chiral_slots is None:
                continue
            slots = atom.chiral_slots
            if len(slots) != 4 or atom.hcount > 1:
                atom.chirality = Chirality.NONE
                atom.chiral_slots = None
                continue
            # Implicit hydrogen sorts first (rank -1); substituents by rank.
            plain = [-1 if kind == "h" else ranks[ref] for kind, ref in slots]
            # Duplicate refinement ranks mean the center is not a resolvable
            # stereocenter under this model; drop the tag.
            if len(set(plain)) != 4:
                atom.chirality = Chirality.NONE
                atom.chiral_slots = None
                continue
            if _permutation_parity_to_sorted(plain) == 1:
                atom.chirality = atom.chirality.flipped()
            # Slots are now folded into the canonical tag; keep them so later
            # structural edits can re-derive, but rebase to canonical order.
            order = sorted(range(4), key=lambda j: plain[j])
            atom.chiral_slots = [slots[j] for j in order]

    # -- copies and subgraphs ------------------------------------------------

    def copy(self) -> "MolecularGraph":
        g = MolecularGraph(self.source_smiles)
        for a in self.atoms:
            new = replace(a)
            new.chiral_slots = list(a.chiral_slots) if a.chiral_slots else None
            g.add_atom(new)
        for b in self.bonds:
            g.add_bond(b.a, b.b, b.order)
        return g

    def subgraph(self, atom_indices: list[int]) -> "MolecularGraph":
        """Induced subgraph; atoms keep their relative order."""
        keep = sorted(atom_indices)
        remap = {old: new for new, old in enumerate(keep)}
        g = MolecularGraph(self.source_smiles)
        for old in keep:
            a = self.atoms[old]
            new = replace(a)
            if a.chiral_slots:
                slots: list[Slot] = []
                ok = True
                for kind, ref in a.chiral_slots:
                    if kind == "a" and ref not in remap:
                        ok = False
                        break
                    slots.append((kind, remap[ref]) if kind == "a" else (kind, None))
                new.chiral_slots = slots if ok else None
                if not ok:
                    new.chirality = Chirality.NONE
            g.add_atom(new)
        for b in self.bonds:
            if b.a in remap and b.b in remap:
                g.add_bond(remap[b.a], remap[b.b], b.order)
        return g

    # -- equality ------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MolecularGraph):
            return NotImplemented
        if len(self.atoms) != len(other.atoms):
            return False
        if any(a.key() != b.key() for a, b in zip(self.atoms, other.atoms)):
            return False
        mine = {(min(b.a, b.b), max(b.a, b.b), b.order) for b in self.bonds}
        theirs = {(min(b.a, b.b), max(b.a, b.b), b.order) for b in other.bonds}
        return mine == theirs

    def __repr__(self) -> str:
        return f"MolecularGraph(atoms={len(self.atoms)}, bonds={len(self.bonds)}, smiles={self.source_smiles!r})"


def _dense_ranks(keys: list[tuple]) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _permutation_parity_to_sorted(keys: list) -> int:
    """0 if sorting ``keys`` ascending is an even permutation, else 1."""
    inversions = 0
    n = len(keys)
    for i in range(n):
        for j in range(i + 1, n):
            if keys[i] > keys[j]:
                inversions += 1
    return inversions & 1
