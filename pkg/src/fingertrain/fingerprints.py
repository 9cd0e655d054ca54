"""Morgan circular substructure enumeration and fingerprint folding.

Identifiers come from a fixed 64-bit mixing function (splitmix64 chain), so
fingerprints are stable across runs and platforms but intentionally not
bit-compatible with any external toolkit. ECFP invariants hash element-level
atom properties; FCFP invariants hash a six-class pharmacophore vector
(donor, acceptor, aromatic, halogen, basic, acidic) defined by the fixed
rule table in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fingertrain import bitset
from fingertrain.chem.graph import BondOrder, MolecularGraph
from fingertrain.errors import ConfigError

_M64 = (1 << 64) - 1
_SEED = 0x5AFE_C0DE_9E37_79B9


def _mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def hash_chain(*values: int) -> int:
    """Order-sensitive 64-bit hash of a value sequence."""
    h = _SEED
    for v in values:
        h = _mix64(h ^ (v & _M64))
    return h


@dataclass(frozen=True)
class FingerprintConfig:
    radius: int = 2
    nbits: int = 2048
    use_chirality: bool = True
    kind: str = "ecfp"

    def __post_init__(self):
        if self.radius < 0 or self.radius > 8:
            raise ConfigError(f"radius must be in 0..8, got {self.radius}")
        if self.nbits <= 0 or self.nbits & (self.nbits - 1):
            raise ConfigError(f"nbits must be a power of two, got {self.nbits}")
        if self.kind not in ("ecfp", "fcfp"):
            raise ConfigError(f"unknown invariant kind {self.kind!r}")

    def key(self) -> str:
        return f"{self.kind}:r{self.radius}:n{self.nbits}:chiral{int(self.use_chirality)}"


@dataclass(frozen=True)
class SubstructureId:
    id: int
    radius: int
    central_atom: int
    atom_set: frozenset[int]


@dataclass
class SparseFingerprint:
    entries: list[SubstructureId]
    molecule_ref: str = ""

    def ids(self) -> set[int]:
        return {e.id for e in self.entries}

    def id_radius_pairs(self) -> set[tuple[int, int]]:
        return {(e.id, e.radius) for e in self.entries}


@dataclass
class FoldedFingerprint:
    words: np.ndarray
    nbits: int

    def popcount(self) -> int:
        return bitset.popcount(self.words)

    def bit_indices(self) -> np.ndarray:
        return bitset.to_indices(self.words)


# -- atom invariants ---------------------------------------------------------


def atom_invariants(graph: MolecularGraph, kind: str = "ecfp", use_chirality: bool = False) -> list[int]:
    """Per-atom 64-bit invariants feeding radius-0 Morgan identifiers."""
    if kind == "ecfp":
        out = []
        for i, a in enumerate(graph.atoms):
            out.append(
                hash_chain(
                    1,  # invariant family tag
                    graph.degree(i),
                    a.element,
                    a.charge & _M64,
                    a.hcount,
                    int(a.in_ring),
                    a.isotope or 0,
                    a.chirality.value if use_chirality else 0,
                )
            )
        return out
    if kind == "fcfp":
        out = []
        for i in range(graph.n_atoms()):
            klass = pharmacophore_class(graph, i)
            out.append(hash_chain(2, klass))
        return out
    raise ConfigError(f"unknown invariant kind {kind!r}")


def pharmacophore_class(graph: MolecularGraph, idx: int) -> int:
    """Six-bit class vector: donor, acceptor, aromatic, halogen, basic, acidic."""
    a = graph.atoms[idx]
    bits = 0
    if _is_donor(graph, idx):
        bits |= 1
    if _is_acceptor(graph, idx):
        bits |= 2
    if a.aromatic:
        bits |= 4
    if a.element in (9, 17, 35, 53):
        bits |= 8
    if _is_basic(graph, idx):
        bits |= 16
    if _is_acidic(graph, idx):
        bits |= 32
    return bits


def _is_donor(graph, idx) -> bool:
    a = graph.atoms[idx]
    return a.element in (7, 8) and a.hcount >= 1


def _is_acceptor(graph, idx) -> bool:
    a = graph.atoms[idx]
    if a.element == 8:
        return a.charge <= 0
    if a.element == 7:
        if a.charge > 0:
            return False
        # Pyrrole-type aromatic nitrogen has no available lone pair.
        if a.aromatic and (a.hcount >= 1 or graph.degree(idx) >= 3):
            return False
        return graph.degree(idx) + a.hcount <= 3
    return False


def _has_multiple_bond_to(graph, idx, elements) -> bool:
    for nbr, bidx in graph.adjacency[idx]:
        if graph.bonds[bidx].order in (BondOrder.DOUBLE, BondOrder.TRIPLE):
            if graph.atoms[nbr].element in elements:
                return True
    return False


def _is_basic(graph, idx) -> bool:
    a = graph.atoms[idx]
    if a.element != 7 or a.aromatic:
        return False
    if a.charge == 1 and a.hcount >= 1:
        return True
    if a.charge != 0:
        return False
    # Exclude imine-type N and amide-type N (neighbor carbon bearing C=O/C=S).
    if _has_multiple_bond_to(graph, idx, (6, 7, 8, 16)):
        return False
    for nbr in graph.neighbors(idx):
        if graph.atoms[nbr].element == 6 and _has_multiple_bond_to(graph, nbr, (8, 16)):
            return False
    return True


def _is_acidic(graph, idx) -> bool:
    a = graph.atoms[idx]
    if a.element not in (8, 16):
        return False
    if a.charge == -1:
        return True
    if a.hcount < 1:
        return False
    # Hydroxyl attached to an atom that carries a double bond to O/S
    # (carboxylic, sulfonic, phosphonic acids).
    for nbr in graph.neighbors(idx):
        if _has_multiple_bond_to(graph, nbr, (8, 16)):
            return True
    return False


# -- Morgan enumeration ------------------------------------------------------


def morgan_cells(graph: MolecularGraph, config: FingerprintConfig) -> list[SubstructureId]:
    """Retained (central atom, radius) environments after duplicate removal.

    Iterative neighborhood hashing for radii 0..r. An environment is dropped
    when it stopped growing (single atoms, chain ends) or when another
    environment covers the identical atom set; the survivor is the one with
    the lower radius, then the smaller identifier, then the smaller central
    atom index. One cell per surviving (atom, radius) pair remains; these
    cells are exactly the token slots for substructure tokenisation.
    """
    n = graph.n_atoms()
    inv = atom_invariants(graph, config.kind, config.use_chirality)
    ids = [hash_chain(10, v) for v in inv]
    env: list[frozenset[int]] = [frozenset((i,)) for i in range(n)]

    candidates: list[SubstructureId] = [
        SubstructureId(ids[i], 0, i, env[i]) for i in range(n)
    ]
    for r in range(1, config.radius + 1):
        new_ids = []
        new_env = []
        for i in range(n):
            pairs = sorted(
                (graph.bonds[bidx].order.value, ids[nbr])
                for nbr, bidx in graph.adjacency[i]
            )
            flat: list[int] = [11, r, ids[i]]
            for code, nid in pairs:
                flat.extend((code, nid))
            new_ids.append(hash_chain(*flat))
            grown = env[i]
            for nbr, _ in graph.adjacency[i]:
                grown = grown | env[nbr]
            new_env.append(grown)
        for i in range(n):
            if new_env[i] != env[i]:
                candidates.append(SubstructureId(new_ids[i], r, i, new_env[i]))
        ids, env = new_ids, new_env

    by_atom_set: dict[frozenset[int], SubstructureId] = {}
    for cand in candidates:
        cur = by_atom_set.get(cand.atom_set)
        if cur is None or (cand.radius, cand.id, cand.central_atom) < (cur.radius, cur.id, cur.central_atom):
            by_atom_set[cand.atom_set] = cand
    cells = sorted(by_atom_set.values(), key=lambda c: (c.radius, c.central_atom))
    return cells


def morgan_enumerate(graph: MolecularGraph, config: FingerprintConfig, molecule_ref: str = "") -> SparseFingerprint:
    """Sparse fingerprint: retained cells collapsed to unique (id, radius)."""
    best: dict[tuple[int, int], SubstructureId] = {}
    for cell in morgan_cells(graph, config):
        key = (cell.id, cell.radius)
        cur = best.get(key)
        if cur is None or cell.central_atom < cur.central_atom:
            best[key] = cell
    entries = sorted(best.values(), key=lambda e: (e.radius, e.id))
    return SparseFingerprint(entries=entries, molecule_ref=molecule_ref)


# -- folding and similarity ---------------------------------------------------


def fold_hash(sparse: SparseFingerprint, nbits: int) -> FoldedFingerprint:
    """Set bit (id mod nbits) for every entry."""
    if nbits <= 0:
        raise ValueError("nbits must be positive")
    mask = nbits - 1
    if nbits & mask:
        raise ValueError("nbits must be a power of two")
    idx = {e.id & mask for e in sparse.entries}
    return FoldedFingerprint(words=bitset.from_indices(idx, nbits), nbits=nbits)


def tanimoto(a: FoldedFingerprint, b: FoldedFingerprint) -> float:
    """|a ∩ b| / |a ∪ b|; two empty fingerprints score 0.0."""
    if a.nbits != b.nbits:
        raise ValueError(f"fingerprint length mismatch: {a.nbits} vs {b.nbits}")
    from fingertrain import kernels

    return float(kernels.tanimoto_block(a.words.reshape(1, -1), b.words.reshape(1, -1))[0, 0])


def fingerprint_graph(graph: MolecularGraph, config: FingerprintConfig, molecule_ref: str = "") -> FoldedFingerprint:
    return fold_hash(morgan_enumerate(graph, config, molecule_ref), config.nbits)


def packed_matrix(folded: list[FoldedFingerprint]) -> np.ndarray:
    """Stack folded fingerprints into one (n, words) uint64 matrix."""
    if not folded:
        return np.zeros((0, 0), dtype=np.uint64)
    nbits = folded[0].nbits
    if any(f.nbits != nbits for f in folded):
        raise ValueError("fingerprint length mismatch in batch")
    return np.stack([f.words for f in folded])


# -- wire formats --------------------------------------------------------------


def sparse_to_line(sparse: SparseFingerprint) -> str:
    body = ",".join(f"{e.id}:{e.radius}" for e in sparse.entries)
    return f"{sparse.molecule_ref}\t{body}"


def sparse_from_line(line: str) -> SparseFingerprint:
    ref, _, body = line.rstrip("\n").partition("\t")
    entries = []
    if body:
        for item in body.split(","):
            sid, _, rad = item.partition(":")
            entries.append(SubstructureId(int(sid), int(rad), -1, frozenset()))
    return SparseFingerprint(entries=entries, molecule_ref=ref)
