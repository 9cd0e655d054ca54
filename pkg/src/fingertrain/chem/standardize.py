"""Simplified molecular standardisation.

Pipeline: sanitisation check (valence + aromaticity), explicit-hydrogen
removal into counts, disconnected-metal drop plus largest-organic-fragment
selection, rule-table neutralisation, and a recorded no-op in place of
tautomer canonicalisation (out of scope). Failures produce a report with a
reason instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fingertrain.chem import elements as el
from fingertrain.chem.graph import Chirality, MolecularGraph
from fingertrain.chem.parser import parse_smiles
from fingertrain.errors import SmilesParseError

STEPS = (
    "sanitize",
    "remove_explicit_hydrogens",
    "select_parent_fragment",
    "neutralize",
    "tautomer_noop",
)


@dataclass
class StandardizationReport:
    input_smiles: str
    output: MolecularGraph | None = None
    steps_applied: list[str] = field(default_factory=list)
    failure_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.output is not None


def sanitize_reason(graph: MolecularGraph) -> str | None:
    """None when the graph passes valence and aromaticity checks."""
    for i, atom in enumerate(graph.atoms):
        allowed = el.ALLOWED_VALENCES.get((atom.element, atom.charge))
        if allowed is None:
            continue
        used = graph.used_valence(i)
        if used > max(allowed) + 1e-9:
            sym = el.SYMBOL.get(atom.element, str(atom.element))
            return f"valence violation: atom {i} ({sym}) uses {used:g}, max {max(allowed)}"

    aromatic_atoms = {i for i, a in enumerate(graph.atoms) if a.aromatic}
    if aromatic_atoms:
        ok_atoms: set[int] = set()
        ok_bonds: set[frozenset[int]] = set()
        for ring in graph.aromatic_rings():
            ok_atoms.update(ring)
            for a, b in zip(ring, ring[1:] + ring[:1]):
                ok_bonds.add(frozenset((a, b)))
        bad = aromatic_atoms - ok_atoms
        if bad:
            return f"aromatic atom {min(bad)} is not in any aromatic ring"
        for bond in graph.bonds:
            if bond.order.name == "AROMATIC" and frozenset((bond.a, bond.b)) not in ok_bonds:
                return f"aromatic bond {bond.a}-{bond.b} outside any aromatic ring"
    return None


def standardize(graph: MolecularGraph) -> StandardizationReport:
    report = StandardizationReport(input_smiles=graph.source_smiles)

    reason = sanitize_reason(graph)
    report.steps_applied.append("sanitize")
    if reason is not None:
        report.failure_reason = reason
        return report

    work = _remove_explicit_hydrogens(graph)
    report.steps_applied.append("remove_explicit_hydrogens")

    work = _select_parent_fragment(work)
    report.steps_applied.append("select_parent_fragment")
    if work is None:
        report.failure_reason = "no fragment left after metal removal"
        return report

    _neutralize(work)
    report.steps_applied.append("neutralize")

    # Tautomer canonicalisation is intentionally not performed.
    report.steps_applied.append("tautomer_noop")

    work.refresh_ring_flags()
    work.canonicalize_chirality()
    reason = sanitize_reason(work)
    if reason is not None:
        report.failure_reason = f"post-standardisation check failed: {reason}"
        return report
    report.output = work
    return report


def standardize_smiles(smiles: str) -> StandardizationReport:
    """Parse then standardise; parse errors become failed reports."""
    try:
        graph = parse_smiles(smiles)
    except SmilesParseError as exc:
        return StandardizationReport(input_smiles=smiles, failure_reason=f"parse error: {exc}")
    return standardize(graph)


def _remove_explicit_hydrogens(graph: MolecularGraph) -> MolecularGraph:
    """Fold plain explicit H nodes into neighbor hydrogen counts.

    Isotope-labelled hydrogens, charged hydrogens, and H bonded to H stay
    as nodes.
    """
    work = graph.copy()
    removable = []
    for idx, atom in enumerate(work.atoms):
        if atom.element != 1 or atom.isotope is not None or atom.charge != 0:
            continue
        if atom.hcount != 0 or len(work.adjacency[idx]) != 1:
            continue
        nbr, bidx = work.adjacency[idx][0]
        if work.atoms[nbr].element == 1 or work.bonds[bidx].order.name != "SINGLE":
            continue
        removable.append((idx, nbr))
    if not removable:
        return work

    removed = {idx for idx, _ in removable}
    for idx, nbr in removable:
        work.atoms[nbr].hcount += 1
        slots = work.atoms[nbr].chiral_slots
        if slots:
            work.atoms[nbr].chiral_slots = [
                ("h", None) if (kind == "a" and ref == idx) else (kind, ref)
                for kind, ref in slots
            ]
    keep = [i for i in range(work.n_atoms()) if i not in removed]
    out = work.subgraph(keep)
    out.refresh_ring_flags()
    return out


def _select_parent_fragment(graph: MolecularGraph) -> MolecularGraph | None:
    """Drop disconnected single metal atoms, keep the largest organic fragment."""
    comps = graph.connected_components()
    comps = [
        c
        for c in comps
        if not (len(c) == 1 and graph.atoms[c[0]].element in el.METALS)
    ]
    if not comps:
        return None
    if len(comps) == 1:
        frag = graph.subgraph(comps[0])
        frag.refresh_ring_flags()
        return frag

    def heavy(c):
        return sum(1 for i in c if graph.atoms[i].element != 1)

    def carbons(c):
        return sum(1 for i in c if graph.atoms[i].element == 6)

    organic = [c for c in comps if carbons(c) > 0]
    pool = organic if organic else comps
    best = max(pool, key=lambda c: (heavy(c), carbons(c), sum(graph.atoms[i].hcount for i in c), -c[0]))
    frag = graph.subgraph(best)
    frag.refresh_ring_flags()
    return frag


def _neutralize(graph: MolecularGraph) -> None:
    """Fixed-table neutralisation.

    Protonates O-/S- anions with at most one sigma bond (carboxylate,
    alkoxide, phenolate, thiolate) and deprotonates N+ cations that carry a
    hydrogen (ammonium, protonated amines, pyridinium). Charges adjacent to
    an opposite charge are preserved so charge-separated groups such as
    nitro survive intact.
    """
    for idx, atom in enumerate(graph.atoms):
        if atom.charge == -1 and atom.element in (8, 16):
            if graph.valence_sum(idx) <= 1.0 + 1e-9 and not _has_charged_neighbor(graph, idx, +1):
                atom.charge = 0
                atom.hcount += 1
        elif atom.charge == 1 and atom.element == 7 and atom.hcount >= 1:
            if not _has_charged_neighbor(graph, idx, -1):
                atom.charge = 0
                atom.hcount -= 1


def _has_charged_neighbor(graph: MolecularGraph, idx: int, sign: int) -> bool:
    return any(graph.atoms[n].charge * sign > 0 for n in graph.neighbors(idx))
