"""SMILES parsing, molecular graphs, and standardisation."""

from fingertrain.chem.graph import Atom, Bond, BondOrder, Chirality, MolecularGraph
from fingertrain.chem.parser import parse_smiles
from fingertrain.chem.standardize import StandardizationReport, standardize
from fingertrain.chem.writer import to_smiles

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "Chirality",
    "MolecularGraph",
    "parse_smiles",
    "standardize",
    "StandardizationReport",
    "to_smiles",
]
