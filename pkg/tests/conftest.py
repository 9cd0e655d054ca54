import numpy as np
import pytest

from fingertrain.chem.parser import parse_smiles

# A structurally varied set used by round-trip and invariance tests.
SAMPLE_SMILES = [
    "C",
    "CCO",
    "c1ccccc1",
    "c1ccncc1",
    "c1cc[nH]c1",
    "c1ccoc1",
    "c1ccsc1",
    "CC(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "O=C(O)c1ccccc1",
    "N[C@@H](C)C(=O)O",
    "N[C@H](CC(C)C)C(=O)O",
    "c1ccc2ccccc2c1",
    "CC(C)CC1CCOC1",
    "FC(F)(F)c1ccccc1",
    "CC[N+](=O)[O-]",
    "C1CC1",
    "C1CCCCC1",
    "ClCCBr",
    "COc1cc(C#N)ccc1S",
]


@pytest.fixture(scope="session")
def sample_graphs():
    return [parse_smiles(s) for s in SAMPLE_SMILES]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
