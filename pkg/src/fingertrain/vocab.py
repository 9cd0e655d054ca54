"""Sort & Slice substructure vocabularies and graph tokenisation.

A vocabulary counts, for every circular substructure identifier, the number
of distinct corpus molecules containing it (set semantics per molecule),
sorts descending by count with ascending-identifier tie-break, keeps the
top k, and assigns ranks 1..k. Rank 0 is reserved for padding and never
maps to a substructure; the UNK token follows the last assigned rank.

Tokenisation writes each retained (central atom, radius) environment's rank
into an atoms-by-radii token tensor; cells whose environment was removed as
a duplicate stay at the padding value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from fingertrain.chem.graph import MolecularGraph
from fingertrain.errors import ConfigError, DataError
from fingertrain.fingerprints import FingerprintConfig, morgan_cells, morgan_enumerate

VOCAB_FORMAT_VERSION = 1


@dataclass
class VocabEntry:
    id: int
    radius: int
    count: int
    rank: int


@dataclass
class Vocabulary:
    rank_of: dict[int, int]
    entries: list[VocabEntry]
    k: int
    r_max: int
    kind: str
    use_chirality: bool
    unk_token: int
    corpus_fingerprint: str
    pad_token: int = 0

    @property
    def n_tokens(self) -> int:
        """Token id range size including padding and UNK (pad=0 .. unk)."""
        return self.unk_token + 1

    def fingerprint_config(self) -> FingerprintConfig:
        # nbits does not influence sparse enumeration; any legal value works.
        return FingerprintConfig(radius=self.r_max, nbits=2048, use_chirality=self.use_chirality, kind=self.kind)

    def config_key(self) -> str:
        return f"{self.kind}:rmax{self.r_max}:chiral{int(self.use_chirality)}"

    def entry_for_token(self, token: int) -> VocabEntry | None:
        for e in self.entries:
            if e.rank == token:
                return e
        return None


@dataclass
class TokenizedGraph:
    graph: MolecularGraph
    tokens: np.ndarray  # (n_atoms, r_max + 1) int64
    vocab_ref: str

    @property
    def n_atoms(self) -> int:
        return int(self.tokens.shape[0])


def corpus_fingerprint(smiles_list: Iterable[str]) -> str:
    digest = hashlib.sha256()
    for s in smiles_list:
        digest.update(s.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def build_vocabulary(
    graphs: Iterable[MolecularGraph],
    r_max: int,
    k: int,
    kind: str = "ecfp",
    use_chirality: bool = True,
    corpus_hash: str = "",
) -> Vocabulary:
    """Frequency-ranked vocabulary over a standardized molecule stream."""
    if k < 1:
        raise ConfigError(f"slice size k must be >= 1, got {k}")
    config = FingerprintConfig(radius=r_max, nbits=2048, use_chirality=use_chirality, kind=kind)
    counts: dict[int, int] = {}
    min_radius: dict[int, int] = {}
    n_molecules = 0
    for graph in graphs:
        n_molecules += 1
        sparse = morgan_enumerate(graph, config)
        seen: set[int] = set()
        for entry in sparse.entries:
            if entry.id not in seen:
                seen.add(entry.id)
                counts[entry.id] = counts.get(entry.id, 0) + 1
            prev = min_radius.get(entry.id)
            if prev is None or entry.radius < prev:
                min_radius[entry.id] = entry.radius
    if n_molecules == 0:
        raise DataError("empty corpus: cannot build a vocabulary")

    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    sliced = ordered[:k]
    entries = [
        VocabEntry(id=sid, radius=min_radius[sid], count=cnt, rank=rank)
        for rank, (sid, cnt) in enumerate(sliced, start=1)
    ]
    rank_of = {e.id: e.rank for e in entries}
    unk_token = (entries[-1].rank if entries else 0) + 1
    return Vocabulary(
        rank_of=rank_of,
        entries=entries,
        k=k,
        r_max=r_max,
        kind=kind,
        use_chirality=use_chirality,
        unk_token=unk_token,
        corpus_fingerprint=corpus_hash,
    )


def tokenize(graph: MolecularGraph, vocab: Vocabulary) -> TokenizedGraph:
    """Per-atom, per-radius token tensor under a built vocabulary."""
    config = vocab.fingerprint_config()
    tokens = np.zeros((graph.n_atoms(), vocab.r_max + 1), dtype=np.int64)
    for cell in morgan_cells(graph, config):
        token = vocab.rank_of.get(cell.id, vocab.unk_token)
        tokens[cell.central_atom, cell.radius] = token
    return TokenizedGraph(graph=graph, tokens=tokens, vocab_ref=vocab.corpus_fingerprint)


def sort_slice_vector(graph: MolecularGraph, vocab: Vocabulary) -> np.ndarray:
    """Collision-free binary vector: bit (rank - 1) per present substructure.

    UNK presence is not encoded; the vector length is always k.
    """
    config = vocab.fingerprint_config()
    sparse = morgan_enumerate(graph, config)
    vec = np.zeros(vocab.k, dtype=np.float64)
    for sid in sparse.ids():
        rank = vocab.rank_of.get(sid)
        if rank is not None:
            vec[rank - 1] = 1.0
    return vec


# -- persistence ---------------------------------------------------------------


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    doc = {
        "version": VOCAB_FORMAT_VERSION,
        "r_max": vocab.r_max,
        "k": vocab.k,
        "kind": vocab.kind,
        "use_chirality": vocab.use_chirality,
        "unk_token": vocab.unk_token,
        "corpus_fingerprint": vocab.corpus_fingerprint,
        "entries": [[e.id, e.radius, e.count, e.rank] for e in vocab.entries],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != VOCAB_FORMAT_VERSION:
        raise ConfigError(f"unsupported vocabulary version {doc.get('version')!r}")
    entries = [VocabEntry(id=i, radius=r, count=c, rank=rank) for i, r, c, rank in doc["entries"]]
    return Vocabulary(
        rank_of={e.id: e.rank for e in entries},
        entries=entries,
        k=doc["k"],
        r_max=doc["r_max"],
        kind=doc["kind"],
        use_chirality=doc["use_chirality"],
        unk_token=doc["unk_token"],
        corpus_fingerprint=doc["corpus_fingerprint"],
    )


def require_matching_config(vocab: Vocabulary, kind: str, r_max: int, use_chirality: bool) -> None:
    """Refuse a vocabulary built under a different fingerprint configuration."""
    wanted = f"{kind}:rmax{r_max}:chiral{int(use_chirality)}"
    if vocab.config_key() != wanted:
        raise ConfigError(
            f"vocabulary fingerprint config {vocab.config_key()} does not match run config {wanted}"
        )
