"""Fixed-length bitsets packed into uint64 words.

Bit ``i`` lives in word ``i >> 6`` at position ``i & 63``. The hex wire
format serialises the words little-endian, so a bitset of ``nbits`` always
encodes to ``nbits // 4`` hex characters.
"""

from __future__ import annotations

import numpy as np

from fingertrain import kernels


def n_words(nbits: int) -> int:
    return (nbits + 63) >> 6


def zeros(nbits: int) -> np.ndarray:
    return np.zeros(n_words(nbits), dtype=np.uint64)


def from_indices(indices, nbits: int) -> np.ndarray:
    """Pack bit positions into a word array. Repeated indices are idempotent."""
    words = zeros(nbits)
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= nbits:
            raise ValueError("bit index out of range")
        np.bitwise_or.at(words, idx >> 6, np.uint64(1) << (idx & 63).astype(np.uint64))
    return words


def to_indices(words: np.ndarray) -> np.ndarray:
    """Positions of set bits, ascending."""
    out = []
    for w, word in enumerate(words.tolist()):
        base = w << 6
        while word:
            low = word & -word
            out.append(base + low.bit_length() - 1)
            word ^= low
    return np.asarray(out, dtype=np.int64)


def popcount(words: np.ndarray) -> int:
    return int(kernels.popcount_rows(words.reshape(1, -1))[0])


def to_hex(words: np.ndarray) -> str:
    return words.astype("<u8").tobytes().hex()


def from_hex(text: str, nbits: int) -> np.ndarray:
    raw = bytes.fromhex(text)
    if len(raw) != n_words(nbits) * 8:
        raise ValueError(f"hex bitset length {len(raw)} bytes does not match nbits={nbits}")
    return np.frombuffer(raw, dtype="<u8").astype(np.uint64)
