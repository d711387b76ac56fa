"""Mixed-radix packing for product alphabets and n-letter sequence spaces.

Conventions used everywhere in this package:
  * a network symbol over C links is packed row-major with link 0 as the most
    significant digit: code = sum_i sym_i * prod_{k>i} size_k;
  * restrictions to a link subset keep the links in ascending index order;
  * an n-letter sequence over alphabet A is packed base-A with position 0 as
    the most significant digit.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def strides(sizes: Sequence[int]) -> np.ndarray:
    """Row-major strides for a product alphabet."""
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.ones_like(sizes)
    out[:-1] = np.cumprod(sizes[::-1])[::-1][1:]
    return out


def pack_links(link_symbols: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """(C, n) per-link symbols -> (n,) product codes."""
    st = strides(sizes)
    return (np.asarray(link_symbols, dtype=np.int64) * st[:, None]).sum(axis=0)


def unpack_links(codes: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """(n,) product codes -> (C, n) per-link symbols."""
    st = strides(sizes)
    sizes = np.asarray(sizes, dtype=np.int64)
    codes = np.asarray(codes, dtype=np.int64)
    return (codes[None, :] // st[:, None]) % sizes[:, None]


def link_digit(codes: np.ndarray, sizes: Sequence[int], link: int) -> np.ndarray:
    """Extract one link's symbols from product codes."""
    st = strides(sizes)
    return (np.asarray(codes, dtype=np.int64) // st[link]) % int(sizes[link])


def restrict_codes(sizes: Sequence[int], links: Sequence[int]) -> np.ndarray:
    """Map every full product code to its packed restriction on `links`."""
    links = sorted(links)
    total = int(np.prod(sizes))
    codes = np.arange(total, dtype=np.int64)
    if not links:
        return np.zeros(total, dtype=np.int64)
    sub_sizes = [int(sizes[i]) for i in links]
    sub_st = strides(sub_sizes)
    out = np.zeros(total, dtype=np.int64)
    for pos, link in enumerate(links):
        out += link_digit(codes, sizes, link) * sub_st[pos]
    return out


def restriction_matrix(sizes: Sequence[int], links: Sequence[int]) -> np.ndarray:
    """0/1 matrix S with S[restricted_code, full_code] = 1."""
    links = sorted(links)
    sub_total = int(np.prod([sizes[i] for i in links])) if links else 1
    total = int(np.prod(sizes))
    s = np.zeros((sub_total, total))
    s[restrict_codes(sizes, links), np.arange(total)] = 1.0
    return s


def pack_sequences(seqs: np.ndarray, alphabet_size: int) -> np.ndarray:
    """(m, n) sequences over an alphabet -> (m,) packed integers (int64).

    Caller must ensure alphabet_size**n fits in 63 bits.
    """
    seqs = np.asarray(seqs, dtype=np.int64)
    n = seqs.shape[-1]
    if n * np.log2(alphabet_size) > 63:
        raise ValueError("sequence space exceeds 63-bit packing")
    weights = alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return seqs @ weights


def unpack_sequence(code: int, alphabet_size: int, n: int) -> np.ndarray:
    """Inverse of pack_sequences for a single code."""
    out = np.zeros(n, dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[t] = code % alphabet_size
        code //= alphabet_size
    return out
