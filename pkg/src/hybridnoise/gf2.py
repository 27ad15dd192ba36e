"""Bit-packed GF(2) linear algebra.

Rows of a bit matrix are packed little-endian into ``uint64`` words: column
``c`` lives in word ``c >> 6`` at bit ``c & 63``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

WORD = 64

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def num_words(n_bits: int) -> int:
    return max(1, (n_bits + WORD - 1) // WORD)


@njit(cache=True, inline="always")
def popcount64(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


def pack_bits(matrix) -> np.ndarray:
    """Pack a 2D 0/1 array into ``uint64[rows, words]``."""
    mat = np.asarray(matrix, dtype=np.uint8)
    if mat.ndim != 2:
        raise ValueError("expected a 2D bit matrix")
    rows, cols = mat.shape
    n_words = num_words(cols)
    padded = np.zeros((rows, n_words * WORD), dtype=np.uint8)
    padded[:, :cols] = mat & 1
    bytes_ = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(bytes_).view("<u8").reshape(rows, n_words).astype(np.uint64)


def unpack_bits(packed: np.ndarray, n_cols: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype=np.uint64)
    rows = packed.shape[0]
    bytes_ = packed.astype("<u8").view(np.uint8).reshape(rows, -1)
    return np.unpackbits(bytes_, axis=1, bitorder="little")[:, :n_cols]


@njit(cache=True)
def rank_packed(rows):
    """Rank over GF(2) of a packed matrix. The input is not modified."""
    a = rows.copy()
    m, n_words = a.shape
    rank = 0
    for w in range(n_words):
        for b in range(WORD):
            if rank == m:
                return rank
            bit = np.uint64(1) << np.uint64(b)
            piv = -1
            for r in range(rank, m):
                if a[r, w] & bit:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for k in range(w, n_words):
                    tmp = a[piv, k]
                    a[piv, k] = a[rank, k]
                    a[rank, k] = tmp
            for r in range(piv + 1, m):
                if a[r, w] & bit:
                    for k in range(w, n_words):
                        a[r, k] ^= a[rank, k]
            rank += 1
    return rank


def gf2_rank(matrix) -> int:
    """Rank over GF(2) of a 0/1 matrix (any integer dtype, or pre-packed uint64)."""
    mat = np.asarray(matrix)
    if mat.ndim != 2:
        raise ValueError("expected a 2D bit matrix")
    if mat.shape[0] == 0 or mat.shape[1] == 0:
        return 0
    if mat.dtype == np.uint64:
        return int(rank_packed(mat))
    return int(rank_packed(pack_bits(mat)))


@njit(cache=True)
def symplectic_gram_packed(xs, zs, mask):
    """Packed commutation matrix of rows restricted to ``mask``.

    Entry (i, j) is the parity of x_i.z_j + z_i.x_j over masked columns.
    """
    m, n_words = xs.shape
    out_words = max(1, (m + WORD - 1) // WORD)
    out = np.zeros((m, out_words), dtype=np.uint64)
    for i in range(m):
        for j in range(i + 1, m):
            acc = np.uint64(0)
            for k in range(n_words):
                acc ^= ((xs[i, k] & zs[j, k]) ^ (zs[i, k] & xs[j, k])) & mask[k]
            if popcount64(acc) & np.uint64(1):
                out[i, j >> 6] |= np.uint64(1) << np.uint64(j & 63)
                out[j, i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    return out


def site_mask(sites, n_sites: int) -> np.ndarray:
    mask = np.zeros(num_words(n_sites), dtype=np.uint64)
    for s in sites:
        s = int(s)
        if not 0 <= s < n_sites:
            raise IndexError(f"site {s} outside [0, {n_sites})")
        mask[s >> 6] |= np.uint64(1) << np.uint64(s & 63)
    return mask
