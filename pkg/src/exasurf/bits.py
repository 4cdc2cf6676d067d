"""Bit-level helpers: MSB-first packing, Elias gamma, canonical prefix codes."""

from __future__ import annotations

import numpy as np
from numba import njit


def pack_varbits(values: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Pack each value into its length in bits, MSB-first, returning a byte array.

    Bit positions come from a prefix sum over the lengths, so the layout is
    independent of any chunking of the inputs.
    """
    values = np.asarray(values, dtype=np.uint64)
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.uint8)
    starts = np.cumsum(lengths) - lengths
    within = np.arange(total, dtype=np.int64) - np.repeat(starts, lengths)
    shifts = (np.repeat(lengths, lengths) - 1 - within).astype(np.uint64)
    bits = ((np.repeat(values, lengths) >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits)


def unpack_fixed(data: np.ndarray, count: int, width: int) -> np.ndarray:
    """Read `count` fixed-width MSB-first fields from a byte array."""
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    bits = np.unpackbits(np.asarray(data, dtype=np.uint8))[: count * width]
    weights = (1 << np.arange(width - 1, -1, -1)).astype(np.uint32)
    return bits.reshape(count, width).astype(np.uint32) @ weights


def gamma_lengths(values: np.ndarray) -> np.ndarray:
    """Elias gamma code length for each value (values >= 1)."""
    v = np.asarray(values, dtype=np.uint64)
    return 2 * np.floor(np.log2(v.astype(np.float64))).astype(np.int64) + 1


@njit(cache=True)
def read_gamma(bits: np.ndarray, pos: int):
    z = 0
    while bits[pos] == 0:
        z += 1
        pos += 1
    pos += 1
    v = 1
    for _ in range(z):
        v = (v << 1) | bits[pos]
        pos += 1
    return v, pos


@njit(cache=True)
def read_gammas(bits: np.ndarray, pos: int, out: np.ndarray):
    for i in range(out.shape[0]):
        v, pos = read_gamma(bits, pos)
        out[i] = v
    return pos


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Assign canonical codewords for symbols 0..n-1 with the given lengths.

    Symbols are ordered by (length, symbol); codes increase within a length
    and shift left across lengths. Kraft(lengths) must be <= 1.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    order = np.lexsort((np.arange(len(lengths)), lengths))
    codes = np.zeros(len(lengths), dtype=np.uint32)
    c = 0
    prev = int(lengths[order[0]])
    for s in order:
        L = int(lengths[s])
        c <<= (L - prev)
        codes[s] = c
        c += 1
        prev = L
    return codes


def canonical_decode_tables(lengths: np.ndarray, max_len: int = 16):
    """first_code / count / base index per code length, plus symbols sorted
    by (length, symbol), for canonical sequential decoding."""
    lengths = np.asarray(lengths, dtype=np.int64)
    order = np.lexsort((np.arange(len(lengths)), lengths))
    codes = canonical_codes(lengths)
    first = np.full(max_len + 1, -1, dtype=np.int64)
    count = np.zeros(max_len + 1, dtype=np.int64)
    base = np.zeros(max_len + 1, dtype=np.int64)
    for idx, s in enumerate(order):
        L = int(lengths[s])
        if first[L] < 0:
            first[L] = int(codes[s])
            base[L] = idx
        count[L] += 1
    first[first < 0] = 0
    return first, count, base, order.astype(np.int64)


@njit(cache=True)
def decode_canonical(bits: np.ndarray, pos: int, ctx: np.ndarray,
                     first: np.ndarray, count: np.ndarray, base: np.ndarray,
                     sorted_syms: np.ndarray, out: np.ndarray):
    """Decode one canonical-coded symbol per context entry, sequentially."""
    max_len = first.shape[1] - 1
    for i in range(ctx.shape[0]):
        c = ctx[i]
        code = 0
        L = 0
        while True:
            code = (code << 1) | bits[pos]
            pos += 1
            L += 1
            if L > max_len:
                raise ValueError("corrupt stream: code longer than max length")
            if count[c, L] > 0:
                off = code - first[c, L]
                if 0 <= off < count[c, L]:
                    out[i] = sorted_syms[c, base[c, L] + off]
                    break
    return pos
