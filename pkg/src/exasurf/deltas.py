"""Delta compression of smoothed vertex positions and normals.

Quantized, zig-zagged deltas are packed Simple8b-style: each word carries a
selector choosing one code width, then as many equal-width values as fit.
Positions use 64-bit words (4-bit selector, 60 payload bits); normals use
128-bit words (8-bit selector, 120 payload bits). Word streams are
self-delimiting; the total value count lives in the section header.
"""

from __future__ import annotations

import struct

import numpy as np
from numba import njit

from .mesh import XQuadMesh

Q_POS_DEFAULT = 2.0 ** -7
Q_NRM_DEFAULT = 2.0 ** -9

POS_WIDTHS = np.array([0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20, 30, 60], dtype=np.int64)
POS_PAYLOAD = 60
NRM_WIDTHS = np.arange(41, dtype=np.int64)          # 0..40 bits
NRM_PAYLOAD = 120


def _counts(widths, payload):
    c = np.empty(len(widths), dtype=np.int64)
    for i, w in enumerate(widths):
        c[i] = payload if w == 0 else payload // w
    return c


POS_COUNTS = _counts(POS_WIDTHS, POS_PAYLOAD)
NRM_COUNTS = _counts(NRM_WIDTHS, NRM_PAYLOAD)


@njit(cache=True)
def _pack_words(values, widths, counts, payload, out_lo, out_hi, two_lanes):
    """Greedy packing; returns the number of words written."""
    n = len(values)
    i = 0
    w_at = 0
    while i < n:
        sel = -1
        take = 0
        for s in range(len(widths)):
            width = widths[s]
            cnt = counts[s]
            m = cnt if cnt < n - i else n - i
            if m <= 0:
                continue
            ok = True
            if width == 0:
                for j in range(m):
                    if values[i + j] != 0:
                        ok = False
                        break
            elif width >= 64:
                ok = True
            else:
                lim = np.uint64(1) << np.uint64(width)
                for j in range(m):
                    if values[i + j] >= lim:
                        ok = False
                        break
            if ok:
                sel = s
                take = m
                break
        if sel < 0:
            return -1
        width = widths[sel]
        lo = np.uint64(0)
        hi = np.uint64(0)
        if width > 0:
            for j in range(take):
                bit = j * width
                v = values[i + j]
                if bit < 64:
                    lo |= v << np.uint64(bit)
                    if bit + width > 64 and two_lanes:
                        hi |= v >> np.uint64(64 - bit)
                else:
                    hi |= v << np.uint64(bit - 64)
        if two_lanes:
            hi |= np.uint64(sel) << np.uint64(120 - 64)
        else:
            lo |= np.uint64(sel) << np.uint64(60)
        out_lo[w_at] = lo
        if two_lanes:
            out_hi[w_at] = hi
        w_at += 1
        i += take
    return w_at


@njit(cache=True)
def _unpack_words(words_lo, words_hi, widths, counts, payload, two_lanes, total, out):
    at = 0
    for wi in range(len(words_lo)):
        lo = words_lo[wi]
        hi = words_hi[wi] if two_lanes else np.uint64(0)
        if two_lanes:
            sel = int(hi >> np.uint64(120 - 64))
        else:
            sel = int(lo >> np.uint64(60))
        if sel >= len(widths):
            return -1
        width = widths[sel]
        cnt = counts[sel]
        for j in range(cnt):
            if at >= total:
                return at
            if width == 0:
                out[at] = 0
            else:
                bit = j * width
                if bit + width <= 64:
                    v = (lo >> np.uint64(bit)) & ((np.uint64(1) << np.uint64(width)) - np.uint64(1)) if width < 64 else lo
                elif bit >= 64:
                    v = (hi >> np.uint64(bit - 64)) & ((np.uint64(1) << np.uint64(width)) - np.uint64(1))
                else:
                    low_part = lo >> np.uint64(bit)
                    v = (low_part | (hi << np.uint64(64 - bit))) & ((np.uint64(1) << np.uint64(width)) - np.uint64(1))
                out[at] = v
            at += 1
    return at


def _zigzag(k: np.ndarray) -> np.ndarray:
    k = k.astype(np.int64)
    return ((k << 1) ^ (k >> 63)).astype(np.uint64)


def _unzigzag(u: np.ndarray) -> np.ndarray:
    u = u.astype(np.uint64)
    return ((u >> np.uint64(1)).astype(np.int64)) ^ -(u & np.uint64(1)).astype(np.int64)


def pack_stream(values: np.ndarray, kind: str) -> bytes:
    """Pack unsigned values into the 64-bit (positions) or 128-bit (normals)
    word stream with a count header."""
    values = np.ascontiguousarray(values, dtype=np.uint64)
    two = kind == "nrm"
    widths = NRM_WIDTHS if two else POS_WIDTHS
    counts = NRM_COUNTS if two else POS_COUNTS
    payload = NRM_PAYLOAD if two else POS_PAYLOAD
    max_words = len(values) + 1
    lo = np.zeros(max_words, dtype=np.uint64)
    hi = np.zeros(max_words, dtype=np.uint64)
    nw = _pack_words(values, widths, counts, payload, lo, hi, two)
    if nw < 0:
        raise ValueError("value exceeds the widest code")
    header = struct.pack("<Q", len(values))
    if two:
        inter = np.empty(2 * nw, dtype=np.uint64)
        inter[0::2] = lo[:nw]
        inter[1::2] = hi[:nw]
        return header + inter.astype("<u8").tobytes()
    return header + lo[:nw].astype("<u8").tobytes()


def unpack_stream(data: bytes, kind: str) -> np.ndarray:
    two = kind == "nrm"
    widths = NRM_WIDTHS if two else POS_WIDTHS
    counts = NRM_COUNTS if two else POS_COUNTS
    payload = NRM_PAYLOAD if two else POS_PAYLOAD
    total = struct.unpack_from("<Q", data, 0)[0]
    words = np.frombuffer(data, dtype="<u8", offset=8).astype(np.uint64)
    if two:
        if len(words) % 2:
            raise ValueError("truncated 128-bit word stream")
        lo = np.ascontiguousarray(words[0::2])
        hi = np.ascontiguousarray(words[1::2])
    else:
        lo = words
        hi = np.zeros(1, dtype=np.uint64)
    out = np.zeros(total, dtype=np.uint64)
    got = _unpack_words(lo, hi, widths, counts, payload, two, total, out)
    if got != total:
        raise ValueError(f"stream decoded {got} of {total} values (bad selector or truncation)")
    return out


def encode_vertex_deltas(initial: XQuadMesh, final: XQuadMesh,
                         q_pos: float = Q_POS_DEFAULT, q_nrm: float = Q_NRM_DEFAULT):
    """(DPOS, DNRM) sections carrying final-minus-initial deltas."""
    if initial.n_vertices != final.n_vertices:
        raise ValueError("vertex count mismatch")
    if q_pos <= 0 or q_nrm <= 0:
        raise ValueError("quantization steps must be > 0")
    dpos = (final.vertices.astype(np.float64) - initial.vertices.astype(np.float64))
    kpos = np.rint(dpos / q_pos).astype(np.int64).ravel()
    dnrm = (final.vertex_normals.astype(np.float64)
            - initial.vertex_normals.astype(np.float64))
    knrm = np.rint(dnrm / q_nrm).astype(np.int64).ravel()
    head_p = struct.pack("<d", q_pos)
    head_n = struct.pack("<d", q_nrm)
    return (head_p + pack_stream(_zigzag(kpos), "pos"),
            head_n + pack_stream(_zigzag(knrm), "nrm"))


def decode_vertex_deltas(initial: XQuadMesh, dpos: bytes, dnrm: bytes):
    """Positions and renormalized normals reconstructed on the quantization grid."""
    q_pos = struct.unpack_from("<d", dpos, 0)[0]
    q_nrm = struct.unpack_from("<d", dnrm, 0)[0]
    kpos = _unzigzag(unpack_stream(dpos[8:], "pos"))
    knrm = _unzigzag(unpack_stream(dnrm[8:], "nrm"))
    V = initial.n_vertices
    if len(kpos) != 3 * V or len(knrm) != 3 * V:
        raise ValueError("delta count does not match the mesh")
    pos = initial.vertices.astype(np.float64) + kpos.reshape(V, 3) * q_pos
    nrm = initial.vertex_normals.astype(np.float64) + knrm.reshape(V, 3) * q_nrm
    ln = np.linalg.norm(nrm, axis=1, keepdims=True)
    ln[ln < 1e-12] = 1
    return pos.astype(np.float32), (nrm / ln).astype(np.float32)


def bits_per_vertex(section: bytes, n_vertices: int) -> float:
    return 8.0 * len(section) / max(n_vertices, 1)
