"""Static context-conditioned code table for octree sign coding.

For each 8-bit parent-context pattern, the 256 possible child octets are
ranked by corpus frequency (ties by ascending pattern value). Ranks are then
sent with a per-context canonical length-limited prefix code whose lengths
are also fitted on the corpus. The shipped default table is trained on a
documented synthetic corpus (spheres, ellipsoids, and noisy smoothed blobs at
three resolutions); regenerate with ``python -m exasurf.codetable``.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bits import canonical_codes, canonical_decode_tables

MAX_CODE_LEN = 16

# structural prior: a cube most often refines to itself, then to a uniform fill
_PRIOR_SELF = 4
_PRIOR_UNIFORM = 2


@dataclass
class CodeTable:
    rank_of: np.ndarray        # uint8 (256 ctx, 256 octet) -> rank
    lengths: np.ndarray        # uint8 (256 ctx, 256 rank) -> code length
    version_hash: bytes        # 16 bytes identifying the table

    def __post_init__(self):
        self.perm = np.empty((256, 256), dtype=np.uint8)      # rank -> octet
        rows = np.arange(256)
        for c in range(256):
            self.perm[c, self.rank_of[c]] = rows
        self.codes = np.empty((256, 256), dtype=np.uint32)
        first = np.empty((256, MAX_CODE_LEN + 1), dtype=np.int64)
        count = np.empty((256, MAX_CODE_LEN + 1), dtype=np.int64)
        base = np.empty((256, MAX_CODE_LEN + 1), dtype=np.int64)
        sorted_syms = np.empty((256, 256), dtype=np.int64)
        for c in range(256):
            self.codes[c] = canonical_codes(self.lengths[c])
            f, n, b, s = canonical_decode_tables(self.lengths[c], MAX_CODE_LEN)
            first[c], count[c], base[c], sorted_syms[c] = f, n, b, s
        self.dec_first, self.dec_count, self.dec_base, self.dec_syms = first, count, base, sorted_syms

    def encode_lengths(self, ctx: np.ndarray, octet: np.ndarray) -> np.ndarray:
        r = self.rank_of[ctx, octet].astype(np.int64)
        return self.lengths[ctx, r].astype(np.int64)

    def encode_codes(self, ctx: np.ndarray, octet: np.ndarray):
        r = self.rank_of[ctx, octet].astype(np.int64)
        return self.codes[ctx, r].astype(np.uint64), self.lengths[ctx, r].astype(np.int64)


def _table_hash(rank_of: np.ndarray, lengths: np.ndarray) -> bytes:
    h = hashlib.sha256()
    h.update(rank_of.tobytes())
    h.update(lengths.tobytes())
    return h.digest()[:16]


def _limited_huffman(freq: np.ndarray, max_len: int = MAX_CODE_LEN) -> np.ndarray:
    """Huffman lengths clamped to max_len with a Kraft repair pass."""
    f = freq.astype(np.int64) + 1
    heap = [(int(v), i) for i, v in enumerate(f)]
    heapq.heapify(heap)
    nodes = {}
    nid = len(f)
    while len(heap) > 1:
        a = heapq.heappop(heap)
        b = heapq.heappop(heap)
        nodes[nid] = (a[1], b[1])
        heapq.heappush(heap, (a[0] + b[0], nid))
        nid += 1
    L = np.zeros(len(f), dtype=np.int64)
    stack = [(heap[0][1], 0)]
    while stack:
        n, d = stack.pop()
        if n < len(f):
            L[n] = max(d, 1)
            continue
        a, b = nodes[n]
        stack.append((a, d + 1))
        stack.append((b, d + 1))
    L = np.minimum(L, max_len)
    kraft = float(np.sum(2.0 ** (-L)))
    by_freq = np.argsort(f, kind="stable")
    while kraft > 1.0 + 1e-12:
        for s in by_freq:
            if L[s] < max_len:
                kraft += 2.0 ** (-(L[s] + 1)) - 2.0 ** (-L[s])
                L[s] += 1
                break
    improved = True
    by_freq_desc = by_freq[::-1]
    while improved:
        improved = False
        for s in by_freq_desc:
            if L[s] > 1:
                nk = kraft - 2.0 ** (-L[s]) + 2.0 ** (-(L[s] - 1))
                if nk <= 1.0 + 1e-12:
                    L[s] -= 1
                    kraft = nk
                    improved = True
    return L


def table_from_counts(counts: np.ndarray) -> CodeTable:
    """Rank + per-context code lengths from (context, octet) frequencies."""
    counts = counts.astype(np.int64, copy=True)
    rows = np.arange(256, dtype=np.int64)
    for c in range(256):
        counts[c, c] += _PRIOR_SELF
        counts[c, 0] += _PRIOR_UNIFORM
        counts[c, 255] += _PRIOR_UNIFORM
    order = np.lexsort((rows[None, :].repeat(256, 0), -counts), axis=1)
    rank_of = np.empty((256, 256), dtype=np.uint8)
    for c in range(256):
        rank_of[c, order[c]] = rows
    lengths = np.empty((256, 256), dtype=np.uint8)
    for c in range(256):
        rank_counts = np.zeros(256, dtype=np.int64)
        rank_counts[rank_of[c]] = counts[c]
        lengths[c] = _limited_huffman(rank_counts)
    return CodeTable(rank_of=rank_of, lengths=lengths,
                     version_hash=_table_hash(rank_of, lengths))


def build_code_table(corpus, weights=None) -> CodeTable:
    """Train a table from an iterable of sign fields (uint8 arrays (nz,ny,nx))."""
    from .exa import collect_octree_symbols

    counts = np.zeros((256, 256), dtype=np.int64)
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus must not be empty")
    if weights is None:
        weights = [1] * len(corpus)
    for signs, w in zip(corpus, weights):
        ctx, octet = collect_octree_symbols(np.asarray(signs, dtype=np.uint8))
        np.add.at(counts, (ctx.astype(np.int64), octet.astype(np.int64)), int(w))
    return table_from_counts(counts)


def default_corpus() -> tuple[list[np.ndarray], list[int]]:
    """The documented training corpus: radial spheres (several radii, slight
    center offsets), ellipsoids, and smoothed random blobs at 3 resolutions."""
    vols, weights = [], []

    def sphere(n, frac, off=(0.0, 0.0, 0.0)):
        c = (n - 1) / 2.0
        zz = (np.arange(n, dtype=np.float32) - (c + off[2])) ** 2
        yy = (np.arange(n, dtype=np.float32) - (c + off[1])) ** 2
        xx = (np.arange(n, dtype=np.float32) - (c + off[0])) ** 2
        f = np.sqrt(zz[:, None, None] + yy[None, :, None] + xx[None, None, :])
        return (f >= frac * c).astype(np.uint8)

    def ellipsoid(n, rx, ry, rz):
        c = (n - 1) / 2.0
        ax = np.arange(n, dtype=np.float32) - c
        f = np.sqrt((ax[None, None, :] / rx) ** 2 + (ax[None, :, None] / ry) ** 2
                    + (ax[:, None, None] / rz) ** 2)
        return (f < 1.0).astype(np.uint8)

    def blob(n, seed):
        rng = np.random.default_rng(seed)
        f = rng.standard_normal((n, n, n)).astype(np.float32)
        for _ in range(2):
            for axis in range(3):
                lo = np.take(f, np.maximum(np.arange(n) - 1, 0), axis=axis)
                hi = np.take(f, np.minimum(np.arange(n) + 1, n - 1), axis=axis)
                f = (lo + 2 * f + hi) / 4.0
        return (f >= 0.0).astype(np.uint8)

    for n in (64, 128, 256):
        for frac in (0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5):
            vols.append(sphere(n, frac))
            weights.append(4)
        for frac, off in [(0.9, (0.25, 0.1, -0.3)), (0.9, (-0.37, 0.42, 0.11)),
                          (0.75, (0.5, -0.2, 0.3))]:
            vols.append(sphere(n, frac, off))
            weights.append(4)
    for n, axes in [(64, (28, 20, 14)), (128, (55, 40, 28)), (128, (60, 25, 25)),
                    (256, (115, 80, 60))]:
        vols.append(ellipsoid(n, *axes))
        weights.append(2)
    for n, seed in [(64, 1), (96, 3), (128, 5)]:
        vols.append(blob(n, seed))
        weights.append(1)
    return vols, weights


_DEFAULT_TABLE: CodeTable | None = None


def _data_path() -> Path:
    return Path(str(resources.files("exasurf") / "data" / "code_table.npz"))


def load_table(path: str | Path) -> CodeTable:
    with np.load(path) as z:
        return CodeTable(rank_of=z["rank_of"], lengths=z["lengths"],
                         version_hash=bytes(z["version_hash"].tobytes()))


def save_table(path: str | Path, table: CodeTable) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, rank_of=table.rank_of, lengths=table.lengths,
                        version_hash=np.frombuffer(table.version_hash, dtype=np.uint8))


def default_table() -> CodeTable:
    """The shipped table (generated once into package data, cached in memory)."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        path = _data_path()
        if not path.exists():
            vols, weights = default_corpus()
            table = build_code_table(vols, weights)
            save_table(path, table)
        _DEFAULT_TABLE = load_table(path)
    return _DEFAULT_TABLE


def main():
    import argparse

    ap = argparse.ArgumentParser(description="regenerate the shipped code table")
    ap.add_argument("--out", default=str(_data_path()))
    args = ap.parse_args()
    vols, weights = default_corpus()
    table = build_code_table(vols, weights)
    save_table(args.out, table)
    print(f"wrote {args.out} (hash {table.version_hash.hex()})")


if __name__ == "__main__":
    main()
