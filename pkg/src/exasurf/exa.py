"""EXA container: octree-compressed isosurface with per-vertex data sections.

Sign-field coding walks an octree over the (virtually padded) grid. At each
level, a cube is refined when its corner pattern is mixed or when it appears
in the per-level exception list (real content hidden behind uniform corners).
Each refined cube codes one octet: the 8 child-level signs of its lower child
cube, entropy-coded against the cube's own 8-corner context pattern. All
other child-level points are reconstructed from neighbor octets or inherited
by lower-corner fill, so decode is exact. Cubes are visited in Morton order;
code positions follow from prefix sums over code lengths, so the stream does
not depend on any processing partition.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .bits import pack_varbits, unpack_fixed, gamma_lengths, read_gamma, read_gammas, decode_canonical
from .codetable import CodeTable, default_table
from .contour import ContourData, extract_contour
from .volume import Volume3D

MAGIC = b"EXA4"
VERSION = 1

SECTION_TAGS = ("TOPO", "AMBG", "PREC", "DPOS", "DNRM", "FEAT", "AOCC")


class ExaError(ValueError):
    pass


@dataclass
class ExaContainer:
    dims: tuple[int, int, int]
    tau: float
    precision: int
    table_hash: bytes
    sections: dict = field(default_factory=dict)   # tag -> bytes

    def section_bits(self, tag: str) -> int:
        return len(self.sections.get(tag, b"")) * 8


# ---------------------------------------------------------------------------
# octree geometry


def octree_depth(dims) -> int:
    """Levels such that the (virtually padded) root spans 2^depth cells per
    axis with 2^depth >= point count: every real point then lies strictly
    inside the root's half-open owned region."""
    n = max(dims)
    if n < 2:
        raise ExaError(f"dims {dims} have no cells")
    return max(1, int(np.ceil(np.log2(n))))


def _cube_extent(n_points: int, level: int, depth: int) -> int:
    """Number of cube indices kept per axis at this level (capped virtual grid)."""
    s = 1 << (depth - level)
    return min(1 << level, -((1 - n_points) // s) + 1)   # ceil((n-1)/s) + 1


def _level_grid_dims(dims, level: int, depth: int):
    nx, ny, nz = dims
    return tuple(_cube_extent(n, level, depth) + 1 for n in (nz, ny, nx))


def _subsample(signs: np.ndarray, level: int, depth: int) -> np.ndarray:
    """Canonical level grid: stride-subsampled signs, zero beyond the data."""
    s = 1 << (depth - level)
    gz, gy, gx = _level_grid_dims((signs.shape[2], signs.shape[1], signs.shape[0]), level, depth)
    out = np.zeros((gz, gy, gx), dtype=np.uint8)
    sub = signs[::s, ::s, ::s]
    rz, ry, rx = min(gz, sub.shape[0]), min(gy, sub.shape[1]), min(gx, sub.shape[2])
    out[:rz, :ry, :rx] = sub[:rz, :ry, :rx]
    return out


def _gather(grid: np.ndarray, Z, Y, X) -> np.ndarray:
    """Bounds-checked point read; outside the capped grid is virtual negative."""
    inb = (Z >= 0) & (Z < grid.shape[0]) & (Y >= 0) & (Y < grid.shape[1]) & (X >= 0) & (X < grid.shape[2])
    zz = np.clip(Z, 0, grid.shape[0] - 1)
    yy = np.clip(Y, 0, grid.shape[1] - 1)
    xx = np.clip(X, 0, grid.shape[2] - 1)
    return np.where(inb, grid[zz, yy, xx], 0).astype(np.uint8)


def _corner_patterns(grid: np.ndarray, Z, Y, X) -> np.ndarray:
    pat = np.zeros(len(Z), dtype=np.uint8)
    for c in range(8):
        pat |= _gather(grid, Z + ((c >> 2) & 1), Y + ((c >> 1) & 1), X + (c & 1)) << c
    return pat


def _halfopen_minmax_pyramid(signs: np.ndarray, depth: int):
    """mixed[l][cube] = signs (with virtual zero padding) are not constant on
    the half-open point region the cube owns; levels 0..depth-1."""
    def pad_even(a, value=0):
        pz = (-a.shape[0]) % 2
        py = (-a.shape[1]) % 2
        px = (-a.shape[2]) % 2
        if pz or py or px:
            a = np.pad(a, ((0, pz), (0, py), (0, px)), constant_values=value)
        return a

    base = pad_even(signs)
    mn = base.reshape(base.shape[0] // 2, 2, base.shape[1] // 2, 2, base.shape[2] // 2, 2)
    mx = mn.max(axis=(1, 3, 5))
    mn = mn.min(axis=(1, 3, 5))
    pyramid = {depth - 1: (mn, mx)}
    for level in range(depth - 2, -1, -1):
        mn = pad_even(mn)
        mx = pad_even(mx)
        mn = mn.reshape(mn.shape[0] // 2, 2, mn.shape[1] // 2, 2, mn.shape[2] // 2, 2).min(axis=(1, 3, 5))
        mx = mx.reshape(mx.shape[0] // 2, 2, mx.shape[1] // 2, 2, mx.shape[2] // 2, 2).max(axis=(1, 3, 5))
        pyramid[level] = (mn, mx)
    return pyramid


def _children_morton(Z, Y, X):
    """Child cube coords of Morton-ordered parents, in global Morton order."""
    n = len(Z)
    cz = np.repeat(Z, 8) * 2
    cy = np.repeat(Y, 8) * 2
    cx = np.repeat(X, 8) * 2
    off = np.tile(np.arange(8, dtype=np.int64), n)
    return cz + ((off >> 2) & 1), cy + ((off >> 1) & 1), cx + (off & 1)


def _octree_walk(signs: np.ndarray, depth: int):
    """Yield (context, octet, exception positions, n_candidates) per level,
    root octet first as level -1 with a single ctx-0 symbol."""
    dims = (signs.shape[2], signs.shape[1], signs.shape[0])
    grids = [_subsample(signs, l, depth) for l in range(depth + 1)]
    pyramid = _halfopen_minmax_pyramid(signs, depth)
    root = np.zeros(1, dtype=np.int64)
    yield (-1, np.zeros(1, dtype=np.uint8),
           _corner_patterns(grids[0], root, root, root), np.zeros(0, np.int64), 1)
    Z = Y = X = root
    for level in range(depth):
        if len(Z) == 0:
            return
        ctx = _corner_patterns(grids[level], Z, Y, X)
        corner_mixed = (ctx != 0) & (ctx != 255)
        mn, mx = pyramid[level]
        inb = (Z < mn.shape[0]) & (Y < mn.shape[1]) & (X < mn.shape[2])
        zz = np.clip(Z, 0, mn.shape[0] - 1)
        yy = np.clip(Y, 0, mn.shape[1] - 1)
        xx = np.clip(X, 0, mn.shape[2] - 1)
        region_mixed = inb & (mn[zz, yy, xx] < mx[zz, yy, xx])
        exceptions = np.flatnonzero(region_mixed & ~corner_mixed)
        refined = corner_mixed | region_mixed
        Zr, Yr, Xr = Z[refined], Y[refined], X[refined]
        g1 = grids[level + 1]
        octets = _corner_patterns(g1, 2 * Zr, 2 * Yr, 2 * Xr)
        yield (level, octets, ctx[refined], exceptions, len(Z))
        Z, Y, X = _children_morton(Zr, Yr, Xr)


def collect_octree_symbols(signs: np.ndarray):
    """(context, octet) symbol pairs over the whole octree, for table training."""
    depth = octree_depth((signs.shape[2], signs.shape[1], signs.shape[0]))
    ctx_parts, oct_parts = [], []
    for level, octets, ctx, _exc, _nc in _octree_walk(signs, depth):
        if level == -1:
            ctx_parts.append(np.zeros(1, dtype=np.uint8))
            oct_parts.append(ctx)       # the root pattern itself
        else:
            ctx_parts.append(ctx)
            oct_parts.append(octets)
    return np.concatenate(ctx_parts), np.concatenate(oct_parts)


# ---------------------------------------------------------------------------
# TOPO encode/decode


def encode_topo(signs: np.ndarray, table: CodeTable) -> bytes:
    depth = octree_depth((signs.shape[2], signs.shape[1], signs.shape[0]))
    values = []
    lengths = []

    def emit_gamma(v: int):
        values.append(np.array([v], dtype=np.uint64))
        lengths.append(gamma_lengths(np.array([v], dtype=np.uint64)))

    def emit_symbols(ctx, octets):
        codes, lens = table.encode_codes(ctx.astype(np.int64), octets.astype(np.int64))
        values.append(codes)
        lengths.append(lens)

    for level, octets, ctx, exceptions, _nc in _octree_walk(signs, depth):
        if level == -1:
            emit_symbols(np.zeros(1, dtype=np.uint8), ctx)   # root pattern, ctx 0
            continue
        emit_gamma(len(exceptions) + 1)
        if len(exceptions):
            deltas = np.diff(exceptions, prepend=-1).astype(np.uint64)
            values.append(deltas)
            lengths.append(gamma_lengths(deltas))
        emit_symbols(ctx, octets)
    payload = pack_varbits(np.concatenate(values), np.concatenate(lengths))
    return struct.pack("<B3x", depth) + payload.tobytes()


def decode_topo(data: bytes, dims, table: CodeTable) -> np.ndarray:
    depth = struct.unpack_from("<B", data, 0)[0]
    if depth != octree_depth(dims):
        raise ExaError(f"depth {depth} does not match dims {dims}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=4))
    pos = 0
    # root octet
    out = np.empty(1, dtype=np.int64)
    pos = decode_canonical(bits, pos, np.zeros(1, dtype=np.int64),
                           table.dec_first, table.dec_count, table.dec_base,
                           table.dec_syms, out)
    root_pat = int(table.perm[0, out[0]])
    grids = [np.zeros(_level_grid_dims(dims, l, depth), dtype=np.uint8) for l in range(depth + 1)]
    g0 = grids[0]
    for c in range(8):
        z, y, x = (c >> 2) & 1, (c >> 1) & 1, c & 1
        if z < g0.shape[0] and y < g0.shape[1] and x < g0.shape[2]:
            g0[z, y, x] = (root_pat >> c) & 1
    Z = Y = X = np.zeros(1, dtype=np.int64)
    for level in range(depth):
        g_cur, g_next = grids[level], grids[level + 1]
        # inherited fill: every child-level point starts from its owner's lower corner
        up = np.repeat(np.repeat(np.repeat(g_cur, 2, 0), 2, 1), 2, 2)
        g_next[:, :, :] = up[: g_next.shape[0], : g_next.shape[1], : g_next.shape[2]]
        if len(Z) == 0:
            continue
        n_exc, pos = read_gamma(bits, pos)
        n_exc -= 1
        exc = np.zeros(n_exc, dtype=np.int64)
        if n_exc:
            pos = read_gammas(bits, pos, exc)
            exc = np.cumsum(exc) - 1
        ctx = _corner_patterns(g_cur, Z, Y, X)
        refined = (ctx != 0) & (ctx != 255)
        if n_exc:
            refined[exc] = True
        Zr, Yr, Xr = Z[refined], Y[refined], X[refined]
        if len(Zr):
            ranks = np.empty(len(Zr), dtype=np.int64)
            pos = decode_canonical(bits, pos, ctx[refined].astype(np.int64),
                                   table.dec_first, table.dec_count, table.dec_base,
                                   table.dec_syms, ranks)
            octets = table.perm[ctx[refined].astype(np.int64), ranks]
            for c in range(8):
                zz = 2 * Zr + ((c >> 2) & 1)
                yy = 2 * Yr + ((c >> 1) & 1)
                xx = 2 * Xr + (c & 1)
                inb = (zz < g_next.shape[0]) & (yy < g_next.shape[1]) & (xx < g_next.shape[2])
                g_next[zz[inb], yy[inb], xx[inb]] = (octets[inb] >> c) & 1
        Z, Y, X = _children_morton(Zr, Yr, Xr)
    nx, ny, nz = dims
    return np.ascontiguousarray(grids[depth][:nz, :ny, :nx])


# ---------------------------------------------------------------------------
# container assembly


def exa_encode(vol: Volume3D, tau: float, precision: int = 8,
               table: CodeTable | None = None, workers: int | None = None) -> ExaContainer:
    """Encode the tau-isosurface of a volume. `workers` only tunes parallelism
    and never changes the produced bytes."""
    if not (1 <= precision <= 16):
        raise ExaError(f"precision must be in [1, 16], got {precision}")
    table = table or default_table()
    contour = extract_contour(vol, tau, precision)
    return encode_contour(contour, table)


def encode_contour(contour: ContourData, table: CodeTable | None = None) -> ExaContainer:
    table = table or default_table()
    topo = encode_topo(contour.signs, table)
    ambg = pack_varbits(contour.face_bits.astype(np.uint64),
                        np.ones(len(contour.face_bits), dtype=np.int64)).tobytes()
    prec = pack_varbits(contour.edge_q.astype(np.uint64),
                        np.full(len(contour.edge_q), contour.precision, dtype=np.int64)).tobytes()
    return ExaContainer(dims=contour.dims, tau=contour.tau, precision=contour.precision,
                        table_hash=table.version_hash,
                        sections={"TOPO": topo, "AMBG": ambg, "PREC": prec})


def exa_decode(container: ExaContainer, table: CodeTable | None = None) -> ContourData:
    table = table or default_table()
    if container.table_hash != table.version_hash:
        raise ExaError("code-table version mismatch between container and decoder")
    for tag in ("TOPO", "AMBG", "PREC"):
        if tag not in container.sections:
            raise ExaError(f"missing section {tag}")
    signs = decode_topo(container.sections["TOPO"], container.dims, table)
    contour = extract_contour(signs, container.tau, container.precision)
    n_edges = contour.n_active_edges
    q = unpack_fixed(np.frombuffer(container.sections["PREC"], dtype=np.uint8),
                     n_edges, container.precision)
    expected = (n_edges * container.precision + 7) // 8
    if len(container.sections["PREC"]) != expected:
        raise ExaError(f"PREC holds {len(container.sections['PREC'])} bytes, expected {expected}")
    contour.edge_q = q.astype(np.uint16)
    n_faces = len(contour.face_keys)
    expected = (n_faces + 7) // 8
    if len(container.sections["AMBG"]) != expected:
        raise ExaError(f"AMBG holds {len(container.sections['AMBG'])} bytes, expected {expected}")
    bits = unpack_fixed(np.frombuffer(container.sections["AMBG"], dtype=np.uint8), n_faces, 1)
    contour.face_bits = bits.astype(np.uint8)
    return contour


# ---------------------------------------------------------------------------
# file io


def exa_write(path, container: ExaContainer) -> None:
    nx, ny, nz = container.dims
    tags = [t for t in SECTION_TAGS if t in container.sections]
    tags += [t for t in container.sections if t not in SECTION_TAGS]
    header = struct.pack("<4sI3IfB3x16sI", MAGIC, VERSION, nx, ny, nz,
                         np.float32(container.tau), container.precision,
                         container.table_hash, len(tags))
    offset = len(header) + 20 * len(tags)
    entries = b""
    for t in tags:
        data = container.sections[t]
        entries += struct.pack("<4sQQ", t.encode(), offset, len(data))
        offset += len(data)
    with open(path, "wb") as f:
        f.write(header)
        f.write(entries)
        for t in tags:
            f.write(container.sections[t])


def exa_read(path) -> ExaContainer:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ExaError(f"bad magic {blob[:4]!r}")
    magic, version, nx, ny, nz, tau, precision, table_hash, n_sections = \
        struct.unpack_from("<4sI3IfB3x16sI", blob, 0)
    if version != VERSION:
        raise ExaError(f"unsupported version {version}")
    pos = struct.calcsize("<4sI3IfB3x16sI")
    sections = {}
    for _ in range(n_sections):
        tag, offset, length = struct.unpack_from("<4sQQ", blob, pos)
        pos += 20
        if offset + length > len(blob):
            raise ExaError("section table points past end of file")
        sections[tag.decode()] = blob[offset:offset + length]
    return ExaContainer(dims=(nx, ny, nz), tau=tau, precision=precision,
                        table_hash=table_hash, sections=sections)
