"""x-quad dual marching cubes: contour data in, 2-manifold triangle mesh out.

One dual vertex per (cell, face, arc); one x-quad per active edge, collecting
from each incident cell the dual vertex of the arc the crossing belongs to.
Where the contour crosses an ambiguous facet, the facet segment is a cut: the
x-quad that owns the cut absorbs the ridge path between the split vertices on
both sides, which keeps every mesh edge on exactly two polygons. Faces whose
cycle was cut three or more times additionally emit their arc polygon so the
ridge edges close up.

Cell faces are directed (material to the left, seen from inside the cell), so
polygon winding is consistent mesh-wide and normals point from the material
into the air. Active edges at the volume boundary have fewer than four
incident cells and yield open chains: their missing sides become boundary
edges with a single incident triangle, everything else stays 2-manifold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import ContourData, dequantize_offsets, point_lin
from .dmc_table import EDGE_AXIS, EDGE_OFFSET, FACET_AXIS, FACET_SIDE, config_table

AXIS_VEC = np.eye(3, dtype=np.int64)

# local edge id for (axis, cell-relative offset of the edge's lower corner)
_LOCAL_EDGE = np.full((3, 2, 2, 2), -1, dtype=np.int8)
for _e in range(12):
    _ox, _oy, _oz = EDGE_OFFSET[_e]
    _LOCAL_EDGE[EDGE_AXIS[_e], _oz, _oy, _ox] = _e

_MAX_POLY = 16


@dataclass
class XQuadMesh:
    vertices: np.ndarray                 # (V, 3) float32, grid coordinates
    vert_cell: np.ndarray                # (V,) int64 owning cell key
    vert_face: np.ndarray                # (V,) int8 face-within-cell index
    polys: np.ndarray                    # (P, _MAX_POLY) int64 vertex ids, -1 padded
    poly_len: np.ndarray                 # (P,) int32
    poly_edge: np.ndarray                # (P,) int64 active-edge key, -1 for arc polygons
    quad_slots: np.ndarray               # (Q, 4) int64 slot vertex per x-quad corner, -1 missing
    crossing_normals: np.ndarray = None  # (V, 3) float32 mean signed crossing directions
    triangles: np.ndarray = None         # (T, 3) int32
    tri_poly: np.ndarray = None          # (T,) int32 source polygon
    face_normals: np.ndarray = None      # (P, 3) float32
    vertex_normals: np.ndarray = None    # (V, 3) float32
    face_area: np.ndarray = None         # (P,) float32
    synthetic: np.ndarray = None         # (T,) bool, hole-fill triangles

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_xquads(self) -> int:
        return len(self.quad_slots)

    def vertex_faces(self):
        """CSR adjacency vertex -> incident polygons (offsets, face ids)."""
        flat = self.polys[self.polys >= 0]
        rows = np.repeat(np.arange(len(self.polys)), self.poly_len.astype(np.int64))
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        return np.concatenate([[0], np.cumsum(counts)]), rows[order]


def _morton(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    def spread(v):
        v = v.astype(np.uint64)
        v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
        v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
        v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
        v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
        v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
        return v
    return (spread(x) | (spread(y) << np.uint64(1)) | (spread(z) << np.uint64(2))).astype(np.int64)


def build_mesh(contour: ContourData) -> XQuadMesh:
    table = config_table()
    signs = contour.signs
    nz, ny, nx = signs.shape
    dims = contour.dims
    edge_keys = contour.edge_keys
    edge_t = dequantize_offsets(contour.edge_q, contour.precision)

    empty = XQuadMesh(vertices=np.zeros((0, 3), np.float32),
                      vert_cell=np.zeros(0, np.int64), vert_face=np.zeros(0, np.int8),
                      polys=np.zeros((0, _MAX_POLY), np.int64), poly_len=np.zeros(0, np.int32),
                      poly_edge=np.zeros(0, np.int64), quad_slots=np.zeros((0, 4), np.int64),
                      crossing_normals=np.zeros((0, 3), np.float32))
    if len(contour.cell_keys) == 0:
        return empty

    cell_key = contour.cell_keys
    cell_pat = contour.cell_patterns.astype(np.int64)
    ax = (cell_key % nx).astype(np.int64)
    ay = ((cell_key // nx) % ny).astype(np.int64)
    az = (cell_key // (nx * ny)).astype(np.int64)

    # decider bits -> case id
    bits_val = np.zeros(len(cell_key), dtype=np.int64)
    facet_list = np.full((256, 6), -1, dtype=np.int64)
    for p, fl in enumerate(table.pattern_facets):
        facet_list[p, :len(fl)] = fl
    n_ambig = np.array([len(f) for f in table.pattern_facets], dtype=np.int64)
    max_a = int(n_ambig[cell_pat].max()) if len(cell_key) else 0
    for i in range(max_a):
        f = facet_list[cell_pat, i]
        sel = np.flatnonzero(f >= 0)
        if not len(sel):
            continue
        fs = f[sel]
        axis = FACET_AXIS[fs].astype(np.int64)
        side = FACET_SIDE[fs].astype(np.int64)
        fkey = point_lin(ax[sel] + side * (axis == 0), ay[sel] + side * (axis == 1),
                         az[sel] + side * (axis == 2), dims) * 3 + axis
        idx = np.searchsorted(contour.face_keys, fkey)
        if len(contour.face_keys):
            ok = (idx < len(contour.face_keys)) & (
                contour.face_keys[np.minimum(idx, len(contour.face_keys) - 1)] == fkey)
        else:
            ok = np.zeros(len(fkey), bool)
        if not ok.all():
            raise ValueError("ambiguous facet missing a decider bit")
        bits_val[sel] |= contour.face_bits[idx].astype(np.int64) << i
    case_id = table.case_offset[cell_pat].astype(np.int64) + bits_val

    # vertex ids in (cell Morton, face, arc) order
    nverts_cell = table.n_verts[case_id].astype(np.int64)
    morder = np.argsort(_morton(ax, ay, az), kind="stable")
    vid_base = np.zeros(len(cell_key), dtype=np.int64)
    vid_base[morder] = np.cumsum(nverts_cell[morder]) - nverts_cell[morder]
    V = int(nverts_cell.sum())

    def cell_index(keys, missing_ok=False):
        idx = np.searchsorted(cell_key, keys)
        ok = (idx < len(cell_key)) & (cell_key[np.minimum(idx, len(cell_key) - 1)] == keys)
        if not missing_ok and not ok.all():
            raise ValueError("walk left the active cell set")
        return idx, ok

    # vertex positions and signed crossing directions per (cell, slot)
    pos_sum = np.zeros((V, 3), dtype=np.float64)
    nrm_sum = np.zeros((V, 3), dtype=np.float64)
    pos_cnt = np.zeros(V, dtype=np.int64)
    vert_cell = np.zeros(V, dtype=np.int64)
    vert_face = np.zeros(V, dtype=np.int8)
    for le in range(12):
        slot = table.edge_vert[case_id, le].astype(np.int64)
        sel = np.flatnonzero(slot >= 0)
        if not len(sel):
            continue
        exk = ax[sel] + EDGE_OFFSET[le, 0]
        eyk = ay[sel] + EDGE_OFFSET[le, 1]
        ezk = az[sel] + EDGE_OFFSET[le, 2]
        ekey = point_lin(exk, eyk, ezk, dims) * 3 + int(EDGE_AXIS[le])
        idx = np.searchsorted(edge_keys, ekey)
        if not np.all((idx < len(edge_keys)) & (edge_keys[np.minimum(idx, len(edge_keys) - 1)] == ekey)):
            raise ValueError("cell case references an inactive edge")
        t = edge_t[idx]
        p = np.stack([exk, eyk, ezk], axis=1).astype(np.float64)
        p[:, int(EDGE_AXIS[le])] += t
        vid = vid_base[sel] + slot[sel]
        np.add.at(pos_sum, vid, p)
        np.add.at(pos_cnt, vid, 1)
        lo_sign = signs[ezk, eyk, exk].astype(np.float64)
        np.add.at(nrm_sum, (vid, np.full(len(vid), int(EDGE_AXIS[le]))), 2.0 * lo_sign - 1.0)
    if (pos_cnt == 0).any():
        raise ValueError("dual vertex with no crossings")
    vertices = (pos_sum / pos_cnt[:, None]).astype(np.float32)
    nn = np.linalg.norm(nrm_sum, axis=1, keepdims=True)
    nn[nn < 1e-12] = 1
    crossing_normals = (nrm_sum / nn).astype(np.float32)

    slot_cycle = np.full((len(table.cases), 12), 0, dtype=np.int8)
    for cid_u in np.unique(case_id):
        case = table.cases[cid_u]
        cells = np.flatnonzero(case_id == cid_u)
        for slot in range(case.n_verts):
            cyc = 0
            for e in range(12):
                if case.edge_vert[e] == slot:
                    cyc = int(case.edge_cycle[e])
                    break
            vids = vid_base[cells] + slot
            vert_cell[vids] = cell_key[cells]
            vert_face[vids] = cyc

    # ---------------- x-quad walk around each active edge ----------------
    E = len(edge_keys)
    k = (edge_keys % 3).astype(np.int64)
    ex_pt = ((edge_keys // 3) % nx).astype(np.int64)
    ey_pt = (((edge_keys // 3) // nx) % ny).astype(np.int64)
    ez_pt = ((edge_keys // 3) // (nx * ny)).astype(np.int64)
    ta = np.where(k == 0, 1, 0)
    tb = np.where(k == 2, 1, 2)

    def cell_exists(cx, cy, cz):
        inb = (cx >= 0) & (cy >= 0) & (cz >= 0) & (cx < nx - 1) & (cy < ny - 1) & (cz < nz - 1)
        out_idx = np.zeros(len(cx), dtype=np.int64)
        ok = inb.copy()
        if inb.any():
            idx, found = cell_index(point_lin(np.clip(cx, 0, nx - 2), np.clip(cy, 0, ny - 2),
                                              np.clip(cz, 0, nz - 2), dims), missing_ok=True)
            ok &= found
            out_idx = idx
        return ok, out_idx

    # seed: the first existing cell among the four candidates
    cand = [(-1, -1), (0, -1), (0, 0), (-1, 0)]
    ccx = np.zeros(E, dtype=np.int64)
    ccy = np.zeros(E, dtype=np.int64)
    ccz = np.zeros(E, dtype=np.int64)
    have = np.zeros(E, dtype=bool)
    for du, dv in cand:
        cx = ex_pt + du * AXIS_VEC[ta, 0] + dv * AXIS_VEC[tb, 0]
        cy = ey_pt + du * AXIS_VEC[ta, 1] + dv * AXIS_VEC[tb, 1]
        cz = ez_pt + du * AXIS_VEC[ta, 2] + dv * AXIS_VEC[tb, 2]
        ok, _ = cell_exists(cx, cy, cz)
        take = ok & ~have
        ccx = np.where(take, cx, ccx)
        ccy = np.where(take, cy, ccy)
        ccz = np.where(take, cz, ccz)
        have |= ok
    if not have.all():
        raise ValueError("active edge with no incident active cell")

    def local_edge(cx, cy, cz, rows=None):
        if rows is None:
            kk, ee_z, ee_y, ee_x = k, ez_pt, ey_pt, ex_pt
        else:
            kk, ee_z, ee_y, ee_x = k[rows], ez_pt[rows], ey_pt[rows], ex_pt[rows]
        le = _LOCAL_EDGE[kk, ee_z - cz, ee_y - cy, ee_x - cx].astype(np.int64)
        if (le < 0).any():
            raise ValueError("edge/cell offset inconsistency")
        return le

    def facet_step(f):
        faxis = FACET_AXIS[f].astype(np.int64)
        fdir = 2 * FACET_SIDE[f].astype(np.int64) - 1
        return fdir * AXIS_VEC[faxis, 0], fdir * AXIS_VEC[faxis, 1], fdir * AXIS_VEC[faxis, 2]

    # walk backward along incoming facets to the chain start (open chains)
    for _ in range(3):
        ci, _ = cell_index(point_lin(ccx, ccy, ccz, dims))
        le = local_edge(ccx, ccy, ccz)
        fin = _EDGE_IN_FACET[case_id[ci], le]
        dx, dy, dz = facet_step(fin.astype(np.int64))
        px, py, pz = ccx + dx, ccy + dy, ccz + dz
        ok, _ = cell_exists(px, py, pz)
        ccx = np.where(ok, px, ccx)
        ccy = np.where(ok, py, ccy)
        ccz = np.where(ok, pz, ccz)

    startx, starty, startz = ccx.copy(), ccy.copy(), ccz.copy()
    poly = np.full((E, 6), -1, dtype=np.int64)
    quad_slots = np.full((E, 4), -1, dtype=np.int64)
    col = np.zeros(E, dtype=np.int64)
    alive = np.ones(E, dtype=bool)
    open_chain = np.zeros(E, dtype=bool)
    for step in range(4):
        rows = np.flatnonzero(alive)
        if not len(rows):
            break
        ci, _ = cell_index(point_lin(ccx[rows], ccy[rows], ccz[rows], dims))
        le = local_edge(ccx[rows], ccy[rows], ccz[rows], rows)
        cid = case_id[ci]
        slot = table.edge_vert[cid, le].astype(np.int64)
        if (slot < 0).any():
            raise ValueError("active edge missing from cell case")
        own = vid_base[ci] + slot
        poly[rows, col[rows]] = own
        quad_slots[rows, step] = own
        col[rows] += 1
        fout = table.edge_out_facet[cid, le].astype(np.int64)
        dx, dy, dz = facet_step(fout)
        nxx, nxy, nxz = ccx[rows] + dx, ccy[rows] + dy, ccz[rows] + dz
        nok, nidx = cell_exists(nxx, nxy, nxz)
        # advance or stop at the boundary
        back = (nxx == startx[rows]) & (nxy == starty[rows]) & (nxz == startz[rows])
        open_chain[rows[~nok & ~back]] = True
        stopped = back | ~nok
        go = ~stopped
        ccx[rows[go]] = nxx[go]
        ccy[rows[go]] = nxy[go]
        ccz[rows[go]] = nxz[go]
        alive[rows[stopped]] = False

    poly, poly_len = _dedup_polys(poly, col)

    polys, poly_len, poly_edge, is_patch = _close_seams(poly, poly_len, edge_keys, open_chain, V)

    # patch membranes triangulate from a Steiner centroid so their interior
    # edges can never collide with quad diagonals elsewhere
    poly_steiner = np.full(len(polys), -1, dtype=np.int64)
    pidx = np.flatnonzero(is_patch)
    if len(pidx):
        cent = np.zeros((len(pidx), 3), dtype=np.float64)
        cnrm = np.zeros((len(pidx), 3), dtype=np.float64)
        for i, r in enumerate(pidx):
            vs = polys[r, :poly_len[r]]
            cent[i] = vertices[vs].mean(axis=0)
            cnrm[i] = crossing_normals[vs].sum(axis=0)
        nn2 = np.linalg.norm(cnrm, axis=1, keepdims=True)
        nn2[nn2 < 1e-12] = 1
        poly_steiner[pidx] = V + np.arange(len(pidx))
        vertices = np.concatenate([vertices, cent.astype(np.float32)])
        crossing_normals = np.concatenate([crossing_normals, (cnrm / nn2).astype(np.float32)])
        vert_cell = np.concatenate([vert_cell, np.full(len(pidx), -1, dtype=np.int64)])
        vert_face = np.concatenate([vert_face, np.full(len(pidx), -1, dtype=np.int8)])

    mesh = XQuadMesh(vertices=vertices, vert_cell=vert_cell, vert_face=vert_face,
                     polys=polys, poly_len=poly_len.astype(np.int32),
                     poly_edge=poly_edge, quad_slots=quad_slots,
                     crossing_normals=crossing_normals)
    mesh.poly_steiner = poly_steiner
    return mesh


def _close_seams(poly: np.ndarray, poly_len: np.ndarray, edge_keys: np.ndarray,
                 open_chain: np.ndarray, n_vertices: int):
    """Close interior seams left by split faces.

    On facets whose two cut segments join different arc pairs on the two
    sides, the four x-quad sides cannot pair up; the unmatched directed sides
    form small closed loops around the split, which are patched with membrane
    polygons. Sides missing because an x-quad chain stopped at the volume
    boundary stay open.
    """
    E, W = poly.shape
    lens = poly_len.astype(np.int64)
    rows = np.repeat(np.arange(E), lens)
    flat = poly[poly >= 0]
    starts = np.cumsum(lens) - lens
    nxt_idx = np.arange(len(flat)) + 1
    last_of_row = np.cumsum(lens) - 1
    nxt_idx[last_of_row] = starts
    frm = flat
    to = flat[nxt_idx]
    # wrap sides of open chains are genuine boundary, not seams
    is_wrap = np.zeros(len(flat), dtype=bool)
    is_wrap[last_of_row] = True
    boundary_ok = is_wrap & open_chain[rows]

    key = frm * n_vertices + to
    rkey = to * n_vertices + frm
    order = np.sort(key)
    idx = np.searchsorted(order, rkey)
    has_rev = (idx < len(order)) & (order[np.minimum(idx, len(order) - 1)] == rkey)
    seam = ~has_rev & ~boundary_ok
    if not seam.any():
        return poly, poly_len, edge_keys.copy(), np.zeros(E, dtype=bool)

    sf = frm[seam]
    st = to[seam]
    # a seam component can only be patched when every vertex has equal in and
    # out degree (guaranteed on closed sign fields); unbalanced components sit
    # at open volume boundaries and stay open
    vids = np.unique(np.concatenate([sf, st]))
    vmap = {int(v): i for i, v in enumerate(vids)}
    outdeg = np.zeros(len(vids), dtype=np.int64)
    indeg = np.zeros(len(vids), dtype=np.int64)
    parent = np.arange(len(vids))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    lf = np.array([vmap[int(v)] for v in sf])
    lt = np.array([vmap[int(v)] for v in st])
    for a, b in zip(lf, lt):
        outdeg[a] += 1
        indeg[b] += 1
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    bad_comp = set()
    for i in range(len(vids)):
        if outdeg[i] != indeg[i]:
            bad_comp.add(find(i))
    patchable = np.array([find(a) not in bad_comp for a in lf])

    order2 = np.lexsort((st, sf))
    sf, st = sf[order2], st[order2]
    patchable = patchable[order2]
    used = ~patchable
    patches = []
    for i in range(len(sf)):
        if used[i]:
            continue
        loop = [int(sf[i]), int(st[i])]
        used[i] = True
        while loop[-1] != loop[0]:
            j = np.searchsorted(sf, loop[-1])
            found = -1
            while j < len(sf) and sf[j] == loop[-1]:
                if not used[j]:
                    found = j
                    break
                j += 1
            if found < 0:
                raise ValueError("seam sides do not close into loops")
            used[found] = True
            loop.append(int(st[found]))
        patches.append(loop[:-1][::-1])
    if not patches:
        return poly, poly_len, edge_keys.copy(), np.zeros(E, dtype=bool)
    n_extra = len(patches)
    width = max(W, max(len(p) for p in patches))
    polys = np.full((E + n_extra, width), -1, dtype=np.int64)
    polys[:E, :W] = poly
    out_len = np.concatenate([poly_len, np.zeros(n_extra, dtype=poly_len.dtype)])
    for i, p in enumerate(patches):
        if len(p) > width:
            raise ValueError("seam loop too long")
        polys[E + i, :len(p)] = p
        out_len[E + i] = len(p)
    poly_edge = np.concatenate([edge_keys, np.full(n_extra, -1, dtype=np.int64)])
    is_patch = np.zeros(E + n_extra, dtype=bool)
    is_patch[E:] = True
    return polys, out_len, poly_edge, is_patch


def _dedup_polys(poly: np.ndarray, lengths: np.ndarray):
    """Remove cyclically-consecutive duplicate vertex ids from each polygon."""
    E, W = poly.shape
    out = np.full_like(poly, -1)
    out_len = np.zeros(E, dtype=np.int64)
    cur = np.full(E, -2, dtype=np.int64)
    for j in range(W):
        v = poly[:, j]
        take = (j < lengths) & (v != cur)
        rows = np.flatnonzero(take)
        out[rows, out_len[rows]] = v[rows]
        cur[rows] = v[rows]
        out_len[rows] += 1
    rows = np.flatnonzero((out_len > 1) & (out[np.arange(E), np.maximum(out_len - 1, 0)] == out[:, 0]))
    out[rows, out_len[rows] - 1] = -1
    out_len[rows] -= 1
    return out, out_len


def triangulate(mesh: XQuadMesh) -> XQuadMesh:
    """Fan triangulation; quads pick the diagonal whose crease is flatter
    according to the dual vertices' crossing normals (ties go to the shorter
    diagonal); concave quads take their only valid diagonal."""
    provisional = mesh.crossing_normals
    tris = []
    tri_poly = []
    lens = mesh.poly_len.astype(np.int64)
    verts = mesh.vertices.astype(np.float64)
    steiner = getattr(mesh, "poly_steiner", None)
    if steiner is None:
        steiner = np.full(len(mesh.polys), -1, dtype=np.int64)
    plain = steiner < 0

    patches = np.flatnonzero(~plain)
    for r in patches:
        L = int(lens[r])
        s = int(steiner[r])
        p = mesh.polys[r, :L]
        for i in range(L):
            tris.append(np.array([[s, p[i], p[(i + 1) % L]]], dtype=np.int64))
            tri_poly.append(np.array([r], dtype=np.int64))

    quads = np.flatnonzero((lens == 4) & plain)
    if len(quads):
        q = mesh.polys[quads, :4]
        n = provisional
        d02 = np.einsum("ij,ij->i", n[q[:, 0]], n[q[:, 2]])
        d13 = np.einsum("ij,ij->i", n[q[:, 1]], n[q[:, 3]])
        l02 = np.linalg.norm(verts[q[:, 0]] - verts[q[:, 2]], axis=1)
        l13 = np.linalg.norm(verts[q[:, 1]] - verts[q[:, 3]], axis=1)
        use02 = (d02 > d13) | ((d02 == d13) & (l02 <= l13))
        valid02, valid13 = _diagonal_validity(verts, q)
        use02 = np.where(valid02 & ~valid13, True, np.where(valid13 & ~valid02, False, use02))
        a, b, c, d = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
        tris.append(np.where(use02[:, None], np.stack([a, b, c], 1), np.stack([a, b, d], 1)))
        tris.append(np.where(use02[:, None], np.stack([a, c, d], 1), np.stack([b, c, d], 1)))
        tri_poly.append(quads)
        tri_poly.append(quads)

    for L in range(3, mesh.polys.shape[1] + 1):
        if L == 4:
            continue
        sel = np.flatnonzero((lens == L) & plain)
        if not len(sel):
            continue
        p = mesh.polys[sel, :L]
        for i in range(1, L - 1):
            tris.append(np.stack([p[:, 0], p[:, i], p[:, i + 1]], axis=1))
            tri_poly.append(sel)

    if tris:
        T = np.concatenate(tris).astype(np.int64)
        TP = np.concatenate(tri_poly).astype(np.int64)
    else:
        T = np.zeros((0, 3), np.int64)
        TP = np.zeros(0, np.int64)
    good = (T[:, 0] != T[:, 1]) & (T[:, 1] != T[:, 2]) & (T[:, 0] != T[:, 2])
    mesh.triangles = T[good].astype(np.int32)
    mesh.tri_poly = TP[good].astype(np.int32)
    mesh.synthetic = np.zeros(len(mesh.triangles), dtype=bool)
    return mesh


def _diagonal_validity(verts, q):
    """A diagonal is valid when the quad's other two vertices lie on opposite
    sides of the plane spanned by the diagonal and the quad normal."""
    p0, p1, p2, p3 = (verts[q[:, i]] for i in range(4))
    nrm = np.cross(p2 - p0, p3 - p1)

    def side(a, b, p):
        return np.einsum("ij,ij->i", np.cross(b - a, nrm), p - a)

    s1, s3 = side(p0, p2, p1), side(p0, p2, p3)
    s0, s2 = side(p1, p3, p0), side(p1, p3, p2)
    return (s1 * s3 < 0), (s0 * s2 < 0)


def compute_normals(mesh: XQuadMesh) -> XQuadMesh:
    """Per-polygon area-weighted normals and per-vertex area-weighted means."""
    v = mesh.vertices.astype(np.float64)
    T = mesh.triangles
    P = len(mesh.polys)
    if T is None or len(T) == 0:
        mesh.face_normals = np.zeros((P, 3), np.float32)
        mesh.face_area = np.zeros(P, np.float32)
        mesh.vertex_normals = np.zeros((mesh.n_vertices, 3), np.float32)
        return mesh
    tn = np.cross(v[T[:, 1]] - v[T[:, 0]], v[T[:, 2]] - v[T[:, 0]])
    ta = 0.5 * np.linalg.norm(tn, axis=1)
    fn = np.zeros((P, 3), dtype=np.float64)
    fa = np.zeros(P, dtype=np.float64)
    np.add.at(fn, mesh.tri_poly, tn)
    np.add.at(fa, mesh.tri_poly, ta)
    norm = np.linalg.norm(fn, axis=1, keepdims=True)
    norm[norm < 1e-20] = 1
    mesh.face_normals = (fn / norm).astype(np.float32)
    mesh.face_area = fa.astype(np.float32)

    vn = np.zeros((mesh.n_vertices, 3), dtype=np.float64)
    flat = mesh.polys[mesh.polys >= 0]
    rows = np.repeat(np.arange(P), mesh.poly_len.astype(np.int64))
    np.add.at(vn, flat, mesh.face_normals[rows] * fa[rows, None])
    norm = np.linalg.norm(vn, axis=1, keepdims=True)
    isolated = norm[:, 0] < 1e-20
    norm[isolated] = 1
    mesh.vertex_normals = (vn / norm).astype(np.float32)
    mesh.vertex_normals[isolated] = 0
    return mesh


# dense helper tables built once from the config table
_EDGE_IN_FACET = np.stack([c.edge_in_facet for c in config_table().cases]).astype(np.int64)


# ---------------------------------------------------------------------------
# audits


def edge_incidence(mesh: XQuadMesh):
    """(undirected edge keys, per-edge triangle counts, winding-consistent)."""
    T = mesh.triangles.astype(np.int64)
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    und = e.min(axis=1) * mesh.n_vertices + e.max(axis=1)
    dirkey = e[:, 0] * mesh.n_vertices + e[:, 1]
    uniq, counts = np.unique(und, return_counts=True)
    _, dir_counts = np.unique(dirkey, return_counts=True)
    return uniq, counts, bool((dir_counts == 1).all())


def audit_manifold(mesh: XQuadMesh, allow_boundary: bool = False) -> dict:
    """Counts of non-2-manifold edges plus winding consistency and Euler
    characteristic. With allow_boundary, single-triangle edges are fine."""
    if mesh.triangles is None or len(mesh.triangles) == 0:
        return {"edges": 0, "bad": 0, "boundary": 0, "winding_ok": True, "euler": 0}
    uniq, counts, winding_ok = edge_incidence(mesh)
    boundary = int((counts == 1).sum())
    if allow_boundary:
        bad = int(((counts != 2) & (counts != 1)).sum())
    else:
        bad = int((counts != 2).sum())
    V = len(np.unique(mesh.triangles))
    return {"edges": len(uniq), "bad": bad, "boundary": boundary,
            "winding_ok": winding_ok, "euler": V - len(uniq) + len(mesh.triangles)}


def signed_volume(mesh: XQuadMesh) -> float:
    v = mesh.vertices.astype(np.float64)
    T = mesh.triangles
    return float(np.einsum("ij,ij->i", v[T[:, 0]], np.cross(v[T[:, 1]], v[T[:, 2]])).sum() / 6.0)
