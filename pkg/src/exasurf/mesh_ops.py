"""Optional mesh reduction and repair: adaptive vertex clustering and
minimum-area hole filling. Both preserve 2-manifoldness: clustering validates
every candidate merge against the local edge structure and skips offenders,
hole filling only adds closed fans over existing boundary loops.
"""

from __future__ import annotations

import numpy as np

from .mesh import XQuadMesh, compute_normals


def _triangle_normals(verts, tris):
    n = np.cross(verts[tris[:, 1]] - verts[tris[:, 0]], verts[tris[:, 2]] - verts[tris[:, 0]])
    ln = np.linalg.norm(n, axis=1, keepdims=True)
    ln[ln < 1e-20] = 1
    return n / ln


def cluster_vertices(mesh: XQuadMesh, angle_tol: float, pos_tol: float,
                     levels: int = 4) -> XQuadMesh:
    """Merge dual vertices inside coarser octree cells when their normals
    agree within angle_tol (degrees) and all merged originals stay within
    pos_tol of the least-squares plane. Merges that would break the local
    2-manifold structure are skipped. Triangle count never increases.
    """
    if angle_tol <= 0 or pos_tol <= 0:
        raise ValueError("tolerances must be > 0")
    if mesh.triangles is None or len(mesh.triangles) == 0:
        return mesh
    cos_tol = np.cos(np.radians(angle_tol))

    verts = mesh.vertices.astype(np.float64).copy()
    tris = mesh.triangles.astype(np.int64).copy()
    if mesh.vertex_normals is None:
        compute_normals(mesh)
    normals = mesh.vertex_normals.astype(np.float64).copy()
    V = len(verts)
    rep = np.arange(V, dtype=np.int64)
    weight = np.ones(V)
    radius = np.zeros(V)          # max distance of any merged original to the rep
    alive = np.zeros(V, dtype=bool)
    alive[np.unique(tris)] = True

    def find(i):
        while rep[i] != i:
            rep[i] = rep[rep[i]]
            i = rep[i]
        return i

    # incidence map, kept current as triangles merge
    incident = [[] for _ in range(V)]
    for t, (a, b, c) in enumerate(tris):
        incident[a].append(t)
        incident[b].append(t)
        incident[c].append(t)
    tri_alive = np.ones(len(tris), dtype=bool)

    def mapped(t):
        return find(tris[t, 0]), find(tris[t, 1]), find(tris[t, 2])

    def local_valid(members, new_tris_set):
        """Edge counts within the affected region must stay <= 2 and keep
        opposite windings."""
        edge_count = {}
        for tri in new_tris_set:
            a, b, c = tri
            for u, v in ((a, b), (b, c), (c, a)):
                if (v, u) in edge_count:
                    edge_count[(v, u)] += 1
                    if edge_count[(v, u)] > 2:
                        return False
                elif (u, v) in edge_count:
                    return False          # same direction twice: winding break
                else:
                    edge_count[(u, v)] = 1
        # triangles outside the region that touch members contribute too
        return True

    for level in range(1, levels + 1):
        size = float(2 ** level)
        live = np.flatnonzero(alive & (rep == np.arange(V)))
        if len(live) < 2:
            break
        keys = np.floor(verts[live] / size).astype(np.int64)
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        keys = keys[order]
        live = live[order]
        group_starts = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
        bounds = np.concatenate([[0], group_starts, [len(live)]])
        for gi in range(len(bounds) - 1):
            members = live[bounds[gi]:bounds[gi + 1]]
            if len(members) < 2:
                continue
            n = normals[members]
            gram = n @ n.T
            if gram.min() <= cos_tol:
                continue
            # least-squares plane through member positions
            p = verts[members]
            w = weight[members]
            ctr = (p * w[:, None]).sum(0) / w.sum()
            q = p - ctr
            cov = (q * w[:, None]).T @ q
            evals, evecs = np.linalg.eigh(cov)
            plane_n = evecs[:, 0]
            dist = np.abs(q @ plane_n) + radius[members]
            if dist.max() >= pos_tol:
                continue
            # tentative merge: all members collapse onto the first
            target = members[0]
            affected = sorted({t for m in members for t in incident[m] if tri_alive[t]})
            old = [mapped(t) for t in affected]
            repr_map = {m: target for m in members}
            new = []
            for a, b, c in old:
                a2 = repr_map.get(a, a)
                b2 = repr_map.get(b, b)
                c2 = repr_map.get(c, c)
                if a2 != b2 and b2 != c2 and a2 != c2:
                    new.append((a2, b2, c2))
            if len({tuple(sorted(t)) for t in new}) != len(new):
                continue
            # neighborhood triangles that touch the region but are unaffected
            ring = sorted({v for t in old for v in t if v not in repr_map})
            ring_tris = {t for v in ring for t in incident[v] if tri_alive[t]} - set(affected)
            context = [mapped(t) for t in ring_tris]
            if not local_valid(members, new + context):
                continue
            # commit
            new_pos = (p * w[:, None]).sum(0) / w.sum()
            new_rad = float((np.linalg.norm(p - new_pos, axis=1) + radius[members]).max())
            for m in members[1:]:
                rep[m] = target
                alive[m] = False
            verts[target] = new_pos
            weight[target] = w.sum()
            radius[target] = new_rad
            normals[target] = n.mean(0) / max(np.linalg.norm(n.mean(0)), 1e-12)
            tri_set = set()
            for t in affected:
                a, b, c = mapped(t)
                if a == b or b == c or a == c:
                    tri_alive[t] = False
                else:
                    tris[t] = (a, b, c)
                    tri_set.add(t)
            merged_inc = sorted({t for m in members for t in incident[m] if tri_alive[t]})
            incident[target] = merged_inc

    final = np.array([find(i) for i in range(V)], dtype=np.int64)
    keep_tris = tris[tri_alive]
    keep_tris = final[keep_tris]
    used = np.unique(keep_tris)
    remap = np.full(V, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    out = XQuadMesh(
        vertices=verts[used].astype(np.float32),
        vert_cell=mesh.vert_cell[np.minimum(used, len(mesh.vert_cell) - 1)],
        vert_face=mesh.vert_face[np.minimum(used, len(mesh.vert_face) - 1)],
        polys=np.zeros((0, 4), np.int64), poly_len=np.zeros(0, np.int32),
        poly_edge=np.zeros(0, np.int64), quad_slots=np.zeros((0, 4), np.int64),
        crossing_normals=mesh.crossing_normals[used] if mesh.crossing_normals is not None else None)
    out.triangles = remap[keep_tris].astype(np.int32)
    out.tri_poly = np.zeros(len(out.triangles), dtype=np.int32)
    out.synthetic = np.zeros(len(out.triangles), dtype=bool)
    # polygons degenerate to the triangles themselves after clustering
    out.polys = np.concatenate([out.triangles.astype(np.int64),
                                np.full((len(out.triangles), 1), -1, np.int64)], axis=1)
    out.poly_len = np.full(len(out.triangles), 3, dtype=np.int32)
    out.poly_edge = np.full(len(out.triangles), -1, dtype=np.int64)
    out.tri_poly = np.arange(len(out.triangles), dtype=np.int32)
    compute_normals(out)
    return out


def boundary_loops(mesh: XQuadMesh):
    """Directed boundary sides (single-triangle edges) chained into loops."""
    T = mesh.triangles.astype(np.int64)
    V = mesh.n_vertices
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    und = e.min(1) * V + e.max(1)
    uniq, counts = np.unique(und, return_counts=True)
    single = set(uniq[counts == 1].tolist())
    bsides = [tuple(s) for s in e if s.min() * V + s.max() in single]
    nxt = {}
    for a, b in bsides:
        nxt.setdefault(b, []).append(a)   # hole winds opposite the triangle side
    loops = []
    used = set()
    for a, b in sorted(bsides):
        if (a, b) in used:
            continue
        loop = [b, a]
        used.add((a, b))
        while loop[-1] != loop[0]:
            outs = nxt.get(loop[-1], [])
            hop = None
            for cand in sorted(outs):
                if (cand, loop[-1]) not in used:
                    hop = cand
                    break
            if hop is None:
                loops.append((loop, False))
                break
            used.add((hop, loop[-1]))
            loop.append(hop)
        else:
            loops.append((loop[:-1], True))
    return loops


def _min_area_triangulation(verts, loop):
    """Dynamic program minimizing total triangle area over the loop."""
    n = len(loop)
    p = verts[loop]

    def area(i, j, k):
        return 0.5 * np.linalg.norm(np.cross(p[j] - p[i], p[k] - p[i]))

    cost = np.full((n, n), np.inf)
    split = np.zeros((n, n), dtype=np.int64)
    for i in range(n - 1):
        cost[i, i + 1] = 0.0
    for span in range(2, n):
        for i in range(n - span):
            j = i + span
            for k in range(i + 1, j):
                c = cost[i, k] + cost[k, j] + area(i, k, j)
                if c < cost[i, j]:
                    cost[i, j] = c
                    split[i, j] = k
    tris = []

    def emit(i, j):
        if j - i < 2:
            return
        k = split[i, j]
        tris.append((loop[i], loop[k], loop[j]))
        emit(i, k)
        emit(k, j)

    emit(0, n - 1)
    return tris, float(cost[0, n - 1])


def fill_holes(mesh: XQuadMesh, max_loop_len: int = 64):
    """Triangulate boundary loops up to max_loop_len by minimum-area fans.

    Added triangles are flagged synthetic. Non-simple loops are reported and
    skipped. Returns (mesh, report) with loop statistics.
    """
    report = {"filled": 0, "skipped_long": 0, "skipped_nonsimple": 0, "added_area": 0.0}
    if mesh.triangles is None or len(mesh.triangles) == 0:
        return mesh, report
    loops = boundary_loops(mesh)
    added = []
    for loop, closed in loops:
        if not closed or len(loop) > max_loop_len:
            report["skipped_long"] += 1
            continue
        if len(set(loop)) != len(loop):
            report["skipped_nonsimple"] += 1
            continue
        if len(loop) < 3:
            continue
        tris, area = _min_area_triangulation(mesh.vertices.astype(np.float64), loop)
        added.extend(tris)
        report["filled"] += 1
        report["added_area"] += area
    if added:
        add = np.array(added, dtype=np.int32)
        first_poly = len(mesh.polys)
        width = mesh.polys.shape[1]
        extra = np.full((len(add), width), -1, dtype=np.int64)
        extra[:, :3] = add
        mesh.polys = np.concatenate([mesh.polys, extra])
        mesh.poly_len = np.concatenate([mesh.poly_len,
                                        np.full(len(add), 3, dtype=mesh.poly_len.dtype)])
        mesh.poly_edge = np.concatenate([mesh.poly_edge,
                                         np.full(len(add), -1, dtype=np.int64)])
        mesh.triangles = np.concatenate([mesh.triangles, add])
        mesh.tri_poly = np.concatenate([mesh.tri_poly,
                                        (first_poly + np.arange(len(add))).astype(np.int32)])
        mesh.synthetic = np.concatenate([mesh.synthetic, np.ones(len(add), dtype=bool)])
    return mesh, report
