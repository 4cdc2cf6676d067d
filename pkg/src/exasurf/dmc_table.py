"""Cell configuration table for the x-quad dual marching cubes.

Cases are generated by facet walking: contour segments on each facet connect
edge crossings (the decider bit picks the pairing on ambiguous facets), the
segments chain into directed cycles (material kept to the left as seen from
inside the cell, which makes orientation intrinsic), and each cycle becomes
one cell face. A face crossing ambiguous facets is split into one dual vertex
per arc between consecutive ambiguous-facet segments; faces crossing none
keep a single dual vertex.

A case is one (8-bit sign pattern, decider-bit assignment) combination; there
are 656 of those. Inverting all signs while flipping every decider bit leaves
the contour segments untouched, so cases pair up into 328 distinct
configurations, which collapse to 27 classes under cube symmetries plus
inversion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

# corner c sits at ((c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1)
CORNER_OFFSETS = np.array([[(c >> a) & 1 for a in range(3)] for c in range(8)], dtype=np.int8)

# edges in axis-major order: x edges 0-3, y edges 4-7, z edges 8-11
EDGE_CORNERS = []
for axis in range(3):
    for c in range(8):
        if not (c >> axis) & 1:
            EDGE_CORNERS.append((c, c | (1 << axis)))
EDGE_CORNERS = np.array(EDGE_CORNERS, dtype=np.int8)
EDGE_AXIS = np.repeat(np.arange(3, dtype=np.int8), 4)
EDGE_OFFSET = CORNER_OFFSETS[EDGE_CORNERS[:, 0]]          # lower-corner cell offset
_EDGE_ID = {tuple(sorted(e)): i for i, e in enumerate(map(tuple, EDGE_CORNERS))}

# facet f = axis * 2 + side; corners listed cyclically around the facet
FACET_AXIS = np.array([f // 2 for f in range(6)], dtype=np.int8)
FACET_SIDE = np.array([f % 2 for f in range(6)], dtype=np.int8)
FACE_TANGENTS = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


def _facet_corners(f: int) -> list[int]:
    axis, side = f // 2, f % 2
    ta, tb = FACE_TANGENTS[axis]
    out = []
    for u, v in ((0, 0), (1, 0), (1, 1), (0, 1)):
        out.append((side << axis) | (u << ta) | (v << tb))
    return out


FACET_CORNERS_CYC = np.array([_facet_corners(f) for f in range(6)], dtype=np.int8)
FACET_EDGES_CYC = np.array(
    [[_EDGE_ID[tuple(sorted((row[i], row[(i + 1) % 4])))] for i in range(4)]
     for row in FACET_CORNERS_CYC], dtype=np.int8)

EDGE_FACETS = [[] for _ in range(12)]
for f in range(6):
    for e in FACET_EDGES_CYC[f]:
        EDGE_FACETS[e].append(f)
EDGE_FACETS = np.array(EDGE_FACETS, dtype=np.int8)        # (12, 2)


def ambiguous_facets(pattern: int) -> list[int]:
    out = []
    for f in range(6):
        s = [(pattern >> int(c)) & 1 for c in FACET_CORNERS_CYC[f]]
        if s[0] == s[2] and s[1] == s[3] and s[0] != s[1]:
            out.append(f)
    return out


def _corner_uv(f: int, c: int) -> np.ndarray:
    ta, tb = FACE_TANGENTS[f // 2]
    return np.array([(c >> ta) & 1, (c >> tb) & 1], dtype=np.float64)


def _edge_mid_uv(f: int, e: int) -> np.ndarray:
    a, b = EDGE_CORNERS[e]
    return 0.5 * (_corner_uv(f, a) + _corner_uv(f, b))


def _facet_handedness(f: int) -> float:
    """+1 when the (u, v) frame appears counterclockwise from inside the cell,
    negated so that assembled polygons wind with normals from material to air."""
    axis, side = f // 2, f % 2
    eps = 1.0 if axis in (0, 2) else -1.0      # sign of (e_ta x e_tb) . e_axis
    inward = 1.0 if side == 0 else -1.0
    return -eps * inward


def facet_segments_directed(pattern: int, f: int, bit: int):
    """Directed contour segments (edge -> edge) on one facet, material left
    as seen from inside the cell."""
    cyc = FACET_CORNERS_CYC[f]
    s = [(pattern >> int(c)) & 1 for c in cyc]
    eids = FACET_EDGES_CYC[f]
    active = [i for i in range(4) if s[i] != s[(i + 1) % 4]]
    if not active:
        return []
    pairs = []
    if len(active) == 2:
        pairs.append((int(eids[active[0]]), int(eids[active[1]]), None))
    else:
        # ambiguous: bit 1 connects the positive corners, so the two segments
        # wrap around the negative corners (and vice versa)
        for i in range(4):
            if (bit == 1) == (s[i] == 0):
                pairs.append((int(eids[(i - 1) % 4]), int(eids[i]), int(cyc[i])))
    h = _facet_handedness(f)
    out = []
    for ea, eb, cutoff in pairs:
        pa, pb = _edge_mid_uv(f, ea), _edge_mid_uv(f, eb)
        d = pb - pa
        n_left = h * np.array([-d[1], d[0]])
        mid = 0.5 * (pa + pb)
        if cutoff is not None:
            ref = _corner_uv(f, cutoff) - mid
            want_left = (pattern >> cutoff) & 1
        else:
            pos = [int(c) for c in cyc if (pattern >> int(c)) & 1]
            ref = _corner_uv(f, int(pos[0])) - mid
            want_left = 1
        on_left = float(ref @ n_left) > 0
        if on_left != bool(want_left):
            ea, eb = eb, ea
        out.append((ea, eb, f))
    return out


@dataclass
class CellCase:
    pattern: int
    bits: tuple                      # decider bits, ordered by ambiguous facet id
    cycles: list                     # each a list of edge ids in traversal order
    n_verts: int
    edge_vert: np.ndarray            # (12,) vertex slot per active edge, -1 inactive
    edge_cycle: np.ndarray           # (12,) cycle index per active edge
    edge_out_facet: np.ndarray       # (12,) facet of the outgoing segment
    edge_in_facet: np.ndarray        # (12,)
    partner: np.ndarray              # (6, 12) partner edge on that facet, -1
    inflation: list                  # vertex-slot polygons for >=3-arc cycles
    class_id: int = -1


def build_cell_case(pattern: int, bits: tuple) -> CellCase:
    ambi = ambiguous_facets(pattern)
    bit_of = dict(zip(ambi, bits))
    segments = []
    for f in range(6):
        segments.extend(facet_segments_directed(pattern, f, bit_of.get(f, 0)))
    out_map = {}
    in_map = {}
    partner = np.full((6, 12), -1, dtype=np.int8)
    for ea, eb, f in segments:
        assert ea not in out_map and eb not in in_map, (pattern, bits)
        out_map[ea] = (eb, f)
        in_map[eb] = (ea, f)
        partner[f, ea] = eb
        partner[f, eb] = ea
    assert set(out_map) == set(in_map)

    edge_vert = np.full(12, -1, dtype=np.int8)
    edge_cycle = np.full(12, -1, dtype=np.int8)
    edge_out_facet = np.full(12, -1, dtype=np.int8)
    edge_in_facet = np.full(12, -1, dtype=np.int8)
    for e, (nxt, f) in out_map.items():
        edge_out_facet[e] = f
    for e, (prv, f) in in_map.items():
        edge_in_facet[e] = f

    cycles = []
    seen = set()
    for start in sorted(out_map):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        cur = out_map[start][0]
        while cur != start:
            cyc.append(cur)
            seen.add(cur)
            cur = out_map[cur][0]
        cycles.append(cyc)

    n_verts = 0
    inflation = []
    for ci, cyc in enumerate(cycles):
        m = len(cyc)
        cut_after = [out_map[cyc[i]][1] in bit_of for i in range(m)]
        n_cuts = sum(cut_after)
        if n_cuts <= 1:
            arcs = {e: 0 for e in cyc}
            n_arcs = 1
        else:
            arc = 0
            arcs = {}
            # arc increments after each cut segment; rotate so edge 0 starts arc 0
            for i in range(m):
                arcs[cyc[i]] = arc
                if cut_after[i]:
                    arc += 1
            # the final wrap joins the tail back onto arc 0
            if not cut_after[m - 1]:
                tail = arcs[cyc[m - 1]]
                for e in cyc:
                    if arcs[e] == tail:
                        arcs[e] = 0
                remap = {}
                for e in cyc:
                    remap.setdefault(arcs[e], len(remap))
                arcs = {e: remap[a] for e, a in arcs.items()}
            n_arcs = len(set(arcs.values()))
        base = n_verts
        for e in cyc:
            edge_vert[e] = base + arcs[e]
            edge_cycle[e] = ci
        if n_arcs >= 3:
            inflation.append([base + a for a in range(n_arcs)][::-1])
        n_verts += n_arcs
    return CellCase(pattern=pattern, bits=bits, cycles=cycles, n_verts=n_verts,
                    edge_vert=edge_vert, edge_cycle=edge_cycle,
                    edge_out_facet=edge_out_facet, edge_in_facet=edge_in_facet,
                    partner=partner, inflation=inflation)


# ---------------------------------------------------------------------------
# symmetry census


def _transforms():
    out = []
    for perm in itertools.permutations(range(3)):
        for flips in itertools.product((0, 1), repeat=3):
            out.append((perm, flips))
    return out


def _map_corner(c: int, t) -> int:
    perm, flips = t
    out = 0
    for a in range(3):
        v = ((c >> perm[a]) & 1) ^ flips[a]
        out |= v << a
    return out


def _map_pattern(p: int, t) -> int:
    q = 0
    for c in range(8):
        if (p >> c) & 1:
            q |= 1 << _map_corner(c, t)
    return q


_FACET_BY_CORNERSET = {frozenset(_facet_corners(f)): f for f in range(6)}


def _map_facet(f: int, t) -> int:
    return _FACET_BY_CORNERSET[frozenset(_map_corner(c, t) for c in _facet_corners(f))]


def _case_key(pattern: int, bit_of: dict) -> tuple:
    return pattern, tuple(bit_of[f] for f in sorted(bit_of))


@dataclass
class ConfigTable:
    cases: list                       # CellCase, indexed by case id
    case_offset: np.ndarray           # (256,) first case id per pattern
    pattern_facets: list              # ambiguous facet ids per pattern
    n_cases_inversion: int            # distinct cases up to sign inversion
    n_classes: int                    # classes under rotation/mirror/inversion
    # dense per-case arrays for vectorized meshing
    n_verts: np.ndarray = field(default=None)
    edge_vert: np.ndarray = field(default=None)
    edge_out_facet: np.ndarray = field(default=None)
    partner: np.ndarray = field(default=None)
    class_ids: np.ndarray = field(default=None)

    def case_id(self, pattern: int, bits: tuple) -> int:
        val = 0
        for i, b in enumerate(bits):
            val |= int(b) << i
        return int(self.case_offset[pattern]) + val


def build_config_table() -> ConfigTable:
    cases = []
    case_offset = np.zeros(256, dtype=np.int32)
    pattern_facets = []
    for pattern in range(256):
        case_offset[pattern] = len(cases)
        ambi = ambiguous_facets(pattern)
        pattern_facets.append(ambi)
        for bits in itertools.product((0, 1), repeat=len(ambi)):
            cases.append(build_cell_case(pattern, bits))

    index_of = {_case_key(c.pattern, dict(zip(pattern_facets[c.pattern], c.bits))): i
                for i, c in enumerate(cases)}

    # inversion pairing: complement the pattern, flip every decider bit
    seen = set()
    n_inv = 0
    for c in cases:
        k = _case_key(c.pattern, dict(zip(pattern_facets[c.pattern], c.bits)))
        if k in seen:
            continue
        inv_bits = {f: 1 - b for f, b in zip(pattern_facets[c.pattern], c.bits)}
        kinv = _case_key(c.pattern ^ 255, inv_bits)
        seen.add(k)
        seen.add(kinv)
        n_inv += 1

    # orbit classes under 48 spatial transforms x inversion
    trs = _transforms()
    class_ids = np.full(len(cases), -1, dtype=np.int16)
    n_classes = 0
    for i, c in enumerate(cases):
        if class_ids[i] >= 0:
            continue
        frontier = [(c.pattern, dict(zip(pattern_facets[c.pattern], c.bits)))]
        while frontier:
            p, bf = frontier.pop()
            j = index_of[_case_key(p, bf)]
            if class_ids[j] >= 0:
                continue
            class_ids[j] = n_classes
            for t in trs:
                frontier.append((_map_pattern(p, t), {_map_facet(f, t): b for f, b in bf.items()}))
            frontier.append((p ^ 255, {f: 1 - b for f, b in bf.items()}))
        n_classes += 1

    table = ConfigTable(cases=cases, case_offset=case_offset,
                        pattern_facets=pattern_facets,
                        n_cases_inversion=n_inv, n_classes=n_classes)
    table.n_verts = np.array([c.n_verts for c in cases], dtype=np.int8)
    table.edge_vert = np.stack([c.edge_vert for c in cases])
    table.edge_out_facet = np.stack([c.edge_out_facet for c in cases])
    table.partner = np.stack([c.partner for c in cases])
    table.class_ids = class_ids
    for i, c in enumerate(cases):
        c.class_id = int(class_ids[i])
    return table


_TABLE: ConfigTable | None = None


def config_table() -> ConfigTable:
    global _TABLE
    if _TABLE is None:
        _TABLE = build_config_table()
    return _TABLE


def serialize_table(table: ConfigTable) -> dict:
    """Dense array form, for the shipped-artifact byte comparison."""
    infl_flat, infl_off, infl_case = [], [0], []
    for i, c in enumerate(table.cases):
        for poly in c.inflation:
            infl_flat.extend(poly)
            infl_off.append(len(infl_flat))
            infl_case.append(i)
    return {
        "case_offset": table.case_offset,
        "n_verts": table.n_verts,
        "edge_vert": table.edge_vert,
        "edge_out_facet": table.edge_out_facet,
        "partner": table.partner,
        "class_ids": table.class_ids,
        "inflation_flat": np.array(infl_flat, dtype=np.int16),
        "inflation_offsets": np.array(infl_off, dtype=np.int32),
        "inflation_case": np.array(infl_case, dtype=np.int32),
        "census": np.array([len(table.cases), table.n_cases_inversion, table.n_classes],
                           dtype=np.int32),
    }


def _data_path() -> Path:
    return Path(str(resources.files("exasurf") / "data" / "config_table.npz"))


def save_shipped_table() -> Path:
    path = _data_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, **serialize_table(build_config_table()))
    return path


if __name__ == "__main__":
    p = save_shipped_table()
    print(f"wrote {p}")
