"""Canonical square clusters, boundary numbering, and the separator graph.

The grid is tiled by aligned 2^h x 2^h clusters (clipped at the grid edge).
Boundary vertices of each cluster get consecutive numbers, clockwise from the
upper-left corner; clusters are ordered by the Z-rank of the cluster grid, so
the numbering is global and arithmetic.

``build_separator_graph`` condenses each cluster to its boundary: per
boundary vertex one fixed-size record holding intra-cluster
boundary-to-boundary payload (shortest distances, hop distances, or a
reachability bit set) plus that vertex's edges into neighbouring clusters.
Fixed record sizes make every record addressable by its number alone.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import gridfmt as gf
from .simdisk import SimDisk, SimConfig

ABSENT32 = 2 ** 32 - 1


class ClusterError(Exception):
    pass


# largest per-cluster working set, in bytes, that each algorithm keeps in
# memory at once (decoded cluster + per-boundary state + queues); choose_h
# picks the largest h that fits
WORKING_SET = {
    "sssp": lambda h: 128 * 4 ** h,
    "bfs": lambda h: 96 * 4 ** h,
    "mst": lambda h: 96 * 4 ** h,
    "toposort": lambda h: 3 * 4 ** h,
    "tfp": lambda h: 32 * 4 ** h,
    "euler": lambda h: 2 * 4 ** h,
}


def choose_h(sim: SimConfig, alg: str) -> int:
    ws = WORKING_SET[alg]
    h = 0
    while ws(h + 1) <= sim.memory_bytes:
        h += 1
    return h


class ClusterScheme:
    """Geometry of the 2^h tiling of an r x c grid."""

    def __init__(self, rows: int, cols: int, h: int):
        self.rows, self.cols, self.h = rows, cols, h
        self.size = 1 << h
        self.crows = -(-rows // self.size)
        self.ccols = -(-cols // self.size)
        self.cluster_z, self.cluster_cell = gf.z_tables(self.crows, self.ccols)
        # boundary-size prefix sums in cluster-Z order -> h-number bases
        sizes = np.zeros(self.crows * self.ccols, dtype=np.int64)
        for ci in range(self.crows):
            for cj in range(self.ccols):
                rank = int(self.cluster_z[ci * self.ccols + cj])
                sizes[rank] = self._boundary_count(*self.extent(ci, cj))
        self.bases = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.bases[1:])
        self.total_boundary = int(self.bases[-1])

    # -- geometry ----------------------------------------------------------

    def cluster_of(self, r: int, c: int) -> tuple[int, int]:
        return r >> self.h, c >> self.h

    def extent(self, ci: int, cj: int) -> tuple[int, int, int, int]:
        """(r0, c0, height, width) of a cluster, clipped to the grid."""
        r0, c0 = ci * self.size, cj * self.size
        return (r0, c0, min(self.size, self.rows - r0),
                min(self.size, self.cols - c0))

    @staticmethod
    def _boundary_count(r0, c0, hgt, wid) -> int:
        if hgt == 1:
            return wid
        if wid == 1:
            return hgt
        return 2 * (hgt - 1) + 2 * (wid - 1)

    def rank(self, ci: int, cj: int) -> int:
        return int(self.cluster_z[ci * self.ccols + cj])

    def cluster_at_rank(self, rank: int) -> tuple[int, int]:
        cell = int(self.cluster_cell[rank])
        return cell // self.ccols, cell % self.ccols

    def clusters_in_z_order(self):
        for rank in range(self.crows * self.ccols):
            yield self.cluster_at_rank(rank)

    def boundary_size(self, ci: int, cj: int) -> int:
        return self._boundary_count(*self.extent(ci, cj))

    def base(self, ci: int, cj: int) -> int:
        return int(self.bases[self.rank(ci, cj)])

    def boundary_coords(self, ci: int, cj: int) -> list[tuple[int, int]]:
        """Boundary cells clockwise from the upper-left corner, 0-based."""
        r0, c0, hgt, wid = self.extent(ci, cj)
        out = [(r0, c0 + lc) for lc in range(wid)]
        out += [(r0 + lr, c0 + wid - 1) for lr in range(1, hgt)]
        if hgt > 1:
            out += [(r0 + hgt - 1, c0 + lc) for lc in range(wid - 2, -1, -1)]
        if wid > 1:
            out += [(r0 + lr, c0) for lr in range(hgt - 2, 0, -1)]
        return out

    def boundary_position(self, r: int, c: int) -> int | None:
        """Clockwise position of (r, c) on its cluster's boundary, or None."""
        ci, cj = self.cluster_of(r, c)
        r0, c0, hgt, wid = self.extent(ci, cj)
        lr, lc = r - r0, c - c0
        if lr == 0:
            return lc
        if lc == wid - 1:
            return wid - 1 + lr
        if lr == hgt - 1:
            return wid + hgt - 2 + (wid - 1 - lc)
        if lc == 0:
            return 2 * (wid - 1) + (hgt - 1) + (hgt - 1 - lr)
        return None

    def h_number(self, r: int, c: int) -> int | None:
        pos = self.boundary_position(r, c)
        if pos is None:
            return None
        return self.base(*self.cluster_of(r, c)) + pos

    def coord_of_h_number(self, hnum: int) -> tuple[int, int]:
        rank = int(np.searchsorted(self.bases, hnum, side="right")) - 1
        ci, cj = self.cluster_at_rank(rank)
        return self.boundary_coords(ci, cj)[hnum - int(self.bases[rank])]

    def cluster_of_h_number(self, hnum: int) -> tuple[int, int]:
        rank = int(np.searchsorted(self.bases, hnum, side="right")) - 1
        return self.cluster_at_rank(rank)

    def z_interval(self, ci: int, cj: int) -> tuple[int, int]:
        """(first z-index, vertex count) of a cluster's contiguous range."""
        r0, c0, hgt, wid = self.extent(ci, cj)
        z0 = gf.coord_to_index(gf.Z_ORDER, self.rows, self.cols, r0 + 1, c0 + 1)
        return z0, hgt * wid


# ---------------------------------------------------------------------------
# In-memory clusters


@dataclass
class InMemoryCluster:
    scheme: ClusterScheme
    ci: int
    cj: int
    r0: int
    c0: int
    hgt: int
    wid: int
    # intra-cluster adjacency per local cell lr*wid+lc: (dir, lr2, lc2, w)
    intra: list = field(default_factory=list)
    # edges leaving the cluster: (lr, lc, dir, r2, c2, w), endpoints 0-based
    out_edges: list = field(default_factory=list)
    boundary: list = field(default_factory=list)   # 0-based coords, h order

    def local(self, r: int, c: int) -> int:
        return (r - self.r0) * self.wid + (c - self.c0)

    @property
    def n(self) -> int:
        return self.hgt * self.wid


def _decode_cluster(g: gf.GridGraph, scheme: ClusterScheme, ci: int, cj: int,
                    raw: bytes) -> InMemoryCluster:
    r0, c0, hgt, wid = scheme.extent(ci, cj)
    q = InMemoryCluster(scheme, ci, cj, r0, c0, hgt, wid)
    q.boundary = scheme.boundary_coords(ci, cj)
    q.intra = [[] for _ in range(hgt * wid)]
    rs = g.record_size
    z0, cnt = scheme.z_interval(ci, cj)
    _, cell_of_z = gf.z_tables(g.rows, g.cols)
    undirected = g.encoding == "weighted_undirected"
    for t in range(cnt):
        cell = int(cell_of_z[z0 + t])
        r, c = cell // g.cols, cell % g.cols
        mask, weights = gf.decode_record(g.encoding, raw[t * rs:(t + 1) * rs])
        for d in range(8):
            if not (mask >> d & 1):
                continue
            dr, dc = gf.DIR_OFFSETS[d]
            nr, nc = r + dr, c + dc
            w = weights.get(d, 1)
            if r0 <= nr < r0 + hgt and c0 <= nc < c0 + wid:
                q.intra[q.local(r, c)].append((d, nr - r0, nc - c0, w))
                if undirected:
                    q.intra[q.local(nr, nc)].append(
                        (gf.opposite(d), r - r0, c - c0, w))
            else:
                q.out_edges.append((r - r0, c - c0, d, nr, nc, w))
    return q


def load_cluster(g: gf.GridGraph, scheme: ClusterScheme, ci: int, cj: int) -> InMemoryCluster:
    """One cluster via a counted direct read of its contiguous byte range."""
    if g.order != gf.Z_ORDER:
        raise ClusterError("graph must be in z_order")
    z0, cnt = scheme.z_interval(ci, cj)
    rs = g.record_size
    raw = g.disk.read_direct(g.handle, g.payload_offset + z0 * rs, cnt * rs)
    return _decode_cluster(g, scheme, ci, cj, raw)


def iterate_clusters(g: gf.GridGraph, scheme: ClusterScheme):
    """All clusters in Z-rank order through one sequential scan of the input."""
    if g.order != gf.Z_ORDER:
        raise ClusterError("graph must be in z_order")
    rs = g.record_size
    reader = g.disk.scan_reader(g.handle, g.payload_offset)
    for ci, cj in scheme.clusters_in_z_order():
        _, cnt = scheme.z_interval(ci, cj)
        raw = reader.read(cnt * rs)
        yield _decode_cluster(g, scheme, ci, cj, raw)


# ---------------------------------------------------------------------------
# Separator graph construction


@dataclass
class SeparatorGraph:
    scheme: ClusterScheme
    mode: str                     # weighted_distance | unit_distance | reachability
    handle: object                # G' record file
    record_size: int
    slots: int                    # per-record slot count (distance modes)
    d_handle: object = None       # 16-bit in-degree file (reachability)
    z_handle: object = None       # zero-in-degree queue file (reachability)
    z_count: int = 0

    def read_record(self, disk: SimDisk, hnum: int) -> bytes:
        return disk.read_direct(self.handle, hnum * self.record_size,
                                self.record_size)

    def decode_edges(self, hnum: int, raw: bytes):
        """Yield (target h-number, weight) for one record (distance modes)."""
        scheme = self.scheme
        ci, cj = scheme.cluster_of_h_number(hnum)
        base = scheme.base(ci, cj)
        bsize = scheme.boundary_size(ci, cj)
        pos = hnum - base
        sw = 8 if self.mode == "weighted_distance" else 4
        absent = gf.ABSENT if sw == 8 else ABSENT32
        shift = 60 if sw == 8 else 28
        r, c = scheme.coord_of_h_number(hnum)
        for slot in range(self.slots):
            v = int.from_bytes(raw[slot * sw:(slot + 1) * sw], "little")
            if v == absent:
                continue
            if slot < bsize - 1:
                tpos = slot if slot < pos else slot + 1
                yield base + tpos, v
            else:
                d = v >> shift
                w = v & ((1 << shift) - 1)
                dr, dc = gf.DIR_OFFSETS[d]
                t = scheme.h_number(r + dr, c + dc)
                yield t, w

    def decode_reach(self, hnum: int, raw: bytes):
        """(intra target h-numbers, outgoing direction mask) of one record."""
        scheme = self.scheme
        ci, cj = scheme.cluster_of_h_number(hnum)
        base = scheme.base(ci, cj)
        bsize = scheme.boundary_size(ci, cj)
        m = int.from_bytes(raw[:-1], "little")
        targets = [base + j for j in range(bsize) if m >> j & 1]
        return targets, raw[-1]


def _cluster_topo_order(q: InMemoryCluster):
    """Topological order of the intra-cluster subgraph; None if cyclic."""
    n = q.n
    indeg = [0] * n
    for v in range(n):
        for d, lr, lc, w in q.intra[v]:
            indeg[lr * q.wid + lc] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for d, lr, lc, w in q.intra[v]:
            u = lr * q.wid + lc
            indeg[u] -= 1
            if indeg[u] == 0:
                stack.append(u)
    return order if len(order) == n else None


def _local_dijkstra(q: InMemoryCluster, src_local: int, unit: bool):
    """Distances from one local cell to all local cells, intra edges only."""
    INF = float("inf")
    dist = [INF] * q.n
    dist[src_local] = 0
    if unit:
        # plain BFS
        frontier = [src_local]
        d = 0
        while frontier:
            nxt = []
            for v in frontier:
                for _, lr, lc, w in q.intra[v]:
                    u = lr * q.wid + lc
                    if dist[u] == INF:
                        dist[u] = d + 1
                        nxt.append(u)
            frontier = nxt
            d += 1
        return dist
    pq = [(0, src_local)]
    while pq:
        dv, v = heapq.heappop(pq)
        if dv > dist[v]:
            continue
        for _, lr, lc, w in q.intra[v]:
            u = lr * q.wid + lc
            nd = dv + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(pq, (nd, u))
    return dist


def build_separator_graph(g: gf.GridGraph, h: int, mode: str,
                          name: str = "gprime") -> SeparatorGraph:
    """Condense every cluster to boundary-to-boundary payload plus cross edges.

    Written sequentially in h-number order.  In reachability mode an
    in-degree file (16-bit per separator vertex) and a queue file of
    zero-in-degree vertices are produced as well.
    """
    if g.order != gf.Z_ORDER:
        raise ClusterError("graph must be in z_order")
    if mode == "weighted_distance" and g.encoding not in (
            "weighted_directed", "weighted_undirected"):
        raise ClusterError("weighted mode needs a weighted encoding")
    if mode in ("unit_distance", "reachability") and g.encoding != "unweighted":
        raise ClusterError("%s mode needs the unweighted encoding" % mode)
    disk = g.disk
    scheme = ClusterScheme(g.rows, g.cols, h)
    # h = 0 degenerates to 1x1 clusters whose single vertex can have up to 8
    # cross-cluster edges; widen the record so the slot budget still holds
    slots = 4 * (1 << h) if h > 0 else 8
    if mode == "weighted_distance":
        sw, absent, shift = 8, gf.ABSENT, 60
        rec_size = slots * sw
    elif mode == "unit_distance":
        sw, absent, shift = 4, ABSENT32, 28
        rec_size = slots * sw
    elif mode == "reachability":
        rec_size = -(-slots // 8) + 1
    else:
        raise ClusterError("unknown mode %r" % mode)

    handle = disk.open_file(name)
    out = disk.append_stream(handle)
    indeg = (np.zeros(scheme.total_boundary, dtype=np.int64)
             if mode == "reachability" else None)

    for q in iterate_clusters(g, scheme):
        bpos = {rc: i for i, rc in enumerate(q.boundary)}
        bsize = len(q.boundary)
        base = scheme.base(q.ci, q.cj)
        if mode == "reachability":
            order = _cluster_topo_order(q)
            if order is None:
                raise ClusterError("cycle inside cluster (%d,%d)" % (q.ci, q.cj))
            reach = [0] * q.n
            for v in reversed(order):
                acc = 0
                for _, lr, lc, w in q.intra[v]:
                    u = lr * q.wid + lc
                    rc = (lr + q.r0, lc + q.c0)
                    if rc in bpos:
                        acc |= 1 << bpos[rc]
                    acc |= reach[u]
                reach[v] = acc
            out_masks = [0] * bsize
            for lr, lc, d, nr, nc, w in q.out_edges:
                rc = (lr + q.r0, lc + q.c0)
                out_masks[bpos[rc]] |= 1 << d
                t = scheme.h_number(nr, nc)
                indeg[t] += 1
            for i, (r, c) in enumerate(q.boundary):
                m = reach[q.local(r, c)]
                for j in range(bsize):
                    if m >> j & 1:
                        indeg[base + j] += 1
                out.write(m.to_bytes(rec_size - 1, "little")
                          + bytes([out_masks[i]]))
        else:
            unit = mode == "unit_distance"
            ehs: list[list] = [[] for _ in range(bsize)]
            for lr, lc, d, nr, nc, w in q.out_edges:
                rc = (lr + q.r0, lc + q.c0)
                if w >> shift:
                    raise ClusterError("weight too large for slot encoding")
                ehs[bpos[rc]].append((d << shift) | (1 if unit else w))
            for i, (r, c) in enumerate(q.boundary):
                dist = _local_dijkstra(q, q.local(r, c), unit)
                rec = bytearray()
                for j, (br, bc) in enumerate(q.boundary):
                    if j == i:
                        continue
                    dv = dist[q.local(br, bc)]
                    rec += (absent if dv == float("inf") else int(dv)
                            ).to_bytes(sw, "little")
                eh = ehs[i]
                spare = slots - (bsize - 1)
                if len(eh) > spare:
                    raise ClusterError("cross-cluster slot overflow")
                for v in eh:
                    rec += v.to_bytes(sw, "little")
                rec += absent.to_bytes(sw, "little") * (spare - len(eh))
                out.write(bytes(rec))
    out.close()

    gp = SeparatorGraph(scheme, mode, handle, rec_size, slots)
    if mode == "reachability":
        if indeg.max(initial=0) >= 2 ** 16:
            raise ClusterError("in-degree exceeds 16 bits")
        d_handle = disk.open_file(name + ".indeg")
        ds = disk.append_stream(d_handle)
        ds.write(indeg.astype("<u2").tobytes())
        ds.close()
        z_handle = disk.open_file(name + ".zqueue")
        zs = disk.append_stream(z_handle)
        zcount = 0
        for v in np.flatnonzero(indeg == 0):
            zs.write(int(v).to_bytes(8, "little"))
            zcount += 1
        zs.close()
        gp.d_handle, gp.z_handle, gp.z_count = d_handle, z_handle, zcount
    return gp
