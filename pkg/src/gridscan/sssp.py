"""Single-source shortest paths over the separator graph.

Two solvers share the same three-phase skeleton:

1. condense every cluster to boundary-to-boundary distances (the separator
   graph), 2. run a cluster-keyed Dijkstra over the condensed graph while the
   per-vertex distance estimates live in a file ``D``, 3. rescan the clusters
   and finalize interior vertices from the boundary distances.

``sssp_simple`` processes phase 2 strictly in global key order.
``sssp_hierarchical`` nests clusters into levels and spends a fixed budget of
extractions per visit to a level, so queue keys touch only nearby state; a
finalized vertex whose estimate later improves is reactivated, which keeps
the result exact under the budgeted order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import gridfmt as gf
from . import clusters as cl
from .simdisk import SimDisk

INF_D = (1 << 63) - 1          # distance payload of the all-ones record
TENTATIVE = 1 << 63            # sign bit: estimate not yet final


class SsspError(Exception):
    pass


class DistanceFile:
    """Per-separator-vertex 64-bit records: bit 63 tentative flag, rest the
    distance estimate.  All-ones (tentative infinity) initially."""

    def __init__(self, disk: SimDisk, scheme: cl.ClusterScheme, name: str):
        self.disk = disk
        self.scheme = scheme
        self.handle = disk.open_file(name)
        stream = disk.append_stream(self.handle)
        stream.write(b"\xff" * (8 * scheme.total_boundary))
        stream.close()

    def read_cluster(self, ci: int, cj: int) -> list[int]:
        s = self.scheme
        base, size = s.base(ci, cj), s.boundary_size(ci, cj)
        raw = self.disk.read_direct(self.handle, base * 8, size * 8)
        return [int.from_bytes(raw[i * 8:(i + 1) * 8], "little")
                for i in range(size)]

    def write_cluster(self, ci: int, cj: int, vals: list[int]):
        base = self.scheme.base(ci, cj)
        self.disk.write_direct(self.handle, base * 8,
                               b"".join(v.to_bytes(8, "little") for v in vals))

    @staticmethod
    def dist(v: int) -> int:
        return v & INF_D

    @staticmethod
    def is_tentative(v: int) -> bool:
        return bool(v & TENTATIVE)


def _min_tentative(vals: list[int]):
    """(distance, position) of the best tentative record, or None."""
    best = None
    for i, v in enumerate(vals):
        if v & TENTATIVE and v != (TENTATIVE | INF_D):
            d = v & INF_D
            if best is None or d < best[0]:
                best = (d, i)
    return best


@dataclass
class SolveStats:
    extractions: list = field(default_factory=list)  # (h-number, distance)
    level0_calls: int = 0
    wasted_calls: int = 0
    reactivations: int = 0


def _seed_source(g, scheme, dfile: DistanceFile, s_cell):
    """Tentative boundary estimates of the source's cluster, from a local
    in-memory Dijkstra."""
    ci, cj = scheme.cluster_of(*s_cell)
    q = cl.load_cluster(g, scheme, ci, cj)
    dist = cl._local_dijkstra(q, q.local(*s_cell), unit=False)
    vals = dfile.read_cluster(ci, cj)
    for i, (r, c) in enumerate(q.boundary):
        dv = dist[q.local(r, c)]
        if dv != float("inf"):
            vals[i] = TENTATIVE | int(dv)
    dfile.write_cluster(ci, cj, vals)
    return ci, cj


def _relax_targets(dfile, scheme, dist_u, targets, allow_reactivate, stats):
    """Apply dist_u + w relaxations grouped per target cluster.

    Returns the set of cluster ranks whose minimum tentative estimate may
    have changed.
    """
    by_cluster: dict[tuple[int, int], list] = {}
    for t, w in targets:
        by_cluster.setdefault(scheme.cluster_of_h_number(t), []).append((t, w))
    touched = set()
    for (ci, cj), lst in by_cluster.items():
        vals = dfile.read_cluster(ci, cj)
        base = scheme.base(ci, cj)
        changed = False
        for t, w in lst:
            nd = dist_u + w
            cur = vals[t - base]
            if cur & TENTATIVE:
                if nd < (cur & INF_D):
                    vals[t - base] = TENTATIVE | nd
                    changed = True
            elif allow_reactivate and nd < (cur & INF_D):
                vals[t - base] = TENTATIVE | nd
                stats.reactivations += 1
                changed = True
        if changed:
            dfile.write_cluster(ci, cj, vals)
            touched.add(scheme.rank(ci, cj))
    return touched


def _finalize_interiors(g, scheme, dfile, s_cell, out_name):
    """Phase 3: per cluster, Dijkstra seeded from the final boundary
    estimates (and the source itself); distances written in Z-order."""
    disk = g.disk
    handle = disk.open_file(out_name)
    stream = disk.append_stream(handle)
    gf.write_header_via(stream, disk, gf.Z_ORDER, "distances",
                        g.rows, g.cols, g.n)
    _, cell_of_z = gf.z_tables(g.rows, g.cols)
    for q in cl.iterate_clusters(g, scheme):
        vals = dfile.read_cluster(q.ci, q.cj)
        dist = [float("inf")] * q.n
        pq = []
        for i, (r, c) in enumerate(q.boundary):
            d = vals[i] & INF_D
            if d != INF_D:
                li = q.local(r, c)
                if d < dist[li]:
                    dist[li] = d
                    pq.append((d, li))
        if s_cell is not None:
            sci, scj = scheme.cluster_of(*s_cell)
            if (sci, scj) == (q.ci, q.cj):
                li = q.local(*s_cell)
                if dist[li] > 0:
                    dist[li] = 0
                    pq.append((0, li))
        heapq.heapify(pq)
        while pq:
            dv, v = heapq.heappop(pq)
            if dv > dist[v]:
                continue
            for _, lr, lc, w in q.intra[v]:
                u = lr * q.wid + lc
                if dv + w < dist[u]:
                    dist[u] = dv + w
                    heapq.heappush(pq, (dv + w, u))
        z0, cnt = scheme.z_interval(q.ci, q.cj)
        buf = bytearray()
        for t in range(cnt):
            cell = int(cell_of_z[z0 + t])
            li = q.local(cell // g.cols, cell % g.cols)
            dv = dist[li]
            buf += (gf.ABSENT if dv == float("inf") else int(dv)
                    ).to_bytes(8, "little")
        stream.write(bytes(buf))
    stream.close()
    return handle


def _check_input(g, s_cell):
    if g.encoding != "weighted_directed":
        raise SsspError("input must be weighted_directed")
    if g.order != gf.Z_ORDER:
        raise SsspError("input must be in z_order")
    r, c = s_cell
    if not (0 <= r < g.rows and 0 <= c < g.cols):
        raise SsspError("source outside grid")


def sssp_simple(g: gf.GridGraph, s_cell: tuple[int, int], h: int,
                out_name: str = "dist.out", stats: SolveStats | None = None):
    """Exact distances from s to every vertex; strict global key order."""
    _check_input(g, s_cell)
    stats = stats if stats is not None else SolveStats()
    disk = g.disk
    gp = cl.build_separator_graph(g, h, "weighted_distance",
                                  name=out_name + ".gp")
    scheme = gp.scheme
    dfile = DistanceFile(disk, scheme, out_name + ".D")
    sci, scj = _seed_source(g, scheme, dfile, s_cell)

    nclusters = scheme.crows * scheme.ccols
    cur_min = [None] * nclusters          # (dist, pos) or None
    heap: list[tuple[int, int]] = []

    def refresh(rank, vals):
        cur_min[rank] = _min_tentative(vals)
        if cur_min[rank] is not None:
            heapq.heappush(heap, (cur_min[rank][0], rank))

    refresh(scheme.rank(sci, scj), dfile.read_cluster(sci, scj))
    while heap:
        key, rank = heapq.heappop(heap)
        if cur_min[rank] is None or key != cur_min[rank][0]:
            continue
        ci, cj = scheme.cluster_at_rank(rank)
        vals = dfile.read_cluster(ci, cj)
        best = _min_tentative(vals)
        if best is None or best[0] != key:
            refresh(rank, vals)
            continue
        dist_u, pos = best
        vals[pos] &= ~TENTATIVE            # make final
        dfile.write_cluster(ci, cj, vals)
        u = scheme.base(ci, cj) + pos
        stats.extractions.append((u, dist_u))
        targets = list(gp.decode_edges(u, gp.read_record(disk, u)))
        touched = _relax_targets(dfile, scheme, dist_u, targets,
                                 allow_reactivate=False, stats=stats)
        touched.add(rank)
        for tr in touched:
            refresh(tr, dfile.read_cluster(*scheme.cluster_at_rank(tr)))
    return _finalize_interiors(g, scheme, dfile, s_cell, out_name)


# ---------------------------------------------------------------------------
# Hierarchical solver


def build_hierarchy(h0: int, rows: int, cols: int) -> list[int]:
    """Level sequence h_0 < h_1 < ... truncated once one cluster covers the
    grid: h_1 = h_0 + 3, then h_i = 2^(h_{i-1} - h_{i-2} - 2) * h_{i-1}."""
    if h0 < 1:
        raise SsspError("h0 must be at least 1")
    side = max(rows, cols)
    levels = [h0]
    while (1 << levels[-1]) < side:
        if len(levels) == 1:
            levels.append(h0 + 3)
        else:
            levels.append((1 << (levels[-1] - levels[-2] - 2)) * levels[-1])
    return levels


def sssp_hierarchical(g: gf.GridGraph, s_cell: tuple[int, int],
                      levels: list[int], out_name: str = "dist.out",
                      stats: SolveStats | None = None):
    """Same output as sssp_simple, via budgeted nested cluster queues."""
    _check_input(g, s_cell)
    stats = stats if stats is not None else SolveStats()
    h0 = levels[0]
    disk = g.disk
    gp = cl.build_separator_graph(g, h0, "weighted_distance",
                                  name=out_name + ".gp")
    scheme = gp.scheme
    dfile = DistanceFile(disk, scheme, out_name + ".D")
    _seed_source(g, scheme, dfile, s_cell)

    k = len(levels) - 1
    nclusters = scheme.crows * scheme.ccols
    cur_min = [None] * nclusters

    def h0_key(rank):
        return cur_min[rank][0] if cur_min[rank] is not None else INF_D

    def ancestor(rank, level):
        """Coords of the level-`level` cluster containing an h0 cluster."""
        ci, cj = scheme.cluster_at_rank(rank)
        shift = levels[level] - h0
        return ci >> shift, cj >> shift

    def child_key(level, coord):
        """Exact key of a level-`level` cluster: min over its h0 clusters."""
        ci0, cj0 = coord
        shift = levels[level] - h0
        best = INF_D
        for ci in range(ci0 << shift, min((ci0 + 1) << shift, scheme.crows)):
            for cj in range(cj0 << shift, min((cj0 + 1) << shift, scheme.ccols)):
                best = min(best, h0_key(scheme.rank(ci, cj)))
        return best

    # per (level, parent coord): lazy heap over level-1 children
    heaps: dict[tuple[int, tuple[int, int]], list] = {}

    def push_chain(rank, key):
        """Advertise a (possibly improved) h0-cluster key to every ancestor
        queue on its chain."""
        for lv in range(1, k + 1):
            child = ancestor(rank, lv - 1)
            parent = ancestor(rank, lv)
            heapq.heappush(heaps.setdefault((lv, parent), []), (key, child))

    def refresh_from_disk(rank):
        ci, cj = scheme.cluster_at_rank(rank)
        cur_min[rank] = _min_tentative(dfile.read_cluster(ci, cj))

    def level0_step(rank) -> bool:
        """One extraction inside an h0 cluster; False when nothing tentative."""
        stats.level0_calls += 1
        ci, cj = scheme.cluster_at_rank(rank)
        vals = dfile.read_cluster(ci, cj)
        best = _min_tentative(vals)
        if best is None:
            cur_min[rank] = None
            stats.wasted_calls += 1
            return False
        dist_u, pos = best
        vals[pos] &= ~TENTATIVE
        dfile.write_cluster(ci, cj, vals)
        u = scheme.base(ci, cj) + pos
        stats.extractions.append((u, dist_u))
        targets = list(gp.decode_edges(u, gp.read_record(disk, u)))
        touched = _relax_targets(dfile, scheme, dist_u, targets,
                                 allow_reactivate=True, stats=stats)
        touched.add(rank)
        for tr in touched:
            refresh_from_disk(tr)
            if cur_min[tr] is not None:
                push_chain(tr, cur_min[tr][0])
        return True

    def process(level, coord):
        if level == 0:
            level0_step(scheme.rank(*coord))
            return
        budget = 1 << (levels[level] - levels[level - 1] - 1)
        heap = heaps.setdefault((level, coord), [])
        for _ in range(budget):
            entry = None
            while heap:
                key, child = heapq.heappop(heap)
                if child_key(level - 1, child) == key and key < INF_D:
                    entry = (key, child)
                    break
            if entry is None:
                return
            process(level - 1, entry[1])
            nk = child_key(level - 1, entry[1])
            if nk < INF_D:
                heapq.heappush(heap, (nk, entry[1]))

    sci, scj = scheme.cluster_of(*s_cell)
    srank = scheme.rank(sci, scj)
    refresh_from_disk(srank)
    if cur_min[srank] is not None:
        push_chain(srank, cur_min[srank][0])

    if k == 0:
        while level0_step(0):
            pass
    else:
        while child_key(k, (0, 0)) < INF_D:
            process(k, (0, 0))
    return _finalize_interiors(g, scheme, dfile, s_cell, out_name)


def read_distances(disk: SimDisk, handle) -> list[int]:
    """Decode a Z-order distance file; gridfmt.ABSENT means unreachable."""
    g = gf.open_grid(disk, handle)
    raw = disk.raw_bytes(handle)
    off = g.payload_offset
    return [int.from_bytes(raw[off + 8 * i: off + 8 * (i + 1)], "little")
            for i in range(g.count)]
