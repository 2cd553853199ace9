"""Breadth-first traversal order via bucketed cluster keys and chunk files.

Pipeline: exact hop distances through the three-phase scheme (the phase-2
queue is a bucket-of-lists structure that exploits the bounded key band),
then per-cluster BFS forests cut into chunks of height < 2^h, an address
list sorted by root distance, and emission through a rotating pool of
distance-keyed stacks.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field

from . import gridfmt as gf
from . import clusters as cl
from .sssp import DistanceFile, INF_D, TENTATIVE, _min_tentative
from .simdisk import SimDisk, FileStack

CHUNK_HDR = struct.Struct("<QQI")      # root z-index, root distance, count


class BfsError(Exception):
    pass


class BucketQueue:
    """Min-queue over a sliding key band of width 4^h.

    Keys up to the rounded boundary d' live in exact-key near lists; keys
    beyond d' live in 2^h + 1 far lists of width 2^h each, redistributed when
    the extraction point crosses d'.  Entries are (key, item); a decreased
    key is reinserted and the stale copy discarded by the caller, unless
    ``update_in_place`` removes the old copy immediately.
    """

    def __init__(self, h: int, update_in_place: bool = False):
        self.h = h
        self.span = 1 << h
        self.band = 1 << (2 * h)
        self.cur = 0
        self.dprime = 0            # cur rounded up to a multiple of 2^h
        self.near: dict[int, list] = {}
        self.far: list[list] = [[] for _ in range(self.span + 1)]
        self.update_in_place = update_in_place
        self.inserts = 0
        self.stale_discards = 0
        self.size = 0

    def insert(self, key: int, item):
        if key < self.cur or key > self.cur + self.band - 1:
            raise BfsError("key %d outside admissible band [%d, %d]"
                           % (key, self.cur, self.cur + self.band - 1))
        if self.update_in_place:
            self._remove(item)
        self.inserts += 1
        self.size += 1
        if key <= self.dprime:
            self.near.setdefault(key, []).append((key, item))
        else:
            i = (key - self.dprime - 1) >> self.h
            self.far[i].append((key, item))

    def _remove(self, item):
        for lst in list(self.near.values()) + self.far:
            for j, (k, it) in enumerate(lst):
                if it == item:
                    lst.pop(j)
                    self.size -= 1
                    return

    def extract_min(self):
        """(key, item) with minimal key, or None when empty."""
        while True:
            keys = [k for k in self.near if self.near[k]]
            if keys:
                k = min(keys)
                self.cur = max(self.cur, k)
                self.size -= 1
                return self.near[k].pop()
            if not any(self.far):
                return None
            # advance the boundary by one span and pull the first far list
            batch = self.far.pop(0)
            self.far.append([])
            self.cur = max(self.cur, self.dprime + 1)
            self.dprime += self.span
            for k, item in batch:
                self.near.setdefault(k, []).append((k, item))


@dataclass
class BfsStats:
    chunk_count: int = 0
    max_band: int = 0


# ---------------------------------------------------------------------------
# Phase 1+2+3: hop distances


def bfs_distances(g: gf.GridGraph, s_cell: tuple[int, int], h: int,
                  out_name: str = "bfsdist.out",
                  update_in_place: bool = False):
    """Exact hop distances from s, written in Z-order (ABSENT unreachable)."""
    if g.encoding != "unweighted":
        raise BfsError("input must be unweighted")
    if g.order != gf.Z_ORDER:
        raise BfsError("input must be in z_order")
    r, c = s_cell
    if not (0 <= r < g.rows and 0 <= c < g.cols):
        raise BfsError("source outside grid")
    disk = g.disk
    gp = cl.build_separator_graph(g, h, "unit_distance", name=out_name + ".gp")
    scheme = gp.scheme
    dfile = DistanceFile(disk, scheme, out_name + ".D")

    sci, scj = scheme.cluster_of(*s_cell)
    q0 = cl.load_cluster(g, scheme, sci, scj)
    dist0 = cl._local_dijkstra(q0, q0.local(*s_cell), unit=True)
    vals = dfile.read_cluster(sci, scj)
    for i, (br, bc) in enumerate(q0.boundary):
        dv = dist0[q0.local(br, bc)]
        if dv != float("inf"):
            vals[i] = TENTATIVE | int(dv)
    dfile.write_cluster(sci, scj, vals)

    nclusters = scheme.crows * scheme.ccols
    cur_min = [None] * nclusters
    queue = BucketQueue(h, update_in_place=update_in_place)

    def refresh(rank, vals):
        cur_min[rank] = _min_tentative(vals)
        if cur_min[rank] is not None:
            queue.insert(cur_min[rank][0], rank)

    refresh(scheme.rank(sci, scj), dfile.read_cluster(sci, scj))
    while True:
        entry = queue.extract_min()
        if entry is None:
            break
        key, rank = entry
        if cur_min[rank] is None or key != cur_min[rank][0]:
            queue.stale_discards += 1
            continue
        ci, cj = scheme.cluster_at_rank(rank)
        vals = dfile.read_cluster(ci, cj)
        best = _min_tentative(vals)
        if best is None or best[0] != key:
            queue.stale_discards += 1
            if best is not None:
                cur_min[rank] = best
                queue.insert(best[0], rank)
            continue
        dist_u, pos = best
        vals[pos] &= ~TENTATIVE
        dfile.write_cluster(ci, cj, vals)
        u = scheme.base(ci, cj) + pos
        targets = list(gp.decode_edges(u, gp.read_record(disk, u)))
        by_cluster: dict[tuple[int, int], list] = {}
        for t, w in targets:
            by_cluster.setdefault(scheme.cluster_of_h_number(t), []).append((t, w))
        touched = {rank}
        for (tci, tcj), lst in by_cluster.items():
            tvals = dfile.read_cluster(tci, tcj)
            tbase = scheme.base(tci, tcj)
            changed = False
            for t, w in lst:
                nd = dist_u + w
                curv = tvals[t - tbase]
                if curv & TENTATIVE and nd < (curv & INF_D):
                    tvals[t - tbase] = TENTATIVE | nd
                    changed = True
            if changed:
                dfile.write_cluster(tci, tcj, tvals)
                touched.add(scheme.rank(tci, tcj))
        for tr in touched:
            refresh(tr, dfile.read_cluster(*scheme.cluster_at_rank(tr)))

    from .sssp import _finalize_interiors
    handle = _finalize_interiors(g, scheme, dfile, s_cell, out_name)
    return handle, scheme


# ---------------------------------------------------------------------------
# Chunk construction


def _cluster_forest(g, q, dist_of):
    """Local BFS forest: parent = first in-cluster in-neighbour one hop
    closer, scanning directions clockwise from north.  Returns (roots,
    children) with children listed per vertex in clockwise direction order."""
    incoming = [[] for _ in range(q.n)]
    for v in range(q.n):
        for d, lr, lc, _ in q.intra[v]:
            incoming[lr * q.wid + lc].append((gf.opposite(d), v))
    roots, children = [], [[] for _ in range(q.n)]
    for lr in range(q.hgt):
        for lc in range(q.wid):
            v = lr * q.wid + lc
            dv = dist_of(lr + q.r0, lc + q.c0)
            if dv is None:
                continue
            parent = None
            if dv > 0:
                for d, u in sorted(incoming[v]):
                    ur, uc = divmod(u, q.wid)
                    du = dist_of(ur + q.r0, uc + q.c0)
                    if du == dv - 1:
                        parent = (d, u)
                        break
            if parent is None:
                roots.append(v)
            else:
                children[parent[1]].append((gf.opposite(parent[0]), v))
    for v in range(q.n):
        children[v].sort()
    return roots, children


def build_chunks_bfs(g: gf.GridGraph, dist_handle, h: int,
                     name: str = "bfs", stats: BfsStats | None = None):
    """Cut each cluster's BFS forest into chunks of height < 2^h.

    Chunk record: root z-index (8 B), root distance (8 B), vertex count
    (4 B), then one child-direction mask byte per vertex in preorder.
    The address list pairs each chunk's byte offset with its root distance.
    """
    from .sssp import read_distances
    disk = g.disk
    scheme = cl.ClusterScheme(g.rows, g.cols, h)
    dists = read_distances(disk, dist_handle)
    z_of, _ = gf.z_tables(g.rows, g.cols)
    span = 1 << h

    c_handle = disk.open_file(name + ".C")
    a_handle = disk.open_file(name + ".A")
    c_stream = disk.append_stream(c_handle)
    a_stream = disk.append_stream(a_handle)
    offset = 0
    count = 0

    def dist_of(r, c):
        dv = dists[int(z_of[r * g.cols + c])]
        return None if dv == gf.ABSENT else dv

    for q in cl.iterate_clusters(g, scheme):
        roots, children = _cluster_forest(g, q, dist_of)
        # a child at chunk depth 2^h starts a fresh chunk
        owner = [None] * q.n              # vertex -> (chunk root, chunk depth)
        chunk_roots = []
        for root in roots:
            owner[root] = (root, 0)
            chunk_roots.append(root)
            stack = [root]
            while stack:
                v = stack.pop()
                croot, cd = owner[v]
                for _, u in children[v]:
                    if cd + 1 >= span:
                        owner[u] = (u, 0)
                        chunk_roots.append(u)
                    else:
                        owner[u] = (croot, cd + 1)
                    stack.append(u)

        for croot in chunk_roots:
            # iterative preorder restricted to this chunk, clockwise children
            masks = []
            stack = [croot]
            while stack:
                v = stack.pop()
                kids = [u for _, u in children[v] if owner[u][0] == croot]
                mask = sum(1 << d for d, u in children[v]
                           if owner[u][0] == croot)
                masks.append(mask)
                stack.extend(reversed(kids))
            rr, rc = divmod(croot, q.wid)
            rz = int(z_of[(rr + q.r0) * g.cols + (rc + q.c0)])
            rdist = dist_of(rr + q.r0, rc + q.c0)
            rec = CHUNK_HDR.pack(rz, rdist, len(masks)) + bytes(masks)
            c_stream.write(rec)
            a_stream.write(struct.pack("<QQ", offset, rdist))
            offset += len(rec)
            count += 1
    c_stream.close()
    a_stream.close()
    if stats is not None:
        stats.chunk_count = count
    return c_handle, a_handle, count


# ---------------------------------------------------------------------------
# Address sorting


def sort_addresses(disk: SimDisk, a_handle, count: int, method: str = "merge",
                   name: str = "bfs.A.sorted"):
    """Stable ascending sort of (offset, distance) pairs by distance.

    ``merge`` loads and sorts in memory; ``radix`` runs two stable counting
    passes over the 16-bit halves of the distance.  Both write the same file.
    """
    raw = disk.read_direct(a_handle, 0, count * 16)
    pairs = [struct.unpack_from("<QQ", raw, i * 16) for i in range(count)]
    if method == "merge":
        pairs.sort(key=lambda p: p[1])
    elif method == "radix":
        for shift in (0, 16, 32, 48):
            buckets: dict[int, list] = {}
            for p in pairs:
                buckets.setdefault((p[1] >> shift) & 0xFFFF, []).append(p)
            pairs = [p for k in sorted(buckets) for p in buckets[k]]
    else:
        raise BfsError("unknown sort method %r" % method)
    out = disk.open_file(name)
    stream = disk.append_stream(out)
    for off, dist in pairs:
        stream.write(struct.pack("<QQ", off, dist))
    stream.close()
    return out


# ---------------------------------------------------------------------------
# Chunk decoding and emission


def decode_chunk(g: gf.GridGraph, raw: bytes):
    """Preorder (z-index, distance) pairs of one chunk record."""
    rz, rdist, cnt = CHUNK_HDR.unpack_from(raw)
    masks = raw[CHUNK_HDR.size:CHUNK_HDR.size + cnt]
    z_of, cell_of_z = gf.z_tables(g.rows, g.cols)
    cell = int(cell_of_z[rz])
    out = []
    stack = [(cell // g.cols, cell % g.cols, rdist)]
    i = 0
    while stack:
        r, c, dv = stack.pop()
        mask = masks[i]
        i += 1
        out.append((int(z_of[r * g.cols + c]), dv))
        kids = []
        for d in range(8):
            if mask >> d & 1:
                dr, dc = gf.DIR_OFFSETS[d]
                kids.append((r + dr, c + dc, dv + 1))
        stack.extend(reversed(kids))
    return out


def emit_bfs_order(g: gf.GridGraph, c_handle, a_sorted, count: int, h: int,
                   out_name: str = "bfsorder.out"):
    """Write the traversal order: chunks arrive by root distance; vertices
    wait in a rotating pool of per-distance stacks until every chunk that
    could contribute a smaller distance has been seen."""
    disk = g.disk
    window = 2 * (1 << h) + 2
    stacks = [FileStack(disk, disk.open_file("%s.stk%d" % (out_name, i)))
              for i in range(window)]
    out = disk.open_file(out_name)
    stream = disk.append_stream(out)
    gf.write_header_via(stream, disk, gf.Z_ORDER, "vertex_seq",
                        g.rows, g.cols, 0)
    emitted = 0
    flushed = -1            # all distances <= flushed are already emitted

    def flush_to(d):
        nonlocal flushed, emitted
        for dd in range(flushed + 1, d + 1):
            st = stacks[dd % window]
            while len(st):
                stream.write(st.pop())
                emitted += 1
        flushed = max(flushed, d)

    reader = disk.scan_reader(a_sorted)
    max_dist = -1
    for _ in range(count):
        off, rdist = struct.unpack("<QQ", reader.read(16))
        flush_to(rdist - 1)
        hdr = disk.read_direct(c_handle, off, CHUNK_HDR.size)
        _, _, cnt = CHUNK_HDR.unpack(hdr)
        raw = hdr + disk.read_direct(c_handle, off + CHUNK_HDR.size, cnt)
        for z, dv in decode_chunk(g, raw):
            stacks[dv % window].push(z.to_bytes(8, "little"))
            max_dist = max(max_dist, dv)
    flush_to(max_dist)
    stream.close()
    # count patched afterwards; header rewrite is one block
    hdr = struct.Struct("<4sHBBIIQ").pack(
        gf.MAGIC, gf.VERSION, 2, 5, g.rows, g.cols, emitted)
    disk.write_direct(out, 0, hdr)
    return out, emitted


def bfs_order(g: gf.GridGraph, s_cell: tuple[int, int], h: int,
              name: str = "bfs", sort_method: str = "merge",
              update_in_place: bool = False,
              stats: BfsStats | None = None):
    """Full pipeline: distances, chunks, sorted addresses, emission."""
    dist_handle, scheme = bfs_distances(g, s_cell, h, out_name=name + ".dist",
                                        update_in_place=update_in_place)
    c_handle, a_handle, count = build_chunks_bfs(g, dist_handle, h, name=name,
                                                 stats=stats)
    a_sorted = sort_addresses(g.disk, a_handle, count, method=sort_method,
                              name=name + ".A.sorted")
    out, emitted = emit_bfs_order(g, c_handle, a_sorted, count, h,
                                  out_name=name + ".order")
    return out, emitted, dist_handle


def read_order(disk: SimDisk, handle) -> list[int]:
    g = gf.open_grid(disk, handle)
    raw = disk.raw_bytes(handle)
    off = g.payload_offset
    return [int.from_bytes(raw[off + 8 * i: off + 8 * (i + 1)], "little")
            for i in range(g.count)]
