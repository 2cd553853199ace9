import pytest

from gridscan import gridfmt as gf, oracle, bfs, sssp

from conftest import make_disk, make_graph


def snake_edges(rows, cols):
    """Directed boustrophedon path visiting every cell."""
    edges = {}
    for r in range(rows):
        for c in range(cols):
            spec = {}
            if r % 2 == 0:
                if c + 1 < cols:
                    spec[gf.E] = 1
                elif r + 1 < rows:
                    spec[gf.S] = 1
            else:
                if c > 0:
                    spec[gf.W] = 1
                elif r + 1 < rows:
                    spec[gf.S] = 1
            edges[(r, c)] = spec
    return edges


def test_bucket_queue_min():
    q = bfs.BucketQueue(2)
    for k in (3, 1, 2):
        q.insert(k, "x%d" % k)
    assert q.extract_min() == (1, "x1")


def test_bucket_queue_far_redistribution():
    q = bfs.BucketQueue(1)          # span 2, band 4
    q.insert(3, "far")              # dprime = 0, lands in a far list
    assert q.far[1] == [(3, "far")]
    assert q.extract_min() == (3, "far")
    assert q.cur == 3


def test_bucket_queue_band_error():
    q = bfs.BucketQueue(1)
    q.insert(1, "a")
    q.extract_min()
    with pytest.raises(bfs.BfsError):
        q.insert(0, "late")
    with pytest.raises(bfs.BfsError):
        q.insert(1 + 4, "early")


def test_bucket_queue_reinsert_fresh_first():
    q = bfs.BucketQueue(2)
    q.insert(5, "c")
    q.insert(3, "c")                # decreased key, stale copy remains
    k, it = q.extract_min()
    assert (k, it) == (3, "c")
    assert q.extract_min() == (5, "c")  # stale; caller discards


def dist_map(d, handle, g):
    vals = sssp.read_distances(d, handle)
    out = {}
    for z, v in enumerate(vals):
        r, c = gf.index_to_coord(gf.Z_ORDER, g.rows, g.cols, z)
        out[(r - 1, c - 1)] = None if v == gf.ABSENT else v
    return out


@pytest.mark.parametrize("seed,h", [(0, 1), (1, 2), (2, 2), (3, 3)])
def test_bfs_distances_match_oracle(seed, h):
    d = make_disk()
    g = gf.generate(d, 32, 32, "unit_directed", seed=seed, density=0.55)
    handle, _ = bfs.bfs_distances(g, (3, 4), h)
    got = dist_map(d, handle, g)
    expect = oracle.bfs_distances(g, (3, 4))
    for v in expect:
        e = None if expect[v] == float("inf") else expect[v]
        assert got[v] == e


def test_bfs_distance_row_path():
    d = make_disk()
    g = make_graph(d, 1, 6, "unweighted",
                   {(0, c): {gf.E: 1} for c in range(5)})
    handle, _ = bfs.bfs_distances(g, (0, 0), 1)
    got = dist_map(d, handle, g)
    assert got == {(0, c): c for c in range(6)}


def test_chunks_partition_reachable():
    d = make_disk()
    g = gf.generate(d, 16, 16, "unit_directed", seed=4, density=0.6)
    handle, _ = bfs.bfs_distances(g, (0, 0), 2, out_name="x.dist")
    c_handle, a_handle, count = bfs.build_chunks_bfs(g, handle, 2)
    expect = oracle.bfs_distances(g, (0, 0))
    reach = {v for v in expect if expect[v] != float("inf")}
    seen = []
    raw = d.raw_bytes(c_handle)
    off = 0
    for _ in range(count):
        _, rdist, cnt = bfs.CHUNK_HDR.unpack_from(raw, off)
        rec = raw[off:off + bfs.CHUNK_HDR.size + cnt]
        depths = set()
        for z, dv in bfs.decode_chunk(g, rec):
            r, c = gf.index_to_coord(gf.Z_ORDER, 16, 16, z)
            seen.append((r - 1, c - 1))
            assert expect[(r - 1, c - 1)] == dv
            depths.add(dv)
        assert max(depths) - min(depths) < 4     # span < 2^h
        off += bfs.CHUNK_HDR.size + cnt
    assert sorted(seen) == sorted(reach)
    assert len(seen) == len(set(seen))


def test_tall_path_is_cut():
    d = make_disk()
    g = make_graph(d, 4, 4, "unweighted", snake_edges(4, 4))
    handle, _ = bfs.bfs_distances(g, (0, 0), 2, out_name="x.dist")
    _, _, count = bfs.build_chunks_bfs(g, handle, 2)
    assert count == 4              # 16-vertex path cut at depth multiples of 4


def test_sort_methods_agree():
    d = make_disk()
    g = gf.generate(d, 32, 32, "unit_directed", seed=9, density=0.6)
    handle, _ = bfs.bfs_distances(g, (0, 0), 2, out_name="x.dist")
    c_handle, a_handle, count = bfs.build_chunks_bfs(g, handle, 2)
    s1 = bfs.sort_addresses(d, a_handle, count, "merge", name="A1")
    s2 = bfs.sort_addresses(d, a_handle, count, "radix", name="A2")
    assert d.raw_bytes(s1) == d.raw_bytes(s2)


@pytest.mark.parametrize("seed", range(4))
def test_full_pipeline_order_valid(seed):
    d = make_disk()
    g = gf.generate(d, 32, 32, "unit_directed", seed=seed + 20, density=0.55)
    out, emitted, _ = bfs.bfs_order(g, (1, 1), 2)
    order = bfs.read_order(d, out)
    assert len(order) == emitted
    expect = oracle.bfs_distances(g, (1, 1))
    reach = {v for v in expect if expect[v] != float("inf")}
    coords = [tuple(x - 1 for x in gf.index_to_coord(gf.Z_ORDER, 32, 32, z))
              for z in order]
    assert sorted(coords) == sorted(reach)
    dists = [expect[v] for v in coords]
    assert dists == sorted(dists)


def test_update_in_place_same_output():
    d1 = make_disk()
    g1 = gf.generate(d1, 16, 16, "unit_directed", seed=7, density=0.6)
    o1, _, _ = bfs.bfs_order(g1, (0, 0), 2)
    d2 = make_disk()
    g2 = gf.generate(d2, 16, 16, "unit_directed", seed=7, density=0.6)
    o2, _, _ = bfs.bfs_order(g2, (0, 0), 2, update_in_place=True)
    assert d1.raw_bytes(o1) == d2.raw_bytes(o2)


def test_chunk_count_linear():
    for side in (16, 32):
        d = make_disk()
        g = gf.generate(d, side, side, "unit_directed", seed=1, density=0.6)
        handle, _ = bfs.bfs_distances(g, (0, 0), 2, out_name="x.dist")
        stats = bfs.BfsStats()
        bfs.build_chunks_bfs(g, handle, 2, stats=stats)
        assert stats.chunk_count <= 4 * side * side / 4
