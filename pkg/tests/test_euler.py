import pytest

from gridscan import gridfmt as gf, oracle, euler

from conftest import make_disk, make_graph


def tour_coords(d, out, g):
    cell_of_z = gf.z_tables(g.rows, g.cols)[1]
    tour = []
    for z in euler.read_tour(d, out):
        cell = int(cell_of_z[z])
        tour.append((cell // g.cols, cell % g.cols))
    return tour


def check_closure(tour, root, n):
    assert tour[0] == tour[-1] == root
    assert len(tour) == 2 * (n - 1) + 1
    counts = {}
    for a, b in zip(tour, tour[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
        counts[(a, b)] = counts.get((a, b), 0) + 1
    assert all(v == 1 for v in counts.values())
    assert all((b, a) in counts for a, b in counts)


def test_two_vertex_tree():
    d = make_disk()
    g = make_graph(d, 1, 2, "weighted_undirected", {(0, 0): {gf.E: 1}})
    out = euler.euler_tour(g, 1, root=(0, 0))
    assert tour_coords(d, out, g) == [(0, 0), (0, 1), (0, 0)]


def test_star_tour():
    d = make_disk()
    # center (1,1) joined to all 8 neighbours, each edge stored owner-side
    g = make_graph(d, 3, 3, "weighted_undirected",
                   {(1, 1): {gf.E: 1, gf.SE: 1, gf.S: 1, gf.SW: 1},
                    (0, 0): {gf.SE: 1}, (0, 1): {gf.S: 1},
                    (0, 2): {gf.SW: 1}, (1, 0): {gf.E: 1}})
    out = euler.euler_tour(g, 2, root=(1, 1))
    tour = tour_coords(d, out, g)
    assert len(tour) == 17
    assert tour[0] == tour[-1] == (1, 1)
    assert tour[::2] == [(1, 1)] * 9          # back at the center every step
    leaves = [t for t in tour if t != (1, 1)]
    assert sorted(leaves) == sorted(set(leaves))
    # leaves appear clockwise, starting just after the reverse of the
    # fictitious northwest arrival
    assert leaves == [(2, 1), (2, 0), (1, 0), (0, 0),
                      (0, 1), (0, 2), (1, 2), (2, 2)]
    assert oracle.euler_tour(g, (1, 1)) == tour


def test_single_vertex():
    d = make_disk()
    g = make_graph(d, 1, 1, "weighted_undirected", {})
    out = euler.euler_tour(g, 1)
    assert tour_coords(d, out, g) == [(0, 0)]


@pytest.mark.parametrize("rows,cols,seed,h", [
    (8, 8, 0, 1), (16, 16, 1, 2), (32, 32, 2, 2), (32, 32, 3, 3),
    (64, 64, 4, 2), (13, 21, 5, 2), (1, 16, 6, 1), (7, 3, 7, 3),
])
def test_matches_oracle_tour(rows, cols, seed, h):
    d = make_disk()
    g = gf.generate(d, rows, cols, "tree", seed=seed)
    root = (rows // 2, cols // 3)
    out = euler.euler_tour(g, h, root=root)
    got = tour_coords(d, out, g)
    assert got == oracle.euler_tour(g, root)
    check_closure(got, root, g.n)


def test_default_root_is_smallest_z():
    d = make_disk()
    g = gf.generate(d, 8, 8, "tree", seed=9)
    out = euler.euler_tour(g, 2)
    assert tour_coords(d, out, g)[0] == (0, 0)


def test_entry_exit_injective():
    d = make_disk()
    g = gf.generate(d, 16, 16, "tree", seed=3)
    maps = euler.build_entry_exit(g, 2, root=(0, 0))
    for ckey, m in maps.items():
        exits = [e for e in m.values() if e is not None]
        assert len(exits) == len(set(exits)), ckey
        assert len(m) <= 12 * (1 << 2)


def test_leaf_bounce():
    # entering the far cluster, the walk sweeps its whole subtree (out to the
    # leaf and back) before exiting by the reverse of the entry edge
    d = make_disk()
    g = make_graph(d, 1, 4, "weighted_undirected",
                   {(0, c): {gf.E: 1} for c in range(3)})
    maps = euler.build_entry_exit(g, 1, root=(0, 0))
    m = maps[(0, 1)]
    assert m[((0, 2), gf.E)] == ((0, 2), gf.W)


def test_terminal_only_in_root_cluster():
    d = make_disk()
    g = gf.generate(d, 16, 16, "tree", seed=5)
    root = (7, 7)
    maps = euler.build_entry_exit(g, 2, root=root)
    terminals = [(ckey, k) for ckey, m in maps.items()
                 for k, v in m.items() if v is None]
    assert len(terminals) == 1
    assert terminals[0][0] == (7 >> 2, 7 >> 2)


def test_non_tree_rejected():
    d = make_disk()
    g = make_graph(d, 2, 2, "weighted_undirected",
                   {(0, 0): {gf.E: 1, gf.S: 1},
                    (0, 1): {gf.S: 1}, (1, 0): {gf.E: 1}})
    with pytest.raises(euler.EulerError):
        euler.euler_tour(g, 1)


def test_disconnected_rejected():
    d = make_disk()
    g = make_graph(d, 1, 4, "weighted_undirected",
                   {(0, 0): {gf.E: 1}, (0, 2): {gf.E: 1}})
    with pytest.raises(euler.EulerError):
        euler.euler_tour(g, 1)


def test_encoding_round_trip():
    d = make_disk()
    g = gf.generate(d, 32, 32, "tree", seed=11)
    stats = euler.EulerStats()
    out = euler.euler_tour(g, 2, root=(0, 0), stats=stats)
    tour = tour_coords(d, out, g)
    check_closure(tour, (0, 0), g.n)
    assert stats.segments >= 1
