import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoprobe.lattice import (
    SpinConfig,
    all_up,
    apply_plaquette_flips,
    apply_vertex_flips,
    build_geometry,
    plaquette_product,
    vertex_product,
    violated_plaquettes,
)


def mask_of(bits, size):
    m = np.zeros(size, dtype=bool)
    m[list(bits)] = True
    return m


def test_basic_counts():
    g = build_geometry(2)
    assert g.bond_count == 8
    assert g.plaquette_bonds.shape == (4, 4)
    assert g.vertex_bonds.shape == (4, 4)
    assert build_geometry(4).bond_count == 32  # 2 x 4 x 4 spins


def test_small_n_rejected():
    with pytest.raises(ValueError):
        build_geometry(1)


@pytest.mark.parametrize("n", list(range(2, 33)))
def test_incidence_invariants(n):
    g = build_geometry(n)
    counts = np.zeros(g.bond_count, dtype=int)
    for p in range(g.plaquette_count):
        row = g.plaquette_bonds[p]
        assert len(set(row.tolist())) == 4
        counts[row] += 1
    assert (counts == 2).all()  # torus relation: XOR of all plaquettes empty
    counts[:] = 0
    for s in range(g.plaquette_count):
        row = g.vertex_bonds[s]
        assert len(set(row.tolist())) == 4
        counts[row] += 1
    assert (counts == 2).all()


def test_bond_maps_are_inverse_of_cell_maps():
    g = build_geometry(5)
    for b in range(g.bond_count):
        assert sum(b in g.plaquette_bonds[p] for p in g.bond_plaquettes[b]) == 2
        assert sum(b in g.vertex_bonds[s] for s in g.bond_vertices[b]) == 2


def test_plaquette_product_cases(geom4):
    up = all_up(geom4, "z")
    assert plaquette_product(geom4, up, 0) == 1
    flipped = up.values.copy()
    flipped[geom4.plaquette_bonds[3][0]] = -1
    assert plaquette_product(geom4, SpinConfig(flipped, "z"), 3) == -1


def test_plaquette_product_documented_indexing(geom2):
    # independent recomputation from the documented layout:
    # h(r, c) = r*n + c, v(r, c) = n^2 + r*n + c,
    # plaquette p(r, c) uses h(r,c), v(r,(c+1)%n), h((r+1)%n,c), v(r,c)
    config = SpinConfig(np.array([1, -1, -1, 1, 1, 1, -1, -1]), "z")
    n = 2
    r, c = 0, 0
    bonds = [r * n + c, n * n + r * n + (c + 1) % n, ((r + 1) % n) * n + c, n * n + r * n + c]
    expected = int(np.prod(config.values[bonds]))
    assert plaquette_product(geom2, config, 0) == expected


def test_vertex_product_cases(geom3):
    up = all_up(geom3, "x")
    assert vertex_product(geom3, up, 4) == 1
    flipped = up.values.copy()
    flipped[geom3.vertex_bonds[4][2]] = -1
    assert vertex_product(geom3, SpinConfig(flipped, "x"), 4) == -1
    with pytest.raises(ValueError):
        vertex_product(geom3, all_up(geom3, "z"), 0)


def test_plaquette_flips_preserve_all_vertex_products(geom2):
    # gauge invariance checked by exhaustive flip enumeration at n = 2
    up = all_up(geom2, "x")
    for mask_bits in range(16):
        mask = np.array([(mask_bits >> k) & 1 for k in range(4)], dtype=bool)
        config = apply_plaquette_flips(geom2, up, mask)
        for s in range(4):
            assert vertex_product(geom2, config, s) == 1


def test_flip_identities(geom2):
    up = all_up(geom2, "x")
    same = apply_plaquette_flips(geom2, up, np.zeros(4, dtype=bool))
    assert np.array_equal(same.values, up.values)
    full = apply_plaquette_flips(geom2, up, np.ones(4, dtype=bool))
    assert np.array_equal(full.values, up.values)  # every bond flipped twice
    single = apply_plaquette_flips(geom2, up, mask_of([0], 4))
    flipped_bonds = np.flatnonzero(single.values < 0)
    assert sorted(flipped_bonds.tolist()) == sorted(geom2.plaquette_bonds[0].tolist())


def test_vertex_flip_identities(geom2):
    up = all_up(geom2, "z")
    assert np.array_equal(apply_vertex_flips(geom2, up, np.zeros(4, bool)).values, up.values)
    assert np.array_equal(apply_vertex_flips(geom2, up, np.ones(4, bool)).values, up.values)
    single = apply_vertex_flips(geom2, up, mask_of([2], 4))
    assert sorted(np.flatnonzero(single.values < 0).tolist()) == sorted(
        geom2.vertex_bonds[2].tolist()
    )
    # exhaustive n = 2: distinct masks up to complement give distinct configs
    seen = set()
    for mask_bits in range(16):
        mask = np.array([(mask_bits >> k) & 1 for k in range(4)], dtype=bool)
        seen.add(tuple(apply_vertex_flips(geom2, up, mask).values.tolist()))
    assert len(seen) == 8


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 4),
    seed=st.integers(0, 2**31),
)
def test_flips_compose_by_xor(n, seed):
    g = build_geometry(n)
    gen = np.random.default_rng(seed)
    config = SpinConfig(gen.choice([-1, 1], g.bond_count).astype(np.int8), "x")
    m1 = gen.random(g.plaquette_count) < 0.5
    m2 = gen.random(g.plaquette_count) < 0.5
    composed = apply_plaquette_flips(g, apply_plaquette_flips(g, config, m1), m2)
    direct = apply_plaquette_flips(g, config, m1 ^ m2)
    assert np.array_equal(composed.values, direct.values)


def test_violated_plaquettes(geom2, geom3):
    up = all_up(geom3, "z")
    assert violated_plaquettes(geom3, up).size == 0
    one = up.values.copy()
    one[5] = -1
    violated = violated_plaquettes(geom3, SpinConfig(one, "z"))
    assert sorted(violated.tolist()) == sorted(geom3.bond_plaquettes[5].tolist())
    # enumeration at n = 2: violation count is even for every configuration
    for code in range(256):
        values = 1 - 2 * np.array([(code >> k) & 1 for k in range(8)], dtype=np.int8)
        assert violated_plaquettes(geom2, SpinConfig(values, "z")).size % 2 == 0


def test_gauge_invariance_of_violations(geom2):
    gen = np.random.default_rng(3)
    for _ in range(25):
        config = SpinConfig(gen.choice([-1, 1], 8).astype(np.int8), "z")
        base = violated_plaquettes(geom2, config)
        for mask_bits in range(16):
            mask = np.array([(mask_bits >> k) & 1 for k in range(4)], dtype=bool)
            moved = apply_vertex_flips(geom2, config, mask)
            assert np.array_equal(violated_plaquettes(geom2, moved), base)


def test_config_validation(geom2):
    with pytest.raises(ValueError):
        SpinConfig(np.array([1, 2, 1, 1, 1, 1, 1, 1]), "z")
    with pytest.raises(ValueError):
        SpinConfig(np.ones(8, dtype=np.int8), "y")
    with pytest.raises(IndexError):
        plaquette_product(geom2, all_up(geom2, "z"), 4)
    with pytest.raises(ValueError):
        plaquette_product(geom2, SpinConfig(np.ones(6, np.int8), "z"), 0)


def test_values_are_frozen(geom2):
    up = all_up(geom2, "z")
    with pytest.raises(ValueError):
        up.values[0] = -1
