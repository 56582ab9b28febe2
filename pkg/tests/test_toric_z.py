import numpy as np
import pytest

from topoprobe.lattice import FieldConfig, all_up, apply_vertex_flips, plaquette_products
from topoprobe.stats import chi_square_gof
from topoprobe.toric import ToricField, VertexGroupElement, field_preset
from topoprobe.toric_z import (
    SigmaZOracle,
    loop_flip_mask,
    sample_sigma_z,
    sigma_z_probability,
    vertex_loops,
)


def loop_codes(geom):
    loops = vertex_loops(geom)
    weights = 1 << np.arange(geom.bond_count, dtype=np.int64)
    return (loops.astype(np.int64) * weights).sum(axis=1)


def test_vertex_loops_match_flip_action(geom3):
    up = all_up(geom3, "z")
    loops = vertex_loops(geom3)
    for mask in range(0, 1 << 8, 37):  # spot-check the canonical range
        g = VertexGroupElement(3, mask << 1)
        flipped = apply_vertex_flips(geom3, up, g.bits)
        assert np.array_equal(loop_flip_mask(geom3, g), flipped.values < 0)
    assert loops.shape == (256, 18)


def test_beta_zero_probabilities(geom2):
    lam = field_preset("uniform(1.0)", 2)
    oracle = SigmaZOracle(geom2, ToricField(lam, 0.0))
    codes = loop_codes(geom2)
    for code in codes:
        assert sigma_z_probability(oracle, int(code)) == pytest.approx(1 / 8)
    # any non-loop flip set has zero probability at beta = 0
    non_loops = sorted(set(range(256)) - set(codes.tolist()))
    for code in non_loops[:20]:
        assert sigma_z_probability(oracle, code) == 0.0


def test_full_table_normalisation(geom2, rng):
    for beta, lam in [
        (0.4, field_preset("uniform(1.0)", 2)),
        (0.3, FieldConfig(rng.uniform(-1, 1, 8))),
        (0.8, field_preset("half-zero", 2)),
    ]:
        oracle = SigmaZOracle(geom2, ToricField(lam, beta))
        table = oracle.full_table()
        assert table.sum() == pytest.approx(1.0, abs=1e-10)
        assert (table >= 0).all()


def test_oracle_size_limits(geom4):
    lam = field_preset("uniform(1.0)", 4)
    with pytest.raises(ValueError):
        SigmaZOracle(geom4, ToricField(lam, 0.1))


def test_sampler_beta_zero_stays_on_constraint_manifold(geom2):
    lam = field_preset("uniform(1.0)", 2)
    ds = sample_sigma_z(2, lam, [0.0], 500, seed=4, therm_sweeps=30, stride=1)
    assert (plaquette_products(geom2, ds.values) == 1).all()
    assert ds.basis == "z"


def test_sampler_large_beta_uniform(geom2):
    # a strong uniform field polarises along x; z outcomes become uniform and
    # each plaquette is violated half the time
    lam = field_preset("uniform(1.0)", 2)
    ds = sample_sigma_z(2, lam, [20.0], 4000, seed=6, therm_sweeps=60, stride=2)
    violation_rate = (plaquette_products(geom2, ds.values) < 0).mean()
    assert abs(violation_rate - 0.5) < 0.05


def test_sampler_histogram_matches_table(geom2):
    lam = field_preset("uniform(1.0)", 2)
    oracle = SigmaZOracle(geom2, ToricField(lam, 0.3))
    ds = sample_sigma_z(2, lam, [0.3], 12_000, seed=11, therm_sweeps=50, stride=3)
    codes = ((ds.values < 0).astype(np.int64) << np.arange(8)).sum(axis=1)
    counts = np.bincount(codes, minlength=256)
    _, _, p = chi_square_gof(counts, oracle.full_table())
    assert p > 0.01


def test_sampler_rejects_large_lattices():
    lam = field_preset("uniform(1.0)", 8)
    with pytest.raises(ValueError):
        sample_sigma_z(8, lam, [0.1], 10, seed=1)


def test_sampler_determinism():
    lam = field_preset("random(3)", 3)
    a = sample_sigma_z(3, lam, [0.2], 20, seed=9, therm_sweeps=10, stride=1)
    b = sample_sigma_z(3, lam, [0.2], 20, seed=9, therm_sweeps=10, stride=1)
    assert np.array_equal(a.values, b.values)


def test_incremental_loop_sum_stays_consistent(geom3):
    # run a short chain at n = 3 and recompute the loop sum from scratch
    from topoprobe.rng import stream_key_np
    from topoprobe.toric_z import SigmaZChain, _LoopSum

    lam = field_preset("random(12)", 3)
    tf = ToricField(lam, 0.35)
    chain = SigmaZChain(geom3, tf, stream_key_np(1, 3, 0, 0, np.arange(3)))
    for _ in range(400):
        chain.step()
    fresh = _LoopSum(geom3, tf)
    fresh.x = vertex_loops(geom3) ^ chain.flips[None, :]
    fresh._recompute()
    assert chain.loop_sum.total == pytest.approx(fresh.total, rel=1e-9)
