import numpy as np
import pytest

from topoprobe.igt import (
    IgtParams,
    acceptance_probability,
    enumerate_configs,
    exact_igt_oracle,
    igt_energies,
    igt_energy,
    sample_igt,
    sample_igt_grid,
    single_flip_delta_e,
)
from topoprobe.lattice import SpinConfig, all_up, apply_vertex_flips, build_geometry
from topoprobe.stats import chi_square_gof


def test_energy_trivial_cases(geom4):
    up = all_up(geom4, "z")
    assert igt_energy(geom4, up) == -16
    one = up.values.copy()
    one[7] = -1
    assert igt_energy(geom4, SpinConfig(one, "z")) == -12


def test_energy_against_brute_force(geom2):
    # every one of the 256 configs against directly multiplied products
    configs = enumerate_configs(2)
    energies = igt_energies(geom2, configs)
    for row, e in zip(configs, energies):
        direct = 0
        for p in range(4):
            direct -= np.prod(row[geom2.plaquette_bonds[p]])
        assert e == direct
        assert abs(e) <= 4
        assert (e + 4) % 4 == 0


def test_energy_needs_z_basis(geom2):
    with pytest.raises(ValueError):
        igt_energy(geom2, all_up(geom2, "x"))


def test_acceptance_function(geom3, rng):
    assert acceptance_probability(-4, 0.7) == 1.0
    assert acceptance_probability(0, 0.7) == 1.0
    assert acceptance_probability(4, 0.5) == pytest.approx(np.exp(-2.0))
    # single-bond flips only ever change E by -4, 0, +4 (two plaquettes each)
    seen = set()
    for _ in range(50):
        config = SpinConfig(rng.choice([-1, 1], geom3.bond_count).astype(np.int8), "z")
        bond = int(rng.integers(geom3.bond_count))
        delta = single_flip_delta_e(geom3, config, bond)
        flipped = config.values.copy()
        flipped[bond] = -flipped[bond]
        assert delta == igt_energy(geom3, SpinConfig(flipped, "z")) - igt_energy(geom3, config)
        seen.add(delta)
    assert seen <= {-4, 0, 4}


def test_params_validation():
    with pytest.raises(ValueError):
        IgtParams(beta=-0.1, n=4)
    with pytest.raises(ValueError):
        IgtParams(beta=1.0, n=4, j=2.0)
    with pytest.raises(ValueError):
        IgtParams(beta=1.0, n=1)


def test_oracle_limits_and_moments():
    stats = exact_igt_oracle(2, 0.0)
    assert stats.mean_energy == pytest.approx(0.0, abs=1e-12)
    assert sum(stats.energy_histogram.values()) == pytest.approx(1.0, abs=1e-12)
    cold = exact_igt_oracle(2, 10.0)
    assert cold.mean_energy == pytest.approx(-4.0, abs=1e-3)
    with pytest.raises(ValueError):
        exact_igt_oracle(4, 1.0)


def test_oracle_ground_state_mass():
    # mass at E = -4 equals (count of zero-violation configs) e^{4 beta} / Z
    beta = 1.0
    configs = enumerate_configs(2)
    energies = igt_energies(build_geometry(2), configs)
    z = np.exp(-beta * energies).sum()
    expected = (energies == -4).sum() * np.exp(4.0 * beta) / z
    stats = exact_igt_oracle(2, beta)
    assert stats.energy_histogram[-4] == pytest.approx(expected, rel=1e-12)
    assert (energies == -4).sum() == 32  # gauge orbit size 2^(n^2+1)


def test_sampler_reproducible_and_labeled():
    a = sample_igt_grid(3, [0.2, 0.8], 40, seed=11, therm_sweeps=20, stride=2)
    b = sample_igt_grid(3, [0.2, 0.8], 40, seed=11, therm_sweeps=20, stride=2)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.labels, b.labels)
    assert len(a) == 80
    assert a.meta["beta_grid"] == [0.2, 0.8]
    c = sample_igt_grid(3, [0.2, 0.8], 40, seed=12, therm_sweeps=20, stride=2)
    assert not np.array_equal(a.values, c.values)


def test_single_beta_wrapper_matches_grid():
    a = sample_igt(IgtParams(0.5, 3), 30, seed=4, therm_sweeps=10)
    b = sample_igt_grid(3, [0.5], 30, seed=4, therm_sweeps=10)
    assert np.array_equal(a.values, b.values)


def test_infinite_temperature_mean_energy(geom4):
    # plaquette products average to zero at beta = 0
    ds = sample_igt(IgtParams(0.0, 4), 10_000, seed=6, therm_sweeps=20)
    energies = igt_energies(geom4, ds.values)
    stderr = 4.0 / np.sqrt(len(ds))  # Var(E) = n^2 = 16 at infinite temperature
    assert abs(energies.mean()) < 4 * stderr


def test_energy_gauge_invariance(geom3, rng):
    for _ in range(10):
        config = SpinConfig(rng.choice([-1, 1], geom3.bond_count).astype(np.int8), "z")
        mask = rng.random(geom3.plaquette_count) < 0.5
        moved = apply_vertex_flips(geom3, config, mask)
        assert igt_energy(geom3, moved) == igt_energy(geom3, config)


def test_sampler_against_oracle_light(geom2):
    # reduced version of the stationarity gate (full version in acceptance)
    ds = sample_igt(IgtParams(0.5, 2), 20_000, seed=3, stride=3)
    energies = igt_energies(geom2, ds.values)
    stats = exact_igt_oracle(2, 0.5)
    levels = sorted(stats.energy_histogram)
    counts = np.array([(energies == e).sum() for e in levels])
    probs = np.array([stats.energy_histogram[e] for e in levels])
    _, _, p = chi_square_gof(counts, probs)
    assert p > 0.01


def test_chain_splitting_is_deterministic():
    merged = sample_igt_grid(2, [0.4], 40, seed=9, therm_sweeps=10, chains=2)
    assert len(merged) == 40
    assert merged.meta["chains"] == 2
    again = sample_igt_grid(2, [0.4], 40, seed=9, therm_sweeps=10, chains=2)
    assert np.array_equal(merged.values, again.values)
    with pytest.raises(ValueError):
        sample_igt_grid(2, [0.4], 41, seed=9, chains=2)
