import numpy as np
import pytest

from topoprobe.fidelity import (
    ChiFCurve,
    chi_f_curve_mc,
    chi_f_exact,
    chi_f_mc,
    chi_f_peak,
)
from topoprobe.lattice import FieldConfig, all_up, apply_plaquette_flips, build_geometry
from topoprobe.toric import PlaquetteGroupElement, field_preset


def test_zero_field_zero_susceptibility():
    lam = FieldConfig(np.zeros(8))
    assert chi_f_exact(2, lam, 0.7) == 0.0
    chi, err = chi_f_mc(2, lam, 0.7, 64, seed=1)
    assert chi == 0.0 and err == 0.0


def test_beta_zero_quarter_variance(geom2):
    # uniform weights over the eight enumerated field energies
    lam = field_preset("uniform(1.0)", 2)
    up = all_up(geom2, "x")
    energies = []
    for mask in range(8):
        h = PlaquetteGroupElement(2, mask << 1)
        config = apply_plaquette_flips(geom2, up, h.bits)
        energies.append(float(lam.lambdas @ config.values))
    energies = np.asarray(energies)
    expected = 0.25 * (np.mean(energies**2) - np.mean(energies) ** 2)
    assert chi_f_exact(2, lam, 0.0) == pytest.approx(expected, rel=1e-12)


def test_large_beta_limit():
    lam = field_preset("uniform(1.0)", 2)
    assert chi_f_exact(2, lam, 30.0) < 1e-6


def test_mc_within_three_sigma_of_exact():
    lam = field_preset("uniform(1.0)", 2)
    for beta in (0.1, 0.4, 0.8):
        exact = chi_f_exact(2, lam, beta)
        mc, err = chi_f_mc(2, lam, beta, 8000, seed=13, stride=3)
        assert abs(mc - exact) < 3 * err, f"beta={beta}"


def test_sign_flip_invariance(rng):
    # lambda -> -lambda relabels the energies via the sublattice spin flip
    for _ in range(10):
        lam = rng.uniform(-1, 1, 8)
        beta = float(rng.uniform(0, 1.5))
        a = chi_f_exact(2, FieldConfig(lam), beta)
        b = chi_f_exact(2, FieldConfig(-lam), beta)
        assert a == pytest.approx(b, rel=1e-10)


def test_error_shrinks_with_samples():
    lam = field_preset("uniform(1.0)", 2)
    _, err1 = chi_f_mc(2, lam, 0.4, 2000, seed=7, stride=2)
    _, err4 = chi_f_mc(2, lam, 0.4, 8000, seed=8, stride=2)
    assert 1.3 < err1 / err4 < 3.2  # expect about a factor two


def test_peak_extraction_rules():
    monotone = ChiFCurve(np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]), "exact")
    assert chi_f_peak(monotone) == pytest.approx(0.3)
    triangle = ChiFCurve(np.array([0.1, 0.2, 0.3]), np.array([1.0, 5.0, 1.0]), "exact")
    assert chi_f_peak(triangle) == pytest.approx(0.2)
    tie = ChiFCurve(np.array([0.1, 0.2, 0.3]), np.array([5.0, 1.0, 5.0]), "exact")
    assert chi_f_peak(tie) == pytest.approx(0.1)  # ties toward smaller beta


def test_curve_validation():
    with pytest.raises(ValueError):
        ChiFCurve(np.array([0.2, 0.1]), np.array([1.0, 2.0]), "exact")
    with pytest.raises(ValueError):
        ChiFCurve(np.array([0.1, 0.2]), np.array([1.0, 2.0]), "bogus")
    with pytest.raises(ValueError):
        chi_f_mc(2, field_preset("uniform(1.0)", 2), 0.3, 1, seed=1)


def test_large_lattice_single_peak_window():
    # the mapped Ising model puts the peak near its critical coupling
    lam = field_preset("uniform(1.0)", 20)
    grid = np.linspace(0.05, 1.0, 20)
    curve = chi_f_curve_mc(20, lam, grid, mc_samples=600, seed=31,
                           therm_sweeps=150, stride=3)
    peak = chi_f_peak(curve)
    assert 0.3 < peak < 0.6
