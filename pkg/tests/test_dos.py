import numpy as np
import pytest

from topoprobe.data import LabeledDataset
from topoprobe.dos import (
    DosPredictor,
    dos_build,
    dos_fit,
    dos_model,
    dos_predict,
    dos_predict_energies,
    load_dos_model,
    save_dos_model,
)
from topoprobe.igt import enumerate_configs, igt_energies, sample_igt_grid
from topoprobe.lattice import SpinConfig, all_up, build_geometry


def spin_dataset(values, labels, n=2):
    return LabeledDataset(np.asarray(labels, float), np.asarray(values, np.int8),
                          "spin", n, basis="z")


def test_single_and_double_record_tables(geom2):
    up = all_up(geom2, "z").values
    ds = spin_dataset([up], [1.0])
    dos = dos_build(ds)
    assert dos.energy_axis.tolist() == [-4]
    assert dos.eps[0, 0] == 1.0

    one_defect = up.copy()
    one_defect[0] = -1
    ds2 = spin_dataset([up, one_defect], [1.0, 1.0])
    dos2 = dos_build(ds2)
    assert dos2.eps[0].tolist() == [0.5, 0.5]


def test_rows_normalised(geom2):
    ds = sample_igt_grid(2, [0.0, 0.7, 1.5], 400, seed=2)
    dos = dos_build(ds)
    assert np.allclose(dos.eps.sum(axis=1), 1.0, atol=1e-12)


def test_beta_zero_matches_degeneracy(geom2):
    # eps(0, E) approaches exact degeneracy / 256 for uniform sampling
    ds = sample_igt_grid(2, [0.0], 100_000, seed=5, stride=2)
    dos = dos_build(ds)
    energies = igt_energies(geom2, enumerate_configs(2))
    for j, e in enumerate(dos.energy_axis):
        exact = (energies == e).sum() / 256
        observed = dos.eps[0, j]
        stderr = np.sqrt(exact * (1 - exact) / len(ds))
        assert abs(observed - exact) < 3.5 * stderr


def test_predictor_mean_label_rules(geom2):
    up = all_up(geom2, "z").values
    ds = spin_dataset([up, up], [3.0, 3.0])
    model = dos_fit(ds)
    pred = dos_predict(model, all_up(geom2, "z"))
    assert pred.beta_pred == 3.0 and not pred.fallback

    ds2 = spin_dataset([up, up], [1.0, 3.0])
    assert dos_predict(dos_fit(ds2), all_up(geom2, "z")).beta_pred == 2.0


def test_unseen_energy_fallback(geom2):
    up = all_up(geom2, "z").values
    two = up.copy()
    two[0] = -1
    two[1] = -1  # flips plaquettes around bonds 0 and 1 -> E = 0 at n = 2
    ds = spin_dataset([up, two], [2.0, 1.0])
    model = dos_fit(ds)
    assert model.energy_axis.tolist() == [-4, 0]
    preds, fallback = dos_predict_energies(model, [-4, -2, 0, 4])
    assert not fallback[0] and not fallback[2]
    assert fallback[1] and fallback[3]
    assert preds[1] == pytest.approx(1.5)  # interpolation between -4 and 0
    assert preds[3] == pytest.approx(1.0)  # clamped at the extreme


def test_prediction_is_pure_function_of_energy(geom2, rng):
    ds = sample_igt_grid(2, [0.2, 0.9], 500, seed=9)
    model = dos_fit(ds)
    energies = igt_energies(geom2, ds.values)
    preds = DosPredictor(model).predict_dataset(ds)
    for e in np.unique(energies):
        assert np.unique(preds[energies == e]).size == 1


def test_empty_dataset_rejected():
    ds = LabeledDataset(np.empty(0), np.empty((0, 8), dtype=np.int8), "spin", 2, basis="z")
    with pytest.raises(ValueError):
        dos_build(ds)


def test_model_round_trip(tmp_path, geom2):
    ds = sample_igt_grid(2, [0.1, 0.8], 300, seed=3)
    model = dos_fit(ds)
    path = tmp_path / "dos.csv"
    save_dos_model(model, path)
    loaded = load_dos_model(path, 2)
    assert np.array_equal(loaded.energy_axis, model.energy_axis)
    assert np.array_equal(loaded.beta_av, model.beta_av)
    assert np.array_equal(loaded.counts, model.counts)
    with pytest.raises(ValueError):
        load_dos_model(__file__, 2)
