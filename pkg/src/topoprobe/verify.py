"""Oracle cross-check suite behind ``topoprobe verify``.

Each check exercises one statistical component against an independent
reference: exact enumeration for the samplers, the pseudo-spin identity for
the projection weights, finite differences for the network gradients.
Significance levels are set low (1e-3) so a healthy installation rarely
flags; the acceptance test suite applies the stricter published thresholds.
"""

from __future__ import annotations

import numpy as np

from .igt import exact_igt_oracle, igt_energies, sample_igt_grid
from .lattice import FieldConfig, build_geometry, vertex_products
from .nn import TrainConfig, architecture, nn_init
from .rng import BlockRng
from .stats import chi_square_gof
from .fidelity import chi_f_exact, chi_f_mc
from .toric import (
    ExactToricOracle,
    PlaquetteGroupElement,
    ToricField,
    config_orbit_masks,
    field_energy,
    field_preset,
    ising_boltzmann_weight,
    sample_sigma_x,
    stabilizer_expectation,
)
from .toric_z import SigmaZOracle, sample_sigma_z

SIGNIFICANCE = 1e-3


def _check_lattice() -> tuple[bool, str]:
    for n in range(2, 7):
        g = build_geometry(n)
        counts = np.zeros(g.bond_count, dtype=int)
        for p in range(g.plaquette_count):
            counts[g.plaquette_bonds[p]] += 1
        if not (counts == 2).all():
            return False, f"n={n}: a bond is not in exactly two plaquettes"
        counts[:] = 0
        for s in range(g.plaquette_count):
            counts[g.vertex_bonds[s]] += 1
        if not (counts == 2).all():
            return False, f"n={n}: a bond is not in exactly two vertices"
    return True, "incidence invariants hold for n = 2..6"


def _check_igt(fast: bool) -> tuple[bool, str]:
    count = 20_000 if not fast else 5_000
    g = build_geometry(2)
    worst = 1.0
    for beta in (0.0, 1.0):
        ds = sample_igt_grid(2, [beta], count, seed=2024, stride=4)
        energies = igt_energies(g, ds.values)
        stats = exact_igt_oracle(2, beta)
        levels = sorted(stats.energy_histogram)
        counts = np.array([(energies == e).sum() for e in levels])
        probs = np.array([stats.energy_histogram[e] for e in levels])
        _, _, p = chi_square_gof(counts, probs)
        worst = min(worst, p)
    ok = worst > SIGNIFICANCE
    return ok, f"energy histogram chi-square min p = {worst:.4f}"


def _check_sigma_x(fast: bool) -> tuple[bool, str]:
    count = 20_000 if not fast else 5_000
    g = build_geometry(2)
    lam = field_preset("uniform(1.0)", 2)
    worst = 1.0
    for beta in (0.0, 0.5):
        ds = sample_sigma_x(2, lam, [beta], count, seed=77, stride=4)
        if not (vertex_products(g, ds.values) == 1).all():
            return False, "a sample violates the closed-loop condition"
        masks = config_orbit_masks(g, ds.values)
        oracle = ExactToricOracle(g, ToricField(lam, beta))
        counts = np.array([(masks == m).sum() for m in oracle.masks])
        _, _, p = chi_square_gof(counts, oracle.probs)
        worst = min(worst, p)
    ok = worst > SIGNIFICANCE
    return ok, f"projection frequency chi-square min p = {worst:.4f}"


def _check_sigma_z(fast: bool) -> tuple[bool, str]:
    count = 8_000 if not fast else 2_000
    g = build_geometry(2)
    lam = field_preset("uniform(1.0)", 2)
    oracle = SigmaZOracle(g, ToricField(lam, 0.3))
    table = oracle.full_table()
    if abs(table.sum() - 1.0) > 1e-10:
        return False, f"outcome table sums to {table.sum()!r}"
    ds = sample_sigma_z(2, lam, [0.3], count, seed=5, therm_sweeps=50, stride=3)
    codes = ((ds.values < 0).astype(np.int64) << np.arange(8)).sum(axis=1)
    counts = np.bincount(codes, minlength=256)
    _, _, p = chi_square_gof(counts, table)
    ok = p > SIGNIFICANCE
    return ok, f"table sums to one; sampler chi-square p = {p:.4f}"


def _check_ising_identity(fast: bool) -> tuple[bool, str]:
    rng = BlockRng(11)
    worst = 0.0
    for n in (2, 3):
        g = build_geometry(n)
        for _ in range(20 if not fast else 5):
            lam = FieldConfig(2.0 * rng.uniforms(g.bond_count) - 1.0)
            mask = int(rng.uniforms(1)[0] * (1 << (n * n)))
            h = PlaquetteGroupElement(n, mask)
            beta = 0.7 * float(rng.uniforms(1)[0])
            w = ising_boltzmann_weight(g, h, ToricField(lam, beta))
            ref = float(np.exp(beta * field_energy(g, lam, h)))
            worst = max(worst, abs(w - ref) / max(abs(ref), 1e-300))
    ok = worst < 1e-12
    return ok, f"max relative mismatch {worst:.2e}"


def _check_chi_f(fast: bool) -> tuple[bool, str]:
    lam = field_preset("uniform(1.0)", 2)
    samples = 10_000 if not fast else 3_000
    worst = 0.0
    for beta in (0.2, 0.6):
        exact = chi_f_exact(2, lam, beta)
        mc, err = chi_f_mc(2, lam, beta, samples, seed=9, stride=3)
        worst = max(worst, abs(mc - exact) / max(err, 1e-12))
    ok = worst < 4.0
    return ok, f"max deviation {worst:.2f} standard errors"


def _check_stabilizer(fast: bool) -> tuple[bool, str]:
    lam = field_preset("uniform(0.5)", 2)
    zero = stabilizer_expectation(2, ToricField(lam, 0.0), 0, 64, seed=3)
    if zero != 1.0:
        return False, f"beta=0 estimate is {zero!r}, expected exactly 1.0"
    tf = ToricField(lam, 0.4)
    oracle = ExactToricOracle(build_geometry(2), tf)
    exact = oracle.stabilizer_expectation(1)
    reps = 10 if not fast else 5
    ests = [stabilizer_expectation(2, tf, 1, 2000, seed=100 + k) for k in range(reps)]
    dev = abs(np.mean(ests) - exact) / max(np.std(ests) / np.sqrt(reps), 1e-12)
    ok = dev < 4.0
    return ok, f"beta=0 exact; MC vs oracle deviation {dev:.2f} standard errors"


def _check_gradients(fast: bool) -> tuple[bool, str]:
    descriptor = {
        "input": {"kind": "image", "channels": 2, "size": 4},
        "layers": [
            {"type": "conv", "filters": 3, "kernel": 3},
            {"type": "relu"},
            {"type": "conv", "filters": 2, "kernel": 2},
            {"type": "relu"},
            {"type": "flatten"},
            {"type": "dense", "units": 6},
            {"type": "relu"},
            {"type": "dropout", "rate": 0.2},
            {"type": "dense", "units": 1},
        ],
        "label_range": [0.0, 1.0],
    }
    net = nn_init(descriptor, 1)
    rng = BlockRng(2)
    x = 2.0 * rng.uniforms((4, 2, 4, 4)) - 1.0
    y = rng.uniforms(4)
    masks = net.draw_dropout_masks(rng, 4)
    _, grads = net.loss_and_grads(x, y, masks)
    params = net.parameters()
    probes = 40 if not fast else 10
    probe = np.random.default_rng(0)
    eps, worst = 1e-5, 0.0
    for _ in range(probes):
        pi = int(probe.integers(len(params)))
        idx = tuple(probe.integers(s) for s in params[pi].shape)
        orig = params[pi][idx]
        params[pi][idx] = orig + eps
        lp, _ = net.loss_and_grads(x, y, masks)
        params[pi][idx] = orig - eps
        lm, _ = net.loss_and_grads(x, y, masks)
        params[pi][idx] = orig
        fd = (lp - lm) / (2 * eps)
        an = grads[pi][idx]
        worst = max(worst, abs(an - fd) / max(1e-6, abs(an), abs(fd)))
    ok = worst < 1e-4
    return ok, f"max relative gradient error {worst:.2e}"


def run_verification(fast: bool = False) -> list[tuple[str, bool, str]]:
    checks = [
        ("lattice incidence", lambda: _check_lattice()),
        ("igt sampler vs enumeration", lambda: _check_igt(fast)),
        ("sigma-x projection vs enumeration", lambda: _check_sigma_x(fast)),
        ("sigma-z projection vs loop sums", lambda: _check_sigma_z(fast)),
        ("pseudo-spin weight identity", lambda: _check_ising_identity(fast)),
        ("fidelity susceptibility mc vs exact", lambda: _check_chi_f(fast)),
        ("stabilizer expectation vs oracle", lambda: _check_stabilizer(fast)),
        ("network gradients vs finite differences", lambda: _check_gradients(fast)),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
