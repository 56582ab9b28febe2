"""Ground-state projections of the field-generalised toric code, x basis.

The relevant ground state is a weighted superposition, over the abelian
group generated by plaquette operators, of the configurations reachable from
the all-up x reference state.  A group element is a plaquette bitmask taken
modulo the torus relation (the product of all plaquette operators is the
identity), canonicalised by forcing plaquette 0 off.  Measuring every spin
in the x basis yields configuration S_h with probability

    p(S_h) = exp(beta * E(h)) / sum_h' exp(beta * E(h')),
    E(h)   = sum_i lambda_i * sigma_i^x(h),

which maps exactly onto a 2-D Ising model by placing a pseudo-spin on every
plaquette: sigma_i^x(h) is the product of the two pseudo-spins adjacent to
bond i, and the bond field lambda_i becomes the Ising coupling.

This module provides the exact enumeration oracle (n <= 3), a vectorised
plaquette-flip Metropolis sampler for the projection, the pseudo-spin
mapping, and plaquette-stabilizer expectation values; the z-basis projection
lives in ``toric_z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FEATURES, SPIN, LabeledDataset
from .lattice import (
    FieldConfig,
    LatticeGeometry,
    SpinConfig,
    all_up,
    apply_plaquette_flips,
    build_geometry,
)
from .rng import (
    DOMAIN_FIELD,
    DOMAIN_STABILIZER,
    DOMAIN_TORIC_X,
    BlockRng,
    LaneRng,
    stream_key,
    stream_key_np,
)

DEFAULT_THERM_SWEEPS = 100
DEFAULT_STRIDE = 1
MAX_ORACLE_N = 3


def _canonical_mask(mask: int, cells: int) -> int:
    full = (1 << cells) - 1
    mask &= full
    return (mask ^ full) if mask & 1 else mask


@dataclass(frozen=True)
class PlaquetteGroupElement:
    """Product of plaquette operators, canonicalised (plaquette 0 off)."""

    n: int
    mask: int

    def __post_init__(self):
        object.__setattr__(self, "mask", _canonical_mask(self.mask, self.n * self.n))

    @property
    def bits(self) -> np.ndarray:
        idx = np.arange(self.n * self.n)
        return ((self.mask >> idx) & 1).astype(bool)

    def flipped(self, plaquette: int) -> "PlaquetteGroupElement":
        return PlaquetteGroupElement(self.n, self.mask ^ (1 << plaquette))


@dataclass(frozen=True)
class VertexGroupElement:
    """Product of vertex operators, canonicalised (vertex 0 off)."""

    n: int
    mask: int

    def __post_init__(self):
        object.__setattr__(self, "mask", _canonical_mask(self.mask, self.n * self.n))

    @property
    def bits(self) -> np.ndarray:
        idx = np.arange(self.n * self.n)
        return ((self.mask >> idx) & 1).astype(bool)


@dataclass(frozen=True)
class ToricField:
    """Background field configuration plus its amplitude beta >= 0."""

    field: FieldConfig
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("field amplitude beta must be non-negative")


@dataclass(frozen=True)
class PseudoSpinConfig:
    """One +-1 pseudo-spin per plaquette (the Ising change of variables)."""

    thetas: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=np.int8)
        if not np.all(np.abs(thetas) == 1):
            raise ValueError("pseudo-spins must be +1 or -1")
        thetas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)


def field_preset(name: str, n: int) -> FieldConfig:
    """Named per-bond field layouts used throughout the experiments.

    ``uniform(x)`` sets every bond to x; ``checkerboard`` alternates +-1 with
    the parity of (row + column) separately on each bond sublattice;
    ``half-zero`` applies a unit field on the left half of the columns only;
    ``random(seed)`` draws each bond uniformly from [-1, 1].
    """
    nsq = n * n
    name = name.strip()
    if name.startswith("uniform(") and name.endswith(")"):
        value = float(name[8:-1])
        return FieldConfig(np.full(2 * nsq, value))
    if name == "checkerboard":
        lam = np.empty(2 * nsq)
        for r in range(n):
            for c in range(n):
                sign = 1.0 if (r + c) % 2 == 0 else -1.0
                lam[r * n + c] = sign
                lam[nsq + r * n + c] = sign
        return FieldConfig(lam)
    if name == "half-zero":
        lam = np.zeros(2 * nsq)
        for r in range(n):
            for c in range(n // 2):
                lam[r * n + c] = 1.0
                lam[nsq + r * n + c] = 1.0
        return FieldConfig(lam)
    if name.startswith("random(") and name.endswith(")"):
        seed = int(name[7:-1])
        u = BlockRng(stream_key(seed, DOMAIN_FIELD)).uniforms(2 * nsq)
        return FieldConfig(2.0 * u - 1.0)
    raise ValueError(f"unknown field preset {name!r}")


def field_energy(
    geometry: LatticeGeometry, field: FieldConfig, h: PlaquetteGroupElement
) -> float:
    """E(h) = sum_i lambda_i * sigma_i^x(h), computed from the flipped
    configuration itself (the pseudo-spin route is the cross-check)."""
    config = apply_plaquette_flips(geometry, all_up(geometry, "x"), h.bits)
    return float(np.dot(field.lambdas, config.values))


def map_to_ising(h: PlaquetteGroupElement) -> PseudoSpinConfig:
    """Pseudo-spin representative: theta_p = -1 exactly on flipped plaquettes,
    so that sigma_i^x(h) = theta_p * theta_p' for the two plaquettes at bond i."""
    return PseudoSpinConfig((1 - 2 * h.bits.astype(np.int8)).astype(np.int8))


def pseudo_spin_values(geometry: LatticeGeometry, thetas: np.ndarray) -> np.ndarray:
    """Bond values theta_p * theta_p' for a batch of pseudo-spin rows."""
    bp = geometry.bond_plaquettes
    return thetas[..., bp[:, 0]] * thetas[..., bp[:, 1]]


def ising_boltzmann_weight(
    geometry: LatticeGeometry, h: PlaquetteGroupElement, field: ToricField
) -> float:
    """Unnormalised Ising weight exp(beta * sum_<p,p'> J * theta theta') with
    J on a bond equal to that bond's lambda; identical to
    exp(beta * field_energy(h)) by the change of variables."""
    thetas = map_to_ising(h).thetas
    energy = float(np.dot(field.field.lambdas, pseudo_spin_values(geometry, thetas)))
    return float(np.exp(field.beta * energy))


class ExactToricOracle:
    """Full enumeration of the plaquette group for n <= 3.

    Rows are indexed by canonical masks (mask >> 1), so lookups after a
    plaquette flip stay O(1).
    """

    def __init__(self, geometry: LatticeGeometry, field: ToricField):
        if geometry.n > MAX_ORACLE_N:
            raise ValueError(f"exact oracle is limited to n <= {MAX_ORACLE_N}")
        self.geometry = geometry
        self.field = field
        nsq = geometry.n * geometry.n
        self.masks = np.arange(1 << (nsq - 1), dtype=np.int64) << 1
        bits = ((self.masks[:, None] >> np.arange(nsq)) & 1).astype(np.int8)
        thetas = 1 - 2 * bits
        sigma = pseudo_spin_values(geometry, thetas)
        self.energies = sigma.astype(np.float64) @ field.field.lambdas
        log_w = field.beta * self.energies
        log_w -= log_w.max()
        w = np.exp(log_w)
        self.probs = w / w.sum()

    @property
    def size(self) -> int:
        return self.masks.size

    def index_of(self, h: PlaquetteGroupElement) -> int:
        return int(h.mask >> 1)

    def energy(self, h: PlaquetteGroupElement) -> float:
        return float(self.energies[self.index_of(h)])

    def probability(self, h: PlaquetteGroupElement) -> float:
        return float(self.probs[self.index_of(h)])

    def stabilizer_expectation(self, plaquette: int) -> float:
        """Exact plaquette-operator expectation: the weighted average over the
        group of exp((beta/2) * (E(flip p . h) - E(h)))."""
        nsq = self.geometry.n * self.geometry.n
        flipped = self.masks ^ (1 << plaquette)
        full = (1 << nsq) - 1
        flipped = np.where(flipped & 1, flipped ^ full, flipped)
        delta = self.energies[flipped >> 1] - self.energies
        return float(np.dot(self.probs, np.exp(0.5 * self.field.beta * delta)))

    def energy_variance(self) -> float:
        mean = float(np.dot(self.probs, self.energies))
        return float(np.dot(self.probs, self.energies**2) - mean**2)


def sigma_x_probability(oracle: ExactToricOracle, h: PlaquetteGroupElement) -> float:
    """Probability of projecting the ground state onto configuration S_h."""
    return oracle.probability(h)


def _plaquette_classes(geometry: LatticeGeometry) -> list[np.ndarray]:
    """Greedy proper colouring of the plaquette adjacency (shared-bond) graph;
    plaquettes of one class can be flip-tested simultaneously."""
    n = geometry.n
    nsq = n * n
    neighbours = [set() for _ in range(nsq)]
    for bond in range(geometry.bond_count):
        p1, p2 = geometry.bond_plaquettes[bond]
        if p1 != p2:
            neighbours[p1].add(p2)
            neighbours[p2].add(p1)
    colors = np.full(nsq, -1)
    for p in range(nsq):
        used = {colors[q] for q in neighbours[p] if colors[q] >= 0}
        color = 0
        while color in used:
            color += 1
        colors[p] = color
    return [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]


class _PlaquetteFlipEngine:
    """Lockstep plaquette-flip Metropolis across chains (one lane per
    (chain, plaquette); one uniform consumed per plaquette per sweep)."""

    def __init__(self, geometry: LatticeGeometry, field: FieldConfig,
                 betas: np.ndarray, lane_keys: np.ndarray):
        self.geometry = geometry
        self.betas = np.asarray(betas, dtype=np.float64)
        self.chains = self.betas.shape[0]
        self.rng = LaneRng(lane_keys)
        self.classes = []
        for plaqs in _plaquette_classes(geometry):
            bonds = geometry.plaquette_bonds[plaqs]  # (|class|, 4)
            self.classes.append((plaqs, bonds, field.lambdas[bonds]))
        # The reference projection starts from the all-up x configuration.
        self.spins = np.ones((self.chains, geometry.bond_count), dtype=np.int8)

    def sweep(self):
        u = self.rng.uniforms().reshape(self.chains, self.geometry.plaquette_count)
        spins = self.spins
        for plaqs, bonds, lam in self.classes:
            cur = spins[:, bonds]
            delta = -2.0 * (lam[None, :, :] * cur).sum(axis=-1)
            log_acc = np.minimum(self.betas[:, None] * delta, 0.0)
            # Lazy proposal (flip proposed with probability 1/2) keeps the
            # parallel class update aperiodic when every ratio is 1.
            flip = u[:, plaqs] < 0.5 * np.exp(log_acc)
            spins[:, bonds] = np.where(flip[:, :, None], -cur, cur)

    def samples(self, count_per_chain: int, therm_sweeps: int, stride: int):
        for _ in range(therm_sweeps):
            self.sweep()
        for _ in range(count_per_chain):
            for _ in range(stride):
                self.sweep()
            yield self.spins


def sample_sigma_x(
    n: int,
    field: FieldConfig,
    betas,
    per_beta: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
    chains: int = 1,
    field_preset_name: str | None = None,
) -> LabeledDataset:
    """Sample x-basis projections of the ground state for each beta.

    Proposals flip the four bonds of one plaquette (proposed lazily with
    probability 1/2 per sweep) and are accepted with min(1, exp(beta * dE));
    every sample therefore stays in the closed-loop manifold (all vertex
    products +1).  Record order and randomness follow the same conventions
    as the gauge-theory sampler.
    """
    betas = [float(b) for b in np.atleast_1d(betas)]
    if min(betas) < 0:
        raise ValueError("beta must be non-negative")
    if per_beta < 1 or per_beta % chains != 0:
        raise ValueError("per-beta count must be positive and divisible by chains")
    therm_sweeps = DEFAULT_THERM_SWEEPS if therm_sweeps is None else therm_sweeps
    stride = DEFAULT_STRIDE if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be at least one sweep")

    geometry = build_geometry(n)
    if len(field) != geometry.bond_count:
        raise ValueError("field length does not match geometry")
    beta_idx = np.repeat(np.arange(len(betas)), chains)
    chain_idx = np.tile(np.arange(chains), len(betas))
    plaq_idx = np.arange(geometry.plaquette_count)
    lane_keys = stream_key_np(
        seed, DOMAIN_TORIC_X, beta_idx[:, None], chain_idx[:, None], plaq_idx[None, :]
    )
    engine = _PlaquetteFlipEngine(geometry, field, np.asarray(betas)[beta_idx], lane_keys)

    per_chain = per_beta // chains
    out = np.empty((per_chain, engine.chains, geometry.bond_count), dtype=np.int8)
    for k, spins in enumerate(engine.samples(per_chain, therm_sweeps, stride)):
        out[k] = spins
    values = out.transpose(1, 0, 2).reshape(-1, geometry.bond_count)
    labels = np.repeat(np.asarray(betas, dtype=np.float64), per_beta)
    meta = {
        "model": "toric_x",
        "n": n,
        "beta_grid": betas,
        "per_beta": per_beta,
        "seed": seed,
        "therm_sweeps": therm_sweeps,
        "stride": stride,
        "chains": chains,
        "field_preset": field_preset_name,
    }
    return LabeledDataset(labels, values, SPIN, n, basis="x", meta=meta)


def config_to_group_element(
    geometry: LatticeGeometry, config: SpinConfig
) -> PlaquetteGroupElement:
    """Invert the orbit map: recover which plaquettes were flipped to produce
    an x-basis configuration from all-up.  Raises if the configuration is not
    in the orbit (i.e. violates a closed-loop constraint)."""
    masks = config_orbit_masks(geometry, config.values[None, :])
    return PlaquetteGroupElement(geometry.n, int(masks[0]))


def config_orbit_masks(geometry: LatticeGeometry, values: np.ndarray) -> np.ndarray:
    """Vectorised orbit inversion for rows of x-basis values.

    Pseudo-spins are reconstructed by fixing theta(0,0) = +1 and propagating
    theta across shared bonds; the reconstruction is then verified against
    every bond, so inconsistent (out-of-orbit) rows raise.
    """
    n = geometry.n
    nsq = n * n
    values = np.asarray(values)
    b = values.shape[0]
    thetas = np.empty((b, nsq), dtype=np.int8)
    thetas[:, 0] = 1
    for c in range(1, n):  # along row 0 via vertical bonds v(0, c)
        thetas[:, c] = thetas[:, c - 1] * values[:, nsq + c]
    for r in range(1, n):  # down each column via horizontal bonds h(r, c)
        cols = np.arange(n)
        thetas[:, r * n + cols] = (
            thetas[:, (r - 1) * n + cols] * values[:, r * n + cols]
        )
    if not np.array_equal(pseudo_spin_values(geometry, thetas), values):
        raise ValueError("configuration is not in the plaquette-flip orbit of all-up")
    bits = (thetas < 0).astype(np.int64)
    return (bits << np.arange(nsq, dtype=np.int64)).sum(axis=1)


def _stabilizer_estimates(
    geometry: LatticeGeometry, field: ToricField, spin_rows: np.ndarray
) -> np.ndarray:
    """Per-sample values exp((beta/2) dE_p) whose mean estimates <B_p>."""
    lam = field.field.lambdas[geometry.plaquette_bonds]  # (n^2, 4)
    local = (spin_rows[:, geometry.plaquette_bonds] * lam[None, :, :]).sum(axis=-1)
    return np.exp(-field.beta * local)  # (samples, n^2)


def stabilizer_expectation(
    n: int,
    field: ToricField,
    plaquette: int,
    mc_samples: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
) -> float:
    """Monte Carlo estimate of the plaquette-operator expectation value.

    Averages exp((beta/2) * (E(flip p . h) - E(h))) over sampled projections;
    the average is clipped into [-1, 1], the exact range of the operator
    (rare small-sample averages can overshoot it).
    """
    if mc_samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    geometry = build_geometry(n)
    if not 0 <= plaquette < geometry.plaquette_count:
        raise IndexError("plaquette index out of range")
    ds = sample_sigma_x(
        n, field.field, [field.beta], mc_samples,
        stream_key(seed, DOMAIN_STABILIZER), therm_sweeps, stride,
    )
    est = _stabilizer_estimates(geometry, field, ds.values.astype(np.float64))
    return float(np.clip(est[:, plaquette].mean(), -1.0, 1.0))


def stabilizer_dataset(
    n: int,
    field: FieldConfig,
    betas,
    estimates_per_beta: int,
    mc_samples: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
    field_preset_name: str | None = None,
) -> LabeledDataset:
    """Noisy per-plaquette expectation vectors labeled by beta.

    Each record averages ``mc_samples`` consecutive decorrelated projections
    from that beta's chain, giving one independent estimate vector of all n^2
    plaquette expectations.
    """
    betas = [float(b) for b in np.atleast_1d(betas)]
    if estimates_per_beta < 1 or mc_samples < 1:
        raise ValueError("estimate and sample counts must be positive")
    therm_sweeps = DEFAULT_THERM_SWEEPS if therm_sweeps is None else therm_sweeps
    stride = DEFAULT_STRIDE if stride is None else stride

    geometry = build_geometry(n)
    beta_idx = np.arange(len(betas))
    plaq_idx = np.arange(geometry.plaquette_count)
    lane_keys = stream_key_np(
        seed, DOMAIN_STABILIZER, beta_idx[:, None], 0, plaq_idx[None, :]
    )
    engine = _PlaquetteFlipEngine(geometry, field, np.asarray(betas), lane_keys)

    nsq = geometry.plaquette_count
    lam = field.lambdas[geometry.plaquette_bonds]
    beta_col = np.asarray(betas)[:, None]
    vectors = np.empty((estimates_per_beta, len(betas), nsq))
    acc = np.zeros((len(betas), nsq))
    block = 0
    taken = 0
    for spins in engine.samples(estimates_per_beta * mc_samples, therm_sweeps, stride):
        local = (spins[:, geometry.plaquette_bonds] * lam[None, :, :]).sum(axis=-1)
        acc += np.exp(-beta_col * local)
        taken += 1
        if taken == mc_samples:
            vectors[block] = np.clip(acc / mc_samples, -1.0, 1.0)
            acc[:] = 0.0
            taken = 0
            block += 1

    values = vectors.transpose(1, 0, 2).reshape(-1, nsq)
    labels = np.repeat(np.asarray(betas, dtype=np.float64), estimates_per_beta)
    meta = {
        "model": "stabilizer",
        "n": n,
        "beta_grid": betas,
        "per_beta": estimates_per_beta,
        "mc_samples": mc_samples,
        "seed": seed,
        "therm_sweeps": therm_sweeps,
        "stride": stride,
        "field_preset": field_preset_name,
    }
    return LabeledDataset(labels, values, FEATURES, n, meta=meta)
