"""Thermal Monte Carlo for the Ising gauge theory, with an exact oracle.

The energy of a z-basis bond configuration is the negative sum of plaquette
products (coupling fixed at J = 1, k_B = 1), so beta is the only thermal
parameter.  Sampling uses single-bond-flip Metropolis organised in
checkerboard sweeps: bonds are partitioned into classes that share no
plaquette, and each sweep makes one lazy Metropolis update per bond (2n^2
attempts), class by class, which allows the whole sweep to run vectorised
across chains.  An update proposes the flip with probability 1/2 and accepts
it with min(1, exp(-beta * dE)); the lazy proposal step is what keeps the
parallel class update aperiodic (an always-accepted dE = 0 class would
otherwise flip deterministically and can cycle).  Flipping one bond toggles
its two adjacent plaquettes, so dE is -4, 0 or +4.

Every sweep also makes one lazy gauge update per vertex: flipping the four
bonds at a site changes no plaquette product (dE = 0 identically), so these
moves leave the Boltzmann weight untouched while keeping the chain mixing
across the gauge orbit.  Without them, single-bond moves freeze at large
beta (any move off the constraint manifold costs dE = +4) and a chain would
emit one frozen configuration per run; energy statistics would not notice,
but configuration consumers would.

The exact oracle enumerates all 2^(2n^2) configurations (n <= 3) and is the
reference distribution for the sampler's acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SPIN, LabeledDataset
from .lattice import LatticeGeometry, SpinConfig, build_geometry, plaquette_products
from .rng import DOMAIN_IGT, LaneRng, stream_key_np

DEFAULT_THERM_SWEEPS = 100
DEFAULT_STRIDE = 1
MAX_ORACLE_N = 3


@dataclass(frozen=True)
class IgtParams:
    """Sampling parameters: inverse temperature, lattice size, coupling."""

    beta: float
    n: int
    j: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.j != 1.0:
            raise ValueError("coupling is fixed at J = 1")
        if self.n < 2:
            raise ValueError("lattice size must be at least 2")


@dataclass(frozen=True)
class ExactIgtStats:
    """Exact Boltzmann statistics from full enumeration."""

    beta: float
    mean_energy: float
    energy_histogram: dict[int, float]


def igt_energy(geometry: LatticeGeometry, config: SpinConfig) -> int:
    """E = -sum of plaquette products; an integer in [-n^2, n^2] with
    E + n^2 divisible by 4 (violations come in pairs on the torus)."""
    if config.basis != "z":
        raise ValueError("the gauge-theory energy is defined on z-basis configs")
    if len(config) != geometry.bond_count:
        raise ValueError("config length does not match geometry")
    return -int(plaquette_products(geometry, config.values).sum())


def igt_energies(geometry: LatticeGeometry, values: np.ndarray) -> np.ndarray:
    """Batch version of :func:`igt_energy` over rows of spin values."""
    return -plaquette_products(geometry, values).sum(axis=-1).astype(np.int64)


def single_flip_delta_e(geometry: LatticeGeometry, config: SpinConfig, bond: int) -> int:
    """Energy change from flipping one bond: twice the sum of the two
    adjacent plaquette products before the flip."""
    p1, p2 = geometry.bond_plaquettes[bond]
    return 2 * int(
        np.prod(config.values[geometry.plaquette_bonds[p1]])
        + np.prod(config.values[geometry.plaquette_bonds[p2]])
    )


def acceptance_probability(delta_e: float, beta: float) -> float:
    """Metropolis acceptance min(1, exp(-beta * delta_e))."""
    return float(np.exp(min(-beta * delta_e, 0.0)))


def _cycle_classes(n: int) -> list[list[int]]:
    # Independent sets of the n-cycle: 2 classes for even n, 3 for odd n.
    if n % 2 == 0:
        return [list(range(0, n, 2)), list(range(1, n, 2))]
    return [list(range(0, n - 1, 2)), list(range(1, n - 1, 2)), [n - 1]]


def bond_update_classes(n: int) -> list[np.ndarray]:
    """Bond classes for parallel Metropolis: no two bonds of a class share a
    plaquette.  Horizontal bonds conflict only within a column between
    cyclically adjacent rows (and with any touching vertical bond), so row
    classes of the n-cycle work; vertical bonds mirror this over columns."""
    nsq = n * n
    classes = []
    for rows in _cycle_classes(n):
        classes.append(np.array([r * n + c for r in rows for c in range(n)]))
    for cols in _cycle_classes(n):
        classes.append(np.array([nsq + r * n + c for c in cols for r in range(n)]))
    return classes


def vertex_update_classes(geometry: LatticeGeometry) -> list[np.ndarray]:
    """Vertex classes whose gauge flips touch disjoint bond sets (greedy
    colouring of lattice adjacency), so a class updates in parallel."""
    n = geometry.n
    nsq = n * n
    neighbours = [set() for _ in range(nsq)]
    for bond in range(geometry.bond_count):
        v1, v2 = geometry.bond_vertices[bond]
        if v1 != v2:
            neighbours[v1].add(v2)
            neighbours[v2].add(v1)
    colors = np.full(nsq, -1)
    for s in range(nsq):
        used = {colors[t] for t in neighbours[s] if colors[t] >= 0}
        color = 0
        while color in used:
            color += 1
        colors[s] = color
    return [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]


class _SweepEngine:
    """Vectorised checkerboard Metropolis over many lockstep chains.

    One lane per (chain, site), where sites 0 .. 2n^2-1 are the bond updates
    and sites 2n^2 .. 3n^2-1 the vertex gauge updates; a sweep consumes
    exactly one uniform per lane, so stream usage is independent of how
    chains are batched.
    """

    def __init__(self, geometry: LatticeGeometry, betas: np.ndarray, lane_keys: np.ndarray):
        self.geometry = geometry
        self.betas = np.asarray(betas, dtype=np.float64)
        self.chains = self.betas.shape[0]
        self.rng = LaneRng(lane_keys)
        self.classes = []
        for bonds in bond_update_classes(geometry.n):
            pb = geometry.plaquette_bonds[geometry.bond_plaquettes[bonds]]
            self.classes.append((bonds, pb))  # pb: (|class|, 2, 4)
        self.gauge_classes = [
            (verts, geometry.vertex_bonds[verts])
            for verts in vertex_update_classes(geometry)
        ]
        self.spins = None

    @staticmethod
    def lane_count(geometry: LatticeGeometry) -> int:
        return geometry.bond_count + geometry.plaquette_count

    def hot_start(self):
        u = self.rng.uniforms().reshape(self.chains, -1)
        self.spins = np.where(u[:, : self.geometry.bond_count] < 0.5, -1, 1).astype(
            np.int8
        )

    def sweep(self):
        u = self.rng.uniforms().reshape(self.chains, -1)
        spins = self.spins
        for bonds, pb in self.classes:
            delta = 2.0 * spins[:, pb].prod(axis=-1).sum(axis=-1)
            log_acc = np.minimum(-self.betas[:, None] * delta, 0.0)
            flip = u[:, bonds] < 0.5 * np.exp(log_acc)
            cur = spins[:, bonds]
            spins[:, bonds] = np.where(flip, -cur, cur)
        offset = self.geometry.bond_count
        for verts, vbonds in self.gauge_classes:
            flip = u[:, offset + verts] < 0.5  # gauge moves cost dE = 0
            cur = spins[:, vbonds]
            spins[:, vbonds] = np.where(flip[:, :, None], -cur, cur)

    def run(self, count_per_chain: int, therm_sweeps: int, stride: int) -> np.ndarray:
        """Returns samples with shape (count_per_chain, chains, bonds)."""
        out = np.empty(
            (count_per_chain, self.chains, self.geometry.bond_count), dtype=np.int8
        )
        for _ in range(therm_sweeps):
            self.sweep()
        for k in range(count_per_chain):
            for _ in range(stride):
                self.sweep()
            out[k] = self.spins
        return out


def sample_igt_grid(
    n: int,
    betas,
    per_beta: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
    chains: int = 1,
) -> LabeledDataset:
    """Sample ``per_beta`` configurations for every beta on the grid.

    Each (beta, chain) pair is an independent hot-started chain with its own
    random stream; records are ordered by beta grid position, then chain,
    then sample index, so the output is reproducible bit for bit from
    (n, betas, per_beta, seed, therm_sweeps, stride, chains).
    """
    betas = [float(b) for b in np.atleast_1d(betas)]
    for b in betas:
        IgtParams(beta=b, n=n)
    if per_beta < 1:
        raise ValueError("need at least one sample per beta")
    if per_beta % chains != 0:
        raise ValueError("chains must divide the per-beta sample count")
    therm_sweeps = DEFAULT_THERM_SWEEPS if therm_sweeps is None else therm_sweeps
    stride = DEFAULT_STRIDE if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be at least one sweep")

    geometry = build_geometry(n)
    beta_idx = np.repeat(np.arange(len(betas)), chains)
    chain_idx = np.tile(np.arange(chains), len(betas))
    site_idx = np.arange(_SweepEngine.lane_count(geometry))
    lane_keys = stream_key_np(
        seed, DOMAIN_IGT, beta_idx[:, None], chain_idx[:, None], site_idx[None, :]
    )
    engine = _SweepEngine(geometry, np.asarray(betas)[beta_idx], lane_keys)
    engine.hot_start()
    samples = engine.run(per_beta // chains, therm_sweeps, stride)

    # (count, chains_total, bonds) -> rows grouped by beta, then chain, then k
    values = samples.transpose(1, 0, 2).reshape(-1, geometry.bond_count)
    labels = np.repeat(np.asarray(betas, dtype=np.float64), per_beta)
    meta = {
        "model": "igt",
        "n": n,
        "beta_grid": betas,
        "per_beta": per_beta,
        "seed": seed,
        "therm_sweeps": therm_sweeps,
        "stride": stride,
        "chains": chains,
    }
    return LabeledDataset(labels, values, SPIN, n, basis="z", meta=meta)


def sample_igt(
    params: IgtParams,
    count: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
    chains: int = 1,
) -> LabeledDataset:
    """Single-beta convenience wrapper around :func:`sample_igt_grid`."""
    return sample_igt_grid(
        params.n, [params.beta], count, seed, therm_sweeps, stride, chains
    )


def enumerate_configs(n: int) -> np.ndarray:
    """All 2^(2n^2) +-1 bond configurations as int8 rows (n <= 3 only)."""
    if n > MAX_ORACLE_N:
        raise ValueError(f"enumeration is limited to n <= {MAX_ORACLE_N}")
    bonds = 2 * n * n
    codes = np.arange(1 << bonds, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(bonds)) & 1
    return (1 - 2 * bits).astype(np.int8)


def exact_igt_oracle(n: int, beta: float) -> ExactIgtStats:
    """Exact Boltzmann energy statistics by full enumeration (n <= 3)."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    geometry = build_geometry(n)
    energies = igt_energies(geometry, enumerate_configs(n))
    levels, counts = np.unique(energies, return_counts=True)
    log_w = np.log(counts) - beta * levels
    log_w -= log_w.max()
    probs = np.exp(log_w)
    probs /= probs.sum()
    return ExactIgtStats(
        beta=float(beta),
        mean_energy=float(np.dot(probs, levels)),
        energy_histogram={int(e): float(p) for e, p in zip(levels, probs)},
    )
