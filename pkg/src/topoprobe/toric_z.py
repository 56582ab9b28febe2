"""z-basis projections of the field-generalised toric-code ground state.

In the z basis the relevant ground-state representative superposes the
closed-loop configurations generated by vertex operators.  The probability of
measuring the configuration that flips bond set M relative to all-up is

    p(M) = S(M)^2 / (|G| * F),

    S(M) = sum_C  prod_{i in C xor M} sinh(beta lambda_i / 2)
                  prod_{i not in C xor M} cosh(beta lambda_i / 2),
    F    = sum_C  prod_{i in C} sinh(beta lambda_i)
                  prod_{i not in C} cosh(beta lambda_i),

where C runs over the 2^(n^2 - 1) closed loops (bond flip sets of canonical
vertex-group elements).  The normalisation |G| * F equals sum_M S(M)^2
exactly, so the table sums to one; at beta = 0 the distribution is uniform
over the loops themselves.

Sampling follows a Metropolis chain whose proposals mix single-bond flips
(the elementary move) with vertex-generator flips; the latter are required
for ergodicity at small beta, where single-bond moves would have to cross
zero-probability configurations.  Each proposal needs the loop sum S, which
is maintained incrementally in O(|G|) per move with periodic from-scratch
recomputation to cancel rounding drift.  The cost per move grows with
2^(n^2 - 1), which is why this basis is limited to n <= 4.
"""

from __future__ import annotations

import numpy as np

from .data import SPIN, LabeledDataset
from .lattice import FieldConfig, LatticeGeometry, build_geometry
from .rng import DOMAIN_TORIC_Z, LaneRng, stream_key_np
from .toric import ToricField, VertexGroupElement

DEFAULT_THERM_SWEEPS = 100
DEFAULT_STRIDE = 1
MAX_ORACLE_N = 3
MAX_SAMPLER_N = 4


def vertex_loops(geometry: LatticeGeometry) -> np.ndarray:
    """Bond flip sets of all canonical vertex-group elements.

    Row g is the boolean bond mask flipped by vertex mask ``g << 1`` (vertex 0
    fixed off); a bond flips when exactly one of its endpoints is selected.
    """
    nsq = geometry.n * geometry.n
    masks = np.arange(1 << (nsq - 1), dtype=np.int64) << 1
    bits = ((masks[:, None] >> np.arange(nsq)) & 1).astype(bool)
    bv = geometry.bond_vertices
    return bits[:, bv[:, 0]] ^ bits[:, bv[:, 1]]


class _LoopSum:
    """Incrementally maintained S(M) over the loop table.

    ``x`` holds the membership matrix (loop xor current flip set).  Products
    are kept over bonds with nonzero sinh factor only; bonds whose sinh
    vanishes (zero field, or beta = 0) are tracked by a per-row counter, and
    a row contributes only while its counter is zero.
    """

    def __init__(self, geometry: LatticeGeometry, field: ToricField):
        beta = field.beta
        lam = field.field.lambdas
        self.ch = np.cosh(0.5 * beta * lam)
        self.sh = np.sinh(0.5 * beta * lam)
        self.zero = self.sh == 0.0
        self.x = vertex_loops(geometry).copy()
        self.loop_count = self.x.shape[0]
        self._recompute()

    def _recompute(self):
        factors = np.where(
            self.x, np.where(self.zero[None, :], 1.0, self.sh[None, :]), self.ch[None, :]
        )
        self.v = factors.prod(axis=1)
        self.zc = (self.x & self.zero[None, :]).sum(axis=1)
        self.total = float((self.v * (self.zc == 0)).sum())

    def propose(self, bonds):
        """Loop sum after toggling ``bonds`` (distinct), without committing."""
        v = self.v.copy()
        zc = self.zc.copy()
        for b in bonds:
            was_in = self.x[:, b]
            if self.zero[b]:
                v *= np.where(was_in, self.ch[b], 1.0 / self.ch[b])
                zc += np.where(was_in, -1, 1)
            else:
                v *= np.where(was_in, self.ch[b] / self.sh[b], self.sh[b] / self.ch[b])
        total = float((v * (zc == 0)).sum())
        return total, v, zc

    def commit(self, bonds, total, v, zc):
        self.x[:, list(bonds)] ^= True
        self.v, self.zc, self.total = v, zc, total


def _full_loop_sum(geometry: LatticeGeometry, field: ToricField) -> float:
    loops = vertex_loops(geometry)
    ch = np.cosh(field.beta * field.field.lambdas)
    sh = np.sinh(field.beta * field.field.lambdas)
    return float(np.where(loops, sh[None, :], ch[None, :]).prod(axis=1).sum())


class SigmaZOracle:
    """Exact z-basis projection probabilities by loop summation (n <= 3)."""

    def __init__(self, geometry: LatticeGeometry, field: ToricField):
        if geometry.n > MAX_ORACLE_N:
            raise ValueError(f"sigma-z oracle is limited to n <= {MAX_ORACLE_N}")
        self.geometry = geometry
        self.field = field
        self.loops = vertex_loops(geometry)
        self.ch_half = np.cosh(0.5 * field.beta * field.field.lambdas)
        self.sh_half = np.sinh(0.5 * field.beta * field.field.lambdas)
        self.normalization = self.loops.shape[0] * _full_loop_sum(geometry, field)

    def loop_group_size(self) -> int:
        return self.loops.shape[0]

    def loop_sum(self, flip_mask: np.ndarray) -> float:
        membership = self.loops ^ np.asarray(flip_mask, dtype=bool)[None, :]
        factors = np.where(membership, self.sh_half[None, :], self.ch_half[None, :])
        return float(factors.prod(axis=1).sum())

    def probability(self, flip_mask) -> float:
        """p(z_M) for the configuration flipping bond set ``flip_mask``."""
        flip_mask = _as_flip_mask(flip_mask, self.geometry.bond_count)
        return self.loop_sum(flip_mask) ** 2 / self.normalization

    def full_table(self) -> np.ndarray:
        """All 2^(2n^2) outcome probabilities; kept to n = 2 where the table
        has 256 entries (it grows as 4^(n^2))."""
        if self.geometry.n > 2:
            raise ValueError("full outcome table is only tabulated for n = 2")
        bonds = self.geometry.bond_count
        codes = np.arange(1 << bonds, dtype=np.int64)
        masks = ((codes[:, None] >> np.arange(bonds)) & 1).astype(bool)
        membership = self.loops[None, :, :] ^ masks[:, None, :]
        factors = np.where(membership, self.sh_half, self.ch_half)
        sums = factors.prod(axis=2).sum(axis=1)
        return sums**2 / self.normalization


def _as_flip_mask(mask, bonds: int) -> np.ndarray:
    if isinstance(mask, (int, np.integer)):
        return ((int(mask) >> np.arange(bonds)) & 1).astype(bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (bonds,):
        raise ValueError(f"flip mask must have shape ({bonds},)")
    return mask


def sigma_z_probability(oracle: SigmaZOracle, flip_mask) -> float:
    return oracle.probability(flip_mask)


class SigmaZChain:
    """Metropolis chain over z-basis outcomes for one (field, beta).

    Per attempt: one lane draw supplies (move kind, site, acceptance).  Kind
    splits 50/50 between a single-bond flip and a vertex-generator flip; the
    acceptance ratio is (S(M')/S(M))^2.
    """

    def __init__(self, geometry: LatticeGeometry, field: ToricField, lane_keys):
        self.geometry = geometry
        self.field = field
        self.rng = LaneRng(lane_keys)
        self.loop_sum = _LoopSum(geometry, field)
        self.flips = np.zeros(geometry.bond_count, dtype=bool)
        self._since_scratch = 0

    def step(self):
        u_kind, u_site, u_accept = self.rng.uniforms()
        if u_kind < 0.5:
            bonds = (int(u_site * self.geometry.bond_count),)
        else:
            s = int(u_site * self.geometry.plaquette_count)
            bonds = tuple(int(b) for b in self.geometry.vertex_bonds[s])
        total, v, zc = self.loop_sum.propose(bonds)
        ratio = (total / self.loop_sum.total) ** 2
        if u_accept < ratio:
            self.loop_sum.commit(bonds, total, v, zc)
            self.flips[list(bonds)] ^= True
            self._since_scratch += 1
            if self._since_scratch >= 4 * self.geometry.bond_count:
                self.loop_sum._recompute()
                self._since_scratch = 0

    def values(self) -> np.ndarray:
        return (1 - 2 * self.flips.astype(np.int8)).astype(np.int8)


def sample_sigma_z(
    n: int,
    field: FieldConfig,
    betas,
    per_beta: int,
    seed: int,
    therm_sweeps: int | None = None,
    stride: int | None = None,
    field_preset_name: str | None = None,
) -> LabeledDataset:
    """z-basis projection samples for each beta (n <= 4).

    A sweep is 2n^2 attempts; thermalisation and stride are counted in
    sweeps as for the other samplers.  Chains run one beta at a time because
    every attempt already costs O(2^(n^2 - 1)).
    """
    if n > MAX_SAMPLER_N:
        raise ValueError(f"sigma-z sampling is limited to n <= {MAX_SAMPLER_N}")
    betas = [float(b) for b in np.atleast_1d(betas)]
    if min(betas) < 0:
        raise ValueError("beta must be non-negative")
    if per_beta < 1:
        raise ValueError("need at least one sample per beta")
    therm_sweeps = DEFAULT_THERM_SWEEPS if therm_sweeps is None else therm_sweeps
    stride = DEFAULT_STRIDE if stride is None else stride

    geometry = build_geometry(n)
    if len(field) != geometry.bond_count:
        raise ValueError("field length does not match geometry")
    sweep = geometry.bond_count
    rows = np.empty((len(betas) * per_beta, geometry.bond_count), dtype=np.int8)
    for b_idx, beta in enumerate(betas):
        lane_keys = stream_key_np(seed, DOMAIN_TORIC_Z, b_idx, 0, np.arange(3))
        chain = SigmaZChain(geometry, ToricField(field, beta), lane_keys)
        for _ in range(therm_sweeps * sweep):
            chain.step()
        for k in range(per_beta):
            for _ in range(stride * sweep):
                chain.step()
            rows[b_idx * per_beta + k] = chain.values()

    labels = np.repeat(np.asarray(betas, dtype=np.float64), per_beta)
    meta = {
        "model": "toric_z",
        "n": n,
        "beta_grid": betas,
        "per_beta": per_beta,
        "seed": seed,
        "therm_sweeps": therm_sweeps,
        "stride": stride,
        "chains": 1,
        "field_preset": field_preset_name,
    }
    return LabeledDataset(labels, rows, SPIN, n, basis="z", meta=meta)


def loop_flip_mask(geometry: LatticeGeometry, g: VertexGroupElement) -> np.ndarray:
    """Bond flip set produced by a vertex-group element acting on all-up."""
    bits = g.bits
    bv = geometry.bond_vertices
    return bits[bv[:, 0]] ^ bits[bv[:, 1]]
