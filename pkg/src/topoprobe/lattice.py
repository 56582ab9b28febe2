"""Geometry and spin-configuration primitives on an N x N torus.

Spins live on the 2n^2 bonds of an n x n periodic square lattice.  The bond
indexing is fixed package-wide (and in the dataset file format):

* horizontal bond ``h(r, c) = r*n + c`` joins vertex ``(r, c)`` to
  ``(r, (c+1) % n)``; indices ``0 .. n^2 - 1``;
* vertical bond ``v(r, c) = n^2 + r*n + c`` joins ``(r, c)`` to
  ``((r+1) % n, c)``; indices ``n^2 .. 2n^2 - 1``.

Plaquettes and vertices are row-major: plaquette ``p(r, c) = r*n + c`` is the
square with top-left corner ``(r, c)``; vertex ``s(r, c) = r*n + c`` is the
lattice site itself.  Every bond belongs to exactly two plaquettes and two
vertices, and the product of all plaquette (or vertex) operators is the
identity -- the torus relation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatticeGeometry:
    """Incidence maps between bonds, plaquettes and vertices."""

    n: int
    bond_count: int
    plaquette_bonds: np.ndarray  # (n^2, 4) bond indices per plaquette
    vertex_bonds: np.ndarray     # (n^2, 4) bond indices per vertex
    bond_plaquettes: np.ndarray  # (2n^2, 2) plaquettes containing each bond
    bond_vertices: np.ndarray    # (2n^2, 2) vertices touching each bond

    @property
    def plaquette_count(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class SpinConfig:
    """Classical +-1 spin string over the bonds, tagged with its Pauli basis.

    ``basis`` records whether the values are sigma^z or sigma^x eigenvalues;
    several operations only make sense in one basis and check the tag.
    """

    values: np.ndarray
    basis: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int8)
        if self.basis not in ("z", "x"):
            raise ValueError(f"basis must be 'z' or 'x', got {self.basis!r}")
        if not np.all(np.abs(values) == 1):
            raise ValueError("spin values must be +1 or -1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FieldConfig:
    """Per-bond field strengths lambda_i, each in [-1, 1]."""

    lambdas: np.ndarray

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if np.any(np.abs(lambdas) > 1.0 + 1e-12):
            raise ValueError("field values must lie in [-1, 1]")
        lambdas.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)

    def __len__(self) -> int:
        return self.lambdas.shape[0]


def build_geometry(n: int) -> LatticeGeometry:
    """Build the incidence maps of the n x n torus.

    Rejects n < 2: a 1 x 1 "torus" has every bond incident to a single
    plaquette twice, which breaks the two-distinct-plaquettes invariant.
    """
    if n < 2:
        raise ValueError("lattice size must be at least 2")
    nsq = n * n

    def h(r, c):
        return (r % n) * n + (c % n)

    def v(r, c):
        return nsq + (r % n) * n + (c % n)

    plaquette_bonds = np.empty((nsq, 4), dtype=np.int64)
    vertex_bonds = np.empty((nsq, 4), dtype=np.int64)
    for r in range(n):
        for c in range(n):
            p = r * n + c
            plaquette_bonds[p] = (h(r, c), v(r, c + 1), h(r + 1, c), v(r, c))
            vertex_bonds[p] = (h(r, c), v(r - 1, c), h(r, c - 1), v(r, c))

    bond_plaquettes = np.empty((2 * nsq, 2), dtype=np.int64)
    bond_vertices = np.empty((2 * nsq, 2), dtype=np.int64)
    for r in range(n):
        for c in range(n):
            p = r * n + c
            bond_plaquettes[h(r, c)] = (((r - 1) % n) * n + c, p)
            bond_plaquettes[v(r, c)] = (r * n + (c - 1) % n, p)
            bond_vertices[h(r, c)] = (p, r * n + (c + 1) % n)
            bond_vertices[v(r, c)] = (p, ((r + 1) % n) * n + c)

    for arr in (plaquette_bonds, vertex_bonds, bond_plaquettes, bond_vertices):
        arr.setflags(write=False)
    return LatticeGeometry(
        n=n,
        bond_count=2 * nsq,
        plaquette_bonds=plaquette_bonds,
        vertex_bonds=vertex_bonds,
        bond_plaquettes=bond_plaquettes,
        bond_vertices=bond_vertices,
    )


def all_up(geometry: LatticeGeometry, basis: str) -> SpinConfig:
    return SpinConfig(np.ones(geometry.bond_count, dtype=np.int8), basis)


def _check_config(geometry: LatticeGeometry, config: SpinConfig):
    if len(config) != geometry.bond_count:
        raise ValueError(
            f"config has {len(config)} spins, geometry expects {geometry.bond_count}"
        )


def plaquette_product(geometry: LatticeGeometry, config: SpinConfig, p: int) -> int:
    """Product of the four spins bounding plaquette p."""
    _check_config(geometry, config)
    if not 0 <= p < geometry.plaquette_count:
        raise IndexError(f"plaquette index {p} out of range")
    return int(np.prod(config.values[geometry.plaquette_bonds[p]]))


def vertex_product(geometry: LatticeGeometry, config: SpinConfig, s: int) -> int:
    """Product of the four sigma^x eigenvalues on the bonds meeting vertex s."""
    _check_config(geometry, config)
    if config.basis != "x":
        raise ValueError("vertex products are defined on x-basis configurations")
    if not 0 <= s < geometry.plaquette_count:
        raise IndexError(f"vertex index {s} out of range")
    return int(np.prod(config.values[geometry.vertex_bonds[s]]))


def plaquette_products(geometry: LatticeGeometry, values: np.ndarray) -> np.ndarray:
    """All plaquette products for a batch of spin value rows.

    ``values`` has shape (..., 2n^2); the result has shape (..., n^2).
    """
    return np.prod(values[..., geometry.plaquette_bonds], axis=-1)


def vertex_products(geometry: LatticeGeometry, values: np.ndarray) -> np.ndarray:
    return np.prod(values[..., geometry.vertex_bonds], axis=-1)


def _as_mask(mask, count: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (count,):
        raise ValueError(f"mask must have shape ({count},), got {mask.shape}")
    return mask


def apply_plaquette_flips(
    geometry: LatticeGeometry, config: SpinConfig, mask
) -> SpinConfig:
    """Flip every bond once per adjacent masked plaquette (XOR of flips).

    This is the action of the product of plaquette operators selected by
    ``mask`` on an x-basis configuration; the full mask is the identity
    because each bond sits in exactly two plaquettes.
    """
    _check_config(geometry, config)
    mask = _as_mask(mask, geometry.plaquette_count)
    flips = mask[geometry.bond_plaquettes].sum(axis=1) % 2
    return SpinConfig(config.values * (1 - 2 * flips).astype(np.int8), config.basis)


def apply_vertex_flips(
    geometry: LatticeGeometry, config: SpinConfig, mask
) -> SpinConfig:
    """XOR action of the selected vertex operators on a z-basis configuration."""
    _check_config(geometry, config)
    mask = _as_mask(mask, geometry.plaquette_count)
    flips = mask[geometry.bond_vertices].sum(axis=1) % 2
    return SpinConfig(config.values * (1 - 2 * flips).astype(np.int8), config.basis)


def violated_plaquettes(geometry: LatticeGeometry, config: SpinConfig) -> np.ndarray:
    """Indices of plaquettes with product -1; empty iff the configuration
    lies in the closed-loop (gauge-constrained) manifold."""
    _check_config(geometry, config)
    if config.basis != "z":
        raise ValueError("plaquette violations are defined on z-basis configurations")
    products = plaquette_products(geometry, config.values)
    return np.flatnonzero(products < 0)
