"""Molecular system data model.

A MolecularSystem bundles per-atom parameters, coordinates, the bonded term
lists (bonds, angles, dihedrals) and the nonbonded pair policy. Instances are
immutable; coordinate updates go through ``system.with_coords(new)`` which
shares every parameter array, so concurrent evaluations never race.

Validation happens at construction time: indices in range, positive force
constants where required, angle rest values strictly inside (0, pi), policy
pair sets disjoint and canonically ordered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ModelError(ValueError):
    """Raised when a system or term fails validation."""


@dataclass(frozen=True)
class AtomSpec:
    """Per-atom force-field parameters.

    q is the partial charge in units of e, sigma the LJ diameter in angstrom,
    epsilon the LJ well depth in kJ/mol.
    """

    id: int
    label: str
    q: float
    sigma: float
    epsilon: float

    def __post_init__(self):
        if self.id < 0:
            raise ModelError(f"atom id must be >= 0, got {self.id}")
        if not (self.sigma > 0.0):
            raise ModelError(f"atom {self.id}: sigma must be > 0, got {self.sigma}")
        if self.epsilon < 0.0:
            raise ModelError(f"atom {self.id}: epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class BondTerm:
    """Harmonic stretch K*(r - r0)^2 between atoms i and j."""

    i: int
    j: int
    K: float
    r0: float

    def __post_init__(self):
        if self.i == self.j:
            raise ModelError(f"bond ({self.i},{self.j}): endpoints must differ")
        if self.K < 0.0:
            raise ModelError(f"bond ({self.i},{self.j}): K must be >= 0")
        if not (self.r0 > 0.0):
            raise ModelError(f"bond ({self.i},{self.j}): r0 must be > 0")


@dataclass(frozen=True)
class AngleTerm:
    """Harmonic bend K*(theta - theta0)^2 with apex at atom j.

    theta0 is in radians here; file I/O converts from degrees.
    """

    i: int
    j: int
    k: int
    K: float
    theta0: float

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ModelError(f"angle ({self.i},{self.j},{self.k}): atoms must be distinct")
        if self.K < 0.0:
            raise ModelError(f"angle ({self.i},{self.j},{self.k}): K must be >= 0")
        if not (0.0 < self.theta0 < math.pi):
            raise ModelError(
                f"angle ({self.i},{self.j},{self.k}): theta0 must lie in (0, pi), "
                f"got {self.theta0}"
            )


@dataclass(frozen=True)
class DihedralTerm:
    """OPLS cosine-series torsion over the chain i-j-k-l.

    Energy is 0.5*(V1*(1+cos phi) + V2*(1-cos 2phi) + V3*(1+cos 3phi)
    + V4*(1-cos 4phi)) with phi the signed dihedral.
    """

    i: int
    j: int
    k: int
    l: int
    V1: float
    V2: float
    V3: float
    V4: float

    def __post_init__(self):
        if len({self.i, self.j, self.k, self.l}) != 4:
            raise ModelError(
                f"dihedral ({self.i},{self.j},{self.k},{self.l}): atoms must be distinct"
            )


def _canonical_pairs(pairs, natoms, what):
    """Validate and canonicalize a set of (i, j) pairs with i < j."""
    out = set()
    for i, j in pairs:
        if i == j:
            raise ModelError(f"{what} pair ({i},{j}): indices must differ")
        a, b = (i, j) if i < j else (j, i)
        if a < 0 or b >= natoms:
            raise ModelError(f"{what} pair ({i},{j}): index out of range for {natoms} atoms")
        out.add((a, b))
    return frozenset(out)


@dataclass(frozen=True)
class NonbondedPolicy:
    """Which pairs interact, at what scale, and under what cutoff.

    excluded pairs contribute nothing; scaled14 pairs are multiplied by s14;
    every other distinct pair has scale 1. cutoff is a hard truncation radius
    in angstrom, or None for no cutoff.
    """

    excluded: frozenset = frozenset()
    scaled14: frozenset = frozenset()
    s14: float = 0.5
    cutoff: float | None = None

    def __post_init__(self):
        if self.excluded & self.scaled14:
            raise ModelError("nonbonded policy: excluded and scaled14 pair sets overlap")
        if not (0.0 <= self.s14 <= 1.0):
            raise ModelError(f"nonbonded policy: s14 must be in [0, 1], got {self.s14}")
        if self.cutoff is not None and not (self.cutoff > 0.0):
            raise ModelError(f"nonbonded policy: cutoff must be > 0, got {self.cutoff}")

    def pair_scale(self, i, j):
        """Interaction scale for the unordered pair (i, j)."""
        key = (i, j) if i < j else (j, i)
        if key in self.excluded:
            return 0.0
        if key in self.scaled14:
            return self.s14
        return 1.0

    @staticmethod
    def no_exclusions(cutoff=None):
        """Literal all-pairs policy (every distinct pair at scale 1)."""
        return NonbondedPolicy(frozenset(), frozenset(), 0.5, cutoff)


def build_default_exclusions(natoms, bonds, s14=0.5, cutoff=None):
    """Derive the standard policy from the bond graph.

    Pairs separated by one or two bonds are excluded, pairs separated by
    exactly three bonds are scaled by s14. Separation is the graph distance
    in the bond topology (BFS), independent of geometry.
    """
    adj = [[] for _ in range(natoms)]
    for b in bonds:
        if b.i >= natoms or b.j >= natoms:
            raise ModelError(f"bond ({b.i},{b.j}): index out of range for {natoms} atoms")
        adj[b.i].append(b.j)
        adj[b.j].append(b.i)

    excluded = set()
    scaled = set()
    for src in range(natoms):
        # BFS to depth 3 is enough; deeper pairs interact at full scale.
        dist = {src: 0}
        frontier = [src]
        for depth in (1, 2, 3):
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = depth
                        nxt.append(v)
            frontier = nxt
        for v, d in dist.items():
            if v <= src:
                continue
            if d in (1, 2):
                excluded.add((src, v))
            elif d == 3:
                scaled.add((src, v))
    return NonbondedPolicy(frozenset(excluded), frozenset(scaled), s14, cutoff)


@dataclass(frozen=True)
class MolecularSystem:
    """Immutable system: atoms, coordinates and interaction terms.

    coords has shape (natoms, 3) in angstrom. The arrays handed to kernels
    (charges, LJ parameters, term index tables, the dense pair-scale matrix)
    are derived once and cached on first use.
    """

    atoms: tuple
    coords: np.ndarray
    bonds: tuple = ()
    angles: tuple = ()
    dihedrals: tuple = ()
    nonbonded: NonbondedPolicy = field(default_factory=NonbondedPolicy)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.atoms)
        for idx, a in enumerate(self.atoms):
            if a.id != idx:
                raise ModelError(f"atom ids must be 0..n-1 in order; position {idx} has id {a.id}")
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.shape != (n, 3):
            raise ModelError(f"coords shape {coords.shape} does not match {n} atoms")
        if not np.all(np.isfinite(coords)):
            raise ModelError("coords must be finite")
        object.__setattr__(self, "coords", coords)
        coords.setflags(write=False)

        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise ModelError(f"bond ({b.i},{b.j}): index out of range")
        for a in self.angles:
            if not all(0 <= t < n for t in (a.i, a.j, a.k)):
                raise ModelError(f"angle ({a.i},{a.j},{a.k}): index out of range")
        for d in self.dihedrals:
            if not all(0 <= t < n for t in (d.i, d.j, d.k, d.l)):
                raise ModelError(f"dihedral ({d.i},{d.j},{d.k},{d.l}): index out of range")
        _canonical_pairs(self.nonbonded.excluded, n, "excluded")
        _canonical_pairs(self.nonbonded.scaled14, n, "scaled14")

    @property
    def natoms(self):
        return len(self.atoms)

    def with_coords(self, coords):
        """New system sharing all parameters, with replaced coordinates."""
        coords = np.array(coords, dtype=np.float64).reshape(self.natoms, 3)
        new = replace(self, coords=coords, _cache={})
        # parameter-side caches stay valid when only coordinates change
        for key in ("params", "atom_terms"):
            if key in self._cache:
                new._cache[key] = self._cache[key]
        return new

    def arrays(self, dtype=np.float64):
        """Kernel-ready parameter arrays, cached per system.

        Returns a dict with charges q, LJ sigma/epsilon, bonded index and
        parameter tables, and the dense (n, n) pair scale matrix with zeros
        on the diagonal and on excluded pairs.
        """
        cached = self._cache.get("params")
        if cached is None:
            n = self.natoms
            q = np.array([a.q for a in self.atoms], dtype=np.float64)
            sigma = np.array([a.sigma for a in self.atoms], dtype=np.float64)
            epsilon = np.array([a.epsilon for a in self.atoms], dtype=np.float64)

            bond_idx = np.array([(b.i, b.j) for b in self.bonds], dtype=np.int64).reshape(-1, 2)
            bond_K = np.array([b.K for b in self.bonds], dtype=np.float64)
            bond_r0 = np.array([b.r0 for b in self.bonds], dtype=np.float64)

            ang_idx = np.array(
                [(a.i, a.j, a.k) for a in self.angles], dtype=np.int64
            ).reshape(-1, 3)
            ang_K = np.array([a.K for a in self.angles], dtype=np.float64)
            ang_t0 = np.array([a.theta0 for a in self.angles], dtype=np.float64)

            dih_idx = np.array(
                [(d.i, d.j, d.k, d.l) for d in self.dihedrals], dtype=np.int64
            ).reshape(-1, 4)
            dih_V = np.array(
                [(d.V1, d.V2, d.V3, d.V4) for d in self.dihedrals], dtype=np.float64
            ).reshape(-1, 4)

            scale = np.ones((n, n), dtype=np.float64)
            np.fill_diagonal(scale, 0.0)
            for (i, j) in self.nonbonded.excluded:
                scale[i, j] = scale[j, i] = 0.0
            for (i, j) in self.nonbonded.scaled14:
                scale[i, j] = scale[j, i] = self.nonbonded.s14
            cutoff = -1.0 if self.nonbonded.cutoff is None else float(self.nonbonded.cutoff)

            cached = {
                "q": q, "sigma": sigma, "epsilon": epsilon,
                "bond_idx": bond_idx, "bond_K": bond_K, "bond_r0": bond_r0,
                "ang_idx": ang_idx, "ang_K": ang_K, "ang_t0": ang_t0,
                "dih_idx": dih_idx, "dih_V": dih_V,
                "scale": scale, "cutoff": cutoff,
            }
            for v in cached.values():
                if isinstance(v, np.ndarray):
                    v.setflags(write=False)
            self._cache["params"] = cached
        if dtype == np.float64:
            return cached
        key = ("params", np.dtype(dtype).name)
        out = self._cache.get(key)
        if out is None:
            out = {
                k: (v.astype(dtype) if isinstance(v, np.ndarray) and v.dtype == np.float64 else v)
                for k, v in cached.items()
            }
            self._cache[key] = out
        return out

    def atom_terms(self, atom):
        """Row indices of the bonded terms that involve the given atom."""
        table = self._cache.get("atom_terms")
        if table is None:
            n = self.natoms
            table = {
                "bonds": [[] for _ in range(n)],
                "angles": [[] for _ in range(n)],
                "dihedrals": [[] for _ in range(n)],
            }
            for row, b in enumerate(self.bonds):
                for t in (b.i, b.j):
                    table["bonds"][t].append(row)
            for row, a in enumerate(self.angles):
                for t in (a.i, a.j, a.k):
                    table["angles"][t].append(row)
            for row, d in enumerate(self.dihedrals):
                for t in (d.i, d.j, d.k, d.l):
                    table["dihedrals"][t].append(row)
            for k in table:
                table[k] = [np.array(rows, dtype=np.int64) for rows in table[k]]
            self._cache["atom_terms"] = table
        return (
            table["bonds"][atom],
            table["angles"][atom],
            table["dihedrals"][atom],
        )
