"""Potential energy, analytic gradient, and the incremental-move machinery.

The objective is the OPLS-style sum

    E = E_stretch + E_bend + E_torsion + E_coulomb + E_vdw

over a MolecularSystem, in kJ/mol with distances in angstrom. All functions
here are pure in (system, coords); summation order is fixed, so repeated
calls are bit-identical on the same backend.

Degenerate geometry raises EnergyEvaluationError naming the term instead of
propagating NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import COULOMB_KJ_ANGSTROM
from .kernels import get_backend
from .model import MolecularSystem


class EnergyEvaluationError(ValueError):
    """Degenerate or invalid geometry in a named interaction term."""


@dataclass(frozen=True)
class EnergyBreakdown:
    stretch: float
    bend: float
    torsion: float
    coulomb: float
    vdw: float

    @property
    def total(self):
        # computed as the sum, never stored separately
        return self.stretch + self.bend + self.torsion + self.coulomb + self.vdw


@dataclass(frozen=True)
class NeighborList:
    """Symmetric within-cutoff adjacency from a brute-force pair scan."""

    cutoff: float
    neighbors: tuple  # tuple of int64 arrays, one per atom


@dataclass(frozen=True)
class FarFieldLinearization:
    """First-order model of one atom's far-field Coulomb sum.

    e_far0 is the exact far-field energy at the reference position and coef
    its gradient there, so moving the atom by delta changes the far-field
    part by approximately coef . delta. near_idx lists the atoms handled
    exactly (within cutoff, plus every excluded/scaled partner regardless of
    distance).
    """

    atom: int
    cutoff: float
    ref_pos: np.ndarray
    e_far0: float
    coef: np.ndarray
    near_idx: np.ndarray


def _coords(system, dtype):
    return np.ascontiguousarray(system.coords, dtype=dtype)


def _bond_name(system, row):
    b = system.bonds[row]
    return f"stretch term {row} (atoms {b.i}-{b.j})"


def _angle_name(system, row):
    a = system.angles[row]
    return f"bend term {row} (atoms {a.i}-{a.j}-{a.k})"


def _dihedral_name(system, row):
    d = system.dihedrals[row]
    return f"torsion term {row} (atoms {d.i}-{d.j}-{d.k}-{d.l})"


def energy_stretch(system: MolecularSystem, dtype=np.float64, backend=None) -> float:
    p = system.arrays(dtype)
    kb = get_backend(backend)
    return float(kb.bond_energy(_coords(system, dtype), p["bond_idx"], p["bond_K"], p["bond_r0"]))


def energy_bend(system: MolecularSystem, dtype=np.float64, backend=None) -> float:
    p = system.arrays(dtype)
    kb = get_backend(backend)
    e, bad = kb.angle_energy(_coords(system, dtype), p["ang_idx"], p["ang_K"], p["ang_t0"])
    if bad >= 0:
        raise EnergyEvaluationError(f"{_angle_name(system, bad)}: zero-length arm")
    return float(e)


def energy_torsion(system: MolecularSystem, dtype=np.float64, backend=None) -> float:
    p = system.arrays(dtype)
    kb = get_backend(backend)
    e, bad = kb.dihedral_energy(_coords(system, dtype), p["dih_idx"], p["dih_V"])
    if bad >= 0:
        raise EnergyEvaluationError(f"{_dihedral_name(system, bad)}: degenerate plane")
    return float(e)


def _nb_energies(system, dtype, backend):
    p = system.arrays(dtype)
    kb = get_backend(backend)
    ec, ev, bi, bj = kb.nb_energy(
        _coords(system, dtype), p["q"], p["sigma"], p["epsilon"], p["scale"], p["cutoff"]
    )
    if bi >= 0:
        raise EnergyEvaluationError(f"nonbonded pair ({bi},{bj}): coincident atoms")
    return float(ec), float(ev)


def energy_coulomb(system: MolecularSystem, dtype=np.float64, backend=None) -> float:
    return _nb_energies(system, dtype, backend)[0]


def energy_vdw(system: MolecularSystem, dtype=np.float64, backend=None) -> float:
    return _nb_energies(system, dtype, backend)[1]


def energy_total(system: MolecularSystem, dtype=np.float64, backend=None) -> EnergyBreakdown:
    ec, ev = _nb_energies(system, dtype, backend)
    return EnergyBreakdown(
        stretch=energy_stretch(system, dtype, backend),
        bend=energy_bend(system, dtype, backend),
        torsion=energy_torsion(system, dtype, backend),
        coulomb=ec,
        vdw=ev,
    )


def energy_and_gradient(system: MolecularSystem, dtype=np.float64, backend=None):
    """One fused sweep: (EnergyBreakdown, flattened analytic gradient).

    Callers needing both quantities should use this instead of two separate
    calls; the gradient kernels produce the term energies as a byproduct.
    """
    p = system.arrays(dtype)
    kb = get_backend(backend)
    c = _coords(system, dtype)
    gout = np.zeros_like(c)
    e_bond, bad = kb.bond_grad(c, p["bond_idx"], p["bond_K"], p["bond_r0"], gout)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_bond_name(system, bad)}: coincident endpoints")
    e_ang, bad = kb.angle_grad(c, p["ang_idx"], p["ang_K"], p["ang_t0"], gout)
    if bad >= 0:
        raise EnergyEvaluationError(
            f"{_angle_name(system, bad)}: zero-length arm or collinear geometry"
        )
    e_dih, bad = kb.dihedral_grad(c, p["dih_idx"], p["dih_V"], gout)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_dihedral_name(system, bad)}: degenerate plane")
    ec, ev, bi, bj = kb.nb_grad(
        c, p["q"], p["sigma"], p["epsilon"], p["scale"], p["cutoff"], gout
    )
    if bi >= 0:
        raise EnergyEvaluationError(f"nonbonded pair ({bi},{bj}): coincident atoms")
    breakdown = EnergyBreakdown(
        stretch=float(e_bond), bend=float(e_ang), torsion=float(e_dih),
        coulomb=float(ec), vdw=float(ev),
    )
    return breakdown, gout.reshape(-1)


def gradient_total(system: MolecularSystem, dtype=np.float64, backend=None):
    """Analytic gradient of the total energy, flattened to length 3n."""
    return energy_and_gradient(system, dtype, backend)[1]


def finite_difference_gradient(system: MolecularSystem, step=1e-5, dtype=np.float64,
                               backend=None):
    """Central-difference gradient of energy_total, flattened to 3n."""
    if not step > 0:
        raise ValueError(f"FD step must be > 0, got {step}")
    base = np.array(system.coords, dtype=np.float64)
    flat = base.reshape(-1)
    g = np.zeros(flat.size, dtype=np.float64)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        ep = energy_total(system.with_coords(base), dtype, backend).total
        flat[k] = orig - step
        em = energy_total(system.with_coords(base), dtype, backend).total
        flat[k] = orig
        g[k] = (ep - em) / (2.0 * step)
    return g


def build_neighbor_list(system: MolecularSystem, cutoff: float) -> NeighborList:
    """Brute-force O(n^2) within-cutoff adjacency (no spatial index)."""
    if not cutoff > 0:
        raise ValueError(f"cutoff must be > 0, got {cutoff}")
    c = system.coords
    n = system.natoms
    d = c[:, None, :] - c[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    np.fill_diagonal(r, np.inf)
    mask = r <= cutoff
    neighbors = tuple(np.nonzero(mask[i])[0].astype(np.int64) for i in range(n))
    return NeighborList(cutoff=float(cutoff), neighbors=neighbors)


def linearize_farfield_coulomb(system: MolecularSystem, atom: int,
                               cutoff: float) -> FarFieldLinearization:
    """Split atom's Coulomb sum at cutoff and linearize the far part.

    Excluded and 1-4 scaled partners always land in the near set, whatever
    their distance, so the far sum is a plain unscaled charge sum.
    """
    if not 0 <= atom < system.natoms:
        raise ValueError(f"atom index {atom} out of range for {system.natoms} atoms")
    if not cutoff > 0:
        raise ValueError(f"cutoff must be > 0, got {cutoff}")
    p = system.arrays(np.float64)
    kb = get_backend()
    e0, cx, cy, cz, near_mask, bad = kb.farfield_build(
        system.coords, p["q"], p["scale"], atom, float(cutoff)
    )
    if bad >= 0:
        raise EnergyEvaluationError(f"nonbonded pair ({atom},{bad}): coincident atoms")
    return FarFieldLinearization(
        atom=atom,
        cutoff=float(cutoff),
        ref_pos=system.coords[atom].copy(),
        e_far0=float(e0),
        coef=np.array([cx, cy, cz], dtype=np.float64),
        near_idx=np.nonzero(near_mask)[0].astype(np.int64),
    )


def delta_energy_atom_move(system: MolecularSystem, lin: FarFieldLinearization,
                           delta) -> float:
    """Energy change for moving lin.atom by delta, using the far-field model.

    Bonded terms touching the atom and near-field nonbonded pairs are
    recomputed exactly; the far Coulomb field changes by the linear form
    coef . delta; far vdW is neglected. Only valid while the system still
    holds the coordinates lin was built from.

    Requires the system's own nonbonded cutoff to be "none": with a hard
    system cutoff the far field modelled here would not be part of the
    objective at all.
    """
    if system.nonbonded.cutoff is not None:
        raise ValueError("incremental delta requires a system nonbonded cutoff of none")
    delta = np.asarray(delta, dtype=np.float64).reshape(3)
    atom = lin.atom
    newpos = system.coords[atom] + delta
    p = system.arrays(np.float64)
    kb = get_backend()
    c = system.coords

    dec, dev, bad = kb.near_nb_delta(
        c, p["q"], p["sigma"], p["epsilon"], p["scale"], atom, newpos, lin.near_idx
    )
    if bad >= 0:
        raise EnergyEvaluationError(f"nonbonded pair ({atom},{bad}): coincident atoms")

    bond_rows, ang_rows, dih_rows = system.atom_terms(atom)
    de = kb.bond_delta(c, atom, newpos, p["bond_idx"], p["bond_K"], p["bond_r0"], bond_rows)
    dea, bad = kb.angle_delta(c, atom, newpos, p["ang_idx"], p["ang_K"], p["ang_t0"], ang_rows)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_angle_name(system, bad)}: zero-length arm")
    ded, bad = kb.dihedral_delta(c, atom, newpos, p["dih_idx"], p["dih_V"], dih_rows)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_dihedral_name(system, bad)}: degenerate plane")

    far = float(lin.coef @ delta)
    return float(de) + float(dea) + float(ded) + float(dec) + float(dev) + far


def exact_delta_atom_move(system: MolecularSystem, atom: int, delta,
                          dtype=np.float64, backend=None) -> float:
    """Exact O(n) energy change for moving one atom (no linearization).

    Used to confirm candidate moves and as the oracle for the far-field
    approximation error.
    """
    delta = np.asarray(delta, dtype=np.float64).reshape(3)
    newpos = system.coords[atom] + delta
    p = system.arrays(dtype)
    kb = get_backend(backend)
    c = _coords(system, dtype)
    dec, dev, bad = kb.nb_atom_delta(
        c, p["q"], p["sigma"], p["epsilon"], p["scale"], p["cutoff"], atom,
        newpos.astype(dtype)
    )
    if bad >= 0:
        raise EnergyEvaluationError(f"nonbonded pair ({atom},{bad}): coincident atoms")
    bond_rows, ang_rows, dih_rows = system.atom_terms(atom)
    de = kb.bond_delta(c, atom, newpos.astype(dtype), p["bond_idx"], p["bond_K"],
                       p["bond_r0"], bond_rows)
    dea, bad = kb.angle_delta(c, atom, newpos.astype(dtype), p["ang_idx"], p["ang_K"],
                              p["ang_t0"], ang_rows)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_angle_name(system, bad)}: zero-length arm")
    ded, bad = kb.dihedral_delta(c, atom, newpos.astype(dtype), p["dih_idx"],
                                 p["dih_V"], dih_rows)
    if bad >= 0:
        raise EnergyEvaluationError(f"{_dihedral_name(system, bad)}: degenerate plane")
    return float(de) + float(dea) + float(ded) + float(dec) + float(dev)


# re-export the constant under its conventional name
C_COULOMB = COULOMB_KJ_ANGSTROM
