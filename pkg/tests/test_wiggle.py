import numpy as np
import pytest

from ffmin.energy import energy_total
from ffmin.model import AtomSpec, BondTerm, MolecularSystem, NonbondedPolicy
from ffmin.optimizers import StopCriteria
from ffmin.optimizers.wiggle import WiggleConfig, WiggleResult, atom_wiggle
from ffmin.synth import make_chain_system

NO_TOL = dict(gradient_norm_rtol=0.0)


def diatomic(r, K=300.0, r0=1.5):
    return MolecularSystem(
        atoms=(AtomSpec(0, "A0", 0.0, 3.0, 0.1), AtomSpec(1, "A1", 0.0, 3.0, 0.1)),
        coords=np.array([[0.0, 0.0, 0.0], [r, 0.0, 0.0]]),
        bonds=(BondTerm(0, 1, K, r0),),
        nonbonded=NonbondedPolicy(excluded=frozenset({(0, 1)})),
    )


def test_diatomic_relaxes_to_rest_length():
    # axis-aligned bond: the per-axis parabola is exact, so the very first
    # accepted move lands on the rest length
    res = atom_wiggle(diatomic(1.8), WiggleConfig(h=0.05, seed=1),
                      StopCriteria(max_iterations=5, **NO_TOL))
    d = np.linalg.norm(res.system.coords[1] - res.system.coords[0])
    assert abs(d - 1.5) <= 1e-8
    assert res.f <= 1e-12
    assert res.status == "iteration_budget"


def test_wiggle_never_moves_off_a_minimum():
    s = diatomic(1.5)
    res = atom_wiggle(s, WiggleConfig(h=0.05, seed=2),
                      StopCriteria(max_iterations=10, **NO_TOL))
    assert np.array_equal(res.system.coords, s.coords)
    assert all(rec.step == 0.0 for rec in res.trace.records)
    assert res.f == 0.0


def test_every_accepted_move_strictly_lowers_audited_energy():
    # epoch_iterations=1 resyncs against a full recompute every iteration,
    # so each trace row's f is exact and auditable
    s = make_chain_system(12, seed=3, strain=0.4)
    res = atom_wiggle(s, WiggleConfig(h=0.05, seed=4, epoch_iterations=1),
                      StopCriteria(max_iterations=300, **NO_TOL))
    recs = res.trace.records
    moves = 0
    for prev, cur in zip(recs, recs[1:]):
        if cur.step > 0.0:
            moves += 1
            assert cur.f < prev.f
        else:
            assert cur.f == prev.f
    assert moves > 50
    assert res.f == energy_total(res.system).total
    assert res.f < recs[0].f


def test_wiggle_is_deterministic_per_seed():
    s = make_chain_system(12, seed=3, strain=0.4)
    stop = StopCriteria(max_iterations=60, **NO_TOL)
    a = atom_wiggle(s, WiggleConfig(h=0.05, seed=7), stop)
    b = atom_wiggle(s, WiggleConfig(h=0.05, seed=7), stop)
    c = atom_wiggle(s, WiggleConfig(h=0.05, seed=8), stop)
    assert np.array_equal(a.system.coords, b.system.coords)
    assert a.f == b.f
    assert [r.f for r in a.trace.records] == [r.f for r in b.trace.records]
    assert not np.array_equal(a.system.coords, c.system.coords)


def test_incremental_mode_rejects_cutoff_systems():
    s = make_chain_system(8, seed=5, cutoff=7.0)
    with pytest.raises(ValueError, match="cutoff"):
        atom_wiggle(s, WiggleConfig())


def test_full_recompute_mode_handles_cutoff_systems():
    s = make_chain_system(8, seed=5, cutoff=7.0)
    res = atom_wiggle(s, WiggleConfig(seed=6, use_incremental_coulomb=False),
                      StopCriteria(max_iterations=100, **NO_TOL))
    assert res.f < energy_total(s).total


def test_colliding_probe_is_discarded_not_fatal():
    # the +x probe of either atom lands exactly on the other one; that probe
    # must be dropped while the rest still drive the atoms apart
    s = MolecularSystem(
        atoms=(AtomSpec(0, "A0", 0.5, 3.0, 0.2), AtomSpec(1, "A1", 0.5, 3.0, 0.2)),
        coords=np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]]),
        nonbonded=NonbondedPolicy.no_exclusions(),
    )
    res = atom_wiggle(s, WiggleConfig(h=0.05, seed=0),
                      StopCriteria(max_iterations=50, **NO_TOL))
    d = np.linalg.norm(res.system.coords[1] - res.system.coords[0])
    assert d > 1.0
    assert res.f < res.trace.records[0].f


def test_incremental_and_full_agree_without_far_field():
    # all atoms inside the cutoff: both probe modes see the same energies,
    # so seeded runs walk identical paths
    s = make_chain_system(6, seed=9, strain=0.3)
    stop = StopCriteria(max_iterations=80, **NO_TOL)
    a = atom_wiggle(s, WiggleConfig(h=0.05, seed=11, cutoff=1e6), stop)
    b = atom_wiggle(s, WiggleConfig(h=0.05, seed=11,
                                    use_incremental_coulomb=False), stop)
    assert np.allclose(a.system.coords, b.system.coords, atol=1e-9)
    assert a.f == pytest.approx(b.f, rel=1e-9)


def test_wiggle_config_validation():
    with pytest.raises(ValueError, match="h"):
        WiggleConfig(h=0.0)
    with pytest.raises(ValueError, match="epoch"):
        WiggleConfig(epoch_iterations=0)
    with pytest.raises(ValueError, match="cutoff"):
        WiggleConfig(cutoff=-1.0)


def test_wiggle_trace_bookkeeping():
    s = make_chain_system(10, seed=12, strain=0.3)
    res = atom_wiggle(s, WiggleConfig(seed=13),
                      StopCriteria(max_iterations=40, **NO_TOL))
    assert isinstance(res, WiggleResult)
    assert res.iterations == 40
    assert len(res.trace.records) == 41
    calls = [r.value_calls for r in res.trace.records]
    assert calls == sorted(calls)
    assert all(np.isnan(r.grad_norm) for r in res.trace.records)
    assert np.array_equal(res.x, res.system.coords.ravel())
