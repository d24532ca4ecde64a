"""The numba and numpy backends must agree to roundoff on every kernel."""

import numpy as np
import pytest

from conftest import two_cluster_system
from ffmin.energy import energy_total, gradient_total
from ffmin.kernels import (
    NUMBA_BACKEND,
    NUMPY_BACKEND,
    KernelBackend,
    get_backend,
)
from ffmin.synth import make_chain_system

needs_numba = pytest.mark.skipif(NUMBA_BACKEND is None, reason="numba not installed")


# ---------------------------------------------------------------- selection

def test_get_backend_explicit_names():
    assert get_backend("numpy") is NUMPY_BACKEND
    assert get_backend("numpy").name == "numpy"
    if NUMBA_BACKEND is not None:
        assert get_backend("numba") is NUMBA_BACKEND


def test_get_backend_passthrough():
    assert get_backend(NUMPY_BACKEND) is NUMPY_BACKEND


def test_get_backend_env_variable(monkeypatch):
    monkeypatch.setenv("FFMIN_BACKEND", "numpy")
    assert get_backend() is NUMPY_BACKEND
    monkeypatch.setenv("FFMIN_BACKEND", "  NumPy  ")  # normalized
    assert get_backend() is NUMPY_BACKEND


def test_explicit_name_beats_env(monkeypatch):
    monkeypatch.setenv("FFMIN_BACKEND", "numpy")
    if NUMBA_BACKEND is not None:
        assert get_backend("numba") is NUMBA_BACKEND


@needs_numba
def test_get_backend_default_prefers_numba(monkeypatch):
    monkeypatch.delenv("FFMIN_BACKEND", raising=False)
    assert get_backend() is NUMBA_BACKEND


def test_get_backend_unknown_name():
    with pytest.raises(ValueError, match="unknown kernel backend"):
        get_backend("fortran")


def test_get_backend_rejects_blank_env(monkeypatch):
    # empty/whitespace env value falls through to the default
    monkeypatch.setenv("FFMIN_BACKEND", "   ")
    kb = get_backend()
    assert isinstance(kb, KernelBackend)


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def chain():
    return make_chain_system(14, seed=3, strain=0.3)


@pytest.fixture(scope="module")
def cloud():
    return two_cluster_system(seed=5, n=24, gap=12.0)


def arrays(system):
    p = system.arrays(np.float64)
    c = np.ascontiguousarray(system.coords, dtype=np.float64)
    return c, p


# ---------------------------------------------------------------- full path

@needs_numba
@pytest.mark.parametrize("fixture", ["chain", "cloud"])
def test_energy_breakdowns_agree(fixture, request):
    system = request.getfixturevalue(fixture)
    a = energy_total(system, backend=NUMBA_BACKEND)
    b = energy_total(system, backend=NUMPY_BACKEND)
    for name in ("stretch", "bend", "torsion", "coulomb", "vdw", "total"):
        assert getattr(a, name) == pytest.approx(getattr(b, name),
                                                 rel=1e-12, abs=1e-12)


@needs_numba
@pytest.mark.parametrize("fixture", ["chain", "cloud"])
def test_gradients_agree(fixture, request):
    system = request.getfixturevalue(fixture)
    ga = gradient_total(system, backend=NUMBA_BACKEND)
    gb = gradient_total(system, backend=NUMPY_BACKEND)
    scale = max(1.0, float(np.max(np.abs(ga))))
    assert np.max(np.abs(ga - gb)) / scale < 1e-13


def test_numpy_backend_is_repeatable(chain):
    a = energy_total(chain, backend=NUMPY_BACKEND)
    b = energy_total(chain, backend=NUMPY_BACKEND)
    assert a == b
    assert np.array_equal(gradient_total(chain, backend=NUMPY_BACKEND),
                          gradient_total(chain, backend=NUMPY_BACKEND))


# ---------------------------------------------------------------- kernels

@needs_numba
def test_bonded_kernels_agree(chain):
    c, p = arrays(chain)
    assert NUMBA_BACKEND.bond_energy(c, p["bond_idx"], p["bond_K"], p["bond_r0"]) == \
        pytest.approx(NUMPY_BACKEND.bond_energy(c, p["bond_idx"], p["bond_K"],
                                                p["bond_r0"]), rel=1e-13)
    ea, bad_a = NUMBA_BACKEND.angle_energy(c, p["ang_idx"], p["ang_K"], p["ang_t0"])
    eb, bad_b = NUMPY_BACKEND.angle_energy(c, p["ang_idx"], p["ang_K"], p["ang_t0"])
    assert (bad_a, bad_b) == (-1, -1)
    assert ea == pytest.approx(eb, rel=1e-13)
    ea, bad_a = NUMBA_BACKEND.dihedral_energy(c, p["dih_idx"], p["dih_V"])
    eb, bad_b = NUMPY_BACKEND.dihedral_energy(c, p["dih_idx"], p["dih_V"])
    assert (bad_a, bad_b) == (-1, -1)
    assert ea == pytest.approx(eb, rel=1e-13)


@needs_numba
@pytest.mark.parametrize("kernel,args", [
    ("bond_grad", ("bond_idx", "bond_K", "bond_r0")),
    ("angle_grad", ("ang_idx", "ang_K", "ang_t0")),
    ("dihedral_grad", ("dih_idx", "dih_V")),
])
def test_bonded_gradient_kernels_agree(chain, kernel, args):
    c, p = arrays(chain)
    ga = np.zeros_like(c)
    gb = np.zeros_like(c)
    out_a = getattr(NUMBA_BACKEND, kernel)(c, *[p[k] for k in args], ga)
    out_b = getattr(NUMPY_BACKEND, kernel)(c, *[p[k] for k in args], gb)
    assert out_a[-1] == out_b[-1] == -1
    assert out_a[0] == pytest.approx(out_b[0], rel=1e-13)
    assert np.allclose(ga, gb, rtol=1e-12, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("cutoff", [0.0, 7.0])
def test_nonbonded_kernels_agree(cloud, cutoff):
    c, p = arrays(cloud)
    ea = NUMBA_BACKEND.nb_energy(c, p["q"], p["sigma"], p["epsilon"], p["scale"], cutoff)
    eb = NUMPY_BACKEND.nb_energy(c, p["q"], p["sigma"], p["epsilon"], p["scale"], cutoff)
    assert ea[2:] == eb[2:] == (-1, -1)
    assert ea[0] == pytest.approx(eb[0], rel=1e-12)
    assert ea[1] == pytest.approx(eb[1], rel=1e-12)
    ga = np.zeros_like(c)
    gb = np.zeros_like(c)
    ra = NUMBA_BACKEND.nb_grad(c, p["q"], p["sigma"], p["epsilon"], p["scale"], cutoff, ga)
    rb = NUMPY_BACKEND.nb_grad(c, p["q"], p["sigma"], p["epsilon"], p["scale"], cutoff, gb)
    assert ra[0] == pytest.approx(rb[0], rel=1e-12)
    assert ra[1] == pytest.approx(rb[1], rel=1e-12)
    scale = max(1.0, float(np.max(np.abs(ga))))
    assert np.max(np.abs(ga - gb)) / scale < 1e-13


@needs_numba
def test_nonbonded_collision_reported_identically(cloud):
    c, p = arrays(cloud)
    c = c.copy()
    c[3] = c[11]
    ea = NUMBA_BACKEND.nb_energy(c, p["q"], p["sigma"], p["epsilon"], p["scale"], 0.0)
    eb = NUMPY_BACKEND.nb_energy(c, p["q"], p["sigma"], p["epsilon"], p["scale"], 0.0)
    assert ea[2:] == eb[2:] == (3, 11)


@needs_numba
def test_farfield_build_agrees(cloud):
    c, p = arrays(cloud)
    for atom in (0, 7, 23):
        out_a = NUMBA_BACKEND.farfield_build(c, p["q"], p["scale"], atom, 7.0)
        out_b = NUMPY_BACKEND.farfield_build(c, p["q"], p["scale"], atom, 7.0)
        assert out_a[5] == out_b[5] == -1
        assert out_a[0] == pytest.approx(out_b[0], rel=1e-12, abs=1e-15)
        for k in (1, 2, 3):
            assert out_a[k] == pytest.approx(out_b[k], rel=1e-12, abs=1e-15)
        assert np.array_equal(np.asarray(out_a[4]), np.asarray(out_b[4]))


@needs_numba
def test_delta_kernels_agree(cloud):
    c, p = arrays(cloud)
    atom = 7
    newpos = c[atom] + np.array([0.31, -0.17, 0.23])
    near = np.asarray(NUMPY_BACKEND.farfield_build(c, p["q"], p["scale"], atom, 7.0)[4])
    near_idx = np.nonzero(near)[0]
    assert near_idx.size > 0
    da = NUMBA_BACKEND.near_nb_delta(c, p["q"], p["sigma"], p["epsilon"],
                                     p["scale"], atom, newpos, near_idx)
    db = NUMPY_BACKEND.near_nb_delta(c, p["q"], p["sigma"], p["epsilon"],
                                     p["scale"], atom, newpos, near_idx)
    assert da[2] == db[2] == -1
    assert da[0] == pytest.approx(db[0], rel=1e-12, abs=1e-15)
    assert da[1] == pytest.approx(db[1], rel=1e-12, abs=1e-15)
    for cutoff in (0.0, 7.0):
        da = NUMBA_BACKEND.nb_atom_delta(c, p["q"], p["sigma"], p["epsilon"],
                                         p["scale"], cutoff, atom, newpos)
        db = NUMPY_BACKEND.nb_atom_delta(c, p["q"], p["sigma"], p["epsilon"],
                                         p["scale"], cutoff, atom, newpos)
        assert da[2] == db[2] == -1
        assert da[0] == pytest.approx(db[0], rel=1e-12, abs=1e-15)
        assert da[1] == pytest.approx(db[1], rel=1e-12, abs=1e-15)


@needs_numba
def test_bonded_delta_kernels_agree(chain):
    c, p = arrays(chain)
    atom = 6
    newpos = c[atom] + np.array([0.21, 0.13, -0.27])
    bidx, aidx, didx = p["bond_idx"], p["ang_idx"], p["dih_idx"]
    brows = np.nonzero((bidx[:, 0] == atom) | (bidx[:, 1] == atom))[0]
    arows = np.nonzero(np.any(aidx == atom, axis=1))[0]
    drows = np.nonzero(np.any(didx == atom, axis=1))[0]
    assert brows.size and arows.size and drows.size
    da = NUMBA_BACKEND.bond_delta(c, atom, newpos, bidx, p["bond_K"], p["bond_r0"], brows)
    db = NUMPY_BACKEND.bond_delta(c, atom, newpos, bidx, p["bond_K"], p["bond_r0"], brows)
    assert da == pytest.approx(db, rel=1e-12, abs=1e-14)
    da, bad_a = NUMBA_BACKEND.angle_delta(c, atom, newpos, aidx, p["ang_K"], p["ang_t0"], arows)
    db, bad_b = NUMPY_BACKEND.angle_delta(c, atom, newpos, aidx, p["ang_K"], p["ang_t0"], arows)
    assert bad_a == bad_b == -1
    assert da == pytest.approx(db, rel=1e-12, abs=1e-14)
    da, bad_a = NUMBA_BACKEND.dihedral_delta(c, atom, newpos, didx, p["dih_V"], drows)
    db, bad_b = NUMPY_BACKEND.dihedral_delta(c, atom, newpos, didx, p["dih_V"], drows)
    assert bad_a == bad_b == -1
    assert da == pytest.approx(db, rel=1e-12, abs=1e-14)


@needs_numba
def test_degenerate_angle_reported_identically():
    # zero-length arm: energy kernels report the failing term index
    c = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    aidx = np.array([[0, 1, 2]], dtype=np.int64)
    K = np.array([50.0])
    t0 = np.array([1.9])
    out_a = NUMBA_BACKEND.angle_energy(c, aidx, K, t0)
    out_b = NUMPY_BACKEND.angle_energy(c, aidx, K, t0)
    assert out_a[1] == out_b[1] == 0
