import math

import numpy as np
import pytest

from conftest import assert_systems_equal
from ffmin.model import MolecularSystem, NonbondedPolicy
from ffmin.synth import make_chain_system
from ffmin.sysio import SystemFileError, load_system, save_system

MINIMAL = """\
format_version: 1
section atoms
0 CT -0.18 3.5 0.276
1 HC 0.06 2.5 0.1255
section coords
0.0 0.0 0.0
1.09 0.0 0.0
section bonds
0 1 1422.56 1.09
section nonbonded
mode: auto
s14: 0.5
cutoff: none
"""


def write(tmp_path, text, name="sys.ffs"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_file(tmp_path):
    system = load_system(write(tmp_path, MINIMAL))
    assert system.natoms == 2
    assert len(system.bonds) == 1
    assert system.bonds[0].K == 1422.56
    assert system.atoms[1].label == "HC"
    # 0-1 bonded, so the default policy excludes the only pair
    assert system.nonbonded.excluded == frozenset({(0, 1)})
    assert system.nonbonded.cutoff is None


def test_comments_and_blank_lines_ignored(tmp_path):
    text = MINIMAL.replace("section atoms", "# leading comment\n\nsection atoms")
    text = text.replace("0 1 1422.56 1.09", "0 1 1422.56 1.09  # inline")
    system = load_system(write(tmp_path, text))
    assert system.bonds[0].r0 == 1.09


def test_round_trip_explicit(tmp_path, chain10):
    p = tmp_path / "out.ffs"
    save_system(chain10, p, mode="explicit")
    assert_systems_equal(chain10, load_system(p))


def test_round_trip_auto(tmp_path, chain10):
    p = tmp_path / "out.ffs"
    save_system(chain10, p, mode="auto")
    assert_systems_equal(chain10, load_system(p))


def test_round_trip_coords_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    system = make_chain_system(7, seed=3).with_coords(
        rng.standard_normal((7, 3)) * math.pi)
    p = tmp_path / "out.ffs"
    save_system(system, p)
    assert np.array_equal(load_system(p).coords, system.coords)


def test_empty_atom_system_round_trip(tmp_path):
    system = MolecularSystem(atoms=(), coords=np.zeros((0, 3)))
    p = tmp_path / "empty.ffs"
    save_system(system, p)
    assert load_system(p).natoms == 0


def test_theta0_stored_in_degrees(tmp_path, chain10):
    p = tmp_path / "out.ffs"
    save_system(chain10, p)
    text = p.read_text()
    deg = math.degrees(chain10.angles[0].theta0)
    assert f"{deg:.17g}" in text


def test_error_messages_carry_path_and_lineno(tmp_path):
    cases = [
        # (replacement target, replacement, expected fragment, bad lineno)
        ("format_version: 1", "format_version: 2", "unsupported format_version", 1),
        ("0 1 1422.56 1.09", "0 1 oops 1.09", "bad bond K", 9),
        ("section bonds", "section bogus", "unknown section", 8),
        ("1.09 0.0 0.0", "1.09 0.0", "coordinate rows need", 7),
    ]
    for target, repl, fragment, lineno in cases:
        p = write(tmp_path, MINIMAL.replace(target, repl))
        with pytest.raises(SystemFileError) as exc:
            load_system(p)
        msg = str(exc.value)
        assert fragment in msg
        assert f"{p}:{lineno}:" in msg


def test_out_of_range_index_names_invariant(tmp_path):
    # caught at system construction, so the message carries the path only
    p = write(tmp_path, MINIMAL.replace("0 1 1422.56 1.09", "0 9 1422.56 1.09"))
    with pytest.raises(SystemFileError) as exc:
        load_system(p)
    assert "index out of range" in str(exc.value)
    assert str(p) in str(exc.value)


def test_duplicate_section_rejected(tmp_path):
    p = write(tmp_path, MINIMAL + "section bonds\n")
    with pytest.raises(SystemFileError, match="duplicate section"):
        load_system(p)


def test_missing_required_section(tmp_path):
    p = write(tmp_path, MINIMAL.replace("section nonbonded\nmode: auto\n", ""))
    with pytest.raises(SystemFileError, match="nonbonded"):
        load_system(p)


def test_mode_auto_forbids_pair_sections(tmp_path):
    p = write(tmp_path, MINIMAL + "section excluded_pairs\n0 1\n")
    with pytest.raises(SystemFileError, match="only valid with mode: explicit"):
        load_system(p)


def test_explicit_pairs_loaded(tmp_path):
    text = MINIMAL.replace("mode: auto", "mode: explicit")
    text += "section excluded_pairs\n1 0\nsection scaled14_pairs\n"
    system = load_system(write(tmp_path, text))
    # pairs are canonicalized to i < j
    assert system.nonbonded.excluded == frozenset({(0, 1)})


def test_data_before_section_rejected(tmp_path):
    p = write(tmp_path, "format_version: 1\n0 CT 0 3.5 0.3\n")
    with pytest.raises(SystemFileError, match="before any section"):
        load_system(p)


def test_atom_coord_count_mismatch(tmp_path):
    p = write(tmp_path, MINIMAL.replace("1.09 0.0 0.0\n", ""))
    with pytest.raises(SystemFileError, match="coordinate rows"):
        load_system(p)


def test_save_mode_validated(tmp_path, chain10):
    with pytest.raises(ValueError, match="save mode"):
        save_system(chain10, tmp_path / "x.ffs", mode="compact")


def test_unwritable_path_is_io_error(tmp_path, chain10):
    with pytest.raises(OSError):
        save_system(chain10, tmp_path / "no" / "such" / "dir" / "x.ffs")


def test_nonbonded_keys_validated(tmp_path):
    p = write(tmp_path, MINIMAL.replace("s14: 0.5", "s14: 0.5\nshake: 1"))
    with pytest.raises(SystemFileError, match="unknown nonbonded key"):
        load_system(p)
    p = write(tmp_path, MINIMAL.replace("mode: auto", "mode: sometimes"))
    with pytest.raises(SystemFileError, match="mode must be auto or explicit"):
        load_system(p)


def test_cutoff_parsed(tmp_path):
    system = load_system(write(tmp_path, MINIMAL.replace("cutoff: none", "cutoff: 7.0")))
    assert system.nonbonded.cutoff == 7.0
