"""System file reader/writer.

Plain text, line oriented. A file opens with ``format_version: 1`` and then
holds ``section <name>`` blocks: atoms, coords, bonds, angles, dihedrals,
nonbonded, and (for mode: explicit) excluded_pairs / scaled14_pairs. Blank
lines and ``#`` comments are ignored. Angles carry theta0 in degrees on disk
and radians in memory. Coordinates are written with 17 significant digits so
a save/load round trip reproduces float64 bit for bit.

Example::

    format_version: 1
    section atoms
    0 CT -0.18 3.5 0.276
    1 HC 0.06 2.5 0.1255
    section coords
    0.0 0.0 0.0
    1.09 0.0 0.0
    section bonds
    0 1 1422.56 1.09
    section angles
    section dihedrals
    section nonbonded
    mode: auto
    s14: 0.5
    cutoff: none
"""

from __future__ import annotations

import math
import os

import numpy as np

from .model import (
    AngleTerm,
    AtomSpec,
    BondTerm,
    DihedralTerm,
    ModelError,
    MolecularSystem,
    NonbondedPolicy,
    build_default_exclusions,
)

FORMAT_VERSION = 1

_SECTIONS = (
    "atoms", "coords", "bonds", "angles", "dihedrals",
    "nonbonded", "excluded_pairs", "scaled14_pairs",
)


class SystemFileError(ValueError):
    """Malformed system file; message carries the offending line number."""


def _fail(path, lineno, msg):
    raise SystemFileError(f"{path}:{lineno}: {msg}")


def _parse_float(tok, path, lineno, what):
    try:
        v = float(tok)
    except ValueError:
        _fail(path, lineno, f"bad {what} value {tok!r}")
    if not math.isfinite(v):
        _fail(path, lineno, f"{what} must be finite, got {tok!r}")
    return v


def _parse_int(tok, path, lineno, what):
    try:
        return int(tok)
    except ValueError:
        _fail(path, lineno, f"bad {what} index {tok!r}")


def load_system(path) -> MolecularSystem:
    """Parse a system file and return a validated MolecularSystem."""
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.readlines()

    lines = []  # (lineno, text) with comments and blanks stripped
    for idx, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if text:
            lines.append((idx, text))

    if not lines:
        _fail(path, 1, "empty file")
    lineno, first = lines[0]
    if not first.startswith("format_version:"):
        _fail(path, lineno, "file must start with a format_version line")
    ver = first.split(":", 1)[1].strip()
    if ver != str(FORMAT_VERSION):
        _fail(path, lineno, f"unsupported format_version {ver!r} (expected {FORMAT_VERSION})")

    sections = {}
    current = None
    for lineno, text in lines[1:]:
        if text.startswith("section"):
            parts = text.split()
            if len(parts) != 2:
                _fail(path, lineno, f"malformed section header {text!r}")
            name = parts[1]
            if name not in _SECTIONS:
                _fail(path, lineno, f"unknown section {name!r}")
            if name in sections:
                _fail(path, lineno, f"duplicate section {name!r}")
            sections[name] = []
            current = name
        else:
            if current is None:
                _fail(path, lineno, f"data before any section header: {text!r}")
            sections[current].append((lineno, text))

    for required in ("atoms", "coords", "nonbonded"):
        if required not in sections:
            _fail(path, len(raw), f"missing required section {required!r}")

    atoms = []
    for lineno, text in sections["atoms"]:
        toks = text.split()
        if len(toks) != 5:
            _fail(path, lineno, "atom rows need: id label q sigma epsilon")
        aid = _parse_int(toks[0], path, lineno, "atom")
        try:
            atoms.append(AtomSpec(
                id=aid, label=toks[1],
                q=_parse_float(toks[2], path, lineno, "charge"),
                sigma=_parse_float(toks[3], path, lineno, "sigma"),
                epsilon=_parse_float(toks[4], path, lineno, "epsilon"),
            ))
        except ModelError as exc:
            _fail(path, lineno, str(exc))

    coords = []
    for lineno, text in sections["coords"]:
        toks = text.split()
        if len(toks) != 3:
            _fail(path, lineno, "coordinate rows need: x y z")
        coords.append([_parse_float(t, path, lineno, "coordinate") for t in toks])
    if len(coords) != len(atoms):
        _fail(path, len(raw), f"{len(atoms)} atoms but {len(coords)} coordinate rows")

    bonds = []
    for lineno, text in sections.get("bonds", []):
        toks = text.split()
        if len(toks) != 4:
            _fail(path, lineno, "bond rows need: i j K r0")
        try:
            bonds.append(BondTerm(
                i=_parse_int(toks[0], path, lineno, "bond"),
                j=_parse_int(toks[1], path, lineno, "bond"),
                K=_parse_float(toks[2], path, lineno, "bond K"),
                r0=_parse_float(toks[3], path, lineno, "bond r0"),
            ))
        except ModelError as exc:
            _fail(path, lineno, str(exc))

    angles = []
    for lineno, text in sections.get("angles", []):
        toks = text.split()
        if len(toks) != 5:
            _fail(path, lineno, "angle rows need: i j k K theta0_deg")
        try:
            angles.append(AngleTerm(
                i=_parse_int(toks[0], path, lineno, "angle"),
                j=_parse_int(toks[1], path, lineno, "angle"),
                k=_parse_int(toks[2], path, lineno, "angle"),
                K=_parse_float(toks[3], path, lineno, "angle K"),
                theta0=math.radians(_parse_float(toks[4], path, lineno, "theta0_deg")),
            ))
        except ModelError as exc:
            _fail(path, lineno, str(exc))

    dihedrals = []
    for lineno, text in sections.get("dihedrals", []):
        toks = text.split()
        if len(toks) != 8:
            _fail(path, lineno, "dihedral rows need: i j k l V1 V2 V3 V4")
        try:
            dihedrals.append(DihedralTerm(
                i=_parse_int(toks[0], path, lineno, "dihedral"),
                j=_parse_int(toks[1], path, lineno, "dihedral"),
                k=_parse_int(toks[2], path, lineno, "dihedral"),
                l=_parse_int(toks[3], path, lineno, "dihedral"),
                V1=_parse_float(toks[4], path, lineno, "V1"),
                V2=_parse_float(toks[5], path, lineno, "V2"),
                V3=_parse_float(toks[6], path, lineno, "V3"),
                V4=_parse_float(toks[7], path, lineno, "V4"),
            ))
        except ModelError as exc:
            _fail(path, lineno, str(exc))

    nb = {"mode": None, "s14": 0.5, "cutoff": None}
    nb_line = sections["nonbonded"][0][0] if sections["nonbonded"] else len(raw)
    for lineno, text in sections["nonbonded"]:
        if ":" not in text:
            _fail(path, lineno, f"nonbonded rows are key: value, got {text!r}")
        key, _, val = text.partition(":")
        key = key.strip()
        val = val.strip()
        if key == "mode":
            if val not in ("auto", "explicit"):
                _fail(path, lineno, f"nonbonded mode must be auto or explicit, got {val!r}")
            nb["mode"] = val
        elif key == "s14":
            nb["s14"] = _parse_float(val, path, lineno, "s14")
        elif key == "cutoff":
            nb["cutoff"] = None if val == "none" else _parse_float(val, path, lineno, "cutoff")
        else:
            _fail(path, lineno, f"unknown nonbonded key {key!r}")
    if nb["mode"] is None:
        _fail(path, nb_line, "nonbonded section must set mode")

    def read_pairs(name):
        pairs = []
        for lineno, text in sections.get(name, []):
            toks = text.split()
            if len(toks) != 2:
                _fail(path, lineno, f"{name} rows need: i j")
            pairs.append((
                _parse_int(toks[0], path, lineno, name),
                _parse_int(toks[1], path, lineno, name),
            ))
        return pairs

    try:
        if nb["mode"] == "auto":
            for name in ("excluded_pairs", "scaled14_pairs"):
                if name in sections:
                    _fail(path, sections[name][0][0] if sections[name] else len(raw),
                          f"section {name!r} is only valid with mode: explicit")
            policy = build_default_exclusions(
                len(atoms), bonds, s14=nb["s14"], cutoff=nb["cutoff"]
            )
        else:
            excl = frozenset(tuple(sorted(p)) for p in read_pairs("excluded_pairs"))
            sc14 = frozenset(tuple(sorted(p)) for p in read_pairs("scaled14_pairs"))
            policy = NonbondedPolicy(excl, sc14, nb["s14"], nb["cutoff"])
        system = MolecularSystem(
            atoms=tuple(atoms),
            coords=np.array(coords, dtype=np.float64).reshape(len(atoms), 3),
            bonds=tuple(bonds),
            angles=tuple(angles),
            dihedrals=tuple(dihedrals),
            nonbonded=policy,
        )
    except ModelError as exc:
        raise SystemFileError(f"{path}: {exc}") from exc
    return system


def save_system(system: MolecularSystem, path, mode="explicit"):
    """Write a system file. mode: explicit lists the pair sets verbatim.

    mode: auto writes only s14/cutoff and relies on the loader to rebuild
    the exclusions from the bond graph; only safe when the policy actually
    came from build_default_exclusions.
    """
    if mode not in ("auto", "explicit"):
        raise ValueError(f"save mode must be auto or explicit, got {mode!r}")
    g = lambda v: format(float(v), ".17g")
    out = [f"format_version: {FORMAT_VERSION}"]
    out.append("section atoms")
    for a in system.atoms:
        out.append(f"{a.id} {a.label} {g(a.q)} {g(a.sigma)} {g(a.epsilon)}")
    out.append("section coords")
    for row in system.coords:
        out.append(f"{g(row[0])} {g(row[1])} {g(row[2])}")
    out.append("section bonds")
    for b in system.bonds:
        out.append(f"{b.i} {b.j} {g(b.K)} {g(b.r0)}")
    out.append("section angles")
    for a in system.angles:
        out.append(f"{a.i} {a.j} {a.k} {g(a.K)} {g(math.degrees(a.theta0))}")
    out.append("section dihedrals")
    for d in system.dihedrals:
        out.append(f"{d.i} {d.j} {d.k} {d.l} {g(d.V1)} {g(d.V2)} {g(d.V3)} {g(d.V4)}")
    nb = system.nonbonded
    out.append("section nonbonded")
    out.append(f"mode: {mode}")
    out.append(f"s14: {g(nb.s14)}")
    out.append("cutoff: none" if nb.cutoff is None else f"cutoff: {g(nb.cutoff)}")
    if mode == "explicit":
        out.append("section excluded_pairs")
        for i, j in sorted(nb.excluded):
            out.append(f"{i} {j}")
        out.append("section scaled14_pairs")
        for i, j in sorted(nb.scaled14):
            out.append(f"{i} {j}")
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
