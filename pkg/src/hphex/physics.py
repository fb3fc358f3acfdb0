"""Physics attributes, global parameters, BC encoding, and input-file parsers.

A problem is described by a list of physics attributes, each living in
one space of the exact sequence and carrying one or more components.
Attributes must be declared in exact-sequence order of their spaces
(contin, tangen, normal, discon).  Component indices are global across
attributes, in declaration order, components innermost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

CONTIN, TANGEN, NORMAL, DISCON = "contin", "tangen", "normal", "discon"
SPACE_TO_FE = {CONTIN: "H1", TANGEN: "HCURL", NORMAL: "HDIV", DISCON: "L2"}
_SPACE_RANK = {CONTIN: 0, TANGEN: 1, NORMAL: 2, DISCON: 3}


@dataclass
class PhysicsAttr:
    nick: str
    space: str
    ncomp: int
    is_trace: bool = False          # discretized as interface restriction only
    enabled: bool = True            # participates in assembly
    homogeneous_dirichlet: bool = False  # skip Dirichlet data interpolation

    def __post_init__(self):
        if self.space not in SPACE_TO_FE:
            raise ConfigError(f"unknown space tag {self.space!r}")
        if self.ncomp < 1:
            raise ConfigError(f"attribute {self.nick}: ncomp must be >= 1")

    @property
    def fe_space(self) -> str:
        return SPACE_TO_FE[self.space]


class PhysicsTable:
    """Ordered attribute list plus the anticipated node capacity."""

    def __init__(self, attrs, maxnods: int = 100000):
        self.attrs = list(attrs)
        self.maxnods = int(maxnods)
        rank = -1
        for a in self.attrs:
            r = _SPACE_RANK[a.space]
            if r < rank:
                raise ConfigError(
                    f"attribute {a.nick!r}: spaces must appear in exact-sequence "
                    "order (contin, tangen, normal, discon)"
                )
            rank = r
        self._offsets = []
        off = 0
        for a in self.attrs:
            self._offsets.append(off)
            off += a.ncomp
        self.nrindex = off

    @property
    def nr_physa(self) -> int:
        return len(self.attrs)

    @property
    def nr_comp(self) -> list[int]:
        return [a.ncomp for a in self.attrs]

    def comp_offset(self, attr: int) -> int:
        return self._offsets[attr]

    def global_comp(self, attr: int, comp: int) -> int:
        if not 0 <= attr < self.nr_physa:
            raise ConfigError(f"attribute index {attr} out of range")
        if not 0 <= comp < self.attrs[attr].ncomp:
            raise ConfigError(f"component {comp} out of range for attribute {attr}")
        return self._offsets[attr] + comp

    def set_trace(self, attr: int, flag: bool = True):
        a = self.attrs[attr]
        if flag and a.space == DISCON:
            raise ConfigError(
                f"attribute {a.nick!r}: traces of discontinuous variables "
                "are not defined"
            )
        a.is_trace = flag

    def enabled_attrs(self) -> list[int]:
        return [i for i, a in enumerate(self.attrs) if a.enabled]


@dataclass
class Parameters:
    """Global control parameters (one component set, one right-hand side)."""

    nexact: int = 0
    exgeom: int = 0
    nord_add: int = 1
    istc_flag: int = 1
    store_stc: int = 1
    herm_stc: int = 0
    maxp: int = 9
    nrcoms: int = 1
    n_coms: int = 1
    nrrhs: int = 1


_CONTROL_KEYS = {
    "NEXACT": "nexact",
    "EXGEOM": "exgeom",
    "NORD_ADD": "nord_add",
    "ISTC_FLAG": "istc_flag",
    "STORE_STC": "store_stc",
    "HERM_STC": "herm_stc",
}


def read_control(path) -> Parameters:
    """Parse a key-value control file ("<KEY> <VALUE>" lines, '#' comments)."""
    params = Parameters()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected '<KEY> <VALUE>'")
            key, value = parts
            if key not in _CONTROL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown control key {key!r}")
            try:
                setattr(params, _CONTROL_KEYS[key], int(value))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-integer value {value!r}")
    if params.exgeom != 0:
        raise ConfigError("EXGEOM=1 (exact-geometry elements) is not supported")
    if params.nord_add < 0:
        raise ConfigError("NORD_ADD must be >= 0")
    return params


def read_physics(path) -> PhysicsTable:
    """Parse the physics file.

    Layout: line 1 "<MAXNODS> [comment]", line 2 "<NR_PHYSA> [comment]",
    then NR_PHYSA lines "<nick> <space> <ncomp> [comment]".
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise ConfigError(f"{path}: truncated physics file")

    def _leading_int(line, what):
        tok = line.split()[0]
        try:
            return int(tok)
        except ValueError:
            raise ConfigError(f"{path}: expected integer {what}, got {tok!r}")

    maxnods = _leading_int(lines[0], "MAXNODS")
    nr_physa = _leading_int(lines[1], "NR_PHYSA")
    body = lines[2:]
    if len(body) < nr_physa:
        raise ConfigError(
            f"{path}: NR_PHYSA={nr_physa} but only {len(body)} attribute lines"
        )
    attrs = []
    for ln in body[:nr_physa]:
        toks = ln.split()
        if len(toks) < 3:
            raise ConfigError(f"{path}: malformed attribute line {ln!r}")
        nick, space = toks[0], toks[1]
        try:
            ncomp = int(toks[2])
        except ValueError:
            raise ConfigError(f"{path}: bad component count in {ln!r}")
        attrs.append(PhysicsAttr(nick, space, ncomp))
    return PhysicsTable(attrs, maxnods)


def encode_bc(face_flags) -> int:
    """Pack 6 per-face BC digits base-10; face 1 is the least significant digit."""
    flags = list(face_flags)
    if len(flags) != 6:
        raise ConfigError("encode_bc expects 6 face flags")
    code = 0
    for f in range(5, -1, -1):
        d = int(flags[f])
        if not 0 <= d <= 9:
            raise ConfigError(f"BC digit {d} outside 0..9")
        code = code * 10 + d
    return code


def decode_bc(code: int) -> list[int]:
    if code < 0 or code > 999999:
        raise ConfigError(f"BC code {code} outside 0..999999")
    out = []
    for _ in range(6):
        out.append(code % 10)
        code //= 10
    return out


def set_bcond(mesh, boundary_id: int, attr: int, comp: int, flag: int):
    """Apply a BC flag to every exterior face matching a boundary id.

    Flag 1 marks the component Dirichlet; flags 2..9 are stored verbatim
    and treated as free by assembly.  Node-level Dirichlet masks are
    rederived afterwards.
    """
    if not 0 <= flag <= 9:
        raise ConfigError(f"BC flag {flag} outside 0..9")
    mesh.physics.global_comp(attr, comp)  # validates indices
    mesh.set_boundary_flag(boundary_id, attr, comp, flag)
