"""Hexahedral mesh data structure: node trees, traversal, h/p refinement.

Every topological entity (vertex, edge, face, middle) is a Node stored
in a growable table; a node's id is its index in that table, and the
middle-node id doubles as the element id.  The first NRELIS slots are
the initial elements' middle nodes, so initial element i has middle
node i.

h-refinement is isotropic only (kref=111).  Refining an element splits
its edges into halves (with a midpoint vertex), its faces into
quadrants (with four interior edges and a center vertex), and the
interior into 8 octants (with 12 mid-plane faces, 6 axis edges through
the center, and the center vertex).  Shared entities are refined once
and reused by neighbors.  All derived coordinates are exact for the
trilinear geometry in use (midpoints and cell/face centers).

The "natural order" of active elements is a depth-first pre-order over
the middle-node forest, initial elements first, sons in octant order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import masterel as me
from .errors import (
    ConfigError,
    GeometryError,
    MeshError,
    OrderError,
    OrientationError,
    RefinementError,
)
from .geometry import element_geometry

log = logging.getLogger(__name__)

VERTEX, EDGE, FACE, MIDDLE = "VERTEX", "EDGE", "FACE", "MIDDLE"
HREF, PREF, PUNREF = "HREF", "PREF", "PUNREF"
MIN_RULE, MAX_RULE = "MIN", "MAX"
ISO_KREF = 111

# transverse (side) coordinates -> local edge, per axis
_EDGE_BY_AXIS_SIDES = {}
for _e in range(12):
    _ax = me.EDGE_AXIS[_e]
    _o1, _o2 = (a for a in range(3) if a != _ax)
    _c = me.VERT_COORDS[me.EDGE_VERTS[_e][0]]
    _EDGE_BY_AXIS_SIDES[(_ax, int(_c[_o1]), int(_c[_o2]))] = _e

_FACE_BY_AXIS_SIDE = {
    (me.FACE_NORMAL_AXIS[_f], me.FACE_SIDE[_f]): _f for _f in range(6)
}
_VERT_BY_COORD = {
    tuple(int(c) for c in me.VERT_COORDS[_v]): _v for _v in range(8)
}


class Node:
    """One mesh entity.  Sons layouts by kind:

    EDGE   : [low half, high half, midpoint vertex]
    FACE   : [4 quadrants (tensor order), 4 interior edges
              (along axis1 low/high, along axis2 low/high), center vertex]
    MIDDLE : sons = 8 octant middles (vertex order); the interior
             entities live in `interior` = [12 mid-plane faces
             (x-plane 4, y-plane 4, z-plane 4, each in tensor order),
             6 axis edges (x low/high, y low/high, z low/high),
             center vertex]
    """

    __slots__ = (
        "id", "kind", "order", "active", "father", "sons", "interior",
        "ref_kind", "bcond", "case", "coords", "verts", "edges",
        "elem_nodes", "bid", "bflags", "dofs",
    )

    def __init__(self, nid, kind, order=0, father=0):
        self.id = nid
        self.kind = kind
        self.order = order
        self.active = True
        self.father = father
        self.sons = []
        self.interior = []
        self.ref_kind = 0
        self.bcond = 0
        self.case = 0
        self.coords = None
        self.verts = ()
        self.edges = ()
        self.elem_nodes = ()
        self.bid = None
        self.bflags = None
        self.dofs = None

    def __repr__(self):  # pragma: no cover - debugging aid
        state = "act" if self.active else "ref"
        return f"<Node {self.id} {self.kind} p={self.order} {state}>"


@dataclass
class InitialElement:
    shape: str
    nodes: list            # 27 ids: 8 vertices, 12 edges, 6 faces, middle
    neighbors: list        # per face: element id (>0) or -boundary_id (<=0)
    phys: tuple            # supported attribute indices
    bcond: list            # [attr][comp] -> encoded 6-digit face mask


@dataclass
class GeometryFile:
    points: np.ndarray     # (npoints, 3)
    elems: np.ndarray      # (nelems, 8) one-based point indices
    bfaces: list           # (elem, face 1..6, boundary id)


def read_geometry(path) -> GeometryFile:
    """Parse the hexahedral-mesh geometry file (see module grammar)."""
    with open(path) as fh:
        toks = fh.read().split()
    pos = 0

    def take(n=1):
        nonlocal pos
        if pos + n > len(toks):
            raise MeshError(f"{path}: truncated geometry file")
        out = toks[pos:pos + n]
        pos += n
        return out

    kw, ver = take(2)
    if kw != "HEXMESH" or ver != "1":
        raise MeshError(f"{path}: expected 'HEXMESH 1' header, got {kw!r} {ver!r}")
    kw, n = take(2)
    if kw != "NPOINTS":
        raise MeshError(f"{path}: expected NPOINTS")
    npts = int(n)
    try:
        points = np.array([float(t) for t in take(3 * npts)]).reshape(npts, 3)
    except ValueError as exc:
        raise MeshError(f"{path}: bad coordinate: {exc}")
    kw, m = take(2)
    if kw != "NELEMS":
        raise MeshError(f"{path}: expected NELEMS")
    nel = int(m)
    elems = np.array([int(t) for t in take(8 * nel)], dtype=int).reshape(nel, 8)
    if (elems < 1).any() or (elems > npts).any():
        raise MeshError(f"{path}: point index outside 1..{npts}")
    kw, k = take(2)
    if kw != "NBFACES":
        raise MeshError(f"{path}: expected NBFACES")
    nbf = int(k)
    raw = [int(t) for t in take(3 * nbf)]
    bfaces = [(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]) for i in range(nbf)]
    for el, fc, bid in bfaces:
        if not 1 <= el <= nel:
            raise MeshError(f"{path}: boundary face references element {el}")
        if not 1 <= fc <= 6:
            raise MeshError(f"{path}: face index {fc} outside 1..6")
        if not 0 <= bid <= 9:
            raise MeshError(f"{path}: boundary id {bid} outside 0..9")
    return GeometryFile(points, elems, bfaces)


class Mesh:
    def __init__(self, physics, maxnods):
        self.physics = physics
        self.MAXNODS = int(maxnods)
        self.NODES = [None]
        self.ELEMS = [None]
        self.ELEM_ORDER = []
        self.NRELES = 0
        self.revision = 0
        self._capacity_warned = False
        self._skeleton_cache = (-1, None)

    # -- node table ---------------------------------------------------

    @property
    def NRELIS(self) -> int:
        return len(self.ELEMS) - 1

    def node(self, nid: int) -> Node:
        return self.NODES[nid]

    def _new_node(self, kind, order=0, father=0) -> Node:
        nid = len(self.NODES)
        if nid > self.MAXNODS and not self._capacity_warned:
            log.warning(
                "node table grew past MAXNODS=%d; allocating on the fly",
                self.MAXNODS,
            )
            self._capacity_warned = True
        node = Node(nid, kind, order=order, father=father)
        self.NODES.append(node)
        return node

    def _touch(self):
        self.revision += 1
        self._skeleton_cache = (-1, None)

    # -- queries --------------------------------------------------------

    def active_middles_scan(self) -> list:
        """Brute-force scan (used by invariants checks, not the solver path)."""
        return [n.id for n in self.NODES[1:] if n is not None
                and n.kind == MIDDLE and n.active]

    def elem_nodes(self, mdle: int) -> list:
        node = self.NODES[mdle]
        if node.kind != MIDDLE:
            raise MeshError(f"node {mdle} is not a middle node")
        return list(node.elem_nodes) + [mdle]

    def skeleton_in_use(self) -> set:
        """Ids of all nodes referenced by active elements (including middles)."""
        rev, cached = self._skeleton_cache
        if rev == self.revision:
            return cached
        used = set()
        for mdle in self.ELEM_ORDER:
            used.update(self.NODES[mdle].elem_nodes)
            used.add(mdle)
        self._skeleton_cache = (self.revision, used)
        return used

    def vertex_coords(self, vids) -> np.ndarray:
        return np.array([self.NODES[v].coords for v in vids])

    def boundary_faces(self, bid=None) -> list:
        out = []
        for node in self.NODES[1:]:
            if node.kind == FACE and node.bid is not None:
                if bid is None or node.bid == bid:
                    out.append(node.id)
        return out

    # -- boundary conditions ---------------------------------------------

    def set_boundary_flag(self, boundary_id: int, attr: int, comp: int, flag: int):
        from .physics import decode_bc, encode_bc  # deferred: physics is higher level

        gcomp = self.physics.global_comp(attr, comp)
        for node in self.NODES[1:]:
            if node.kind == FACE and node.bid == boundary_id:
                node.bflags[gcomp] = flag
        for iel in range(1, self.NRELIS + 1):
            elem = self.ELEMS[iel]
            for f in range(6):
                if elem.neighbors[f] == -boundary_id:
                    digits = decode_bc(elem.bcond[attr][comp])
                    digits[f] = flag
                    elem.bcond[attr][comp] = encode_bc(digits)
        self.derive_dirichlet_masks()

    def derive_dirichlet_masks(self):
        for node in self.NODES[1:]:
            if node.kind != MIDDLE:
                node.bcond = 0
        for node in self.NODES[1:]:
            if node.kind != FACE or node.bid is None:
                continue
            mask = 0
            for c, flag in enumerate(node.bflags):
                if flag == 1:
                    mask |= 1 << c
            if not mask:
                continue
            node.bcond |= mask
            for v in node.verts:
                self.NODES[v].bcond |= mask
            for e in node.edges:
                self.NODES[e].bcond |= mask
        self._touch()


def generate_initial_mesh(geometry: GeometryFile, physics, initial_order,
                          bc_assignments=()) -> Mesh:
    """Build the initial mesh from a parsed geometry file.

    Orders are assigned per direction of each element's reference frame;
    shared entities take the order from the first element that creates
    them (all in-scope meshes are axis-aligned, so frames agree).
    bc_assignments is a sequence of (boundary_id, attr, comp, flag).
    """
    px, py, pz = me.check_order_triple(initial_order)
    p = (px, py, pz)
    mesh = Mesh(physics, physics.maxnods)
    nrelis = len(geometry.elems)
    if nrelis < 1:
        raise MeshError("geometry defines no elements")
    all_attrs = tuple(range(physics.nr_physa))
    case_mask = (1 << physics.nr_physa) - 1

    for iel in range(1, nrelis + 1):
        mid = mesh._new_node(MIDDLE, order=me.encode_order(px, py, pz))
        mid.case = case_mask
        mesh.ELEMS.append(InitialElement(
            shape="BRIC",
            nodes=[],
            neighbors=[0] * 6,
            phys=all_attrs,
            bcond=[[0] * a.ncomp for a in physics.attrs],
        ))

    vert_ids = []
    for xyz in geometry.points:
        v = mesh._new_node(VERTEX)
        v.coords = np.array(xyz, dtype=float)
        v.case = case_mask
        vert_ids.append(v.id)

    edge_map = {}   # sorted vert pair -> (ordered pair, id)
    face_map = {}   # sorted vert 4-tuple -> (ordered tuple, id, refs)
    for iel in range(1, nrelis + 1):
        gv = [vert_ids[ip - 1] for ip in geometry.elems[iel - 1]]
        if len(set(gv)) != 8:
            raise MeshError(f"element {iel}: repeated vertex")
        try:
            element_geometry(mesh.vertex_coords(gv), [(0.5, 0.5, 0.5)])
        except GeometryError:
            raise MeshError(f"element {iel}: inverted or degenerate vertex order")

        ledges = []
        for e in range(12):
            a, b = gv[me.EDGE_VERTS[e][0]], gv[me.EDGE_VERTS[e][1]]
            key = (min(a, b), max(a, b))
            hit = edge_map.get(key)
            if hit is None:
                node = mesh._new_node(EDGE, order=p[me.EDGE_AXIS[e]])
                node.verts = (a, b)
                node.case = case_mask
                edge_map[key] = ((a, b), node.id)
                ledges.append(node.id)
            else:
                if hit[0] != (a, b):
                    raise OrientationError(
                        f"element {iel}: edge {key} traversed in opposite "
                        "directions by neighboring elements"
                    )
                ledges.append(hit[1])

        lfaces = []
        for f in range(6):
            quad = tuple(gv[i] for i in me.FACE_VERTS[f])
            key = tuple(sorted(quad))
            a1, a2 = me.FACE_AXES[f]
            hit = face_map.get(key)
            if hit is None:
                node = mesh._new_node(FACE, order=me.encode_face_order(p[a1], p[a2]))
                node.verts = quad
                node.edges = tuple(ledges[e] for e in me.FACE_EDGES[f])
                node.case = case_mask
                face_map[key] = (quad, node.id, [(iel, f + 1)])
                lfaces.append(node.id)
            else:
                if hit[0] != quad:
                    raise OrientationError(
                        f"element {iel} face {f + 1}: vertex order disagrees "
                        "with the neighbor sharing it"
                    )
                if len(hit[2]) >= 2:
                    raise MeshError(f"face {key} shared by more than 2 elements")
                hit[2].append((iel, f + 1))
                lfaces.append(hit[1])

        mid = mesh.NODES[iel]
        mid.elem_nodes = tuple(gv + ledges + lfaces)
        mesh.ELEMS[iel].nodes = list(mid.elem_nodes) + [iel]

    listed = {(el, fc): bid for el, fc, bid in geometry.bfaces}
    for quad, fid, refs in face_map.values():
        if len(refs) == 2:
            (ela, fa), (elb, fb) = refs
            if (ela, fa) in listed or (elb, fb) in listed:
                raise MeshError(
                    f"interior face between elements {ela} and {elb} listed "
                    "as a boundary face"
                )
            mesh.ELEMS[ela].neighbors[fa - 1] = elb
            mesh.ELEMS[elb].neighbors[fb - 1] = ela
        else:
            (el, fc), = refs
            bid = listed.pop((el, fc), 0)
            mesh.ELEMS[el].neighbors[fc - 1] = -bid
            fnode = mesh.NODES[fid]
            fnode.bid = bid
            fnode.bflags = np.zeros(physics.nrindex, dtype=np.int8)
    if listed:
        raise MeshError(f"boundary faces not on the mesh boundary: {sorted(listed)}")

    mesh.ELEM_ORDER = list(range(1, nrelis + 1))
    mesh.NRELES = nrelis
    mesh._touch()
    for bid, attr, comp, flag in bc_assignments:
        mesh.set_boundary_flag(bid, attr, comp, flag)
    return mesh


# ---------------------------------------------------------------------------
# refinement

def _refine_edge(mesh: Mesh, eid: int):
    edge = mesh.NODES[eid]
    if edge.sons:
        return
    va, vb = edge.verts
    mid = mesh._new_node(VERTEX, father=eid)
    mid.coords = 0.5 * (mesh.NODES[va].coords + mesh.NODES[vb].coords)
    lo = mesh._new_node(EDGE, order=edge.order, father=eid)
    hi = mesh._new_node(EDGE, order=edge.order, father=eid)
    lo.verts = (va, mid.id)
    hi.verts = (mid.id, vb)
    for son in (lo, hi, mid):
        son.bcond = edge.bcond
        son.case = edge.case
    edge.sons = [lo.id, hi.id, mid.id]
    edge.active = False
    edge.ref_kind = 1


def _refine_face(mesh: Mesh, fid: int):
    face = mesh.NODES[fid]
    if face.sons:
        return
    for eid in face.edges:
        if not mesh.NODES[eid].sons:
            raise MeshError(f"face {fid}: edge {eid} not refined first")
    c00, c10, c01, c11 = face.verts
    e_b, e_t, e_l, e_r = face.edges
    m_b = mesh.NODES[e_b].sons[2]
    m_t = mesh.NODES[e_t].sons[2]
    m_l = mesh.NODES[e_l].sons[2]
    m_r = mesh.NODES[e_r].sons[2]
    p1, p2 = me.decode_face_order(face.order)

    ctr = mesh._new_node(VERTEX, father=fid)
    ctr.coords = 0.25 * sum(mesh.NODES[v].coords for v in face.verts)
    X = ctr.id

    def new_edge(a, b, order):
        node = mesh._new_node(EDGE, order=order, father=fid)
        node.verts = (a, b)
        return node.id

    ie1lo = new_edge(m_l, X, p1)
    ie1hi = new_edge(X, m_r, p1)
    ie2lo = new_edge(m_b, X, p2)
    ie2hi = new_edge(X, m_t, p2)

    def half(eid, which):
        return mesh.NODES[eid].sons[which]

    quads_spec = [
        ((c00, m_b, m_l, X), (half(e_b, 0), ie1lo, half(e_l, 0), ie2lo)),
        ((m_b, c10, X, m_r), (half(e_b, 1), ie1hi, ie2lo, half(e_r, 0))),
        ((m_l, X, c01, m_t), (ie1lo, half(e_t, 0), half(e_l, 1), ie2hi)),
        ((X, m_r, m_t, c11), (ie1hi, half(e_t, 1), ie2hi, half(e_r, 1))),
    ]
    quad_ids = []
    for verts, edges in quads_spec:
        q = mesh._new_node(FACE, order=face.order, father=fid)
        q.verts = verts
        q.edges = edges
        quad_ids.append(q.id)

    for nid in quad_ids + [ie1lo, ie1hi, ie2lo, ie2hi, X]:
        son = mesh.NODES[nid]
        son.bcond = face.bcond
        son.case = face.case
        if son.kind == FACE:
            son.bid = face.bid
            son.bflags = None if face.bflags is None else face.bflags.copy()
    face.sons = quad_ids + [ie1lo, ie1hi, ie2lo, ie2hi, X]
    face.active = False
    face.ref_kind = 1


def _others(ax):
    return tuple(a for a in range(3) if a != ax)


def _refine_middle(mesh: Mesh, mdle: int):
    node = mesh.NODES[mdle]
    gv = node.elem_nodes[0:8]
    ge = node.elem_nodes[8:20]
    gf = node.elem_nodes[20:26]
    p = me.decode_order(node.order)

    ctr = mesh._new_node(VERTEX, father=mdle)
    ctr.coords = 0.125 * sum(mesh.NODES[v].coords for v in gv)
    ctr.case = node.case
    X = ctr.id

    def face_center(ax, side):
        return mesh.NODES[gf[_FACE_BY_AXIS_SIDE[(ax, side)]]].sons[8]

    iedges = []
    for ax in range(3):
        for side, verts in ((0, (face_center(ax, 0), X)),
                            (1, (X, face_center(ax, 1)))):
            e = mesh._new_node(EDGE, order=p[ax], father=mdle)
            e.verts = verts
            e.case = node.case
            iedges.append(e.id)

    def lat_vert(c):
        odd = [ci % 2 for ci in c]
        n = sum(odd)
        if n == 0:
            return gv[_VERT_BY_COORD[(c[0] // 2, c[1] // 2, c[2] // 2)]]
        if n == 1:
            ax = odd.index(1)
            o1, o2 = _others(ax)
            e = _EDGE_BY_AXIS_SIDES[(ax, c[o1] // 2, c[o2] // 2)]
            return mesh.NODES[ge[e]].sons[2]
        if n == 2:
            ax = odd.index(0)
            return face_center(ax, c[ax] // 2)
        return X

    def lat_edge(ax, start):
        o1, o2 = _others(ax)
        t1, t2 = start[o1], start[o2]
        pos = start[ax]
        if t1 % 2 == 0 and t2 % 2 == 0:
            e = _EDGE_BY_AXIS_SIDES[(ax, t1 // 2, t2 // 2)]
            return mesh.NODES[ge[e]].sons[pos]
        if t1 % 2 == 1 and t2 % 2 == 1:
            return iedges[2 * ax + pos]
        if t1 % 2 == 1:
            m_ax, side = o2, t2 // 2
        else:
            m_ax, side = o1, t1 // 2
        f = _FACE_BY_AXIS_SIDE[(m_ax, side)]
        fa1, _ = me.FACE_AXES[f]
        return mesh.NODES[gf[f]].sons[4 + (0 if ax == fa1 else 2) + pos]

    ifaces = []  # [plane axis][tensor index]
    for m_ax in range(3):
        o1, o2 = _others(m_ax)
        plane = []
        for s2 in (0, 1):
            for s1 in (0, 1):
                def corner(d1, d2):
                    c = [0, 0, 0]
                    c[m_ax] = 1
                    c[o1] = s1 + d1
                    c[o2] = s2 + d2
                    return lat_vert(c)

                def span_edge(ax, d1, d2):
                    c = [0, 0, 0]
                    c[m_ax] = 1
                    c[o1] = s1 + d1
                    c[o2] = s2 + d2
                    return lat_edge(ax, c)

                fnode = mesh._new_node(
                    FACE, order=me.encode_face_order(p[o1], p[o2]), father=mdle
                )
                fnode.verts = (corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1))
                fnode.edges = (
                    span_edge(o1, 0, 0), span_edge(o1, 0, 1),
                    span_edge(o2, 0, 0), span_edge(o2, 1, 0),
                )
                fnode.case = node.case
                plane.append(fnode.id)
        ifaces.append(plane)

    def lat_face(m_ax, q, s1, s2):
        if q % 2 == 0:
            f = _FACE_BY_AXIS_SIDE[(m_ax, q // 2)]
            return mesh.NODES[gf[f]].sons[s1 + 2 * s2]
        return ifaces[m_ax][s1 + 2 * s2]

    son_ids = []
    for v in range(8):
        o = [int(c) for c in me.VERT_COORDS[v]]
        sverts = [lat_vert([o[0] + int(d[0]), o[1] + int(d[1]), o[2] + int(d[2])])
                  for d in me.VERT_COORDS]
        sedges = []
        for e in range(12):
            c = me.VERT_COORDS[me.EDGE_VERTS[e][0]]
            start = [o[0] + int(c[0]), o[1] + int(c[1]), o[2] + int(c[2])]
            sedges.append(lat_edge(me.EDGE_AXIS[e], start))
        sfaces = []
        for f in range(6):
            m_ax = me.FACE_NORMAL_AXIS[f]
            a1, a2 = me.FACE_AXES[f]
            sfaces.append(lat_face(m_ax, o[m_ax] + me.FACE_SIDE[f], o[a1], o[a2]))
        son = mesh._new_node(MIDDLE, order=node.order, father=mdle)
        son.elem_nodes = tuple(sverts + sedges + sfaces)
        son.case = node.case
        son_ids.append(son.id)

    node.sons = son_ids
    node.interior = [fid for plane in ifaces for fid in plane] + iedges + [X]
    node.active = False
    node.ref_kind = ISO_KREF


def refine_element(mesh: Mesh, mdle: int, kref: int = ISO_KREF):
    if kref != ISO_KREF:
        raise RefinementError(f"refinement flag {kref} unsupported; only 111")
    node = mesh.NODES[mdle]
    if node.kind != MIDDLE:
        raise MeshError(f"node {mdle} is not a middle node")
    if not node.active:
        raise MeshError(f"element {mdle} is not active")
    for eid in node.elem_nodes[8:20]:
        _refine_edge(mesh, eid)
    for fid in node.elem_nodes[20:26]:
        _refine_face(mesh, fid)
    _refine_middle(mesh, mdle)
    mesh._touch()
    traverse_active(mesh)


def get_isoref(mesh: Mesh, mdle: int) -> int:
    node = mesh.NODES[mdle]
    if node.kind != MIDDLE:
        raise MeshError(f"node {mdle} is not a middle node")
    return ISO_KREF


def traverse_active(mesh: Mesh) -> list:
    """Natural-order element list; refreshes ELEM_ORDER and NRELES."""
    out = []
    for iel in range(1, mesh.NRELIS + 1):
        stack = [iel]
        while stack:
            m = stack.pop()
            node = mesh.NODES[m]
            if node.active:
                out.append(m)
            else:
                stack.extend(reversed(node.sons))
    mesh.ELEM_ORDER = out
    mesh.NRELES = len(out)
    return out


def _needs_closure(mesh: Mesh, mdle: int) -> bool:
    node = mesh.NODES[mdle]
    for fid in node.elem_nodes[20:26]:
        fnode = mesh.NODES[fid]
        for q in fnode.sons[0:4]:
            if mesh.NODES[q].sons:
                return True
    for eid in node.elem_nodes[8:20]:
        enode = mesh.NODES[eid]
        for h in enode.sons[0:2]:
            if mesh.NODES[h].sons:
                return True
    return False


def close_mesh(mesh: Mesh):
    """Restore 1-irregularity by refining elements lagging two levels behind."""
    while True:
        marked = [m for m in mesh.ELEM_ORDER if _needs_closure(mesh, m)]
        if not marked:
            return
        for m in marked:
            if mesh.NODES[m].active:
                refine_element(mesh, m, ISO_KREF)


def check_one_irregularity(mesh: Mesh) -> bool:
    return not any(_needs_closure(mesh, m) for m in mesh.ELEM_ORDER)


# ---------------------------------------------------------------------------
# p-refinement

def _iter_real_nodes(mesh):
    for node in mesh.NODES[1:]:
        if node is not None:
            yield node


def global_refinement(mesh: Mesh, kind: str):
    if kind == HREF:
        for m in list(traverse_active(mesh)):
            refine_element(mesh, m, ISO_KREF)
        return
    if kind not in (PREF, PUNREF):
        raise ConfigError(f"unknown global refinement kind {kind!r}")
    step = 1 if kind == PREF else -1
    for node in _iter_real_nodes(mesh):
        if node.kind == EDGE:
            if not 1 <= node.order + step <= me.MAXP:
                raise OrderError(f"edge {node.id}: order {node.order + step} "
                                 f"outside [1,{me.MAXP}]")
        elif node.kind == FACE:
            for q in me.decode_face_order(node.order):
                if not 1 <= q + step <= me.MAXP:
                    raise OrderError(f"face {node.id}: order outside [1,{me.MAXP}]")
        elif node.kind == MIDDLE:
            for q in me.decode_order(node.order):
                if not 1 <= q + step <= me.MAXP:
                    raise OrderError(f"middle {node.id}: order outside [1,{me.MAXP}]")
    for node in _iter_real_nodes(mesh):
        if node.kind == EDGE:
            node.order += step
        elif node.kind == FACE:
            p1, p2 = me.decode_face_order(node.order)
            node.order = me.encode_face_order(p1 + step, p2 + step)
        elif node.kind == MIDDLE:
            px, py, pz = me.decode_order(node.order)
            node.order = me.encode_order(px + step, py + step, pz + step)
        node.dofs = None
    mesh._touch()


def adaptive_pref(mesh: Mesh, targets, rule: str = MIN_RULE):
    """Set middle orders, then re-balance face and edge orders by min/max rule."""
    if rule not in (MIN_RULE, MAX_RULE):
        raise ConfigError(f"unknown order rule {rule!r}")
    agg = min if rule == MIN_RULE else max
    for mdle, want in targets:
        node = mesh.NODES[mdle]
        if node.kind != MIDDLE or not node.active:
            raise MeshError(f"p-refinement target {mdle} is not an active element")
        px, py, pz = me.check_order_triple(want)
        node.order = me.encode_order(px, py, pz)
        node.dofs = None

    face_contrib = {}
    for m in mesh.ELEM_ORDER:
        node = mesh.NODES[m]
        p = me.decode_order(node.order)
        for lf in range(6):
            a1, a2 = me.FACE_AXES[lf]
            face_contrib.setdefault(node.elem_nodes[20 + lf], []).append(
                (p[a1], p[a2])
            )
    for fid, pairs in face_contrib.items():
        fnode = mesh.NODES[fid]
        new = me.encode_face_order(agg(q[0] for q in pairs), agg(q[1] for q in pairs))
        if new != fnode.order:
            fnode.order = new
            fnode.dofs = None

    edge_contrib = {}
    for m in mesh.ELEM_ORDER:
        node = mesh.NODES[m]
        for lf in range(6):
            fid = node.elem_nodes[20 + lf]
            p1, p2 = me.decode_face_order(mesh.NODES[fid].order)
            for pos, le in enumerate(me.FACE_EDGES[lf]):
                edge_contrib.setdefault(node.elem_nodes[8 + le], []).append(
                    p1 if pos < 2 else p2
                )
    for eid, ps in edge_contrib.items():
        enode = mesh.NODES[eid]
        new = agg(ps)
        if new != enode.order:
            enode.order = new
            enode.dofs = None

    _push_orders_to_constrained_sons(mesh)
    mesh._touch()


def _push_orders_to_constrained_sons(mesh: Mesh):
    """Raise son-entity orders to at least the father's.

    A hanging node's expansion must reproduce the father trace exactly,
    which needs the son order to dominate the father order direction by
    direction; refined in-use entities are pushed down their trees.
    """
    used = mesh.skeleton_in_use()
    queue = [nid for nid in used
             if mesh.NODES[nid].kind in (EDGE, FACE) and mesh.NODES[nid].sons]
    while queue:
        nid = queue.pop()
        node = mesh.NODES[nid]
        if node.kind == EDGE:
            for h in node.sons[0:2]:
                son = mesh.NODES[h]
                if son.order < node.order:
                    son.order = node.order
                    son.dofs = None
                if son.sons:
                    queue.append(h)
        else:
            p1, p2 = me.decode_face_order(node.order)
            for q in node.sons[0:4]:
                son = mesh.NODES[q]
                q1, q2 = me.decode_face_order(son.order)
                new = me.encode_face_order(max(q1, p1), max(q2, p2))
                if new != son.order:
                    son.order = new
                    son.dofs = None
                if son.sons:
                    queue.append(q)
            for k, eid in enumerate(node.sons[4:8]):
                son = mesh.NODES[eid]
                want = p1 if k < 2 else p2
                if son.order < want:
                    son.order = want
                    son.dofs = None
                if son.sons:
                    queue.append(eid)


def execute_pref(mesh: Mesh, mdles, rule: str = MIN_RULE):
    """Isotropic p-refinement of the listed elements by one order."""
    targets = []
    for m in mdles:
        px, py, pz = me.decode_order(mesh.NODES[m].order)
        targets.append((m, (px + 1, py + 1, pz + 1)))
    adaptive_pref(mesh, targets, rule=rule)


def element_info(mesh: Mesh, mdle: int):
    """Snapshot for element computation.

    Returns (norder, orientations, xnod, node_list): 19 orders (12 edge,
    6 face, middle), 18 orientation flags (all zero), the 8 vertex
    coordinates, and the 27 node ids.
    """
    node = mesh.NODES[mdle]
    if node.kind != MIDDLE:
        raise MeshError(f"node {mdle} is not a middle node")
    if not node.active:
        raise MeshError(f"element {mdle} is not active")
    norder = [mesh.NODES[eid].order for eid in node.elem_nodes[8:20]]
    norder += [mesh.NODES[fid].order for fid in node.elem_nodes[20:26]]
    norder.append(node.order)
    orientations = [0] * 18
    xnod = mesh.vertex_coords(node.elem_nodes[0:8])
    return norder, orientations, xnod, mesh.elem_nodes(mdle)
