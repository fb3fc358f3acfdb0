"""Master hexahedron: topology tables, quadrature, and shape functions.

The reference element is the unit cube [0,1]^3.  Vertices 1..8 run
counterclockwise around the bottom quad and then the top quad:

    v1=(0,0,0) v2=(1,0,0) v3=(1,1,0) v4=(0,1,0)   bottom
    v5=(0,0,1) v6=(1,0,1) v7=(1,1,1) v8=(0,1,1)   top

Edges 1-4 bound the bottom face, 5-8 the top face, 9-12 are vertical.
Every edge is directed along a positive coordinate axis, and every face
is parametrized by the two global axes that span it, taken in x,y,z
order.  With this convention a structured hex mesh (and anything
obtained from it by the isotropic refinements implemented here) has
orientation 0 on all shared entities, which is the only orientation the
library supports.

Faces: 1 z=0, 2 z=1, 3 y=0, 4 x=1, 5 y=1, 6 x=0.

Shape functions for all four spaces of the sequence

    H1 --grad--> H(curl) --curl--> H(div) --div--> L2

are hierarchical tensor products of two 1D families: the H1 family
{1-s, s, integrated Legendre of degree 2..p} and the L2 family of
shifted Legendre polynomials (the derivative of the first family spans
the second, which is what makes the sequence exact by construction).
Functions are emitted in blocks: 8 vertex blocks, 12 edge blocks, 6
face blocks, then the interior block.  Inside a block the ordering is
lexicographic with the last tensor index fastest; HCURL face blocks
list the family directed along the first face axis before the second.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, OrderError, OrientationError

MAXP = 9

H1 = "H1"
HCURL = "HCURL"
HDIV = "HDIV"
L2 = "L2"
SPACES = (H1, HCURL, HDIV, L2)

# ---------------------------------------------------------------------------
# topology tables (0-based vertex/edge/face indices; docs use 1-based)

VERT_COORDS = np.array(
    [
        (0.0, 0.0, 0.0),
        (1.0, 0.0, 0.0),
        (1.0, 1.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
        (1.0, 0.0, 1.0),
        (1.0, 1.0, 1.0),
        (0.0, 1.0, 1.0),
    ]
)

# endpoints in +axis direction
EDGE_VERTS = (
    (0, 1), (1, 2), (3, 2), (0, 3),
    (4, 5), (5, 6), (7, 6), (4, 7),
    (0, 4), (1, 5), (2, 6), (3, 7),
)
EDGE_AXIS = (0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2)

# face corner vertices in tensor order over the face axes (a1,a2):
# (0,0), (1,0), (0,1), (1,1)
FACE_VERTS = (
    (0, 1, 3, 2),
    (4, 5, 7, 6),
    (0, 1, 4, 5),
    (1, 2, 5, 6),
    (3, 2, 7, 6),
    (0, 3, 4, 7),
)
FACE_AXES = ((0, 1), (0, 1), (0, 2), (1, 2), (0, 2), (1, 2))
FACE_NORMAL_AXIS = (2, 2, 1, 0, 1, 0)
FACE_SIDE = (0, 1, 0, 1, 1, 0)
# face edges ordered [a1 at a2=0, a1 at a2=1, a2 at a1=0, a2 at a1=1]
FACE_EDGES = (
    (0, 2, 3, 1),
    (4, 6, 7, 5),
    (0, 4, 8, 9),
    (1, 5, 9, 10),
    (2, 6, 11, 10),
    (3, 7, 8, 11),
)
# sign making cross(dxi/dt1, dxi/dt2) point out of the element
NSIGN = (-1.0, 1.0, 1.0, 1.0, -1.0, -1.0)

# node slots inside an element: 0-7 vertices, 8-19 edges, 20-25 faces, 26 middle
NSLOTS = 27


# ---------------------------------------------------------------------------
# order encoding

def encode_order(px: int, py: int, pz: int) -> int:
    return 100 * px + 10 * py + pz


def decode_order(nord: int) -> tuple[int, int, int]:
    return nord // 100, (nord // 10) % 10, nord % 10


def encode_face_order(p1: int, p2: int) -> int:
    return 10 * p1 + p2


def decode_face_order(nord: int) -> tuple[int, int]:
    return nord // 10, nord % 10


def check_order_triple(order) -> tuple[int, int, int]:
    """Accept an (px,py,pz) triple or its 100px+10py+pz encoding."""
    if np.isscalar(order):
        order = decode_order(int(order))
    px, py, pz = (int(p) for p in order)
    for p in (px, py, pz):
        if not 1 <= p <= MAXP:
            raise OrderError(f"order {order} outside [1,{MAXP}]")
    return px, py, pz


def uniform_norder(order) -> list[int]:
    """19-entry order vector (12 edges, 6 faces, middle) at a uniform triple."""
    px, py, pz = check_order_triple(order)
    p = (px, py, pz)
    norder = [p[EDGE_AXIS[i]] for i in range(12)]
    norder += [encode_face_order(p[a1], p[a2]) for a1, a2 in FACE_AXES]
    norder.append(encode_order(px, py, pz))
    return norder


# ---------------------------------------------------------------------------
# quadrature

class QuadratureRule3D:
    """Tensor Gauss-Legendre rule on the master cube.

    Attributes
    ----------
    points : (n, 3) array in [0,1]^3
    weights : (n,) array, positive, summing to 1
    """

    def __init__(self, points, weights):
        self.points = points
        self.weights = weights

    def __len__(self):
        return len(self.weights)


def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes/weights on [0,1]."""
    if not 1 <= n <= 16:
        raise ConfigError(f"quadrature count {n} outside [1,16]")
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def gauss_quadrature_2d(counts) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule on the unit square; returns ((n,2) points, weights)."""
    x1, w1 = gauss_1d(counts[0])
    x2, w2 = gauss_1d(counts[1])
    p1, p2 = np.meshgrid(x1, x2, indexing="ij")
    pts = np.column_stack([p1.ravel(), p2.ravel()])
    return pts, np.outer(w1, w2).ravel()


def gauss_quadrature_3d(counts) -> QuadratureRule3D:
    xs, ws = zip(*(gauss_1d(c) for c in counts))
    px, py, pz = np.meshgrid(xs[0], xs[1], xs[2], indexing="ij")
    pts = np.column_stack([px.ravel(), py.ravel(), pz.ravel()])
    w = (ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]).ravel()
    return QuadratureRule3D(pts, w)


# ---------------------------------------------------------------------------
# 1D bases

def legendre_shifted(nmax: int, x: np.ndarray):
    """Shifted Legendre polynomials on [0,1].

    Returns (P, dP), each of shape (nmax, len(x)), holding values and
    first derivatives of P̂_0 .. P̂_{nmax-1}.
    """
    x = np.asarray(x, dtype=float)
    P = np.zeros((max(nmax, 1), x.size))
    dP = np.zeros_like(P)
    t = 2.0 * x - 1.0
    P[0] = 1.0
    if nmax > 1:
        P[1] = t
        dP[1] = 2.0
    for k in range(1, nmax - 1):
        P[k + 1] = ((2 * k + 1) * t * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = ((2 * k + 1) * (2.0 * P[k] + t * dP[k]) - k * dP[k - 1]) / (k + 1)
    return P[:nmax], dP[:nmax]


def h1_basis_1d(p: int, x: np.ndarray):
    """1D hierarchical H1 basis on [0,1]: {1-x, x, L̂_2..L̂_p}.

    L̂_n is the integrated shifted Legendre polynomial, vanishing at both
    endpoints, with L̂_n' = P̂_{n-1}.  Returns (H, dH) of shape (p+1, len(x)).
    """
    x = np.asarray(x, dtype=float)
    H = np.zeros((p + 1, x.size))
    dH = np.zeros_like(H)
    H[0] = 1.0 - x
    dH[0] = -1.0
    H[1] = x
    dH[1] = 1.0
    if p >= 2:
        P, _ = legendre_shifted(p + 1, x)
        for n in range(2, p + 1):
            H[n] = (P[n] - P[n - 2]) / (2.0 * (2 * n - 1))
            dH[n] = P[n - 1]
    return H, dH


# ---------------------------------------------------------------------------
# shape sets

class ShapeSet:
    """Evaluated shape functions of one space at a batch of points.

    values are (nrdof, npts) for scalar spaces and (nrdof, 3, npts) for
    vector spaces.  The space-appropriate derivative is stored in `grad`
    (H1), `curl` (HCURL), or `div` (HDIV); L2 has none.  `slots` maps
    each function to its element node slot (0-7 vertices, 8-19 edges,
    20-25 faces, 26 interior), which is what ties the basis ordering to
    the mesh node ordering.
    """

    def __init__(self, space, values, deriv, slots):
        self.space = space
        self.values = values
        self.slots = slots
        self.nrdof = len(slots)
        self.grad = deriv if space == H1 else None
        self.curl = deriv if space == HCURL else None
        self.div = deriv if space == HDIV else None


def _norder_parts(norder):
    edges = [int(p) for p in norder[:12]]
    faces = [decode_face_order(int(q)) for q in norder[12:18]]
    middle = decode_order(int(norder[18]))
    return edges, faces, middle


def _h1_recipe(norder):
    """(slot, ix, iy, iz) rows; index 0/1 are the endpoint functions, n>=2 bubbles."""
    edges, faces, middle = _norder_parts(norder)
    rows = []
    for v in range(8):
        c = VERT_COORDS[v].astype(int)
        rows.append((v, c[0], c[1], c[2]))
    for e in range(12):
        ax = EDGE_AXIS[e]
        c = VERT_COORDS[EDGE_VERTS[e][0]].astype(int)
        for n in range(2, edges[e] + 1):
            idx = c.copy()
            idx[ax] = n
            rows.append((8 + e, idx[0], idx[1], idx[2]))
    for f in range(6):
        a1, a2 = FACE_AXES[f]
        p1, p2 = faces[f]
        base = VERT_COORDS[FACE_VERTS[f][0]].astype(int)
        for n1 in range(2, p1 + 1):
            for n2 in range(2, p2 + 1):
                idx = base.copy()
                idx[a1] = n1
                idx[a2] = n2
                rows.append((20 + f, idx[0], idx[1], idx[2]))
    px, py, pz = middle
    for n1 in range(2, px + 1):
        for n2 in range(2, py + 1):
            for n3 in range(2, pz + 1):
                rows.append((26, n1, n2, n3))
    return rows


def _hcurl_recipe(norder):
    """(slot, family axis, i, j, k): the family-axis factor is an L2 index."""
    edges, faces, middle = _norder_parts(norder)
    rows = []
    for e in range(12):
        ax = EDGE_AXIS[e]
        c = VERT_COORDS[EDGE_VERTS[e][0]].astype(int)
        for n in range(edges[e]):
            idx = c.copy()
            idx[ax] = n
            rows.append((8 + e, ax, idx[0], idx[1], idx[2]))
    for f in range(6):
        a1, a2 = FACE_AXES[f]
        p1, p2 = faces[f]
        base = VERT_COORDS[FACE_VERTS[f][0]].astype(int)
        for n1 in range(p1):            # family along a1
            for n2 in range(2, p2 + 1):
                idx = base.copy()
                idx[a1] = n1
                idx[a2] = n2
                rows.append((20 + f, a1, idx[0], idx[1], idx[2]))
        for n1 in range(2, p1 + 1):     # family along a2
            for n2 in range(p2):
                idx = base.copy()
                idx[a1] = n1
                idx[a2] = n2
                rows.append((20 + f, a2, idx[0], idx[1], idx[2]))
    px, py, pz = middle
    p = (px, py, pz)
    for ax in range(3):
        o1, o2 = [a for a in range(3) if a != ax]
        for n in range(p[ax]):
            for n1 in range(2, p[o1] + 1):
                for n2 in range(2, p[o2] + 1):
                    idx = [0, 0, 0]
                    idx[ax] = n
                    idx[o1] = n1
                    idx[o2] = n2
                    rows.append((26, ax, idx[0], idx[1], idx[2]))
    return rows


def _hdiv_recipe(norder):
    """(slot, family axis, i, j, k): the family-axis factor is an H1 index."""
    _, faces, middle = _norder_parts(norder)
    rows = []
    for f in range(6):
        a1, a2 = FACE_AXES[f]
        m = FACE_NORMAL_AXIS[f]
        p1, p2 = faces[f]
        for n1 in range(p1):
            for n2 in range(p2):
                idx = [0, 0, 0]
                idx[m] = FACE_SIDE[f]
                idx[a1] = n1
                idx[a2] = n2
                rows.append((20 + f, m, idx[0], idx[1], idx[2]))
    px, py, pz = middle
    p = (px, py, pz)
    for ax in range(3):
        o1, o2 = [a for a in range(3) if a != ax]
        for n in range(2, p[ax] + 1):
            for n1 in range(p[o1]):
                for n2 in range(p[o2]):
                    idx = [0, 0, 0]
                    idx[ax] = n
                    idx[o1] = n1
                    idx[o2] = n2
                    rows.append((26, ax, idx[0], idx[1], idx[2]))
    return rows


def _l2_recipe(norder):
    _, _, (px, py, pz) = _norder_parts(norder)
    return [
        (26, n1, n2, n3)
        for n1 in range(px)
        for n2 in range(py)
        for n3 in range(pz)
    ]


def shape_functions_elem(space: str, xi, norder) -> ShapeSet:
    """Variable-order shape set for one element (19-entry order vector).

    This is the engine behind `shape_functions`; element routines call it
    directly so that edge/face orders below the interior order select the
    matching hierarchical subset.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    npts = xi.shape[0]
    edges, fcs, middle = _norder_parts(norder)
    pmax = [0, 0, 0]
    for e in range(12):
        ax = EDGE_AXIS[e]
        pmax[ax] = max(pmax[ax], edges[e])
    for f in range(6):
        a1, a2 = FACE_AXES[f]
        pmax[a1] = max(pmax[a1], fcs[f][0])
        pmax[a2] = max(pmax[a2], fcs[f][1])
    for ax in range(3):
        pmax[ax] = max(pmax[ax], middle[ax])
        if not 1 <= pmax[ax] <= MAXP:
            raise OrderError(f"order {pmax[ax]} outside [1,{MAXP}]")

    Hs, dHs, Ls, dLs = [], [], [], []
    for ax in range(3):
        Hv, dHv = h1_basis_1d(pmax[ax], xi[:, ax])
        Pv, dPv = legendre_shifted(pmax[ax], xi[:, ax])
        Hs.append(Hv)
        dHs.append(dHv)
        Ls.append(Pv)
        dLs.append(dPv)

    if space == H1:
        rows = _h1_recipe(norder)
        slots = np.array([r[0] for r in rows], dtype=int)
        idx = np.array([r[1:] for r in rows], dtype=int).reshape(-1, 3)
        fx, fy, fz = Hs[0][idx[:, 0]], Hs[1][idx[:, 1]], Hs[2][idx[:, 2]]
        vals = fx * fy * fz
        grad = np.empty((len(rows), 3, npts))
        grad[:, 0] = dHs[0][idx[:, 0]] * fy * fz
        grad[:, 1] = fx * dHs[1][idx[:, 1]] * fz
        grad[:, 2] = fx * fy * dHs[2][idx[:, 2]]
        return ShapeSet(H1, vals, grad, slots)

    if space == L2:
        rows = _l2_recipe(norder)
        slots = np.array([r[0] for r in rows], dtype=int)
        idx = np.array([r[1:] for r in rows], dtype=int).reshape(-1, 3)
        vals = Ls[0][idx[:, 0]] * Ls[1][idx[:, 1]] * Ls[2][idx[:, 2]]
        return ShapeSet(L2, vals, None, slots)

    if space == HCURL:
        rows = _hcurl_recipe(norder)
    elif space == HDIV:
        rows = _hdiv_recipe(norder)
    else:
        raise ConfigError(f"unknown space {space!r}")

    slots = np.array([r[0] for r in rows], dtype=int)
    fam = np.array([r[1] for r in rows], dtype=int)
    idx = np.array([r[2:] for r in rows], dtype=int).reshape(-1, 3)
    nf = len(rows)
    vals = np.zeros((nf, 3, npts))
    if space == HCURL:
        curl = np.zeros((nf, 3, npts))
        for ax in range(3):
            sel = fam == ax
            if not sel.any():
                continue
            o1, o2 = [a for a in range(3) if a != ax]
            tabs = [None, None, None]
            dtabs = [None, None, None]
            tabs[ax] = Ls[ax][idx[sel, ax]]
            dtabs[ax] = dLs[ax][idx[sel, ax]]
            for o in (o1, o2):
                tabs[o] = Hs[o][idx[sel, o]]
                dtabs[o] = dHs[o][idx[sel, o]]
            g = tabs[0] * tabs[1] * tabs[2]
            vals[sel, ax] = g
            # curl(g e_ax)_a = sum_b eps(a,b,ax) d_b g
            parts = {}
            for b in (o1, o2):
                factors = [tabs[0], tabs[1], tabs[2]]
                factors[b] = dtabs[b]
                parts[b] = factors[0] * factors[1] * factors[2]
            for a in range(3):
                for b in (o1, o2):
                    e = _LEVI[a][b][ax]
                    if e:
                        curl[sel, a] += e * parts[b]
        return ShapeSet(HCURL, vals, curl, slots)

    div = np.zeros((nf, npts))
    for ax in range(3):
        sel = fam == ax
        if not sel.any():
            continue
        o1, o2 = [a for a in range(3) if a != ax]
        tabs = [None, None, None]
        tabs[ax] = Hs[ax][idx[sel, ax]]
        for o in (o1, o2):
            tabs[o] = Ls[o][idx[sel, o]]
        vals[sel, ax] = tabs[0] * tabs[1] * tabs[2]
        dax = dHs[ax][idx[sel, ax]]
        factors = [tabs[0], tabs[1], tabs[2]]
        factors[ax] = dax
        div[sel] = factors[0] * factors[1] * factors[2]
    return ShapeSet(HDIV, vals, div, slots)


_LEVI = [[[0, 0, 0], [0, 0, 1], [0, -1, 0]],
         [[0, 0, -1], [0, 0, 0], [1, 0, 0]],
         [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]]


def shape_functions(space, xi, order, edge_orient=None, face_orient=None) -> ShapeSet:
    """Uniform-order shape set with orientation flags (only 0 supported)."""
    for flags, n, what in ((edge_orient, 12, "edge"), (face_orient, 6, "face")):
        if flags is not None and any(int(o) != 0 for o in flags):
            raise OrientationError(f"nonzero {what} orientation not supported")
    return shape_functions_elem(space, xi, uniform_norder(order))


def dof_count(space: str, order) -> int:
    px, py, pz = check_order_triple(order)
    if space == H1:
        return (px + 1) * (py + 1) * (pz + 1)
    if space == HCURL:
        return px * (py + 1) * (pz + 1) + (px + 1) * py * (pz + 1) + (px + 1) * (py + 1) * pz
    if space == HDIV:
        return (px + 1) * py * pz + px * (py + 1) * pz + px * py * (pz + 1)
    if space == L2:
        return px * py * pz
    raise ConfigError(f"unknown space {space!r}")


def layout_counts(space: str, norder, include_middle: bool = True) -> np.ndarray:
    """Per-slot dof counts (length 27) for one scalar component."""
    edges, faces, (px, py, pz) = _norder_parts(norder)
    counts = np.zeros(NSLOTS, dtype=int)
    if space == H1:
        counts[:8] = 1
        for e in range(12):
            counts[8 + e] = edges[e] - 1
        for f in range(6):
            p1, p2 = faces[f]
            counts[20 + f] = (p1 - 1) * (p2 - 1)
        counts[26] = (px - 1) * (py - 1) * (pz - 1)
    elif space == HCURL:
        for e in range(12):
            counts[8 + e] = edges[e]
        for f in range(6):
            p1, p2 = faces[f]
            counts[20 + f] = p1 * (p2 - 1) + (p1 - 1) * p2
        counts[26] = (px * (py - 1) * (pz - 1) + (px - 1) * py * (pz - 1)
                      + (px - 1) * (py - 1) * pz)
    elif space == HDIV:
        for f in range(6):
            p1, p2 = faces[f]
            counts[20 + f] = p1 * p2
        counts[26] = (px - 1) * py * pz + px * (py - 1) * pz + px * py * (pz - 1)
    elif space == L2:
        counts[26] = px * py * pz
    else:
        raise ConfigError(f"unknown space {space!r}")
    if not include_middle:
        counts[26] = 0
    return counts


def face_param(face: int, t):
    """Embed face-local coordinates into the cube.

    Parameters
    ----------
    face : 1..6
    t : (n, 2) or (2,) points on the unit square

    Returns
    -------
    xi : (n, 3) points, dxidt : (3, 2) constant tangent matrix
    """
    if not 1 <= face <= 6:
        raise ConfigError(f"face index {face} outside 1..6")
    t = np.atleast_2d(np.asarray(t, dtype=float))
    f = face - 1
    a1, a2 = FACE_AXES[f]
    xi = np.zeros((t.shape[0], 3))
    xi[:, FACE_NORMAL_AXIS[f]] = FACE_SIDE[f]
    xi[:, a1] = t[:, 0]
    xi[:, a2] = t[:, 1]
    dxidt = np.zeros((3, 2))
    dxidt[a1, 0] = 1.0
    dxidt[a2, 1] = 1.0
    return xi, dxidt
