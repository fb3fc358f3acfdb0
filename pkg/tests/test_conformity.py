import numpy as np
import pytest

from hphex import conformity as cf
from hphex import masterel as me
from hphex.errors import ConfigError, IrregularityError, SolveError
from hphex.mesh import element_info, generate_initial_mesh, refine_element
from hphex.physics import set_bcond

from conftest import galerkin_physics, grid_geometry, uw_physics


def build(geo, physics, order=(2, 2, 2)):
    return generate_initial_mesh(geo, physics, order)


def h1v(p, t):
    return me.h1_basis_1d(p, np.asarray(t, dtype=float))[0]


# ---------------------------------------------------------------------------
# coefficient matrices


def test_edge_midpoint_lowest_order():
    M = cf.constraint_coefficients("H1", "edge-midpoint-vertex", 1)
    assert M.shape == (1, 2)
    assert np.allclose(M, [[0.5, 0.5]], atol=1e-14)


def test_edge_half_reproduces_parent_trace():
    rng = np.random.default_rng(7)
    for p in (2, 3, 5):
        coef = rng.standard_normal(p + 1)
        mid = cf.constraint_coefficients("H1", "edge-midpoint-vertex", p) @ coef
        for half in (0, 1):
            M = cf.constraint_coefficients("H1", f"edge-half-{half + 1}", p)
            assert M.shape == (p - 1, p + 1)
            bub = M @ coef
            s = rng.random(20)
            t = 0.5 * (s + half)
            g = coef @ h1v(p, t)
            ends = coef @ h1v(p, [0.5 * half, 0.5 * (half + 1)])
            child = ends[0] * (1 - s) + ends[1] * s
            child += bub @ h1v(p, s)[2:]
            assert np.max(np.abs(child - g)) < 1e-12
            # the half's inner endpoint is the midpoint-vertex value
            inner = ends[1] if half == 0 else ends[0]
            assert abs(inner - mid[0]) < 1e-13


def test_edge_half_higher_child_order():
    # son order may exceed the father's after p adaptivity
    coef = np.array([0.3, -0.7, 1.1])
    M = cf.constraint_coefficients("H1", "edge-half-1", 2, child_order=4)
    assert M.shape == (3, 3)
    s = np.linspace(0.05, 0.95, 9)
    g = coef @ h1v(2, 0.5 * s)
    ends = coef @ h1v(2, [0.0, 0.5])
    child = ends[0] * (1 - s) + ends[1] * s + (M @ coef) @ h1v(4, s)[2:]
    assert np.max(np.abs(child - g)) < 1e-12


def test_hdiv_quadrant_constant_flux():
    M = cf.constraint_coefficients("HDIV", "face-quadrant-1", (1, 1))
    assert M.shape == (1, 1)
    assert abs(M[0, 0] - 0.25) < 1e-14


def test_hdiv_quadrant_scales_parent_trace():
    rng = np.random.default_rng(11)
    p1, p2 = 2, 3
    coef = rng.standard_normal(p1 * p2)
    s = rng.random((20, 2))
    for q in range(4):
        h1_, h2_ = q & 1, q >> 1
        M = cf.constraint_coefficients("HDIV", f"face-quadrant-{q + 1}", (p1, p2))
        child_coef = M @ coef

        def ev(cv, n1, n2, t1, t2):
            P1, _ = me.legendre_shifted(n1, t1)
            P2, _ = me.legendre_shifted(n2, t2)
            out = np.zeros_like(t1)
            for j1 in range(n1):
                for j2 in range(n2):
                    out += cv[j1 * n2 + j2] * P1[j1] * P2[j2]
            return out

        child = ev(child_coef, p1, p2, s[:, 0], s[:, 1])
        parent = ev(coef, p1, p2, 0.5 * (s[:, 0] + h1_), 0.5 * (s[:, 1] + h2_))
        assert np.max(np.abs(child - 0.25 * parent)) < 1e-12


def _eval_face(cols, coef, pp1, pp2, t1, t2):
    t1 = np.asarray(t1, dtype=float)
    B1 = h1v(pp1, t1)
    B2 = h1v(pp2, np.asarray(t2, dtype=float))
    out = np.zeros_like(t1)
    for c, (k1, k2) in zip(coef, cols):
        out += c * B1[k1] * B2[k2]
    return out


def test_h1_face_catalogue_reproduces_trace():
    """All face constraint cases jointly rebuild the father trace exactly."""
    rng = np.random.default_rng(23)
    for p1, p2 in ((2, 2), (3, 2)):
        cols = cf._face_parent_layout(p1, p2, p1, p1, p2, p2)
        coef = rng.standard_normal(len(cols))
        order = (p1, p2)

        def edge_group(which):
            # [value a, value b, bubbles] along one father edge
            if which == "b":
                va, vb = _eval_face(cols, coef, p1, p2, [0.0, 1.0], [0.0, 0.0])
                bub = [c for c, (k1, k2) in zip(coef, cols) if k1 >= 2 and k2 == 0]
            elif which == "t":
                va, vb = _eval_face(cols, coef, p1, p2, [0.0, 1.0], [1.0, 1.0])
                bub = [c for c, (k1, k2) in zip(coef, cols) if k1 >= 2 and k2 == 1]
            elif which == "l":
                va, vb = _eval_face(cols, coef, p1, p2, [0.0, 0.0], [0.0, 1.0])
                bub = [c for c, (k1, k2) in zip(coef, cols) if k1 == 0 and k2 >= 2]
            else:
                va, vb = _eval_face(cols, coef, p1, p2, [1.0, 1.0], [0.0, 1.0])
                bub = [c for c, (k1, k2) in zip(coef, cols) if k1 == 1 and k2 >= 2]
            return np.concatenate([[va, vb], bub])

        s = rng.random((25, 2))
        s1, s2 = s[:, 0], s[:, 1]
        for q in range(4):
            h1_, h2_ = q & 1, q >> 1
            corners = _eval_face(
                cols, coef, p1, p2,
                [0.5 * h1_, 0.5 * (h1_ + 1), 0.5 * h1_, 0.5 * (h1_ + 1)],
                [0.5 * h2_, 0.5 * h2_, 0.5 * (h2_ + 1), 0.5 * (h2_ + 1)],
            )
            w = (corners[0] * (1 - s1) * (1 - s2) + corners[1] * s1 * (1 - s2)
                 + corners[2] * (1 - s1) * s2 + corners[3] * s1 * s2)

            # bottom / top child edges run along a1
            if h2_ == 0:
                cb = cf.constraint_coefficients(
                    "H1", f"edge-half-{h1_ + 1}", p1) @ edge_group("b")
                ct = cf.constraint_coefficients(
                    "H1", f"face-interior-edge-{h1_ + 1}", order) @ coef
            else:
                cb = cf.constraint_coefficients(
                    "H1", f"face-interior-edge-{h1_ + 1}", order) @ coef
                ct = cf.constraint_coefficients(
                    "H1", f"edge-half-{h1_ + 1}", p1) @ edge_group("t")
            B1 = h1v(p1, s1)
            w += (cb @ B1[2:]) * (1 - s2) + (ct @ B1[2:]) * s2

            # left / right child edges run along a2
            if h1_ == 0:
                cl = cf.constraint_coefficients(
                    "H1", f"edge-half-{h2_ + 1}", p2) @ edge_group("l")
                cr = cf.constraint_coefficients(
                    "H1", f"face-interior-edge-{h2_ + 3}", order) @ coef
            else:
                cl = cf.constraint_coefficients(
                    "H1", f"face-interior-edge-{h2_ + 3}", order) @ coef
                cr = cf.constraint_coefficients(
                    "H1", f"edge-half-{h2_ + 1}", p2) @ edge_group("r")
            B2 = h1v(p2, s2)
            w += (cl @ B2[2:]) * (1 - s1) + (cr @ B2[2:]) * s1

            fq = cf.constraint_coefficients(
                "H1", f"face-quadrant-{q + 1}", order) @ coef
            i = 0
            for m1 in range(2, p1 + 1):
                for m2 in range(2, p2 + 1):
                    w += fq[i] * B1[m1] * B2[m2]
                    i += 1

            g = _eval_face(cols, coef, p1, p2,
                           0.5 * (s1 + h1_), 0.5 * (s2 + h2_))
            assert np.max(np.abs(w - g)) < 1e-12

        ctr = cf.constraint_coefficients("H1", "face-center-vertex", order) @ coef
        assert abs(ctr[0] - _eval_face(cols, coef, p1, p2, [0.5], [0.5])[0]) < 1e-13


def test_constraint_cache_reuse_and_bad_case():
    A = cf.constraint_coefficients("H1", "edge-half-1", 3)
    B = cf.constraint_coefficients("H1", "edge-half-1", 3)
    assert A is B or np.array_equal(A, B)
    with pytest.raises(ConfigError):
        cf.constraint_coefficients("H1", "face-octant-1", (2, 2))
    with pytest.raises(ConfigError):
        cf.constraint_coefficients("HCURL", "edge-half-1", 2)


# ---------------------------------------------------------------------------
# modified element


def test_conforming_element_gives_identity():
    physics = uw_physics()
    physics.set_trace(0)
    physics.set_trace(1)
    mesh = build(grid_geometry(1, 1, 1), physics)
    mod = cf.modified_element(mesh, mesh.physics, 1)
    n = mod.C.shape[0]
    assert mod.C.shape == (n, n)
    assert np.array_equal(mod.C, np.eye(n))
    assert len(mod.dof_nodes) == n
    # traces own no interior dofs: every bubble dof belongs to u or sigma
    for i in np.flatnonzero(mod.bubble):
        nid, attr, comp, k = mod.dof_nodes[i]
        assert nid == 1
        assert attr in (2, 3)
    assert not mod.dirichlet.any()


def test_hanging_face_rows_lowest_order():
    mesh = build(grid_geometry(2, 1, 1, lengths=(2.0, 1.0, 1.0)),
                 galerkin_physics(), order=(1, 1, 1))
    refine_element(mesh, 1)
    son = mesh.NODES[1].sons[1]  # octant touching the shared face
    mod = cf.modified_element(mesh, mesh.physics, son)
    nloc = mod.C.shape[0]
    assert nloc == 8 and mod.C.shape[1] < 2 * nloc
    sums = mod.C.sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) < 1e-12
    row_kinds = set()
    for i in range(nloc):
        nz = np.sort(mod.C[i][np.abs(mod.C[i]) > 0])
        row_kinds.add(tuple(np.round(nz, 12)))
    assert (0.5, 0.5) in row_kinds          # hanging edge midpoint
    assert (0.25, 0.25, 0.25, 0.25) in row_kinds  # hanging face center


def test_two_level_hanging_is_rejected():
    mesh = build(grid_geometry(2, 1, 1, lengths=(2.0, 1.0, 1.0)),
                 galerkin_physics(), order=(1, 1, 1))
    refine_element(mesh, 1)
    son = mesh.NODES[1].sons[1]
    refine_element(mesh, son)  # no closure: mesh is now 2-irregular
    with pytest.raises(IrregularityError):
        for mdle in mesh.ELEM_ORDER:
            cf.modified_element(mesh, mesh.physics, mdle)


def test_dirichlet_values_flow_into_modified_element():
    mesh = build(grid_geometry(1, 1, 1), galerkin_physics())
    set_bcond(mesh, 0, 0, 0, 1)
    cf.update_Ddof(mesh, mesh.physics, _linear_fn)
    mod = cf.modified_element(mesh, mesh.physics, 1)
    for i in np.flatnonzero(mod.dirichlet):
        nid, attr, comp, k = mod.dof_nodes[i]
        node = mesh.NODES[nid]
        if node.kind == "VERTEX":
            assert abs(mod.dirichlet_values[i] - node.coords[0]) < 1e-13
        else:
            assert abs(mod.dirichlet_values[i]) < 1e-12
    # fully clamped cube at p=2: 8 verts + 12 edge bubbles + 6 face bubbles
    assert mod.dirichlet.sum() == 26


# ---------------------------------------------------------------------------
# gather


def _linear_fn(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    grads = np.zeros((len(x), 3))
    grads[:, 0] = 1.0
    return x[:, 0].copy(), grads


def _quadratic_fn(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    grads = np.zeros((len(x), 3))
    grads[:, 0] = 2.0 * x[:, 0]
    return x[:, 0] ** 2, grads


def test_gather_reproduces_linear_field_across_hanging_face():
    mesh = build(grid_geometry(2, 1, 1, lengths=(2.0, 1.0, 1.0)),
                 galerkin_physics(), order=(1, 1, 1))
    refine_element(mesh, 1)
    for nid in mesh.skeleton_in_use():
        node = mesh.NODES[nid]
        if node.kind == "VERTEX" and not cf.is_constrained(mesh, nid):
            node.dofs = {0: np.array([[node.coords[0]]])}
    for mdle in mesh.ELEM_ORDER:
        local = cf.gather_solution(mesh, mdle, 0)
        _, _, xnod, _ = element_info(mesh, mdle)
        assert local.shape == (8, 1)
        assert np.max(np.abs(local[:, 0] - xnod[:, 0])) < 1e-12


def test_gather_before_solve_raises():
    mesh = build(grid_geometry(1, 1, 1), galerkin_physics())
    with pytest.raises(SolveError):
        cf.gather_solution(mesh, 1, 0)


def test_gather_disabled_attr_still_works():
    mesh = build(grid_geometry(1, 1, 1), galerkin_physics(), order=(1, 1, 1))
    mesh.physics.attrs[0].enabled = False
    for nid in mesh.skeleton_in_use():
        node = mesh.NODES[nid]
        if node.kind == "VERTEX":
            node.dofs = {0: np.array([[2.0 * node.coords[0]]])}
    local = cf.gather_solution(mesh, 1, 0)
    assert local.shape == (8, 1)
    assert np.max(np.abs(local[:, 0] - 2.0 * mesh.vertex_coords(
        mesh.NODES[1].elem_nodes[:8])[:, 0])) < 1e-13


# ---------------------------------------------------------------------------
# Dirichlet data


def test_ddof_linear_data_lands_on_vertices():
    mesh = build(grid_geometry(2, 2, 2), galerkin_physics())
    set_bcond(mesh, 0, 0, 0, 1)
    cf.update_Ddof(mesh, mesh.physics, _linear_fn)
    for node in mesh.NODES[1:]:
        if not node.bcond or node.dofs is None:
            continue
        dofs = node.dofs.get(0)
        if dofs is None or dofs.size == 0:
            continue
        if node.kind == "VERTEX":
            assert abs(dofs[0, 0] - node.coords[0]) < 1e-13
        else:
            assert np.max(np.abs(dofs)) < 1e-12


def test_ddof_quadratic_edge_projection_is_exact():
    mesh = build(grid_geometry(1, 1, 1), galerkin_physics())
    set_bcond(mesh, 0, 0, 0, 1)
    cf.update_Ddof(mesh, mesh.physics, _quadratic_fn)
    checked = 0
    for node in mesh.NODES[1:]:
        if node.kind != "EDGE":
            continue
        xa = mesh.NODES[node.verts[0]].coords
        xb = mesh.NODES[node.verts[1]].coords
        if abs((xb - xa)[0]) < 0.5:  # only x-directed edges vary
            assert np.max(np.abs(node.dofs[0])) < 1e-12
            continue
        t = np.linspace(0.0, 1.0, 10)
        H = h1v(node.order, t)
        w = xa[0] ** 2 * H[0] + xb[0] ** 2 * H[1] + node.dofs[0][0, 0] * H[2]
        g = (xa[0] + t * (xb - xa)[0]) ** 2
        assert np.max(np.abs(w - g)) < 1e-12
        checked += 1
    assert checked == 4


def test_ddof_face_projection_reproduces_biquadratic():
    # u0 = x^2 y^2 puts a genuine bubble on z-faces
    def fn(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.zeros((len(x), 3))
        g[:, 0] = 2.0 * x[:, 0] * x[:, 1] ** 2
        g[:, 1] = 2.0 * x[:, 0] ** 2 * x[:, 1]
        return x[:, 0] ** 2 * x[:, 1] ** 2, g

    mesh = build(grid_geometry(1, 1, 1), galerkin_physics(), order=(3, 3, 3))
    set_bcond(mesh, 0, 0, 0, 1)
    cf.update_Ddof(mesh, mesh.physics, fn)
    # reconstruct on the z=0 face and compare pointwise
    fid = None
    for node in mesh.NODES[1:]:
        if node.kind == "FACE":
            if all(abs(mesh.NODES[v].coords[2]) < 1e-14 for v in node.verts):
                fid = node.id
    assert fid is not None
    face = mesh.NODES[fid]
    p1, p2 = me.decode_face_order(face.order)
    rng = np.random.default_rng(3)
    pts = rng.random((12, 2))
    B1 = h1v(p1, pts[:, 0])
    B2 = h1v(p2, pts[:, 1])
    w = np.zeros(12)
    for val, (k1, k2) in zip(
            [mesh.NODES[v].dofs[0][0, 0] for v in face.verts],
            [(0, 0), (1, 0), (0, 1), (1, 1)]):
        w += val * B1[k1] * B2[k2]
    for pos, kmap in ((0, lambda n: (n, 0)), (1, lambda n: (n, 1)),
                      (2, lambda n: (0, n)), (3, lambda n: (1, n))):
        en = mesh.NODES[face.edges[pos]]
        for n in range(2, en.order + 1):
            k1, k2 = kmap(n)
            w += en.dofs[0][n - 2, 0] * B1[k1] * B2[k2]
    i = 0
    for n1 in range(2, p1 + 1):
        for n2 in range(2, p2 + 1):
            w += face.dofs[0][i, 0] * B1[n1] * B2[n2]
            i += 1
    corners = mesh.vertex_coords(face.verts)
    x = np.einsum("cp,ci->pi", np.stack([
        (1 - pts[:, 0]) * (1 - pts[:, 1]), pts[:, 0] * (1 - pts[:, 1]),
        (1 - pts[:, 0]) * pts[:, 1], pts[:, 0] * pts[:, 1]]), corners)
    assert np.max(np.abs(w - fn(x)[0])) < 1e-10


def test_ddof_homogeneous_zeroes_without_data():
    physics = galerkin_physics()
    physics.attrs[0].homogeneous_dirichlet = True
    mesh = build(grid_geometry(1, 1, 1), physics)
    set_bcond(mesh, 0, 0, 0, 1)
    cf.update_Ddof(mesh, mesh.physics)  # no function needed
    corner = mesh.NODES[1].elem_nodes[0]
    assert np.array_equal(mesh.NODES[corner].dofs[0], np.zeros((1, 1)))


def test_ddof_normal_trace_data_unsupported():
    mesh = build(grid_geometry(1, 1, 1), uw_physics())
    set_bcond(mesh, 0, 1, 0, 1)  # flux trace attribute
    with pytest.raises(ConfigError):
        cf.update_Ddof(mesh, mesh.physics, _linear_fn)


def test_ddof_requires_function_for_inhomogeneous_data():
    mesh = build(grid_geometry(1, 1, 1), galerkin_physics())
    set_bcond(mesh, 0, 0, 0, 1)
    with pytest.raises(ConfigError):
        cf.update_Ddof(mesh, mesh.physics)


# ---------------------------------------------------------------------------
# geometry dofs


def test_update_gdof_restores_derived_vertices():
    mesh = build(grid_geometry(1, 1, 1, lengths=(2.0, 1.0, 1.0)),
                 galerkin_physics())
    refine_element(mesh, 1)
    center = mesh.NODES[1].interior[-1]
    assert np.allclose(mesh.NODES[center].coords, [1.0, 0.5, 0.5])
    mesh.NODES[center].coords = np.array([9.0, 9.0, 9.0])
    cf.update_gdof(mesh)
    assert np.allclose(mesh.NODES[center].coords, [1.0, 0.5, 0.5], atol=1e-14)
    before = {n.id: n.coords.copy() for n in mesh.NODES[1:]
              if n.kind == "VERTEX"}
    cf.update_gdof(mesh)
    for nid, xyz in before.items():
        assert np.array_equal(mesh.NODES[nid].coords, xyz)
