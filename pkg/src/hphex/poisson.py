"""Poisson model problems: manufactured solutions and element routines.

Three discretizations of -div(grad u) = f on hexahedral meshes:

* ``galerkin``  -- standard continuous Galerkin, one H1 field.
* ``primal``    -- primal DPG: H1 field plus a normal-trace flux on the
  mesh skeleton, tested against a broken enriched H1 space.
* ``uw``        -- ultraweak DPG: both field equations move to L2, the
  skeleton carries an H1 trace and a normal trace, and the broken test
  space is H1 x H(div) at the enriched order.

Every element routine returns an AlocBloc over the problem's attribute
layout; the DPG routines build the rectangular extended stiffness, factor
the Gram matrix, and hand back the condensed trial-space system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import assembly as asm
from . import conformity as cf
from . import dpg
from . import geometry as gm
from . import masterel as me
from .errors import ConfigError
from .mesh import element_info, generate_initial_mesh
from .physics import PhysicsAttr, PhysicsTable


# ---------------------------------------------------------------------------
# manufactured solutions

@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form solution bundle: u, its gradient, and f = -laplacian(u)."""

    name: str
    u: Callable
    grad: Callable
    f: Callable

    def dirichlet(self, x):
        return self.u(x), self.grad(x)


def _linear():
    return ManufacturedSolution(
        "linear",
        u=lambda x: x[:, 0],
        grad=lambda x: np.column_stack(
            [np.ones(len(x)), np.zeros(len(x)), np.zeros(len(x))]),
        f=lambda x: np.zeros(len(x)),
    )


def _quadratic():
    return ManufacturedSolution(
        "quadratic",
        u=lambda x: x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2,
        grad=lambda x: 2.0 * x,
        f=lambda x: np.full(len(x), -6.0),
    )


def _smooth():
    pi = np.pi

    def u(x):
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1]) * np.sin(pi * x[:, 2])

    def grad(x):
        sx, sy, sz = (np.sin(pi * x[:, i]) for i in range(3))
        cx, cy, cz = (np.cos(pi * x[:, i]) for i in range(3))
        return pi * np.column_stack([cx * sy * sz, sx * cy * sz, sx * sy * cz])

    return ManufacturedSolution(
        "smooth", u=u, grad=grad, f=lambda x: 3.0 * pi ** 2 * u(x))


def _boundary_layer(eps: float = 0.05):
    """u = x + tanh((x-1/2)/eps) q(y) q(z): steep inner layer.

    The cutoff q(s) = 4s(1-s) tapers the layer to zero on the lateral
    boundaries while staying bi-quadratic, so away from the layer the
    solution is a plain low-order polynomial and all of the numerical
    difficulty sits in the slab around x = 1/2.
    """

    def parts(x):
        t = np.tanh((x[:, 0] - 0.5) / eps)
        qy = 4.0 * x[:, 1] * (1.0 - x[:, 1])
        qz = 4.0 * x[:, 2] * (1.0 - x[:, 2])
        return t, qy, qz

    def u(x):
        t, qy, qz = parts(x)
        return x[:, 0] + t * qy * qz

    def grad(x):
        t, qy, qz = parts(x)
        dt = (1.0 - t ** 2) / eps
        dqy = 4.0 * (1.0 - 2.0 * x[:, 1])
        dqz = 4.0 * (1.0 - 2.0 * x[:, 2])
        return np.column_stack(
            [1.0 + dt * qy * qz, t * dqy * qz, t * qy * dqz])

    def f(x):
        t, qy, qz = parts(x)
        ddt = -2.0 * t * (1.0 - t ** 2) / eps ** 2
        return -ddt * qy * qz + 8.0 * t * (qy + qz)

    return ManufacturedSolution("boundary_layer", u=u, grad=grad, f=f)


SOLUTIONS = {
    "linear": _linear,
    "quadratic": _quadratic,
    "smooth": _smooth,
    "boundary_layer": _boundary_layer,
}


def get_solution(name: str) -> ManufacturedSolution:
    try:
        return SOLUTIONS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown manufactured solution {name!r}; "
            f"choose from {sorted(SOLUTIONS)}"
        ) from None


# ---------------------------------------------------------------------------
# problem kinds

GALERKIN = "galerkin"
PRIMAL = "primal"
UW = "uw"
KINDS = (GALERKIN, PRIMAL, UW)


@dataclass
class Problem:
    """One discretization choice plus its physics layout and exact data."""

    kind: str
    physics: PhysicsTable
    exact: Optional[ManufacturedSolution]
    dp: int = 1

    @property
    def nexact(self) -> int:
        return 1 if self.exact is not None else 0

    @property
    def istc(self) -> bool:
        return self.kind in (PRIMAL, UW)

    @property
    def dirichlet_attr(self) -> int:
        return 0  # the H1 field (galerkin/primal) or the H1 trace (uw)

    def dirichlet_fn(self):
        return self.exact.dirichlet if self.exact is not None else None

    def elem(self, mesh, mdle: int) -> asm.AlocBloc:
        if self.kind == GALERKIN:
            return elem_galerkin(mesh, mdle, self)
        if self.kind == PRIMAL:
            return elem_primal_dpg(mesh, mdle, self)
        if self.kind == UW:
            return elem_uw_dpg(mesh, mdle, self)
        raise ConfigError(f"unknown problem kind {self.kind!r}")


def make_problem(kind: str, exact: Optional[str] = "smooth", dp: int = 1,
                 maxnods: int = 200000) -> Problem:
    if kind not in KINDS:
        raise ConfigError(f"unknown problem kind {kind!r}; choose from {KINDS}")
    if not 1 <= dp <= 3:
        raise ConfigError(f"test order increment {dp} outside 1..3")
    sol = get_solution(exact) if exact is not None else None
    if kind == GALERKIN:
        attrs = [PhysicsAttr("u", "contin", 1)]
    elif kind == PRIMAL:
        attrs = [PhysicsAttr("u", "contin", 1),
                 PhysicsAttr("sight", "normal", 1, is_trace=True)]
    else:
        attrs = [PhysicsAttr("ut", "contin", 1, is_trace=True),
                 PhysicsAttr("sight", "normal", 1, is_trace=True),
                 PhysicsAttr("u", "discon", 1),
                 PhysicsAttr("sig", "discon", 3)]
    physics = PhysicsTable(attrs, maxnods=maxnods)
    if sol is None:
        physics.attrs[0].homogeneous_dirichlet = True
    return Problem(kind=kind, physics=physics, exact=sol, dp=dp)


def make_mesh(problem: Problem, geometry, order):
    """Initial mesh with Dirichlet applied to the whole boundary.

    For the ultraweak problem the stored element order is the requested
    order plus one: the L2 spaces of the exact sequence live one degree
    below the H1 space on the same node, so the shift makes "order p"
    mean degree-p field variables for every kind.
    """
    if np.isscalar(order) and 1 <= int(order) <= me.MAXP:
        order = (int(order),) * 3
    px, py, pz = me.check_order_triple(order)
    if problem.kind == UW:
        px, py, pz = px + 1, py + 1, pz + 1
    order = (px, py, pz)
    bids = {0} | {int(b) for _, _, b in geometry.bfaces}
    bc = [(bid, problem.dirichlet_attr, 0, 1) for bid in sorted(bids)]
    mesh = generate_initial_mesh(geometry, problem.physics, order,
                                 bc_assignments=bc)
    cf.update_Ddof(mesh, problem.physics, problem.dirichlet_fn())
    return mesh


def source_term(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    if problem.exact is None:
        return np.zeros(len(x))
    return problem.exact.f(x)


# ---------------------------------------------------------------------------
# quadrature and order helpers

def _axis_orders(norder) -> tuple[int, int, int]:
    """Effective polynomial order per reference axis over all element nodes."""
    q = list(me.decode_order(norder[18]))
    for e in range(12):
        ax = me.EDGE_AXIS[e]
        q[ax] = max(q[ax], norder[e])
    for f in range(6):
        a1, a2 = me.FACE_AXES[f]
        p1, p2 = me.decode_face_order(norder[12 + f])
        q[a1] = max(q[a1], p1)
        q[a2] = max(q[a2], p2)
    return q[0], q[1], q[2]


def _enriched_norder(norder, dp: int) -> list[int]:
    px, py, pz = me.decode_order(norder[18])
    out = [norder[e] + dp for e in range(12)]
    for f in range(6):
        p1, p2 = me.decode_face_order(norder[12 + f])
        out.append(me.encode_face_order(p1 + dp, p2 + dp))
    out.append(me.encode_order(px + dp, py + dp, pz + dp))
    return out


def _interface(shapes: me.ShapeSet) -> np.ndarray:
    return np.flatnonzero(np.asarray(shapes.slots) < 26)


# ---------------------------------------------------------------------------
# element routines

def elem_galerkin(mesh, mdle: int, problem: Problem) -> asm.AlocBloc:
    """(grad u, grad v) and (f, v) for the continuous Galerkin field."""
    norder, _, xnod, _ = element_info(mesh, mdle)
    qx, qy, qz = _axis_orders(norder)
    rule = me.gauss_quadrature_3d((qx + 1, qy + 1, qz + 1))
    geom = gm.element_geometry(xnod, rule.points)
    shp = me.shape_functions_elem(me.H1, rule.points, norder)
    val, grad = gm.piola_transform(me.H1, shp, geom)
    wj = rule.weights * geom.rjac
    K = np.einsum("q,kiq,liq->kl", wj, grad, grad)
    fv = source_term(problem, geom.x)
    b = np.einsum("q,kq->k", wj * fv, val)
    bloc = asm.AlocBloc.zeros([shp.nrdof])
    bloc.ALOC[0][0] = K
    bloc.BLOC[0] = b
    return bloc


def _face_rule(f: int, orders, extra: int):
    a1, a2 = me.FACE_AXES[f]
    n1 = orders[a1] + extra + 1
    n2 = orders[a2] + extra + 1
    return me.gauss_quadrature_2d((n1, n2))


def elem_primal_dpg(mesh, mdle: int, problem: Problem) -> asm.AlocBloc:
    """Condensed primal DPG element: trial (u, flux), broken H1 test."""
    dp = problem.dp
    norder, _, xnod, _ = element_info(mesh, mdle)
    norder_enr = _enriched_norder(norder, dp)
    q = _axis_orders(norder)
    rule = me.gauss_quadrature_3d(tuple(qa + dp + 1 for qa in q))
    geom = gm.element_geometry(xnod, rule.points)
    wj = rule.weights * geom.rjac

    test = me.shape_functions_elem(me.H1, rule.points, norder_enr)
    tval, tgrad = gm.piola_transform(me.H1, test, geom)
    trial = me.shape_functions_elem(me.H1, rule.points, norder)
    _, ugrad = gm.piola_transform(me.H1, trial, geom)

    ntest = test.nrdof
    nu = trial.nrdof

    gram_d = dpg.PackedSym.from_dense(
        np.einsum("q,kq,lq->kl", wj, tval, tval)
        + np.einsum("q,kiq,liq->kl", wj, tgrad, tgrad))
    B = np.einsum("q,kiq,liq->kl", wj, tgrad, ugrad)
    fv = source_term(problem, geom.x)
    load = np.einsum("q,kq->k", wj * fv, tval)

    # skeleton flux: -<sigma_hat . n, v> over the six faces
    flux_shp_probe = me.shape_functions_elem(
        me.HDIV, np.array([[0.5, 0.5, 0.5]]), norder)
    ns = _interface(flux_shp_probe).size
    Bhat = np.zeros((ntest, ns))
    for f in range(6):
        t2, w2 = _face_rule(f, q, dp)
        xi, _ = me.face_param(f + 1, t2)
        fgeom = gm.face_geometry(xnod, f + 1, t2)
        fshp = me.shape_functions_elem(me.HDIV, xi, norder)
        sel = _interface(fshp)
        sval, _ = gm.piola_transform(me.HDIV, fshp, fgeom)
        fluxn = np.einsum("kiq,qi->kq", sval[sel], fgeom.rn)
        vtest = me.shape_functions_elem(me.H1, xi, norder_enr).values
        Bhat -= np.einsum("q,kq,lq->kl", w2 * fgeom.bjac, vtest, fluxn)

    ntrial = nu + ns
    if ntest <= ntrial:
        raise ConfigError(
            f"element {mdle}: enriched test space ({ntest}) does not "
            f"dominate the trial space ({ntrial}); increase dp"
        )
    stiff_all = np.column_stack([B, Bhat, load])
    cond = dpg.condense_dpg(dpg.DpgElementSystem(
        ntest=ntest, ntrial=ntrial, stiff_all=stiff_all, gram=gram_d))

    bloc = asm.AlocBloc.zeros([nu, ns])
    bloc.ALOC[0][0] = cond[:nu, :nu]
    bloc.ALOC[0][1] = cond[:nu, nu:ntrial]
    bloc.ALOC[1][0] = cond[nu:ntrial, :nu]
    bloc.ALOC[1][1] = cond[nu:ntrial, nu:ntrial]
    bloc.BLOC[0] = cond[:nu, ntrial]
    bloc.BLOC[1] = cond[nu:ntrial, ntrial]
    return bloc


def _uw_system(mesh, mdle: int, problem: Problem):
    """Extended stiffness [B | Bhat | l], Gram, and trial block sizes."""
    dp = problem.dp
    norder, _, xnod, _ = element_info(mesh, mdle)
    norder_enr = _enriched_norder(norder, dp)
    q = _axis_orders(norder)
    rule = me.gauss_quadrature_3d(tuple(qa + dp + 1 for qa in q))
    geom = gm.element_geometry(xnod, rule.points)
    wj = rule.weights * geom.rjac

    vshp = me.shape_functions_elem(me.H1, rule.points, norder_enr)
    vval, vgrad = gm.piola_transform(me.H1, vshp, geom)
    tshp = me.shape_functions_elem(me.HDIV, rule.points, norder_enr)
    tau, tdiv = gm.piola_transform(me.HDIV, tshp, geom)
    nv, nt = vshp.nrdof, tshp.nrdof
    ntest = nv + nt

    ushp = me.shape_functions_elem(me.L2, rule.points, norder)
    uval, _ = gm.piola_transform(me.L2, ushp, geom)
    nL2 = ushp.nrdof

    ut_shp = me.shape_functions_elem(me.H1, rule.points, norder)
    ut_sel = _interface(ut_shp)
    n_ut = ut_sel.size
    st_probe = me.shape_functions_elem(
        me.HDIV, np.array([[0.5, 0.5, 0.5]]), norder)
    n_st = _interface(st_probe).size
    sizes = (n_ut, n_st, nL2, 3 * nL2)
    ntrial = sum(sizes)
    if ntest <= ntrial:
        raise ConfigError(
            f"element {mdle}: enriched test space ({ntest}) does not "
            f"dominate the trial space ({ntrial}); increase dp"
        )

    off = np.concatenate([[0], np.cumsum(sizes)])
    stiff_all = np.zeros((ntest, ntrial + 1))
    # field equation rows (H1 tests): (sigma, grad v) - <sigma_hat.n, v> = (f, v)
    sig_v = np.einsum("q,kiq,lq->kli", wj, vgrad, uval).reshape(nv, 3 * nL2)
    stiff_all[:nv, off[3]:off[4]] = sig_v
    fv = source_term(problem, geom.x)
    stiff_all[:nv, ntrial] = np.einsum("q,kq->k", wj * fv, vval)
    # constitutive rows (H(div) tests): (u, div tau)+(sigma, tau)-<u_hat, tau.n>
    stiff_all[nv:, off[2]:off[3]] = np.einsum("q,kq,lq->kl", wj, tdiv, uval)
    stiff_all[nv:, off[3]:off[4]] = np.einsum(
        "q,kiq,lq->kli", wj, tau, uval).reshape(nt, 3 * nL2)

    for f in range(6):
        t2, w2 = _face_rule(f, q, dp)
        xi, _ = me.face_param(f + 1, t2)
        fgeom = gm.face_geometry(xnod, f + 1, t2)
        wb = w2 * fgeom.bjac
        fshp = me.shape_functions_elem(me.HDIV, xi, norder)
        sval, _ = gm.piola_transform(me.HDIV, fshp, fgeom)
        fluxn = np.einsum("kiq,qi->kq", sval[_interface(fshp)], fgeom.rn)
        v_here = me.shape_functions_elem(me.H1, xi, norder_enr).values
        stiff_all[:nv, off[1]:off[2]] -= np.einsum(
            "q,kq,lq->kl", wb, v_here, fluxn)
        tau_here = me.shape_functions_elem(me.HDIV, xi, norder_enr)
        tval_here, _ = gm.piola_transform(me.HDIV, tau_here, fgeom)
        taun = np.einsum("kiq,qi->kq", tval_here, fgeom.rn)
        uhat = me.shape_functions_elem(me.H1, xi, norder).values[ut_sel]
        stiff_all[nv:, off[0]:off[1]] -= np.einsum(
            "q,kq,lq->kl", wb, taun, uhat)

    # adjoint graph norm Gram
    G = np.zeros((ntest, ntest))
    G[:nv, :nv] = (np.einsum("q,kq,lq->kl", wj, vval, vval)
                   + np.einsum("q,kiq,liq->kl", wj, vgrad, vgrad))
    cross = np.einsum("q,kiq,liq->kl", wj, vgrad, tau)
    G[:nv, nv:] = cross
    G[nv:, :nv] = cross.T
    G[nv:, nv:] = (np.einsum("q,kq,lq->kl", wj, tdiv, tdiv)
                   + 2.0 * np.einsum("q,kiq,liq->kl", wj, tau, tau))
    return stiff_all, G, sizes


def elem_uw_dpg(mesh, mdle: int, problem: Problem) -> asm.AlocBloc:
    """Condensed ultraweak DPG element over (u_hat, flux, u, sigma)."""
    stiff_all, G, sizes = _uw_system(mesh, mdle, problem)
    ntest = stiff_all.shape[0]
    ntrial = stiff_all.shape[1] - 1
    cond = dpg.condense_dpg(dpg.DpgElementSystem(
        ntest=ntest, ntrial=ntrial, stiff_all=stiff_all,
        gram=dpg.PackedSym.from_dense(G)))
    off = np.concatenate([[0], np.cumsum(sizes)])
    bloc = asm.AlocBloc.zeros(list(sizes))
    for i in range(4):
        bloc.BLOC[i] = cond[off[i]:off[i + 1], ntrial]
        for j in range(4):
            bloc.ALOC[i][j] = cond[off[i]:off[i + 1], off[j]:off[j + 1]]
    return bloc


# ---------------------------------------------------------------------------
# residual estimator and exact errors

def _gather_trial(mesh, problem: Problem) -> Callable:
    def w_of(mdle: int) -> np.ndarray:
        parts = []
        for attr in problem.physics.enabled_attrs():
            parts.append(cf.gather_solution(mesh, mdle, attr).reshape(-1))
        return np.concatenate(parts)
    return w_of


def elem_residual(mesh, mdle: int, problem: Problem) -> float:
    """Squared DPG residual of the computed solution on one element."""
    if problem.kind == GALERKIN:
        raise ConfigError("the residual estimator needs a DPG problem")
    if problem.kind == PRIMAL:
        stiff_all, G = _primal_system_dense(mesh, mdle, problem)
    else:
        stiff_all, G, _ = _uw_system(mesh, mdle, problem)
    w = _gather_trial(mesh, problem)(mdle)
    resid = stiff_all[:, -1] - stiff_all[:, :-1] @ w
    factor = dpg.packed_cholesky(dpg.PackedSym.from_dense(G))
    return dpg.residual_norm_sq(factor, resid)


def _primal_system_dense(mesh, mdle: int, problem: Problem):
    """Rebuild the primal extended stiffness and dense Gram (no condensation)."""
    dp = problem.dp
    norder, _, xnod, _ = element_info(mesh, mdle)
    norder_enr = _enriched_norder(norder, dp)
    q = _axis_orders(norder)
    rule = me.gauss_quadrature_3d(tuple(qa + dp + 1 for qa in q))
    geom = gm.element_geometry(xnod, rule.points)
    wj = rule.weights * geom.rjac
    test = me.shape_functions_elem(me.H1, rule.points, norder_enr)
    tval, tgrad = gm.piola_transform(me.H1, test, geom)
    trial = me.shape_functions_elem(me.H1, rule.points, norder)
    _, ugrad = gm.piola_transform(me.H1, trial, geom)
    G = (np.einsum("q,kq,lq->kl", wj, tval, tval)
         + np.einsum("q,kiq,liq->kl", wj, tgrad, tgrad))
    B = np.einsum("q,kiq,liq->kl", wj, tgrad, ugrad)
    fv = source_term(problem, geom.x)
    load = np.einsum("q,kq->k", wj * fv, tval)
    probe = me.shape_functions_elem(me.HDIV, np.array([[0.5, 0.5, 0.5]]),
                                    norder)
    Bhat = np.zeros((test.nrdof, _interface(probe).size))
    for f in range(6):
        t2, w2 = _face_rule(f, q, dp)
        xi, _ = me.face_param(f + 1, t2)
        fgeom = gm.face_geometry(xnod, f + 1, t2)
        fshp = me.shape_functions_elem(me.HDIV, xi, norder)
        sval, _ = gm.piola_transform(me.HDIV, fshp, fgeom)
        fluxn = np.einsum("kiq,qi->kq", sval[_interface(fshp)], fgeom.rn)
        vtest = me.shape_functions_elem(me.H1, xi, norder_enr).values
        Bhat -= np.einsum("q,kq,lq->kl", w2 * fgeom.bjac, vtest, fluxn)
    return np.column_stack([B, Bhat, load]), G


def residual_summary(mesh, problem: Problem):
    """Per-element squared residuals in natural order, plus their sum."""
    vals = np.array([elem_residual(mesh, mdle, problem)
                     for mdle in mesh.ELEM_ORDER])
    return vals, float(vals.sum())


def compute_exact_error(mesh, problem: Problem):
    """Exact errors against the manufactured solution.

    Returns (gradient-norm error, L2 error, per-element table); the
    gradient slot compares grad u_h for the H1 discretizations and the
    sigma field for the ultraweak one.
    """
    if problem.exact is None:
        raise ConfigError("no manufactured solution: exact error unavailable")
    exact = problem.exact
    table = {}
    e_grad2 = 0.0
    e_l22 = 0.0
    for mdle in mesh.ELEM_ORDER:
        norder, _, xnod, _ = element_info(mesh, mdle)
        q = _axis_orders(norder)
        rule = me.gauss_quadrature_3d(tuple(qa + 2 for qa in q))
        geom = gm.element_geometry(xnod, rule.points)
        wj = rule.weights * geom.rjac
        gu = exact.grad(geom.x)
        uu = exact.u(geom.x)
        if problem.kind == UW:
            shp = me.shape_functions_elem(me.L2, rule.points, norder)
            val, _ = gm.piola_transform(me.L2, shp, geom)
            cu = cf.gather_solution(mesh, mdle, 2)[:, 0]
            cs = cf.gather_solution(mesh, mdle, 3)
            uh = cu @ val
            sh = np.einsum("kc,kq->cq", cs, val)
            d2g = float(np.einsum("q,cq->", wj, (sh - gu.T) ** 2))
            d2l = float(wj @ (uh - uu) ** 2)
        else:
            shp = me.shape_functions_elem(me.H1, rule.points, norder)
            val, grad = gm.piola_transform(me.H1, shp, geom)
            cu = cf.gather_solution(mesh, mdle, 0)[:, 0]
            uh = cu @ val
            gh = np.einsum("k,kiq->iq", cu, grad)
            d2g = float(np.einsum("q,iq->", wj, (gh - gu.T) ** 2))
            d2l = float(wj @ (uh - uu) ** 2)
        table[mdle] = (d2g, d2l)
        e_grad2 += d2g
        e_l22 += d2l
    return float(np.sqrt(e_grad2)), float(np.sqrt(e_l22)), table


# ---------------------------------------------------------------------------
# driver

def solve_problem(mesh, problem: Problem, *, solver: str = "cg",
                  tol: float = 1e-12, maxit: int = None, workers: int = 1,
                  istc: bool = None, store: bool = True) -> asm.SolveReport:
    """Refresh Dirichlet data, assemble, solve, and store all DOFs."""
    if istc is None:
        istc = True
    if problem.istc and not istc:
        raise ConfigError("DPG problems require interior condensation")
    cf.update_Ddof(mesh, problem.physics, problem.dirichlet_fn())
    return asm.assemble_and_solve(
        mesh, problem.physics, problem.elem, istc=istc, store=store,
        solver=solver, tol=tol, maxit=maxit, workers=workers)
