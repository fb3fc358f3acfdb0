"""Trilinear element geometry: maps, Jacobians, normals, Piola transforms.

Geometry degree is fixed at 1 (straight-edged hexahedra).  All routines
are batched: a "point" argument may be a single master point or an
(n, 3) array, and the returned fields carry a leading point dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import masterel as me
from .errors import GeometryError

__all__ = ["GeometryData", "element_geometry", "face_geometry", "piola_transform"]


@dataclass
class GeometryData:
    """Geometry of a batch of points inside (or on the boundary of) one element.

    x : (n, 3) physical points
    dxdxi : (n, 3, 3) Jacobian J
    dxidx : (n, 3, 3) inverse Jacobian
    rjac : (n,) det J
    rn, bjac, dxdt : outward unit normal (n, 3), surface Jacobian (n,),
        and physical tangents (n, 3, 2); present only for face points.
    """

    x: np.ndarray
    dxdxi: np.ndarray
    dxidx: np.ndarray
    rjac: np.ndarray
    rn: np.ndarray | None = None
    bjac: np.ndarray | None = None
    dxdt: np.ndarray | None = None


_NORD1 = me.uniform_norder((1, 1, 1))


def element_geometry(vertex_coords, xi) -> GeometryData:
    """Evaluate the trilinear map and its Jacobian data at master points."""
    xnod = np.asarray(vertex_coords, dtype=float).reshape(8, 3)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    shp = me.shape_functions_elem(me.H1, xi, _NORD1)
    x = np.einsum("vp,vi->pi", shp.values, xnod)
    dxdxi = np.einsum("vjp,vi->pij", shp.grad, xnod)
    rjac = np.linalg.det(dxdxi)
    if np.any(rjac <= 0.0):
        bad = int(np.argmin(rjac))
        raise GeometryError(
            f"non-positive Jacobian {rjac[bad]:.3e} at xi={tuple(xi[bad])}"
        )
    dxidx = np.linalg.inv(dxdxi)
    return GeometryData(x=x, dxdxi=dxdxi, dxidx=dxidx, rjac=rjac)


def face_geometry(vertex_coords, face: int, t) -> GeometryData:
    """Boundary geometry at face points, with outward normal and surface Jacobian."""
    xi, dxidt = me.face_param(face, t)
    geom = element_geometry(vertex_coords, xi)
    dxdt = np.einsum("pij,jk->pik", geom.dxdxi, dxidt)
    cross = np.cross(dxdt[:, :, 0], dxdt[:, :, 1]) * me.NSIGN[face - 1]
    bjac = np.linalg.norm(cross, axis=1)
    if np.any(bjac <= 0.0):
        raise GeometryError(f"degenerate face {face}: zero surface Jacobian")
    geom.rn = cross / bjac[:, None]
    geom.bjac = bjac
    geom.dxdt = dxdt
    return geom


def piola_transform(space: str, shapes: me.ShapeSet, geom: GeometryData):
    """Push a master shape set to physical space.

    Returns (values, derivatives); the derivative slot is the gradient for
    H1, the curl for HCURL, the divergence for HDIV, and None for L2.
    Shapes and geometry must be evaluated at the same points.
    """
    rjac = geom.rjac
    if space == me.H1:
        grad = np.einsum("pji,kjp->kip", geom.dxidx, shapes.grad)
        return shapes.values, grad
    if space == me.HCURL:
        val = np.einsum("pji,kjp->kip", geom.dxidx, shapes.values)
        curl = np.einsum("pij,kjp->kip", geom.dxdxi, shapes.curl) / rjac
        return val, curl
    if space == me.HDIV:
        val = np.einsum("pij,kjp->kip", geom.dxdxi, shapes.values) / rjac
        return val, shapes.div / rjac
    if space == me.L2:
        return shapes.values / rjac, None
    raise GeometryError(f"unknown space {space!r}")
