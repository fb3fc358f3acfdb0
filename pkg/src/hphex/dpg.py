"""Element-level dense kernels for DPG condensation.

The enriched test space makes every DPG element a small least-squares
problem: with Gram matrix G = UᵀU and extended stiffness [B | B̂ | l],
the condensed Bubnov-Galerkin block is B̃ᵀB̃ where B̃ = U⁻ᵀ[B | B̂ | l].
The Gram matrix is kept in column-packed upper-triangular storage with
index rule k = j(j+1)/2 + i (0-based, i ≤ j); all kernels below work
off that layout so no external dense-algebra package is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LinAlgError


def packed_index(i: int, j: int) -> int:
    """Position of entry (i, j), i ≤ j, in column-packed upper storage."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


@dataclass
class PackedSym:
    """Symmetric matrix, upper triangle packed column by column."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        expect = self.n * (self.n + 1) // 2
        if self.values.shape != (expect,):
            raise LinAlgError(
                f"packed storage needs {expect} values for n={self.n}, "
                f"got {self.values.shape}"
            )

    @classmethod
    def from_dense(cls, A: np.ndarray) -> "PackedSym":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        vals = np.concatenate([A[:j + 1, j] for j in range(n)]) if n else \
            np.zeros(0)
        return cls(n, vals)

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for j in range(self.n):
            off = j * (j + 1) // 2
            A[:j + 1, j] = self.values[off:off + j + 1]
            A[j, :j + 1] = self.values[off:off + j + 1]
        return A

    def to_upper(self) -> np.ndarray:
        """Dense copy of the upper triangle only (strict lower = 0)."""
        A = np.zeros((self.n, self.n))
        for j in range(self.n):
            off = j * (j + 1) // 2
            A[:j + 1, j] = self.values[off:off + j + 1]
        return A


def packed_cholesky(g: PackedSym) -> PackedSym:
    """Factor G = UᵀU with U upper triangular (right-looking updates)."""
    n = g.n
    A = g.to_upper()
    scale = max(np.max(np.abs(np.diag(A))), 1.0) if n else 1.0
    for k in range(n):
        d = A[k, k]
        if d <= 1e-14 * scale:
            raise LinAlgError(
                f"gram matrix is not positive definite: pivot {k} = {d:.3e}"
            )
        r = np.sqrt(d)
        A[k, k] = r
        A[k, k + 1:] /= r
        if k + 1 < n:
            A[k + 1:, k + 1:] -= np.outer(A[k, k + 1:], A[k, k + 1:])
    return PackedSym.from_dense(np.triu(A))


def packed_tri_solve(u: PackedSym, rhs: np.ndarray) -> np.ndarray:
    """Solve Uᵀx = rhs (forward substitution; rhs may be a block)."""
    n = u.n
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != n:
        raise LinAlgError(f"rhs has {rhs.shape[0]} rows, factor has {n}")
    squeeze = rhs.ndim == 1
    x = rhs.reshape(n, 1).copy() if squeeze else rhs.astype(float, copy=True)
    U = u.to_upper()
    for i in range(n):
        if i:
            x[i] -= U[:i, i] @ x[:i]
        x[i] /= U[i, i]
    return x[:, 0] if squeeze else x


@dataclass
class DpgElementSystem:
    """One element's enriched-test system: G (packed) and [B | B̂ | l]."""

    ntest: int
    ntrial: int
    stiff_all: np.ndarray
    gram: PackedSym

    def __post_init__(self):
        if self.stiff_all.shape != (self.ntest, self.ntrial + 1):
            raise LinAlgError(
                f"stiff_all shape {self.stiff_all.shape} does not match "
                f"({self.ntest}, {self.ntrial + 1})"
            )
        if self.gram.n != self.ntest:
            raise LinAlgError(
                f"gram dimension {self.gram.n} does not match ntest {self.ntest}"
            )


def condense_dpg(sys: DpgElementSystem) -> np.ndarray:
    """(ntrial+1)² condensed block [[BᵀG⁻¹B, BᵀG⁻¹l], [lᵀG⁻¹B, lᵀG⁻¹l]].

    The caller keeps the last column as the load and discards the last
    row.  The upper triangle is computed once and mirrored, so the
    output is exactly symmetric.
    """
    factor = packed_cholesky(sys.gram)
    btilde = packed_tri_solve(factor, sys.stiff_all)
    cond = btilde.T @ btilde
    cond = np.triu(cond)
    cond = cond + cond.T - np.diag(np.diag(cond))
    return cond


def residual_norm_sq(factor: PackedSym, resid: np.ndarray) -> float:
    """‖U⁻ᵀ r‖² for r = l − [B | B̂]·w: the DPG energy residual."""
    rpsi = packed_tri_solve(factor, resid)
    return float(rpsi @ rpsi)
