"""Sparse assembly of the plane-wave Hamiltonian.

Entry ``(i, j)`` for pairs ``(n1, n2)`` and ``(n1', n2')``::

    1/2 |G1 + G2|^2                   if i == j
    V1[n1 - n1']                      if n2 == n2'
    V2[n2 - n2']                      if n1 == n1'

Couplings are found by integer index arithmetic, never by comparing real
wave vectors.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import LatticeMismatch, SizeMismatch


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    matrix: sp.csr_matrix
    diag_kinetic: np.ndarray

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def diagonal(self):
        return self.matrix.diagonal().real

    def toarray(self):
        return self.matrix.toarray()


def _layer_couplings(basis, pot, layer):
    """Strict upper-triangle (row, col, value) triples from one layer."""
    rows, cols, vals = [], [], []
    n1, n2 = basis.n1, basis.n2
    for m, c in zip(pot.indices, pot.coefficients):
        if not m.any() or c == 0:
            continue
        if layer == 1:
            j = basis.lookup(n1 - m, n2)
        else:
            j = basis.lookup(n1, n2 - m)
        i = np.flatnonzero(j >= 0)
        j = j[i]
        up = i < j
        rows.append(i[up])
        cols.append(j[up])
        vals.append(np.full(up.sum(), c))
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.complex128)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def assemble(basis, V1, V2, eps_mat=0.0):
    """Hermitian sparse Hamiltonian over ``basis``.

    Only the strict upper triangle is computed; the lower triangle is its
    exact conjugate transpose, so ``H == H^H`` holds bit for bit.
    """
    if not V1.lattice.same_as(basis.recip1) or not V2.lattice.same_as(basis.recip2):
        raise LatticeMismatch("potential lattices differ from the basis lattices")
    n = basis.size
    kinetic = 0.5 * (basis.q**2).sum(axis=1)
    diag = kinetic + V1.zero_mode.real + V2.zero_mode.real

    r1, c1, v1 = _layer_couplings(basis, V1, 1)
    r2, c2, v2 = _layer_couplings(basis, V2, 2)
    rows = np.concatenate([r1, r2])
    cols = np.concatenate([c1, c2])
    vals = np.concatenate([v1, v2])
    if eps_mat > 0:
        keep = np.abs(vals) >= eps_mat
        rows, cols, vals = rows[keep], cols[keep], vals[keep]

    real = not np.iscomplexobj(vals) or not np.any(vals.imag)
    dtype = np.float64 if real else np.complex128
    vals = vals.real if real else vals
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=dtype).tocsr()
    upper.sum_duplicates()
    full = upper + upper.conj().T + sp.diags(diag.astype(dtype), format="csr")
    full = full.tocsr()
    full.sort_indices()
    kinetic.setflags(write=False)
    return HamiltonianMatrix(full, kinetic)


def matvec(H, x):
    x = np.asarray(x)
    if x.shape[0] != H.size:
        raise SizeMismatch(f"vector length {x.shape[0]} != matrix size {H.size}")
    return H.matrix @ x


def write_coo(H, path):
    """Dump stored entries as ``i j re im`` lines (0-based, row-major)."""
    coo = H.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    vals = coo.data.astype(np.complex128)
    with open(path, "w") as fh:
        for k in order:
            v = vals[k]
            fh.write(f"{coo.row[k]} {coo.col[k]} {float(v.real)!r} {float(v.imag)!r}\n")
