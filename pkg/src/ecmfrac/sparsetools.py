"""Small shared helpers for sparse assembly and direct solves."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


def element_coo(rows, cols, mats):
    """Flatten per-element dense blocks into COO triplets.

    rows (E, n), cols (E, m) are global indices; mats (E, n, m).
    """
    E, n = rows.shape
    m = cols.shape[1]
    r = np.broadcast_to(rows[:, :, None], (E, n, m)).ravel()
    c = np.broadcast_to(cols[:, None, :], (E, n, m)).ravel()
    return r, c, mats.ravel()


class CooBuilder:
    """Accumulates COO triplets and finalizes to CSR."""

    def __init__(self, ndof):
        self.ndof = ndof
        self._r, self._c, self._v = [], [], []

    def add(self, rows, cols, vals):
        self._r.append(np.asarray(rows).ravel())
        self._c.append(np.asarray(cols).ravel())
        self._v.append(np.asarray(vals).ravel())

    def add_blocks(self, rows, cols, mats):
        r, c, v = element_coo(rows, cols, mats)
        self.add(r, c, v)

    def tocsr(self):
        r = np.concatenate(self._r) if self._r else np.empty(0, dtype=np.int64)
        c = np.concatenate(self._c) if self._c else np.empty(0, dtype=np.int64)
        v = np.concatenate(self._v) if self._v else np.empty(0)
        K = sp.coo_matrix((v, (r, c)), shape=(self.ndof, self.ndof))
        return K.tocsr()


def solve_sparse(K, rhs, context=""):
    """Direct sparse solve with pivoting; reports conditioning on failure."""
    try:
        lu = spla.splu(sp.csc_matrix(K))
        x = lu.solve(rhs)
    except RuntimeError as err:
        est = None
        try:
            est = spla.onenormest(sp.csc_matrix(K))
        except Exception:
            pass
        raise SolverError(
            f"sparse factorization failed{f' ({context})' if context else ''}: "
            f"{err}; n={K.shape[0]}, 1-norm estimate={est}"
        ) from err
    if not np.all(np.isfinite(x)):
        raise SolverError(
            f"non-finite solution{f' ({context})' if context else ''}; "
            f"n={K.shape[0]}"
        )
    return x


def solve_dirichlet(K, f_ext, fixed, values, context=""):
    """Solve K x = f_ext with prescribed values on ``fixed`` DOFs.

    Returns (x, reactions) where reactions = K x - f_ext (nonzero only
    meaningful on constrained DOFs).
    """
    free = ~fixed
    x = np.zeros(K.shape[0])
    x[fixed] = values[fixed]
    Kcsr = K.tocsr()
    rhs = f_ext[free] - Kcsr[:, fixed][free] @ x[fixed]
    x[free] = solve_sparse(Kcsr[free][:, free], rhs, context=context)
    reactions = Kcsr @ x - f_ext
    return x, reactions
