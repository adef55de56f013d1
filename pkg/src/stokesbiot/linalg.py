"""Reusable sparse LU factorisations.

Every system matrix in the scheme is time independent, so each one is
factored once and the factors are reused for every step.
"""

from __future__ import annotations

import threading

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class Factorization:
    """LU factors of a square sparse matrix with COLAMD column ordering.

    Parameters
    ----------
    A : sparse matrix
    refinement_steps : int
        Iterative-refinement sweeps applied after every solve. With the
        default 0, one sweep is taken only when the residual contract fails.
        Saddle-point systems with a weakly determined pressure gain several
        digits in the pressure from two or three sweeps.
    """

    def __init__(self, A, refinement_steps: int = 0):
        if refinement_steps < 0:
            raise ValueError("refinement_steps must be non-negative")
        self.refinement_steps = int(refinement_steps)
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(f"factorization failed: {exc}") from exc
        diag = self._lu.U.diagonal()
        bad = np.flatnonzero(~np.isfinite(diag) | (diag == 0.0))
        if len(bad):
            pivot = int(bad[0])
            raise SingularMatrixError(f"zero pivot at position {pivot}", pivot=pivot)
        self.matrix = A.tocsr()
        self.shape = A.shape
        self._norm = abs(self.matrix).sum(axis=1).max()
        self._lock = threading.Lock()

    def _within_contract(self, x, b):
        r = self.matrix @ x - b
        scale = self._norm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
        return np.max(np.abs(r), initial=0.0) <= RESIDUAL_TOL * scale, r

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.shape[0],):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.shape[0]},)")
        with self._lock:
            x = self._lu.solve(b)
            for _ in range(self.refinement_steps):
                x = x - self._lu.solve(self.matrix @ x - b)
            ok, r = self._within_contract(x, b)
            if not ok:
                x = x - self._lu.solve(r)
        return x


def factorize(A, refinement_steps: int = 0) -> Factorization:
    return Factorization(A, refinement_steps)


def solve(F: Factorization, b) -> np.ndarray:
    return F.solve(b)
