"""Dense non-Hermitian eigendecomposition with residual checks."""
from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-8


class EigenSolverError(RuntimeError):
    """LAPACK failed to converge or produced unacceptable eigenpairs."""


@dataclasses.dataclass
class EigResult:
    """Eigenpairs sorted by (Re, Im) of the eigenvalue.

    ``right_vectors[:, k]`` is the unit-norm right eigenvector of ``values[k]``.
    """

    values: np.ndarray
    right_vectors: np.ndarray | None
    residuals: np.ndarray | None
    matrix_norm: float

    def __len__(self):
        return len(self.values)

    def max_relative_residual(self) -> float:
        if self.residuals is None or len(self.residuals) == 0:
            return 0.0
        return float(self.residuals.max() / max(self.matrix_norm, np.finfo(float).tiny))


def sort_order(values: np.ndarray) -> np.ndarray:
    """Indices ordering ``values`` by real part, ties by imaginary part."""
    return np.lexsort((values.imag, values.real))


def _permute_columns_inplace(a: np.ndarray, order: np.ndarray) -> None:
    # a[:, k] <- a[:, order[k]] without a second n x n buffer.
    n = len(order)
    done = np.zeros(n, dtype=bool)
    for start in range(n):
        if done[start] or order[start] == start:
            done[start] = True
            continue
        tmp = a[:, start].copy()
        k = start
        while True:
            src = order[k]
            done[k] = True
            if src == start:
                a[:, k] = tmp
                break
            a[:, k] = a[:, src]
            k = src


def residual_norms(operator, values: np.ndarray, vectors: np.ndarray, block: int = 256) -> np.ndarray:
    """Column norms of ``operator @ V - V diag(values)``, evaluated in blocks.

    ``operator`` may be a dense array or a scipy sparse matrix.
    """
    out = np.empty(len(values))
    for s in range(0, len(values), block):
        v = vectors[:, s:s + block]
        r = operator @ v - v * values[s:s + block]
        out[s:s + block] = np.linalg.norm(r, axis=0)
    return out


def _validate(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"square matrix required, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")


def eig_dense(
    matrix,
    *,
    vectors: bool = True,
    overwrite_a: bool = False,
    residual_operator=None,
    check: bool = True,
) -> EigResult:
    """Full spectrum of a dense complex matrix.

    Args:
        matrix: square array. Passing a Fortran-ordered complex128 array with
            ``overwrite_a=True`` avoids any n x n copy; the contents are then
            destroyed.
        vectors: also compute right eigenvectors (and residuals).
        overwrite_a: allow LAPACK to work in the input buffer.
        residual_operator: operator used for residuals when the input is
            overwritten (typically a sparse copy of the same matrix).
        check: raise :class:`EigenSolverError` if any residual exceeds
            ``1e-8 * ||A||_F``.
    """
    a = np.asarray(matrix)
    _validate(a)
    if not np.iscomplexobj(a):
        a = a.astype(complex)
        overwrite_a = True
    norm = float(np.linalg.norm(a))
    if vectors and overwrite_a and residual_operator is None:
        residual_operator = a.copy()
    try:
        if vectors:
            w, v = scipy.linalg.eig(a, overwrite_a=overwrite_a, check_finite=False)
        else:
            w = scipy.linalg.eigvals(a, overwrite_a=overwrite_a, check_finite=False)
            v = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenSolverError("eigensolver returned non-finite eigenvalues")

    order = sort_order(w)
    w = w[order]
    res = None
    if v is not None:
        _permute_columns_inplace(v, order)
        op = residual_operator if residual_operator is not None else a
        res = residual_norms(op, w, v)
        if check and len(res) and res.max() > RESIDUAL_RTOL * norm:
            raise EigenSolverError(
                f"eigenpair residual {res.max():.3e} exceeds {RESIDUAL_RTOL:g} * ||A|| = "
                f"{RESIDUAL_RTOL * norm:.3e}"
            )
    return EigResult(values=w, right_vectors=v, residuals=res, matrix_norm=norm)
