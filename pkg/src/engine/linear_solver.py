"""
Sparse Newton linear solves.

Rows and columns that are entirely zero are dropped before factorization;
the remaining dimension is the reported matrix size. The reduced matrix is
row-equilibrated and factored with SuperLU.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import splu

from src.utils import logger

from .errors import SingularSystemError
from .kkt import KktSystem

CONDITION_LIMIT = 1e14

# Largest system for which a dense pivoted QR is used to name the dependent variable
DENSE_DIAGNOSTIC_LIMIT = 3000

# Largest system whose inertia is counted with a dense LDL^T factorization
DENSE_INERTIA_LIMIT = 3000


@dataclass
class LinearSolveResult:
    """Newton direction plus solve diagnostics."""
    direction: np.ndarray
    residual_norm: float
    condition: float
    size: int


def nonzero_support(matrix: sparse.spmatrix) -> np.ndarray:
    """
    Indices kept after dropping all-zero rows/columns.

    An index is dropped only when both its row and its column are empty, so
    the reduced matrix stays square.
    """
    csr = sparse.csr_matrix(matrix, copy=True)
    csr.eliminate_zeros()
    n = csr.shape[0]
    row_nnz = np.diff(csr.indptr)
    col_nnz = np.bincount(csr.indices, minlength=n)
    return np.flatnonzero((row_nnz > 0) | (col_nnz > 0))


def reduced_size(matrix: sparse.spmatrix) -> int:
    return int(nonzero_support(matrix).size)


def inertia(matrix: sparse.spmatrix) -> Optional[Tuple[int, int, int]]:
    """
    Count the (positive, negative, zero) eigenvalues of a symmetric matrix.

    The matrix is scaled symmetrically by its row maxima and factored as
    L D L^T; by Sylvester's law the eigenvalues of the block-diagonal D carry
    the same signs.

    Args:
        matrix: Square symmetric matrix

    Returns:
        Optional[Tuple[int, int, int]]: Counts, or None above DENSE_INERTIA_LIMIT

    Example:
        >>> inertia(sparse.diags([2.0, -1.0, 0.0]))
        (1, 1, 1)
    """
    n = matrix.shape[0]
    if n == 0:
        return 0, 0, 0
    if n > DENSE_INERTIA_LIMIT:
        return None
    dense = sparse.csr_matrix(matrix).toarray()
    scale = np.sqrt(np.abs(dense).max(axis=1))
    scale[scale == 0] = 1.0
    scaled = dense / np.outer(scale, scale)

    _, d, _ = scipy.linalg.ldl(scaled, lower=True)
    if n == 1:
        eigenvalues = np.diag(d)
    else:
        eigenvalues = scipy.linalg.eigvalsh_tridiagonal(np.diag(d).copy(), np.diag(d, -1).copy())
    zero = 1e-12 * max(1.0, float(np.max(np.abs(eigenvalues))))
    return (
        int(np.count_nonzero(eigenvalues > zero)),
        int(np.count_nonzero(eigenvalues < -zero)),
        int(np.count_nonzero(np.abs(eigenvalues) <= zero)),
    )


def _dependent_variable(matrix: sparse.spmatrix) -> Optional[int]:
    if matrix.shape[0] > DENSE_DIAGNOSTIC_LIMIT:
        return None
    _, _, pivots = scipy.linalg.qr(matrix.toarray(), mode="economic", pivoting=True)
    return int(pivots[-1])


def solve_sparse(
    matrix: sparse.spmatrix,
    rhs: np.ndarray,
    labels: Optional[Sequence[str]] = None,
    condition_limit: float = CONDITION_LIMIT,
) -> LinearSolveResult:
    """
    Solve matrix @ x = rhs.

    Args:
        matrix: Square sparse matrix
        rhs: Right-hand side
        labels: Variable labels (one per column) for diagnostics
        condition_limit: Largest acceptable pivot-ratio condition estimate

    Returns:
        LinearSolveResult: Solution (zero on dropped indices) and diagnostics

    Raises:
        SingularSystemError: If the factorization is singular or the
            condition estimate exceeds condition_limit
    """
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    labels = list(labels) if labels is not None else [f"x[{k}]" for k in range(n)]

    keep = nonzero_support(matrix)
    solution = np.zeros(n)
    if keep.size == 0:
        return LinearSolveResult(solution, 0.0, 1.0, 0)

    reduced = sparse.csr_matrix(matrix)[keep][:, keep]
    b = rhs[keep]

    row_scale = np.asarray(abs(reduced).max(axis=1).todense()).ravel()
    row_scale[row_scale == 0] = 1.0
    scaled = (sparse.diags(1.0 / row_scale) @ reduced).tocsc()

    def singular(message: str, condition: float, column: Optional[int]) -> SingularSystemError:
        variable = labels[keep[column]] if column is not None else ""
        detail = f"; worst pivot at {variable}" if variable else ""
        logger.warning(f"[NEWTON] {message}{detail}")
        return SingularSystemError(f"{message}{detail}", variable, condition)

    try:
        lu = splu(scaled)
    except RuntimeError:
        raise singular("Newton matrix is exactly singular", float("inf"), _dependent_variable(scaled))

    pivots = np.abs(lu.U.diagonal())
    smallest = int(np.argmin(pivots))
    column = int(np.argsort(lu.perm_c)[smallest])
    if not pivots[smallest] > 0 or not np.all(np.isfinite(pivots)):
        raise singular("Newton matrix is singular", float("inf"), column)
    condition = float(pivots.max() / pivots[smallest])
    if condition > condition_limit:
        raise singular(f"Newton matrix is ill-conditioned (estimate {condition:.2e})", condition, column)

    x = lu.solve(b / row_scale)
    if not np.all(np.isfinite(x)):
        raise singular("Newton solve produced non-finite values", condition, column)
    solution[keep] = x
    residual = float(np.max(np.abs(reduced @ x - b)))
    return LinearSolveResult(solution, residual, condition, int(keep.size))


def newton_step(system: KktSystem, condition_limit: float = CONDITION_LIMIT) -> LinearSolveResult:
    """
    Newton direction d solving K d = -F for an assembled system.

    Example:
        >>> result = newton_step(KktSystem(sparse.identity(3), np.array([1.0, 2.0, 3.0])))
        >>> result.direction
        array([-1., -2., -3.])
    """
    return solve_sparse(system.matrix, -system.residual, system.index.labels, condition_limit)
