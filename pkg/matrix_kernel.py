"""
Matrix Kernel for the SRBM product-form toolkit
Small dense matrix arithmetic and matrix-class decisions
(completely-S, P-matrix, M-matrix, positive definiteness)
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from exceptions import DimensionTooLarge, InvalidMatrix, NotSymmetric, SingularMatrix

MAX_ENUMERATION_DIM = 16

SINGULAR_TOL = 1e-12
MINOR_TOL = 1e-10
S_MATRIX_TOL = 1e-9
PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class ClassificationReport:
    is_completely_s: bool
    is_p_matrix: bool
    is_m_matrix: bool
    is_positive_definite: bool
    min_principal_minor: float
    witness: Optional[np.ndarray] = None
    failing_subset: Optional[Tuple[int, ...]] = None
    subset_witnesses: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict:
        return {
            "is_completely_s": self.is_completely_s,
            "is_p_matrix": self.is_p_matrix,
            "is_m_matrix": self.is_m_matrix,
            "is_positive_definite": self.is_positive_definite,
            "min_principal_minor": self.min_principal_minor,
            "witness": None if self.witness is None else self.witness.tolist(),
            # 1-based for users
            "failing_subset": None if self.failing_subset is None
            else [k + 1 for k in self.failing_subset],
        }


def as_square_matrix(m, name: str = "matrix") -> np.ndarray:
    """Convert to a float ndarray and check it is a finite square matrix"""
    try:
        arr = np.array(m, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidMatrix(f"{name} is not numeric: {e}")
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidMatrix(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return arr


def matrix_scale(m: np.ndarray) -> float:
    """max(1, infinity norm); all relative thresholds are taken against this"""
    return max(1.0, float(np.linalg.norm(m, ord=np.inf)))


def determinant(m) -> float:
    """Determinant via LU with partial pivoting"""
    arr = as_square_matrix(m)
    lu, piv = scipy.linalg.lu_factor(arr, check_finite=False)
    # each row swap flips the sign
    swaps = np.count_nonzero(piv != np.arange(arr.shape[0]))
    sign = -1.0 if swaps % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def principal_submatrix(m, idx: Sequence[int]) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    idx = list(idx)
    return arr[np.ix_(idx, idx)]


def invert(m, tol: float = SINGULAR_TOL) -> np.ndarray:
    """Inverse of a nonsingular matrix.

    Singularity is judged as |det(M)| <= tol * max(1, ||M||_inf)^d so that
    the threshold follows the magnitude of the entries.
    """
    arr = as_square_matrix(m)
    d = arr.shape[0]
    det = determinant(arr)
    if abs(det) <= tol * matrix_scale(arr) ** d:
        raise SingularMatrix(f"matrix is singular within tolerance (det={det:.3e})")
    lu_piv = scipy.linalg.lu_factor(arr, check_finite=False)
    return scipy.linalg.lu_solve(lu_piv, np.eye(d), check_finite=False)


def _subsets(d: int):
    for k in range(1, d + 1):
        for idx in itertools.combinations(range(d), k):
            yield idx


def _check_enumerable(d: int):
    if d > MAX_ENUMERATION_DIM:
        raise DimensionTooLarge(
            f"exhaustive subset enumeration supports d <= {MAX_ENUMERATION_DIM}, got {d}")


def is_p_matrix(m, tol: float = MINOR_TOL) -> Tuple[bool, float]:
    """True iff every principal minor is positive; also returns the smallest minor.

    A minor of order k passes when it exceeds tol * max(1, ||M||_inf)^k.
    """
    arr = as_square_matrix(m)
    d = arr.shape[0]
    _check_enumerable(d)
    scale = matrix_scale(arr)
    ok = True
    min_minor = np.inf
    for idx in _subsets(d):
        minor = determinant(principal_submatrix(arr, idx))
        min_minor = min(min_minor, minor)
        if minor <= tol * scale ** len(idx):
            ok = False
    return ok, float(min_minor)


def simplex_max(c: np.ndarray, a: np.ndarray, b: np.ndarray,
                eps: float = 1e-12) -> Tuple[float, np.ndarray]:
    """Maximize c.x subject to a x <= b, x >= 0, for b >= 0.

    Dense tableau simplex started from the slack basis. Bland's rule picks
    the lowest-index improving column and, among tied ratios, the row whose
    basic variable has the lowest index, so degenerate pivots cannot cycle.
    """
    m_rows, n = a.shape
    if np.any(b < 0):
        raise ValueError("slack basis requires b >= 0")
    tableau = np.zeros((m_rows + 1, n + m_rows + 1))
    tableau[:m_rows, :n] = a
    tableau[:m_rows, n:n + m_rows] = np.eye(m_rows)
    tableau[:m_rows, -1] = b
    tableau[-1, :n] = -c
    basis = list(range(n, n + m_rows))

    max_iter = 50 * (n + m_rows) + 100
    for _ in range(max_iter):
        reduced = tableau[-1, :-1]
        improving = np.nonzero(reduced < -eps)[0]
        if improving.size == 0:
            break
        col = int(improving[0])
        column = tableau[:m_rows, col]
        rows = np.nonzero(column > eps)[0]
        if rows.size == 0:
            raise ArithmeticError("linear program is unbounded")
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + eps * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))

        tableau[row] /= tableau[row, col]
        for r in range(m_rows + 1):
            if r != row and tableau[r, col] != 0.0:
                tableau[r] -= tableau[r, col] * tableau[row]
        basis[row] = col
    else:
        logging.warning("Simplex hit the iteration limit; returning the current basis")

    x = np.zeros(n)
    for r, var in enumerate(basis):
        if var < n:
            x[var] = tableau[r, -1]
    return float(tableau[-1, -1]), x


def s_matrix_lp(m) -> Tuple[float, np.ndarray]:
    """Solve max t s.t. M w >= t 1, 0 <= w <= 1. Returns (t*, w*).

    The free variable t is split as t1 - t2 so the program is in the
    slack-feasible form max c.x, A x <= b, x >= 0 with b >= 0.
    """
    arr = as_square_matrix(m)
    d = arr.shape[0]
    ones = np.ones((d, 1))
    a = np.block([
        [-arr, ones, -ones],
        [np.eye(d), np.zeros((d, 2))],
    ])
    b = np.concatenate([np.zeros(d), np.ones(d)])
    c = np.concatenate([np.zeros(d), [1.0, -1.0]])
    value, x = simplex_max(c, a, b)
    return value, x[:d]


def is_s_matrix(m, tol: float = S_MATRIX_TOL) -> Tuple[bool, Optional[np.ndarray]]:
    """True iff some w >= 0 has M w > 0; the witness is the LP optimum"""
    value, w = s_matrix_lp(m)
    if value > tol:
        return True, w
    return False, None


def is_completely_s(m, tol: float = S_MATRIX_TOL) -> bool:
    ok, _, _ = completely_s_witnesses(m, tol)
    return ok


def completely_s_witnesses(m, tol: float = S_MATRIX_TOL):
    """Run the S-matrix LP on every principal submatrix.

    Returns (ok, witnesses by subset, first failing subset).
    """
    arr = as_square_matrix(m)
    _check_enumerable(arr.shape[0])
    witnesses = {}
    for idx in _subsets(arr.shape[0]):
        ok, w = is_s_matrix(principal_submatrix(arr, idx), tol)
        if not ok:
            return False, witnesses, idx
        witnesses[idx] = w
    return True, witnesses, None


def is_positive_definite(m, tol: float = PIVOT_TOL,
                         symmetry_tol: float = SYMMETRY_TOL) -> bool:
    """Cholesky test on (M + M^T)/2; every pivot must exceed tol * scale"""
    arr = as_square_matrix(m)
    scale = matrix_scale(arr)
    asymmetry = float(np.max(np.abs(arr - arr.T)))
    if asymmetry > symmetry_tol * scale:
        raise NotSymmetric(f"matrix is not symmetric (max asymmetry {asymmetry:.3e})")
    return _cholesky_ok(0.5 * (arr + arr.T), tol * scale)


def _cholesky_ok(sym: np.ndarray, pivot_floor: float) -> bool:
    try:
        chol = scipy.linalg.cholesky(sym, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(chol) ** 2) > pivot_floor)


def is_m_matrix(m, tol: float = MINOR_TOL) -> bool:
    """Non-positive off-diagonal entries and a P-matrix"""
    arr = as_square_matrix(m)
    off = arr - np.diag(np.diag(arr))
    if np.any(off > tol * matrix_scale(arr)):
        return False
    return is_p_matrix(arr, tol)[0]


def classify(m, minor_tol: float = MINOR_TOL, s_tol: float = S_MATRIX_TOL,
             pivot_tol: float = PIVOT_TOL, skip_lp: bool = False) -> ClassificationReport:
    """Full classification of a square matrix.

    Positive definiteness is judged on the symmetric part, so a
    non-symmetric R still gets a meaningful answer. With skip_lp the
    completely-S flag is inferred from the P-matrix property alone.
    """
    arr = as_square_matrix(m)
    p_ok, min_minor = is_p_matrix(arr, minor_tol)
    off = arr - np.diag(np.diag(arr))
    m_ok = p_ok and not np.any(off > minor_tol * matrix_scale(arr))
    pd_ok = _cholesky_ok(0.5 * (arr + arr.T), pivot_tol * matrix_scale(arr))

    if skip_lp:
        cs_ok, witnesses, failing = p_ok, {}, None
    else:
        cs_ok, witnesses, failing = completely_s_witnesses(arr, s_tol)
    witness = witnesses.get(tuple(range(arr.shape[0])))

    if p_ok and not cs_ok:
        logging.warning("P-matrix failed the completely-S LP; check the LP tolerance")
    return ClassificationReport(
        is_completely_s=cs_ok,
        is_p_matrix=p_ok,
        is_m_matrix=m_ok,
        is_positive_definite=pd_ok,
        min_principal_minor=min_minor,
        witness=witness,
        failing_subset=failing,
        subset_witnesses=witnesses,
    )
