"""
Dense linear-algebra primitives used by the DMD and DMDc fits.

Matrices are plain 2-D float numpy arrays. The functions here add the checks
and conventions the decompositions need on top of scipy.linalg: finite input,
deterministic signs of singular vectors, relative rank thresholds and a
deterministic ordering of eigenpairs.
"""
import logging
from dataclasses import dataclass
from functools import cmp_to_key
from types import SimpleNamespace

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from .errors import _raise, InvalidInput, InvalidRank, InvalidShape, NumericalFailure

logger = logging.getLogger(__name__)

ZERO_TOL     = 1e-12    # singular values <= ZERO_TOL*s_max count as zero
EIG_RES_TOL  = 1e-8     # max ||A w - l w|| / ||A||_F accepted from eig


@dataclass(frozen=True, eq=False)
class SvdResult:
    """
        Thin (possibly truncated) singular value decomposition m ~ u @ diag(s) @ vt.

        Parameters:
        -----------
        u : array (rows, rank);
            left singular vectors, orthonormal columns.
        s : array (rank,);
            singular values, non-negative and descending.
        vt : array (rank, cols);
            right singular vectors as orthonormal rows.
        truncation_rank : int;
            number of singular triplets kept.
    """
    u               : np.ndarray
    s               : np.ndarray
    vt              : np.ndarray
    truncation_rank : int

    def reconstruct(self):
        return (self.u * self.s) @ self.vt


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """eigenpairs of a square matrix, columns of `eigenvectors` have unit norm"""
    eigenvalues  : np.ndarray
    eigenvectors : np.ndarray
    residual     : float


def as_matrix(m, name="matrix"):
    """
        Convert input to a 2-D float array and check it is finite and non-empty.
    """
    arr = np.array(m, dtype=float)
    if arr.ndim != 2: _raise(InvalidShape, f"{name} must be 2-dimensional but has shape {arr.shape}")
    if 0 in arr.shape: _raise(InvalidShape, f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        _raise(InvalidInput, f"{name} contains {np.sum(~np.isfinite(arr))} non-finite entries")
    return arr


def _fix_signs(u, vt):
    # largest |entry| of every left singular vector made positive
    idx   = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def svd(m):
    """
        Full-rank thin SVD of a real matrix.

        Parameters:
        -----------
        m : array-like (rows, cols);
            finite real matrix.

        Returns:
        --------
        SvdResult with truncation_rank = min(rows, cols). Signs are fixed so that
        the largest-magnitude entry of each column of u is positive.
    """
    m = as_matrix(m)
    try:
        u, s, vt = linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except linalg.LinAlgError as err:
        logger.debug(f"gesdd failed ({err}), retrying with gesvd")
        try:
            u, s, vt = linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        except linalg.LinAlgError as err2:
            raise NumericalFailure(f"svd(): LAPACK did not converge on a {m.shape} matrix ({err2})") from err2

    u, vt = _fix_signs(u, vt)
    return SvdResult(u=u, s=s, vt=vt, truncation_rank=len(s))


def effective_rank(s, rel_tol=ZERO_TOL):
    """number of singular values strictly above rel_tol times the largest one"""
    s = np.asarray(s, dtype=float)
    if s.size == 0 or s[0] <= 0: return 0
    return int(np.sum(s > rel_tol*s[0]))


def truncate_svd(r, rank):
    """
        Keep the leading `rank` singular triplets of an SVD.

        Singular values at or below ZERO_TOL*s[0] are dropped even when `rank`
        asks for them; the returned truncation_rank is the effective rank.

        Parameters:
        -----------
        r : SvdResult;
            decomposition to truncate.
        rank : int;
            number of triplets requested, 1 <= rank <= r.truncation_rank.
    """
    if isinstance(rank, bool) or not isinstance(rank, (int, np.integer)):
        _raise(InvalidRank, f"truncate_svd(): rank must be an integer but {rank!r} given")
    if not 1 <= rank <= r.truncation_rank:
        _raise(InvalidRank, f"truncate_svd(): rank must be in [1, {r.truncation_rank}] but {rank} given")

    keep = min(int(rank), effective_rank(r.s))
    if keep < rank:
        logger.debug(f"truncate_svd(): requested rank {rank}, effective rank {keep}")
    return SvdResult(u=r.u[:, :keep], s=r.s[:keep], vt=r.vt[:keep], truncation_rank=keep)


def pinv(m, rel_tol=ZERO_TOL):
    """
        Moore-Penrose pseudoinverse through the SVD.

        Parameters:
        -----------
        m : array-like (rows, cols);
            finite real matrix.
        rel_tol : float;
            singular values <= rel_tol*s_max are treated as zero. Default 1e-12.

        Returns:
        --------
        array (cols, rows). A zero matrix gives a zero matrix of transposed shape.
    """
    if rel_tol < 0: _raise(InvalidInput, f"pinv(): rel_tol must be >= 0 but {rel_tol} given")
    m   = as_matrix(m)
    dec = svd(m)
    k   = effective_rank(dec.s, rel_tol)
    if k == 0: return np.zeros(m.shape[::-1])
    return (dec.vt[:k].T / dec.s[:k]) @ dec.u[:, :k].T


def _eig_order(tol):
    def cmp(a, b):
        for ka, kb in ((abs(a), abs(b)), (a.real, b.real), (a.imag, b.imag)):
            if abs(ka - kb) > tol: return -1 if ka > kb else 1
        return 0
    return cmp_to_key(cmp)


def eig(m):
    """
        Eigendecomposition of a general real square matrix.

        Eigenvalues are sorted by descending modulus, ties broken by descending
        real part then descending imaginary part, so complex conjugate pairs
        come with the positive imaginary part first. Every eigenpair is checked
        against the source matrix: ||m w - l w|| / ||m||_F < 1e-8.

        Parameters:
        -----------
        m : array-like (n, n);
            finite real matrix.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]: _raise(InvalidShape, f"eig(): matrix must be square but has shape {m.shape}")
    try:
        vals, vecs = linalg.eig(m)
    except linalg.LinAlgError as err:
        raise NumericalFailure(f"eig(): LAPACK did not converge on a {m.shape} matrix ({err})") from err

    by_mag = _eig_order(1e-12*max(1.0, np.max(np.abs(vals))))
    order  = sorted(range(len(vals)), key=lambda i: by_mag(vals[i]))
    vals, vecs = vals[order], vecs[:, order]

    norm_m   = np.linalg.norm(m)
    res      = np.linalg.norm(m @ vecs - vecs*vals, axis=0)
    residual = float(np.max(res)/norm_m) if norm_m > 0 else float(np.max(res))
    if residual > EIG_RES_TOL:
        _raise(NumericalFailure, f"eig(): eigenpair residual {residual:.3e} exceeds {EIG_RES_TOL:.0e}")
    return EigenDecomposition(eigenvalues=vals, eigenvectors=vecs, residual=residual)


def match_eigenvalues(a, b):
    """
        Pair two eigenvalue sets as multisets by minimum total distance.

        Returns:
        --------
        SimpleNamespace with `pairs` (list of (a_i, b_j)), `index_a`, `index_b`
        and `max_distance` over the pairs. Sets of unequal size pair min(len) values.
    """
    a, b     = np.atleast_1d(np.asarray(a, dtype=complex)), np.atleast_1d(np.asarray(b, dtype=complex))
    cost     = np.abs(a[:, None] - b[None, :])
    ia, ib   = linear_sum_assignment(cost)
    max_dist = float(cost[ia, ib].max()) if len(ia) else 0.0
    return SimpleNamespace(pairs=list(zip(a[ia], b[ib])), index_a=ia, index_b=ib, max_distance=max_dist)
