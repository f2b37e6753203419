"""
Dynamic Mode Decomposition without control.

The operator A = X'X^+ is fitted on the subspace of the leading left singular
vectors of X, its eigenpairs give the dynamic modes and the state is advanced as
x(k) = sum_j b_j phi_j lambda_j^(k-1), so that k = 1 is the initial state.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import _raise, InvalidInput, InvalidRank, InsufficientData, NumericalFailure
from .numkernel import as_matrix, svd, truncate_svd, effective_rank, eig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """
        Snapshot pairs (or trios when a control matrix is given).

        Parameters:
        -----------
        x : array (n, M-1);
            columns x(1)...x(M-1).
        x_prime : array (n, M-1);
            columns x(2)...x(M).
        control : array (l, M-1), None;
            columns u(1)...u(M-1).
    """
    x       : np.ndarray
    x_prime : np.ndarray
    control : np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x, "x"))
        object.__setattr__(self, "x_prime", as_matrix(self.x_prime, "x_prime"))
        if self.x.shape != self.x_prime.shape:
            _raise(InvalidInput, f"SnapshotSet: x {self.x.shape} and x_prime {self.x_prime.shape} must have the same shape")
        if self.control is not None:
            object.__setattr__(self, "control", as_matrix(self.control, "control"))
            if self.control.shape[1] != self.x.shape[1]:
                _raise(InvalidInput, f"SnapshotSet: control has {self.control.shape[1]} columns but x has {self.x.shape[1]}")

    @classmethod
    def from_trajectory(cls, states, controls=None):
        """
            Build snapshots from one trajectory.

            Parameters:
            -----------
            states : array (n, M) or (M,);
                state trajectory, one column per time step.
            controls : array (l, M) or (l, M-1) or (M,), None;
                control trajectory. With M columns the last one is unused.
        """
        states = np.asarray(states, dtype=float)
        if states.ndim == 1: states = states[None, :]
        if states.shape[1] < 2: _raise(InsufficientData, f"from_trajectory(): need at least 2 states but {states.shape[1]} given")
        ctrl = None
        if controls is not None:
            ctrl = np.asarray(controls, dtype=float)
            if ctrl.ndim == 1: ctrl = ctrl[None, :]
            if ctrl.shape[1] not in (states.shape[1], states.shape[1]-1):
                _raise(InvalidInput, f"from_trajectory(): controls must have {states.shape[1]} or {states.shape[1]-1} columns but have {ctrl.shape[1]}")
            ctrl = ctrl[:, :states.shape[1]-1]
        return cls(x=states[:, :-1], x_prime=states[:, 1:], control=ctrl)

    @property
    def state_dim(self):
        return self.x.shape[0]

    @property
    def n_pairs(self):
        return self.x.shape[1]

    @property
    def control_dim(self):
        return 0 if self.control is None else self.control.shape[0]


@dataclass(frozen=True, eq=False)
class DmdModel:
    """
        Fitted DMD model.

        `a_operator` is the full n x n operator U Atilde U^T, `modes` are the
        projected modes U W, `amplitudes` solve modes @ b = x(1) in the least
        squares sense with relative residual `amplitude_residual`.
    """
    a_operator         : np.ndarray
    eigenvalues        : np.ndarray
    modes              : np.ndarray
    amplitudes         : np.ndarray
    state_dim          : int
    rank_used          : int
    basis              : np.ndarray
    amplitude_residual : float = 0.0
    metadata           : dict = field(default_factory=dict)


def _check_rank(rank, upper, name):
    if rank is None: return
    if isinstance(rank, bool) or not isinstance(rank, (int, np.integer)) or not 1 <= rank <= upper:
        _raise(InvalidRank, f"{name} must be an integer in [1, {upper}] but {rank!r} given")


def _amplitudes(modes, x1):
    b, *_ = linalg.lstsq(modes, x1.astype(complex))
    norm  = np.linalg.norm(x1)
    res   = np.linalg.norm(modes @ b - x1)
    return b, float(res/norm) if norm > 0 else float(res)


def fit_dmd(snapshots, rank=None):
    """
        Fit a DMD model to snapshot pairs.

        Parameters:
        -----------
        snapshots : SnapshotSet;
            x and x_prime; a control matrix, if any, is ignored.
        rank : int, None;
            truncation rank, 1 <= rank <= min(n, M-1). Default is the effective
            numerical rank of X.

        Returns:
        --------
        DmdModel
    """
    if snapshots.n_pairs < 2:
        _raise(InsufficientData, f"fit_dmd(): need at least 2 snapshot columns but {snapshots.n_pairs} given")
    n, m = snapshots.x.shape
    _check_rank(rank, min(n, m), "fit_dmd(): rank")
    if snapshots.control is not None: logger.debug("fit_dmd(): control matrix ignored")

    full = svd(snapshots.x)
    if effective_rank(full.s) == 0: _raise(NumericalFailure, "fit_dmd(): snapshot matrix X has zero numerical rank")
    dec  = truncate_svd(full, full.truncation_rank if rank is None else int(rank))
    u, s, v = dec.u, dec.s, dec.vt.T

    a_tilde = u.T @ snapshots.x_prime @ v / s
    e       = eig(a_tilde)
    modes   = u @ e.eigenvectors
    b, res  = _amplitudes(modes, snapshots.x[:, 0])
    logger.debug(f"fit_dmd(): n={n}, pairs={m}, rank={dec.truncation_rank}, amplitude residual={res:.2e}")

    return DmdModel(a_operator=u @ a_tilde @ u.T, eigenvalues=e.eigenvalues, modes=modes, amplitudes=b,
                    state_dim=n, rank_used=dec.truncation_rank, basis=u, amplitude_residual=res)


def _evolve(model, k_values, initial_state):
    if initial_state is None:
        b = model.amplitudes
    else:
        x0 = np.asarray(initial_state, dtype=float).ravel()
        if x0.shape[0] != model.state_dim:
            _raise(InvalidInput, f"initial_state has length {x0.shape[0]} but the model state dimension is {model.state_dim}")
        b, _ = _amplitudes(model.modes, x0)

    # column j holds lambda^(k_j - 1); lambda^0 = 1 also for lambda = 0
    exps   = np.asarray(k_values) - 1
    powers = np.where(exps[None, :] == 0, 1.0+0j, model.eigenvalues[:, None]**np.maximum(exps, 1)[None, :])
    states = model.modes @ (b[:, None]*powers)

    real_norm, imag_norm = np.linalg.norm(states.real), np.linalg.norm(states.imag)
    if imag_norm > 1e-8*real_norm and imag_norm > np.finfo(float).eps:
        msg = f"imaginary residual {imag_norm:.3e} of DMD prediction is large relative to its real part ({real_norm:.3e})"
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning)
    return states.real, imag_norm


def predict_dmd(model, k, initial_state=None, return_residual=False):
    """
        Predict the state at step k >= 1, k = 1 being the initial state.

        Parameters:
        -----------
        model : DmdModel;
            fitted model.
        k : int;
            step index, x(k) = Re sum_j b_j phi_j lambda_j^(k-1).
        initial_state : array (n,), None;
            start from this state instead of the first training snapshot. The
            amplitudes are recomputed by least squares against the modes.
        return_residual : bool;
            also return the norm of the discarded imaginary part.
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        _raise(InvalidInput, f"predict_dmd(): k must be an integer >= 1 but {k!r} given")
    states, imag = _evolve(model, [k], initial_state)
    return (states[:, 0], imag) if return_residual else states[:, 0]


def reconstruct_dmd(model, horizon, initial_state=None):
    """Column-stacked predict_dmd for k = 1...horizon, shape (n, horizon)."""
    if isinstance(horizon, bool) or not isinstance(horizon, (int, np.integer)) or horizon < 1:
        _raise(InvalidInput, f"reconstruct_dmd(): horizon must be an integer >= 1 but {horizon!r} given")
    states, _ = _evolve(model, np.arange(1, horizon+1), initial_state)
    return states
