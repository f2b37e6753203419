"""
Dynamic Mode Decomposition with control (DMDc).

The fit follows the classic eight steps: stack Omega = [X; Upsilon], truncate
its SVD to p, truncate the SVD of X' to r, and project

    Atilde = Uhat^T X' V Sigma^-1 U1^T Uhat
    Btilde = Uhat^T X' V Sigma^-1 U2^T
    Phi    = X' V Sigma^-1 U1^T Uhat W        with Atilde W = W Lambda

where U1/U2 are the state/control rows of the truncated left singular vectors
of Omega. Forecasts iterate in the reduced coordinates z = Uhat^T x.
"""
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import _raise, InvalidInput, InvalidRank, InvalidShape, InsufficientData, MissingControl, NumericalFailure
from .numkernel import svd, truncate_svd, effective_rank, eig
from .dmd import DmdModel
from .outputs import atomic_write

logger = logging.getLogger(__name__)

MODEL_SCHEMA = "recode-model/1"


@dataclass(frozen=True, eq=False)
class DmdcModel:
    """
        Fitted DMDc model.

        Parameters:
        -----------
        a_tilde : array (r, r);
            reduced state operator.
        b_tilde : array (r, l);
            reduced input operator.
        basis_u_hat : array (n, r);
            orthonormal output basis Uhat.
        eigenvalues : array (r,), complex;
            eigenvalues of a_tilde.
        modes_phi : array (n, r), complex;
            dynamic modes.
        p_rank, r_rank : int;
            input-space and output-space truncations.
        control_dim, state_dim : int;
            l and n.
        metadata : dict;
            free-form information stored with the model (normalization, config, ...).
    """
    a_tilde     : np.ndarray
    b_tilde     : np.ndarray
    basis_u_hat : np.ndarray
    eigenvalues : np.ndarray
    modes_phi   : np.ndarray
    p_rank      : int
    r_rank      : int
    control_dim : int
    state_dim   : int
    metadata    : dict = field(default_factory=dict)

    def full_operators(self):
        """(A, B) lifted back to the state space: Uhat Atilde Uhat^T and Uhat Btilde"""
        u = self.basis_u_hat
        return u @ self.a_tilde @ u.T, u @ self.b_tilde


def _check(value, upper, name):
    if value is None: return
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or not 1 <= value <= upper:
        _raise(InvalidRank, f"fit_dmdc(): {name} must be an integer in [1, {upper}] but {value!r} given")


def fit_dmdc(snapshots, p=None, r=None):
    """
        Identify reduced operators from state/control snapshot trios.

        Parameters:
        -----------
        snapshots : SnapshotSet;
            must carry a control matrix.
        p : int, None;
            truncation of the SVD of Omega = [X; Upsilon], p <= min(n+l, M-1).
            Default is the effective numerical rank of Omega.
        r : int, None;
            truncation of the SVD of X', r <= min(n, M-1) and r <= p.
            Default is min(p, effective rank of X').

        Returns:
        --------
        DmdcModel
    """
    if snapshots.control is None: _raise(MissingControl, "fit_dmdc(): snapshots have no control matrix")
    if snapshots.n_pairs < 2:
        _raise(InsufficientData, f"fit_dmdc(): need at least 2 snapshot columns but {snapshots.n_pairs} given")

    x, xp, ups = snapshots.x, snapshots.x_prime, snapshots.control
    n, m       = x.shape
    l          = ups.shape[0]
    _check(p, min(n+l, m), "p")
    _check(r, min(n, m), "r")
    if p is not None and r is not None and r > p: _raise(InvalidRank, f"fit_dmdc(): r ({r}) must not exceed p ({p})")

    # steps 3-4: input space
    omega     = np.vstack([x, ups])
    omega_svd = svd(omega)
    eff_omega = effective_rank(omega_svd.s)
    if eff_omega == 0: _raise(NumericalFailure, "fit_dmdc(): Omega = [X; Upsilon] has zero numerical rank")
    p = eff_omega if p is None else int(p)
    if p > eff_omega:
        _raise(NumericalFailure, f"fit_dmdc(): truncation p={p} keeps singular values below the zero threshold "
                                 f"(effective rank of Omega is {eff_omega}); use a smaller p")
    dec_in  = truncate_svd(omega_svd, p)
    u_tilde, s_tilde, v_tilde = dec_in.u, dec_in.s, dec_in.vt.T
    u1, u2  = u_tilde[:n], u_tilde[n:]

    # step 5: output space
    out_svd = svd(xp)
    eff_out = effective_rank(out_svd.s)
    if eff_out == 0: _raise(NumericalFailure, "fit_dmdc(): X' has zero numerical rank")
    r = min(p, eff_out) if r is None else int(r)
    if r > p: _raise(InvalidRank, f"fit_dmdc(): r ({r}) must not exceed p ({p})")
    u_hat = out_svd.u[:, :r]

    # step 6: reduced operators
    core    = xp @ v_tilde / s_tilde
    a_tilde = u_hat.T @ core @ u1.T @ u_hat
    b_tilde = u_hat.T @ core @ u2.T

    # steps 7-8: eigendecomposition and dynamic modes
    e   = eig(a_tilde)
    phi = core @ u1.T @ u_hat @ e.eigenvectors
    logger.debug(f"fit_dmdc(): n={n}, l={l}, pairs={m}, p={p} (eff {eff_omega}), r={r} (eff {eff_out})")

    return DmdcModel(a_tilde=a_tilde, b_tilde=b_tilde, basis_u_hat=u_hat, eigenvalues=e.eigenvalues,
                     modes_phi=phi, p_rank=p, r_rank=r, control_dim=l, state_dim=n)


def _vector(v, length, name):
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != length: _raise(InvalidShape, f"{name} has length {v.shape[0]} but the model expects {length}")
    if not np.all(np.isfinite(v)): _raise(InvalidInput, f"{name} contains non-finite values")
    return v


def step_dmdc(model, state, control):
    """advance one step: Uhat (Atilde Uhat^T x + Btilde u)"""
    x = _vector(state, model.state_dim, "step_dmdc(): state")
    u = _vector(control, model.control_dim, "step_dmdc(): control")
    return model.basis_u_hat @ (model.a_tilde @ (model.basis_u_hat.T @ x) + model.b_tilde @ u)


def forecast_dmdc(model, initial_state, controls):
    """
        Closed-loop forecast under a prescribed control sequence.

        Each output is fed back as the next state, so after the first step the
        trajectory stays in the span of Uhat.

        Parameters:
        -----------
        model : DmdcModel;
            fitted model.
        initial_state : array (n,);
            state to start from.
        controls : array (l, h);
            column j is the control applied on step j+1. A 1-D array is
            accepted when l = 1.

        Returns:
        --------
        array (n, h); column j is the forecast j+1 steps ahead.
    """
    x = _vector(initial_state, model.state_dim, "forecast_dmdc(): initial_state")
    u = np.asarray(controls, dtype=float)
    if u.ndim == 1 and model.control_dim == 1: u = u[None, :]
    if u.ndim != 2 or u.shape[0] != model.control_dim:
        _raise(InvalidShape, f"forecast_dmdc(): controls must have shape ({model.control_dim}, h) but have {u.shape}")
    if u.shape[1] < 1: _raise(InvalidShape, "forecast_dmdc(): controls must have at least one column")
    if not np.all(np.isfinite(u)): _raise(InvalidInput, "forecast_dmdc(): controls contain non-finite values")

    out = np.empty((model.state_dim, u.shape[1]))
    z   = model.basis_u_hat.T @ x
    for j in range(u.shape[1]):
        z         = model.a_tilde @ z + model.b_tilde @ u[:, j]
        out[:, j] = model.basis_u_hat @ z
    return out


# ----------------------------------------------------------------------------
# persistence

def _encode(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"shape": list(a.shape), "real": a.real.ravel().tolist(), "imag": a.imag.ravel().tolist()}
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode(d):
    if "imag" in d:
        return (np.array(d["real"], dtype=float) + 1j*np.array(d["imag"], dtype=float)).reshape(d["shape"])
    return np.array(d["data"], dtype=float).reshape(d["shape"])


def _plain(obj):
    # numpy scalars/arrays inside metadata made json-friendly
    if isinstance(obj, dict): return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)): return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray): return _plain(obj.tolist())
    if isinstance(obj, np.integer): return int(obj)
    if isinstance(obj, np.floating): return float(obj)
    if isinstance(obj, np.bool_): return bool(obj)
    return obj


_ARRAYS = {"dmd" : ("a_operator", "eigenvalues", "modes", "amplitudes", "basis"),
           "dmdc": ("a_tilde", "b_tilde", "basis_u_hat", "eigenvalues", "modes_phi")}
_SCALARS = {"dmd" : ("state_dim", "rank_used", "amplitude_residual"),
            "dmdc": ("p_rank", "r_rank", "control_dim", "state_dim")}


def model_to_dict(model):
    kind = "dmdc" if isinstance(model, DmdcModel) else "dmd" if isinstance(model, DmdModel) else None
    if kind is None: _raise(InvalidInput, f"model_to_dict(): unsupported model type {type(model).__name__}")
    d = {"schema": MODEL_SCHEMA, "kind": kind}
    for name in _SCALARS[kind]: d[name] = _plain(getattr(model, name))
    d["matrices"] = {name: _encode(getattr(model, name)) for name in _ARRAYS[kind]}
    d["metadata"] = _plain(model.metadata)
    return d


def model_from_dict(d):
    if d.get("schema") != MODEL_SCHEMA:
        _raise(InvalidInput, f"model_from_dict(): unsupported schema {d.get('schema')!r}, expected {MODEL_SCHEMA!r}")
    kind = d.get("kind")
    if kind not in _ARRAYS: _raise(InvalidInput, f"model_from_dict(): unknown model kind {kind!r}")
    kw = {name: _decode(d["matrices"][name]) for name in _ARRAYS[kind]}
    kw.update({name: d[name] for name in _SCALARS[kind]})
    kw["metadata"] = d.get("metadata", {})
    return DmdcModel(**kw) if kind == "dmdc" else DmdModel(**kw)


def save_model(model, filename):
    """
        Save a DmdModel or DmdcModel as JSON.

        Matrices are stored row-major with their shape; complex matrices as
        separate real and imaginary parts. Floats are written at full repr
        precision so that loading gives bit-identical arrays.
    """
    atomic_write(filename, json.dumps(model_to_dict(model), indent=1) + "\n")
    logger.info(f"model saved to {filename}")


def load_model(filename):
    with open(filename) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as err:
            raise InvalidInput(f"load_model(): {filename} is not a valid model file ({err})") from err
    return model_from_dict(d)
