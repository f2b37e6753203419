"""
Time-delay embedding.

Hankel matrices of scalar series or of sequences of per-night vectors, their
singular value spectra (how many dynamic modes the data carries) and the
time-delay augmented snapshot sets used by DMDc-TDE.
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import hankel, svdvals

from .errors import _raise, InvalidInput, InvalidEmbedding, InsufficientData
from .dmd import SnapshotSet
from .outputs import write_table, SPECTRUM_SCHEMA

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HankelMatrix:
    """
        Block Hankel matrix of a series of M vectors of length n (block_size)
        embedded with dimension N: block i of column j is element i+j.
        `data` has shape (N*n, M-N+1).
    """
    source_len : int
    embed_dim  : int
    block_size : int
    data       : np.ndarray


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    values           : np.ndarray
    normalized       : np.ndarray
    dominant_count   : int
    energy_threshold : float = 0.99


def _as_series(series, name):
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1: arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        _raise(InvalidInput, f"{name} must be a non-empty 1-D series or a 2-D array of vectors (M, n), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)): _raise(InvalidInput, f"{name} contains non-finite values")
    return arr


def build_hankel(series, embed_dim):
    """
        Build the Hankel matrix of a series.

        Parameters:
        -----------
        series : array (M,) or (M, n);
            ordered scalars, or ordered vectors as rows.
        embed_dim : int;
            embedding dimension N, 1 <= N <= M.

        Returns:
        --------
        HankelMatrix with data of shape (N*n, M-N+1).

        Example:
        --------
        >>> build_hankel([1,2,3,4,5], 2).data
        array([[1., 2., 3., 4.],
               [2., 3., 4., 5.]])
    """
    arr  = _as_series(series, "build_hankel(): series")
    m, n = arr.shape
    if isinstance(embed_dim, bool) or not isinstance(embed_dim, (int, np.integer)) or not 1 <= embed_dim <= m:
        _raise(InvalidEmbedding, f"build_hankel(): embed_dim must be an integer in [1, {m}] but {embed_dim!r} given")

    if n == 1:
        data = hankel(arr[:embed_dim, 0], arr[embed_dim-1:, 0])
    else:
        data = np.vstack([arr[i:m-embed_dim+1+i].T for i in range(embed_dim)])
    return HankelMatrix(source_len=m, embed_dim=int(embed_dim), block_size=n, data=data)


def hankel_spectrum(h, energy_threshold=0.99):
    """
        Singular values of a Hankel matrix and the number of dominant modes.

        dominant_count is the smallest k with sum_{i<=k} s_i^2 >= energy_threshold * sum s_i^2.
        An all-zero matrix has dominant_count 0.

        Parameters:
        -----------
        h : HankelMatrix;
            matrix to analyse.
        energy_threshold : float;
            fraction of the squared singular value energy to capture, in (0, 1]. Default 0.99.
    """
    if not 0 < energy_threshold <= 1:
        _raise(InvalidInput, f"hankel_spectrum(): energy_threshold must be in (0, 1] but {energy_threshold} given")
    s = svdvals(h.data)
    if s.size == 0 or s[0] == 0:
        return SingularSpectrum(values=s, normalized=np.zeros_like(s), dominant_count=0, energy_threshold=energy_threshold)

    energy = np.cumsum(s**2)/np.sum(s**2)
    count  = min(int(np.searchsorted(energy, energy_threshold, side="left")) + 1, s.size)
    return SingularSpectrum(values=s, normalized=s/s[0], dominant_count=count, energy_threshold=energy_threshold)


def embed_snapshots(states, controls, embed_dim):
    """
        Time-delay augmented snapshots.

        States and controls share the embedding dimension N. Column j of X
        stacks x(j)...x(j+N-1), X' is the one-step shift of the stacks and
        Upsilon stacks u(j)...u(j+N-1). The last control of the series is unused.

        Parameters:
        -----------
        states : array (M,) or (M, n);
            ordered state vectors.
        controls : array (M,) or (M, l), None;
            ordered control vectors, same length as states.
        embed_dim : int;
            N, with M >= N+1.
    """
    x = _as_series(states, "embed_snapshots(): states")
    u = None if controls is None else _as_series(controls, "embed_snapshots(): controls")
    if u is not None and u.shape[0] != x.shape[0]:
        _raise(InvalidInput, f"embed_snapshots(): {x.shape[0]} states but {u.shape[0]} controls given")
    if isinstance(embed_dim, bool) or not isinstance(embed_dim, (int, np.integer)) or embed_dim < 1:
        _raise(InvalidEmbedding, f"embed_snapshots(): embed_dim must be an integer >= 1 but {embed_dim!r} given")
    if x.shape[0] < embed_dim + 1:
        _raise(InsufficientData, f"embed_snapshots(): need at least embed_dim+1 = {embed_dim+1} states but {x.shape[0]} given")

    hx = build_hankel(x, embed_dim).data
    ups = None if u is None else build_hankel(u, embed_dim).data[:, :-1]
    return SnapshotSet(x=hx[:, :-1], x_prime=hx[:, 1:], control=ups)


def takens_check(embed_dim, n_latent):
    """
        Advisory check of the delay-embedding condition N >= 2*n_latent + 1.

        Emits a RuntimeWarning when it fails; never raises.
        Returns True when the condition holds.
    """
    ok = embed_dim >= 2*n_latent + 1
    if not ok:
        warnings.warn(f"embedding dimension {embed_dim} is below 2*{n_latent}+1 = {2*n_latent+1} for "
                      f"{n_latent} latent states; the delay embedding may not reconstruct the dynamics", RuntimeWarning)
    return ok


def night_series(nights, field="nee"):
    """stack a per-night field (`nee` or a driver name) into an array (n_nights, night_length)"""
    if len(nights) == 0: _raise(InsufficientData, "night_series(): no nights given")
    try:
        return np.vstack([n.nee if field == "nee" else n.drivers[field] for n in nights])
    except KeyError:
        raise InvalidInput(f"night_series(): field {field!r} is not available in the nights") from None
    except ValueError as err:
        raise InvalidInput(f"night_series(): nights have unequal lengths ({err})") from err


def site_spectrum(nights, field="nee", embed_dim=6, energy_threshold=0.99):
    """
        Singular spectrum of the block Hankel matrix of a site's night vectors.

        Parameters:
        -----------
        nights : list of NightRecord;
            harmonized nights (equal length).
        field : str;
            "nee" or a driver name such as "tair".
        embed_dim : int;
            embedding dimension, reduced to the number of nights when larger.
    """
    series = night_series(nights, field)
    n_emb  = min(embed_dim, series.shape[0])
    if n_emb < embed_dim: logger.info(f"site_spectrum(): embed_dim reduced from {embed_dim} to {n_emb} ({series.shape[0]} nights)")
    spec   = hankel_spectrum(build_hankel(series, n_emb), energy_threshold)
    logger.info(f"site_spectrum(): {field} over {series.shape[0]} nights, dominant modes: {spec.dominant_count}")
    return spec


def write_spectrum(spectrum, filename, header=None):
    """
        Write a spectrum as a plot-ready two-column text file (index, normalized singular value).

        Parameters:
        -----------
        spectrum : SingularSpectrum;
            spectrum to write.
        filename : str;
            output path.
        header : dict, None;
            extra header items (e.g. source file and field).
    """
    items = {"schema": SPECTRUM_SCHEMA}
    items.update(header or {})
    items.update({"energy_threshold": spectrum.energy_threshold, "dominant_count": spectrum.dominant_count})
    df = pd.DataFrame({"index": np.arange(1, len(spectrum.values)+1), "normalized": spectrum.normalized})
    return write_table(filename, df, items, float_format="%.12e")
