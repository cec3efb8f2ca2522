"""Receivers for an effective channel ``y = G x + z``.

All functions accept a single channel ``G`` of shape (nr, ns) or a stack
(..., nr, ns) with received vectors of matching leading shape.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from ._validation import check_complex_matrix, check_positive
from .exceptions import ValidationError

ML_SEARCH_CAP = 2 ** 20
ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class DetectionResult:
    soft_symbols: np.ndarray
    sinr: np.ndarray
    hard_symbols: np.ndarray = None


def _conj_t(A):
    return np.conj(np.swapaxes(A, -1, -2))


def mmse_filters(G, noise_var, *, sinr=True):
    """Unbiased linear MMSE filters and per-stream SINR.

    Because ``h_i h_i^H + R_I`` is the same matrix ``R = G G^H + sigma^2 I``
    for every stream, all unbiased filters come from a single solve:
    ``w_i = R^{-1} h_i / (h_i^H R^{-1} h_i)``. The SINR
    ``gamma_i = h_i^H R_I^{-1} h_i`` is computed from its own
    interference-plus-noise covariance per stream.

    Returns
    -------
    W : ndarray, shape (..., nr, ns)
        Column ``i`` is ``w_i``; estimates are ``W^H y``.
    gamma : ndarray, shape (..., ns) or None
    """
    G = np.asarray(G, dtype=np.complex128)
    noise_var = check_positive(noise_var, "noise_var")
    nr, ns = G.shape[-2:]
    R = G @ _conj_t(G) + noise_var * np.eye(nr)
    X = np.linalg.solve(R, G)
    denom = np.real(np.sum(np.conj(G) * X, axis=-2))
    W = X / denom[..., None, :]
    if not sinr:
        return W, None
    gamma = np.empty(G.shape[:-2] + (ns,))
    for i in range(ns):
        h = G[..., :, i]
        R_I = R - h[..., :, None] * np.conj(h)[..., None, :]
        t = linalg.hermitian_solve(R_I, h)
        gamma[..., i] = np.real(np.sum(np.conj(h) * t, axis=-1))
    return W, gamma


def mmse_detect(eff, y, const=None):
    """Unbiased MMSE detection on an :class:`~beamnull.schemes.EffectiveChannel`.

    ``y`` holds one received vector (nr,) or several (n, nr). Hard
    decisions are filled in when a constellation is given.
    """
    G = check_complex_matrix(eff.matrix, "effective channel")
    if eff.noise_var <= 0:
        raise ValidationError("MMSE detection needs noise_var > 0")
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[-1] != G.shape[0]:
        raise ValidationError(f"received vector length {y.shape[-1]} != nr={G.shape[0]}")
    W, gamma = mmse_filters(G, eff.noise_var)
    soft = y @ np.conj(W)
    hard = const.slice(soft) if const is not None else None
    return DetectionResult(soft_symbols=soft, sinr=gamma, hard_symbols=hard)


def _candidates(const, ns):
    total = const.size ** ns
    if total > ML_SEARCH_CAP:
        raise ValidationError(
            f"ML search space {const.size}^{ns} = {total} exceeds the cap of {ML_SEARCH_CAP}"
        )
    idx = np.indices((const.size,) * ns).reshape(ns, -1).T
    return idx, const.points[idx]


def ml_detect(G, y, const, *, max_elements=2 ** 22):
    """Exhaustive maximum-likelihood detection.

    Parameters
    ----------
    G : array_like, shape (..., nr, ns)
    y : array_like, shape (..., nr)
    const : Constellation

    Returns
    -------
    ndarray of int, shape (..., ns)
        Constellation indices minimizing ``||y - G x||^2``; ties go to the
        first candidate in lexicographic index order.
    """
    G = getattr(G, "matrix", G)
    G = np.asarray(G, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    nr, ns = G.shape[-2:]
    idx, X = _candidates(const, ns)
    batch_shape = np.broadcast_shapes(G.shape[:-2], y.shape[:-1])
    Gb = np.broadcast_to(G, batch_shape + (nr, ns)).reshape(-1, nr, ns)
    yb = np.broadcast_to(y, batch_shape + (nr,)).reshape(-1, nr)
    out = np.empty((Gb.shape[0], ns), dtype=np.int64)
    step = max(1, max_elements // (nr * X.shape[0]))
    for s in range(0, Gb.shape[0], step):
        GX = Gb[s:s + step] @ X.T
        cost = np.sum(np.abs(yb[s:s + step, :, None] - GX) ** 2, axis=-2)
        out[s:s + step] = idx[np.argmin(cost, axis=-1)]
    return out.reshape(batch_shape + (ns,))


def _real_equivalent(G, basis):
    """Real-valued model of a code linear in (Re x, Im x).

    ``basis`` has shape (2n, streams, T): the block contributed by a unit
    real part (even rows) or unit imaginary part (odd rows) of each symbol.
    Returns the (..., 2*nr*T, 2n) real matrix mapping the real symbol
    vector to the stacked real received block.
    """
    cols = G[..., None, :, :] @ basis  # (..., 2n, nr, T)
    cols = np.swapaxes(cols, -1, -2).reshape(*cols.shape[:-2], -1)  # column-major vec
    cols = np.swapaxes(cols, -1, -2)
    return np.concatenate([cols.real, cols.imag], axis=-2)


def matched_filter_od(eff, od, Y):
    """Matched-filter combining for an orthogonal space-time block code.

    Parameters
    ----------
    eff : EffectiveChannel or ndarray (..., nr, streams)
    od : OrthogonalDesign
    Y : ndarray, shape (..., nr, T)
        Received block.

    Returns
    -------
    soft : ndarray, shape (..., n_symbols)
    snr : ndarray, shape (..., n_symbols)
        Per-symbol SNR of the combined output for unit-energy symbols.
    """
    noise_var = getattr(eff, "noise_var", None)
    G = np.asarray(getattr(eff, "matrix", eff), dtype=np.complex128)
    if G.shape[-1] != od.streams:
        raise ValidationError(
            f"code is for {od.streams} streams, effective channel has {G.shape[-1]}"
        )
    Greal = _real_equivalent(G, od.real_basis())
    gram = np.swapaxes(Greal, -1, -2) @ Greal
    diag = np.diagonal(gram, axis1=-2, axis2=-1)
    off = gram - diag[..., None] * np.eye(gram.shape[-1])
    scale = np.max(diag, axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    if np.max(np.abs(off) / scale[..., None]) > ORTHOGONALITY_TOL:
        raise ValidationError("code is not orthogonal over this channel; matched filter is not ML")
    Y = np.asarray(Y, dtype=np.complex128)
    yv = np.swapaxes(Y, -1, -2).reshape(*Y.shape[:-2], -1)
    yr = np.concatenate([yv.real, yv.imag], axis=-1)
    z = np.einsum("...ij,...i->...j", Greal, yr) / np.where(diag > 0, diag, 1.0)
    soft = z[..., 0::2] + 1j * z[..., 1::2]
    # Real and imaginary parts see the same gain for orthogonal designs.
    gain = 0.5 * (diag[..., 0::2] + diag[..., 1::2])
    snr = gain / noise_var if noise_var else gain
    return soft, snr
