"""Complex matrix kernel with fixed phase conventions.

Everything above this module (precoders, detectors, simulators) relies on
the decompositions being reproducible bit-for-bit, so every factorization
here pins down the phase freedom that LAPACK leaves open.

All functions accept stacks of matrices (leading batch dimensions) unless
noted otherwise.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_matrix, check_vector
from .exceptions import NumericalError, ValidationError

RESIDUAL_TOL = 1e-10
INPUT_TOL = 1e-8

# Names of deliberately injected faults, used by the self-test negative control.
_FAULTS = set()


def _conj_t(A):
    return np.conj(np.swapaxes(A, -1, -2))


def _column_phase(A):
    """Unit-modulus factor per column: phase of the largest-modulus entry.

    Ties go to the lowest row index. Zero columns get phase 1.
    """
    idx = np.argmax(np.abs(A), axis=-2)
    lead = np.take_along_axis(A, idx[..., None, :], axis=-2)[..., 0, :]
    mag = np.abs(lead)
    phase = np.ones_like(lead)
    nz = mag > 0
    phase[nz] = lead[nz] / mag[nz]
    return phase


@dataclass(frozen=True)
class SvdResult:
    """``H = U @ diag(sigma) @ V^H`` with descending ``sigma``.

    ``U`` is Nr x Nr and ``V`` is Nt x Nt. Each column of ``V`` has its
    largest-modulus entry real and non-negative.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        nr, nt = self.U.shape[-1], self.V.shape[-1]
        k = min(nr, nt)
        return (self.U[..., :, :k] * self.sigma[..., None, :k]) @ _conj_t(self.V[..., :, :k])


def svd(H, *, check=True):
    """Singular-value decomposition with the column-phase convention.

    Parameters
    ----------
    H : array_like, shape (..., Nr, Nt)
        Channel matrix or stack of them.
    check : bool
        Verify the reconstruction residual and raise ``NumericalError``
        if it exceeds ``1e-10 * ||H||_F``.

    Returns
    -------
    SvdResult
    """
    H = check_complex_matrix(H, "H", allow_batch=True)
    try:
        U, s, Vh = np.linalg.svd(H, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        fro = float(np.max(np.linalg.norm(H, axis=(-2, -1))))
        raise NumericalError(
            f"SVD did not converge (max |h| = {np.max(np.abs(H)):.3e}, "
            f"||H||_F = {fro:.3e})"
        ) from exc
    V = _conj_t(Vh)
    k = min(H.shape[-2], H.shape[-1])

    phase = _column_phase(V)
    V = V * np.conj(phase)[..., None, :]
    # u_i v_i^H is unchanged when both columns take the same phase.
    U = U.copy()
    U[..., :, :k] = U[..., :, :k] * np.conj(phase[..., :k])[..., None, :]
    if U.shape[-1] > k:
        extra = U[..., :, k:]
        U[..., :, k:] = extra * np.conj(_column_phase(extra))[..., None, :]

    out = SvdResult(U=U, sigma=s, V=V)
    if check:
        scale = np.linalg.norm(H, axis=(-2, -1))
        resid = np.linalg.norm(out.reconstruct() - H, axis=(-2, -1))
        bad = resid > RESIDUAL_TOL * np.maximum(scale, 1e-300)
        if np.any(bad & (scale > 0)):
            raise NumericalError(
                f"SVD reconstruction residual {np.max(resid / np.maximum(scale, 1e-300)):.2e} "
                f"exceeds {RESIDUAL_TOL:g}"
            )
    return out


def qr(A, *, complete=False):
    """Householder QR with a real non-negative diagonal in ``R``.

    Returns ``(Q, R)``. In the default reduced mode ``Q`` is m x n with
    orthonormal columns and ``R`` is n x n. With ``complete=True``, ``Q``
    is m x m unitary and ``R`` is m x n. Rank deficiency shows up as zero
    diagonal entries of ``R``.
    """
    A = check_complex_matrix(A, "A", allow_batch=True)
    m, n = A.shape[-2:]
    if m < n:
        raise ValidationError(f"qr expects rows >= cols, got shape {A.shape[-2:]}")
    Q, R = np.linalg.qr(A, mode="complete" if complete else "reduced")
    d = np.diagonal(R, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.ones_like(d)
    nz = mag > 0
    phase[nz] = d[nz] / mag[nz]
    Q = Q.copy()
    Q[..., :, :n] = Q[..., :, :n] * phase[..., None, :]
    R = R.copy()
    R[..., :n, :] = R[..., :n, :] * np.conj(phase)[..., :, None]
    # Exact zeros below the diagonal, real diagonal.
    R = np.triu(R)
    idx = np.arange(n)
    R[..., idx, idx] = np.abs(R[..., idx, idx])
    return Q, R


def _check_orthonormal_columns(Vk, tol=INPUT_TOL):
    k = Vk.shape[-1]
    gram = _conj_t(Vk) @ Vk
    dev = np.max(np.abs(gram - np.eye(k)))
    if dev > tol:
        raise ValidationError(
            f"input columns are not orthonormal (Gram deviation {dev:.2e} > {tol:g})"
        )


def orthonormal_complement(Vk):
    """Orthonormal basis of the subspace orthogonal to the columns of ``Vk``.

    The basis is the trailing columns of the complete Householder QR of
    ``Vk``, rotated so that the j-th output column lies in
    ``span{Vk, e_1, ..., e_j}``. For generic ``Vk`` this is exactly the
    Gram-Schmidt result of factoring ``[Vk, e_1, ..., e_{Nt-k}]``; unlike
    that construction it never breaks down when ``Vk`` is aligned with a
    standard basis vector.

    Parameters
    ----------
    Vk : array_like, shape (..., Nt, k)
        Orthonormal columns, ``1 <= k < Nt``. A 1-D input is treated as a
        single column.

    Returns
    -------
    Phi : ndarray, shape (..., Nt, Nt - k)
    """
    Vk = np.asarray(Vk)
    if Vk.ndim == 1:
        Vk = Vk[:, None]
    Vk = check_complex_matrix(Vk, "Vk", allow_batch=True)
    nt, k = Vk.shape[-2:]
    if not 1 <= k < nt:
        raise ValidationError(f"need 1 <= k < Nt, got k={k}, Nt={nt}")
    _check_orthonormal_columns(Vk)

    Q, _ = qr(Vk, complete=True)
    phi = Q[..., :, k:]
    m = nt - k
    # Rotate into the canonical basis: QR of the top m x m block of Phi^H.
    W, _ = qr(_conj_t(phi[..., :m, :]))
    phi = phi @ W
    if "phi-sign" in _FAULTS:
        phi = phi.copy()
        phi[..., 0, :] *= -1
    return phi


def hermitian_solve(M, b):
    """Solve ``M x = b`` for Hermitian positive-definite ``M``.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    ``NumericalError`` with the smallest eigenvalue when ``M`` is not
    positive definite.
    """
    M = check_complex_matrix(M, "M", allow_batch=True)
    if M.shape[-1] != M.shape[-2]:
        raise ValidationError(f"M must be square, got shape {M.shape[-2:]}")
    herm_dev = np.max(np.abs(M - _conj_t(M)))
    if herm_dev > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(M)))):
        raise ValidationError(f"M is not Hermitian (deviation {herm_dev:.2e})")
    b = np.asarray(b, dtype=np.complex128)
    vec = b.ndim == M.ndim - 1
    if vec:
        b = b[..., None]
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        lam_min = float(np.min(np.linalg.eigvalsh(M)))
        raise NumericalError(
            f"matrix is not positive definite (smallest eigenvalue {lam_min:.3e})"
        ) from exc
    y = np.linalg.solve(L, b)
    x = np.linalg.solve(_conj_t(L), y)
    return x[..., 0] if vec else x


def unit_vector(x):
    """Normalize a complex vector to unit 2-norm."""
    x = check_vector(x)
    n = np.linalg.norm(x)
    if n == 0:
        raise ValidationError("cannot normalize the zero vector")
    return x / n
