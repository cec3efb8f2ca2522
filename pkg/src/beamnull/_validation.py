"""Input validation helpers.

These mirror the ``check_array`` family from scikit-learn, which refuses
complex input, so the estimators and kernels here use their own.
"""

import numbers

import numpy as np

from .exceptions import ValidationError


def check_complex_matrix(A, name="A", *, allow_batch=False, min_rows=1, min_cols=1):
    """Return ``A`` as a finite complex128 array of matrices.

    With ``allow_batch`` the array may carry leading batch dimensions.
    """
    A = np.asarray(A)
    if A.dtype == object:
        raise ValidationError(f"{name} must be numeric")
    A = A.astype(np.complex128, copy=False)
    if A.ndim != 2 and not (allow_batch and A.ndim > 2):
        raise ValidationError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if A.shape[-2] < min_rows or A.shape[-1] < min_cols:
        raise ValidationError(
            f"{name} must have at least {min_rows} rows and {min_cols} columns, "
            f"got shape {A.shape}"
        )
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return A


def check_vector(x, name="x", *, length=None, dtype=np.complex128):
    x = np.asarray(x)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    if x.ndim != 1:
        raise ValidationError(f"{name} must be a vector, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {x.shape[0]}")
    x = x.astype(dtype, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return x


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValidationError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_count(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_singular_values(sigma):
    """Singular values as a float array (..., n), non-negative and descending."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        sigma = sigma[None]
    if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
        raise ValidationError("singular values must be finite and non-negative")
    if np.any(np.diff(sigma, axis=-1) > 1e-12 * max(1.0, float(np.max(sigma, initial=0.0)))):
        raise ValidationError("singular values must be sorted in descending order")
    return sigma
