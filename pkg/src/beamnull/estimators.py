"""scikit-learn style wrappers around the precoders and detectors.

These follow the estimator conventions (constructor stores parameters,
``fit`` learns from a channel matrix, learned state ends in ``_``) so the
building blocks can be used with ``get_params`` / ``set_params`` / ``clone``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import detection, linalg, modem, schemes
from ._validation import check_complex_matrix
from .exceptions import ValidationError


def _rows(X, width, name):
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != width:
        raise ValidationError(f"{name} must have shape (n_samples, {width}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return X


class SubspacePrecoder(BaseEstimator):
    """Precoder learned from one channel matrix.

    Parameters
    ----------
    scheme : str
        Any name accepted by :meth:`SchemeSpec.parse` except water-filling.
    total_power : float
    """

    def __init__(self, scheme="bn", total_power=1.0):
        self.scheme = scheme
        self.total_power = total_power

    def fit(self, H, y=None):
        H = check_complex_matrix(H, "H")
        spec = schemes.SchemeSpec.parse(self.scheme, self.total_power)
        if spec.kind == "wf":
            raise ValidationError("water-filling depends on the noise level; not a fixed precoder")
        sv = linalg.svd(H)
        self.spec_ = spec.validate_for(H.shape[1])
        self.singular_values_ = sv.sigma
        self.feedback_ = schemes.feedback_vectors(spec, sv.V)
        self.components_ = schemes.precoder(spec, sv.V)
        self.n_streams_ = self.components_.shape[1]
        self.effective_channel_ = H @ self.components_
        return self

    def transform(self, X):
        """Map stream symbols (n_samples, n_streams) to antenna signals (n_samples, nt)."""
        check_is_fitted(self)
        X = _rows(X, self.n_streams_, "X")
        return X @ self.components_.T


class MMSEDetector(BaseEstimator):
    """Unbiased linear MMSE receiver for a known effective channel."""

    def __init__(self, noise_var=1.0, constellation="qpsk"):
        self.noise_var = noise_var
        self.constellation = constellation

    def fit(self, G, y=None):
        G = check_complex_matrix(G, "G")
        self.filters_, self.sinr_ = detection.mmse_filters(G, self.noise_var)
        self.n_features_in_ = G.shape[0]
        self.constellation_ = modem.constellation(self.constellation)
        return self

    def transform(self, Y):
        """Soft symbol estimates, shape (n_samples, n_streams)."""
        check_is_fitted(self)
        Y = _rows(Y, self.n_features_in_, "Y")
        return Y @ np.conj(self.filters_)

    def predict(self, Y):
        """Hard decisions as constellation indices."""
        soft = self.transform(Y)
        return self.constellation_.slice(soft)


class MLDetector(BaseEstimator):
    """Exhaustive maximum-likelihood receiver."""

    def __init__(self, constellation="qpsk"):
        self.constellation = constellation

    def fit(self, G, y=None):
        G = check_complex_matrix(G, "G")
        const = modem.constellation(self.constellation)
        detection._candidates(const, G.shape[1])
        self.channel_ = G
        self.constellation_ = const
        self.n_features_in_ = G.shape[0]
        return self

    def predict(self, Y):
        check_is_fitted(self)
        Y = _rows(Y, self.n_features_in_, "Y")
        G = np.broadcast_to(self.channel_, (Y.shape[0],) + self.channel_.shape)
        return detection.ml_detect(G, Y, self.constellation_)
