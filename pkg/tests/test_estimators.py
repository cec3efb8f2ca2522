import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from beamnull import linalg, modem
from beamnull.estimators import MLDetector, MMSEDetector, SubspacePrecoder
from beamnull.exceptions import ValidationError

from conftest import crandn


def test_params_and_clone():
    p = SubspacePrecoder(scheme="bf2", total_power=2.0)
    assert p.get_params() == {"scheme": "bf2", "total_power": 2.0}
    q = clone(p).set_params(scheme="bn")
    assert q.scheme == "bn" and p.scheme == "bf2"
    assert MMSEDetector().get_params() == {"noise_var": 1.0, "constellation": "qpsk"}


def test_precoder_nulls_weakest_direction(rng):
    H = crandn(rng, 4, 4)
    p = SubspacePrecoder("bn").fit(H)
    v_min = linalg.svd(H).V[:, -1]
    assert p.n_streams_ == 3
    np.testing.assert_allclose(p.feedback_[:, 0], v_min)
    assert np.max(np.abs(v_min.conj() @ p.components_)) <= 1e-12
    np.testing.assert_allclose(p.components_.conj().T @ p.components_, np.eye(3) / 3, atol=1e-12)
    X = crandn(rng, 5, 3)
    np.testing.assert_allclose(p.transform(X), X @ p.components_.T)
    np.testing.assert_allclose(p.effective_channel_, H @ p.components_)


def test_precoder_rejects_bad_input(rng):
    with pytest.raises(ValidationError):
        SubspacePrecoder("wf").fit(crandn(rng, 2, 2))
    with pytest.raises(ValidationError):
        SubspacePrecoder("bn").fit(crandn(rng, 1, 1))
    with pytest.raises(NotFittedError):
        SubspacePrecoder().transform(np.ones((1, 3)))
    p = SubspacePrecoder("bf").fit(crandn(rng, 3, 3))
    with pytest.raises(ValidationError):
        p.transform(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        p.transform(np.array([[np.nan]]))


def test_mmse_detector_pipeline(rng):
    H = crandn(rng, 4, 4)
    pre = SubspacePrecoder("bn").fit(H)
    det = MMSEDetector(noise_var=1e-6, constellation="16qam").fit(pre.effective_channel_)
    c = modem.constellation("16qam")
    idx = rng.integers(0, 16, (20, 3))
    Y = pre.transform(c.points[idx]) @ H.T
    np.testing.assert_array_equal(det.predict(Y), idx)
    assert det.sinr_.shape == (3,)
    with pytest.raises(NotFittedError):
        MMSEDetector().predict(Y)


def test_ml_detector(rng):
    G = crandn(rng, 3, 2)
    c = modem.constellation("8psk")
    idx = rng.integers(0, 8, (10, 2))
    det = MLDetector("8psk").fit(G)
    np.testing.assert_array_equal(det.predict(c.points[idx] @ G.T), idx)
    with pytest.raises(ValidationError):
        MLDetector("256qam").fit(crandn(rng, 3, 3))
    with pytest.raises(ValidationError):
        det.predict(np.ones((2, 5)))
