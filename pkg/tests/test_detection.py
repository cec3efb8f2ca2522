import itertools

import numpy as np
import pytest

from beamnull import detection, modem, stcode
from beamnull.exceptions import ValidationError
from beamnull.schemes import EffectiveChannel

from conftest import crandn


def direct_sinr(G, s):
    """Oracle: h_i^H (H_I H_I^H + s I)^-1 h_i with an explicit inverse."""
    nr, ns = G.shape
    out = np.empty(ns)
    for i in range(ns):
        HI = np.delete(G, i, axis=1)
        RI = HI @ HI.conj().T + s * np.eye(nr)
        out[i] = np.real(G[:, i].conj() @ np.linalg.inv(RI) @ G[:, i])
    return out


def test_single_stream_matched_filter_limit():
    h = np.array([[2.0], [0.0], [0.0]], dtype=complex)
    _, g = detection.mmse_filters(h, 1.0)
    assert g[0] == pytest.approx(4.0)


def test_orthogonal_columns_no_interference():
    G = np.array([[1.0, 0], [0, 2.0], [0, 0]], dtype=complex)
    _, g = detection.mmse_filters(G, 0.5)
    np.testing.assert_allclose(g, [2.0, 8.0], rtol=1e-12)


def test_sinr_against_direct_inverse(rng):
    for _ in range(200):
        G = crandn(rng, 3, 2)
        s = 10 ** rng.uniform(-2, 1)
        _, g = detection.mmse_filters(G, s)
        np.testing.assert_allclose(g, direct_sinr(G, s), rtol=1e-9)


def test_sinr_from_normalized_filter(rng):
    G = crandn(rng, 4, 3)
    s = 0.3
    W, g = detection.mmse_filters(G, s)
    R = G @ G.conj().T + s * np.eye(4)
    for i in range(3):
        w = W[:, i]
        assert np.vdot(w, G[:, i]) == pytest.approx(1.0, abs=1e-12)  # unbiased
        RI = R - np.outer(G[:, i], G[:, i].conj())
        assert 1 / np.real(w.conj() @ RI @ w) == pytest.approx(g[i], rel=1e-9)


def test_removing_interferer_never_hurts(rng):
    for _ in range(100):
        G = crandn(rng, 4, 3)
        _, g = detection.mmse_filters(G, 0.2)
        _, g2 = detection.mmse_filters(G[:, :2], 0.2)
        assert np.all(g2 >= g[:2] - 1e-12)


def test_unbiased_and_noise_variance(rng):
    G = crandn(rng, 4, 3)
    s = 0.5
    x = np.array([1, -1j, (1 + 1j) / np.sqrt(2)])
    n = 10_000
    W, g = detection.mmse_filters(G, s)
    # interference symbols random QPSK, noise Gaussian
    c = modem.constellation("qpsk")
    X = c.points[rng.integers(0, 4, (n, 3))]
    for i in range(3):
        Xi = X.copy()
        Xi[:, i] = x[i]
        Y = Xi @ G.T + np.sqrt(s / 2) * (rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4)))
        est = Y @ W[:, i].conj()
        err = est - x[i]
        assert abs(err.mean()) <= 3 * err.std() / 100
        assert np.var(err) == pytest.approx(1 / g[i], rel=0.05)


def test_mmse_detect_result(rng):
    G = crandn(rng, 3, 2)
    c = modem.constellation("qpsk")
    x = c.points[[0, 3]]
    res = detection.mmse_detect(EffectiveChannel(G, 2, 1e-8), G @ x, c)
    np.testing.assert_array_equal(res.hard_symbols, [0, 3])
    assert np.all(res.sinr > 0)
    with pytest.raises(ValidationError):
        detection.mmse_detect(EffectiveChannel(G, 2, 0.0), G @ x, c)


def test_ml_noiseless_recovers(rng):
    c = modem.constellation("16qam")
    G = crandn(rng, 3, 3)
    idx = np.array([5, 0, 15])
    np.testing.assert_array_equal(detection.ml_detect(G, G @ c.points[idx], c), idx)


def test_ml_bpsk_sign():
    c = modem.constellation("bpsk")
    h = np.array([[1.0 + 0.5j], [0.3]])
    y = -0.9 * h[:, 0] + 0.01
    assert c.points[detection.ml_detect(h, y, c)[0]] == -1


def test_ml_agrees_with_mmse_at_high_snr(rng):
    c = modem.constellation("qpsk")
    for _ in range(50):
        G = crandn(rng, 3, 2)
        idx = rng.integers(0, 4, 2)
        y = G @ c.points[idx] + 1e-3 * crandn(rng, 3)
        res = detection.mmse_detect(EffectiveChannel(G, 2, 1e-6), y, c)
        np.testing.assert_array_equal(detection.ml_detect(G, y, c), res.hard_symbols)


def test_ml_search_cap():
    c = modem.constellation("256qam")
    with pytest.raises(ValidationError, match="exceeds the cap"):
        detection.ml_detect(np.eye(3, dtype=complex), np.zeros(3), c)


def test_alamouti_identity_snr():
    P, s = 2.0, 0.25
    od = stcode.OrthogonalDesign("alamouti")
    eff = EffectiveChannel(np.sqrt(P / 2) * np.eye(2, dtype=complex), 2, s)
    _, snr = detection.matched_filter_od(eff, od, np.zeros((2, 2)))
    np.testing.assert_allclose(snr, [P / s, P / s])


def test_single_stream_mmse_is_matched_filter(rng):
    # With one stream there is no interference, so the unbiased MMSE
    # combiner is h^H y / |h|^2 at any noise level.
    h = crandn(rng, 3, 1)
    y = h[:, 0] * 0.7j + 0.01 * crandn(rng, 3)
    W, _ = detection.mmse_filters(h, 0.5)
    mf = np.vdot(h[:, 0], y) / np.vdot(h[:, 0], h[:, 0])
    assert np.vdot(W[:, 0], y) == pytest.approx(mf, rel=1e-9)


@pytest.mark.parametrize("variant,nr", [("alamouti", 2), ("rate34-3", 3), ("rate34-4", 4)])
def test_matched_filter_equals_exhaustive_ml(rng, variant, nr):
    od = stcode.OrthogonalDesign(variant)
    c = modem.constellation("qpsk")
    cands = list(itertools.product(range(4), repeat=od.n_symbols))
    blocks = stcode.encode_od(od, c.points[np.array(cands)])
    for _ in range(20):
        G = crandn(rng, nr, od.streams)
        idx = rng.integers(0, 4, od.n_symbols)
        Y = G @ stcode.encode_od(od, c.points[idx]) + 0.6 * crandn(rng, nr, od.T)
        cost = np.sum(np.abs(Y - G @ blocks) ** 2, axis=(-2, -1))
        ml = np.array(cands[int(np.argmin(cost))])
        soft, _ = detection.matched_filter_od(EffectiveChannel(G, od.streams, 0.36), od, Y)
        np.testing.assert_array_equal(c.slice(soft), ml)


def test_matched_filter_rejects_wrong_streams(rng):
    with pytest.raises(ValidationError):
        detection.matched_filter_od(crandn(rng, 3, 3), stcode.OrthogonalDesign("alamouti"),
                                    np.zeros((3, 2)))


def test_matched_filter_rejects_non_orthogonal(rng, monkeypatch):
    od = stcode.OrthogonalDesign("alamouti")
    basis = od.real_basis()
    basis[0, 0, 1] += 0.5       # break the design
    monkeypatch.setattr(stcode.OrthogonalDesign, "real_basis", lambda self: basis)
    with pytest.raises(ValidationError, match="not orthogonal"):
        detection.matched_filter_od(crandn(rng, 2, 2), od, np.zeros((2, 2)))
