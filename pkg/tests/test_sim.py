from types import SimpleNamespace

import numpy as np
import pytest

from beamnull import sim
from beamnull.channel import ChannelConfig
from beamnull.exceptions import ValidationError
from beamnull.schemes import SchemeSpec
from beamnull.sim import LinkSystem, Stopping

S = SchemeSpec.parse
GRID = np.arange(0.0, 21.0, 5.0)


def curve(x, y, se=None):
    y = np.asarray(y, dtype=float)
    return SimpleNamespace(rho_grid_db=np.asarray(x, dtype=float), values=y,
                           stderr=np.zeros_like(y) if se is None else np.asarray(se, dtype=float),
                           label=str(id(y)))


# -- capacity ------------------------------------------------------------------

def test_single_antenna_schemes_coincide():
    cfg = ChannelConfig(1, 1, 4)
    eq, wf, bf = sim.estimate_capacity([S("eq"), S("wf"), S("bf")], cfg, GRID, 500)
    np.testing.assert_allclose(wf.mean_bits, eq.mean_bits, rtol=1e-12)
    np.testing.assert_allclose(bf.mean_bits, eq.mean_bits, rtol=1e-12)
    with pytest.raises(ValidationError):
        sim.estimate_capacity(S("bn"), cfg, GRID, 500)


def test_two_antenna_bf_equals_bn():
    bf, bn = sim.estimate_capacity([S("bf"), S("bn")], ChannelConfig(2, 2, 5), GRID, 500)
    np.testing.assert_allclose(bf.mean_bits, bn.mean_bits, rtol=1e-12)


def test_rayleigh_single_link_closed_form():
    # E log2(1 + rho |h|^2) = e^{1/rho} E1(1/rho) / ln 2 for |h|^2 ~ Exp(1).
    from scipy.special import exp1
    c = sim.estimate_capacity(S("eq"), ChannelConfig(1, 1, 6), GRID, 20000)
    rho = 10 ** (GRID / 10)
    ref = np.exp(1 / rho) * exp1(1 / rho) / np.log(2)
    assert np.all(np.abs(c.mean_bits - ref) <= 4 * c.stderr)


def test_capacity_orderings_and_monotonicity():
    specs = [S("eq"), S("wf"), S("bf"), S("bn"), S("bf2"), S("bn2")]
    curves = sim.estimate_capacity(specs, ChannelConfig(4, 4, 7), np.arange(-5, 31, 2.5), 400)
    eq, wf, bf, bn, bf2, bn2 = [c.mean_bits for c in curves]
    for c in (eq, bf, bn, bf2, bn2):
        assert np.all(wf >= c - 1e-12)
    for c in curves:
        assert np.all(np.diff(c.mean_bits) > 0)
        assert np.all(c.stderr > 0)
    assert bf[0] > eq[0] and eq[-1] > bf[-1]


def test_capacity_rx_sum_axis_is_a_shift():
    cfg = ChannelConfig(3, 3, 2)
    shift = 10 * np.log10(3)
    a = sim.estimate_capacity(S("bn"), cfg, GRID, 300, snr_reference="rx-sum")
    b = sim.estimate_capacity(S("bn"), cfg, GRID - shift, 300)
    np.testing.assert_allclose(a.mean_bits, b.mean_bits, rtol=1e-12)
    assert a.snr_reference == "rx-sum"


def test_capacity_worker_invariance():
    cfg = ChannelConfig(3, 3, 11)
    specs = [S("wf"), S("bn")]
    one = sim.estimate_capacity(specs, cfg, GRID, 700, workers=1)
    two = sim.estimate_capacity(specs, cfg, GRID, 700, workers=3)
    for a, b in zip(one, two):
        assert a.mean_bits.tobytes() == b.mean_bits.tobytes()
        assert a.stderr.tobytes() == b.stderr.tobytes()


def test_independent_draws_per_scheme():
    cfg = ChannelConfig(2, 2, 5)
    bf, bn = sim.estimate_capacity([S("bf"), S("bn")], cfg, GRID, 3000, common=False)
    assert not np.array_equal(bf.mean_bits, bn.mean_bits)
    # same distribution, so the two estimates agree statistically
    assert np.all(np.abs(bf.mean_bits - bn.mean_bits) <= 4 * np.hypot(bf.stderr, bn.stderr))


def test_capacity_input_checks():
    cfg = ChannelConfig(2, 2)
    with pytest.raises(ValidationError):
        sim.estimate_capacity(S("bf"), cfg, GRID, 50)
    with pytest.raises(ValidationError):
        sim.estimate_capacity(S("bf"), cfg, [], 500)
    with pytest.raises(ValidationError):
        sim.estimate_capacity(S("bf"), cfg, GRID, 500, snr_reference="per-antenna")


# -- crossovers ----------------------------------------------------------------

def test_crossover_of_lines():
    x = np.arange(0, 11.0)
    found = sim.detect_crossover(curve(x, 2 * x), curve(x, x + 3.5))
    assert len(found) == 1
    assert found[0].rho_db == pytest.approx(3.5, abs=1e-12)
    assert found[0].confident and not found[0].multiple


def test_crossover_at_grid_point_and_zero_run():
    x = np.arange(0, 7.0)
    found = sim.detect_crossover(curve(x, x - 3), curve(x, np.zeros(7)))
    assert [c.rho_db for c in found] == [3.0]
    d = np.array([-1, -1, 0, 0, 1, 1.0])
    found = sim.detect_crossover(curve(np.arange(6.0), d), curve(np.arange(6.0), np.zeros(6)))
    assert found[0].rho_db == pytest.approx(2.5)


def test_no_crossover_for_identical_curves():
    x = np.arange(5.0)
    assert sim.detect_crossover(curve(x, x ** 2), curve(x, x ** 2)) == []


def test_multiple_and_unconfident_crossings():
    x = np.linspace(0.1, 3 * np.pi - 0.1, 50)   # crossings at pi and 2 pi
    found = sim.detect_crossover(curve(x, np.sin(x)), curve(x, np.zeros(50)))
    assert len(found) == 2 and all(c.multiple for c in found)
    noisy = sim.detect_crossover(curve(x, x - 1, se=np.full(50, 5.0)), curve(x, np.zeros(50)))
    assert len(noisy) == 1 and not noisy[0].confident


def test_crossover_grid_mismatch():
    with pytest.raises(ValidationError):
        sim.detect_crossover(curve([0, 1], [0, 1]), curve([0, 2], [1, 0]))


def test_best_regions():
    x = np.arange(0, 11.0)
    a, b, c = curve(x, 5 - 0 * x), curve(x, x), curve(x, 2 * x - 8)
    a.label, b.label, c.label = "A", "B", "C"
    regions = sim.best_regions([a, b, c])
    assert [r[0] for r in regions] == ["A", "B", "C"]
    assert regions[0][2] == pytest.approx(5.0)
    assert regions[1][2] == pytest.approx(8.0)
    assert regions[-1][2] == 10.0


# -- link systems ----------------------------------------------------------------

@pytest.mark.parametrize("scheme,code,nt,rate,const", [
    ("bf", "none", 4, 3, "8psk"),
    ("bf", "none", 4, 6, "64qam"),
    ("bn", "none", 4, 6, "qpsk"),
    ("bn", "ldc", 4, 3, "bpsk"),
    ("bf2", "alamouti", 5, 2, "qpsk"),
    ("bn2", "rate34", 5, 3, "16qam"),
    ("bf2", "ldc", 5, 6, "8psk"),
])
def test_system_for_rate(scheme, code, nt, rate, const):
    sys_ = sim.system_for_rate(S(scheme), rate, nt, code=code)
    assert sys_.constellation == const
    assert sys_.rate(nt) == pytest.approx(rate)


def test_system_for_rate_unreachable():
    with pytest.raises(ValidationError):
        sim.system_for_rate(S("bn"), 4, 4)          # 4/3 bits per symbol
    with pytest.raises(ValidationError):
        sim.system_for_rate(S("bf"), 5, 4)          # no 32-point constellation


def test_link_system_validation():
    with pytest.raises(ValidationError):
        LinkSystem(S("wf"), "qpsk")
    with pytest.raises(ValidationError):
        LinkSystem(S("bn"), "qpsk", "mf")
    with pytest.raises(ValidationError):
        LinkSystem(S("bf2"), "qpsk", "mmse", "alamouti")
    with pytest.raises(ValidationError):
        LinkSystem(S("bn"), "qpsk", "zf")
    with pytest.raises(ValidationError):
        LinkSystem(S("bn"), "16qam", "ml", "ldc").build(4)      # 16^9 candidates
    assert LinkSystem(S("bn"), "qpsk").label == "BN/QPSK/MMSE"


@pytest.mark.parametrize("system", [
    LinkSystem(S("bn"), "16qam"),
    LinkSystem(S("bn"), "qpsk", "ml"),
    LinkSystem(S("bn"), "qpsk", code="ldc"),
    LinkSystem(S("bf2"), "8psk", "mf", "alamouti"),
    LinkSystem(S("bn2"), "16qam", "mf", "rate34"),
    LinkSystem(S("bf2"), "qpsk", "ml", "ldc"),
])
def test_noiseless_transmission_is_error_free(system):
    nt = 5 if system.scheme.kind.startswith("md") else 4
    rng = np.random.default_rng(0)
    H = (rng.standard_normal((8, nt, nt)) + 1j * rng.standard_normal((8, nt, nt))) / np.sqrt(2)
    from beamnull import linalg
    from beamnull.schemes import precoder
    Heff = H @ precoder(system.scheme, linalg.svd(H).V)
    bits, dec = sim.transmit(system, Heff, rng, 1e-14, nt)
    np.testing.assert_array_equal(bits, dec)


# -- BER -----------------------------------------------------------------------

def test_ber_invariants():
    cfg = ChannelConfig(2, 2, 3)
    c = sim.simulate_ber(LinkSystem(S("bf"), "qpsk"), cfg, [0, 5, 90], Stopping(100, 20000))
    np.testing.assert_array_equal(c.ber, c.error_counts / c.bit_counts)
    assert c.error_counts[-1] == 0 and c.ber[-1] == 0
    assert list(c.capped) == [False, False, True]
    assert np.all(c.error_counts[:2] >= 100)
    assert c.bit_counts[-1] >= 20000
    assert np.all(c.trials * 2 == c.bit_counts)


def test_ber_worker_invariance():
    cfg = ChannelConfig(3, 3, 8)
    system = LinkSystem(S("bn"), "qpsk", code="ldc")
    one = sim.simulate_ber(system, cfg, [0, 4, 8], Stopping(150, 40000))
    two = sim.simulate_ber(system, cfg, [0, 4, 8], Stopping(150, 40000), workers=3)
    for f in ("ber", "error_counts", "bit_counts", "stderr", "trials", "capped"):
        assert getattr(one, f).tobytes() == getattr(two, f).tobytes()
    a1 = sim.analytic_ber(LinkSystem(S("bn"), "qpsk"), cfg, [0, 4], 600)
    a2 = sim.analytic_ber(LinkSystem(S("bn"), "qpsk"), cfg, [0, 4], 600, workers=2)
    assert a1.ber.tobytes() == a2.ber.tobytes()


def test_bpsk_beamforming_analytic_matches_simulation():
    # BPSK kernel is exact, so both paths estimate the same quantity.
    cfg = ChannelConfig(2, 2, 9)
    system = LinkSystem(S("bf"), "bpsk")
    grid = [0, 4, 8]
    sim_c = sim.simulate_ber(system, cfg, grid, Stopping(2000, 10 ** 6))
    ana = sim.analytic_ber(system, cfg, grid, 20000)
    assert np.all(np.abs(sim_c.ber - ana.ber) <= 3 * np.hypot(sim_c.stderr, ana.stderr))


def test_single_link_bpsk_analytic_closed_form():
    cfg = ChannelConfig(1, 1, 2)
    ana = sim.analytic_ber(LinkSystem(S("bf"), "bpsk"), cfg, GRID, 50000)
    rho = 10 ** (GRID / 10)
    ref = 0.5 * (1 - np.sqrt(rho / (1 + rho)))
    assert np.all(np.abs(ana.ber - ref) <= 4 * ana.stderr)


def test_analytic_rejects_ml_and_bad_input():
    cfg = ChannelConfig(2, 2)
    with pytest.raises(ValidationError):
        sim.analytic_ber(LinkSystem(S("bf"), "qpsk", "ml"), cfg, GRID, 300)
    with pytest.raises(ValidationError):
        sim.simulate_ber(LinkSystem(S("bf"), "qpsk"), cfg, [])
    with pytest.raises(ValidationError):
        sim.simulate_ber(LinkSystem(S("bf"), "qpsk"), cfg, GRID, Stopping(0, 100))


def test_md_od_sinr_matches_alamouti_gain():
    # Matched-filter SINR of Alamouti equals the squared Frobenius norm of H_eff over noise.
    rng = np.random.default_rng(1)
    G = (rng.standard_normal((5, 3, 2)) + 1j * rng.standard_normal((5, 3, 2)))
    g = sim.symbol_sinr(LinkSystem(S("bf2"), "qpsk", "mf", "alamouti"), G, 0.5, 5)
    ref = np.sum(np.abs(G) ** 2, axis=(-2, -1)) / 0.5
    np.testing.assert_allclose(g, np.stack([ref, ref], -1), rtol=1e-12)
