"""Fast property checks run by ``beamnull selftest``.

Each check draws its own random instances from a fixed seed and returns
the worst deviation it saw, so the report text is reproducible and can be
hashed.
"""

from dataclasses import dataclass, field
import hashlib

import numpy as np

from . import channel as chn
from . import linalg, schemes, sim
from .channel import ChannelConfig
from .config import RunConfig, parse_system
from .detection import mmse_filters
from .schemes import SchemeSpec

SEED = 20240607
TOL = 1e-10
ORACLE_TOL = 1e-9

# Link systems whose noiseless round trip must be exact: (nt, token, constellation).
ROUND_TRIP_SYSTEMS = (
    (4, "bf", "64qam"), (4, "bn", "qpsk"), (4, "bn/ml", "qpsk"), (4, "bn+ldc", "qpsk"),
    (5, "bf2+alamouti", "64qam"), (5, "bf2+ldc", "8psk"), (5, "bn2+rate34", "256qam"),
    (5, "bn2+ldc", "qpsk"), (4, "eq", "16qam"),
)


def _rng(tag):
    return np.random.default_rng([SEED, tag])


def _channels(rng, n, nr, nt):
    return chn.complex_normal(rng, (n, nr, nt))


def check_phi(n=1000):
    """Max of ``|Phi^H v|`` and ``|Phi^H Phi - I|`` over random unit vectors and k-sets."""
    rng = _rng(1)
    worst = 0.0
    for nt in range(2, 7):
        for k in range(1, nt):
            V = linalg.svd(_channels(rng, n // 5, nt, nt)).V
            Vk = V[..., :, nt - k:]
            phi = linalg.orthonormal_complement(Vk)
            gram = linalg._conj_t(phi) @ phi
            worst = max(worst,
                        float(np.max(np.abs(linalg._conj_t(phi) @ Vk))),
                        float(np.max(np.abs(gram - np.eye(nt - k)))))
    return worst


def check_b_unitary(n=1000):
    """``B^H B = I`` for the BN / MD-BN coupling matrices."""
    rng = _rng(2)
    worst = 0.0
    for nt in range(2, 7):
        for k in range(1, nt // 2 + 1):
            spec = SchemeSpec("bn") if k == 1 else SchemeSpec("md-bn", k)
            V = linalg.svd(_channels(rng, n // 5, nt, nt)).V
            B = schemes.subspace_coupling(spec, V)
            worst = max(worst, float(np.max(np.abs(linalg._conj_t(B) @ B - np.eye(nt - k)))))
    return worst


def check_svd(n=1000):
    rng = _rng(3)
    worst = 0.0
    for nr, nt in ((2, 2), (3, 3), (4, 4), (5, 5), (6, 3)):
        H = _channels(rng, n // 5, nr, nt)
        sv = linalg.svd(H)
        rel = np.linalg.norm(sv.reconstruct() - H, axis=(-2, -1)) / np.linalg.norm(H, axis=(-2, -1))
        worst = max(worst, float(np.max(rel)))
    return worst


def check_waterfill_kkt(n=1000):
    rng = _rng(4)
    worst = 0.0
    for _ in range(n):
        nt = int(rng.integers(1, 7))
        sigma = np.sort(rng.rayleigh(size=nt))[::-1]
        P = float(10 ** rng.uniform(-2, 2))
        noise = float(10 ** rng.uniform(-2, 1))
        alloc = schemes.waterfill(sigma, P, noise)
        worst = max(worst, schemes.kkt_residual(sigma, P, noise, alloc))
    return worst


def check_mmse_sinr(n=1000):
    """Relative gap between the fast SINR and ``1/[(I + G^H G/s)^-1]_ii - 1``."""
    rng = _rng(5)
    worst = 0.0
    for nr, ns in ((3, 2), (4, 3), (5, 3), (4, 4), (8, 4)):
        G = _channels(rng, n // 5, nr, ns)
        s = float(10 ** rng.uniform(-1.5, 1))
        _, gamma = mmse_filters(G, s)
        A = np.eye(ns) + linalg._conj_t(G) @ G / s
        oracle = 1.0 / np.real(np.diagonal(np.linalg.inv(A), axis1=-2, axis2=-1)) - 1.0
        worst = max(worst, float(np.max(np.abs(gamma - oracle) / oracle)))
    return worst


def check_nt2_equivalence(n=1000):
    """Per-realization ``|C_bf - C_bn|`` in bits for 2 transmit antennas."""
    cfg = ChannelConfig(2, 2, SEED)
    H = chn.sample_trials(cfg, 0, n)
    sigma = np.linalg.svd(H, compute_uv=False)
    worst = 0.0
    for rho_db in (-10, 0, 10, 20, 30):
        rho = 10 ** (rho_db / 10)
        d = schemes.capacity(SchemeSpec("bf"), sigma, rho, 2) - \
            schemes.capacity(SchemeSpec("bn"), sigma, rho, 2)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def check_wf_dominance(n=1000):
    """Largest amount by which any scheme beats water-filling (should be <= 0)."""
    rng = _rng(7)
    worst = -np.inf
    for nt in (2, 3, 4, 5):
        sigma = np.linalg.svd(_channels(rng, n // 4, nt, nt), compute_uv=False)
        others = [SchemeSpec(k) for k in ("eq", "bf", "bn")]
        others += [SchemeSpec(f"md-{b}", k) for b in ("bf", "bn") for k in range(2, nt // 2 + 1)]
        for rho_db in (-10, 0, 10, 20, 30):
            rho = 10 ** (rho_db / 10)
            wf = schemes.capacity(SchemeSpec("wf"), sigma, rho, nt)
            for s in others:
                worst = max(worst, float(np.max(schemes.capacity(s, sigma, rho, nt) - wf)))
    return worst


def check_round_trip(n=64):
    """Total bit errors over noiseless transmissions for every scheme/code preset."""
    errors = 0
    for nt, token, const in ROUND_TRIP_SYSTEMS:
        system = parse_system(token, RunConfig(nt=nt, nr=nt, constellation=const))
        cfg = ChannelConfig(nt, nt, SEED)
        H = chn.sample_trials(cfg, 0, n)
        Heff = H @ schemes.precoder(system.scheme, linalg.svd(H).V)
        bits, decoded = sim.transmit(system, Heff, _rng(8), 1e-14, nt)
        errors += int(np.count_nonzero(bits != decoded))
    return errors


@dataclass
class Report:
    lines: list = field(default_factory=list)
    passed: bool = True

    def add(self, name, value, ok, limit):
        self.passed &= bool(ok)
        self.lines.append(f"{'PASS' if ok else 'FAIL'} {name:<22} worst={value:.3e} limit={limit:g}")

    def text(self):
        body = "\n".join(self.lines)
        digest = hashlib.sha256(body.encode()).hexdigest()[:16]
        status = "all properties pass" if self.passed else "FAILURES"
        return f"{body}\n{status}; report hash {digest}"


CHECKS = (
    ("phi-orthogonality", check_phi, TOL),
    ("b-unitarity", check_b_unitary, TOL),
    ("svd-reconstruction", check_svd, TOL),
    ("waterfill-kkt", check_waterfill_kkt, ORACLE_TOL),
    ("mmse-sinr-oracle", check_mmse_sinr, ORACLE_TOL),
    ("nt2-bf-bn-equal", check_nt2_equivalence, ORACLE_TOL),
    ("wf-dominance", check_wf_dominance, ORACLE_TOL),
    ("noiseless-round-trip", check_round_trip, 0),
)


def run(fault=None):
    """Run every check; ``fault`` names a fault to inject (``phi-sign``)."""
    if fault is not None:
        linalg._FAULTS.add(fault)
    try:
        report = Report()
        for name, fn, limit in CHECKS:
            value = fn()
            report.add(name, value, value <= limit, limit)
        return report
    finally:
        linalg._FAULTS.discard(fault)
