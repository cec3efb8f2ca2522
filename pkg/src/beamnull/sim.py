"""Monte Carlo engines: ergodic capacity, bit-level BER and the analytic BER path.

Work is split into channel chunks (see :mod:`beamnull.channel`). Every
chunk is a pure function of the run configuration and its index, and
results are always reduced in chunk order, so any worker count gives
bit-identical output.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from . import channel as chn
from . import detection, linalg, modem, stcode
from ._validation import check_count
from .exceptions import ValidationError
from .schemes import SchemeSpec, capacity, precoder

SNR_REFERENCES = ("total", "rx-sum")


def rho_linear(rho_db, nr, snr_reference="total"):
    """Linear ``rho = P / sigma_z^2`` for an SNR axis value in dB.

    ``total`` reads the axis as ``rho`` itself. ``rx-sum`` reads it as the
    received SNR summed over the ``nr`` receive antennas, ``nr * rho``.
    """
    if snr_reference not in SNR_REFERENCES:
        raise ValidationError(f"snr_reference must be one of {SNR_REFERENCES}")
    rho = 10.0 ** (np.asarray(rho_db, dtype=float) / 10.0)
    return rho / nr if snr_reference == "rx-sum" else rho


def _map_chunks(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# -- capacity ------------------------------------------------------------------

@dataclass
class CapacityCurve:
    scheme: SchemeSpec
    rho_grid_db: np.ndarray
    mean_bits: np.ndarray
    stderr: np.ndarray
    trials: int
    master_seed: int
    snr_reference: str = "total"

    @property
    def label(self):
        return self.scheme.label

    @property
    def values(self):
        return self.mean_bits


def _capacity_chunk(specs, cfg, rho, chunk, n, common=True):
    if common:
        sigma = np.linalg.svd(chn.sample_chunk(cfg, chunk)[:n], compute_uv=False)
    total = np.empty((len(specs), len(rho)))
    total_sq = np.empty_like(total)
    for a, spec in enumerate(specs):
        if not common:
            sigma = np.linalg.svd(chn.sample_chunk(cfg, chunk, a + 1)[:n], compute_uv=False)
        for b, r in enumerate(rho):
            c = capacity(spec, sigma, r, cfg.nt)
            total[a, b] = c.sum()
            total_sq[a, b] = np.dot(c, c)
    return total, total_sq


def estimate_capacity(specs, cfg, rho_grid_db, trials, *, snr_reference="total", workers=1,
                      common=True):
    """Ergodic capacity curves with common random numbers.

    Every scheme and every SNR point sees the same ``trials`` channel draws.
    With ``common=False`` each scheme gets its own independent draws
    instead (SNR points still share them).

    Parameters
    ----------
    specs : SchemeSpec or sequence of SchemeSpec
    cfg : ChannelConfig
    rho_grid_db : array_like
        SNR axis in dB, interpreted according to ``snr_reference``.
    trials : int
        At least 100.

    Returns
    -------
    CapacityCurve or list of CapacityCurve
    """
    single = isinstance(specs, SchemeSpec)
    specs = [specs] if single else list(specs)
    check_count(trials, "trials", minimum=100)
    grid = np.asarray(rho_grid_db, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("rho grid must be a non-empty 1-D sequence")
    for s in specs:
        s.validate_for(cfg.nt)
    rho = rho_linear(grid, cfg.nr, snr_reference)

    jobs = [(specs, cfg, rho, c, n, common) for c, n in chn.chunk_bounds(trials)]
    parts = _map_chunks(_capacity_chunk, jobs, workers)
    total = np.zeros((len(specs), grid.size))
    total_sq = np.zeros_like(total)
    for t, tq in parts:
        total += t
        total_sq += tq
    mean = total / trials
    var = np.maximum(total_sq - trials * mean ** 2, 0.0) / (trials - 1)
    se = np.sqrt(var / trials)
    curves = [
        CapacityCurve(scheme=s, rho_grid_db=grid.copy(), mean_bits=mean[i], stderr=se[i],
                      trials=trials, master_seed=cfg.master_seed, snr_reference=snr_reference)
        for i, s in enumerate(specs)
    ]
    return curves[0] if single else curves


# -- crossovers ----------------------------------------------------------------

@dataclass(frozen=True)
class Crossover:
    rho_db: float
    confident: bool
    multiple: bool = False


def _diff_crossings(x, d):
    """Linear-interpolated sign changes of ``d`` over ``x``; zero runs cross at their middle."""
    nz = np.flatnonzero(d != 0)
    out = []
    for i, j in zip(nz[:-1], nz[1:]):
        if np.sign(d[i]) == np.sign(d[j]):
            continue
        if j == i + 1:
            out.append((x[i] - d[i] * (x[j] - x[i]) / (d[j] - d[i]), i, j))
        else:
            out.append((0.5 * (x[i + 1] + x[j - 1]), i, j))
    return out


def detect_crossover(curve_a, curve_b):
    """SNRs (dB) where curve A and curve B swap order.

    A crossing is marked not ``confident`` when the difference at either
    bracketing grid point is within two combined standard errors. Every
    crossing carries ``multiple=True`` when more than one was found.
    """
    x = np.asarray(curve_a.rho_grid_db, dtype=float)
    if not np.array_equal(x, np.asarray(curve_b.rho_grid_db, dtype=float)):
        raise ValidationError("curves must share the same SNR grid")
    d = np.asarray(curve_a.values, dtype=float) - np.asarray(curve_b.values, dtype=float)
    se = np.hypot(np.asarray(curve_a.stderr, dtype=float), np.asarray(curve_b.stderr, dtype=float))
    found = _diff_crossings(x, d)
    multiple = len(found) > 1
    return [
        Crossover(rho_db=float(xc), confident=bool(abs(d[i]) >= 2 * se[i] and abs(d[j]) >= 2 * se[j]),
                  multiple=multiple)
        for xc, i, j in found
    ]


def best_regions(curves):
    """Intervals of the SNR axis over which each curve is the largest.

    Returns ``[(label, start_db, end_db), ...]`` in increasing SNR with
    boundaries placed at the interpolated crossover of the two neighbours.
    """
    x = np.asarray(curves[0].rho_grid_db, dtype=float)
    vals = np.array([c.values for c in curves])
    win = np.argmax(vals, axis=0)
    regions = []
    start = float(x[0])
    for g in range(1, x.size):
        if win[g] != win[g - 1]:
            a, b = win[g - 1], win[g]
            d = vals[a, g - 1:g + 1] - vals[b, g - 1:g + 1]
            edge = x[g - 1] - d[0] * (x[g] - x[g - 1]) / (d[1] - d[0])
            regions.append((curves[a].label, start, float(edge)))
            start = float(edge)
    regions.append((curves[win[-1]].label, start, float(x[-1])))
    return regions


# -- link systems --------------------------------------------------------------

RECEIVERS = ("mmse", "ml", "mf")
CODES = ("none", "ldc", "alamouti", "rate34")


@dataclass(frozen=True)
class LinkSystem:
    """Scheme, space-time code, constellation and receiver of a BER experiment."""

    scheme: SchemeSpec
    constellation: str
    receiver: str = "mmse"
    code: str = "none"
    label: str = ""

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise ValidationError(f"receiver must be one of {RECEIVERS}")
        if self.code not in CODES:
            raise ValidationError(f"code must be one of {CODES}")
        if self.scheme.kind == "wf":
            raise ValidationError("BER simulation needs a fixed stream count; water-filling is excluded")
        modem.constellation(self.constellation)
        is_od = self.code in ("alamouti", "rate34")
        if self.receiver == "mf" and not is_od:
            raise ValidationError("the matched-filter receiver needs an orthogonal design")
        if is_od and self.receiver != "mf":
            raise ValidationError("orthogonal designs are detected with the matched filter ('mf')")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    def default_label(self):
        code = {"none": "", "ldc": "+LDC", "alamouti": "+OD", "rate34": "+OD"}[self.code]
        return f"{self.scheme.label}{code}/{modem.constellation(self.constellation).name}/{self.receiver.upper()}"

    def build(self, nt):
        """Resolve to ``(streams, constellation, code or None)`` for ``nt`` antennas."""
        self.scheme.validate_for(nt)
        streams = self.scheme.streams(nt)
        const = modem.constellation(self.constellation)
        code = None if self.code == "none" else stcode.make_code(self.code, streams)
        if self.receiver == "ml":
            n = code.L if code is not None else streams
            if const.size ** n > detection.ML_SEARCH_CAP:
                raise ValidationError(
                    f"ML search space {const.size}^{n} exceeds the cap of {detection.ML_SEARCH_CAP}"
                )
        return streams, const, code

    def block_shape(self, nt):
        """``(symbols per block, channel uses per block)``."""
        streams, _, code = self.build(nt)
        if code is None:
            return streams, 1
        if isinstance(code, stcode.LinearDispersionCode):
            return code.L, code.T
        return code.n_symbols, code.T

    def rate(self, nt):
        """Data rate in bits per channel use."""
        n, T = self.block_shape(nt)
        return modem.constellation(self.constellation).eta * n / T

    def describe(self):
        d = asdict(self)
        d["scheme"] = self.scheme.token
        return d


def system_for_rate(scheme, rate, nt, *, code="none", receiver=None, label=""):
    """Pick the constellation that makes ``scheme`` + ``code`` carry ``rate`` bits per use."""
    if receiver is None:
        receiver = "mf" if code in ("alamouti", "rate34") else "mmse"
    probe = LinkSystem(scheme, "bpsk", receiver if receiver != "ml" else "mmse", code)
    n, T = probe.block_shape(nt)
    eta = rate * T / n
    if abs(eta - round(eta)) > 1e-9 or round(eta) < 1:
        raise ValidationError(
            f"rate {rate} is not reachable with {n} symbols per {T} channel uses"
        )
    const = modem.for_bits_per_symbol(int(round(eta)))
    name = const.name.lower()
    return LinkSystem(scheme, name, receiver, code, label)


@dataclass(frozen=True)
class Stopping:
    """Per-point stopping rule: stop after ``min_errors`` bit errors or ``max_bits`` bits."""

    min_errors: int = 200
    max_bits: int = 10 ** 8


@dataclass
class BerCurve:
    system: LinkSystem
    rho_grid_db: np.ndarray
    ber: np.ndarray
    error_counts: np.ndarray
    bit_counts: np.ndarray
    stderr: np.ndarray
    trials: np.ndarray
    capped: np.ndarray
    master_seed: int
    snr_reference: str = "total"
    kind: str = "simulated"

    @property
    def label(self):
        return self.system.label

    @property
    def values(self):
        return self.ber


@dataclass
class AnalyticBerCurve:
    system: LinkSystem
    rho_grid_db: np.ndarray
    ber: np.ndarray
    stderr: np.ndarray
    trials: int
    master_seed: int
    snr_reference: str = "total"
    kind: str = "analytic"

    @property
    def label(self):
        return self.system.label + " (analytic)"

    @property
    def values(self):
        return self.ber


def _effective(system, cfg, chunk, n):
    H = chn.sample_chunk(cfg, chunk)[:n]
    return H @ precoder(system.scheme, linalg.svd(H).V)


def transmit(system, Heff, rng, noise_var, nt):
    """Send one random block per effective channel and detect it.

    Returns ``(bits, decoded_bits)`` with shape (batch, bits per block).
    """
    streams, const, code = system.build(nt)
    B = Heff.shape[0]
    n_sym, T = system.block_shape(nt)
    bits = rng.integers(0, 2, size=(B, n_sym * const.eta), dtype=np.uint8)
    x = const.points[const.bits_to_indices(bits)]
    if code is None:
        S = x[..., None]
    elif isinstance(code, stcode.LinearDispersionCode):
        S = stcode.ldc_encode(code, x)
    else:
        S = stcode.encode_od(code, x)
    nr = Heff.shape[-2]
    Y = Heff @ S + chn.complex_normal(rng, (B, nr, T), noise_var)

    if system.receiver == "mf":
        soft, _ = detection.matched_filter_od(Heff, code, Y)
        hard = const.slice(soft)
    else:
        G = Heff if code is None else stcode.equivalent_channel(Heff, code)
        y = stcode.vec_blocks(Y)
        if system.receiver == "ml":
            hard = detection.ml_detect(G, y, const)
        else:
            W, _ = detection.mmse_filters(G, noise_var, sinr=False)
            soft = np.einsum("bij,bi->bj", np.conj(W), y)
            hard = const.slice(soft)
    return bits, const.indices_to_bits(hard)


def _ber_chunk(system, cfg, rho, points, chunk, n):
    """Error counts of one chunk at each SNR point listed in ``points``."""
    Heff = _effective(system, cfg, chunk, n)
    out = []
    for p in points:
        rng = chn.stream_rng(cfg.master_seed, chn.DATA_STREAM, p, chunk)
        bits, decoded = transmit(system, Heff, rng, system.scheme.total_power / rho[p], cfg.nt)
        out.append(np.count_nonzero(bits != decoded, axis=-1))
    return out, bits.shape[-1]


def simulate_ber(system, cfg, rho_grid_db, stopping=Stopping(), *, snr_reference="total",
                 workers=1):
    """Bit-level BER curve of ``system``.

    Each trial draws one channel realization and sends one code block over
    it. Chunks of trials are processed in index order, each chunk serving
    every SNR point that is still running, until a point's error count
    reaches ``stopping.min_errors`` or its bit count reaches
    ``stopping.max_bits``. The data at (point, chunk) comes from its own
    random stream and the stopping point is decided on the ordered prefix
    of chunks, so the result does not depend on ``workers``. Points that
    stop on the bit cap are flagged in ``capped``.
    """
    system.build(cfg.nt)
    grid = np.asarray(rho_grid_db, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("rho grid must be a non-empty 1-D sequence")
    check_count(stopping.min_errors, "min_errors")
    check_count(stopping.max_bits, "max_bits")
    rho = rho_linear(grid, cfg.nr, snr_reference)
    n_pts = grid.size

    per_trial = [[] for _ in range(n_pts)]
    e_sum = [0] * n_pts
    b_sum = [0] * n_pts
    active = list(range(n_pts))
    chunk = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while active:
            wave = range(chunk, chunk + max(1, workers))
            jobs = [(system, cfg, rho, tuple(active), c, chn.CHUNK_SIZE) for c in wave]
            if pool is None:
                results = [_ber_chunk(*j) for j in jobs]
            else:
                results = list(pool.map(_ber_chunk, *zip(*jobs)))
            for counts, bpt in results:
                for p, e in zip(jobs[0][3], counts):
                    if p not in active:
                        continue
                    per_trial[p].append(e)
                    e_sum[p] += int(e.sum())
                    b_sum[p] += e.size * bpt
                    if e_sum[p] >= stopping.min_errors or b_sum[p] >= stopping.max_bits:
                        active.remove(p)
                chunk += 1
    finally:
        if pool is not None:
            pool.shutdown()

    se, trials = [], []
    for p in range(n_pts):
        frac = np.concatenate(per_trial[p]) / bpt
        trials.append(frac.size)
        se.append(float(frac.std(ddof=1) / math.sqrt(frac.size)))
    errs = np.array(e_sum, dtype=np.int64)
    bits_tot = np.array(b_sum, dtype=np.int64)
    return BerCurve(system=system, rho_grid_db=grid, ber=errs / bits_tot, error_counts=errs,
                    bit_counts=bits_tot, stderr=np.array(se), trials=np.array(trials),
                    capped=errs < stopping.min_errors, master_seed=cfg.master_seed,
                    snr_reference=snr_reference)


def symbol_sinr(system, Heff, noise_var, nt):
    """Per-symbol post-detection SINR for every block symbol, shape (batch, n_symbols)."""
    _, _, code = system.build(nt)
    if system.receiver == "ml":
        raise ValidationError("no closed-form SINR for the ML receiver")
    if system.receiver == "mf":
        Greal = detection._real_equivalent(Heff, code.real_basis())
        gain = np.sum(Greal ** 2, axis=-2)
        return 0.5 * (gain[..., 0::2] + gain[..., 1::2]) / noise_var
    G = Heff if code is None else stcode.equivalent_channel(Heff, code)
    _, gamma = detection.mmse_filters(G, noise_var)
    return gamma


def _sinr_chunk(system, cfg, rho, chunk, n):
    Heff = _effective(system, cfg, chunk, n)
    return np.stack([symbol_sinr(system, Heff, system.scheme.total_power / r, cfg.nt)
                     for r in rho])


def analytic_ber(system, cfg, rho_grid_db, trials, *, snr_reference="total", workers=1):
    """Ensemble average of the closed-form BER kernel at each stream's SINR.

    Uses the same channel draws as :func:`simulate_ber` with the same seed.
    """
    system.build(cfg.nt)
    check_count(trials, "trials")
    grid = np.asarray(rho_grid_db, dtype=float)
    rho = rho_linear(grid, cfg.nr, snr_reference)
    const = modem.constellation(system.constellation)
    jobs = [(system, cfg, rho, c, n) for c, n in chn.chunk_bounds(trials)]
    sinr = np.concatenate(_map_chunks(_sinr_chunk, jobs, workers), axis=1)
    stats = [modem.ber_average_analytic(sinr[p], const) for p in range(grid.size)]
    return AnalyticBerCurve(system=system, rho_grid_db=grid,
                            ber=np.array([m for m, _ in stats]),
                            stderr=np.array([s for _, s in stats]), trials=trials,
                            master_seed=cfg.master_seed, snr_reference=snr_reference)
