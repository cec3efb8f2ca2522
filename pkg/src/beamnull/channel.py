"""I.i.d. Rayleigh flat-fading channel draws with replayable random streams.

Trials are grouped into fixed-size chunks. Chunk ``c`` of a run seeded with
``master_seed`` is always generated from the stream keyed by
``(master_seed, CHANNEL_STREAM, c)``, so results do not depend on how
chunks are distributed across workers, and any single trial can be
regenerated on its own.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from ._validation import check_count, check_positive
from .exceptions import ValidationError

CHUNK_SIZE = 256

# Stream tags keep channel, data and noise draws independent of each other.
CHANNEL_STREAM = 0
DATA_STREAM = 1


@dataclass(frozen=True)
class ChannelConfig:
    """Antenna counts and the master seed of a run. Requires ``nr >= nt >= 1``."""

    nt: int
    nr: int
    master_seed: int = 0

    def __post_init__(self):
        check_count(self.nt, "nt")
        check_count(self.nr, "nr")
        if self.nr < self.nt:
            raise ValidationError(f"need nr >= nt, got nt={self.nt}, nr={self.nr}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValidationError("master_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    svd: linalg.SvdResult = field(repr=False)
    trial_index: int


@dataclass(frozen=True)
class SnrPoint:
    """Linear SNR ``rho = P / sigma_z^2`` and its dB value."""

    rho: float
    rho_db: float

    @classmethod
    def from_db(cls, rho_db):
        rho_db = float(rho_db)
        return cls(rho=10.0 ** (rho_db / 10.0), rho_db=rho_db)

    @classmethod
    def from_linear(cls, rho):
        rho = check_positive(rho, "rho")
        return cls(rho=rho, rho_db=10.0 * np.log10(rho))


def stream_rng(master_seed, *key):
    """Generator for the substream identified by ``(master_seed, *key)``."""
    return np.random.default_rng([int(master_seed), *[int(k) for k in key]])


def complex_normal(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with total variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_chunk(cfg, chunk_index, substream=None):
    """All ``CHUNK_SIZE`` channel matrices of one chunk, shape (CHUNK_SIZE, nr, nt).

    ``substream`` selects an independent family of draws (used when
    schemes must not share channel realizations).
    """
    key = (CHANNEL_STREAM, chunk_index) if substream is None else \
        (CHANNEL_STREAM, chunk_index, substream)
    rng = stream_rng(cfg.master_seed, *key)
    return complex_normal(rng, (CHUNK_SIZE, cfg.nr, cfg.nt))


def sample_trials(cfg, start, count):
    """Channel matrices for trials ``start .. start + count - 1``."""
    check_count(start, "start", minimum=0)
    check_count(count, "count", minimum=0)
    if count == 0:
        return np.empty((0, cfg.nr, cfg.nt), dtype=np.complex128)
    first, last = start // CHUNK_SIZE, (start + count - 1) // CHUNK_SIZE
    blocks = [sample_chunk(cfg, c) for c in range(first, last + 1)]
    H = np.concatenate(blocks, axis=0)
    off = start - first * CHUNK_SIZE
    return H[off:off + count]


def sample_channel(cfg, trial_index):
    """One channel realization, identical to what any batched run draws for it."""
    check_count(trial_index, "trial_index", minimum=0)
    H = sample_trials(cfg, trial_index, 1)[0]
    return ChannelRealization(H=H, svd=linalg.svd(H), trial_index=trial_index)


def chunk_bounds(trials):
    """``[(chunk_index, n_trials_in_chunk), ...]`` covering ``trials`` trials."""
    out = []
    for c in range(-(-trials // CHUNK_SIZE)):
        out.append((c, min(CHUNK_SIZE, trials - c * CHUNK_SIZE)))
    return out
