"""Per-realization mathematics of the adaptation schemes.

Six transmit strategies share one channel realization ``H = U diag(sigma) V^H``:

========  ==========================================  =================
kind      precoder                                    streams
========  ==========================================  =================
eq        sqrt(P/Nt) I                                Nt
wf        V diag(sqrt(P_i)), water-filled             active subchannels
bf        sqrt(P) v_1                                 1
bn        sqrt(P/(Nt-1)) Phi, Phi orthogonal to v_Nt  Nt - 1
md-bf     sqrt(P/k) [v_1 .. v_k]                      k
md-bn     sqrt(P/(Nt-k)) Phi_k, Phi_k orthogonal to   Nt - k
          the k weakest right singular vectors
========  ==========================================  =================

Capacities are evaluated in nats and converted to bits only at the public
boundary; the slope helpers work in nats so that their derivative forms
hold without a ``1/ln 2`` factor.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from ._validation import check_count, check_positive, check_singular_values
from .exceptions import ValidationError

LN2 = np.log(2.0)

KINDS = ("eq", "wf", "bf", "bn", "md-bf", "md-bn")

_ALIASES = {
    "eq": ("eq", 1), "equal": ("eq", 1),
    "wf": ("wf", 1), "waterfilling": ("wf", 1),
    "bf": ("bf", 1), "1d-bf": ("bf", 1),
    "bn": ("bn", 1), "1d-bn": ("bn", 1),
}


@dataclass(frozen=True)
class SchemeSpec:
    """Which adaptation scheme to run.

    ``k`` is the number of fed-back eigenvectors and only matters for the
    multi-dimensional kinds; ``bf`` and ``bn`` always use ``k = 1``.
    """

    kind: str
    k: int = 1
    total_power: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scheme kind {self.kind!r}; expected one of {KINDS}")
        check_count(self.k, "k")
        check_positive(self.total_power, "total_power")
        if self.kind in ("bf", "bn", "eq", "wf") and self.k != 1:
            raise ValidationError(f"scheme {self.kind!r} takes k=1, got k={self.k}")

    @classmethod
    def parse(cls, text, total_power=1.0):
        """Parse names such as ``bn``, ``bf2``, ``2d-bn`` or ``md-bn:3``."""
        t = text.strip().lower()
        if t in _ALIASES:
            kind, k = _ALIASES[t]
            return cls(kind, k, total_power)
        for base in ("bf", "bn"):
            if t.startswith(f"md-{base}:"):
                return cls(f"md-{base}", int(t.split(":", 1)[1]), total_power)
            if t.endswith(f"d-{base}") and t[:-len(f"d-{base}")].isdigit():
                k = int(t[:-len(f"d-{base}")])
                return cls(base if k == 1 else f"md-{base}", k, total_power)
            if t.startswith(base) and t[len(base):].isdigit():
                k = int(t[len(base):])
                return cls(base if k == 1 else f"md-{base}", k, total_power)
        raise ValidationError(f"cannot parse scheme name {text!r}")

    @property
    def label(self):
        return {
            "eq": "EQ", "wf": "WF", "bf": "BF", "bn": "BN",
            "md-bf": f"{self.k}D-BF", "md-bn": f"{self.k}D-BN",
        }[self.kind]

    @property
    def token(self):
        """Short name accepted back by :meth:`parse`."""
        if self.kind.startswith("md-"):
            return f"{self.kind[3:]}{self.k}"
        return self.kind

    def validate_for(self, nt):
        """Raise ``ValidationError`` if the scheme cannot run with ``nt`` antennas."""
        if self.kind == "bn" and nt < 2:
            raise ValidationError("beam-nulling needs nt >= 2 (nothing left after nulling)")
        if self.kind.startswith("md-"):
            if self.k > nt // 2:
                raise ValidationError(
                    f"{self.label} needs k <= floor(nt/2) = {nt // 2} feedback vectors"
                )
            if self.kind == "md-bn" and nt - self.k < 1:
                raise ValidationError(f"{self.label} leaves no streams with nt={nt}")
        return self

    def streams(self, nt):
        """Number of transmitted streams, or None for water-filling (realization dependent)."""
        return {
            "eq": nt, "wf": None, "bf": 1, "bn": nt - 1,
            "md-bf": self.k, "md-bn": nt - self.k,
        }[self.kind]

    def feedback_count(self, nt):
        """Number of length-``nt`` complex vectors the receiver feeds back."""
        return {"eq": 0, "wf": nt}.get(self.kind, self.k)


@dataclass(frozen=True)
class PowerAllocation:
    per_subchannel: np.ndarray
    water_level: float

    @property
    def active(self):
        return self.per_subchannel > 0


@dataclass(frozen=True)
class EffectiveChannel:
    """Post-precoding channel ``H F`` including the per-stream amplitude."""

    matrix: np.ndarray
    streams: int
    noise_var: float


# -- capacities --------------------------------------------------------------

def _equal_split_nats(sigma, rho, n):
    """sum_{i<=n} ln(1 + rho/n * lambda_i^2), broadcasting rho against sigma[..., 0]."""
    lam2 = sigma[..., :n] ** 2
    rho = np.asarray(rho, dtype=float)[..., None]
    return np.sum(np.log1p(rho / n * lam2), axis=-1)


def _prep(sigma, rho):
    sigma = check_singular_values(sigma)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValidationError("rho must be non-negative")
    return sigma, rho


def capacity_equal_nats(sigma, rho, nt=None):
    sigma, rho = _prep(sigma, rho)
    nt = sigma.shape[-1] if nt is None else nt
    return _equal_split_nats(sigma, rho, nt)


def capacity_equal(sigma, rho, nt=None):
    """Equal power over all ``nt`` antennas, in bits per channel use."""
    return capacity_equal_nats(sigma, rho, nt) / LN2


def capacity_bf(sigma, rho):
    """Eigen-beamforming on the strongest subchannel, in bits."""
    return capacity_md_bf(sigma, rho, 1)


def capacity_md_bf(sigma, rho, k):
    """k-dimensional beamforming: equal split over the ``k`` strongest subchannels."""
    sigma, rho = _prep(sigma, rho)
    if not 1 <= k <= sigma.shape[-1]:
        raise ValidationError(f"k must be in [1, {sigma.shape[-1]}], got {k}")
    return _equal_split_nats(sigma, rho, k) / LN2


def capacity_bn(sigma, rho, nt=None):
    """Beam-nulling: the weakest subchannel is dropped, equal split over the rest."""
    return capacity_md_bn(sigma, rho, nt, 1)


def capacity_md_bn(sigma, rho, nt=None, k=1):
    """k-dimensional beam-nulling; ``k = 0`` reduces to equal power."""
    sigma, rho = _prep(sigma, rho)
    nt = sigma.shape[-1] if nt is None else nt
    if not 0 <= k < nt:
        raise ValidationError(f"k must be in [0, {nt - 1}], got {k}")
    return _equal_split_nats(sigma, rho, nt - k) / LN2


def waterfill(sigma, P, noise_var):
    """Capacity-optimal power split over parallel subchannels.

    Active-set elimination: start with every subchannel of non-zero gain,
    solve the water level in closed form, drop subchannels that came out
    negative and repeat. Terminates in at most ``len(sigma)`` passes.
    """
    sigma = check_singular_values(sigma)
    if sigma.ndim != 1:
        raise ValidationError("waterfill takes one realization; use waterfill_batch")
    P = check_positive(P, "P")
    noise_var = check_positive(noise_var, "noise_var")
    if not np.any(sigma > 0):
        raise ValidationError("water-filling needs at least one non-zero singular value")

    inv_gain = np.full(sigma.shape, np.inf)
    nz = sigma > 0
    inv_gain[nz] = noise_var / sigma[nz] ** 2
    active = nz.copy()
    while True:
        mu = (P + inv_gain[active].sum()) / active.sum()
        p = np.where(active, mu - inv_gain, 0.0)
        negative = active & (p < 0)
        if not negative.any():
            break
        active &= ~negative
    return PowerAllocation(per_subchannel=np.maximum(p, 0.0), water_level=float(mu))


def waterfill_batch(sigma, P, noise_var):
    """Vectorized water-filling over leading batch dimensions.

    Uses the sorted-prefix form of the active-set rule: with gains in
    descending order the active set is the longest prefix whose last
    member still receives non-negative power.

    Returns ``(powers, water_level)``.
    """
    sigma = check_singular_values(sigma)
    n = sigma.shape[-1]
    with np.errstate(divide="ignore"):
        inv_gain = np.where(sigma > 0, noise_var / np.where(sigma > 0, sigma, 1.0) ** 2, np.inf)
    m = np.arange(1, n + 1)
    csum = np.cumsum(np.where(np.isfinite(inv_gain), inv_gain, 0.0), axis=-1)
    mu_m = (P + csum) / m
    ok = (mu_m - inv_gain >= 0) & np.isfinite(inv_gain)
    # Largest m with ok; ok[..., 0] is true whenever sigma_1 > 0.
    m_star = n - np.argmax(ok[..., ::-1], axis=-1)
    mu = np.take_along_axis(mu_m, (m_star - 1)[..., None], axis=-1)[..., 0]
    powers = np.where(m <= m_star[..., None], mu[..., None] - inv_gain, 0.0)
    return np.maximum(powers, 0.0), mu


def kkt_residual(sigma, P, noise_var, alloc):
    """Largest violation of the water-filling optimality conditions."""
    sigma = np.asarray(sigma, dtype=float)
    p = alloc.per_subchannel
    mu = alloc.water_level
    with np.errstate(divide="ignore"):
        inv_gain = np.where(sigma > 0, noise_var / np.where(sigma > 0, sigma, 1.0) ** 2, np.inf)
    act = p > 0
    r = [abs(p.sum() - P) / P]
    if act.any():
        r.append(np.max(np.abs(mu - inv_gain[act] - p[act])))
    if (~act).any():
        r.append(max(0.0, float(np.max(mu - inv_gain[~act]))))
    return float(max(r))


def capacity_wf_nats(sigma, P, noise_var):
    powers, _ = waterfill_batch(sigma, P, noise_var)
    sigma = np.asarray(sigma, dtype=float)
    return np.sum(np.log1p(powers * sigma ** 2 / noise_var), axis=-1)


def capacity_wf(sigma, P, noise_var):
    """Water-filling capacity in bits."""
    return capacity_wf_nats(sigma, P, noise_var) / LN2


def capacity(spec, sigma, rho, nt=None):
    """Instantaneous capacity of ``spec`` in bits, vectorized over ``sigma``.

    ``rho`` must be a scalar here (water-filling needs a single noise level).
    """
    sigma = check_singular_values(sigma)
    nt = sigma.shape[-1] if nt is None else nt
    rho = float(rho)
    if rho == 0:
        return np.zeros(sigma.shape[:-1])
    if spec.kind == "eq":
        return capacity_equal(sigma, rho, nt)
    if spec.kind == "wf":
        return capacity_wf(sigma, spec.total_power, spec.total_power / rho)
    if spec.kind in ("bf", "md-bf"):
        return capacity_md_bf(sigma, rho, spec.k)
    return capacity_md_bn(sigma, rho, nt, spec.k)


# -- slopes ------------------------------------------------------------------

def capacity_slope(spec, sigma, rho, nt=None):
    """Derivative of the instantaneous capacity (nats) with respect to linear rho.

    ``sum_i 1 / (rho + n / lambda_i^2)`` over the ``n`` streams of the
    scheme; subchannels with zero gain contribute nothing.
    """
    sigma = check_singular_values(sigma)
    nt = sigma.shape[-1] if nt is None else nt
    if spec.kind == "wf":
        raise ValidationError("no closed-form slope for water-filling; use slope_curve")
    n = spec.streams(nt)
    lam2 = sigma[..., :n] ** 2
    rho = np.asarray(rho, dtype=float)[..., None]
    with np.errstate(divide="ignore"):
        terms = np.where(lam2 > 0, lam2 / (rho * lam2 + n), 0.0)
    return terms.sum(axis=-1)


def slope_curve(capacity_nats, rho_grid):
    """Finite-difference slope of a capacity curve sampled on a uniform linear-rho grid.

    Central differences inside, one-sided at the ends. The grid runs along
    the last axis of ``capacity_nats``.
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    capacity_nats = np.asarray(capacity_nats, dtype=float)
    if rho_grid.ndim != 1 or rho_grid.size < 3:
        raise ValidationError("slope_curve needs a 1-D grid of at least 3 points")
    if capacity_nats.shape[-1] != rho_grid.size:
        raise ValidationError("capacity and grid lengths differ")
    step = np.diff(rho_grid)
    if np.any(step <= 0) or not np.allclose(step, step[0], rtol=1e-9, atol=0):
        raise ValidationError("slope_curve needs a uniform increasing linear-rho grid")
    return np.gradient(capacity_nats, rho_grid, axis=-1, edge_order=1)


# -- precoders and effective channels ----------------------------------------

def feedback_vectors(spec, V):
    """The right singular vectors a receiver feeds back for ``spec``."""
    nt = V.shape[-1]
    if spec.kind in ("bf", "md-bf"):
        return V[..., :, :spec.k]
    if spec.kind in ("bn", "md-bn"):
        return V[..., :, nt - spec.k:]
    if spec.kind == "wf":
        return V
    return V[..., :, :0]


def precoder(spec, V):
    """Precoding matrix (amplitude included) for fixed-stream schemes.

    Accepts a stack of ``V`` matrices. Water-filling depends on the noise
    level and is built by :func:`build_effective_channel` instead.
    """
    nt = V.shape[-1]
    spec.validate_for(nt)
    P = spec.total_power
    if spec.kind == "eq":
        F = np.broadcast_to(np.eye(nt, dtype=np.complex128), V.shape).copy()
    elif spec.kind in ("bf", "md-bf"):
        F = V[..., :, :spec.k]
    elif spec.kind in ("bn", "md-bn"):
        F = linalg.orthonormal_complement(V[..., :, nt - spec.k:])
    else:
        raise ValidationError("water-filling has no fixed precoder")
    return np.sqrt(P / spec.streams(nt)) * F


def build_effective_channel(spec, chan, noise_var):
    """Effective channel seen by the receiver for one realization."""
    noise_var = check_positive(noise_var, "noise_var")
    H = chan.H
    nr, nt = H.shape
    if chan.svd.V.shape != (nt, nt) or chan.svd.U.shape != (nr, nr):
        raise ValidationError("SVD dimensions do not match the channel matrix")
    spec.validate_for(nt)
    if spec.kind == "wf":
        alloc = waterfill(chan.svd.sigma[:nt], spec.total_power, noise_var)
        act = alloc.active
        F = chan.svd.V[:, act] * np.sqrt(alloc.per_subchannel[act])
    else:
        F = precoder(spec, chan.svd.V)
    return EffectiveChannel(matrix=H @ F, streams=F.shape[1], noise_var=noise_var)


def subspace_coupling(spec, V):
    """``B = [v_1 .. v_{Nt-k}]^H Phi_k``; unitary for beam-nulling precoders."""
    nt = V.shape[-1]
    if spec.kind not in ("bn", "md-bn"):
        raise ValidationError("subspace coupling is defined for beam-nulling schemes")
    phi = linalg.orthonormal_complement(V[..., :, nt - spec.k:])
    return linalg._conj_t(V[..., :, :nt - spec.k]) @ phi
