"""Constellations, Gray bit mapping and closed-form BER kernels."""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from ._validation import check_count
from .exceptions import ValidationError


def gray(n):
    n = np.asarray(n)
    return n ^ (n >> 1)


def _int_to_bits(values, width):
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values)[..., None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-average-energy constellation with a Gray labelling.

    Attributes
    ----------
    kind : {"psk", "qam"}
    eta : int
        Bits per symbol.
    points : ndarray of complex, shape (2**eta,)
    labels : ndarray of uint8, shape (2**eta, eta)
        ``labels[m]`` are the bits carried by ``points[m]``, MSB first.
    """

    kind: str
    eta: int
    points: np.ndarray
    labels: np.ndarray

    @property
    def size(self):
        return self.points.size

    @property
    def name(self):
        if self.kind == "psk":
            return {1: "BPSK", 2: "QPSK"}.get(self.eta, f"{self.size}PSK")
        return f"{self.size}QAM"

    def _label_ints(self):
        return self.labels @ (1 << np.arange(self.eta - 1, -1, -1))

    def bits_to_indices(self, bits):
        bits = np.asarray(bits)
        if bits.shape[-1] % self.eta:
            raise ValidationError(
                f"bit count {bits.shape[-1]} is not a multiple of eta={self.eta}"
            )
        groups = bits.reshape(*bits.shape[:-1], -1, self.eta).astype(np.int64)
        label = groups @ (1 << np.arange(self.eta - 1, -1, -1))
        lookup = np.empty(self.size, dtype=np.int64)
        lookup[self._label_ints()] = np.arange(self.size)
        return lookup[label]

    def indices_to_bits(self, idx):
        idx = np.asarray(idx)
        b = self.labels[idx]
        return b.reshape(*idx.shape[:-1], idx.shape[-1] * self.eta) if idx.ndim else b

    def modulate(self, bits):
        """Map a bit array (last axis a multiple of ``eta``) to symbols."""
        return self.points[self.bits_to_indices(bits)]

    def slice(self, symbols):
        """Nearest constellation point index; ties go to the lower index."""
        symbols = np.asarray(symbols)
        d = np.abs(symbols[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def demodulate(self, symbols):
        """Hard-decision bits for soft or hard symbol estimates."""
        return self.indices_to_bits(self.slice(symbols))


def psk(eta):
    """Gray-labelled 2**eta-PSK with a point at phase 0."""
    eta = check_count(eta, "eta")
    M = 2 ** eta
    m = np.arange(M)
    points = np.exp(2j * np.pi * m / M)
    if eta == 1:
        points = np.array([1.0 + 0j, -1.0 + 0j])
    return Constellation("psk", eta, points, _int_to_bits(gray(m), eta))


def qam(eta):
    """Square Gray-labelled 2**eta-QAM (even ``eta`` only)."""
    eta = check_count(eta, "eta", minimum=2)
    if eta % 2:
        raise ValidationError("rectangular QAM is only provided for even eta")
    half = eta // 2
    side = 2 ** half
    levels = 2 * np.arange(side) - (side - 1)
    i, q = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    i, q = i.ravel(), q.ravel()
    points = levels[i] + 1j * levels[q]
    points = points / np.sqrt(2 * (side ** 2 - 1) / 3)
    labels = np.concatenate([_int_to_bits(gray(i), half), _int_to_bits(gray(q), half)], axis=1)
    return Constellation("qam", eta, points.astype(np.complex128), labels)


_NAMED = {"bpsk": ("psk", 1), "qpsk": ("psk", 2), "4psk": ("psk", 2), "8psk": ("psk", 3),
          "16psk": ("psk", 4), "16qam": ("qam", 4), "64qam": ("qam", 6),
          "256qam": ("qam", 8), "4qam": ("qam", 2)}


def constellation(name):
    """Look up a constellation by name, e.g. ``"8psk"`` or ``"64qam"``."""
    try:
        kind, eta = _NAMED[name.strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown constellation {name!r}") from None
    return psk(eta) if kind == "psk" else qam(eta)


def for_bits_per_symbol(eta):
    """Default constellation carrying ``eta`` bits: PSK up to 8 points, square QAM above."""
    if eta <= 3:
        return psk(eta)
    if eta % 2 == 0:
        return qam(eta)
    raise ValidationError(f"no constellation carries {eta} bits per symbol (odd, > 3)")


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt(2)) / 2``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def ber_psk(gamma, eta):
    """Bit-error probability of Gray 2**eta-PSK at SNR per bit ``gamma``.

    For ``eta >= 2`` this is the nearest-neighbour form
    ``(2/eta) Q(sqrt(2 eta gamma) sin(pi / 2**eta))``. BPSK uses the exact
    ``Q(sqrt(2 gamma))``; the general form would double it.
    """
    gamma = np.asarray(gamma, dtype=float)
    if eta == 1:
        return q_function(np.sqrt(2.0 * gamma))
    return (2.0 / eta) * q_function(np.sqrt(2.0 * eta * gamma) * np.sin(np.pi / 2 ** eta))


def ber_qam(gamma, eta):
    """Nearest-neighbour bound ``(4/eta) Q(sqrt(3 eta gamma / (2**eta - 1)))`` at SNR per bit ``gamma``.

    Omits the usual ``(1 - 2**(-eta/2))`` factor, so it overstates the
    BER by up to a factor of two for small constellations.
    """
    gamma = np.asarray(gamma, dtype=float)
    return (4.0 / eta) * q_function(np.sqrt(3.0 * eta * gamma / (2 ** eta - 1)))


def ber_kernel(const, symbol_sinr):
    """BER given the per-symbol SINR of an unbiased unit-energy estimate."""
    gamma_b = np.asarray(symbol_sinr, dtype=float) / const.eta
    if const.kind == "psk":
        return ber_psk(gamma_b, const.eta)
    return ber_qam(gamma_b, const.eta)


def ber_average_analytic(sinr, const):
    """Average the BER kernel over an ensemble of per-stream SINRs.

    Parameters
    ----------
    sinr : array_like, shape (trials, streams)
        Per-symbol SINR of every stream in every channel realization.
    const : Constellation

    Returns
    -------
    mean, stderr : float
        Ensemble mean of the per-realization stream-averaged BER and its
        standard error (zero for a single realization).
    """
    sinr = np.atleast_2d(np.asarray(sinr, dtype=float))
    per_trial = ber_kernel(const, sinr).mean(axis=-1)
    n = per_trial.size
    stderr = float(per_trial.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(per_trial.mean()), stderr
