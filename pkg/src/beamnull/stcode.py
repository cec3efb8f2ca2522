"""Linear space-time codes run on top of the (MD) beamforming / beam-nulling subspaces.

Transmit blocks are laid out ``streams x T``: row ``s`` is what virtual
antenna ``s`` sends over the ``T`` channel uses of the block.
"""

from dataclasses import dataclass
import json

import numpy as np

from ._validation import check_count
from .exceptions import ValidationError


@dataclass(frozen=True, eq=False)
class LinearDispersionCode:
    """``S = sum_i M_i x_i`` with ``L = streams * T`` dispersion matrices."""

    streams: int
    T: int
    dispersion: np.ndarray  # (L, streams, T)

    @property
    def L(self):
        return self.dispersion.shape[0]

    @property
    def symbols_per_use(self):
        return self.L / self.T

    def operator(self):
        """(streams*T, L) matrix whose column ``i`` is the column-major vec of ``M_i``."""
        return np.swapaxes(self.dispersion, -1, -2).reshape(self.L, -1).T

    def to_json(self):
        mats = [[[[float(v.real), float(v.imag)] for v in row] for row in M]
                for M in self.dispersion]
        return json.dumps({"streams": self.streams, "T": self.T, "L": self.L,
                           "matrices": mats})


def generate_ldc(streams, T=None):
    """Full-rate dispersion family ``M_(a,b) = D^a Pi^b / sqrt(streams)``.

    ``D = diag(1, w, ..., w^(streams-1))`` with ``w = exp(2j pi / streams)``
    and ``Pi^b`` the first ``streams`` rows of the T x T cyclic shift by
    ``b``. The ``streams * T`` matrices are mutually orthogonal in the trace
    inner product, so the stacked operator is unitary and the equivalent
    channel keeps the rank of the effective channel. For square blocks the
    scale is ``1/sqrt(T)``.
    """
    streams = check_count(streams, "streams")
    T = streams if T is None else check_count(T, "T")
    if T < streams:
        raise ValidationError(f"need T >= streams, got T={T}, streams={streams}")
    w = np.exp(2j * np.pi / streams)
    D = np.diag(w ** np.arange(streams))
    shift = np.roll(np.eye(T), 1, axis=1)
    mats = []
    for a in range(streams):
        Da = np.linalg.matrix_power(D, a)
        for b in range(T):
            mats.append(Da @ np.linalg.matrix_power(shift, b)[:streams, :])
    disp = np.array(mats, dtype=np.complex128) / np.sqrt(streams)
    return LinearDispersionCode(streams=streams, T=T, dispersion=disp)


def ldc_encode(code, x):
    """Transmit block(s) for symbol block(s) ``x`` of length ``L``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] != code.L:
        raise ValidationError(f"LDC block needs {code.L} symbols, got {x.shape[-1]}")
    return np.einsum("...l,lst->...st", x, code.dispersion)


def equivalent_channel(eff, code):
    """Stacked channel ``G`` with ``vec(Y) = G x + vec(Z)``.

    ``eff`` is an EffectiveChannel or a (..., nr, streams) array; the result
    has shape (..., nr*T, L) with column ``i`` equal to ``vec(H_eff M_i)``.
    """
    G = np.asarray(getattr(eff, "matrix", eff), dtype=np.complex128)
    if G.shape[-1] != code.streams:
        raise ValidationError(
            f"code is for {code.streams} streams, effective channel has {G.shape[-1]}"
        )
    HM = G[..., None, :, :] @ code.dispersion  # (..., L, nr, T)
    cols = np.swapaxes(HM, -1, -2).reshape(*HM.shape[:-2], -1)
    return np.swapaxes(cols, -1, -2)


def vec_blocks(Y):
    """Column-major vectorization of received blocks (..., nr, T) -> (..., nr*T)."""
    Y = np.asarray(Y)
    return np.swapaxes(Y, -1, -2).reshape(*Y.shape[:-2], -1)


# -- orthogonal designs --------------------------------------------------------

def _alamouti(x):
    x1, x2 = x[..., 0], x[..., 1]
    G = np.stack([np.stack([x1, x2], -1),
                  np.stack([-np.conj(x2), np.conj(x1)], -1)], -2)
    return G


def _rate34(x):
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    z = np.zeros_like(x1)
    c = np.conj
    rows = [
        [x1, x2, x3, z],
        [-c(x2), c(x1), z, x3],
        [-c(x3), z, c(x1), -x2],
        [z, -c(x3), c(x2), x1],
    ]
    return np.stack([np.stack(r, -1) for r in rows], -2)


_DESIGNS = {
    # variant: (streams, T, symbols, T x antennas generator)
    "alamouti": (2, 2, 2, _alamouti),
    "rate34-3": (3, 4, 3, lambda x: _rate34(x)[..., :3]),
    "rate34-4": (4, 4, 3, _rate34),
}


@dataclass(frozen=True)
class OrthogonalDesign:
    """Complex orthogonal space-time block code.

    Blocks are scaled by ``sqrt(T / n_symbols)`` so that a block carries
    ``streams * T`` energy on average, the same as an LDC block.
    """

    variant: str

    def __post_init__(self):
        if self.variant not in _DESIGNS:
            raise ValidationError(
                f"unknown orthogonal design {self.variant!r}; expected one of {sorted(_DESIGNS)}"
            )

    @property
    def streams(self):
        return _DESIGNS[self.variant][0]

    @property
    def T(self):
        return _DESIGNS[self.variant][1]

    @property
    def n_symbols(self):
        return _DESIGNS[self.variant][2]

    @property
    def rate(self):
        return self.n_symbols / self.T

    @property
    def symbols_per_use(self):
        return self.rate

    @property
    def scale(self):
        return np.sqrt(self.T / self.n_symbols)

    def real_basis(self):
        """(2n, streams, T) blocks produced by unit Re/Im parts of each symbol."""
        eye = np.eye(self.n_symbols)
        unit = np.empty((2 * self.n_symbols, self.n_symbols), dtype=np.complex128)
        unit[0::2] = eye
        unit[1::2] = 1j * eye
        return encode_od(self, unit)


def encode_od(od, symbols):
    """Transmit block(s) (..., streams, T) for ``n_symbols`` symbols per block."""
    x = np.asarray(symbols, dtype=np.complex128)
    if x.shape[-1] != od.n_symbols:
        raise ValidationError(
            f"{od.variant} carries {od.n_symbols} symbols per block, got {x.shape[-1]}"
        )
    G = _DESIGNS[od.variant][3](x)
    return od.scale * np.swapaxes(G, -1, -2)


def orthogonality_defect(S):
    """``max |S S^H - c I|`` relative to ``c``, the mean diagonal of ``S S^H``."""
    S = np.asarray(S)
    gram = S @ np.conj(np.swapaxes(S, -1, -2))
    c = np.real(np.trace(gram, axis1=-2, axis2=-1)) / S.shape[-2]
    dev = np.abs(gram - c[..., None, None] * np.eye(S.shape[-2]))
    return float(np.max(dev / np.maximum(c, 1e-300)[..., None, None]))


def make_code(name, streams):
    """Build a code from its short name (``ldc``, ``alamouti``, ``rate34``) for ``streams``."""
    if name == "ldc":
        return generate_ldc(streams)
    if name == "rate34":
        name = f"rate34-{streams}"
    od = OrthogonalDesign(name)
    if od.streams != streams:
        raise ValidationError(f"{name} needs {od.streams} streams, scheme provides {streams}")
    return od
