"""Measurement matrix construction, noisy observations and matrix file I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ModelParams, ParameterError, complex_normal

__all__ = [
    "MeasurementSystem",
    "Observation",
    "gen_matrix",
    "measure",
    "equivalent_noise_sigma",
    "save_matrix",
    "load_matrix",
]

KINDS = ("gaussian", "toeplitz")
_MAGIC = b"SPTK"
_HEADER = struct.Struct("<4sIIB")


@dataclass(frozen=True, eq=False)
class MeasurementSystem:
    """Time-invariant ``M x N`` complex measurement matrix.

    The array is made read-only on construction so one system can be shared
    across slots and trials.
    """

    phi: np.ndarray
    kind: str = "gaussian"
    sigma_phi: float = 1.0
    training: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown matrix kind {self.kind!r}")
        phi = np.array(self.phi, dtype=np.complex128, copy=True)
        if phi.ndim != 2:
            raise ParameterError(f"phi must be 2-D, got shape {phi.shape}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        if self.training is not None:
            c = np.array(self.training, dtype=np.complex128, copy=True)
            c.setflags(write=False)
            object.__setattr__(self, "training", c)

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.phi, axis=0)


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    t: int = 1


def gen_matrix(params: ModelParams, rng: np.random.Generator, kind: str = "gaussian") -> MeasurementSystem:
    """Draw a measurement matrix with ``CN(0, sigma_phi^2)`` entries.

    ``kind="toeplitz"`` draws a length-``N`` training sequence ``c`` and lays
    it out cyclically, ``phi[i, j] = c[(i - j) mod N]``. Each column is then a
    length-``M`` window of the same sequence, so column energies are equal in
    expectation (exactly equal only when ``M == N``).
    """
    params.validate()
    M, N, sigma = params.M, params.N, params.sigma_phi
    if kind == "gaussian":
        return MeasurementSystem(complex_normal(rng, sigma, (M, N)), "gaussian", sigma)
    if kind == "toeplitz":
        c = complex_normal(rng, sigma, N)
        lag = (np.arange(M)[:, None] - np.arange(N)[None, :]) % N
        return MeasurementSystem(c[lag], "toeplitz", sigma, training=c)
    raise ParameterError(f"unknown matrix kind {kind!r}; expected one of {KINDS}")


def measure(
    sys: MeasurementSystem,
    h: np.ndarray,
    sigma_n: float,
    rng: Optional[np.random.Generator] = None,
    t: int = 1,
) -> Observation:
    """Return ``y = phi @ h + n`` with ``n ~ CN(0, sigma_n^2 I)``.

    ``h`` may be a single vector of length ``N`` or a stack of shape
    ``(T, N)``; in the latter case ``y`` has shape ``(T, M)``. Noise is drawn
    at unit power and then scaled, so sweeping ``sigma_n`` with the same seed
    reuses the same noise realisation.
    """
    h = np.asarray(h)
    if h.shape[-1] != sys.N or h.ndim > 2:
        raise ParameterError(f"h has shape {h.shape}, expected (..., {sys.N})")
    if sigma_n < 0:
        raise ParameterError("sigma_n must be >= 0")
    y = h @ sys.phi.T
    if sigma_n > 0:
        if rng is None:
            raise ParameterError("a random generator is required when sigma_n > 0")
        y = y + sigma_n * complex_normal(rng, 1.0, y.shape)
    return Observation(y=y, t=t)


def equivalent_noise_sigma(M: int, N: int, sigma_n: float, sigma_phi: float) -> float:
    """Std dev of one entry of the pseudo-inverted noise ``pinv(phi) @ n``.

    Uses the approximation ``phi phi^H ~ N sigma_phi^2 I``, giving
    ``sigma_n * sqrt(M) / (sigma_phi * N)``.
    """
    if N <= 0 or sigma_phi <= 0:
        raise ParameterError("equivalent noise needs N > 0 and sigma_phi > 0")
    if M <= 0 or sigma_n < 0:
        raise ParameterError("equivalent noise needs M > 0 and sigma_n >= 0")
    return float(sigma_n * np.sqrt(M) / (sigma_phi * N))


def save_matrix(path, sys: MeasurementSystem) -> None:
    """Write ``phi`` in the little-endian ``SPTK`` binary layout.

    Header: magic ``b"SPTK"``, u32 ``M``, u32 ``N``, u8 kind (0 gaussian,
    1 toeplitz); then ``M * N`` interleaved (re, im) float64 pairs, row-major.
    """
    header = _HEADER.pack(_MAGIC, sys.M, sys.N, KINDS.index(sys.kind))
    body = np.ascontiguousarray(sys.phi).view("<f8") if np.little_endian else sys.phi.astype("<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes(order="C"))


def load_matrix(path, sigma_phi: float = 1.0) -> MeasurementSystem:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, M, N, kind = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if kind >= len(KINDS):
        raise ValueError(f"{path}: unknown kind code {kind}")
    expected = _HEADER.size + 16 * M * N
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    phi = (data[0::2] + 1j * data[1::2]).reshape(M, N)
    return MeasurementSystem(phi, KINDS[kind], sigma_phi)
