"""Closed-form SNR, threshold and detection formulas for D-OMP."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import norm

from .channel import ModelParams, ParameterError
from .measurement import MeasurementSystem

__all__ = [
    "SnrSetting",
    "snr_of",
    "sigma_n_for_snr",
    "threshold_from_snr",
    "p_detect_persistent",
    "min_detectable_gain",
]

#: returned by :func:`snr_of` for noiseless settings
INFINITE_SNR = math.inf


@dataclass(frozen=True)
class SnrSetting:
    gamma_db: float
    K: float
    M: int
    N: int
    sigma_h: float = 1.0
    sigma_phi: float = 1.0
    alpha: float = 3.0

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if math.isnan(self.gamma_db):
            raise ParameterError("gamma_db must not be NaN")
        if self.N <= 0 or self.M <= 0:
            raise ParameterError("M and N must be positive")

    @classmethod
    def from_params(cls, params: ModelParams, gamma_db: float, K: float | None = None) -> "SnrSetting":
        return cls(
            gamma_db=gamma_db,
            K=params.K if K is None else K,
            M=params.M,
            N=params.N,
            sigma_h=params.sigma_h,
            sigma_phi=params.sigma_phi,
            alpha=params.alpha,
        )

    @property
    def normalized_noise(self) -> float:
        """``sqrt(M K / (10^(gamma/10) N^2))``, the equivalent-noise std per unit ``sigma_h``."""
        if self.gamma_db == math.inf:
            return 0.0
        if self.gamma_db == -math.inf:
            return math.inf
        return math.sqrt(self.M * self.K / (10.0 ** (self.gamma_db / 10.0) * self.N**2))


def snr_of(params: ModelParams, K: float | None = None) -> float:
    """Receiver SNR in dB, ``10 log10(K sigma_phi^2 sigma_h^2 / sigma_n^2)``.

    Returns ``math.inf`` when ``sigma_n == 0``.
    """
    K = params.K if K is None else K
    if params.sigma_n == 0:
        return INFINITE_SNR
    return 10.0 * math.log10(K * params.sigma_phi**2 * params.sigma_h**2 / params.sigma_n**2)


def sigma_n_for_snr(gamma_db: float, params: ModelParams, K: float | None = None) -> float:
    """Noise std that yields ``gamma_db`` under :func:`snr_of`."""
    K = params.K if K is None else K
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    if params.sigma_phi <= 0 or params.sigma_h <= 0:
        raise ParameterError("sigma_phi and sigma_h must be positive")
    return params.sigma_phi * params.sigma_h * math.sqrt(K) * 10.0 ** (-gamma_db / 20.0)


def threshold_from_snr(setting: SnrSetting) -> float:
    """Pruning threshold written in terms of SNR: ``alpha sigma_h sqrt(M K / (10^(gamma/10) N^2))``."""
    if setting.alpha == 0:
        return 0.0
    return setting.alpha * setting.sigma_h * setting.normalized_noise


def p_detect_persistent(setting: SnrSetting) -> float:
    """Probability that a persistent tap survives pruning.

    ``2 (1 - Psi(alpha sqrt(M K / (10^(gamma/10) N^2))))`` with ``Psi`` the
    standard normal CDF. The two-sided tail treats the tap as real Gaussian
    with std ``sigma_h``.
    """
    if setting.alpha == 0:
        return 1.0
    x = setting.alpha * setting.normalized_noise
    return float(min(1.0, max(0.0, 2.0 * norm.sf(x))))


def min_detectable_gain(
    sys: MeasurementSystem,
    noise: np.ndarray,
    i: int,
    excluded: Iterable[int] = (),
) -> float:
    """Smallest appearing-tap magnitude that guarantees selection of column ``i``.

    For each competitor ``j`` (not ``i``, not excluded) the sufficient bound is
    ``(|phi_i^H n| + |phi_j^H n|) / (|phi_i^H phi_i| - |phi_j^H phi_i|)``;
    the returned value is the maximum over competitors. Returns ``inf`` if any
    denominator is non-positive.
    """
    excluded = {int(j) for j in excluded}
    i = int(i)
    if i in excluded:
        raise ParameterError(f"index {i} is in the excluded set")
    if not 0 <= i < sys.N:
        raise ParameterError(f"index {i} out of range [0, {sys.N})")
    noise = np.asarray(noise, dtype=np.complex128)
    phi = sys.phi
    mask = np.ones(sys.N, dtype=bool)
    mask[list(excluded | {i})] = False
    if not mask.any():
        return 0.0
    noise_corr = np.abs(noise.conj() @ phi)          # |phi_j^H n|
    cross = np.abs(phi[:, i].conj() @ phi)           # |phi_i^H phi_j| == |phi_j^H phi_i|
    own = cross[i]
    denom = own - cross[mask]
    if np.any(denom <= 0):
        return math.inf
    return float(np.max((noise_corr[i] + noise_corr[mask]) / denom))
