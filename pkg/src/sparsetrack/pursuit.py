"""Greedy sparse recovery: D-OMP tracking, per-slot OMP and linear LS.

D-OMP carries the previous slot's support and estimate forward. Each slot it
adds the single unselected column best correlated with the residual against
the previous estimate, re-solves least squares on the enlarged support, and
prunes every coefficient whose magnitude does not exceed a noise-derived
threshold.

All solvers accept an optional :class:`OpCounters` that tallies complex
multiplications, restricted least-squares solves and column correlations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg

from .channel import ModelParams, ParameterError
from .measurement import MeasurementSystem, Observation, equivalent_noise_sigma

log = logging.getLogger(__name__)

__all__ = [
    "RankError",
    "CapacityError",
    "OpCounters",
    "TrackerState",
    "compute_threshold",
    "restricted_ls",
    "domp_step",
    "domp_track",
    "omp_solve",
    "linear_ls_solve",
]

RANK_TOL = 1e-10
RESIDUAL_TOL = 1e-8
# coefficients this far below the largest one are round-off, pruned even when p_th == 0
ZERO_TOL = 1e-10


class RankError(np.linalg.LinAlgError):
    """Restricted columns (or ``phi phi^H``) are numerically rank deficient."""


class CapacityError(RuntimeError):
    """The tracked support would exceed the configured capacity."""


@dataclass
class OpCounters:
    complex_mults: int = 0
    ls_solves: int = 0
    correlations: int = 0

    def __iadd__(self, other: "OpCounters") -> "OpCounters":
        self.complex_mults += other.complex_mults
        self.ls_solves += other.ls_solves
        self.correlations += other.correlations
        return self

    def as_dict(self) -> dict:
        return {
            "complex_mults": self.complex_mults,
            "ls_solves": self.ls_solves,
            "correlations": self.correlations,
        }


@dataclass(frozen=True)
class TrackerState:
    """Carried D-OMP state after slot ``t`` (``t = 0`` before any data)."""

    support: tuple[int, ...]
    estimate: np.ndarray
    p_th: float
    t: int = 0

    @classmethod
    def empty(cls, N: int, p_th: float) -> "TrackerState":
        return cls(support=(), estimate=np.zeros(N, dtype=np.complex128), p_th=float(p_th), t=0)

    @property
    def support_array(self) -> np.ndarray:
        return np.asarray(self.support, dtype=np.intp)


def compute_threshold(params: ModelParams) -> float:
    """Pruning threshold ``alpha * sigma_n * sqrt(M) / (sigma_phi * N)``."""
    return params.alpha * equivalent_noise_sigma(params.M, params.N, params.sigma_n, params.sigma_phi)


def _gram_schmidt_solve(A: np.ndarray, y: np.ndarray, counters: Optional[OpCounters]):
    """Least squares via classical Gram-Schmidt with one reorthogonalisation pass.

    Returns ``(x, residual)``. Raises :class:`RankError` when a column's
    orthogonalised norm drops below ``RANK_TOL`` times its original norm.
    """
    M, k = A.shape
    Q = np.empty((M, k), dtype=np.complex128)
    R = np.zeros((k, k), dtype=np.complex128)
    mults = 0
    for j in range(k):
        v = A[:, j].copy()
        col_norm = np.linalg.norm(v)
        if j:
            for _ in range(2):
                c = Q[:, :j].conj().T @ v
                v -= Q[:, :j] @ c
                R[:j, j] += c
            mults += 4 * M * j
        nrm = np.linalg.norm(v)
        mults += 2 * M
        if col_norm == 0.0 or nrm < RANK_TOL * col_norm:
            raise RankError(f"restricted column {j} is numerically dependent (norm ratio {nrm / max(col_norm, 1e-300):.3g})")
        R[j, j] = nrm
        Q[:, j] = v / nrm
    r = np.array(y, dtype=np.complex128, copy=True)
    z = np.empty(k, dtype=np.complex128)
    for j in range(k):
        z[j] = np.vdot(Q[:, j], r)
        r -= z[j] * Q[:, j]
    mults += 2 * M * k
    x = scipy.linalg.solve_triangular(R, z, lower=False)
    mults += k * (k + 1) // 2
    if counters is not None:
        counters.complex_mults += mults
        counters.ls_solves += 1
    return x, r


def restricted_ls(
    sys: MeasurementSystem,
    y: np.ndarray,
    support: Iterable[int],
    counters: Optional[OpCounters] = None,
    check: bool = True,
) -> np.ndarray:
    """Minimise ``||phi h - y||_2`` over ``h`` supported on ``support``.

    Returns a length-``N`` vector that is zero off the support. With
    ``check=True`` the normal-equation residual ``phi_S^H r`` is verified to
    vanish within ``1e-8 * ||y||``.
    """
    idx = np.asarray(sorted(set(int(i) for i in support)), dtype=np.intp)
    h = np.zeros(sys.N, dtype=np.complex128)
    if idx.size == 0:
        return h
    if idx.size > sys.M:
        raise RankError(f"support of size {idx.size} exceeds M={sys.M}")
    if idx[0] < 0 or idx[-1] >= sys.N:
        raise ParameterError(f"support indices out of range [0, {sys.N})")
    y = np.asarray(y, dtype=np.complex128)
    A = sys.phi[:, idx]
    x, r = _gram_schmidt_solve(A, y, counters)
    if check:
        ortho = np.abs(A.conj().T @ r).max()
        scale = np.linalg.norm(y)
        if ortho > RESIDUAL_TOL * max(scale, np.finfo(float).tiny) and ortho > 1e-300:
            raise RankError(f"least-squares residual not orthogonal: {ortho:.3g} vs ||y||={scale:.3g}")
    h[idx] = x
    return h


def _correlate(sys: MeasurementSystem, r: np.ndarray, counters: Optional[OpCounters]) -> np.ndarray:
    # |phi_i^H r| for every column i
    lam = np.abs(r.conj() @ sys.phi)
    if counters is not None:
        counters.complex_mults += sys.M * sys.N
        counters.correlations += sys.N
    return lam


def _argmax_excluding(lam: np.ndarray, excluded: np.ndarray) -> int:
    lam = lam.copy()
    lam[excluded] = -np.inf
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return int(np.argmax(lam))


def domp_step(
    tracker: TrackerState,
    obs: Observation | np.ndarray,
    sys: MeasurementSystem,
    counters: Optional[OpCounters] = None,
    max_support: Optional[int] = None,
) -> TrackerState:
    """Process one slot of D-OMP.

    1. residual against the previous estimate, ``y+ = y - phi h_prev``;
    2. pick the unselected column maximising ``|phi_i^H y+|`` (lowest index
       on ties) and add it to the support;
    3. least squares on the enlarged support, against ``y`` itself;
    4. drop every support index whose coefficient magnitude is ``<= p_th``
       (or at round-off level, ``<= ZERO_TOL`` times the largest one).
    """
    if isinstance(obs, Observation):
        y, t = obs.y, obs.t
        if t != tracker.t + 1:
            raise ParameterError(f"tracker at slot {tracker.t} cannot take observation for slot {t}")
    else:
        y, t = obs, tracker.t + 1
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (sys.M,):
        raise ParameterError(f"observation has shape {y.shape}, expected ({sys.M},)")

    prev = tracker.support_array
    cap = sys.M - 1 if max_support is None else min(sys.M - 1, int(max_support))
    if prev.size + 1 > cap:
        raise CapacityError(f"support would grow to {prev.size + 1}, capacity is {cap}")

    if prev.size:
        y_plus = y - sys.phi[:, prev] @ tracker.estimate[prev]
        if counters is not None:
            counters.complex_mults += sys.M * prev.size
    else:
        y_plus = y
    lam = _correlate(sys, y_plus, counters)
    new = _argmax_excluding(lam, prev)
    assert new not in tracker.support

    merged = np.sort(np.append(prev, new))
    h = restricted_ls(sys, y, merged, counters)

    mags = np.abs(h[merged])
    keep_mask = mags > _prune_level(mags, tracker.p_th)
    drop = merged[~keep_mask]
    if counters is not None:
        counters.complex_mults += merged.size
    if drop.size:
        h[drop] = 0.0
        log.debug("slot %d: added %d, pruned %s (p_th=%.4g)", t, new, drop.tolist(), tracker.p_th)
    keep = merged[keep_mask]
    assert keep.size == 0 or np.abs(h[keep]).min() > tracker.p_th
    return TrackerState(support=tuple(int(i) for i in keep), estimate=h, p_th=tracker.p_th, t=t)


def _prune_level(mags: np.ndarray, p_th: float) -> float:
    if mags.size == 0:
        return p_th
    return max(p_th, ZERO_TOL * float(mags.max()))


def _prune(h: np.ndarray, p_th: float) -> tuple[np.ndarray, np.ndarray]:
    nz = np.flatnonzero(h)
    mags = np.abs(h[nz])
    keep = nz[mags > _prune_level(mags, p_th)]
    out = np.zeros_like(h)
    out[keep] = h[keep]
    return out, keep


def domp_track(
    sys: MeasurementSystem,
    observations: Sequence[Observation] | np.ndarray,
    p_th: float | ModelParams,
    counters: Optional[OpCounters] = None,
    cold_start: bool = False,
    K: Optional[int] = None,
    max_support: Optional[int] = None,
) -> list[TrackerState]:
    """Run D-OMP over a sequence of observations.

    ``observations`` is either a list of :class:`Observation` or an array of
    shape ``(T, M)``. ``p_th`` may be given directly or as model parameters
    from which the threshold is computed. With ``cold_start=True`` slot 1 is
    handled by a full ``K``-iteration OMP solve followed by pruning, which
    removes the one-tap-per-slot acquisition delay.
    """
    if isinstance(p_th, ModelParams):
        if K is None:
            K = int(round(p_th.K))
        p_th = compute_threshold(p_th)
    if cold_start and (K is None or K < 0):
        raise ParameterError("cold start needs a sparsity level K")
    if isinstance(observations, np.ndarray):
        observations = [Observation(y=row, t=i + 1) for i, row in enumerate(observations)]

    tracker = TrackerState.empty(sys.N, p_th)
    states = []
    for k, obs in enumerate(observations):
        if cold_start and k == 0:
            h = omp_solve(sys, obs.y, K, counters)
            h, keep = _prune(h, p_th)
            tracker = TrackerState(tuple(int(i) for i in keep), h, float(p_th), obs.t)
        else:
            tracker = domp_step(tracker, obs, sys, counters, max_support=max_support)
        states.append(tracker)
    return states


def omp_solve(
    sys: MeasurementSystem,
    y: np.ndarray,
    K: int,
    counters: Optional[OpCounters] = None,
) -> np.ndarray:
    """Standard OMP with a fixed number of iterations ``K``.

    Each iteration correlates the residual with every unselected column,
    adds the best one (lowest index on ties) and re-solves least squares on
    the selected set.
    """
    K = int(K)
    if K < 0 or K > sys.M:
        raise ParameterError(f"need 0 <= K <= M, got K={K}")
    y = np.asarray(y, dtype=np.complex128)
    h = np.zeros(sys.N, dtype=np.complex128)
    selected: list[int] = []
    r = y
    for _ in range(K):
        lam = _correlate(sys, r, counters)
        selected.append(_argmax_excluding(lam, np.asarray(selected, dtype=np.intp)))
        h = restricted_ls(sys, y, selected, counters)
        idx = np.asarray(sorted(selected))
        r = y - sys.phi[:, idx] @ h[idx]
        if counters is not None:
            counters.complex_mults += sys.M * idx.size
    return h


def linear_ls_solve(
    sys: MeasurementSystem,
    y: np.ndarray,
    counters: Optional[OpCounters] = None,
) -> np.ndarray:
    """Minimum-norm solution ``phi^H (phi phi^H)^{-1} y``.

    ``y`` may be a single observation of length ``M`` or a stack of shape
    ``(T, M)``; the Gram matrix is factored once per call.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[-1] != sys.M or y.ndim > 2:
        raise ParameterError(f"y has shape {y.shape}, expected (..., {sys.M})")
    gram = sys.phi @ sys.phi.conj().T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RankError("phi phi^H is not positive definite") from exc
    diag = np.abs(np.diag(factor[0]))
    if diag.min() <= 1e-12 * diag.max():
        raise RankError("phi phi^H is numerically singular")
    z = scipy.linalg.cho_solve(factor, y.T)
    h = (sys.phi.conj().T @ z).T
    if counters is not None:
        n_rhs = 1 if y.ndim == 1 else y.shape[0]
        M, N = sys.M, sys.N
        counters.complex_mults += M * M * N + M**3 // 6 + n_rhs * (M * M + M * N)
        counters.ls_solves += 1
    return h
