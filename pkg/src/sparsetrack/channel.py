"""Dynamic sparse channel process.

The hidden channel at slot ``t`` factors as ``h = s * a`` where ``s`` is a
binary support vector following a two-state Markov chain per tap and ``a`` is
a vector of complex path gains following a Gaussian random walk.

All functions are pure: they take an explicit :class:`numpy.random.Generator`
and return new state objects. ``s`` and ``a`` may carry a leading batch axis
of shape ``(B, N)`` so that many independent chains can be stepped at once;
scripted events only apply to a single chain.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "EventError",
    "ModelParams",
    "ChannelState",
    "ChannelEvent",
    "complex_normal",
    "init_state",
    "step_state",
    "assemble_h",
    "apply_event",
    "simulate",
    "write_trajectory_csv",
]


class ParameterError(ValueError):
    """Raised for out-of-range model or solver parameters."""


class EventError(ValueError):
    """Raised when a scripted event is inconsistent with the channel state."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the channel model, measurement and tracker.

    Parameters
    ----------
    N : int
        Channel length in taps.
    M : int
        Number of measurements per slot, ``0 < M < N``.
    T : int
        Number of time slots.
    p1 : float
        Probability that a tap is active at slot 1.
    p01, p10 : float
        Per-slot birth (0 -> 1) and death (1 -> 0) probabilities.
    sigma_a : float
        Std dev of the per-slot gain innovation.
    sigma_h : float
        Std dev of the initial gains.
    sigma_n : float
        Measurement noise std dev.
    sigma_phi : float
        Std dev of the measurement matrix entries.
    alpha : float
        Pruning threshold multiplier.
    """

    N: int = 200
    M: int = 100
    T: int = 120
    p1: float = 0.025
    p01: float = 0.025 * 0.01 / 0.975
    p10: float = 0.01
    sigma_a: float = 0.05
    sigma_h: float = 1.0
    sigma_n: float = 0.05
    sigma_phi: float = 1.0
    alpha: float = 3.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("N", "M", "T"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ParameterError(f"{name} must be an integer, got {value!r}")
        if not 0 < self.M < self.N:
            raise ParameterError(f"need 0 < M < N, got M={self.M}, N={self.N}")
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        for name in ("p1", "p01", "p10"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        for name in ("sigma_a", "sigma_h", "sigma_n", "sigma_phi", "alpha"):
            value = getattr(self, name)
            if not (value >= 0.0 and np.isfinite(value)):
                raise ParameterError(f"{name} must be finite and >= 0, got {value}")

    @property
    def K(self) -> float:
        """Expected sparsity level ``N * p1``."""
        return self.N * self.p1

    @classmethod
    def stationary(cls, p1: float = 0.025, p10: float = 0.01, **kwargs) -> "ModelParams":
        """Build parameters whose support chain is stationary at ``p1``.

        The birth probability is set to ``p1 * p10 / (1 - p1)`` so that the
        marginal activity probability stays at ``p1`` for every slot.
        """
        if not 0.0 <= p1 < 1.0:
            raise ParameterError(f"stationary support needs p1 in [0, 1), got {p1}")
        return cls(p1=p1, p10=p10, p01=p1 * p10 / (1.0 - p1), **kwargs)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ChannelState:
    """One slot of the hidden process.

    ``s`` holds 0/1 activity flags (``int8``), ``a`` the complex gains. Both
    have shape ``(N,)`` or ``(B, N)``. ``t`` is 1-based.
    """

    s: np.ndarray
    a: np.ndarray
    t: int = 1

    def __post_init__(self):
        s = np.asarray(self.s)
        a = np.asarray(self.a)
        if s.shape != a.shape:
            raise ParameterError(f"s and a shapes differ: {s.shape} vs {a.shape}")
        if not np.isin(s, (0, 1)).all():
            raise ParameterError("s must be binary")
        if self.t < 1:
            raise ParameterError(f"slot index must be >= 1, got {self.t}")
        object.__setattr__(self, "s", s.astype(np.int8, copy=False))
        object.__setattr__(self, "a", a.astype(np.complex128, copy=False))

    @property
    def support(self) -> np.ndarray:
        """Sorted 0-based indices of active taps (single chain only)."""
        if self.s.ndim != 1:
            raise ValueError("support is only defined for a single chain")
        return np.flatnonzero(self.s)

    @property
    def h(self) -> np.ndarray:
        return assemble_h(self)


@dataclass(frozen=True)
class ChannelEvent:
    """A scripted support change applied at the start of slot ``slot``.

    ``indices`` are 0-based tap positions. When ``indices`` is empty and
    ``count`` is positive, ``count`` taps are picked at random when the event
    fires: from the active set for ``force-disappear``, from the inactive set
    for ``force-appear``. This lets one config script the same kind of event
    across Monte-Carlo trials whose supports differ.
    """

    slot: int
    kind: str
    indices: tuple[int, ...] = field(default_factory=tuple)
    count: int = 0

    KINDS = ("force-appear", "force-disappear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown event kind {self.kind!r}; expected one of {self.KINDS}")
        if self.slot < 1:
            raise ParameterError(f"event slot must be >= 1, got {self.slot}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if self.count < 0:
            raise ParameterError("event count must be >= 0")
        if not self.indices and self.count == 0:
            raise ParameterError("event needs explicit indices or a positive count")

    def to_dict(self) -> dict:
        out = {"slot": self.slot, "kind": self.kind, "indices": list(self.indices)}
        if self.count:
            out["count"] = self.count
        return out


def complex_normal(rng: np.random.Generator, sigma: float, size) -> np.ndarray:
    """Draw circularly-symmetric ``CN(0, sigma**2)`` samples.

    Real and imaginary parts are i.i.d. ``N(0, sigma**2 / 2)`` so that
    ``E|x|**2 == sigma**2``.
    """
    shape = (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    z *= sigma / np.sqrt(2.0)
    return z


def _batch_shape(params: ModelParams, batch: int | None) -> tuple[int, ...]:
    return (params.N,) if batch is None else (int(batch), params.N)


def init_state(params: ModelParams, rng: np.random.Generator, batch: int | None = None) -> ChannelState:
    """Draw the slot-1 state: Bernoulli(p1) support, CN(0, sigma_h^2) gains."""
    params.validate()
    shape = _batch_shape(params, batch)
    s = (rng.random(shape) < params.p1).astype(np.int8)
    a = complex_normal(rng, params.sigma_h, shape)
    return ChannelState(s=s, a=a, t=1)


def step_state(state: ChannelState, params: ModelParams, rng: np.random.Generator) -> ChannelState:
    """Advance the process by one slot.

    Every tap's support flag follows the Markov chain with probabilities
    ``p01``/``p10``, and every gain (active or not) takes a random-walk step
    with ``CN(0, sigma_a^2)`` innovations.
    """
    params.validate()
    if state.s.shape[-1] != params.N:
        raise ParameterError(f"state has {state.s.shape[-1]} taps, params say N={params.N}")
    u = rng.random(state.s.shape)
    active = state.s.astype(bool)
    s_next = np.where(active, u >= params.p10, u < params.p01).astype(np.int8)
    a_next = state.a + complex_normal(rng, params.sigma_a, state.a.shape)
    return ChannelState(s=s_next, a=a_next, t=state.t + 1)


def assemble_h(state: ChannelState) -> np.ndarray:
    """Channel vector ``h = s * a``."""
    return np.where(state.s.astype(bool), state.a, 0.0 + 0.0j)


def apply_event(
    state: ChannelState, event: ChannelEvent, params: ModelParams, rng: np.random.Generator
) -> ChannelState:
    """Apply a scripted support change to a single chain.

    Forced appearances redraw the gain from ``CN(0, sigma_h^2)``; a walked
    dormant gain would otherwise have drifted arbitrarily far.
    """
    if state.s.ndim != 1:
        raise EventError("events apply to a single chain, not a batch")
    if event.slot != state.t:
        raise EventError(f"event for slot {event.slot} applied at slot {state.t}")
    N = state.s.shape[0]
    s = state.s.copy()
    a = state.a.copy()

    if event.indices:
        idx = np.asarray(event.indices, dtype=np.intp)
        if idx.min() < 0 or idx.max() >= N:
            raise EventError(f"event indices out of range [0, {N}): {event.indices}")
        if len(set(event.indices)) != len(event.indices):
            raise EventError(f"duplicate event indices: {event.indices}")
    else:
        pool = np.flatnonzero(s == (1 if event.kind == "force-disappear" else 0))
        take = min(event.count, pool.size)
        idx = np.sort(rng.choice(pool, size=take, replace=False)) if take else np.empty(0, np.intp)

    if event.kind == "force-disappear":
        inactive = idx[s[idx] == 0]
        if inactive.size:
            raise EventError(f"force-disappear on inactive taps {inactive.tolist()}")
        s[idx] = 0
    else:
        s[idx] = 1
        a[idx] = complex_normal(rng, params.sigma_h, idx.size)
    return ChannelState(s=s, a=a, t=state.t)


def simulate(
    params: ModelParams,
    rng: np.random.Generator,
    events: Iterable[ChannelEvent] = (),
) -> list[ChannelState]:
    """Generate a full ``T``-slot trajectory, applying events as slots begin."""
    by_slot: dict[int, list[ChannelEvent]] = {}
    for ev in events:
        by_slot.setdefault(ev.slot, []).append(ev)

    def fire(st: ChannelState) -> ChannelState:
        for ev in by_slot.get(st.t, ()):
            st = apply_event(st, ev, params, rng)
        return st

    state = fire(init_state(params, rng))
    states = [state]
    for _ in range(1, params.T):
        state = fire(step_state(state, params, rng))
        states.append(state)
    return states


def write_trajectory_csv(path, states: Sequence[ChannelState], params: ModelParams) -> None:
    """Export a trajectory as CSV.

    The first line is a comment-style header carrying every model parameter
    (``# N=200,M=100,...``), followed by the column header
    ``t,index,s,re_a,im_a`` and one row per active tap (0-based index).
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + ",".join(f"{k}={v!r}" for k, v in params.to_dict().items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "index", "s", "re_a", "im_a"])
        for st in states:
            for i in st.support:
                writer.writerow([st.t, int(i), 1, repr(float(st.a[i].real)), repr(float(st.a[i].imag))])
