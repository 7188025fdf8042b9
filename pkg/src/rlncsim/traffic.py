"""Injection and loss processes that drive receptions on arcs and hyperarcs.

Each link runs one :class:`ProcessSpec`: an injection process (Poisson,
deterministic or renewal) thinned by a loss model.  Every injection draws one
outcome from ``{lost} + {K subset of J}``; a two-state Gilbert-Elliott chain
can modulate a whole-packet erasure on top of that draw.  Long-run reception
rates per set ``K`` equal the declared ``z_iJK``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

POISSON = "poisson"
DETERMINISTIC = "deterministic"
RENEWAL = "renewal"
KINDS = (POISSON, DETERMINISTIC, RENEWAL)
RENEWAL_DISTS = ("exponential", "uniform", "constant")

_BLOCK = 64
_EMPTY = frozenset()


class TrafficError(ValueError):
    pass


@dataclass(frozen=True)
class GilbertElliott:
    """Two-state burst-loss chain; stepped once per injected packet."""

    p_good_to_bad: float
    p_bad_to_good: float
    loss_good: float = 0.0
    loss_bad: float = 1.0

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise TrafficError(f"{name}={v} is not a probability")
        if self.p_good_to_bad + self.p_bad_to_good == 0:
            raise TrafficError("Gilbert-Elliott chain must be able to change state")

    @property
    def stationary_bad(self) -> float:
        return self.p_good_to_bad / (self.p_good_to_bad + self.p_bad_to_good)

    @property
    def pass_probability(self) -> float:
        pb = self.stationary_bad
        return (1 - pb) * (1 - self.loss_good) + pb * (1 - self.loss_bad)


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    injection_rate: float
    # (reception set, probability) pairs conditional on surviving the modulation;
    # the probability of a total loss is 1 - sum of these
    outcomes: tuple = ()
    interarrival: tuple = ()  # renewal only: (dist, *params)
    modulation: GilbertElliott | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TrafficError(f"unknown process kind {self.kind!r}")
        if not self.injection_rate > 0:
            raise TrafficError("injection rate must be positive")
        total = sum(p for _, p in self.outcomes)
        if any(p < 0 for _, p in self.outcomes) or total > 1 + 1e-12:
            raise TrafficError(f"reception probabilities must be non-negative and sum to at most 1 (got {total})")
        if self.kind == RENEWAL:
            if not self.interarrival or self.interarrival[0] not in RENEWAL_DISTS:
                raise TrafficError(f"renewal process needs one of {RENEWAL_DISTS}")

    def declared_rates(self) -> dict:
        """Long-run reception rate for each reception set."""
        passing = self.modulation.pass_probability if self.modulation else 1.0
        return {k: self.injection_rate * passing * p for k, p in self.outcomes}

    @property
    def reception_rate(self) -> float:
        return sum(self.declared_rates().values())


def renewal_rate(interarrival: tuple) -> float:
    dist, *params = interarrival
    if dist == "exponential":
        return float(params[0])
    if dist == "uniform":
        a, b = params
        if not 0 <= a <= b or b == 0:
            raise TrafficError("uniform interarrival needs 0 <= a <= b, b > 0")
        return 2.0 / (a + b)
    if dist == "constant":
        return 1.0 / float(params[0])
    raise TrafficError(f"unknown interarrival distribution {dist!r}")


def make_spec(kind: str, declared: dict, injection_rate: float | None = None,
              modulation: GilbertElliott | None = None, interarrival: tuple = ()) -> ProcessSpec:
    """Build a spec whose long-run per-set reception rates equal ``declared``.

    ``injection_rate`` defaults to the smallest rate able to deliver the
    declared total (no i.i.d. loss beyond the modulation).  For renewal
    processes it is fixed by the interarrival distribution.
    """
    declared = {frozenset(k): float(z) for k, z in declared.items() if z > 0}
    passing = modulation.pass_probability if modulation else 1.0
    if passing <= 0:
        raise TrafficError("modulation loses every packet")
    total = sum(declared.values())
    if kind == RENEWAL:
        injection_rate = renewal_rate(interarrival)
    elif injection_rate is None:
        injection_rate = total / passing if total > 0 else 1.0
    scale = injection_rate * passing
    if total > scale * (1 + 1e-12):
        raise TrafficError(f"declared reception rate {total} exceeds deliverable rate {scale}")
    outcomes = tuple(sorted(((k, z / scale) for k, z in declared.items()), key=lambda kp: (len(kp[0]), sorted(kp[0]))))
    return ProcessSpec(kind, float(injection_rate), outcomes, tuple(interarrival), modulation)


class ReceptionEvent(NamedTuple):
    time: float
    link: int
    received: frozenset  # empty when the packet was lost
    seq: int


@dataclass
class ProcessState:
    """Position of one link's process; owns a refillable buffer of draws."""

    link: int = 0
    time: float = 0.0
    seq: int = 0
    bad: bool | None = None  # Gilbert-Elliott state, drawn on first use
    _times: list = field(default_factory=list)
    _sets: list = field(default_factory=list)


def _interarrivals(spec: ProcessSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.kind == POISSON:
        return rng.exponential(1.0 / spec.injection_rate, n)
    if spec.kind == DETERMINISTIC:
        return np.full(n, 1.0 / spec.injection_rate)
    dist, *params = spec.interarrival
    if dist == "exponential":
        return rng.exponential(1.0 / params[0], n)
    if dist == "uniform":
        return rng.uniform(params[0], params[1], n)
    return np.full(n, float(params[0]))


def _refill(spec: ProcessSpec, state: ProcessState, rng: np.random.Generator) -> None:
    gaps = _interarrivals(spec, rng, _BLOCK)
    u = rng.random(_BLOCK)
    sets = [k for k, _ in spec.outcomes]
    cum = np.cumsum([p for _, p in spec.outcomes]) if sets else np.zeros(0)
    idx = np.searchsorted(cum, u, side="right")
    ge = spec.modulation
    if ge is not None:
        steps = rng.random(_BLOCK)
        losses = rng.random(_BLOCK)
        if state.bad is None:
            state.bad = bool(rng.random() < ge.stationary_bad)
    t = state.time
    times, outs = [], []
    for n in range(_BLOCK):
        t += float(gaps[n])
        times.append(t)
        if ge is not None:
            flip = ge.p_bad_to_good if state.bad else ge.p_good_to_bad
            if steps[n] < flip:
                state.bad = not state.bad
            loss = ge.loss_bad if state.bad else ge.loss_good
            if losses[n] < loss:
                outs.append(_EMPTY)
                continue
        i = int(idx[n])
        outs.append(sets[i] if i < len(sets) else _EMPTY)
    # stored reversed so pop() is O(1)
    state._times = times[::-1]
    state._sets = outs[::-1]


def next_event(spec: ProcessSpec, state: ProcessState, rng: np.random.Generator):
    """Advance one injection; returns ``(event, state)``.

    A lost injection comes back as an event with an empty ``received`` set.
    Draws are taken from ``rng`` in fixed-size blocks, so the realised
    sequence does not depend on how far the caller runs.
    """
    if not state._times:
        _refill(spec, state, rng)
    t = state._times.pop()
    k = state._sets.pop()
    state.time = t
    ev = ReceptionEvent(t, state.link, k, state.seq)
    state.seq += 1
    return ev, state


def generate_events(spec: ProcessSpec, horizon: float, rng: np.random.Generator, link: int = 0) -> list:
    """All injection events with time <= horizon (losses included)."""
    state = ProcessState(link=link)
    out = []
    while True:
        ev, state = next_event(spec, state, rng)
        if ev.time > horizon:
            return out
        out.append(ev)


def empirical_rate(events, horizon: float) -> float:
    """Receptions (non-empty sets) per unit time up to ``horizon``."""
    if horizon <= 0:
        raise TrafficError("horizon must be positive")
    return sum(1 for ev in events if ev.time <= horizon and ev.received) / horizon


def empirical_set_rates(events, horizon: float) -> dict:
    if horizon <= 0:
        raise TrafficError("horizon must be positive")
    counts: dict = {}
    for ev in events:
        if ev.time <= horizon and ev.received:
            counts[ev.received] = counts.get(ev.received, 0) + 1
    return {k: c / horizon for k, c in counts.items()}


def rate_tolerance(z: float, horizon: float) -> float:
    """The 5*sqrt(z/horizon) convergence band used for rate checks."""
    return 5.0 * math.sqrt(z / horizon)
