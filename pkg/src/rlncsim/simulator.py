"""Discrete-event simulation of random linear coding over a lossy network.

One trial owns all of its state: per-link reception processes, node
memories, sink decoders and a time-ordered event queue.  Randomness comes
from named substreams of a single seed (traffic per link, coding per node,
payload), so a trial is reproducible and running it for longer never changes
what happened earlier.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import flows
from .coding import DecoderState, MessageSet, NodeMemory, encode
from .galois import field as gf_field
from .network import Network
from .traffic import POISSON, GilbertElliott, ProcessSpec, ProcessState, make_spec, next_event

FIXED = "fixed"
RATELESS = "rateless"

# event priorities at equal time: receptions first
_RECEPTION = 0
_INJECTION = 1

# substream tags
_TRAFFIC, _CODING, _PAYLOAD = 0, 1, 2


class ConfigError(ValueError):
    pass


def link_reception_sets(net: Network) -> list:
    """Declared ``{K: z}`` for each link, as floats."""
    if net.is_wireless:
        return [{k: float(z) for k, z in h.receptions.items()} for h in net.hyperarcs]
    return [{frozenset({a.tail}): float(a.z)} for a in net.arcs]


def uniform_processes(net: Network, kind: str = POISSON, loss: float = 0.0,
                      modulation: GilbertElliott | None = None, interarrival: tuple = ()) -> tuple:
    """The same process family on every link, tuned to the declared rates.

    ``loss`` is an extra i.i.d. per-packet loss probability: the injection
    rate is raised to ``z / (1 - loss)`` so receptions still average ``z``.
    """
    if not 0.0 <= loss < 1.0:
        raise ConfigError("loss must be in [0, 1)")
    specs = []
    for declared in link_reception_sets(net):
        total = sum(declared.values())
        passing = modulation.pass_probability if modulation else 1.0
        inj = total / passing / (1.0 - loss) if total > 0 else 1.0
        specs.append(make_spec(kind, declared, injection_rate=inj, modulation=modulation, interarrival=interarrival))
    return tuple(specs)


@dataclass(frozen=True)
class SimConfig:
    network: Network
    source: int
    sinks: tuple
    K: int
    processes: tuple  # one ProcessSpec per arc/hyperarc, in network order
    rho: int = 32
    m: int = 8
    mode: str = FIXED
    delta: float | None = None
    seed: int = 0
    time_cap: float | None = None  # rateless only; defaults to 50 K / C
    compact_memory: bool = False
    check_every: int = 16  # verify payload == gamma . messages on every n-th packet

    def __post_init__(self):
        net = self.network
        if not 0 <= self.source < net.n_nodes:
            raise ConfigError("source not in network")
        if not self.sinks:
            raise ConfigError("sink set is empty")
        if any(not 0 <= t < net.n_nodes for t in self.sinks):
            raise ConfigError("sink not in network")
        if self.source in self.sinks:
            raise ConfigError("source cannot be a sink")
        if len(set(self.sinks)) != len(self.sinks):
            raise ConfigError("duplicate sinks")
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.rho < 1:
            raise ConfigError("rho must be at least 1")
        if len(self.processes) != len(net.links()):
            raise ConfigError(f"need one process per link: {len(net.links())} links, {len(self.processes)} specs")
        if any(not isinstance(p, ProcessSpec) for p in self.processes):
            raise ConfigError("processes must be ProcessSpec instances")
        if self.mode == FIXED:
            if self.delta is None or self.delta < 0:
                raise ConfigError("fixed mode needs a coding delay delta >= 0")
        elif self.mode == RATELESS:
            if self.time_cap is not None and self.time_cap <= 0:
                raise ConfigError("time cap must be positive")
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")

    @cached_property
    def capacity(self) -> float:
        return float(flows.multicast_capacity(self.network, self.source, self.sinks))

    @property
    def cap(self) -> float:
        if self.time_cap is not None:
            return self.time_cap
        if self.capacity <= 0:
            raise ConfigError("multicast capacity is zero; set an explicit time cap")
        return 50.0 * self.K / self.capacity

    @property
    def q(self) -> int:
        return 1 << self.m

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class TrialOutcome:
    trial: int
    success: tuple  # per sink
    ranks: tuple
    completion_time: float | None  # rateless: time when every sink could decode
    sink_completion: tuple  # per sink: time rank reached K, or None
    timed_out: bool
    horizon: float
    injected: tuple  # per link
    received: tuple  # per link: {K: count}
    rank_trajectories: tuple  # per sink: ((time, rank), ...)
    decoded_correctly: bool
    packets_checked: int = 0
    inconsistent_packets: int = 0

    @property
    def all_success(self) -> bool:
        return all(self.success)

    def empirical_rates(self) -> tuple:
        if self.horizon <= 0:
            return tuple({} for _ in self.received)
        return tuple({k: c / self.horizon for k, c in r.items()} for r in self.received)

    def row(self) -> dict:
        """Flat CSV-ready record."""
        out = {"trial": self.trial}
        for i, (s, r, c) in enumerate(zip(self.success, self.ranks, self.sink_completion)):
            out[f"success_{i}"] = int(s)
            out[f"rank_{i}"] = r
            out[f"completion_{i}"] = "" if c is None else repr(c)
        out["completion_time"] = "" if self.completion_time is None else repr(self.completion_time)
        out["timed_out"] = int(self.timed_out)
        out["horizon"] = repr(self.horizon)
        for i, (n, r) in enumerate(zip(self.injected, self.received)):
            out[f"injected_{i}"] = n
            out[f"received_{i}"] = sum(r.values())
        out["decoded_correctly"] = int(self.decoded_correctly)
        return out


class EventQueue:
    """Pending events ordered by (time, priority, link, sequence)."""

    def __init__(self):
        self._heap: list = []
        self.popped = 0

    def push(self, time: float, priority: int, link: int, seq: int, payload=None) -> None:
        heapq.heappush(self._heap, (time, priority, link, seq, payload))

    def pop(self):
        self.popped += 1
        return heapq.heappop(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        return len(self._heap)


def _stream(seed: int, trial: int, *tag) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, *tag)))


def run_trial(cfg: SimConfig, trial: int = 0) -> TrialOutcome:
    net = cfg.network
    gf = gf_field(cfg.m)
    links = net.links()
    heads = [lk.head for lk in links]
    msgs = MessageSet.random(gf, cfg.K, cfg.rho, _stream(cfg.seed, trial, _PAYLOAD))

    senders = set(heads)
    memories = {}
    for v in senders:
        if v == cfg.source:
            memories[v] = NodeMemory.for_source(msgs, compact=cfg.compact_memory)
        else:
            memories[v] = NodeMemory(gf, cfg.K, cfg.rho, compact=cfg.compact_memory)
    coding_rng = {v: _stream(cfg.seed, trial, _CODING, v) for v in senders}
    decoders = {t: DecoderState(gf, cfg.K, cfg.rho) for t in cfg.sinks}
    sink_index = {t: i for i, t in enumerate(cfg.sinks)}
    completion = [None] * len(cfg.sinks)
    trajectories = [[] for _ in cfg.sinks]

    fixed = cfg.mode == FIXED
    stop = cfg.delta if fixed else cfg.cap

    states, traffic_rng = [], []
    queue = EventQueue()
    for i, spec in enumerate(cfg.processes):
        rng = _stream(cfg.seed, trial, _TRAFFIC, i)
        st = ProcessState(link=i)
        ev, st = next_event(spec, st, rng)
        states.append(st)
        traffic_rng.append(rng)
        queue.push(ev.time, _INJECTION, i, ev.seq, ev)

    injected = [0] * len(links)
    received = [dict() for _ in links]
    created = checked = bad = 0
    remaining = len(cfg.sinks)
    now = 0.0
    timed_out = False
    done_at = None

    while queue:
        t, prio, link, seq, item = queue.pop()
        if t > stop:
            timed_out = not fixed
            break
        now = t
        if prio == _INJECTION:
            ev = item
            injected[link] += 1
            if ev.received:
                packet = encode(memories[heads[link]], coding_rng[heads[link]])
                created += 1
                if cfg.check_every and created % cfg.check_every == 0:
                    checked += 1
                    if not packet.consistent_with(msgs):
                        bad += 1
                queue.push(t, _RECEPTION, link, seq, (ev.received, packet))
            nxt, states[link] = next_event(cfg.processes[link], states[link], traffic_rng[link])
            queue.push(nxt.time, _INJECTION, link, nxt.seq, nxt)
            continue
        rset, packet = item
        counts = received[link]
        counts[rset] = counts.get(rset, 0) + 1
        for j in rset:
            mem = memories.get(j)
            if mem is not None:
                mem.store(packet)
            dec = decoders.get(j)
            if dec is not None and dec.rank < cfg.K:
                before = dec.rank
                dec.receive(packet)
                if dec.rank > before:
                    i = sink_index[j]
                    trajectories[i].append((t, dec.rank))
                    if dec.rank == cfg.K:
                        completion[i] = t
                        remaining -= 1
        if not fixed and remaining == 0:
            done_at = t
            break

    if fixed:
        horizon = cfg.delta
    else:
        horizon = done_at if done_at is not None else cfg.cap
    if not fixed and done_at is None:
        timed_out = True
    correct = True
    for t_node, dec in decoders.items():
        if dec.decodable and dec.try_decode() != msgs:
            correct = False
    return TrialOutcome(
        trial=trial,
        success=tuple(decoders[t].decodable for t in cfg.sinks),
        ranks=tuple(decoders[t].rank for t in cfg.sinks),
        completion_time=done_at,
        sink_completion=tuple(completion),
        timed_out=timed_out,
        horizon=float(horizon),
        injected=tuple(injected),
        received=tuple(received),
        rank_trajectories=tuple(tuple(x) for x in trajectories),
        decoded_correctly=correct,
        packets_checked=checked,
        inconsistent_packets=bad,
    )


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if n <= 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass
class OutcomeSummary:
    n_sinks: int
    n_links: int
    trials: int = 0
    sink_successes: list = field(default_factory=list)
    all_successes: int = 0
    rank_sums: list = field(default_factory=list)
    timeouts: int = 0
    completion_sum: float = 0.0
    completions: int = 0
    rate_sum: float = 0.0  # sum of K / completion over completed trials
    received_counts: list = field(default_factory=list)  # per link {K: count}
    horizon_sum: float = 0.0
    inconsistent_packets: int = 0
    decode_errors: int = 0

    def __post_init__(self):
        if not self.sink_successes:
            self.sink_successes = [0] * self.n_sinks
            self.rank_sums = [0] * self.n_sinks
            self.received_counts = [dict() for _ in range(self.n_links)]

    def add(self, o: TrialOutcome, K: int) -> None:
        self.trials += 1
        for i, (s, r) in enumerate(zip(o.success, o.ranks)):
            self.sink_successes[i] += int(s)
            self.rank_sums[i] += r
        self.all_successes += int(o.all_success)
        self.timeouts += int(o.timed_out)
        if o.completion_time is not None:
            self.completions += 1
            self.completion_sum += o.completion_time
            if o.completion_time > 0:
                self.rate_sum += K / o.completion_time
        for acc, r in zip(self.received_counts, o.received):
            for k, c in r.items():
                acc[k] = acc.get(k, 0) + c
        self.horizon_sum += o.horizon
        self.inconsistent_packets += o.inconsistent_packets
        self.decode_errors += int(not o.decoded_correctly)

    def merge(self, other: "OutcomeSummary") -> "OutcomeSummary":
        out = OutcomeSummary(self.n_sinks, self.n_links)
        out.trials = self.trials + other.trials
        out.sink_successes = [a + b for a, b in zip(self.sink_successes, other.sink_successes)]
        out.all_successes = self.all_successes + other.all_successes
        out.rank_sums = [a + b for a, b in zip(self.rank_sums, other.rank_sums)]
        out.timeouts = self.timeouts + other.timeouts
        out.completion_sum = self.completion_sum + other.completion_sum
        out.completions = self.completions + other.completions
        out.rate_sum = self.rate_sum + other.rate_sum
        out.received_counts = []
        for a, b in zip(self.received_counts, other.received_counts):
            d = dict(a)
            for k, c in b.items():
                d[k] = d.get(k, 0) + c
            out.received_counts.append(d)
        out.horizon_sum = self.horizon_sum + other.horizon_sum
        out.inconsistent_packets = self.inconsistent_packets + other.inconsistent_packets
        out.decode_errors = self.decode_errors + other.decode_errors
        return out

    def success_frequency(self, sink: int | None = None) -> float:
        if self.trials == 0:
            return float("nan")
        hits = self.all_successes if sink is None else self.sink_successes[sink]
        return hits / self.trials

    def success_interval(self, sink: int | None = None) -> tuple:
        hits = self.all_successes if sink is None else self.sink_successes[sink]
        return wilson_interval(hits, self.trials)

    def mean_ranks(self) -> list:
        return [r / self.trials for r in self.rank_sums] if self.trials else []

    def empirical_rates(self) -> list:
        """Per-link ``{K: rate}`` pooled over all trials."""
        if self.horizon_sum <= 0:
            return [dict() for _ in self.received_counts]
        return [{k: c / self.horizon_sum for k, c in r.items()} for r in self.received_counts]


def _run_chunk(args):
    cfg, start, stop = args
    return [run_trial(cfg, i) for i in range(start, stop)]


def run_trials(cfg: SimConfig, trials: int, workers: int = 1):
    """Outcomes for trial indices ``0 .. trials-1``, in order."""
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    if workers <= 1:
        for i in range(trials):
            yield run_trial(cfg, i)
        return
    step = max(1, math.ceil(trials / (workers * 4)))
    chunks = [(cfg, a, min(trials, a + step)) for a in range(0, trials, step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for batch in pool.map(_run_chunk, chunks):
            yield from batch


def run_batch(cfg: SimConfig, trials: int, workers: int = 1) -> OutcomeSummary:
    summary = OutcomeSummary(len(cfg.sinks), len(cfg.network.links()))
    for o in run_trials(cfg, trials, workers):
        summary.add(o, cfg.K)
    return summary


def measure_achieved_rate(cfg: SimConfig, trials: int, workers: int = 1) -> float:
    """Mean of K / completion time over rateless trials that finished."""
    if cfg.mode != RATELESS:
        raise ConfigError("achieved rate is measured in rateless mode")
    summary = run_batch(cfg, trials, workers)
    if summary.completions == 0:
        raise RuntimeError("every trial hit the time cap")
    return summary.rate_sum / summary.completions
