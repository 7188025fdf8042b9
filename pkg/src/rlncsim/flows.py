"""Capacity analysis: max-flow/min-cut, multicast capacity, path decomposition.

All arithmetic is exact (``fractions.Fraction``).  Wireless networks are
reduced to an ordinary graph: every reception set ``K`` of hyperarc
``(i, J)`` becomes a virtual node fed by ``i`` at rate ``z_iJK`` and feeding
each ``j`` in ``K`` with unbounded capacity.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction

from .network import Network, NetworkValidationError

ZERO = Fraction(0)


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class FlowVector:
    source: int
    sink: int
    value: Fraction
    flow: dict  # (i, j) -> Fraction, positive entries only

    def net_outflow(self, node: int) -> Fraction:
        out = sum((f for (i, _), f in self.flow.items() if i == node), ZERO)
        inc = sum((f for (_, j), f in self.flow.items() if j == node), ZERO)
        return out - inc


@dataclass(frozen=True)
class Cut:
    source_side: frozenset
    capacity: Fraction


@dataclass(frozen=True)
class FlowDecomposition:
    paths: tuple  # tuples of node ids, s ... t
    rates: tuple

    @property
    def value(self) -> Fraction:
        return sum(self.rates, ZERO)

    def arc_flows(self) -> dict:
        out: dict = defaultdict(Fraction)
        for path, r in zip(self.paths, self.rates):
            for arc in zip(path, path[1:]):
                out[arc] += r
        return dict(out)


def cut_capacity(net: Network, source_side) -> Fraction:
    """Forward capacity of the cut whose source side is ``source_side``."""
    q = frozenset(source_side)
    if not net.is_wireless:
        return sum((a.z for a in net.arcs if a.head in q and a.tail not in q), ZERO)
    total = ZERO
    for h in net.hyperarcs:
        if h.head in q:
            total += sum((z for k, z in h.receptions.items() if not k <= q), ZERO)
    return total


def _capacity_graph(net: Network):
    """Residual-capacity dict for ``net``; wireless nets get virtual nodes."""
    cap: dict = defaultdict(lambda: defaultdict(Fraction))
    if not net.is_wireless:
        for a in net.arcs:
            cap[a.head][a.tail] += a.z
        return cap, net.n_nodes
    infinite = sum((h.total_rate for h in net.hyperarcs), ZERO) + 1
    virtual = net.n_nodes
    for h in net.hyperarcs:
        for k, z in sorted(h.receptions.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
            if z <= 0:
                continue
            cap[h.head][virtual] += z
            for j in k:
                cap[virtual][j] = infinite
            virtual += 1
    return cap, virtual


def _edmonds_karp(cap, n_total: int, s: int, t: int):
    """Max flow on a residual-capacity dict; returns (value, flow dict, reachable set)."""
    residual = {u: dict(vs) for u, vs in cap.items()}
    for u in list(residual):
        for v in residual[u]:
            residual.setdefault(v, {}).setdefault(u, ZERO)
    value = ZERO
    while True:
        parent = {s: None}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for v in sorted(residual.get(u, {})):
                if v not in parent and residual[u][v] > 0:
                    parent[v] = u
                    queue.append(v)
        if t not in parent:
            break
        bottleneck = None
        v = t
        while parent[v] is not None:
            u = parent[v]
            bottleneck = residual[u][v] if bottleneck is None else min(bottleneck, residual[u][v])
            v = u
        v = t
        while parent[v] is not None:
            u = parent[v]
            residual[u][v] -= bottleneck
            residual[v][u] += bottleneck
            v = u
        value += bottleneck
    flow = {}
    for u, vs in cap.items():
        for v, c in vs.items():
            used = c - residual[u][v]
            if used > 0:
                flow[(u, v)] = used
    return value, flow, frozenset(parent)


def _check_terminals(net: Network, s: int, t: int) -> None:
    for x in (s, t):
        if not isinstance(x, int) or not 0 <= x < net.n_nodes:
            raise NetworkValidationError(f"node {x!r} not in network")
    if s == t:
        raise FlowError("source and sink must differ")


def max_flow(net: Network, s: int, t: int) -> FlowVector:
    """Maximum s-t flow of a wireline network."""
    if net.is_wireless:
        raise FlowError("max_flow expects a wireline network; use min_cut for hypergraphs")
    _check_terminals(net, s, t)
    cap, n_total = _capacity_graph(net)
    value, flow, _ = _edmonds_karp(cap, n_total, s, t)
    # cancel flow on antiparallel arc pairs
    for (i, j) in list(flow):
        if (i, j) in flow and (j, i) in flow:
            d = min(flow[(i, j)], flow[(j, i)])
            for arc in ((i, j), (j, i)):
                flow[arc] -= d
                if flow[arc] == 0:
                    del flow[arc]
    return FlowVector(s, t, value, flow)


def min_cut(net: Network, s: int, t: int) -> Cut:
    """A minimum s-t cut (wireline or wireless)."""
    _check_terminals(net, s, t)
    cap, n_total = _capacity_graph(net)
    value, _, reachable = _edmonds_karp(cap, n_total, s, t)
    q = frozenset(v for v in reachable if v < net.n_nodes)
    return Cut(q, value)


def min_cut_capacity(net: Network, s: int, t: int) -> Fraction:
    return min_cut(net, s, t).capacity


def multicast_capacity(net: Network, s: int, sinks) -> Fraction:
    sinks = list(sinks)
    if not sinks:
        raise FlowError("sink set is empty")
    if s in sinks:
        raise FlowError("source cannot be a sink")
    return min(min_cut_capacity(net, s, t) for t in sinks)


def _find_cycle(flow: dict):
    succ = defaultdict(list)
    for (i, j) in flow:
        succ[i].append(j)
    for lst in succ.values():
        lst.sort()
    color: dict = {}
    for root in sorted(succ):
        if root in color:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = 2
                continue
            state = color.get(nxt)
            if state == 1:
                return path[path.index(nxt):] + [nxt]
            if state is None:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(succ[nxt])))
    return None


def remove_cycles(f: FlowVector) -> FlowVector:
    """Cancel circulations until the support of ``f`` is acyclic."""
    flow = dict(f.flow)
    while True:
        cycle = _find_cycle(flow)
        if cycle is None:
            return FlowVector(f.source, f.sink, f.value, flow)
        arcs = list(zip(cycle, cycle[1:]))
        d = min(flow[a] for a in arcs)
        for a in arcs:
            flow[a] -= d
            if flow[a] == 0:
                del flow[a]


def decompose_paths(f: FlowVector) -> FlowDecomposition:
    """Split an acyclic flow into simple s-t paths carrying positive rate.

    Each path follows the lowest-numbered successor with remaining flow and
    carries its bottleneck, so the result is deterministic.
    """
    if _find_cycle(f.flow) is not None:
        raise FlowError("flow support contains a cycle; call remove_cycles first")
    remaining = dict(f.flow)
    paths, rates = [], []
    total = ZERO
    while total < f.value:
        path = [f.source]
        node = f.source
        while node != f.sink:
            succ = [j for (i, j), x in remaining.items() if i == node and x > 0]
            if not succ:
                raise FlowError("flow does not satisfy conservation")
            node = min(succ)
            path.append(node)
        arcs = list(zip(path, path[1:]))
        r = min(remaining[a] for a in arcs)
        for a in arcs:
            remaining[a] -= r
            if remaining[a] == 0:
                del remaining[a]
        paths.append(tuple(path))
        rates.append(r)
        total += r
    if remaining:
        raise FlowError("flow does not satisfy conservation")
    return FlowDecomposition(tuple(paths), tuple(rates))


def unicast_decomposition(net: Network, s: int, t: int) -> FlowDecomposition:
    return decompose_paths(remove_cycles(max_flow(net, s, t)))
