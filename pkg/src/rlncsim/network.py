"""Static lossy network descriptions and the line-oriented network file format.

A wireline network is a directed graph whose arcs carry a reception rate
``z`` (packets received per unit time).  A wireless network is a directed
hypergraph; each hyperarc ``(i, J)`` carries a map from non-empty reception
sets ``K`` of ``J`` to the rate at which injected packets are received by
exactly the nodes of ``K``.

File format (UTF-8, one or more ``;``-separated statements per line)::

    # comment
    node s
    arc s t 2.5
    hyperarc s {a b} {a}=1.0 {b}=1.0 {a b}=0.5
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

MAX_TAIL = 16

WIRELINE = "wireline"
WIRELESS = "wireless"


class NetworkError(ValueError):
    """Base class for network parse/validation failures."""


class NetworkSyntaxError(NetworkError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NetworkValidationError(NetworkError):
    pass


@dataclass(frozen=True)
class Arc:
    head: int
    tail: int
    z: Fraction


@dataclass(frozen=True)
class Hyperarc:
    head: int
    tail_set: frozenset
    receptions: Mapping[frozenset, Fraction] = field(hash=False)

    @property
    def total_rate(self) -> Fraction:
        return sum(self.receptions.values(), Fraction(0))


@dataclass(frozen=True, eq=False)
class Network:
    kind: str
    labels: tuple
    arcs: tuple = ()
    hyperarcs: tuple = ()

    def __post_init__(self):
        validate(self)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def is_wireless(self) -> bool:
        return self.kind == WIRELESS

    def node(self, label_or_id) -> int:
        """Resolve a label (or pass through a valid integer id)."""
        if isinstance(label_or_id, int):
            if not 0 <= label_or_id < self.n_nodes:
                raise NetworkValidationError(f"no node with id {label_or_id}")
            return label_or_id
        try:
            return self.labels.index(label_or_id)
        except ValueError:
            raise NetworkValidationError(f"unknown node {label_or_id!r}") from None

    def links(self) -> tuple:
        """Arcs or hyperarcs, whichever this network holds."""
        return self.hyperarcs if self.is_wireless else self.arcs

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return serialize_network(self) == serialize_network(other)

    def __hash__(self):
        return hash(serialize_network(self))


def validate(net: Network) -> None:
    if net.kind not in (WIRELINE, WIRELESS):
        raise NetworkValidationError(f"unknown network kind {net.kind!r}")
    if len(set(net.labels)) != len(net.labels):
        raise NetworkValidationError("duplicate node labels")
    n = len(net.labels)
    if net.kind == WIRELINE and net.hyperarcs:
        raise NetworkValidationError("wireline network cannot contain hyperarcs")
    if net.kind == WIRELESS and net.arcs:
        raise NetworkValidationError("wireless network cannot contain arcs")
    seen = set()
    for a in net.arcs:
        if not (0 <= a.head < n and 0 <= a.tail < n):
            raise NetworkValidationError(f"arc references unknown node: {a}")
        if a.head == a.tail:
            raise NetworkValidationError(f"self-loop at node {net.labels[a.head]!r}")
        if a.z < 0:
            raise NetworkValidationError(f"negative rate {a.z} on arc {net.labels[a.head]}->{net.labels[a.tail]}")
        if (a.head, a.tail) in seen:
            raise NetworkValidationError(f"parallel arc {net.labels[a.head]}->{net.labels[a.tail]}")
        seen.add((a.head, a.tail))
    for h in net.hyperarcs:
        if not 0 <= h.head < n or any(not 0 <= j < n for j in h.tail_set):
            raise NetworkValidationError("hyperarc references unknown node")
        if not h.tail_set:
            raise NetworkValidationError("hyperarc tail set is empty")
        if len(h.tail_set) > MAX_TAIL:
            raise NetworkValidationError(f"hyperarc tail set larger than {MAX_TAIL}")
        if h.head in h.tail_set:
            raise NetworkValidationError("hyperarc head appears in its own tail set")
        for k, z in h.receptions.items():
            if not k or not k <= h.tail_set:
                raise NetworkValidationError("reception set must be a non-empty subset of the tail set")
            if z < 0:
                raise NetworkValidationError(f"negative reception rate {z}")


def parse_rate(token: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad rate literal {token!r}") from None


def format_rate(z: Fraction) -> str:
    z = Fraction(z)
    if z.denominator == 1:
        return str(z.numerator)
    d = z.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{z.numerator}/{z.denominator}"
    digits = max(twos, fives)
    scaled = z * 10**digits
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


_HYPER_RE = re.compile(r"^hyperarc\s+(\S+)\s+\{([^{}]*)\}\s*(.*)$")
_RECEPTION_RE = re.compile(r"\{([^{}]*)\}\s*=\s*([^\s{}]+)")


class _Builder:
    def __init__(self):
        self.labels: list[str] = []
        self.arcs: list[Arc] = []
        self.hyperarcs: list[Hyperarc] = []

    def ref(self, label: str, lineno: int) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise NetworkValidationError(f"line {lineno}: undeclared node {label!r}") from None

    def statement(self, stmt: str, lineno: int) -> None:
        words = stmt.split()
        keyword = words[0]
        if keyword == "node":
            if len(words) != 2:
                raise NetworkSyntaxError(lineno, "expected: node <label>")
            if words[1] in self.labels:
                raise NetworkValidationError(f"line {lineno}: duplicate node {words[1]!r}")
            self.labels.append(words[1])
        elif keyword == "arc":
            if len(words) != 4:
                raise NetworkSyntaxError(lineno, "expected: arc <head> <tail> <rate>")
            try:
                z = parse_rate(words[3])
            except ValueError as exc:
                raise NetworkSyntaxError(lineno, str(exc)) from None
            if z < 0:
                raise NetworkValidationError(f"line {lineno}: negative rate {words[3]}")
            self.arcs.append(Arc(self.ref(words[1], lineno), self.ref(words[2], lineno), z))
        elif keyword == "hyperarc":
            self.hyperarc(stmt, lineno)
        else:
            raise NetworkSyntaxError(lineno, f"unknown statement {keyword!r}")

    def hyperarc(self, stmt: str, lineno: int) -> None:
        m = _HYPER_RE.match(stmt)
        if not m:
            raise NetworkSyntaxError(lineno, "expected: hyperarc <head> {<tail>} {<set>}=<rate> ...")
        head = self.ref(m.group(1), lineno)
        tail = frozenset(self.ref(x, lineno) for x in m.group(2).split())
        rest = m.group(3)
        receptions: dict[frozenset, Fraction] = {}
        pos = 0
        for rm in _RECEPTION_RE.finditer(rest):
            if rest[pos:rm.start()].strip():
                raise NetworkSyntaxError(lineno, f"unexpected text {rest[pos:rm.start()].strip()!r}")
            pos = rm.end()
            k = frozenset(self.ref(x, lineno) for x in rm.group(1).split())
            try:
                z = parse_rate(rm.group(2))
            except ValueError as exc:
                raise NetworkSyntaxError(lineno, str(exc)) from None
            if k in receptions:
                raise NetworkValidationError(f"line {lineno}: reception set listed twice")
            if z < 0:
                raise NetworkValidationError(f"line {lineno}: negative rate {rm.group(2)}")
            if not k or not k <= tail:
                raise NetworkValidationError(f"line {lineno}: reception set {{{rm.group(1)}}} is not a non-empty subset of the tail")
            receptions[k] = z
        if rest[pos:].strip():
            raise NetworkSyntaxError(lineno, f"unexpected text {rest[pos:].strip()!r}")
        self.hyperarcs.append(Hyperarc(head, tail, receptions))

    def build(self) -> Network:
        if self.arcs and self.hyperarcs:
            raise NetworkValidationError("a network holds either arcs or hyperarcs, not both")
        kind = WIRELESS if self.hyperarcs else WIRELINE
        return Network(kind, tuple(self.labels), tuple(self.arcs), tuple(self.hyperarcs))


def iter_statements(text: str) -> Iterable[tuple[int, str]]:
    """Yield ``(lineno, statement)`` pairs with comments and blanks removed."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for stmt in line.split(";"):
            stmt = stmt.strip()
            if stmt:
                yield lineno, stmt


def parse_network(text: str) -> Network:
    builder = _Builder()
    for lineno, stmt in iter_statements(text):
        builder.statement(stmt, lineno)
    return builder.build()


def load_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def _set_key(s: frozenset):
    return (len(s), sorted(s))


def serialize_network(net: Network) -> str:
    """Canonical text form; ``parse_network`` inverts it exactly."""
    lab = net.labels
    lines = [f"node {x}" for x in lab]
    for a in net.arcs:
        lines.append(f"arc {lab[a.head]} {lab[a.tail]} {format_rate(a.z)}")
    for h in net.hyperarcs:
        tail = " ".join(lab[j] for j in sorted(h.tail_set))
        recs = " ".join(
            "{" + " ".join(lab[j] for j in sorted(k)) + "}=" + format_rate(h.receptions[k])
            for k in sorted(h.receptions, key=_set_key)
        )
        lines.append(f"hyperarc {lab[h.head]} {{{tail}}} {recs}".rstrip())
    return "\n".join(lines) + "\n"


def wireline_as_wireless(net: Network) -> Network:
    """Rewrite each arc (i, j) as the hyperarc (i, {j}) with reception rate z_ij."""
    if net.is_wireless:
        raise NetworkValidationError("network is already wireless")
    hyper = tuple(
        Hyperarc(a.head, frozenset({a.tail}), {frozenset({a.tail}): a.z}) for a in net.arcs
    )
    return Network(WIRELESS, net.labels, (), hyper)


def wireline(labels: Iterable[str], arcs: Iterable[tuple]) -> Network:
    """Build a wireline network from labels and ``(head, tail, z)`` label triples."""
    labels = tuple(labels)
    idx = {x: i for i, x in enumerate(labels)}
    return Network(WIRELINE, labels, tuple(Arc(idx[h], idx[t], Fraction(z)) for h, t, z in arcs))


def butterfly(rate=1) -> Network:
    """The classic two-sink butterfly: every arc has reception rate ``rate``."""
    return wireline(
        ["s", "a", "b", "c", "d", "t1", "t2"],
        [
            ("s", "a", rate), ("s", "b", rate),
            ("a", "t1", rate), ("a", "c", rate),
            ("b", "c", rate), ("b", "t2", rate),
            ("c", "d", rate), ("d", "t1", rate), ("d", "t2", rate),
        ],
    )


def tandem(rates) -> Network:
    """A path s -> v1 -> ... -> t whose arcs have the given rates."""
    rates = list(rates)
    labels = ["s"] + [f"v{i}" for i in range(1, len(rates))] + ["t"]
    return wireline(labels, [(labels[i], labels[i + 1], z) for i, z in enumerate(rates)])
