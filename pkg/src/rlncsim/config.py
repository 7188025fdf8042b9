"""Experiment configuration files.

Same line syntax as network files; network statements may appear inline or
be pulled in with ``network <path>``.  Recognised experiment statements::

    network net.cfg
    source s
    sinks t1 t2
    field 2^16
    messages 100 32            # K rho
    mode fixed 93.75 | mode rateless [cap]
    trials 200
    seed 7
    rate 1.0                   # target rate for exponent runs
    deltas 5:25:5              # delay grid for exponent runs
    jobs 100 1000 10000        # job counts for fluid runs
    compact on|off
    traffic <link|*> <poisson|deterministic> [injection_rate] [loss p] [ge p_gb p_bg loss_good loss_bad]
    traffic <link|*> renewal <exponential r|uniform a b|constant period> [ge ...]

Links are numbered from 0 in file order.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from .network import Network, NetworkSyntaxError, NetworkValidationError, _Builder, iter_statements
from .simulator import FIXED, RATELESS, ConfigError, SimConfig, link_reception_sets
from .traffic import KINDS, RENEWAL, GilbertElliott, TrafficError, make_spec

_NETWORK_KEYWORDS = ("node", "arc", "hyperarc")


def parse_grid(text: str) -> list:
    """``a:b:step`` (inclusive of b) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad grid {text!r}; expected a:b:step")
        a, b, step = (float(x) for x in parts)
        if step <= 0 or b < a:
            raise ConfigError(f"bad grid {text!r}")
        n = int(round((b - a) / step))
        return [round(a + i * step, 12) for i in range(n + 1)]
    return [float(x) for x in text.split(",") if x]


@dataclass
class Experiment:
    network: Network
    text_hash: str
    source: int | None = None
    sinks: tuple = ()
    m: int = 8
    K: int = 16
    rho: int = 32
    mode: str = FIXED
    delta: float | None = None
    time_cap: float | None = None
    trials: int = 100
    seed: int = 0
    rate: float | None = None
    deltas: list = field(default_factory=list)
    jobs: list = field(default_factory=lambda: [100, 1000, 10000])
    compact: bool = False
    traffic: dict = field(default_factory=dict)  # link index -> ProcessSpec

    def default_terminals(self) -> tuple:
        """Source and sinks, falling back to the first and last declared nodes."""
        src = self.source if self.source is not None else 0
        sinks = self.sinks or (self.network.n_nodes - 1,)
        return src, tuple(sinks)

    def processes(self) -> tuple:
        links = self.network.links()
        missing = [i for i in range(len(links)) if i not in self.traffic]
        if missing:
            raise ConfigError(f"no traffic process for link(s) {missing}")
        return tuple(self.traffic[i] for i in range(len(links)))

    def sim_config(self, **overrides) -> SimConfig:
        src, sinks = self.default_terminals()
        kw = dict(network=self.network, source=src, sinks=sinks, K=self.K, processes=self.processes(),
                  rho=self.rho, m=self.m, mode=self.mode, delta=self.delta, seed=self.seed,
                  time_cap=self.time_cap, compact_memory=self.compact)
        kw.update(overrides)
        return SimConfig(**kw)


def _num(tok: str, lineno: int, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise ConfigError(f"line {lineno}: expected a number, got {tok!r}") from None


def _traffic(words, lineno, declared_sets, n_links) -> dict:
    if len(words) < 3:
        raise ConfigError(f"line {lineno}: expected traffic <link|*> <kind> ...")
    target, kind, rest = words[1], words[2], list(words[3:])
    if kind not in KINDS:
        raise ConfigError(f"line {lineno}: unknown traffic kind {kind!r}")
    if target == "*":
        ids = list(range(n_links))
    else:
        i = _num(target, lineno, int)
        if not 0 <= i < n_links:
            raise ConfigError(f"line {lineno}: no link {i}")
        ids = [i]
    interarrival = ()
    if kind == RENEWAL:
        if not rest:
            raise ConfigError(f"line {lineno}: renewal needs a distribution")
        dist = rest.pop(0)
        nparams = {"exponential": 1, "uniform": 2, "constant": 1}.get(dist)
        if nparams is None:
            raise ConfigError(f"line {lineno}: unknown interarrival distribution {dist!r}")
        if len(rest) < nparams:
            raise ConfigError(f"line {lineno}: {dist} needs {nparams} parameter(s)")
        interarrival = (dist, *(_num(rest.pop(0), lineno) for _ in range(nparams)))
    injection = None
    loss = 0.0
    ge = None
    if rest and rest[0] not in ("loss", "ge"):
        injection = _num(rest.pop(0), lineno)
    while rest:
        key = rest.pop(0)
        if key == "loss" and rest:
            loss = _num(rest.pop(0), lineno)
        elif key == "ge" and len(rest) >= 4:
            ge = GilbertElliott(*(_num(rest.pop(0), lineno) for _ in range(4)))
        else:
            raise ConfigError(f"line {lineno}: unexpected traffic option {key!r}")
    if not 0 <= loss < 1:
        raise ConfigError(f"line {lineno}: loss must be in [0, 1)")
    out = {}
    for i in ids:
        declared = declared_sets[i]
        inj = injection
        if inj is None and kind != RENEWAL:
            total = sum(declared.values())
            passing = ge.pass_probability if ge else 1.0
            inj = total / passing / (1 - loss) if total > 0 else 1.0
        out[i] = make_spec(kind, declared, injection_rate=inj, modulation=ge, interarrival=interarrival)
    return out


def parse_experiment(text: str, base_dir: str = ".") -> Experiment:
    builder = _Builder()
    included = None
    settings = []
    for lineno, stmt in iter_statements(text):
        words = stmt.split()
        if words[0] in _NETWORK_KEYWORDS:
            builder.statement(stmt, lineno)
        elif words[0] == "network":
            if len(words) != 2:
                raise ConfigError(f"line {lineno}: expected network <path>")
            path = os.path.join(base_dir, words[1])
            if not os.path.isfile(path):
                raise ConfigError(f"line {lineno}: network file {path!r} not found")
            with open(path, encoding="utf-8") as fh:
                included = fh.read()
            for sub_lineno, sub in iter_statements(included):
                builder.statement(sub, sub_lineno)
        else:
            settings.append((lineno, words))
    net = builder.build()
    digest = hashlib.sha256(text.encode("utf-8"))
    if included is not None:
        digest.update(included.encode("utf-8"))
    exp = Experiment(network=net, text_hash=digest.hexdigest()[:16])
    declared = link_reception_sets(net)
    for lineno, words in settings:
        key, args = words[0], words[1:]
        try:
            _apply(exp, key, args, lineno, declared)
        except (TrafficError, NetworkValidationError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return exp


def _apply(exp: Experiment, key: str, args: list, lineno: int, declared) -> None:
    net = exp.network

    def need(n):
        if len(args) < n:
            raise ConfigError(f"line {lineno}: {key} needs {n} argument(s)")

    if key == "source":
        need(1)
        exp.source = net.node(args[0])
    elif key == "sinks":
        need(1)
        exp.sinks = tuple(net.node(a) for a in args)
    elif key == "field":
        need(1)
        tok = args[0]
        if tok.startswith("2^"):
            m = _num(tok[2:], lineno, int)
        else:
            q = _num(tok, lineno, int)
            m = q.bit_length() - 1
            if q != 1 << m:
                raise ConfigError(f"line {lineno}: field size must be a power of two")
        if m not in (1, 4, 8, 16):
            raise ConfigError(f"line {lineno}: unsupported field 2^{m}")
        exp.m = m
    elif key == "messages":
        need(1)
        exp.K = _num(args[0], lineno, int)
        if len(args) > 1:
            exp.rho = _num(args[1], lineno, int)
        if exp.K < 1 or exp.rho < 1:
            raise ConfigError(f"line {lineno}: K and rho must be positive")
    elif key == "mode":
        need(1)
        if args[0] == "fixed":
            need(2)
            exp.mode, exp.delta = FIXED, _num(args[1], lineno)
            if exp.delta < 0:
                raise ConfigError(f"line {lineno}: delta must be non-negative")
        elif args[0] == "rateless":
            exp.mode = RATELESS
            if len(args) > 1:
                exp.time_cap = _num(args[1], lineno)
        else:
            raise ConfigError(f"line {lineno}: mode must be fixed or rateless")
    elif key == "trials":
        need(1)
        exp.trials = _num(args[0], lineno, int)
        if exp.trials < 1:
            raise ConfigError(f"line {lineno}: trials must be at least 1")
    elif key == "seed":
        need(1)
        exp.seed = _num(args[0], lineno, int)
        if exp.seed < 0:
            raise ConfigError(f"line {lineno}: seed must be non-negative")
    elif key == "rate":
        need(1)
        exp.rate = _num(args[0], lineno)
    elif key == "deltas":
        need(1)
        exp.deltas = parse_grid(args[0])
    elif key == "jobs":
        need(1)
        exp.jobs = [_num(a, lineno, int) for a in args]
    elif key == "compact":
        need(1)
        exp.compact = args[0] in ("on", "true", "1", "yes")
    elif key == "traffic":
        exp.traffic.update(_traffic([key, *args], lineno, declared, len(net.links())))
    else:
        raise ConfigError(f"line {lineno}: unknown statement {key!r}")


def load_experiment(path: str) -> Experiment:
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path!r} not found")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_experiment(text, os.path.dirname(os.path.abspath(path)))
    except NetworkSyntaxError as exc:
        raise ConfigError(str(exc)) from None
