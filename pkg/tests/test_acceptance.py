"""Acceptance suite: one test and one printed pass/fail line per criterion."""

import itertools
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_force_min_cut, enumerate_binary_invertible, random_acyclic_flow, random_wireless, random_wireline
from rlncsim.cli import main as cli_main
from rlncsim.coding import innovation_probability_experiment, invertibility_probability, invertible_fraction
from rlncsim.exponents import (
    chernoff_exponent_numeric, error_exponent, estimate_empirical_exponent, poisson_tail_bounds,
)
from rlncsim.flows import FlowVector, decompose_paths, max_flow, min_cut_capacity
from rlncsim.fluidqueue import PathQueueSystem, check_fluid_convergence
from rlncsim.galois import field
from rlncsim.network import butterfly, parse_network, tandem
from rlncsim.simulator import RATELESS, SimConfig, measure_achieved_rate, run_batch, uniform_processes
from rlncsim.traffic import DETERMINISTIC, POISSON, GilbertElliott

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LIMIT = 1 - math.log(2)


def _report(n, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    passed = ok and in_time
    ACCEPTANCE_LINES.append(
        f"[{'PASS' if passed else 'FAIL'}] criterion {n}: {detail} ({elapsed:.1f}s, limit {limit:.0f}s)")
    return passed


def _axioms(gf, triples):
    for a, b, c in triples:
        if gf.add(a, b) != gf.add(b, a) or gf.mul(a, b) != gf.mul(b, a):
            return False
        if gf.add(gf.add(a, b), c) != gf.add(a, gf.add(b, c)):
            return False
        if gf.mul(gf.mul(a, b), c) != gf.mul(a, gf.mul(b, c)):
            return False
        if gf.mul(a, gf.add(b, c)) != gf.add(gf.mul(a, b), gf.mul(a, c)):
            return False
        if gf.add(a, 0) != a or gf.mul(a, 1) != a or gf.add(a, a) != 0:
            return False
        if a and gf.mul(a, gf.inv(a)) != 1:
            return False
    return True


def test_criterion_1_field_axioms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    ok = {}
    for m in (1, 4):
        gf = field(m)
        ok[f"GF({gf.q})"] = _axioms(gf, itertools.product(range(gf.q), repeat=3))
    for m in (8, 16):
        gf = field(m)
        ok[f"GF({gf.q})"] = _axioms(gf, rng.integers(0, gf.q, size=(10_000, 3)).tolist())
    detail = ", ".join(f"{k} {'ok' if v else 'violated'}" for k, v in ok.items())
    assert _report(1, all(ok.values()), detail, time.perf_counter() - t0, 5)


def test_criterion_2_invertibility():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    good, total = enumerate_binary_invertible(2)
    results, ok = [], good == 6 and total == 16
    n = 100_000
    for K, q in ((2, 2), (4, 2), (4, 16), (8, 256)):
        p = invertibility_probability(K, q)
        frac = invertible_fraction(field(int(math.log2(q))), K, n, rng)
        z = abs(frac - p) / math.sqrt(p * (1 - p) / n)
        ok &= z <= 3
        results.append(f"K={K},q={q}: {frac:.5f} vs {p:.5f} ({z:.1f} sd)")
    detail = f"enumeration {good}/{total}; " + "; ".join(results)
    assert _report(2, ok, detail, time.perf_counter() - t0, 30)


def _innovation_instance(gf, rng, K=6):
    while True:
        d2 = int(rng.integers(0, K))
        d1 = int(rng.integers(1, K + 1))
        V2 = rng.integers(0, gf.q, size=(d2, K))
        V1 = rng.integers(0, gf.q, size=(d1, K))
        # reuse part of V2 so the spans overlap
        if d2 and d1 > 1:
            V1[0] = V2[0]
        span2 = gf.rank(V2) if d2 else 0
        joint = gf.rank(np.vstack([V2, V1])) if d2 else gf.rank(V1)
        if joint > span2:
            return V1, V2


def test_criterion_3_innovation_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    trials = 4000
    worst, ok = {}, True
    for m in (1, 8):
        gf = field(m)
        bound = 1 - 1 / gf.q
        sigma = math.sqrt(bound * (1 - bound) / trials)
        lows = []
        for _ in range(20):
            V1, V2 = _innovation_instance(gf, rng)
            frac = innovation_probability_experiment(gf, V1, V2, trials, rng)
            ok &= frac >= bound - 3 * sigma
            lows.append(frac)
        worst[gf.q] = (min(lows), bound)
    detail = "; ".join(f"q={q}: min {lo:.4f} vs bound {b:.4f}" for q, (lo, b) in worst.items())
    assert _report(3, ok, detail, time.perf_counter() - t0, 30)


def test_criterion_4_min_cut_oracle():
    t0 = time.perf_counter()
    rng = random.Random(4)
    bad = 0
    for _ in range(200):
        net = random_wireline(rng, max_nodes=8)
        s, t = rng.sample(range(net.n_nodes), 2)
        if max_flow(net, s, t).value != brute_force_min_cut(net, s, t):
            bad += 1
    for _ in range(50):
        net = random_wireless(rng, max_nodes=6, max_tail=3)
        s, t = rng.sample(range(net.n_nodes), 2)
        if min_cut_capacity(net, s, t) != brute_force_min_cut(net, s, t):
            bad += 1
    detail = f"200 wireline + 50 wireless instances, {bad} mismatches"
    assert _report(4, bad == 0, detail, time.perf_counter() - t0, 60)


def test_criterion_5_path_decomposition():
    t0 = time.perf_counter()
    rng = random.Random(5)
    bad = 0
    for _ in range(100):
        flow, value, s, t = random_acyclic_flow(rng, rng.randint(2, 8))
        d = decompose_paths(FlowVector(s, t, value, flow))
        if d.arc_flows() != flow or d.value != value:
            bad += 1
    detail = f"100 random acyclic flows, {bad} reconstruction mismatches"
    assert _report(5, bad == 0, detail, time.perf_counter() - t0, 10)


def _butterfly_cfg(processes, K, delta, seed):
    net = butterfly()
    return SimConfig(network=net, source=0, sinks=(net.node("t1"), net.node("t2")), K=K, m=16,
                     delta=delta, processes=processes, seed=seed)


BF_DELTA = 1.5 * 100 / 1.6  # 1.5 K / R with R = 0.8 C


def test_criterion_6_capacity_achievement():
    t0 = time.perf_counter()
    net = butterfly()
    C = float(min_cut_capacity(net, 0, net.node("t1")))
    procs = uniform_processes(net, POISSON, loss=0.2)
    sub = run_batch(_butterfly_cfg(procs, 100, BF_DELTA, 60), 200)
    # above capacity the deadline stays fixed and K grows to ceil(1.2 C delta)
    K_hi = math.ceil(round(1.2 * C * BF_DELTA, 9))
    sup = run_batch(_butterfly_cfg(procs, K_hi, BF_DELTA, 61), 200)
    f_sub, f_sup = sub.success_frequency(), sup.success_frequency()
    ok = C == 2 and f_sub >= 0.95 and f_sup <= 0.05 and sub.decode_errors == sup.decode_errors == 0
    detail = f"C={C:g}; R=0.8C K=100: {f_sub:.3f} >= 0.95; R=1.2C K={K_hi}: {f_sup:.3f} <= 0.05"
    assert _report(6, ok, detail, time.perf_counter() - t0, 300)


def test_criterion_7_general_arrivals():
    t0 = time.perf_counter()
    net = butterfly()
    variants = {
        "deterministic+bernoulli": uniform_processes(net, DETERMINISTIC, loss=0.2),
        # same 20% mean loss as criterion 6, arriving in bursts of 5 packets on average
        "deterministic+gilbert-elliott": uniform_processes(
            net, DETERMINISTIC, modulation=GilbertElliott(0.05, 0.2, 0.0, 1.0)),
    }
    freqs = {}
    for i, (name, procs) in enumerate(variants.items()):
        assert all(abs(p.reception_rate - 1.0) < 1e-12 for p in procs)
        freqs[name] = run_batch(_butterfly_cfg(procs, 100, BF_DELTA, 70 + i), 200).success_frequency()
    detail = "; ".join(f"{k}: {v:.3f} >= 0.95" for k, v in freqs.items())
    assert _report(7, all(v >= 0.95 for v in freqs.values()), detail, time.perf_counter() - t0, 300)


def test_criterion_8_rateless_rate():
    t0 = time.perf_counter()
    net = parse_network("node s; node t; arc s t 1")
    cfg = SimConfig(network=net, source=0, sinks=(1,), K=200, m=16, mode=RATELESS,
                    processes=uniform_processes(net, POISSON), seed=80)
    rate = measure_achieved_rate(cfg, 100)
    assert _report(8, rate >= 0.9, f"mean K/completion {rate:.4f} >= 0.9", time.perf_counter() - t0, 120)


def test_criterion_9_fluid_limit():
    t0 = time.perf_counter()
    sys = PathQueueSystem(("s", "a", "b", "t"), 1.0, (2.0, 1.5, 3.0), 256, 100)
    rep = check_fluid_convergence(sys, [100, 1000, 10_000], None, 20, np.random.default_rng(9))
    sup, down = rep.sup_distance[-1], rep.downstream_max[-1]
    ok = sup <= 0.05 and down <= 0.02 and rep.decreasing
    detail = (f"sup distance {', '.join(f'{d:.4f}' for d in rep.sup_distance)} (N=1e2..1e4), "
              f"last <= 0.05; downstream max {down:.4f} <= 0.02")
    assert _report(9, ok, detail, time.perf_counter() - t0, 180)


def test_criterion_10_error_exponent():
    t0 = time.perf_counter()
    parts = {}
    worst = 0.0
    for C in np.linspace(0.5, 5.0, 10):
        for R in np.linspace(0.05, 0.95, 10) * C:
            worst = max(worst, abs(chernoff_exponent_numeric(C, R) - error_exponent(C, R)))
    parts["grid"] = (worst <= 1e-9, f"numeric vs closed form max gap {worst:.1e}")

    tail = poisson_tail_bounds(2.0, 1.0, 200.0)
    ratio = -tail.log_lower_pe / 200.0 / LIMIT
    parts["tail"] = (abs(ratio - 1) <= 0.05, f"Poisson tail at delta=200 gives {ratio:.4f} x limit")

    deltas = [5, 10, 15, 20, 25]
    for name, net in (("single", parse_network("node s; node t; arc s t 2")), ("tandem", tandem([2, 2]))):
        cfg = SimConfig(network=net, source=0, sinks=(net.n_nodes - 1,), K=1, rho=1, m=16, delta=1.0,
                        processes=uniform_processes(net, POISSON), seed=100)
        est = estimate_empirical_exponent(cfg, 1.0, deltas, 20_000)
        if est.slope is None:
            parts[name] = (False, f"{name} slope unavailable")
        else:
            r = est.slope / LIMIT
            parts[name] = (abs(r - 1) <= 0.25, f"{name} slope {r:.3f} x limit")
    ok = all(v for v, _ in parts.values())
    detail = "; ".join(f"{msg} [{'ok' if v else 'out of tolerance'}]" for v, msg in parts.values())
    assert _report(10, ok, detail, time.perf_counter() - t0, 600)


def test_criterion_11_cli_reproducible(tmp_path):
    t0 = time.perf_counter()
    runs = [
        ["capacity", "--config", str(CONFIGS / "butterfly.cfg")],
        ["simulate", "--config", str(CONFIGS / "butterfly.cfg"), "--trials", "4"],
        ["rate", "--config", str(CONFIGS / "rateless.cfg"), "--trials", "4"],
        ["fluid", "--config", str(CONFIGS / "fluid.cfg"), "--trials", "2"],
        ["exponent", "--config", str(CONFIGS / "tandem_exponent.cfg"), "--trials", "200"],
    ]
    same = True
    for i, args in enumerate(runs):
        outs = []
        for rep in "ab":
            out = tmp_path / f"{i}{rep}"
            assert cli_main(args + ["--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same &= outs[0] == outs[1]
    detail = f"{len(runs)} subcommands run twice, outputs {'byte-identical' if same else 'differ'}"
    assert _report(11, same, detail, time.perf_counter() - t0, 60)
