import math

import numpy as np
import pytest

from rlncsim.traffic import (
    GilbertElliott, ProcessSpec, ProcessState, ReceptionEvent, TrafficError, empirical_rate,
    empirical_set_rates, generate_events, make_spec, next_event, rate_tolerance,
)

T = frozenset({1})


def test_deterministic_no_loss():
    spec = make_spec("deterministic", {T: 2.0})
    state = ProcessState()
    rng = np.random.default_rng(0)
    times = []
    for _ in range(4):
        ev, state = next_event(spec, state, rng)
        times.append(ev.time)
        assert ev.received == T
    assert times == [0.5, 1.0, 1.5, 2.0]


def test_poisson_mean_interarrival():
    lam = 3.0
    spec = make_spec("poisson", {T: lam})
    state, rng = ProcessState(), np.random.default_rng(1)
    n = 100_000
    last = 0.0
    gaps = np.empty(n)
    for i in range(n):
        ev, state = next_event(spec, state, rng)
        gaps[i] = ev.time - last
        last = ev.time
    assert np.all(gaps > 0)
    # exponential: sd of the mean = (1/lam)/sqrt(n)
    assert abs(gaps.mean() - 1 / lam) <= 3 * (1 / lam) / math.sqrt(n)


def test_gilbert_elliott_rate():
    ge = GilbertElliott(0.1, 0.1, loss_good=0.0, loss_bad=1.0)
    spec = ProcessSpec("deterministic", 2.0, ((T, 1.0),), modulation=ge)
    assert spec.reception_rate == pytest.approx(1.0)
    horizon = 10_000.0
    events = generate_events(spec, horizon, np.random.default_rng(2))
    rate = empirical_rate(events, horizon)
    # stationary pass probability 1/2; the chain's positive correlation inflates
    # the variance by (1 + lambda2) / (1 - lambda2) = 9 with lambda2 = 0.8
    n = 2.0 * horizon
    sigma = math.sqrt(n * 0.25 * 9) / horizon
    assert abs(rate - 1.0) <= 3 * sigma


def test_empirical_rate_examples():
    events = [ReceptionEvent(0.5 * i, 0, T, i) for i in range(1, 11)]
    assert empirical_rate(events, 5.0) == 2.0
    assert empirical_rate([], 5.0) == 0
    lost = [ReceptionEvent(1.0, 0, frozenset(), 0)]
    assert empirical_rate(lost, 1.0) == 0
    with pytest.raises(TrafficError):
        empirical_rate(events, 0)


def test_poisson_empirical_rate():
    horizon = 10_000.0
    events = generate_events(make_spec("poisson", {T: 3.0}), horizon, np.random.default_rng(3))
    assert abs(empirical_rate(events, horizon) - 3.0) <= 3 * math.sqrt(3.0 / horizon)


@pytest.mark.parametrize("spec", [
    make_spec("poisson", {T: 1.5}),
    make_spec("poisson", {T: 1.5}, injection_rate=2.5),
    make_spec("deterministic", {T: 1.5}, injection_rate=2.0),
    make_spec("renewal", {T: 1.2}, interarrival=("uniform", 0.2, 1.4)),
    make_spec("renewal", {T: 0.8}, interarrival=("exponential", 1.0)),
    make_spec("renewal", {T: 2.0}, interarrival=("constant", 0.5)),
    make_spec("deterministic", {T: 1.0}, injection_rate=2.0, modulation=GilbertElliott(0.1, 0.1)),
    make_spec("poisson", {T: 0.6}, modulation=GilbertElliott(0.05, 0.2, 0.1, 0.7)),
], ids=["poisson", "poisson-loss", "det-bernoulli", "uniform", "exp-renewal", "constant", "det-ge", "poisson-ge"])
def test_every_kind_converges(spec):
    horizon = 10_000.0
    z = spec.reception_rate
    rate = empirical_rate(generate_events(spec, horizon, np.random.default_rng(4)), horizon)
    tol = rate_tolerance(z, horizon)
    if spec.modulation is not None:
        tol *= 2
    assert abs(rate - z) <= tol


def test_wireless_sets_partition():
    a, b, ab = frozenset({1}), frozenset({2}), frozenset({1, 2})
    declared = {a: 1.0, b: 0.5, ab: 0.25}
    spec = make_spec("poisson", declared, injection_rate=2.0)
    horizon = 10_000.0
    per = empirical_set_rates(generate_events(spec, horizon, np.random.default_rng(5)), horizon)
    assert set(per) == set(declared)
    for k, z in declared.items():
        assert abs(per[k] - z) <= rate_tolerance(z, horizon)


def test_sequence_is_prefix_stable():
    spec = make_spec("poisson", {T: 1.0}, injection_rate=1.3)
    short = generate_events(spec, 50.0, np.random.default_rng(6))
    long = generate_events(spec, 500.0, np.random.default_rng(6))
    assert long[: len(short)] == short
    assert all(b.time > a.time for a, b in zip(long, long[1:]))
    assert [e.seq for e in long] == list(range(len(long)))


def test_validation():
    with pytest.raises(TrafficError):
        make_spec("poisson", {T: 2.0}, injection_rate=1.0)
    with pytest.raises(TrafficError):
        ProcessSpec("bursty", 1.0)
    with pytest.raises(TrafficError):
        ProcessSpec("renewal", 1.0)
    with pytest.raises(TrafficError):
        GilbertElliott(1.5, 0.1)
    with pytest.raises(TrafficError):
        make_spec("renewal", {T: 1.0}, interarrival=("constant", 2.0))
