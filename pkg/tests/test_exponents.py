import math

import numpy as np
import pytest
from scipy import stats

from oracles import golden_section_max, poisson_cdf_recurrence
from rlncsim.exponents import (
    ExponentDomainError, admissible_point, chernoff_exponent_numeric, chernoff_objective, error_exponent,
    estimate_empirical_exponent, fit_slope, log_poisson_cdf, poisson_tail_bounds, required_packets,
)
from rlncsim.network import parse_network
from rlncsim.simulator import SimConfig, uniform_processes


def test_closed_form_examples():
    assert error_exponent(2, 1) == pytest.approx(0.306853, abs=1e-6)
    assert error_exponent(2, 1) == pytest.approx(1 - math.log(2), abs=1e-15)
    assert error_exponent(1, 0.5) == pytest.approx(0.153426, abs=1e-6)
    assert error_exponent(3, 3) == 0.0


@pytest.mark.parametrize("C, R", [(1, 2), (0, 0.5), (1, 0), (1, -1)])
def test_domain_errors(C, R):
    with pytest.raises(ExponentDomainError):
        error_exponent(C, R)


def test_numeric_matches_closed_form_and_oracle():
    C = 2.0
    for R in np.linspace(0.01, 1.99, 100):
        closed = error_exponent(C, R)
        assert abs(chernoff_exponent_numeric(C, R) - closed) <= 1e-9
        oracle = golden_section_max(lambda th: chernoff_objective(th, C, R), 0.0, C * (1 - 1e-12))
        assert abs(oracle - closed) <= 1e-9


def test_exponent_decreases_in_rate():
    vals = [error_exponent(1.0, r) for r in np.linspace(0.05, 1.0, 40)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 0.0


def test_required_packets():
    assert required_packets(1.0, 5.0) == 5
    assert required_packets(0.1, 30.0) == 3  # 0.1 * 30 is 3.0000000000000004 in floats
    assert required_packets(1.6, 93.75) == 150
    assert required_packets(1.0, 5.5) == 6


def test_tail_single_packet():
    b = poisson_tail_bounds(1.0, 0.2, 5.0)  # needs one packet: p_e = P(none) = e^-5
    assert b.lower_pe == pytest.approx(math.exp(-5.0), rel=1e-14)
    assert b.lower_pe <= b.upper_pe


def test_log_cdf_matches_recurrence():
    for k in (0, 5, 19, 39):
        assert math.exp(log_poisson_cdf(40.0, k)) == pytest.approx(poisson_cdf_recurrence(40.0, k), rel=1e-12)


def test_tail_at_long_delay_matches_scipy():
    b = poisson_tail_bounds(2.0, 1.0, 200.0)
    ref = stats.poisson.logcdf(199, 400.0)
    assert b.log_lower_pe == pytest.approx(ref, rel=1e-12)
    ratio = -b.log_lower_pe / 200.0 / error_exponent(2.0, 1.0)
    # the sub-exponential prefactor keeps the finite-delay exponent above the limit
    assert 1.0 < ratio < 1.06
    assert b.log_stirling_pe <= b.log_lower_pe
    assert b.lower_pe <= b.upper_pe


def test_tail_ratio_converges():
    ratios = []
    for d in (50, 200, 1000, 5000):
        b = poisson_tail_bounds(2.0, 1.0, float(d))
        ratios.append(-b.log_lower_pe / d / error_exponent(2.0, 1.0))
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 1) < 0.01


def test_admissible_window():
    assert admissible_point(100, 1000)
    assert not admissible_point(5, 1000)  # too few failures
    assert not admissible_point(600, 1000)  # above one half
    assert not admissible_point(10, 10**6)  # Wilson interval reaches below 1e-4


def test_fit_slope_exact_line():
    deltas = [1.0, 2.0, 3.0, 4.0]
    pes = [math.exp(-0.5 - 0.3 * d) for d in deltas]
    slope, icpt = fit_slope(deltas, pes, [True] * 4)
    assert slope == pytest.approx(0.3) and icpt == pytest.approx(0.5)
    assert fit_slope(deltas, pes, [True, False, False, False]) == (None, None)


def test_supercapacity_slope_unavailable():
    net = parse_network("node s; node t; arc s t 1")
    cfg = SimConfig(network=net, source=0, sinks=(1,), K=1, processes=uniform_processes(net), m=16, rho=1,
                    delta=1.0)
    est = estimate_empirical_exponent(cfg, 2.0, [5, 10, 15], 200)
    assert not est.available
    assert est.analytic_exponent is None
    assert all(p > 0.5 for p in est.p_e)
    assert len(est.rows()) == 3
