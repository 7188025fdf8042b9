"""Error exponents for Poisson traffic: closed form, Chernoff optimum, Poisson tail.

Natural logarithms throughout, so exponents are in nats per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .simulator import FIXED, SimConfig, run_batch, wilson_interval


class ExponentDomainError(ValueError):
    pass


def _check(C: float, R: float, strict: bool = False) -> None:
    if not C > 0:
        raise ExponentDomainError("capacity must be positive")
    if not R > 0:
        raise ExponentDomainError("rate must be positive")
    if R > C or (strict and R == C):
        raise ExponentDomainError(f"rate {R} is above capacity {C}")


def error_exponent(C: float, R: float) -> float:
    """C - R - R ln(C/R): decay rate of the error probability in the delay."""
    _check(C, R)
    if R == C:
        return 0.0
    return C - R - R * math.log(C / R)


def chernoff_objective(theta: float, C: float, R: float) -> float:
    """theta - R ln(C / (C - theta)); its maximum over [0, C) is the exponent."""
    return theta - R * math.log(C / (C - theta))


def chernoff_exponent_numeric(C: float, R: float) -> float:
    """Maximise the Chernoff objective over theta in [0, C) numerically."""
    _check(C, R, strict=True)
    res = minimize_scalar(lambda th: -chernoff_objective(th, C, R), bounds=(0.0, C * (1 - 1e-15)),
                          method="bounded", options={"xatol": 1e-13 * C, "maxiter": 500})
    return max(0.0, -float(res.fun))


def required_packets(R: float, delta: float) -> int:
    """ceil(R * delta), robust to float noise in the product."""
    return math.ceil(round(R * delta, 9))


def log_poisson_cdf(mean: float, k_max: int) -> float:
    """ln P(Poisson(mean) <= k_max), summed in log space."""
    if k_max < 0:
        return -math.inf
    if mean == 0:
        return 0.0
    lm = math.log(mean)
    terms = [l * lm - mean - math.lgamma(l + 1) for l in range(k_max + 1)]
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


@dataclass(frozen=True)
class TailBounds:
    lower_pe: float
    upper_pe: float
    log_lower_pe: float
    log_stirling_pe: float  # the single largest term, a weaker lower bound


def poisson_tail_bounds(C: float, R: float, delta: float) -> TailBounds:
    """Bounds on the error probability at coding delay ``delta``.

    The lower bound is the exact probability that a rate-C Poisson process
    delivers fewer than ceil(R delta) packets by ``delta``; the upper bound
    is exp(-delta * exponent).
    """
    if not delta > 0:
        raise ExponentDomainError("delta must be positive")
    _check(C, R)
    k = required_packets(R, delta)
    mean = C * delta
    log_lower = log_poisson_cdf(mean, k - 1)
    if k >= 1:
        log_stirling = -mean + (k - 1) * math.log(mean) - math.lgamma(k)
    else:
        log_stirling = -math.inf
    upper = math.exp(-delta * error_exponent(C, R))
    return TailBounds(math.exp(log_lower), upper, log_lower, log_stirling)


@dataclass
class ExponentEstimate:
    rate: float
    capacity: float
    deltas: list
    trials: list
    failures: list
    sink_failures: list  # per delta, per sink
    p_e: list
    wilson: list
    admissible: list
    lower_bound_pe: list
    analytic_exponent: float | None
    slope: float | None
    intercept: float | None = None
    sink_slopes: list = field(default_factory=list)

    @property
    def available(self) -> bool:
        return self.slope is not None

    def rows(self) -> list:
        out = []
        for i, d in enumerate(self.deltas):
            lo, hi = self.wilson[i]
            out.append({
                "delta": d, "trials": self.trials[i], "failures": self.failures[i],
                "p_e": self.p_e[i], "wilson_lo": lo, "wilson_hi": hi,
                "lower_bound_pe": self.lower_bound_pe[i],
                "analytic_exponent": "" if self.analytic_exponent is None else self.analytic_exponent,
                "fitted_slope": "" if self.slope is None else self.slope,
            })
        return out


P_LOW, P_HIGH, MIN_FAILURES = 1e-4, 0.5, 10


def admissible_point(failures: int, trials: int) -> bool:
    lo, hi = wilson_interval(failures, trials)
    return failures >= MIN_FAILURES and lo > P_LOW and hi < P_HIGH


def fit_slope(deltas, p_e, mask):
    """Least-squares slope and intercept of -ln p_e against delta on ``mask``."""
    x = np.array([d for d, ok in zip(deltas, mask) if ok], dtype=float)
    y = np.array([-math.log(p) for p, ok in zip(p_e, mask) if ok], dtype=float)
    if len(x) < 2:
        return None, None
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _delta_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def estimate_empirical_exponent(cfg: SimConfig, rate: float, deltas, trials: int,
                                workers: int = 1) -> ExponentEstimate:
    """Failure frequency per delta (K = ceil(rate * delta)) and the fitted slope."""
    deltas = [float(d) for d in deltas]
    C = cfg.capacity
    fails, sink_fails, pes, wil, ok, lower, ns = [], [], [], [], [], [], []
    for i, d in enumerate(deltas):
        K = max(1, required_packets(rate, d))
        run_cfg = cfg.with_(mode=FIXED, delta=d, K=K, seed=_delta_seed(cfg.seed, i))
        summary = run_batch(run_cfg, trials, workers)
        f = trials - summary.all_successes
        fails.append(f)
        sink_fails.append([trials - s for s in summary.sink_successes])
        ns.append(trials)
        pes.append(f / trials)
        wil.append(wilson_interval(f, trials))
        ok.append(admissible_point(f, trials))
        lower.append(poisson_tail_bounds(C, rate, d).lower_pe if 0 < rate <= C else 1.0)
    slope, intercept = fit_slope(deltas, pes, ok)
    sink_slopes = []
    for j in range(len(cfg.sinks)):
        col = [sf[j] for sf in sink_fails]
        mask = [admissible_point(f, n) for f, n in zip(col, ns)]
        sink_slopes.append(fit_slope(deltas, [f / n for f, n in zip(col, ns)], mask)[0])
    analytic = error_exponent(C, rate) if 0 < rate <= C else None
    return ExponentEstimate(rate, C, deltas, ns, fails, sink_fails, pes, wil, ok, lower,
                            analytic, slope, intercept, sink_slopes)
