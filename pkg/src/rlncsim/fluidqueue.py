"""Tandem job queues along one flow path, and their fluid limit.

Jobs start at the source station; station ``l`` serves one job each time a
*candidate* packet arrives on arc ``l`` while its queue is non-empty.  A
reception on arc ``l`` is a candidate with probability
``(1 - 1/q) R / z_l``, so every station sees candidates at rate
``(1 - 1/q) R``.  Scaling time and queue lengths by the initial job count
``N`` gives trajectories that converge to the closed-form fluid solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .traffic import POISSON, make_spec, generate_events


@dataclass(frozen=True)
class PathQueueSystem:
    path: tuple  # node sequence s, ..., t
    rate: float  # path flow R_m
    arc_rates: tuple  # z on each consecutive arc
    q: int
    jobs: int  # initial job count N_m at the source
    kind: str = POISSON  # reception process on every arc
    thinning: tuple | None = None  # override of the candidate probabilities

    def __post_init__(self):
        if len(self.path) != len(self.arc_rates) + 1 or len(self.arc_rates) < 1:
            raise ValueError("path must have one more node than arc rates")
        if self.jobs < 0:
            raise ValueError("job count must be non-negative")
        if self.rate <= 0:
            raise ValueError("path rate must be positive")
        if any(self.rate > z for z in self.arc_rates):
            raise ValueError("path rate exceeds an arc rate")
        probs = self.candidate_probabilities
        if len(probs) != self.stations or any(not 0 < p <= 1 for p in probs):
            raise ValueError("candidate probabilities must lie in (0, 1]")

    @property
    def stations(self) -> int:
        return len(self.arc_rates)

    @property
    def candidate_probabilities(self) -> tuple:
        if self.thinning is not None:
            return tuple(float(p) for p in self.thinning)
        f = 1.0 - 1.0 / self.q
        return tuple(f * self.rate / z for z in self.arc_rates)

    @property
    def drain_rate(self) -> float:
        """Candidate rate at the first station, (1 - 1/q) R unless overridden."""
        return self.candidate_probabilities[0] * self.arc_rates[0]

    def with_jobs(self, n: int) -> "PathQueueSystem":
        return PathQueueSystem(self.path, self.rate, self.arc_rates, self.q, n, self.kind, self.thinning)


@dataclass
class QueueTrajectory:
    jobs: int
    horizon: float
    candidate_times: list  # per station, sorted
    service_times: list  # per station, sorted; B_l jumps
    receptions: list = field(default_factory=list)  # per station, reception counts

    @property
    def stations(self) -> int:
        return len(self.service_times)

    def served(self, station: int, tau) -> np.ndarray:
        """B_l(tau): jobs that have left station ``station`` (0-based) by tau."""
        return np.searchsorted(self.service_times[station], tau, side="right")

    def candidates(self, station: int, tau) -> np.ndarray:
        return np.searchsorted(self.candidate_times[station], tau, side="right")

    def level(self, station: int, tau) -> np.ndarray:
        """Q_l(tau) = B_{l-1}(tau) - B_l(tau), with B_{-1} = N."""
        upstream = self.jobs if station == 0 else self.served(station - 1, tau)
        return upstream - self.served(station, tau)

    def delivered(self, tau) -> np.ndarray:
        return self.served(self.stations - 1, tau)

    def events(self) -> list:
        """(time, station, +1/-1) records in time order."""
        out = []
        for l, times in enumerate(self.service_times):
            for t in times:
                out.append((float(t), l, -1))
                if l + 1 < self.stations:
                    out.append((float(t), l + 1, +1))
        out.sort(key=lambda e: (e[0], e[2], e[1]))
        return out

    def scaled_levels(self, grid) -> np.ndarray:
        """Q_l(N tau) / N on a scaled-time grid; shape (stations, len(grid))."""
        n = max(self.jobs, 1)
        t = np.asarray(grid) * n
        return np.vstack([self.level(l, t) / n for l in range(self.stations)])


def simulate_path_queues(sys: PathQueueSystem, horizon: float, rng: np.random.Generator,
                         processes=None) -> QueueTrajectory:
    """Run the tandem queue on real time [0, horizon].

    ``processes`` optionally gives one ``ProcessSpec`` per arc; by default
    each arc receives packets as a ``sys.kind`` process of rate ``z``.
    """
    probs = sys.candidate_probabilities
    cand_times = []
    recv_counts = []
    for l, z in enumerate(sys.arc_rates):
        spec = processes[l] if processes is not None else make_spec(sys.kind, {frozenset({l + 1}): z})
        times = np.array([ev.time for ev in generate_events(spec, horizon, rng, link=l) if ev.received])
        recv_counts.append(len(times))
        # independent thinning draw per reception
        keep = rng.random(len(times)) < probs[l]
        cand_times.append(times[keep])

    stations = sys.stations
    all_t = np.concatenate(cand_times) if stations else np.zeros(0)
    all_l = np.concatenate([np.full(len(c), l) for l, c in enumerate(cand_times)])
    order = np.lexsort((all_l, all_t))
    queue = [0] * stations
    queue[0] = sys.jobs
    served = [[] for _ in range(stations)]
    for idx in order:
        l = int(all_l[idx])
        if queue[l] > 0:
            queue[l] -= 1
            if l + 1 < stations:
                queue[l + 1] += 1
            served[l].append(all_t[idx])
    return QueueTrajectory(
        jobs=sys.jobs,
        horizon=horizon,
        candidate_times=cand_times,
        service_times=[np.array(s, dtype=float) for s in served],
        receptions=recv_counts,
    )


def fluid_solution(sys: PathQueueSystem, tau) -> np.ndarray:
    """Fluid levels per station at scaled time ``tau`` (scalar or array).

    Station 1 drains linearly from 1 at the candidate rate; every
    downstream station stays empty.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    first = np.maximum(0.0, 1.0 - sys.drain_rate * tau)
    levels = np.zeros((sys.stations,) + tau.shape)
    levels[0] = first
    return levels


@dataclass
class ConvergenceReport:
    grid: np.ndarray  # scaled time points
    jobs: list  # N values
    sup_distance: list  # station 1, averaged trajectory vs fluid
    downstream_max: list  # max over stations >= 2 and tau of the averaged scaled level
    downstream_trial_max: list  # mean over trials of each trial's downstream max
    mean_levels: list = field(default_factory=list)  # per N: (stations, grid) averages
    fluid_levels: np.ndarray | None = None

    @property
    def decreasing(self) -> bool:
        d = self.sup_distance
        return all(b < a for a, b in zip(d, d[1:]))


def check_fluid_convergence(template: PathQueueSystem, jobs_grid, horizon: float | None, trials: int,
                            rng: np.random.Generator, points: int = 200) -> ConvergenceReport:
    """Compare trial-averaged scaled trajectories with the fluid curve.

    ``horizon`` is in scaled time; by default 1.5 times the fluid drain time.
    """
    jobs_grid = list(jobs_grid)
    if any(b <= a for a, b in zip(jobs_grid, jobs_grid[1:])):
        raise ValueError("job grid must be increasing")
    if horizon is None:
        horizon = 1.5 / template.drain_rate
    grid = np.linspace(0.0, horizon, points)
    fluid = fluid_solution(template, grid)
    report = ConvergenceReport(grid, jobs_grid, [], [], [], fluid_levels=fluid)
    for n in jobs_grid:
        sys = template.with_jobs(n)
        acc = np.zeros((sys.stations, points))
        trial_max = []
        for _ in range(trials):
            traj = simulate_path_queues(sys, horizon * n, rng)
            levels = traj.scaled_levels(grid)
            acc += levels
            trial_max.append(float(levels[1:].max()) if sys.stations > 1 else 0.0)
        mean = acc / trials
        report.mean_levels.append(mean)
        report.sup_distance.append(float(np.max(np.abs(mean[0] - fluid[0]))))
        report.downstream_max.append(float(mean[1:].max()) if sys.stations > 1 else 0.0)
        report.downstream_trial_max.append(float(np.mean(trial_max)))
    return report
