"""Learning agent-based simulation of the arrival game.

A finite pool of agents joins the queue on random days, each receiving a
noisy signal about that day's server mode. Agents keep running-average
waits per (signal, slot) pair and mix uniform exploration with picking
the historically best slot, exploring less as they accumulate visits.
The long-run averaged choice frequencies and waits are the objects
compared against the equilibrium solutions.

Also provides the coupled-path workload dominance experiment: with job
sizes built from shared uniforms, the slow-belief system pathwise
dominates the fast-belief one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import ServiceDist
from .fluid import FluidEquilibrium
from .workload import ArrivalStrategy


def theta(x: float, c1: float, c2: float) -> float:
    """Exploitation probability after x prior arrivals.

    exp(c1 / (1 - exp(c2 x))) for x >= 1, rising from ~0 toward 1; the
    singular point x = 0 is assigned its right limit 0 (a fresh agent
    always explores).
    """
    if c1 <= 0.0 or c2 <= 0.0:
        raise ValueError("sigmoid parameters must be positive")
    if x < 0:
        raise ValueError("visit count must be nonnegative")
    if x == 0:
        return 0.0
    t = c2 * x
    if t > 700.0:
        return math.nextafter(1.0, 0.0)
    return min(math.exp(c1 / -math.expm1(t)), math.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class AbmConfig:
    """Simulation parameters.

    ``pool`` agents join each day independently with probability
    lam / pool; ``days`` is the simulated horizon. Signals have
    correctness q against a mode that is slow with probability p.
    """

    pool: int
    lam: float
    days: int
    p: float
    q: float
    x_a: ServiceDist
    x_b: ServiceDist
    tau: int
    n_slots: int
    c1: float = 1.0
    c2: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.pool < 1:
            raise ValueError("agent pool must be nonempty")
        if not 0.0 <= self.lam <= self.pool:
            raise ValueError("mean daily arrivals cannot exceed the pool size")
        if self.days < 1:
            raise ValueError("need at least one day")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("mode probability p must lie in [0, 1]")
        if not 0.5 < self.q <= 1.0:
            raise ValueError("signal correctness q must lie in (1/2, 1]")
        if self.c1 <= 0.0 or self.c2 <= 0.0:
            raise ValueError("sigmoid parameters must be positive")
        if int(self.tau) != self.tau or self.tau < 1 or self.n_slots < 1:
            raise ValueError("invalid slot structure")

    @property
    def join_prob(self) -> float:
        return self.lam / self.pool


@dataclass
class AgentState:
    """One agent's learning state: running-average waits and visit counts
    per (belief, slot), plus arrival counts per belief."""

    wbar: np.ndarray
    visits: np.ndarray
    arrivals_by_belief: np.ndarray

    @classmethod
    def fresh(cls, n_slots: int) -> "AgentState":
        return cls(
            wbar=np.zeros((2, n_slots)),
            visits=np.zeros((2, n_slots), dtype=np.int64),
            arrivals_by_belief=np.zeros(2, dtype=np.int64),
        )

    def record(self, belief_idx: int, slot: int, wait: float) -> None:
        self.visits[belief_idx, slot] += 1
        n = self.visits[belief_idx, slot]
        self.wbar[belief_idx, slot] += (wait - self.wbar[belief_idx, slot]) / n
        self.arrivals_by_belief[belief_idx] += 1


def choose_slot(
    agent: AgentState, belief_idx: int, rng: np.random.Generator, c1: float, c2: float
) -> tuple[int, bool]:
    """Pick a slot: uniform exploration, or the slot with the lowest
    average wait so far (ties broken uniformly).

    Returns (slot, explored).
    """
    n_slots = agent.wbar.shape[1]
    if rng.random() >= theta(int(agent.arrivals_by_belief[belief_idx]), c1, c2):
        return int(rng.integers(n_slots)), True
    row = agent.wbar[belief_idx]
    best = np.flatnonzero(row == row.min())
    return int(best[rng.integers(best.size)]), False


def simulate_day(
    arrivals: list[tuple[int, int]],
    service: ServiceDist,
    tau: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """FCFS waits for one day's arrivals under the given service law.

    ``arrivals`` holds (agent_id, slot) pairs. Within a slot the cohort is
    admitted in random order; each wait is the unfinished work ahead at
    admission. The workload drains tau units per slot.
    """
    waits = np.zeros(len(arrivals))
    by_slot: dict[int, list[int]] = {}
    for idx, (_, slot) in enumerate(arrivals):
        by_slot.setdefault(int(slot), []).append(idx)
    support = np.arange(len(service.pmf))
    probs = service.pmf.mass / service.pmf.total
    backlog = 0.0
    for slot in range(0, max(by_slot, default=-1) + 1):
        cohort = by_slot.get(slot, ())
        if cohort:
            order = rng.permutation(len(cohort))
            jobs = rng.choice(support, size=len(cohort), p=probs)
            ahead = backlog
            for pos in order:
                waits[cohort[pos]] = ahead
                ahead += jobs[pos]
            backlog = ahead
        backlog = max(0.0, backlog - tau)
    return waits


@dataclass
class AbmResult:
    """Long-run averages: per-belief choice frequencies and waits.

    ``pbar`` rows are averaged per-agent arrival distributions (one row
    per belief); ``wbar_pop`` the matching averaged waits;
    ``slot_mean_wait`` the frequency-weighted average of agents' own mean
    waits per (belief, slot), so that wbar_pop == sum_t pbar * slot_mean_wait
    exactly; ``explored`` / ``decisions`` per-day exploration diagnostics.
    """

    pbar: np.ndarray
    wbar_pop: np.ndarray
    slot_mean_wait: np.ndarray
    explored: np.ndarray
    decisions: np.ndarray
    days: int
    contributing: np.ndarray

    def cdf(self, belief: str) -> np.ndarray:
        return np.cumsum(self.pbar[0 if belief == "a" else 1])


def run_abm(cfg: AbmConfig) -> AbmResult:
    """Simulate the learning dynamics for cfg.days days."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_slots
    agents = [AgentState.fresh(n) for _ in range(cfg.pool)]
    choice_counts = np.zeros((cfg.pool, 2, n), dtype=np.int64)
    explored = np.zeros(cfg.days, dtype=np.int64)
    decisions = np.zeros(cfg.days, dtype=np.int64)
    services = {0: cfg.x_a, 1: cfg.x_b}
    for day in range(cfg.days):
        mode = 0 if rng.random() < cfg.p else 1
        joiners = np.flatnonzero(rng.random(cfg.pool) < cfg.join_prob)
        if joiners.size == 0:
            continue
        correct = rng.random(joiners.size) < cfg.q
        beliefs = np.where(correct, mode, 1 - mode)
        arrivals: list[tuple[int, int]] = []
        for k, belief_idx in zip(joiners, beliefs):
            slot, did_explore = choose_slot(agents[k], int(belief_idx), rng, cfg.c1, cfg.c2)
            arrivals.append((int(k), slot))
            explored[day] += did_explore
            decisions[day] += 1
        waits = simulate_day(arrivals, services[mode], cfg.tau, rng)
        for (k, slot), belief_idx, wait in zip(arrivals, beliefs, waits):
            agents[k].record(int(belief_idx), slot, float(wait))
            choice_counts[k, belief_idx, slot] += 1
    pbar = np.zeros((2, n))
    freq_wait = np.zeros((2, n))
    wbar_pop = np.zeros(2)
    contributing = np.zeros(2, dtype=np.int64)
    for i in range(2):
        for k in range(cfg.pool):
            total = choice_counts[k, i].sum()
            if total == 0:
                continue
            freq = choice_counts[k, i] / total
            pbar[i] += freq
            freq_wait[i] += freq * agents[k].wbar[i]
            contributing[i] += 1
        if contributing[i]:
            pbar[i] /= contributing[i]
            freq_wait[i] /= contributing[i]
            wbar_pop[i] = float(freq_wait[i].sum())
    slot_mean = np.divide(
        freq_wait, pbar, out=np.zeros_like(freq_wait), where=pbar > 0
    )
    return AbmResult(pbar, wbar_pop, slot_mean, explored, decisions, cfg.days, contributing)


@dataclass(frozen=True)
class DominanceReport:
    dominance_holds: bool
    paths_checked: int
    violating_paths: int
    max_workload_gap: float


def _sample_arrival_times(
    strategy, horizon: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Arrival instants drawn from a slot vector, a fluid profile given as
    a (FluidEquilibrium, side) pair, or uniformly when no strategy is
    given."""
    if size == 0:
        return np.zeros(0)
    if strategy is None:
        return rng.uniform(0.0, horizon, size)
    if isinstance(strategy, tuple) and isinstance(strategy[0], FluidEquilibrium):
        eq, side = strategy
        u = rng.random(size)
        grid = np.linspace(0.0, eq.horizon, 4096)
        cdf = np.concatenate(([0.0], eq.cdf(side, grid)))
        return np.interp(u, cdf, np.concatenate(([0.0], grid)))
    probs = strategy.probs if isinstance(strategy, ArrivalStrategy) else np.asarray(strategy, float)
    probs = probs / probs.sum()
    slots = rng.choice(probs.size, size=size, p=probs)
    return slots * (horizon / probs.size)


def coupled_dominance(
    lam_a: float,
    lam_b: float,
    f_a,
    f_b,
    mu_a: float,
    mu_b: float,
    horizon: float,
    n_paths: int,
    rng: np.random.Generator,
    coupled: bool = True,
) -> DominanceReport:
    """Pathwise workload/queue dominance experiment.

    Both belief systems see the same arrival stream; job sizes are
    exponential with rate mu_i, built from shared uniforms when
    ``coupled`` (so the slow system's jobs are a fixed multiple of the
    fast system's). Checks V_a >= V_b and Q_a >= Q_b just after every
    arrival and departure epoch on every path.
    """
    if mu_a > mu_b:
        raise ValueError("slow-belief rate mu_a cannot exceed mu_b")
    violating = 0
    max_gap = 0.0
    for _ in range(n_paths):
        total = rng.poisson(lam_a + lam_b)
        pick_a = rng.random(total) < lam_a / (lam_a + lam_b)
        times = np.sort(
            np.concatenate(
                [
                    _sample_arrival_times(f_a, horizon, int(pick_a.sum()), rng),
                    _sample_arrival_times(f_b, horizon, int(total - pick_a.sum()), rng),
                ]
            )
        )
        if times.size == 0:
            continue
        u = rng.random(times.size)
        jobs_b = -np.log(u) / mu_b
        if coupled:
            jobs_a = (mu_b / mu_a) * jobs_b
        else:
            jobs_a = -np.log(rng.random(times.size)) / mu_a
        ok, gap = _path_dominates(times, jobs_a, jobs_b)
        max_gap = max(max_gap, gap)
        if not ok:
            violating += 1
    return DominanceReport(violating == 0, n_paths, violating, max_gap)


def _workload_path(times: np.ndarray, jobs: np.ndarray):
    """Post-arrival workloads and departure instants for one sample path."""
    v_after = np.empty(times.size)
    departures = np.empty(times.size)
    v = 0.0
    prev = 0.0
    for k in range(times.size):
        v = max(0.0, v - (times[k] - prev))
        departures[k] = times[k] + v + jobs[k]
        v += jobs[k]
        v_after[k] = v
        prev = times[k]
    return v_after, departures


def _path_dominates(times, jobs_a, jobs_b) -> tuple[bool, float]:
    va_after, dep_a = _workload_path(times, jobs_a)
    vb_after, dep_b = _workload_path(times, jobs_b)
    epochs = np.concatenate([times, dep_a, dep_b])
    worst = 0.0
    for e in epochs:
        k = int(np.searchsorted(times, e, side="right")) - 1
        if k < 0:
            continue
        va = max(0.0, va_after[k] - (e - times[k]))
        vb = max(0.0, vb_after[k] - (e - times[k]))
        qa = int(np.sum((times <= e) & (dep_a > e)))
        qb = int(np.sum((times <= e) & (dep_b > e)))
        worst = max(worst, vb - va, float(qb - qa))
        if vb > va + 1e-9 or qb > qa:
            return False, worst
    return True, worst
