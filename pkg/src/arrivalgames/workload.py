"""Transient workload of the discrete-time arrival game.

The acceptance period is split into slots of integer length tau; arrivals
happen at slot openings and the server drains one unit of work per time
unit. Under a fixed belief about the service law, the law of the
unfinished workload just before each slot follows a collapse-and-shift
recursion driven by the compound-Poisson work arriving per slot. The
expected wait of an arrival is the mean pre-slot workload plus half its
own cohort's work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import DEFAULT_TAIL_TOL, Pmf, ServiceDist, compound_poisson, convolve

_DELTA0 = Pmf.point_mass(0)


class InvalidStrategyError(ValueError):
    """Arrival strategy is not a probability vector within tolerance."""


@dataclass(frozen=True)
class SlotGame:
    """Discrete-time game instance: mean populations, slot structure and
    the two believed service laws (slots are indexed 0 .. n_slots-1)."""

    lam_a: float
    lam_b: float
    tau: int
    n_slots: int
    x_a: ServiceDist
    x_b: ServiceDist

    def __post_init__(self):
        if self.lam_a < 0.0 or self.lam_b < 0.0:
            raise ValueError("population means must be nonnegative")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError("slot length must be a positive integer")
        if int(self.n_slots) != self.n_slots or self.n_slots < 1:
            raise ValueError("need at least one slot")

    @property
    def horizon(self) -> int:
        return self.tau * self.n_slots

    def service(self, belief: str) -> ServiceDist:
        return self.x_a if belief == "a" else self.x_b

    def own_lam(self, belief: str) -> float:
        return self.lam_a if belief == "a" else self.lam_b

    def other_lam(self, belief: str) -> float:
        return self.lam_b if belief == "a" else self.lam_a


@dataclass(frozen=True)
class ArrivalStrategy:
    """Probability vector over slots."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("strategy must be a non-empty 1-D vector")
        if np.any(arr < -1e-12) or not np.all(np.isfinite(arr)):
            raise ValueError("strategy entries must be finite and nonnegative")
        arr = np.clip(arr, 0.0, None)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @classmethod
    def point_mass(cls, n_slots: int, slot: int = 0) -> "ArrivalStrategy":
        arr = np.zeros(n_slots)
        arr[slot] = 1.0
        return cls(arr)

    @classmethod
    def uniform(cls, n_slots: int) -> "ArrivalStrategy":
        return cls(np.full(n_slots, 1.0 / n_slots))

    def __len__(self) -> int:
        return self.probs.size

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def normalized(self) -> "ArrivalStrategy":
        total = self.total
        if total <= 0.0:
            raise ValueError("cannot normalize a zero strategy")
        return ArrivalStrategy(self.probs / total)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)


def _as_probs(p, n_slots: int, mass_tol: float) -> np.ndarray:
    arr = p.probs if isinstance(p, ArrivalStrategy) else np.asarray(p, dtype=float)
    if arr.shape != (n_slots,):
        raise InvalidStrategyError(f"strategy must have length {n_slots}")
    if np.any(arr < -1e-12) or not np.all(np.isfinite(arr)):
        raise InvalidStrategyError("strategy entries must be finite and nonnegative")
    total = float(arr.sum())
    if abs(total - 1.0) > mass_tol:
        raise InvalidStrategyError(f"strategy mass {total!r} is off the simplex")
    return np.clip(arr, 0.0, None)


def step_pmf(v: Pmf, h: Pmf, tau: int) -> Pmf:
    """One-slot update: add the arriving work, then drain tau units.

    Mass of v*h at or below tau collapses onto zero; the remainder shifts
    left by tau.
    """
    if int(tau) != tau or tau < 1:
        raise ValueError("slot length must be a positive integer")
    c = convolve(v, h)
    cm = c.mass
    if cm.size <= tau + 1:
        return Pmf(np.array([float(cm.sum())]), c.tail_bound)
    out = np.concatenate(([float(cm[: tau + 1].sum())], cm[tau + 1 :]))
    return Pmf(out, c.tail_bound)


@dataclass(frozen=True)
class SlotState:
    """Workload law just before a slot, with direct and telescoped means."""

    slot: int
    v: Pmf
    ev: float
    ev_tel: float


class WorkloadStepper:
    """Advances the pre-slot workload law slot by slot under one belief.

    States are immutable, so alternative continuations (as in best-response
    search) can branch from any prefix without copying.
    """

    def __init__(self, service: ServiceDist, tau: int, tail_tol: float = DEFAULT_TAIL_TOL):
        self.service = service
        self.tau = int(tau)
        self.tail_tol = tail_tol

    def initial(self) -> SlotState:
        return SlotState(0, _DELTA0, 0.0, 0.0)

    def wait(self, state: SlotState, load: float) -> float:
        """Expected wait of an arrival this slot when the mean number of
        same-slot arrivals is ``load``."""
        return state.ev + 0.5 * load * self.service.chi

    def advance(self, state: SlotState, load: float) -> SlotState:
        h = compound_poisson(load, self.service, self.tail_tol)
        c = convolve(state.v, h)
        cm = c.mass
        tau = self.tau
        head = cm[: min(tau, cm.size)]
        idle_credit = float((tau - np.arange(head.size)) @ head)
        ev_tel = state.ev_tel + load * self.service.chi - tau + idle_credit
        if cm.size <= tau + 1:
            v_next = Pmf(np.array([float(cm.sum())]), c.tail_bound)
        else:
            v_next = Pmf(
                np.concatenate(([float(cm[: tau + 1].sum())], cm[tau + 1 :])),
                c.tail_bound,
            )
        ev = v_next.mean()
        t_next = state.slot + 1
        # Both means are exact up to truncation dust, which grows with the
        # support size and the number of slots composed so far.
        slack = 10.0 * self.tail_tol * cm.size * (t_next + 1) + 1e-9
        assert abs(ev - ev_tel) <= slack, (
            f"workload mean cross-check failed at slot {t_next}: "
            f"direct {ev!r} vs telescoped {ev_tel!r}"
        )
        return SlotState(t_next, v_next, ev, ev_tel)


@dataclass(frozen=True)
class WorkloadProfile:
    """Per-slot workload laws, their means, and expected waits under one
    belief, for a fixed pair of arrival strategies.

    ``ev`` holds the direct pmf means, ``ev_telescoped`` the running-sum
    form; the two agree up to truncation dust.
    """

    belief: str
    v: tuple[Pmf, ...]
    ev: np.ndarray
    ev_telescoped: np.ndarray
    w: np.ndarray


def workload_profile(
    game: SlotGame,
    p_a,
    p_b,
    belief: str,
    mass_tol: float = 1e-6,
) -> WorkloadProfile:
    """Workload law, mean workload and expected wait for every slot."""
    if belief not in ("a", "b"):
        raise ValueError("belief must be 'a' or 'b'")
    pa = _as_probs(p_a, game.n_slots, mass_tol)
    pb = _as_probs(p_b, game.n_slots, mass_tol)
    loads = game.lam_a * pa + game.lam_b * pb
    stepper = WorkloadStepper(game.service(belief), game.tau)
    state = stepper.initial()
    vs, evs, tels, ws = [], [], [], []
    for t in range(game.n_slots):
        vs.append(state.v)
        evs.append(state.ev)
        tels.append(state.ev_tel)
        ws.append(stepper.wait(state, loads[t]))
        if t + 1 < game.n_slots:
            state = stepper.advance(state, loads[t])
    return WorkloadProfile(belief, tuple(vs), np.array(evs), np.array(tels), np.array(ws))


def expected_wait(game: SlotGame, p_a, p_b, belief: str, t: int) -> float:
    """Expected waiting time of an arrival choosing slot t under ``belief``."""
    if not 0 <= t < game.n_slots:
        raise ValueError("slot index out of range")
    return float(workload_profile(game, p_a, p_b, belief).w[t])
