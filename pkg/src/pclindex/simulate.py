"""Event-driven continuous-time simulation of the index policies.

The chains are simulated exactly: exponential clocks race between the
global arrival (or per-product order/production) events, holding costs
are integrated in closed form between events since the cost rate is
piecewise constant, and rejection charges / production subsidies are
lumped at their event epochs with the appropriate discount.  Replications
are independent, each with its own substream of the base seed, and the
report always carries the confidence interval, never a bare mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .policies import (MTSSystem, RoutingSystem, mts_decide, mts_index_table,
                       routing_decide, routing_index_table)

BOUNDARY_FLAG_FRACTION = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """Budget and bookkeeping knobs for one simulation study.

    ``horizon`` is simulated time per replication; ``max_events`` caps the
    event count instead when set.  Infinite buffers are truncated at
    ``truncation`` and the report flags runs where the truncation boundary
    was hit too often.  Under the average criterion the first
    ``warmup_fraction`` of the horizon is discarded.
    """

    horizon: float | None = None
    max_events: int | None = None
    replications: int = 20
    seed: int = 0
    truncation: int = 200
    warmup_fraction: float = 0.1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.horizon is None and self.max_events is None:
            raise ValueError("set a time horizon or an event budget")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup fraction must lie in [0, 1)")


@dataclass(frozen=True)
class SimReport:
    """Monte Carlo estimate of a policy's cost objective."""

    policy: str
    mean: float
    se: float
    ci95: tuple[float, float]
    replications: int
    events: int
    boundary_hits: int
    boundary_fraction: float
    truncation_flagged: bool
    seed: int
    per_replication: tuple[float, ...]


def _finish_report(name: str, values: list[float], events: int, hits: int,
                   seed: int) -> SimReport:
    arr = np.asarray(values)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else float("nan")
    frac = hits / max(1, events)
    return SimReport(
        policy=name, mean=mean, se=se,
        ci95=(mean - 1.96 * se, mean + 1.96 * se),
        replications=len(arr), events=events,
        boundary_hits=hits, boundary_fraction=frac,
        truncation_flagged=frac > BOUNDARY_FLAG_FRACTION,
        seed=seed, per_replication=tuple(values),
    )


class _CostAccumulator:
    """Discounted or time-average cost bookkeeping for one replication."""

    def __init__(self, alpha: float, warmup: float):
        self.alpha = alpha
        self.warmup = warmup
        self.total = 0.0

    def accrue(self, rate: float, t0: float, t1: float):
        if t1 <= t0:
            return
        if self.alpha > 0:
            self.total += rate * (math.exp(-self.alpha * t0)
                                  - math.exp(-self.alpha * t1)) / self.alpha
        else:
            lo = max(t0, self.warmup)
            if t1 > lo:
                self.total += rate * (t1 - lo)

    def lump(self, amount: float, t: float):
        if self.alpha > 0:
            self.total += amount * math.exp(-self.alpha * t)
        elif t >= self.warmup:
            self.total += amount

    def objective(self, elapsed: float) -> float:
        if self.alpha > 0:
            return self.total
        return self.total / max(elapsed - self.warmup, 1e-300)


def _new_accumulator(alpha: float, horizon: float, config: SimConfig):
    """Accumulator plus the event count at which warm-up ends.

    Time-based warm-up when a horizon is given; with a pure event budget
    the warm-up endpoint becomes known only when that event is reached,
    so accrual starts disabled and the caller stamps the time then.
    """
    if alpha > 0 or config.warmup_fraction == 0.0:
        return _CostAccumulator(alpha, 0.0), -1
    if math.isfinite(horizon):
        return _CostAccumulator(alpha, config.warmup_fraction * horizon), -1
    warmup_events = max(1, int(config.warmup_fraction * (config.max_events or 0)))
    return _CostAccumulator(alpha, math.inf), warmup_events


def _caps(ns: Sequence[int | None], truncation: int) -> list[int]:
    return [n if n is not None else truncation for n in ns]


def simulate_routing(sys: RoutingSystem, policy: Callable | str,
                     config: SimConfig, name: str | None = None) -> SimReport:
    """Simulate an admission/routing policy on the parallel-queue system.

    ``policy`` is "index", "shortest", "naive", or a callable
    ``(state, tables, caps) -> queue | None``.  The objective is the
    discounted (or long-run average) sum of holding costs and rejection
    charges.
    """
    from .policies import naive_decide, shortest_queue_decide

    caps = _caps([q.n for q in sys.queues], config.truncation)
    tables = [routing_index_table(sys, k, caps[k]) for k in range(len(sys.queues))]
    truncated = [q.n is None for q in sys.queues]

    if callable(policy):
        decide = policy
        name = name or getattr(policy, "__name__", "custom")
    elif policy == "index":
        decide = lambda st, tb, cp: routing_decide(sys, st, tables=tb, full=cp)
        name = name or "index"
    elif policy == "shortest":
        decide = lambda st, tb, cp: shortest_queue_decide(sys, st, full=cp)
        name = name or "shortest-queue"
    elif policy == "naive":
        decide = lambda st, tb, cp: naive_decide(sys, st, full=cp)
        name = name or "naive-rate"
    else:
        raise ValueError(f"unknown policy {policy!r}")

    values: list[float] = []
    total_events = 0
    boundary_hits = 0
    for rep in range(config.replications):
        rng = np.random.default_rng([config.seed, rep])
        state = [0] * len(sys.queues)
        t = 0.0
        events = 0
        horizon = config.horizon if config.horizon is not None else math.inf
        acc, warmup_events = _new_accumulator(sys.alpha, horizon, config)
        while t < horizon and (config.max_events is None or events < config.max_events):
            rates = [sys.lam] + [q.mu_at(state[k]) for k, q in enumerate(sys.queues)]
            total = sum(rates)
            dt = rng.exponential(1.0 / total)
            t_next = t + dt
            if t_next > horizon:
                acc.accrue(sum(q.h_at(state[k]) for k, q in enumerate(sys.queues)),
                           t, horizon)
                t = horizon
                break
            acc.accrue(sum(q.h_at(state[k]) for k, q in enumerate(sys.queues)),
                       t, t_next)
            t = t_next
            events += 1
            if events == warmup_events:
                acc.warmup = t
            pick = rng.random() * total
            if pick < rates[0]:
                k = decide(state, tables, caps)
                if k is None:
                    acc.lump(sys.nu if math.isfinite(sys.nu) else 0.0, t)
                    if any(truncated[k2] and state[k2] >= caps[k2]
                           for k2 in range(len(sys.queues))):
                        boundary_hits += 1
                else:
                    state[k] += 1
            else:
                acc_rate = rates[0]
                for k in range(len(sys.queues)):
                    acc_rate += rates[k + 1]
                    if pick < acc_rate:
                        state[k] -= 1
                        break
        total_events += events
        values.append(acc.objective(t))
    return _finish_report(name, values, total_events, boundary_hits, config.seed)


def simulate_mts(sys: MTSSystem, policy: Callable | str, config: SimConfig,
                 name: str | None = None) -> SimReport:
    """Simulate a production policy on the make-to-stock facility.

    The facility's target product is re-chosen at every event epoch from
    the stationary policy; orders deplete stock (lost when empty, already
    priced into the net cost rate) and completions earn the subsidy.
    """
    from .policies import least_stock_decide

    caps = _caps([p.n for p in sys.products], config.truncation)
    tables = [mts_index_table(sys, k, caps[k]) for k in range(len(sys.products))]
    truncated = [p.n is None for p in sys.products]

    if callable(policy):
        decide = policy
        name = name or getattr(policy, "__name__", "custom")
    elif policy == "index":
        decide = lambda st, tb, cp: mts_decide(sys, st, tables=tb, full=cp)
        name = name or "index"
    elif policy == "least-stock":
        decide = lambda st, tb, cp: least_stock_decide(sys, st, full=cp)
        name = name or "least-stock"
    else:
        raise ValueError(f"unknown policy {policy!r}")

    values: list[float] = []
    total_events = 0
    boundary_hits = 0
    m = len(sys.products)
    for rep in range(config.replications):
        rng = np.random.default_rng([config.seed, rep])
        state = [0] * m
        t = 0.0
        events = 0
        horizon = config.horizon if config.horizon is not None else math.inf
        acc, warmup_events = _new_accumulator(sys.alpha, horizon, config)
        while t < horizon and (config.max_events is None or events < config.max_events):
            target = decide(state, tables, caps)
            if target is not None and truncated[target] and state[target] >= caps[target] - 1:
                boundary_hits += 1
            order_rates = [p.lam_at(state[k]) for k, p in enumerate(sys.products)]
            prod_rate = sys.products[target].mu_at(state[target]) if target is not None else 0.0
            total = sum(order_rates) + prod_rate
            if total <= 0:
                break
            dt = rng.exponential(1.0 / total)
            t_next = t + dt
            cost_rate = sum(p.net_cost(state[k]) for k, p in enumerate(sys.products))
            if t_next > horizon:
                acc.accrue(cost_rate, t, horizon)
                t = horizon
                break
            acc.accrue(cost_rate, t, t_next)
            t = t_next
            events += 1
            if events == warmup_events:
                acc.warmup = t
            pick = rng.random() * total
            if pick < prod_rate:
                state[target] += 1
                acc.lump(-sys.nu, t)
            else:
                acc_rate = prod_rate
                for k in range(m):
                    acc_rate += order_rates[k]
                    if pick < acc_rate:
                        if state[k] > 0:
                            state[k] -= 1
                        break
        total_events += events
        values.append(acc.objective(t))
    return _finish_report(name, values, total_events, boundary_hits, config.seed)


def simulate(system, policy, config: SimConfig, name: str | None = None) -> SimReport:
    """Dispatch on the system type (routing or make-to-stock)."""
    if isinstance(system, RoutingSystem):
        return simulate_routing(system, policy, config, name)
    if isinstance(system, MTSSystem):
        return simulate_mts(system, policy, config, name)
    raise TypeError(f"cannot simulate {type(system).__name__}")
