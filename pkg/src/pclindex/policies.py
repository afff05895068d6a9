"""Heuristic index policies for routing and make-to-stock scheduling.

Both problems decompose into single-queue admission-control projects, one
per queue or product, whose indices are computed by the recursions in
:mod:`pclindex.admission` (the make-to-stock case swaps the roles of the
arrival and service rates: producing an item is opening the entry gate of
the stock buffer).  The resulting policy engages the project whose
current state has the smallest index below the charge/subsidy level.

Rate and cost parameters may be given as scalars (constant rate / linear
cost), sequences indexed by the state, or callables; scalar forms enable
the closed-form index expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import admission
from .admission import ACModel, closed_form_index

Action = int | None   # queue/product number, or None for reject/idle


def _as_fn(spec, name: str) -> Callable[[int], float]:
    if callable(spec):
        return lambda j: float(spec(j))
    if isinstance(spec, (int, float)):
        raise TypeError(f"{name}: scalar form must be handled by the caller")
    seq = list(spec)

    def fn(j: int) -> float:
        if j >= len(seq):
            raise ValueError(f"{name} sequence too short for state {j}")
        return float(seq[j])

    return fn


@dataclass(frozen=True)
class QueueSpec:
    """One queue of a routing system.

    ``n`` is the buffer size (None = infinite).  ``mu`` is the service
    rate: a scalar means a constant rate, otherwise a sequence/callable
    over occupancies 1..n.  ``h`` is the holding cost rate: a scalar h
    means the linear cost h*j, otherwise a sequence/callable over 0..n.
    """

    n: int | None
    mu: object
    h: object

    @property
    def constant_rate(self) -> bool:
        return isinstance(self.mu, (int, float))

    @property
    def linear_cost(self) -> bool:
        return isinstance(self.h, (int, float))

    def mu_at(self, j: int) -> float:
        if j < 1:
            return 0.0
        if self.constant_rate:
            return float(self.mu)
        return _as_fn(self.mu, "mu")(j - 1)

    def h_at(self, j: int) -> float:
        if self.linear_cost:
            return float(self.h) * j
        return _as_fn(self.h, "h")(j)


@dataclass(frozen=True)
class RoutingSystem:
    """Poisson arrivals at rate ``lam`` routed to parallel queues (or
    rejected at charge ``nu``); discount rate ``alpha`` (0 = average)."""

    lam: float
    queues: tuple[QueueSpec, ...]
    alpha: float = 0.0
    nu: float = math.inf

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")
        if self.alpha < 0:
            raise ValueError("discount rate must be nonnegative")
        object.__setattr__(self, "queues", tuple(self.queues))

    def admission_model(self, k: int, n_states: int) -> ACModel:
        """Queue k viewed as an admission-control project on 0..n_states."""
        q = self.queues[k]
        lam = np.full(n_states + 1, self.lam)
        mu = np.array([q.mu_at(j) for j in range(1, n_states + 1)])
        h = np.array([q.h_at(j) for j in range(n_states + 1)])
        return ACModel(n_states, lam, mu, h, self.alpha)

    def validate(self):
        """Per-queue regularity reports for the induced admission models."""
        out = []
        for k, q in enumerate(self.queues):
            n = q.n if q.n is not None else 8
            out.append(admission.validate_assumptions(self.admission_model(k, n)))
        return out


def routing_index(sys: RoutingSystem, k: int, j: int) -> float:
    """Fair rejection charge of queue k at occupancy j.

    Constant-rate linear-cost queues under the average criterion use the
    closed form (its critical branch covers traffic ratio one); otherwise
    the index comes from the admission recursion, whose forward structure
    makes a truncation at j+2 exact even for infinite buffers.
    """
    q = sys.queues[k]
    if q.n is not None and j >= q.n:
        raise ValueError(f"index undefined at a full buffer (j = {j}, n = {q.n})")
    if q.constant_rate and q.linear_cost and sys.alpha == 0:
        return closed_form_index("linear", sys.lam, float(q.mu), float(q.h), j)
    n_eff = q.n if q.n is not None else j + 2
    model = sys.admission_model(k, n_eff)
    nu = admission.indices(model) if sys.alpha > 0 else admission.average_indices(model)
    return float(nu[j])


def routing_index_table(sys: RoutingSystem, k: int, up_to: int) -> np.ndarray:
    """Indices of queue k for occupancies 0..up_to-1 in one pass."""
    q = sys.queues[k]
    if q.constant_rate and q.linear_cost and sys.alpha == 0:
        return np.array([closed_form_index("linear", sys.lam, float(q.mu), float(q.h), j)
                         for j in range(up_to)])
    model = sys.admission_model(k, max(up_to + 1, q.n or 0))
    nu = admission.indices(model) if sys.alpha > 0 else admission.average_indices(model)
    return nu[:up_to]


def routing_decide(sys: RoutingSystem, state: Sequence[int], nu: float | None = None,
                   tables: Sequence[np.ndarray] | None = None,
                   full: Sequence[int] | None = None) -> Action:
    """Route to the nonfull queue with the smallest index below the charge.

    Ties go to the lowest queue number; returns None (reject) when no
    nonfull queue has an index below ``nu``.  ``tables``/``full`` allow a
    simulator to pass precomputed index tables and truncation caps.
    """
    if nu is None:
        nu = sys.nu
    best: tuple[float, int] | None = None
    for k, q in enumerate(sys.queues):
        cap = full[k] if full is not None else q.n
        j = state[k]
        if cap is not None and j >= cap:
            continue
        idx = float(tables[k][j]) if tables is not None else routing_index(sys, k, j)
        if idx < nu and (best is None or idx < best[0]):
            best = (idx, k)
    return None if best is None else best[1]


def shortest_queue_decide(sys: RoutingSystem, state: Sequence[int],
                          nu: float | None = None,
                          full: Sequence[int] | None = None) -> Action:
    """Baseline: route to the shortest nonfull queue, never reject early."""
    best: tuple[int, int] | None = None
    for k, q in enumerate(sys.queues):
        cap = full[k] if full is not None else q.n
        if cap is not None and state[k] >= cap:
            continue
        if best is None or state[k] < best[0]:
            best = (state[k], k)
    return None if best is None else best[1]


def naive_decide(sys: RoutingSystem, state: Sequence[int], nu: float | None = None,
                 full: Sequence[int] | None = None) -> Action:
    """Baseline: route by the one-step rate h_k(j_k + 1) / mu_k(j_k + 1),
    with the same charge gate as the index policy."""
    if nu is None:
        nu = sys.nu
    best: tuple[float, int] | None = None
    for k, q in enumerate(sys.queues):
        cap = full[k] if full is not None else q.n
        j = state[k]
        if cap is not None and j >= cap:
            continue
        guess = q.h_at(j + 1) / q.mu_at(j + 1)
        if guess < nu and (best is None or guess < best[0]):
            best = (guess, k)
    return None if best is None else best[1]


# ---------------------------------------------------------------------------
# Make-to-stock scheduling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductSpec:
    """One product of a make-to-stock facility.

    ``lam`` is the order rate (scalar = constant, else per stock level
    0..n), ``mu`` the production rate over stock levels 0..n-1, ``c`` the
    stock holding cost rate (scalar c = linear c*j), ``s`` the cost per
    lost order and ``r`` the selling price (scalar = constant).
    """

    n: int | None
    lam: object
    mu: object
    c: object
    s: float
    r: object

    @property
    def constant_rates(self) -> bool:
        return isinstance(self.lam, (int, float)) and isinstance(self.mu, (int, float))

    def lam_at(self, j: int) -> float:
        if isinstance(self.lam, (int, float)):
            return float(self.lam)
        return _as_fn(self.lam, "lam")(j)

    def mu_at(self, j: int) -> float:
        if isinstance(self.mu, (int, float)):
            return float(self.mu)
        return _as_fn(self.mu, "mu")(j)

    def c_at(self, j: int) -> float:
        if isinstance(self.c, (int, float)):
            return float(self.c) * j
        return _as_fn(self.c, "c")(j)

    def r_at(self, j: int) -> float:
        if isinstance(self.r, (int, float)):
            return float(self.r)
        return _as_fn(self.r, "r")(j)

    def net_cost(self, j: int) -> float:
        """Holding plus expected stockout minus sales revenue, per unit time."""
        out = self.c_at(j)
        if j == 0:
            out += self.s * self.lam_at(0)
        else:
            out -= self.r_at(j) * self.lam_at(j)
        return out


@dataclass(frozen=True)
class MTSSystem:
    """Make-to-stock facility: one product may be produced at a time,
    subsidized at rate ``nu`` per completed item."""

    products: tuple[ProductSpec, ...]
    alpha: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("discount rate must be nonnegative")
        object.__setattr__(self, "products", tuple(self.products))

    def admission_model(self, k: int, n_states: int) -> ACModel:
        """Product k's stock as an admission-control project with the roles
        of arrivals and services swapped: births are production completions,
        deaths are filled orders, costs are the net cost rates."""
        p = self.products[k]
        lam = np.array([p.mu_at(j) for j in range(n_states)] + [0.0])
        mu = np.array([p.lam_at(j) for j in range(1, n_states + 1)])
        h = np.array([p.net_cost(j) for j in range(n_states + 1)])
        return ACModel(n_states, lam, mu, h, self.alpha)

    def validate(self):
        out = []
        for k, p in enumerate(self.products):
            n = p.n if p.n is not None else 8
            out.append(admission.validate_assumptions(self.admission_model(k, n)))
        return out


def mts_index(sys: MTSSystem, k: int, j: int) -> float:
    """Critical production subsidy for product k at stock level j.

    Constant rates with linear or quadratic stock costs (constant price)
    under the average criterion use the closed forms when the traffic
    ratio differs from one; the critical ratio and all state-dependent
    cases fall back to the swapped admission recursion.
    """
    p = sys.products[k]
    if p.n is not None and j >= p.n:
        raise ValueError(f"index undefined at a full stock (j = {j}, n = {p.n})")
    if (p.constant_rates and sys.alpha == 0 and isinstance(p.r, (int, float))
            and isinstance(p.c, (int, float))):
        rho = p.lam_at(0) / p.mu_at(0)
        if abs(rho - 1.0) > 1e-14:
            return mts_linear_index(float(p.c), float(p.mu), rho, float(p.s),
                                    float(p.r), j)
    n_eff = p.n if p.n is not None else j + 2
    model = sys.admission_model(k, n_eff)
    nu = admission.indices(model) if sys.alpha > 0 else admission.average_indices(model)
    return float(nu[j])


def mts_linear_index(c: float, mu: float, rho: float, s: float, r: float,
                     j: int) -> float:
    """Closed-form production index: constant rates, linear stock cost,
    constant price, average criterion, traffic ratio != 1."""
    if abs(rho - 1.0) < 1e-14:
        raise ValueError("closed form needs traffic ratio != 1")
    one = 1.0 - rho
    return (c / mu) * ((rho ** (-j - 1) - 1.0) / one ** 2 - (j + 1) / one) - r - s


def mts_quadratic_index(c: float, mu: float, rho: float, s: float, r: float,
                        j: int) -> float:
    """Closed-form production index: quadratic stock cost variant."""
    if abs(rho - 1.0) < 1e-14:
        raise ValueError("closed form needs traffic ratio != 1")
    one = 1.0 - rho
    bracket = (((2 * j + 3) / one ** 2 - 2.0 / one ** 3) * rho ** (-j - 1)
               - (j + 1) ** 2 / one - 1.0 / one ** 2 + 2.0 / one ** 3)
    return (c / mu) * bracket - r - s


def mts_index_table(sys: MTSSystem, k: int, up_to: int) -> np.ndarray:
    """Indices of product k for stock levels 0..up_to-1 in one pass."""
    p = sys.products[k]
    model = sys.admission_model(k, max(up_to + 1, p.n or 0))
    nu = admission.indices(model) if sys.alpha > 0 else admission.average_indices(model)
    return nu[:up_to]


def mts_decide(sys: MTSSystem, state: Sequence[int], nu: float | None = None,
               tables: Sequence[np.ndarray] | None = None,
               full: Sequence[int] | None = None) -> Action:
    """Produce the product with the smallest index below the subsidy,
    among those with nonfull stock; idle otherwise.  Ties go to the
    lowest product number."""
    if nu is None:
        nu = sys.nu
    best: tuple[float, int] | None = None
    for k, p in enumerate(sys.products):
        cap = full[k] if full is not None else p.n
        j = state[k]
        if cap is not None and j >= cap:
            continue
        idx = float(tables[k][j]) if tables is not None else mts_index(sys, k, j)
        if idx < nu and (best is None or idx < best[0]):
            best = (idx, k)
    return None if best is None else best[1]


def least_stock_decide(sys: MTSSystem, state: Sequence[int], nu: float | None = None,
                       full: Sequence[int] | None = None) -> Action:
    """Baseline: always produce the product with the least stock."""
    best: tuple[int, int] | None = None
    for k, p in enumerate(sys.products):
        cap = full[k] if full is not None else p.n
        if cap is not None and state[k] >= cap:
            continue
        if best is None or state[k] < best[0]:
            best = (state[k], k)
    return None if best is None else best[1]


# ---------------------------------------------------------------------------
# Switching curve of the two-queue routing index policy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchingCurve:
    """Routing boundary of a two-queue system: ``boundary[j1]`` is the
    smallest j2 at which the decision flips back to queue 1.  The slope
    fields are populated only in heavy traffic (both ratios above one),
    where the boundary is asymptotically linear."""

    boundary: tuple[int, ...]
    empirical_slope: float | None
    limit_slope: float | None
    heavy_traffic: bool


def switching_curve(sys: RoutingSystem, bound: int, fit_from: int = 50) -> SwitchingCurve:
    """Trace the two-queue routing boundary on a state grid.

    For each occupancy j1 of queue 1 the boundary is the smallest j2 with
    index_2(j2) >= index_1(j1) (queue 1 then wins the tie-break).  In
    heavy traffic the empirical slope is fitted on j1 >= fit_from and
    reported next to its theoretical limit log(rho1)/log(rho2).
    """
    if len(sys.queues) != 2:
        raise ValueError("switching curve is defined for exactly two queues")
    q1, q2 = sys.queues
    heavy = (q1.constant_rate and q2.constant_rate
             and sys.lam / float(q1.mu) > 1.0 and sys.lam / float(q2.mu) > 1.0)
    t1 = routing_index_table(sys, 0, bound + 1)
    # queue 2's indices grow geometrically; extend until they top queue 1's range
    cap2 = bound + 2
    t2 = routing_index_table(sys, 1, cap2)
    while t2[-1] < t1[bound] and cap2 < 100 * (bound + 2):
        cap2 *= 2
        t2 = routing_index_table(sys, 1, cap2)
    boundary = []
    for j1 in range(bound + 1):
        j2 = int(np.searchsorted(t2, t1[j1], side="left"))
        boundary.append(j2)
    if not heavy:
        return SwitchingCurve(tuple(boundary), None, None, False)
    xs = np.arange(fit_from, bound + 1, dtype=float)
    ys = np.array(boundary[fit_from:], dtype=float)
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 else None
    limit = math.log(sys.lam / float(q1.mu)) / math.log(sys.lam / float(q2.mu))
    return SwitchingCurve(tuple(boundary), slope, limit, True)
