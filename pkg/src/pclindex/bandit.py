"""General finite restless-bandit machinery.

A model is a two-action Markov chain (engage/rest) with per-action costs,
a strictly positive activity-weight vector, and a partition of the states
into controllable ones (both actions available) and uncontrollable ones
(always engaged, both actions indistinguishable).  This module computes
the activity and cost measures of set-active policies, the marginal
workloads and costs of one-state action interchanges, and the index
machinery built from them: the indexability test via the adaptive-greedy
run on the normalized passive cost, value-function breakpoints,
conservation-law residuals, long-run average limits, and optimal control
under an average-activity constraint.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (InfeasibleTargetError, InternalConsistencyError,
                     UnsupportedModelError)
from .greedy import AGOutput, WorkloadOracle, ag2
from .setsystem import SetSystem

SOFT_STATE_CAP = 2000


@dataclass(frozen=True, eq=False)
class RBModel:
    """Finite restless bandit in discrete time.

    ``P0``/``P1`` are the passive/active transition matrices, ``h0``/``h1``
    the per-period costs, ``theta1`` the strictly positive activity weights
    and ``beta`` the discount factor.  At every uncontrollable state both
    actions must coincide structurally (equal transition rows and equal
    costs); this is validated, not assumed.  ``beta == 1`` is accepted so a
    uniformized average-criterion model can be represented, but all
    discounted computations require ``beta < 1``.
    """

    P0: np.ndarray
    P1: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    theta1: np.ndarray
    beta: float
    controllable: frozenset

    def __post_init__(self):
        P0 = np.array(self.P0, dtype=float)
        P1 = np.array(self.P1, dtype=float)
        h0 = np.array(self.h0, dtype=float)
        h1 = np.array(self.h1, dtype=float)
        theta1 = np.array(self.theta1, dtype=float)
        n = P0.shape[0]
        if P0.shape != (n, n) or P1.shape != (n, n):
            raise ValueError("P0 and P1 must be square matrices of equal size")
        for name, v in (("h0", h0), ("h1", h1), ("theta1", theta1)):
            if v.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if n > SOFT_STATE_CAP:
            warnings.warn(f"model has {n} states; dense linear algebra may be slow")
        for name, P in (("P0", P0), ("P1", P1)):
            if np.any(P < -1e-12):
                raise ValueError(f"{name} has negative entries")
            rowsums = P.sum(axis=1)
            if np.max(np.abs(rowsums - 1.0)) > 1e-12:
                raise ValueError(f"{name} rows must sum to 1 within 1e-12")
        if not np.all(theta1 > 0):
            raise ValueError("activity weights theta1 must be strictly positive")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        ctrl = frozenset(int(j) for j in self.controllable)
        if not ctrl <= set(range(n)):
            raise ValueError("controllable states out of range")
        for i in sorted(set(range(n)) - ctrl):
            if np.max(np.abs(P0[i] - P1[i])) > 1e-12 or abs(h0[i] - h1[i]) > 1e-12:
                raise ValueError(
                    f"state {i} declared uncontrollable but its two actions differ")
        for arr in (P0, P1, h0, h1, theta1):
            arr.setflags(write=False)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "P1", P1)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "theta1", theta1)
        object.__setattr__(self, "controllable", ctrl)

    @property
    def n_states(self) -> int:
        return self.P0.shape[0]

    @property
    def uncontrollable(self) -> frozenset:
        return frozenset(range(self.n_states)) - self.controllable

    def active_rows(self, s: Iterable) -> np.ndarray:
        """Boolean mask of states engaged under the S-active policy."""
        s = frozenset(s)
        if not s <= self.controllable:
            raise ValueError("active set must consist of controllable states")
        mask = np.zeros(self.n_states, dtype=bool)
        mask[sorted(s)] = True
        mask[sorted(self.uncontrollable)] = True
        return mask

    def policy_vector(self, s: Iterable) -> np.ndarray:
        """Activation probabilities of the S-active policy (1 on S and
        the uncontrollable states, 0 elsewhere)."""
        return self.active_rows(s).astype(float)


def _require_discounted(model: RBModel):
    if not model.beta < 1.0:
        raise UnsupportedModelError("operation needs a discount factor beta < 1")


def _mix_rows(model: RBModel, mask: np.ndarray) -> np.ndarray:
    P = model.P0.copy()
    P[mask] = model.P1[mask]
    return P


def activity_measure(model: RBModel, s) -> np.ndarray:
    """Expected total discounted activity weight collected under the
    S-active policy, as a vector over initial states."""
    _require_discounted(model)
    mask = model.active_rows(s)
    P = _mix_rows(model, mask)
    rhs = np.where(mask, model.theta1, 0.0)
    b = np.linalg.solve(np.eye(model.n_states) - model.beta * P, rhs)
    _check_residual(np.eye(model.n_states) - model.beta * P, b, rhs)
    return b


def cost_measure(model: RBModel, s) -> np.ndarray:
    """Expected total discounted holding cost under the S-active policy."""
    _require_discounted(model)
    mask = model.active_rows(s)
    P = _mix_rows(model, mask)
    rhs = np.where(mask, model.h1, model.h0)
    v = np.linalg.solve(np.eye(model.n_states) - model.beta * P, rhs)
    _check_residual(np.eye(model.n_states) - model.beta * P, v, rhs)
    return v


def _check_residual(A: np.ndarray, x: np.ndarray, rhs: np.ndarray):
    res = np.max(np.abs(A @ x - rhs))
    scale = max(1.0, float(np.max(np.abs(rhs))), float(np.max(np.abs(x))))
    if res > 1e-10 * scale:
        raise InternalConsistencyError(f"linear solve residual {res:g} exceeds tolerance")


def occupation_measures(model: RBModel, u, i: int) -> tuple[np.ndarray, np.ndarray]:
    """State-action occupation measures (x0, x1) of a stationary policy.

    ``u`` gives per-state activation probabilities; it must equal 1 at
    uncontrollable states.  Row i of the balance equations is enforced to
    1e-10 before returning.
    """
    _require_discounted(model)
    u = np.asarray(u, dtype=float)
    if u.shape != (model.n_states,):
        raise ValueError(f"policy must have shape ({model.n_states},)")
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("activation probabilities must lie in [0, 1]")
    unctrl = sorted(model.uncontrollable)
    if unctrl and np.max(np.abs(u[unctrl] - 1.0)) > 0:
        raise ValueError("policy must be active at uncontrollable states")
    Pu = (1.0 - u)[:, None] * model.P0 + u[:, None] * model.P1
    e = np.zeros(model.n_states)
    e[i] = 1.0
    occ = np.linalg.solve((np.eye(model.n_states) - model.beta * Pu).T, e)
    x0 = (1.0 - u) * occ
    x1 = u * occ
    balance = (x0 @ (np.eye(model.n_states) - model.beta * model.P0)
               + x1 @ (np.eye(model.n_states) - model.beta * model.P1) - e)
    if np.max(np.abs(balance)) > 1e-10 * max(1.0, float(np.max(np.abs(occ)))):
        raise InternalConsistencyError("occupation-measure balance equations violated")
    return x0, x1


def activity_of_policy(model: RBModel, u, i: int) -> float:
    """Discounted activity measure of an arbitrary stationary policy."""
    _, x1 = occupation_measures(model, u, i)
    return float(model.theta1 @ x1)


def cost_of_policy(model: RBModel, u, i: int) -> float:
    """Discounted cost measure of an arbitrary stationary policy."""
    x0, x1 = occupation_measures(model, u, i)
    return float(model.h0 @ x0 + model.h1 @ x1)


def marginal_workload(model: RBModel, s, b: np.ndarray | None = None) -> np.ndarray:
    """Increment of the activity measure from a passive-to-active
    interchange against the S-active policy; exactly zero at
    uncontrollable states."""
    if b is None:
        b = activity_measure(model, s)
    ctrl_mask = np.zeros(model.n_states, dtype=bool)
    ctrl_mask[sorted(model.controllable)] = True
    w = np.where(ctrl_mask, model.theta1, 0.0) + model.beta * (model.P1 - model.P0) @ b
    w[~ctrl_mask] = 0.0
    return w


def marginal_cost(model: RBModel, s, v: np.ndarray | None = None) -> np.ndarray:
    """Increment of the cost measure from a passive-to-active interchange
    against the S-active policy; exactly zero at uncontrollable states."""
    if v is None:
        v = cost_measure(model, s)
    c = model.h0 - model.h1 + model.beta * (model.P0 - model.P1) @ v
    c[sorted(model.uncontrollable)] = 0.0
    return c


def normalized_passive_cost(model: RBModel) -> np.ndarray:
    """Passive-cost vector after absorbing the always-active cost stream.

    Equals the marginal cost at the all-controllable active set; vanishes
    at uncontrollable states (verified to 1e-10, then zeroed exactly).
    """
    _require_discounted(model)
    n = model.n_states
    inner = np.linalg.solve(np.eye(n) - model.beta * model.P1, model.h1)
    hhat = model.h0 - (np.eye(n) - model.beta * model.P0) @ inner
    unctrl = sorted(model.uncontrollable)
    if unctrl:
        worst = float(np.max(np.abs(hhat[unctrl])))
        if worst > 1e-10 * max(1.0, float(np.max(np.abs(hhat)))):
            raise InternalConsistencyError(
                f"normalized passive cost {worst:g} at an uncontrollable state")
        hhat[unctrl] = 0.0
    return hhat


def normalized_model(model: RBModel) -> RBModel:
    """Same dynamics, passive cost replaced by the normalized vector and
    active cost set to zero."""
    return RBModel(model.P0, model.P1, normalized_passive_cost(model),
                   np.zeros(model.n_states), model.theta1, model.beta,
                   model.controllable)


# ---------------------------------------------------------------------------
# Index machinery
# ---------------------------------------------------------------------------

def _ctrl_order(model: RBModel) -> list[int]:
    return sorted(model.controllable)


def _states_of(ground_set: Iterable, ctrl: Sequence[int]) -> frozenset:
    return frozenset(ctrl[e] for e in ground_set)


class _MeasureCache:
    """Per-model cache of set-indexed measures; not thread-safe, create one
    per computation."""

    def __init__(self, model: RBModel):
        self.model = model
        self._b: dict[frozenset, np.ndarray] = {}
        self._v: dict[frozenset, np.ndarray] = {}
        self._w: dict[frozenset, np.ndarray] = {}
        self._c: dict[frozenset, np.ndarray] = {}

    def b(self, s: frozenset) -> np.ndarray:
        if s not in self._b:
            self._b[s] = activity_measure(self.model, s)
        return self._b[s]

    def v(self, s: frozenset) -> np.ndarray:
        if s not in self._v:
            self._v[s] = cost_measure(self.model, s)
        return self._v[s]

    def w(self, s: frozenset) -> np.ndarray:
        if s not in self._w:
            self._w[s] = marginal_workload(self.model, s, self.b(s))
        return self._w[s]

    def c(self, s: frozenset) -> np.ndarray:
        if s not in self._c:
            self._c[s] = marginal_cost(self.model, s, self.v(s))
        return self._c[s]


@dataclass(frozen=True)
class MeasureTables:
    """Chain-indexed measure bundle: for each set S_k of a chain, the
    activity and cost measures, the marginal workloads and costs, plus the
    normalized passive-cost vector.  Marginal entries vanish at
    uncontrollable states by construction."""

    chain: tuple[frozenset, ...]
    b: dict[frozenset, np.ndarray]
    v: dict[frozenset, np.ndarray]
    w: dict[frozenset, np.ndarray]
    c: dict[frozenset, np.ndarray]
    h_hat0: np.ndarray


def measure_tables(model: RBModel, chain) -> MeasureTables:
    """Evaluate all set-indexed measures along a chain of active sets."""
    cache = _MeasureCache(model)
    chain = tuple(frozenset(s) for s in chain)
    return MeasureTables(
        chain=chain,
        b={s: cache.b(s) for s in chain},
        v={s: cache.v(s) for s in chain},
        w={s: cache.w(s) for s in chain},
        c={s: cache.c(s) for s in chain},
        h_hat0=normalized_passive_cost(model),
    )


def rb_workload_oracle(model: RBModel, initial: int | None = None,
                       weights=None, monotone: bool = False) -> WorkloadOracle:
    """Workload oracle over ground sets indexed into sorted(controllable).

    w(S, j) is the model's marginal workload; the optional right-hand side
    b(S) is the activity measure at a fixed initial state (or averaged
    under ``weights``).  Measures are cached per set.
    """
    ctrl = _ctrl_order(model)
    cache = _MeasureCache(model)

    def w(s: frozenset, e: int) -> float:
        return float(cache.w(_states_of(s, ctrl))[ctrl[e]])

    b_fn = None
    if initial is not None or weights is not None:
        if weights is None:
            def b_fn(s: frozenset) -> float:
                return float(cache.b(_states_of(s, ctrl))[initial])
        else:
            p = np.asarray(weights, dtype=float)

            def b_fn(s: frozenset) -> float:
                return float(p @ cache.b(_states_of(s, ctrl)))

    return WorkloadOracle(w, b_fn, monotone=monotone)


@dataclass(frozen=True)
class PCLReport:
    """Outcome of the two-part indexability test.

    ``indexable`` requires strictly positive marginal workloads on every
    family member and a nondecreasing index sequence out of the
    adaptive-greedy run on the normalized passive cost.
    """

    indexable: bool
    positive_workloads: bool
    admissible: bool
    workload_violations: tuple
    nu_by_state: dict[int, float]
    state_order: tuple[int, ...]
    chain_states: tuple[frozenset, ...]
    ag: AGOutput
    controllable_order: tuple[int, ...]

    @property
    def nu(self) -> np.ndarray:
        return self.ag.nu


def _workload_positivity(model: RBModel, sys: SetSystem, cache: _MeasureCache,
                         ctrl: Sequence[int]):
    violations = []
    for s in sys.family:
        states = _states_of(s, ctrl)
        w = cache.w(states)
        for j in ctrl:
            if not w[j] > 0.0:
                violations.append((states, j, float(w[j])))
    return tuple(violations)


def pcl_index(model: RBModel, sys: SetSystem) -> PCLReport:
    """Indexability test and index computation for a postulated family.

    The ground set of ``sys`` indexes sorted(controllable).  Checks that
    every family member has strictly positive marginal workloads at all
    controllable states, then runs the rate-recursion greedy algorithm on
    the normalized passive cost with the model-derived workload oracle.
    """
    ctrl = _ctrl_order(model)
    if sys.n != len(ctrl):
        raise ValueError(f"set system has ground size {sys.n}, expected {len(ctrl)}")
    cache = _MeasureCache(model)
    violations = _workload_positivity(model, sys, cache, ctrl)
    hhat = normalized_passive_cost(model)
    oracle = WorkloadOracle(lambda s, e: float(cache.w(_states_of(s, ctrl))[ctrl[e]]))
    out = ag2(hhat[ctrl], oracle, sys)
    positive = not violations
    return PCLReport(
        indexable=positive and out.admissible,
        positive_workloads=positive,
        admissible=out.admissible,
        workload_violations=violations,
        nu_by_state={ctrl[e]: float(out.nu[e]) for e in range(sys.n)},
        state_order=tuple(ctrl[e] for e in out.pi),
        chain_states=tuple(_states_of(s, ctrl) for s in out.chain),
        ag=out,
        controllable_order=tuple(ctrl),
    )


@dataclass(frozen=True)
class ValueSegments:
    """Piecewise-linear description of the optimal value as a function of
    the activity charge, for a fixed initial state: on segment k the value
    is intercept_k + charge * slope_k."""

    breakpoints: tuple[float, ...]   # nu_{pi_1} <= ... <= nu_{pi_n}
    intercepts: tuple[float, ...]    # cost measures along the chain, n+1 of them
    slopes: tuple[float, ...]        # activity measures along the chain, n+1 of them

    def evaluate(self, nu: float) -> float:
        k = int(np.searchsorted(np.asarray(self.breakpoints), nu, side="left"))
        return self.intercepts[k] + nu * self.slopes[k]


def value_breakpoints(model: RBModel, sys: SetSystem, i: int,
                      report: PCLReport | None = None) -> ValueSegments:
    """Breakpoint description of the charge-parametrized optimal value.

    Requires the model to pass :func:`pcl_index`; segment k carries the
    cost/activity measures of the k-th chain set, and the slopes are
    checked to be nonincreasing (strict decrease is not guaranteed for a
    fixed initial state, only for positively weighted averages).
    """
    rep = report if report is not None else pcl_index(model, sys)
    if not rep.indexable:
        raise UnsupportedModelError("model is not PCL-indexable for this family")
    chain = list(rep.chain_states) + [frozenset()]
    cache = _MeasureCache(model)
    intercepts = [float(cache.v(s)[i]) for s in chain]
    slopes = [float(cache.b(s)[i]) for s in chain]
    scale = max(1.0, max(abs(x) for x in slopes))
    for k in range(len(slopes) - 1):
        if slopes[k + 1] > slopes[k] + 1e-12 * scale:
            raise InternalConsistencyError(
                "value-function slopes are not nonincreasing along the chain")
    bps = tuple(float(rep.ag.nu[e]) for e in rep.ag.pi)
    return ValueSegments(bps, tuple(intercepts), tuple(slopes))


def verify_workload_decomposition(model: RBModel, u, s, i: int) -> float:
    """Residual of the activity conservation identity relating an arbitrary
    policy to the S-active policy through one-state interchanges."""
    s = frozenset(s)
    x0, x1 = occupation_measures(model, u, i)
    w = marginal_workload(model, s)
    b_u = float(model.theta1 @ x1)
    b_s = float(activity_measure(model, s)[i])
    others = sorted(model.controllable - s)
    lhs = b_u + sum(w[j] * x0[j] for j in sorted(s))
    rhs = b_s + sum(w[j] * x1[j] for j in others)
    return abs(lhs - rhs)


def verify_cost_decomposition(model: RBModel, u, s, i: int) -> float:
    """Residual of the cost conservation identity (cost analog of
    :func:`verify_workload_decomposition`)."""
    s = frozenset(s)
    x0, x1 = occupation_measures(model, u, i)
    c = marginal_cost(model, s)
    v_u = float(model.h0 @ x0 + model.h1 @ x1)
    v_s = float(cost_measure(model, s)[i])
    others = sorted(model.controllable - s)
    lhs = v_s + sum(c[j] * x0[j] for j in sorted(s))
    rhs = v_u + sum(c[j] * x1[j] for j in others)
    return abs(lhs - rhs)


@dataclass(frozen=True)
class DMRReport:
    """Diminishing-marginal-returns checks along the index chain, under a
    strictly positive initial distribution."""

    activity_strictly_decreasing: bool
    ratio_matches_index: bool
    min_form_ok: bool
    max_form_ok: bool
    rates_nondecreasing: bool
    worst_ratio_residual: float

    @property
    def all_ok(self) -> bool:
        return (self.activity_strictly_decreasing and self.ratio_matches_index
                and self.min_form_ok and self.max_form_ok and self.rates_nondecreasing)


def dmr_report(model: RBModel, sys: SetSystem, p=None, tol: float = 1e-9,
               report: PCLReport | None = None) -> DMRReport:
    """Check that the indices are optimal marginal cost rates.

    Aggregates measures under a positive initial distribution ``p``
    (uniform by default) and verifies: strictly increasing activity along
    the chain, the index as the chain cost/activity difference ratio, its
    min/max one-swap characterizations, and nondecreasing rates.
    """
    rep = report if report is not None else pcl_index(model, sys)
    if not rep.indexable:
        raise UnsupportedModelError("model is not PCL-indexable for this family")
    n_states = model.n_states
    p = np.full(n_states, 1.0 / n_states) if p is None else np.asarray(p, dtype=float)
    if p.shape != (n_states,) or not np.all(p > 0):
        raise ValueError("initial distribution must be strictly positive over all states")
    cache = _MeasureCache(model)
    chain = list(rep.chain_states) + [frozenset()]
    b_agg = [float(p @ cache.b(s)) for s in chain]
    v_agg = [float(p @ cache.v(s)) for s in chain]
    scale_b = max(1.0, max(abs(x) for x in b_agg))
    strict = all(b_agg[k] > b_agg[k + 1] + 1e-12 * scale_b for k in range(len(b_agg) - 1))

    nu_seq = [float(rep.ag.nu[e]) for e in rep.ag.pi]
    worst = 0.0
    min_ok = max_ok = True
    ctrl = set(model.controllable)
    for k, s in enumerate(rep.chain_states):
        denom = b_agg[k] - b_agg[k + 1]
        ratio = (v_agg[k + 1] - v_agg[k]) / denom
        worst = max(worst, abs(ratio - nu_seq[k]))

        def swap_ratio(base: int, t: frozenset) -> float:
            return ((float(p @ cache.v(t)) - v_agg[base])
                    / (b_agg[base] - float(p @ cache.b(t))))

        # removing a state from S_k can only cost at rate >= nu_k ...
        m = min(swap_ratio(k, s - {j}) for j in sorted(s))
        if abs(m - nu_seq[k]) > tol * max(1.0, abs(nu_seq[k])):
            min_ok = False
        # ... and adding one to the next chain set saves at rate <= nu_k
        succ = chain[k + 1]
        mx = max(swap_ratio(k + 1, succ | {j}) for j in sorted(ctrl - succ))
        if abs(mx - nu_seq[k]) > tol * max(1.0, abs(nu_seq[k])):
            max_ok = False
    scale_nu = max(1.0, max(abs(x) for x in nu_seq))
    ratio_ok = worst <= tol * scale_nu
    nondec = all(nu_seq[k + 1] >= nu_seq[k] - tol * scale_nu for k in range(len(nu_seq) - 1))
    return DMRReport(strict, ratio_ok, min_ok, max_ok, nondec, worst)


# ---------------------------------------------------------------------------
# Long-run average criterion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AverageLimits:
    """Average-criterion quantities of an S-active policy: the gain pair
    (activity rate, cost rate), the bias vectors producing them, and the
    limiting marginal workloads/costs."""

    b_bar: float
    v_bar: float
    a: np.ndarray
    f: np.ndarray
    w_bar: np.ndarray
    c_bar: np.ndarray


def is_communicating(model: RBModel) -> bool:
    """True iff every state is reachable from every other under some policy
    (strong connectivity of the union of the two transition graphs)."""
    adj = ((model.P0 > 0) | (model.P1 > 0)).astype(int)
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


def _recurrent_classes(P: np.ndarray) -> list[list[int]]:
    n_comp, labels = connected_components((P > 0).astype(int), directed=True,
                                          connection="strong")
    leaves = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        out_mass = P[np.ix_(members, np.flatnonzero(labels != comp))].sum()
        if out_mass <= 0:
            leaves.append(sorted(int(m) for m in members))
    return leaves


def _gain_bias(P: np.ndarray, r: np.ndarray) -> tuple[float, np.ndarray, int]:
    classes = _recurrent_classes(P)
    if len(classes) != 1:
        raise UnsupportedModelError(
            f"policy chain is multichain ({len(classes)} recurrent classes)")
    ref = classes[0][0]
    n = P.shape[0]
    # unknowns: gain g and bias vector a with a[ref] = 0
    A = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    A[:n, 0] = 1.0
    A[:n, 1:] = np.eye(n) - P
    rhs[:n] = r
    A[n, 1 + ref] = 1.0
    sol = np.linalg.solve(A, rhs)
    return float(sol[0]), sol[1:], ref


def average_limits(model: RBModel, s) -> AverageLimits:
    """Long-run average activity/cost rates and bias vectors of the
    S-active policy, plus the limiting marginal workloads and costs.

    Requires a communicating model and a unichain policy.  The bias gauge
    fixes the lowest-index recurrent state at zero; the marginal
    quantities are gauge-independent.
    """
    if not is_communicating(model):
        raise UnsupportedModelError("model is not communicating")
    mask = model.active_rows(s)
    P = _mix_rows(model, mask)
    b_bar, a, _ = _gain_bias(P, np.where(mask, model.theta1, 0.0))
    v_bar, f, _ = _gain_bias(P, np.where(mask, model.h1, model.h0))
    ctrl_mask = np.zeros(model.n_states, dtype=bool)
    ctrl_mask[sorted(model.controllable)] = True
    w_bar = np.where(ctrl_mask, model.theta1, 0.0) + (model.P1 - model.P0) @ a
    w_bar[~ctrl_mask] = 0.0
    c_bar = model.h0 - model.h1 + (model.P0 - model.P1) @ f
    c_bar[~ctrl_mask] = 0.0
    return AverageLimits(b_bar, v_bar, a, f, w_bar, c_bar)


def average_pcl_index(model: RBModel, sys: SetSystem) -> PCLReport:
    """Average-criterion version of :func:`pcl_index`.

    Uses the limiting marginal workloads as the oracle and the limiting
    marginal cost at the all-controllable active set as the cost input
    (the average analog of the normalized passive cost).
    """
    ctrl = _ctrl_order(model)
    if sys.n != len(ctrl):
        raise ValueError(f"set system has ground size {sys.n}, expected {len(ctrl)}")
    cache: dict[frozenset, AverageLimits] = {}

    def limits(states: frozenset) -> AverageLimits:
        if states not in cache:
            cache[states] = average_limits(model, states)
        return cache[states]

    violations = []
    for s in sys.family:
        states = _states_of(s, ctrl)
        w = limits(states).w_bar
        for j in ctrl:
            if not w[j] > 0.0:
                violations.append((states, j, float(w[j])))
    c_full = limits(frozenset(ctrl)).c_bar
    oracle = WorkloadOracle(lambda s, e: float(limits(_states_of(s, ctrl)).w_bar[ctrl[e]]))
    out = ag2(c_full[ctrl], oracle, sys)
    positive = not violations
    return PCLReport(
        indexable=positive and out.admissible,
        positive_workloads=positive,
        admissible=out.admissible,
        workload_violations=tuple(violations),
        nu_by_state={ctrl[e]: float(out.nu[e]) for e in range(sys.n)},
        state_order=tuple(ctrl[e] for e in out.pi),
        chain_states=tuple(_states_of(s, ctrl) for s in out.chain),
        ag=out,
        controllable_order=tuple(ctrl),
    )


@dataclass(frozen=True)
class ConstrainedPolicy:
    """Optimal stationary policy meeting an average-activity target:
    active on ``base_set``, active on ``randomized_state`` with probability
    ``p_active`` (both None when the target sits exactly on a chain
    point and the policy is deterministic)."""

    base_set: frozenset
    randomized_state: int | None
    p_active: float | None
    value: float
    marginal_rate: float | None  # cost increase per unit of activity removed

    @property
    def deterministic(self) -> bool:
        return self.randomized_state is None


def constrained_policy(model: RBModel, sys: SetSystem, t: float,
                       report: PCLReport | None = None,
                       rel_tol: float = 1e-12) -> ConstrainedPolicy:
    """Minimize the average cost rate subject to average activity rate = t.

    The optimum randomizes between two adjacent chain policies; its value
    interpolates the chain values and its local sensitivity is the index
    of the state being randomized (the cost saved per extra unit of
    allowed activity, so the achieved cost is piecewise linear and convex
    as a function of t).
    """
    rep = report if report is not None else average_pcl_index(model, sys)
    if not rep.indexable:
        raise UnsupportedModelError("model is not PCL-indexable under the average criterion")
    chain = list(rep.chain_states) + [frozenset()]
    b_bar = [average_limits(model, s).b_bar for s in chain]
    v_bar = [average_limits(model, s).v_bar for s in chain]
    scale = max(1.0, max(abs(x) for x in b_bar))
    lo, hi = b_bar[-1], b_bar[0]
    if t < lo - rel_tol * scale or t > hi + rel_tol * scale:
        raise InfeasibleTargetError(
            f"target {t} outside achievable activity range [{lo:g}, {hi:g}]")
    for k, bk in enumerate(b_bar):
        if abs(t - bk) <= rel_tol * scale:
            return ConstrainedPolicy(chain[k], None, None, v_bar[k], None)
    k = next(k for k in range(len(chain) - 1) if b_bar[k + 1] < t < b_bar[k])
    p = (t - b_bar[k + 1]) / (b_bar[k] - b_bar[k + 1])
    value = (1.0 - p) * v_bar[k + 1] + p * v_bar[k]
    nu_k = float(rep.ag.nu[rep.ag.pi[k]])
    return ConstrainedPolicy(chain[k + 1], rep.state_order[k], p, value, nu_k)
