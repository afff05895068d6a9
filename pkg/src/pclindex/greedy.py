"""Adaptive-greedy index algorithms over extended polymatroids.

Two equivalent n-step algorithms walk down a chain of feasible sets,
peeling off at each step the inner-boundary element with the smallest
marginal cost rate.  The first accumulates dual increments directly; the
second propagates the rate table through a one-step update.  Both return
the generated priority order, the index vector and an admissibility flag
(the index sequence came out nondecreasing), plus the dual solution and
the marginal-rate/reduced-cost tables along the chain.

Workload coefficients are supplied by a :class:`WorkloadOracle`, queried
lazily only for the chain sets the run actually visits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegeneracyError, StructureError
from .setsystem import SetSystem

# Slack used by the end-of-run admissibility test; floating-point chains
# of nearly-tied indices must not be flagged inadmissible.
ADMISSIBLE_SLACK = 1e-9


class WorkloadOracle:
    """Evaluator of marginal workloads w(S, j) and optional right-hand sides b(S).

    Positivity of every queried workload is checked at query time.  The
    ``monotone`` flag declares that w(S, j) is nondecreasing in S (needed
    by the max-form index characterization); it is trusted, not verified.
    """

    def __init__(self, w: Callable[[frozenset, int], float],
                 b: Callable[[frozenset], float] | None = None,
                 monotone: bool = False):
        self._w = w
        self._b = b
        self.monotone = monotone

    def workload(self, s: frozenset, j: int) -> float:
        val = float(self._w(s, j))
        if not val > 0.0:
            raise ValueError(f"workload w({sorted(s)}, {j}) = {val} is not positive")
        return val

    def rhs(self, s: frozenset) -> float:
        if self._b is None:
            raise ValueError("oracle has no right-hand-side evaluator")
        return float(self._b(s))

    @property
    def has_rhs(self) -> bool:
        return self._b is not None

    @classmethod
    def from_tables(cls, w: Mapping[frozenset, Mapping[int, float]],
                    b: Mapping[frozenset, float] | None = None,
                    monotone: bool = False) -> "WorkloadOracle":
        w = {frozenset(s): dict(row) for s, row in w.items()}
        b = None if b is None else {frozenset(s): float(v) for s, v in b.items()}
        return cls(lambda s, j: w[s][j], None if b is None else (lambda s: b[s]), monotone)


@dataclass(frozen=True)
class AGOutput:
    """Result of an adaptive-greedy run.

    ``rate_table[k-1][j]`` holds the marginal cost rate of element j against
    chain set S_k, and ``reduced_costs`` the corresponding marginal costs;
    ``workloads`` caches w(S_k, j) so later checks need not re-query the
    oracle.  When ``completed`` is False the run stopped early at the first
    monotonicity failure and the chain is partial.
    """

    admissible: bool
    pi: tuple[int, ...]
    nu: np.ndarray
    chain: tuple[frozenset, ...]
    dual: dict[frozenset, float]
    rate_table: tuple[dict[int, float], ...]
    reduced_costs: tuple[dict[int, float], ...]
    workloads: tuple[dict[int, float], ...]
    cost: np.ndarray
    completed: bool = True

    @property
    def n(self) -> int:
        return len(self.cost)


def _argmin_boundary(values: Mapping[int, float], boundary: frozenset,
                     tie_break: str) -> int:
    if not boundary:
        raise StructureError("empty inner boundary mid-run; system is not accessible")
    best = min(values[j] for j in boundary)
    ties = [j for j in boundary if values[j] == best]
    return min(ties) if tie_break == "low" else max(ties)


def _admissible(nu_seq: Sequence[float]) -> bool:
    return all(nu_seq[k] >= nu_seq[k - 1] - ADMISSIBLE_SLACK * max(1.0, abs(nu_seq[k]))
               for k in range(1, len(nu_seq)))


def _finish(pi, nu_seq, n, chain, rates, redc, wtabs, c, completed) -> AGOutput:
    nu = np.full(n, np.nan)
    for j, v in zip(pi, nu_seq):
        nu[j] = v
    dual: dict[frozenset, float] = {}
    if nu_seq:
        dual[chain[0]] = nu_seq[0]
        for k in range(1, len(nu_seq)):
            dual[chain[k]] = nu_seq[k] - nu_seq[k - 1]
    return AGOutput(
        admissible=completed and _admissible(nu_seq),
        pi=tuple(pi), nu=nu, chain=tuple(chain), dual=dual,
        rate_table=tuple(rates), reduced_costs=tuple(redc),
        workloads=tuple(wtabs), cost=np.asarray(c, dtype=float),
        completed=completed,
    )


def _start(c, sys: SetSystem):
    c = np.asarray(c, dtype=float)
    if c.shape != (sys.n,):
        raise ValueError(f"cost vector must have shape ({sys.n},), got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost vector must be finite")
    if sys.ground not in sys:
        raise StructureError("ground set J is not a member of the family")
    return c


def ag1(c, oracle: WorkloadOracle, sys: SetSystem, tie_break: str = "low",
        early_exit: bool = False) -> AGOutput:
    """Dual-increment form of the adaptive-greedy algorithm.

    Step k selects, over the inner boundary of the current set, the element
    minimizing the residual cost per unit workload; the index accumulates
    the partial sums of the selected dual increments.  Ties go to the
    lowest element (``tie_break="high"`` flips this, for tests).
    """
    c = _start(c, sys)
    n = sys.n
    s = sys.ground
    ys: list[float] = []
    pi: list[int] = []
    nu_seq: list[float] = []
    chain: list[frozenset] = []
    rates, redc, wtabs = [], [], []
    for k in range(n):
        wk = {j: oracle.workload(s, j) for j in s}
        bracket = {j: c[j] - sum(ys[l] * wtabs[l][j] for l in range(k)) for j in s}
        rate = {j: bracket[j] / wk[j] + (nu_seq[-1] if k else 0.0) for j in s}
        chain.append(s)
        wtabs.append(wk)
        rates.append(rate)
        redc.append({j: rate[j] * wk[j] for j in s})
        j_star = _argmin_boundary(rate, sys.inner_boundary(s), tie_break)
        ys.append(bracket[j_star] / wk[j_star])
        pi.append(j_star)
        nu_seq.append(rate[j_star])
        if early_exit and k and nu_seq[-1] < nu_seq[-2] - ADMISSIBLE_SLACK * max(1.0, abs(nu_seq[-1])):
            return _finish(pi, nu_seq, n, chain, rates, redc, wtabs, c, completed=False)
        s = s - {j_star}
    return _finish(pi, nu_seq, n, chain, rates, redc, wtabs, c, completed=True)


def ag2(c, oracle: WorkloadOracle, sys: SetSystem, tie_break: str = "low",
        early_exit: bool = False) -> AGOutput:
    """Rate-recursion form of the adaptive-greedy algorithm.

    Equivalent to :func:`ag1` under the same tie-breaking rule, but the
    marginal cost rates are propagated by the one-step update
    rate'(j) = rate(j) + (w_old(j)/w_new(j) - 1) (rate(j) - rate(pivot)),
    which is the form that admits closed-form analysis in applications.
    """
    c = _start(c, sys)
    n = sys.n
    s = sys.ground
    pi: list[int] = []
    nu_seq: list[float] = []
    chain: list[frozenset] = []
    rates, redc, wtabs = [], [], []
    rate: dict[int, float] = {}
    for k in range(n):
        wk = {j: oracle.workload(s, j) for j in s}
        if k == 0:
            rate = {j: c[j] / wk[j] for j in s}
        else:
            w_prev, pivot_rate = wtabs[-1], nu_seq[-1]
            rate = {j: rate[j] + (w_prev[j] / wk[j] - 1.0) * (rate[j] - pivot_rate)
                    for j in s}
        chain.append(s)
        wtabs.append(wk)
        rates.append(dict(rate))
        if k == 0:
            redc.append({j: c[j] for j in s})
        else:
            prev_c, w_prev = redc[-1], wtabs[-2]
            pivot = pi[-1]
            scale = prev_c[pivot] / w_prev[pivot]
            redc.append({j: prev_c[j] - scale * (w_prev[j] - wk[j]) for j in s})
        j_star = _argmin_boundary(rate, sys.inner_boundary(s), tie_break)
        pi.append(j_star)
        nu_seq.append(rate[j_star])
        if early_exit and k and nu_seq[-1] < nu_seq[-2] - ADMISSIBLE_SLACK * max(1.0, abs(nu_seq[-1])):
            return _finish(pi, nu_seq, n, chain, rates, redc, wtabs, c, completed=False)
        s = s - {j_star}
    return _finish(pi, nu_seq, n, chain, rates, redc, wtabs, c, completed=True)


def primal_vertex(pi: Sequence[int], oracle: WorkloadOracle) -> np.ndarray:
    """Solve the triangular chain system for the vertex attached to a string.

    Equation k reads sum_{l >= k} w(S_k, pi_l) x_{pi_l} = b(S_k) with
    S_k the k-th suffix set; back-substitution from the innermost set.
    The residual of every equation is checked to 1e-10 (relative).
    """
    pi = list(pi)
    n = len(pi)
    if sorted(pi) != list(range(n)):
        raise ValueError(f"{tuple(pi)} is not a permutation of 0..{n - 1}")
    chain = [frozenset(pi[k:]) for k in range(n)]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        w_row = {j: oracle.workload(chain[k], j) for j in chain[k]}
        tail = sum(w_row[pi[l]] * x[pi[l]] for l in range(k + 1, n))
        x[pi[k]] = (oracle.rhs(chain[k]) - tail) / w_row[pi[k]]
    for k in range(n):
        w_row = {j: oracle.workload(chain[k], j) for j in chain[k]}
        lhs = sum(w_row[j] * x[j] for j in chain[k])
        b = oracle.rhs(chain[k])
        if abs(lhs - b) > 1e-10 * max(1.0, abs(b), abs(lhs)):
            raise DegeneracyError(f"chain equation {k + 1} residual {lhs - b:g} too large")
    return x


def dual_solution(out: AGOutput, atol: float = 1e-10) -> dict[frozenset, float]:
    """Dual vector supported on the chain: y(S_1) = nu_1, y(S_k) = nu_k - nu_{k-1}.

    Reconstructs each input cost c_{pi_k} from the chain workloads as a
    consistency check before returning.
    """
    if not out.completed:
        raise ValueError("dual solution undefined for an early-exited run")
    y = dict(out.dual)
    for k, j in enumerate(out.pi):
        recon = sum(y[out.chain[l]] * out.workloads[l][j] for l in range(k + 1))
        if abs(recon - out.cost[j]) > atol * max(1.0, abs(out.cost[j])):
            raise DegeneracyError(
                f"dual reconstruction of c[{j}] off by {recon - out.cost[j]:g}")
    return y


def lp_value(out: AGOutput, oracle: WorkloadOracle) -> float:
    """Optimal value nu_1 b(S_1) + sum_k (nu_k - nu_{k-1}) b(S_k) of the chain LP."""
    if not out.completed:
        raise ValueError("lp_value undefined for an early-exited run")
    return sum(out.dual[s] * oracle.rhs(s) for s in out.chain)


def objective_representation_check(c, out: AGOutput, oracle: WorkloadOracle, x) -> float:
    """Residual of the index-based objective representation at an arbitrary x.

    |c.x - (nu_1 W_1(x) + sum_k (nu_k - nu_{k-1}) W_k(x))| where W_k(x) is
    the S_k-workload of x.  Zero (to rounding) for every x, by construction
    of the dual increments.
    """
    c = np.asarray(c, dtype=float)
    x = np.asarray(x, dtype=float)
    lhs = float(c @ x)
    rhs = 0.0
    for k, s in enumerate(out.chain):
        workload = sum(out.workloads[k][j] * x[j] for j in s)
        rhs += out.dual[s] * workload
    return abs(lhs - rhs)


@dataclass(frozen=True)
class MinMaxReport:
    min_form_ok: bool
    max_form_ok: bool | None
    worst_min_residual: float
    worst_max_residual: float | None


def local_minmax_check(out: AGOutput, monotone: bool = False,
                       tol: float = 1e-9) -> MinMaxReport:
    """Verify the two marginal-cost-rate characterizations of the indices.

    Min form: nu_{pi_k} attains the minimum rate over the *whole* chain set
    S_k, not just its inner boundary.  Max form (only meaningful under
    nondecreasing workloads): nu_j attains the maximum of the rates of j
    over the chain sets containing j.
    """
    worst_min = 0.0
    for k, j_k in enumerate(out.pi):
        row_min = min(out.rate_table[k].values())
        worst_min = max(worst_min, out.nu[j_k] - row_min)
    min_ok = worst_min <= tol * max(1.0, float(np.max(np.abs(out.nu))))
    if not monotone:
        return MinMaxReport(min_ok, None, worst_min, None)
    worst_max = 0.0
    for k, j_k in enumerate(out.pi):
        best = max(out.rate_table[l][j_k] for l in range(k + 1))
        worst_max = max(worst_max, abs(best - out.nu[j_k]))
    max_ok = worst_max <= tol * max(1.0, float(np.max(np.abs(out.nu))))
    return MinMaxReport(min_ok, max_ok, worst_min, worst_max)


def second_order_workload_recursion(sys: SetSystem, oracle: WorkloadOracle,
                                    s, i1: int, i2: int, j: int) -> float:
    """Workload after a double removal, from the single-removal workloads.

    Requires i1 and i2 to be removable in either order (both orders stay in
    the family) and relies on symmetric marginal costs plus nondecreasing
    workloads; returns w(S \\ {i1, i2}, j) without ever evaluating the
    doubly-reduced set directly.
    """
    s = frozenset(s)
    if not oracle.monotone:
        raise ValueError("recursion requires the monotone-workload flag")
    s1, s2 = s - {i1}, s - {i2}
    if i1 not in sys.inner_boundary(s) or i2 not in sys.inner_boundary(s):
        raise ValueError("i1 and i2 must both lie in the inner boundary of S")
    if i1 not in sys.inner_boundary(s2) or i2 not in sys.inner_boundary(s1):
        raise ValueError("i1 and i2 must be removable in either order")
    if j not in s - {i1, i2}:
        raise ValueError(f"element {j} not in S minus {{i1, i2}}")
    r1 = oracle.workload(s, i1) / oracle.workload(s2, i1)
    r2 = oracle.workload(s, i2) / oracle.workload(s1, i2)
    denom = r1 + r2 - 1.0
    if denom <= 0.0:
        raise DegeneracyError(f"degenerate denominator {denom:g} in double-removal recursion")
    num = r1 * oracle.workload(s2, j) + r2 * oracle.workload(s1, j) - oracle.workload(s, j)
    return num / denom
