"""Admission control of a birth--death queue: recursions and indices.

The model is a single-server queue with buffer size n, state-dependent
arrival rates lambda_i, service rates mu_i, holding cost rates h_i and
discount rate alpha.  Shutting the entry gate is the active action; the
activity measure counts rejected customers.  Everything here works with
the raw continuous-time rates: marginal workloads/costs carry an
(alpha + Lambda) scaling relative to the uniformized discrete-time model,
which cancels in every index.

The closed recursions below (a_k coefficients, the marginal workload
table, the marginal-cost pivots and the index recursion) avoid any linear
solves; the uniformized model provides the independent verification path
through :mod:`pclindex.bandit`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bandit import RBModel
from .errors import AssumptionError, DegeneracyError, InternalConsistencyError

SIGN_SLACK = 1e-12  # slack for strict-inequality checks, scaled by magnitude


@dataclass(frozen=True, eq=False)
class ACModel:
    """Buffer size n, rates lambda_0..lambda_n and mu_1..mu_n, holding
    costs h_0..h_n, discount rate alpha >= 0.  The uniformization rate
    defaults to max(lambda_i + mu_i); mu_0 is 0 by convention."""

    n: int
    lam: np.ndarray
    mu: np.ndarray
    h: np.ndarray
    alpha: float
    Lambda: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"buffer size must be >= 1, got {self.n}")
        lam = np.array(self.lam, dtype=float)
        mu = np.array(self.mu, dtype=float)
        h = np.array(self.h, dtype=float)
        if lam.shape != (self.n + 1,):
            raise ValueError(f"lambda must have {self.n + 1} entries lambda_0..lambda_n")
        if mu.shape != (self.n,):
            raise ValueError(f"mu must have {self.n} entries mu_1..mu_n")
        if h.shape != (self.n + 1,):
            raise ValueError(f"h must have {self.n + 1} entries h_0..h_n")
        if np.any(lam < 0) or np.any(mu < 0):
            raise ValueError("rates must be nonnegative")
        if self.alpha < 0:
            raise ValueError("discount rate alpha must be nonnegative")
        mu_full = np.concatenate(([0.0], mu))
        needed = float(np.max(lam + mu_full))
        big = needed if self.Lambda is None else float(self.Lambda)
        if big < needed - 1e-12:
            raise ValueError(f"uniformization rate {big} below max(lambda_i + mu_i) = {needed}")
        for arr in (lam, mu, h):
            arr.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "Lambda", big)

    @property
    def mu_full(self) -> np.ndarray:
        """Service rates indexed by state, with mu_0 = 0."""
        return np.concatenate(([0.0], self.mu))

    @property
    def d(self) -> np.ndarray:
        """d_i = mu_i - lambda_i with the d_0 = -lambda_0 convention."""
        return self.mu_full - self.lam

    @property
    def delta_d(self) -> np.ndarray:
        """Increments d_i - d_{i-1} for i = 1..n."""
        return np.diff(self.d)

    @property
    def delta_h(self) -> np.ndarray:
        """Increments h_i - h_{i-1} for i = 1..n."""
        return np.diff(self.h)

    @property
    def rho(self) -> np.ndarray:
        """Traffic ratios rho_i = lambda_i / mu_{i+1} for i = 0..n-1."""
        return self.lam[:-1] / self.mu


@dataclass(frozen=True)
class AssumptionReport:
    """Regularity conditions for threshold indexability: the net service
    surplus d_i must be concave nondecreasing with a strictly positive
    first increment, the holding costs convex nondecreasing."""

    dd_first_positive: bool
    dd_nonincreasing: bool
    dd_nonnegative: bool
    dh_nondecreasing: bool
    dh_nonnegative: bool
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_assumptions(m: ACModel) -> AssumptionReport:
    """List any violations of the regularity conditions (report, no raise)."""
    dd, dh = m.delta_d, m.delta_h
    violations = []
    first = bool(dd[0] > 0)
    if not first:
        violations.append(f"delta_d[1] = {dd[0]:g} is not > 0")
    noninc = nonneg = True
    for i in range(1, m.n):   # compares increments i and i+1 in 1-based terms
        if dd[i] > dd[i - 1] + SIGN_SLACK * max(1.0, abs(dd[i])):
            noninc = False
            violations.append(f"delta_d[{i + 1}] > delta_d[{i}]")
        if dd[i] < 0:
            nonneg = False
            violations.append(f"delta_d[{i + 1}] = {dd[i]:g} < 0")
    h_nondec = h_nonneg = True
    for i in range(1, m.n):
        if dh[i] < dh[i - 1] - SIGN_SLACK * max(1.0, abs(dh[i])):
            h_nondec = False
            violations.append(f"delta_h[{i + 1}] < delta_h[{i}]")
        if dh[i - 1] < 0:
            h_nonneg = False
            violations.append(f"delta_h[{i}] = {dh[i - 1]:g} < 0")
    return AssumptionReport(first, noninc, nonneg, h_nondec, h_nonneg,
                            tuple(violations))


def uniformize(m: ACModel) -> RBModel:
    """Discrete-time restless-bandit reformulation of the queue.

    Samples the chain at the uniformization rate: tridiagonal transition
    matrices, per-period costs h/(alpha+Lambda), activity weights
    lambda_j/(alpha+Lambda) (the per-period rejection probability under a
    shut gate) and discount factor Lambda/(alpha+Lambda).  The full-buffer
    state is uncontrollable.
    """
    n, big = m.n, float(m.Lambda)
    lam, mu = m.lam, m.mu_full
    if not np.all(lam[: n] > 0):
        raise ValueError("arrival rates at controllable states must be positive "
                         "(zero arrivals make the activity weight vanish)")
    N = n + 1
    P1 = np.zeros((N, N))
    P0 = np.zeros((N, N))
    for i in range(N):
        P1[i, i] = (big - mu[i]) / big
        if i > 0:
            P1[i, i - 1] = mu[i] / big
        if i < n:
            P0[i, i + 1] = lam[i] / big
            P0[i, i] = (big - lam[i] - mu[i]) / big
        else:
            P0[i, i] = (big - mu[i]) / big
        if i > 0:
            P0[i, i - 1] = mu[i] / big
    scale = m.alpha + big
    hbar = m.h / scale
    theta = lam / scale
    beta = big / scale
    return RBModel(P0, P1, hbar, hbar, theta, beta,
                   controllable=frozenset(range(n)))


def ak_coefficients(m: ACModel) -> np.ndarray:
    """Pivot normalizers a_1..a_n of the workload recursion.

    a_1 = 1 and each subsequent value discounts the previous pivot's
    feedback through one birth--death cycle; all values must stay
    positive, which the regularity conditions guarantee.
    """
    lam, mu, alpha = m.lam, m.mu_full, m.alpha
    a = np.ones(m.n)
    for k in range(2, m.n + 1):
        denom = (alpha + lam[k - 2] + mu[k - 1]) * (alpha + lam[k - 1] + mu[k]) * a[k - 2]
        a[k - 1] = 1.0 - lam[k - 1] * mu[k - 1] / denom
        if a[k - 1] <= 0:
            raise AssumptionError(f"a_{k} = {a[k - 1]:g} is not positive; "
                                  "regularity conditions violated")
    return a


def workload_table(m: ACModel) -> np.ndarray:
    """Marginal workloads W[k-1, i] = w(S_k, i) for the threshold chain.

    S_k = {k-1, ..., n-1} for k = 1..n and S_{n+1} = {}; states i run over
    the controllable range 0..n-1.  Values carry the (alpha + Lambda)
    scaling, so they depend only on the rates, not on Lambda.
    """
    n, alpha = m.n, m.alpha
    lam, rho, dd = m.lam, m.rho, m.delta_d
    mu = m.mu_full
    if np.any(lam[: n] <= 0) or np.any(m.mu <= 0):
        raise DegeneracyError("workload recursion needs positive lambda_0..lambda_{n-1} "
                              "and mu_1..mu_n")
    a = ak_coefficients(m)
    W = np.zeros((n + 1, n))

    def fill_up(k: int, start: int):
        # w(S_k, i) for i >= start from w(S_k, i-1), common to every column
        for i in range(start, n):
            W[k - 1, i] = lam[i] * (alpha + dd[i] + W[k - 1, i - 1] / rho[i - 1]) \
                / (alpha + mu[i + 1])

    W[0, 0] = lam[0] * (alpha + dd[0]) / (alpha + mu[1])
    fill_up(1, 1)
    W[1, 0] = lam[0] * (alpha + dd[0]) / (alpha + lam[0] + mu[1])
    fill_up(2, 1)
    for k in range(2, n + 1):
        # pivot w(S_{k+1}, k-1) from the previous pivot w(S_k, k-2)
        W[k, k - 1] = (lam[k - 1] / a[k - 1]) \
            * (alpha + dd[k - 1] + W[k - 1, k - 2] / rho[k - 2]) \
            / (alpha + lam[k - 1] + mu[k])
        W[k, k - 2] = rho[k - 2] * (
            -(alpha + dd[k - 1])
            + (alpha + lam[k - 1] + mu[k]) / lam[k - 1] * W[k, k - 1])
        fill_up(k + 1, k)
        for i in range(k - 3, -1, -1):
            W[k, i] = rho[i] * (
                -(alpha + dd[i + 1])
                + (alpha + lam[i + 1] + mu[i + 2]) / lam[i + 1] * W[k, i + 1]
                - W[k, i + 2])
    return W


def marginal_cost_pivots(m: ACModel) -> np.ndarray:
    """Marginal costs c(S_{k+2}, k) for k = 0..n-1 (the pivot diagonal)."""
    n, alpha = m.n, m.alpha
    lam, rho, dh = m.lam, m.rho, m.delta_h
    mu = m.mu_full
    a = ak_coefficients(m)
    c = np.zeros(n)
    c[0] = lam[0] * dh[0] / (alpha + lam[0] + mu[1])
    for k in range(1, n):
        c[k] = (lam[k] / a[k]) * (dh[k] + c[k - 1] / rho[k - 1]) \
            / (alpha + lam[k] + mu[k + 1])
    return c


def indices(m: ACModel, _check: bool = True) -> np.ndarray:
    """Allocation indices nu_0..nu_{n-1} (fair rejection charges).

    Computed by the pivot recursion; under the regularity conditions the
    sequence is nondecreasing and equals the marginal cost/workload pivot
    ratio, both of which are verified before returning.
    """
    n, alpha = m.n, m.alpha
    dd, dh, rho = m.delta_d, m.delta_h, m.rho
    W = workload_table(m)
    nu = np.zeros(n)
    nu[0] = dh[0] / (alpha + dd[0])
    for j in range(1, n):
        denom = alpha + dd[j] + W[j, j - 1] / rho[j - 1]
        nu[j] = nu[j - 1] + (dh[j] - nu[j - 1] * (alpha + dd[j])) / denom
    if _check:
        scale = max(1.0, float(np.max(np.abs(nu))))
        if validate_assumptions(m).ok:
            if np.any(np.diff(nu) < -1e-9 * scale):
                raise InternalConsistencyError(
                    "indices not nondecreasing although the regularity conditions hold")
            pivots_c = marginal_cost_pivots(m)
            pivots_w = np.array([W[j + 1, j] for j in range(n)])
            if np.max(np.abs(nu - pivots_c / pivots_w)) > 1e-9 * scale:
                raise InternalConsistencyError(
                    "index recursion disagrees with pivot cost/workload ratios")
    return nu


def average_indices(m: ACModel) -> np.ndarray:
    """Long-run average indices: the same recursions evaluated at alpha = 0."""
    if m.alpha == 0:
        return indices(m)
    flat = ACModel(m.n, m.lam, m.mu, m.h, 0.0, m.Lambda)
    return indices(flat)


def closed_form_index(kind: str, lam: float, mu: float, h: float, j: int,
                      delta_h=None, branch: str | None = None) -> float:
    """Closed-form indices at constant rates under the average criterion.

    ``kind`` is one of ``linear`` (h_i = h i), ``quadratic`` (h_i = h i^2)
    or ``general-sum`` (arbitrary increments ``delta_h``, 1-indexed).
    ``branch`` may force ``geometric`` (traffic ratio != 1) or ``critical``
    (ratio == 1); by default it follows the actual ratio.
    """
    if j < 0:
        raise ValueError("state index j must be >= 0")
    rho = lam / mu
    critical = abs(rho - 1.0) < 1e-14
    if branch is None:
        branch = "critical" if critical else "geometric"
    if branch == "critical" and not critical:
        raise ValueError(f"critical branch requested but rho = {rho:g} != 1")
    if branch == "geometric" and critical:
        raise ValueError("geometric branch requested but rho = 1")

    if kind == "general-sum":
        if delta_h is None:
            raise ValueError("general-sum form needs the increment sequence delta_h")
        dh = np.asarray(delta_h, dtype=float)
        if len(dh) < j + 1:
            raise ValueError("delta_h too short for requested j")
        if branch == "critical":
            blocks = np.arange(1, j + 2, dtype=float)
        else:
            blocks = (rho ** np.arange(1, j + 2) - 1.0) / (rho - 1.0)
        return float(dh[: j + 1] @ blocks) / mu
    if kind == "linear":
        if branch == "critical":
            return (h / mu) * (j + 1) * (j + 2) / 2.0
        return (h / mu) * ((rho ** (j + 2) - 1.0) / (rho - 1.0) ** 2
                           - (j + 2) / (rho - 1.0))
    if kind == "quadratic":
        if branch == "critical":
            return (h / mu) * (j + 1) * (j + 2) * (4 * j + 3) / 6.0
        r1 = rho - 1.0
        return (h / mu) * (((2 * j + 1) / r1 ** 2 - 2.0 / r1 ** 3) * rho ** (j + 2)
                           - j * (j + 2) / r1 + 3.0 / r1 ** 2 + 2.0 / r1 ** 3)
    raise ValueError(f"unknown closed form kind {kind!r}")


def whittle_counterexample() -> tuple[ACModel, dict[int, float]]:
    """Two-slot buffer with decreasing arrival rates whose Whittle index
    ranks the states against threshold order.

    Returns the model and the exact Whittle indices (unit activity
    weights) of its three states; the full-buffer state gets index 0
    because shutting the gate there changes nothing but the charge.
    """
    model = ACModel(
        n=2,
        lam=np.array([1.0, 0.5, 0.25]),
        mu=np.array([1.5, 1.5]),
        h=np.array([0.0, 1.0, 2.0]),
        alpha=1.0 / 33.0,
        Lambda=3.0,
    )
    expected = {
        0: float(Fraction(11022, 19111)),
        1: float(Fraction(3300, 6767)),
        2: 0.0,
    }
    return model, expected


def whittle_variant(m: ACModel) -> RBModel:
    """Uniformized model with unit activity weights and every state
    controllable: the classic Whittle setting for this queue.

    Costs stay in rate units (no 1/(alpha+Lambda) scaling), so the critical
    charge of the discrete-time model is the fair subsidy per unit of
    continuous time."""
    rb = uniformize(m)
    return RBModel(rb.P0, rb.P1, m.h, m.h, np.ones(rb.n_states), rb.beta,
                   controllable=frozenset(range(rb.n_states)))


def threshold_steady_state(m: ACModel, k: int) -> tuple[np.ndarray, float, float]:
    """Stationary distribution, average holding-cost rate and average
    rejection rate of the k-th threshold policy (gate shut from state
    k-1 on), for the undiscounted queue.

    The chain then lives on {0, ..., k-1}; detailed balance gives the
    distribution in closed form.  k = n+1 means the gate is always open.
    """
    if not 1 <= k <= m.n + 1:
        raise ValueError(f"threshold chain position k must be in 1..{m.n + 1}")
    top = k - 1 if k <= m.n else m.n
    weights = np.zeros(m.n + 1)
    weights[0] = 1.0
    for i in range(1, top + 1):
        weights[i] = weights[i - 1] * m.lam[i - 1] / m.mu_full[i]
    p = weights / weights.sum()
    cost_rate = float(p @ m.h)
    # rejections occur while the gate is shut, and in the full-buffer state
    if k <= m.n:
        reject_rate = float(p[top] * m.lam[top])
    else:
        reject_rate = float(p[m.n] * m.lam[m.n])
    return p, cost_rate, reject_rate
