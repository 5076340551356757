"""Error-exponent functionals: the Hamiltonian, terminal cost, and scalar bounds.

The bounds computed here bracket the minimax error exponent achievable with
adaptive sampling over T observations:

    r_static <= r_go_inf <= r_go_1 <= r_ub,

where r_static is the best nonadaptive allocation, r_go_1 the one-batch
game value, r_ub the pairwise Chernoff ceiling, and r_go_inf (solved by the
PDE module) the continuous-time game value. r_hopf is a separate upper
bound on r_go_inf obtained from a min-max representation of the terminal
cost.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import differential_evolution, linprog, minimize
from scipy.special import logsumexp

from .errors import DimensionError, DomainError, InternalCheckError, SolverBudgetError
from .instances import Allocation, chernoff_information, log_mgf_matrix
from .optim import golden_section_max, nelder_mead_simplex_max, project_to_simplex

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    HAVE_NUMBA = False

LADDER_SLACK_LOW = 1e-6
LADDER_SLACK_MID = 1e-6
LADDER_SLACK_TOP = 2e-6


@dataclass(frozen=True)
class Momentum:
    """A costate vector in R^m: one coordinate per hypothesis."""

    p: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.p, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise DimensionError(f"momentum must be a 1-d vector of length >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("momentum has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "p", v)

    @property
    def total(self):
        return float(self.p.sum())


def _as_momentum_array(p, m):
    v = p.p if isinstance(p, Momentum) else np.asarray(p, dtype=float)
    if v.shape != (m,):
        raise DimensionError(f"momentum must have shape ({m},), got {v.shape}")
    return v


def hamiltonian_arm_values(instance, points):
    """Per-arm Hamiltonian integrand, vectorized over momentum vectors.

    points: (..., m). Returns (..., K) where entry a is

        sum(p) * zeta(a, p / sum(p))          if sum(p) > 0
        min_x -sum_i p_i log nu_a^i(x)        otherwise.

    Both branches are computed as -s * logsumexp(w / s) with w = p @ log nu,
    which converges to the second branch as s -> 0+, so the function is
    continuous across the sum(p) = 0 boundary.
    """
    pts = np.asarray(points, dtype=float)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    w = np.tensordot(pts, instance.log_probs, axes=(-1, 0))  # (..., K, S)
    s = pts.sum(axis=-1)
    pos = s > 0.0
    mx = np.max(w, axis=-1)
    out = -mx.copy()  # the sum(p) <= 0 branch: min_x of -w
    if np.any(pos):
        # -s log sum_x exp(w/s) = -mx - s log sum_x exp((w - mx)/s),
        # stable for arbitrarily small positive s.
        sp = s[pos][..., None, None]
        tail = np.log(np.sum(np.exp((w[pos] - mx[pos][..., None]) / sp), axis=-1))
        out[pos] = -mx[pos] - s[pos][..., None] * tail
    return out[0] if squeeze else out


def hamiltonian(instance, p):
    """Hamiltonian of the exponent game and its maximizing arm.

    H(p) = max_a of the per-arm value (see hamiltonian_arm_values). Ties go
    to the smallest arm index. For p on the probability simplex the per-arm
    values reduce to zeta(a, p), sharing that code path exactly.
    """
    v = _as_momentum_array(p, instance.m)
    vals = hamiltonian_arm_values(instance, v)
    arm = int(np.argmax(vals))
    return float(vals[arm]), arm


def hamiltonian_batch(instance, points):
    """max_a of hamiltonian_arm_values, for (..., m) stacks of momenta."""
    return np.max(hamiltonian_arm_values(instance, points), axis=-1)


def terminal_g(x):
    """Second-smallest coordinate: max_j min_{i != j} x_i.

    The payoff of guessing optimally when x collects the per-hypothesis
    log-likelihood gaps.
    """
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DomainError(f"terminal cost needs a vector of length >= 2, got shape {v.shape}")
    return float(np.partition(v, 1)[1])


def terminal_g_batch(x):
    """terminal_g along the last axis of an (..., m) array."""
    v = np.asarray(x, dtype=float)
    return np.partition(v, 1, axis=-1)[..., 1]


@dataclass
class SolverMeta:
    """Bookkeeping for one scalar bound: how it was obtained."""

    method: str
    iterations: int = 0
    n_evaluations: int = 0
    tolerance: float = float("nan")
    converged: bool = True
    runtime_s: float = 0.0

    def to_dict(self):
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "n_evaluations": int(self.n_evaluations),
            "tolerance": self.tolerance,
            "converged": bool(self.converged),
            "runtime_s": self.runtime_s,
        }


def r_ub(instance, tol=1e-10):
    """Pairwise ceiling: min over hypothesis pairs of the best single-arm
    Chernoff information. No strategy, adaptive or not, beats it."""
    best = np.inf
    for i in range(instance.m):
        for j in range(i + 1, instance.m):
            pair_best = max(
                chernoff_information(
                    instance.probs[i, a], instance.probs[j, a], tol=tol
                )
                for a in range(instance.n_arms)
            )
            best = min(best, pair_best)
    return float(best)


def _static_objective_numpy(log_probs, weights):
    # min over pairs of max_s -sum_a w_a log sum_x nu_j^s nu_i^(1-s)
    m = log_probs.shape[0]
    worst = np.inf
    for i in range(m):
        for j in range(i + 1, m):
            li, lj = log_probs[i], log_probs[j]  # (K, S)

            def pair_val(s):
                return -float(weights @ logsumexp(s * lj + (1.0 - s) * li, axis=-1))

            _, v = golden_section_max(pair_val, 0.0, 1.0, tol=1e-10)
            worst = min(worst, v)
    return worst


if HAVE_NUMBA:

    @njit(cache=True)
    def _pair_exponent_nb(log_probs, i, j, weights, s):  # pragma: no cover - numba
        K, S = log_probs.shape[1], log_probs.shape[2]
        tot = 0.0
        for a in range(K):
            mx = -1e300
            for x in range(S):
                v = s * log_probs[j, a, x] + (1.0 - s) * log_probs[i, a, x]
                if v > mx:
                    mx = v
            acc = 0.0
            for x in range(S):
                v = s * log_probs[j, a, x] + (1.0 - s) * log_probs[i, a, x]
                acc += math.exp(v - mx)
            tot += weights[a] * (mx + math.log(acc))
        return -tot

    @njit(cache=True)
    def _static_objective_nb(log_probs, weights):  # pragma: no cover - numba
        m = log_probs.shape[0]
        inv_golden = (math.sqrt(5.0) - 1.0) / 2.0
        inv_golden_sq = (3.0 - math.sqrt(5.0)) / 2.0
        worst = 1e300
        for i in range(m):
            for j in range(i + 1, m):
                a, b = 0.0, 1.0
                h = b - a
                c = a + inv_golden_sq * h
                d = a + inv_golden * h
                fc = _pair_exponent_nb(log_probs, i, j, weights, c)
                fd = _pair_exponent_nb(log_probs, i, j, weights, d)
                while h > 1e-10:
                    if fc >= fd:
                        b, d, fd = d, c, fc
                        h = b - a
                        c = a + inv_golden_sq * h
                        fc = _pair_exponent_nb(log_probs, i, j, weights, c)
                    else:
                        a, c, fc = c, d, fd
                        h = b - a
                        d = a + inv_golden * h
                        fd = _pair_exponent_nb(log_probs, i, j, weights, d)
                v = _pair_exponent_nb(log_probs, i, j, weights, 0.5 * (a + b))
                if v < worst:
                    worst = v
        return worst


def _static_objective(instance, weights):
    if HAVE_NUMBA:
        return float(_static_objective_nb(instance.log_probs, np.asarray(weights)))
    return _static_objective_numpy(instance.log_probs, np.asarray(weights))


def r_static(instance, n_starts=20, seed=0):
    """Best fixed (nonadaptive) allocation exponent.

    Maximizes, over allocations w, the worst pairwise mixed Chernoff value
    min_{i<j} max_s -sum_a w_a log sum_x (nu_a^j)^s (nu_a^i)^(1-s).
    The inner problem is concave in s per pair; the outer concave problem
    is solved by multistart Nelder-Mead restricted to the simplex.

    Returns (value, Allocation).
    """
    rng = np.random.default_rng(seed)
    x0 = np.full(instance.n_arms, 1.0 / instance.n_arms)
    w, value, _ = nelder_mead_simplex_max(
        lambda wv: _static_objective(instance, wv), x0, rng, n_starts=n_starts
    )
    return float(value), Allocation(w)


def _divergence_matrix(instance, q_rows):
    """d[i, a] = D(q_a || nu_a^i) for empirical rows q (K, S)."""
    q = np.asarray(q_rows, dtype=float)
    mask = q > 0.0
    qlog = np.where(mask, np.log(np.where(mask, q, 1.0)), 0.0)
    ent = np.sum(np.where(mask, q * qlog, 0.0), axis=-1)  # (K,)
    cross = np.einsum("ax,iax->ia", q, instance.log_probs)
    return ent[None, :] - cross


def _best_response_lp(d, m, K):
    """max_j of the LP  max t  s.t.  t <= w . d_i for i != j, w in the simplex."""
    best = -np.inf
    c = np.zeros(K + 1)
    c[-1] = -1.0
    a_eq = np.zeros((1, K + 1))
    a_eq[0, :K] = 1.0
    bounds = [(0.0, None)] * K + [(None, None)]
    for j in range(m):
        rows = [np.concatenate([-d[i], [1.0]]) for i in range(m) if i != j]
        res = linprog(
            c,
            A_ub=np.asarray(rows),
            b_ub=np.zeros(len(rows)),
            A_eq=a_eq,
            b_eq=np.ones(1),
            bounds=bounds,
            method="highs",
        )
        if not res.success:
            raise InternalCheckError(f"inner allocation LP failed: {res.message}")
        best = max(best, -res.fun)
    return best


def _best_response_enum(d, m, K):
    """Exact LP solution for m <= 3 by enumerating basic feasible points.

    With at most two row constraints the optimum sits either on a single
    arm (value min over rows) or on a two-arm mix that equalizes the rows.
    """
    best = -np.inf
    for j in range(m):
        rows = [i for i in range(m) if i != j]
        if len(rows) == 1:
            best = max(best, float(np.max(d[rows[0]])))
            continue
        u, v = d[rows[0]], d[rows[1]]
        cand = float(np.max(np.minimum(u, v)))
        for a in range(K):
            for b in range(a + 1, K):
                alpha = u[a] - v[a]
                beta = u[b] - v[b]
                denom = beta - alpha
                if denom == 0.0:
                    continue
                t = beta / denom
                if 0.0 <= t <= 1.0:
                    cand = max(cand, t * u[a] + (1.0 - t) * u[b])
        best = max(best, cand)
    return best


def _best_response_value(instance, q_rows, method="auto"):
    """sup_w max_j min_{i != j} sum_a w_a D(q_a || nu_a^i), exactly.

    For each candidate truth j the inner problem is a small LP in (w, t):
    maximize t subject to t <= w . d_i for all i != j. Instances with at
    most two competing rows use closed-form vertex enumeration; larger ones
    go through an LP solver. Both routes agree to solver precision.
    """
    d = _divergence_matrix(instance, q_rows)
    m, K = instance.m, instance.n_arms
    if method == "lp" or (method == "auto" and m > 3):
        return _best_response_lp(d, m, K)
    return _best_response_enum(d, m, K)


def r_go_1(instance, seed=0, maxiter=2000, tol=1e-7, popsize=15):
    """One-batch game value.

    The sampler commits an allocation w before seeing data; nature picks
    the empirical distributions Q = (Q_a) adversarially:

        inf_Q sup_w max_j min_{i != j} sum_a w_a D(Q_a || nu_a^i).

    The inner sup is exact (per-truth LPs); the outer inf over the product
    of simplices runs seeded differential evolution with a Nelder-Mead
    polish on the incumbent.
    """
    K, S = instance.n_arms, instance.support_size
    n_eval = 0

    def objective(x):
        nonlocal n_eval
        n_eval += 1
        q = x.reshape(K, S)
        q = q / q.sum(axis=1, keepdims=True)
        return _best_response_value(instance, q)

    t0 = time.monotonic()
    res = differential_evolution(
        objective,
        bounds=[(1e-6, 1.0)] * (K * S),
        seed=seed,
        maxiter=maxiter,
        tol=tol,
        popsize=popsize,
        polish=False,
    )
    polish = minimize(
        objective,
        res.x,
        method="Nelder-Mead",
        options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12},
    )
    value = min(res.fun, polish.fun)
    meta = SolverMeta(
        method="differential_evolution+nelder_mead",
        iterations=int(res.nit),
        n_evaluations=n_eval,
        tolerance=tol,
        converged=bool(res.success),
        runtime_s=time.monotonic() - t0,
    )
    if not res.success and res.nit >= maxiter:
        raise SolverBudgetError(
            f"differential evolution exhausted {maxiter} generations: {res.message}",
            best=float(value),
            bracket=(None, float(value)),
        )
    return float(value), meta


def _pair_list(m):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


def edge_point(m, i, j, t):
    """beta on the (i, j) simplex edge: t at i, 1-t at j."""
    beta = np.zeros(m)
    beta[i] = t
    beta[j] = 1.0 - t
    return beta


def _pair_profile_matrix(m, pairs, t_profile):
    """Rows beta_ij(t_ij) for each pair in order."""
    rows = np.zeros((len(pairs), m))
    for k, (i, j) in enumerate(pairs):
        rows[k, i] = t_profile[k]
        rows[k, j] = 1.0 - t_profile[k]
    return rows


def r_hopf(instance, seed=0, maxiter=400, tol=1e-7, popsize=15):
    """Min-max bound from the pairwise representation of the terminal cost.

    inf over pair weights lambda (a distribution over hypothesis pairs) of
    max_a sup over edge positions t of zeta(a, P), with P the lambda-mixture
    of edge points beta_ij(t_ij). For each arm the inner problem is concave
    in t over a box, solved by L-BFGS-B with the analytic gradient.
    """
    m, K = instance.m, instance.n_arms
    pairs = _pair_list(m)
    P = len(pairs)
    lp = instance.log_probs
    n_eval = 0

    def inner_value(lam):
        # max_a sup_t zeta(a, sum_k lam_k beta_k(t_k))
        best = -np.inf
        for a in range(K):
            la = lp[:, a, :]  # (m, S)

            def neg(tvec):
                prof = _pair_profile_matrix(m, pairs, tvec)
                beta = lam @ prof
                w = beta @ la
                lz = logsumexp(w)
                tilt = np.exp(w - lz)
                grad_beta = la @ tilt  # d logZ / d beta
                grad_t = np.array(
                    [lam[k] * (grad_beta[i] - grad_beta[j]) for k, (i, j) in enumerate(pairs)]
                )
                return lz, grad_t

            res = minimize(
                neg,
                np.full(P, 0.5),
                jac=True,
                method="L-BFGS-B",
                bounds=[(0.0, 1.0)] * P,
                options={"ftol": 1e-14, "gtol": 1e-12},
            )
            best = max(best, -res.fun)
        return best

    def objective(x):
        nonlocal n_eval
        n_eval += 1
        s = x.sum()
        lam = np.full(P, 1.0 / P) if s <= 1e-12 else x / s
        return inner_value(lam)

    t0 = time.monotonic()
    if P == 1:
        value = objective(np.ones(1))
        meta = SolverMeta(
            method="single_pair_exact", n_evaluations=1, tolerance=0.0,
            runtime_s=time.monotonic() - t0,
        )
        return float(value), meta
    res = differential_evolution(
        objective,
        bounds=[(0.0, 1.0)] * P,
        seed=seed,
        maxiter=maxiter,
        tol=tol,
        popsize=popsize,
        polish=False,
    )
    polish = minimize(
        lambda x: objective(project_to_simplex(x)),
        project_to_simplex(res.x),
        method="Nelder-Mead",
        options={"maxiter": 500, "xatol": 1e-9, "fatol": 1e-12},
    )
    value = min(res.fun, polish.fun)
    meta = SolverMeta(
        method="differential_evolution+nelder_mead",
        iterations=int(res.nit),
        n_evaluations=n_eval,
        tolerance=tol,
        converged=bool(res.success),
        runtime_s=time.monotonic() - t0,
    )
    if not res.success and res.nit >= maxiter:
        raise SolverBudgetError(
            f"differential evolution exhausted {maxiter} generations: {res.message}",
            best=float(value),
            bracket=(None, float(value)),
        )
    return float(value), meta


@dataclass
class BoundsReport:
    """All scalar bounds for one instance, with solver provenance.

    The ladder invariant is checked at construction: within small slacks,
    r_static <= r_go_inf <= r_go_1 <= r_ub (r_go_inf and r_hopf optional).
    """

    m: int
    n_arms: int
    support_size: int
    eps: float
    a_bound: float
    r_static: float
    r_ub: float
    r_go_1: float
    r_hopf: float = None
    r_go_inf: float = None
    r_go_inf_refinement: float = None
    w_static: Allocation = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check_ladder()

    def check_ladder(self):
        lo = self.r_static - LADDER_SLACK_LOW
        mid = self.r_go_1 + LADDER_SLACK_MID
        top = self.r_ub + LADDER_SLACK_TOP
        chain = [("r_static", lo)]
        if self.r_go_inf is not None:
            chain.append(("r_go_inf", self.r_go_inf))
        chain.append(("r_go_1", mid))
        chain.append(("r_ub", top))
        values = [v for _, v in chain]
        for k in range(len(values) - 1):
            if values[k] > values[k + 1]:
                raise InternalCheckError(
                    "bounds ladder violated: "
                    + " <= ".join(f"{n}={v:.9g}" for n, v in chain)
                )

    def to_dict(self):
        out = {
            "m": self.m,
            "n_arms": self.n_arms,
            "support_size": self.support_size,
            "eps": self.eps,
            "a_bound": self.a_bound,
            "r_static": self.r_static,
            "r_ub": self.r_ub,
            "r_go_1": self.r_go_1,
            "r_hopf": self.r_hopf,
            "r_go_inf": self.r_go_inf,
            "r_go_inf_refinement": self.r_go_inf_refinement,
            "w_static": None if self.w_static is None else self.w_static.weights.tolist(),
            "meta": {k: v.to_dict() if isinstance(v, SolverMeta) else v for k, v in self.meta.items()},
        }
        return out


def compute_bounds_report(
    instance,
    include=("r_static", "r_ub", "r_go_1"),
    seed=0,
    pde_spec=None,
    de_maxiter=None,
):
    """Run the requested bound solvers and assemble a BoundsReport.

    include may contain r_static, r_ub, r_go_1, r_hopf, r_go_inf. The PDE
    bound accepts an optional grid spec; the default is chosen by the PDE
    module from the instance. de_maxiter caps the evolutionary search
    generations for r_go_1 and r_hopf.
    """
    meta = {}
    values = {"r_hopf": None, "r_go_inf": None, "r_go_inf_refinement": None}
    de_kwargs = {} if de_maxiter is None else {"maxiter": de_maxiter, "tol": 0.0}

    # The three core bounds are mandatory report fields.
    t0 = time.monotonic()
    values["r_ub"] = r_ub(instance)
    meta["r_ub"] = SolverMeta(
        method="pairwise_chernoff_golden", tolerance=1e-10,
        runtime_s=time.monotonic() - t0,
    )
    t0 = time.monotonic()
    values["r_static"], w_static = r_static(instance, seed=seed)
    meta["r_static"] = SolverMeta(
        method="multistart_nelder_mead", iterations=20, tolerance=1e-10,
        runtime_s=time.monotonic() - t0,
    )
    values["r_go_1"], meta["r_go_1"] = r_go_1(instance, seed=seed, **de_kwargs)
    if "r_hopf" in include:
        values["r_hopf"], meta["r_hopf"] = r_hopf(instance, seed=seed, **de_kwargs)
    if "r_go_inf" in include:
        from .pde import default_grid_spec, solve_r_go_inf

        spec = pde_spec if pde_spec is not None else default_grid_spec(instance)
        t0 = time.monotonic()
        v, est = solve_r_go_inf(instance, spec)
        values["r_go_inf"] = v
        values["r_go_inf_refinement"] = est
        meta["r_go_inf"] = SolverMeta(
            method=f"upwind_pde(N_x={spec.N_x}, N_t={spec.N_t})",
            iterations=spec.N_t,
            tolerance=est if est is not None else float("nan"),
            runtime_s=time.monotonic() - t0,
        )

    return BoundsReport(
        m=instance.m,
        n_arms=instance.n_arms,
        support_size=instance.support_size,
        eps=instance.eps,
        a_bound=instance.a_bound,
        r_static=values["r_static"],
        r_ub=values["r_ub"],
        r_go_1=values["r_go_1"],
        r_hopf=values["r_hopf"],
        r_go_inf=values["r_go_inf"],
        r_go_inf_refinement=values["r_go_inf_refinement"],
        w_static=w_static,
        meta=meta,
    )
