"""Blackwell-approachability sampling strategy and its exponent guarantee.

The state is the running average of per-hypothesis divergence payoffs. The
target set is the intersection of half-spaces

    S = { x : <beta, x> >= I'(beta) for every simplex point beta },

where I(beta) = min_a zeta(a, beta) and I' equals I except at one chosen
edge point per hypothesis pair, where it is raised to the target rate R.
The largest R for which S remains approachable is r_approach; steering the
state into S forces the terminal payoff g(x) above R up to an O(1/B) gap.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import differential_evolution, lsq_linear, minimize, nnls

from .bounds import terminal_g
from .errors import DomainError, InternalCheckError, SolverBudgetError, ValidationError
from .instances import Allocation, kl_divergence, zeta_all_arms, zeta_gradient
from .optim import (
    golden_section_max,
    largest_remainder_counts,
    project_to_simplex,
    simplex_grid,
)
from .rngs import trial_rng

MEMBERSHIP_TOL = 1e-6


def intercepts(instance, beta):
    """(I, L, argmin arm, argmax arm) of the per-arm zeta values at beta.

    I is the guaranteed rate of the most informative mixture constraint at
    beta; L is the best single-arm rate. Ties pick the smallest arm index.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (instance.m,):
        raise DomainError(f"beta must have shape ({instance.m},), got {beta.shape}")
    zv = zeta_all_arms(instance, beta)
    amin = int(np.argmin(zv))
    amax = int(np.argmax(zv))
    return float(zv[amin]), float(zv[amax]), amin, amax


def _edge_profile(m, pairs, t_profile):
    rows = np.zeros((len(pairs), m))
    for k, (i, j) in enumerate(pairs):
        rows[k, i] = t_profile[k]
        rows[k, j] = 1.0 - t_profile[k]
    return rows


def edge_sup(instance, i, j, grid_points=1024, tol=1e-12):
    """sup over the (i, j) simplex edge of I(beta) = min_a zeta(a, beta).

    I restricted to an edge is concave (a min of concave functions), so a
    dense grid locates the mode and golden-section refines it. Returns
    (value, beta_star).
    """
    m = instance.m
    if not (0 <= i < m and 0 <= j < m and i != j):
        raise DomainError(f"need two distinct hypothesis indices in [0, {m}), got ({i}, {j})")
    ts = np.linspace(0.0, 1.0, grid_points + 1)
    betas = np.zeros((ts.size, m))
    betas[:, i] = ts
    betas[:, j] = 1.0 - ts
    vals = np.min(-_log_mgf_rows(instance, betas), axis=1)
    k = int(np.argmax(vals))
    lo = ts[max(0, k - 1)]
    hi = ts[min(ts.size - 1, k + 1)]

    def phi(t):
        beta = np.zeros(m)
        beta[i] = t
        beta[j] = 1.0 - t
        return float(np.min(zeta_all_arms(instance, beta)))

    t_star, value = golden_section_max(phi, lo, hi, tol=tol)
    beta_star = np.zeros(m)
    beta_star[i] = t_star
    beta_star[j] = 1.0 - t_star
    return float(value), beta_star


def _log_mgf_rows(instance, betas):
    from .instances import log_mgf_matrix

    return log_mgf_matrix(instance, betas)


def _all_pairs(m):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


def _compute_edge_data(instance):
    return {pair: edge_sup(instance, *pair) for pair in _all_pairs(instance.m)}


def _min_over_simplex_of_L(instance, beta_rows, coarse_steps, polish):
    """inf over mixtures lambda of L(lambda @ beta_rows).

    L is a pointwise max of concave functions, so the minimum can sit at a
    kink; a dense barycentric grid finds the basin and Nelder-Mead (which
    tolerates the kink) polishes.
    """
    P = beta_rows.shape[0]
    if P == 1:
        return float(np.max(zeta_all_arms(instance, beta_rows[0])))
    lam_grid = simplex_grid(P, coarse_steps)
    betas = lam_grid @ beta_rows
    vals = np.max(-_log_mgf_rows(instance, betas), axis=1)
    best_idx = int(np.argmin(vals))
    best = float(vals[best_idx])
    if not polish:
        return best

    def obj(z):
        lam = project_to_simplex(z)
        return float(np.max(zeta_all_arms(instance, lam @ beta_rows)))

    res = minimize(
        obj,
        lam_grid[best_idx],
        method="Nelder-Mead",
        options={"maxiter": 600, "xatol": 1e-11, "fatol": 1e-14},
    )
    return min(best, float(res.fun))


def g_of_r(instance, R, edge_data=None, seed=0, maxiter=200, tol=1e-7, popsize=15):
    """The approachability ceiling G(R).

    G(R) = +inf when no pair's edge supremum falls strictly below R;
    otherwise it is the best achievable worst-mixture single-arm rate

        sup over edge perturbation points (one per active pair) of
        inf over pair mixtures lambda of L(sum lambda_ij beta_ij).

    Piecewise constant and non-increasing in R: it depends on R only
    through the active pair set. Returns (value, details dict).
    """
    if edge_data is None:
        edge_data = _compute_edge_data(instance)
    active = [pair for pair in _all_pairs(instance.m) if edge_data[pair][0] < R]
    if not active:
        return math.inf, {"active_pairs": [], "t_profile": None}
    P = len(active)

    def objective(tvec, coarse=24, polish=True):
        rows = _edge_profile(instance.m, active, tvec)
        return _min_over_simplex_of_L(instance, rows, coarse, polish)

    if P == 1:
        # One pair: the inner mixture is trivial and the objective is
        # max_a of a concave edge function, maximized per arm by golden
        # section on the arm-wise values.
        best_t, best_v = None, -np.inf
        for arm in range(instance.n_arms):
            def arm_val(t, arm=arm):
                rows = _edge_profile(instance.m, active, np.array([t]))
                return float(zeta_all_arms(instance, rows[0])[arm])

            t_star, v = golden_section_max(arm_val, 0.0, 1.0, tol=1e-12)
            if v > best_v:
                best_t, best_v = t_star, v
        return float(best_v), {"active_pairs": active, "t_profile": np.array([best_t])}

    res = differential_evolution(
        lambda t: -objective(t, coarse=24, polish=True),
        bounds=[(0.0, 1.0)] * P,
        seed=seed,
        maxiter=maxiter,
        tol=tol,
        popsize=popsize,
        polish=False,
    )
    t_star = res.x
    value = objective(t_star, coarse=96, polish=True)
    if not res.success and res.nit >= maxiter:
        raise SolverBudgetError(
            f"differential evolution exhausted {maxiter} generations: {res.message}",
            best=float(value),
            bracket=(float(value), None),
        )
    return float(value), {"active_pairs": active, "t_profile": t_star}


@dataclass(frozen=True, eq=False)
class BSetSpec:
    """A concrete approachable target set at rate R.

    Carries the perturbed pairs, the chosen edge point beta_tilde per pair,
    and the edge suprema of all pairs. The set itself is
    { x : <beta_tilde_ij, x> >= R for active pairs, and
          <beta, x> >= I(beta) for every simplex beta }.
    """

    instance: object
    R: float
    pairs: tuple
    beta_tilde: dict
    edge_sups: dict

    def __post_init__(self):
        if self.R < 0.0:
            raise ValidationError(f"R must be nonnegative, got {self.R}")
        for pair in self.pairs:
            if pair not in self.beta_tilde:
                raise ValidationError(f"missing beta_tilde for active pair {pair}")
            if self.edge_sups[pair] >= self.R:
                raise ValidationError(
                    f"pair {pair} has edge sup {self.edge_sups[pair]:.9g} >= R={self.R:.9g}; "
                    "only pairs strictly below R may be perturbed"
                )

    @property
    def m(self):
        return self.instance.m

    def I(self, beta):
        return intercepts(self.instance, beta)[0]

    def L(self, beta):
        return intercepts(self.instance, beta)[1]

    def halfspaces(self):
        """Perturbed half-space normals and offsets [(beta_tilde, R), ...]."""
        return [(self.beta_tilde[pair], self.R) for pair in self.pairs]

    def i_prime_concave(self, beta, n_starts=4):
        """Upper concave envelope of the perturbed rate function at beta.

        Variational form: the best mixture of perturbed points (worth R
        each) and one residual simplex point (worth I there) that averages
        to beta. The residual term is the concave perspective of I, so the
        program is concave in the mixture weights and SLSQP from a few
        starts solves it reliably.
        """
        beta = np.asarray(beta, dtype=float)
        P = len(self.pairs)
        if P == 0:
            return self.I(beta)
        tilde = np.stack([self.beta_tilde[p] for p in self.pairs])  # (P, m)

        def neg_value(mu):
            mu = np.clip(mu, 0.0, 1.0)
            s = mu.sum()
            if s > 1.0:
                mu = mu / s
                s = 1.0
            mu_b = 1.0 - s
            z = beta - mu @ tilde
            if mu_b <= 1e-12:
                if np.max(np.abs(z)) > 1e-9:
                    return np.inf  # infeasible decomposition
                return -(self.R * s)
            resid = z / mu_b
            if np.min(resid) < -1e-12:
                return np.inf
            resid = np.clip(resid, 0.0, None)
            resid = resid / resid.sum()
            return -(self.R * s + mu_b * self.I(resid))

        cons = [{"type": "ineq", "fun": lambda mu: 1.0 - mu.sum()}]
        for k in range(self.m):
            cons.append(
                {"type": "ineq", "fun": lambda mu, k=k: (beta - mu @ tilde)[k]}
            )
        best = self.I(beta)  # mu = 0 is always feasible
        starts = [np.zeros(P)]
        for k in range(P):
            e = np.zeros(P)
            e[k] = 0.5
            starts.append(e)
        if n_starts > len(starts):
            starts.append(np.full(P, 0.5 / P))
        for s0 in starts:
            res = minimize(
                neg_value,
                s0,
                method="SLSQP",
                bounds=[(0.0, 1.0)] * P,
                constraints=cons,
                options={"maxiter": 200, "ftol": 1e-12},
            )
            if res.success and -res.fun > best:
                best = -res.fun
        return float(best)


def r_approach(instance, seed=0, edge_data=None):
    """Largest approachable rate: sup { R : R <= G(R) }.

    G is piecewise constant between the sorted edge suprema, so one G
    evaluation per interval suffices. Returns (value, BSetSpec).
    """
    if edge_data is None:
        edge_data = _compute_edge_data(instance)
    pairs = _all_pairs(instance.m)
    sups = {p: edge_data[p][0] for p in pairs}
    breakpoints = sorted(set(sups.values()))
    a1 = breakpoints[0]

    # R <= a1 keeps every pair unperturbed: G = +inf, so a1 is always feasible.
    best_r = a1
    best_details = {"active_pairs": [], "t_profile": None}
    for s, a_s in enumerate(breakpoints):
        a_next = breakpoints[s + 1] if s + 1 < len(breakpoints) else math.inf
        gap = a_next - a_s
        probe = a_s + (min(1e-9, 0.5 * gap) if math.isfinite(gap) else 1e-9)
        value, details = g_of_r(instance, probe, edge_data=edge_data, seed=seed)
        if value > a_s:
            candidate = min(value, a_next)
            if candidate > best_r:
                best_r = candidate
                best_details = details
    active = best_details["active_pairs"]
    beta_tilde = {}
    if active:
        rows = _edge_profile(instance.m, active, best_details["t_profile"])
        beta_tilde = {pair: rows[k] for k, pair in enumerate(active)}
    spec = BSetSpec(
        instance=instance,
        R=float(best_r),
        pairs=tuple(active),
        beta_tilde=beta_tilde,
        edge_sups=sups,
    )
    return float(best_r), spec


def _membership_argmin(spec, x, subgrad_iters=80, grid_steps=32):
    """Minimize <beta, x> - I'(beta): value, minimizing beta, active family.

    The unperturbed family term min_beta <beta, x> - I(beta) is convex
    (linear minus concave); seeds from a dense simplex grid feed a
    projected subgradient descent, then an epigraph SLSQP polish.
    """
    instance = spec.instance
    x = np.asarray(x, dtype=float)
    m = instance.m

    grid = simplex_grid(m, grid_steps)
    zvals = np.min(-_log_mgf_rows(instance, grid), axis=1)  # I on the grid
    fvals = grid @ x - zvals
    beta = grid[int(np.argmin(fvals))]

    def f_and_subgrad(b):
        zv = zeta_all_arms(instance, b)
        arm = int(np.argmin(zv))
        return float(b @ x - zv[arm]), x - zeta_gradient(instance, arm, b)

    best_f, _ = f_and_subgrad(beta)
    best_beta = beta.copy()
    step0 = 0.5 / (1.0 + np.linalg.norm(x))
    b = beta.copy()
    for k in range(subgrad_iters):
        fval, g = f_and_subgrad(b)
        if fval < best_f:
            best_f, best_beta = fval, b.copy()
        b = project_to_simplex(b - step0 / math.sqrt(k + 1.0) * g)
    fval, _ = f_and_subgrad(b)
    if fval < best_f:
        best_f, best_beta = fval, b.copy()

    # Epigraph polish: min <beta, x> - t  s.t.  t <= zeta(a, beta) for all a.
    z0 = np.concatenate([best_beta, [np.min(zeta_all_arms(instance, best_beta))]])

    def obj(z):
        return float(z[:m] @ x - z[m])

    def obj_jac(z):
        return np.concatenate([x, [-1.0]])

    cons = [
        {"type": "eq", "fun": lambda z: z[:m].sum() - 1.0,
         "jac": lambda z: np.concatenate([np.ones(m), [0.0]])},
    ]
    for a in range(instance.n_arms):
        # zeta extends smoothly to the whole [0, 1]^m box, so the raw
        # iterate is fine here; the equality constraint pins the simplex.
        def carm(z, a=a):
            return float(zeta_all_arms(instance, z[:m])[a] - z[m])

        def carm_jac(z, a=a):
            return np.concatenate([zeta_gradient(instance, a, z[:m]), [-1.0]])

        cons.append({"type": "ineq", "fun": carm, "jac": carm_jac})
    res = minimize(
        obj,
        z0,
        jac=obj_jac,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * m + [(None, None)],
        constraints=cons,
        options={"maxiter": 120, "ftol": 1e-14},
    )
    if res.success:
        bb = project_to_simplex(res.x[:m])
        fval, _ = f_and_subgrad(bb)
        if fval < best_f:
            best_f, best_beta = fval, bb

    best_term = ("base", None)
    value = best_f
    for pair in spec.pairs:
        bt = spec.beta_tilde[pair]
        pv = float(bt @ x - spec.R)
        if pv < value:
            value = pv
            best_beta = bt
            best_term = ("pair", pair)
    return float(value), best_beta, best_term


def membership_l(spec, x):
    """Signed membership functional of the target set.

    l(x) = min( min over active pairs of <beta_tilde, x> - R,
                min over simplex beta of <beta, x> - I(beta) ).
    Nonnegative exactly on the target set; 1-Lipschitz minorant of every
    half-space gap.
    """
    value, _, _ = _membership_argmin(spec, x)
    return value


@dataclass
class ProjectionResult:
    """Projection of x onto the target set with its supporting certificate."""

    x: np.ndarray
    y: np.ndarray
    normals: np.ndarray          # rows: half-space normals accumulated
    offsets: np.ndarray
    multipliers: np.ndarray      # KKT weights, same length as normals
    l_value: float
    n_cuts: int

    @property
    def distance(self):
        return float(np.linalg.norm(self.x - self.y))

    @property
    def direction(self):
        """Unit-sum combination beta with  x - y = -lambda * beta."""
        lam = self.multipliers
        total = lam.sum()
        if total <= 0.0:
            return None
        return (lam @ self.normals) / total

    @property
    def distance(self):
        return float(np.linalg.norm(self.x - self.y))


def _project_onto_halfspaces(x, normals, offsets):
    """Exact Euclidean projection onto {y : normals @ y >= offsets}.

    Lawson-Hanson least-distance reduction solved by nonnegative least
    squares, which terminates even when accumulated cutting planes make
    the constraint rows nearly dependent. Returns (y, multipliers) with
    multipliers nonnegative and y = x + normals.T @ multipliers.
    """
    n, m = normals.shape
    h = offsets - normals @ x
    if n == 0 or np.max(h) <= 0.0:
        return x.copy(), np.zeros(n)
    # min ||z|| s.t. normals @ z >= h  via  min ||E u - f||, u >= 0 with
    # E = [normals.T; h.T], f = e_{m+1}; then z = normals.T @ (u / ||r||^2)
    # because the residual r = E u - f satisfies r_{m+1} = -||r||^2.
    # Violations are normalized to O(1) first: with a tiny trailing row the
    # nnls termination test can accept a visibly suboptimal support.
    sigma = float(np.max(h))
    hs = h / sigma
    E = np.concatenate([normals.T, hs[None, :]], axis=0)
    f = np.zeros(m + 1)
    f[m] = 1.0
    u, rnorm = nnls(E, f)
    if rnorm <= 1e-12:
        raise InternalCheckError("half-space system is numerically infeasible")
    lam_s = u / (rnorm * rnorm)
    y = x + sigma * (normals.T @ lam_s)
    slack_s = (normals @ y - offsets) / sigma
    if np.min(slack_s) < -1e-9 or np.max(np.abs(lam_s * slack_s)) > 1e-9:
        res = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-14)
        r = E @ res.x - f
        lam_s = res.x / (r @ r)
        y = x + sigma * (normals.T @ lam_s)
    return y, sigma * lam_s


def project_to_bset(spec, x, tol=MEMBERSHIP_TOL, max_cuts=60):
    """Euclidean projection of x onto the target set (returns the point).

    Outer approximation by cutting planes: start from the perturbed-pair
    half-spaces, repeatedly project onto the current polyhedron and add the
    most violated unperturbed constraint <beta, y> >= I(beta) until the
    membership functional at the iterate is within tol of zero.
    """
    return project_to_bset_full(spec, x, tol=tol, max_cuts=max_cuts).y


def project_to_bset_full(spec, x, tol=MEMBERSHIP_TOL, max_cuts=60):
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.m,):
        raise DomainError(f"x must have shape ({spec.m},), got {x.shape}")
    l0, beta0, _ = _membership_argmin(spec, x)
    if l0 >= -tol:
        return ProjectionResult(
            x=x.copy(), y=x.copy(),
            normals=np.zeros((0, spec.m)), offsets=np.zeros(0),
            multipliers=np.zeros(0), l_value=l0, n_cuts=0,
        )
    normals = [spec.beta_tilde[p] for p in spec.pairs]
    offsets = [spec.R for _ in spec.pairs]
    normals.append(beta0)
    offsets.append(spec.I(beta0))
    y, lam = np.asarray(x), np.zeros(len(normals))
    l_y = l0
    for cut in range(max_cuts):
        N = np.asarray(normals)
        c = np.asarray(offsets)
        y, lam = _project_onto_halfspaces(x, N, c)
        l_y, beta_star, _ = _membership_argmin(spec, y)
        if l_y >= -tol:
            return ProjectionResult(
                x=x.copy(), y=y, normals=N, offsets=c,
                multipliers=lam, l_value=l_y, n_cuts=cut + 1,
            )
        dup = np.max(np.abs(np.asarray(normals) - beta_star), axis=1).min()
        if dup < 1e-12:
            break  # cannot make progress; accept the current iterate
        normals.append(beta_star)
        offsets.append(spec.I(beta_star))
    return ProjectionResult(
        x=x.copy(), y=y, normals=np.asarray(normals), offsets=np.asarray(offsets),
        multipliers=lam if lam.size == len(normals) else np.zeros(len(normals)),
        l_value=l_y, n_cuts=len(normals) - len(spec.pairs),
    )


@dataclass(frozen=True)
class AllocationCertificate:
    """Arm mixture achieving a guaranteed payoff in a chosen direction."""

    beta: np.ndarray
    w: Allocation
    target: float
    I_beta: float
    L_beta: float


def _allocation_for_direction(spec, beta, target_raw):
    """Two-arm mixture w with sum_a w_a zeta(a, beta) = clip(target, [I, L])."""
    I_b, L_b, amin, amax = intercepts(spec.instance, beta)
    if target_raw > L_b + 1e-7:
        raise InternalCheckError(
            f"required payoff {target_raw:.9g} exceeds best arm value {L_b:.9g}"
        )
    target = min(max(target_raw, I_b), L_b)
    w = np.zeros(spec.instance.n_arms)
    if L_b - I_b <= 1e-15:
        w[amin] = 1.0
    else:
        theta = (L_b - target) / (L_b - I_b)
        theta = min(max(theta, 0.0), 1.0)
        w[amin] += theta
        w[amax] += 1.0 - theta
    return AllocationCertificate(
        beta=beta, w=Allocation(w), target=float(target),
        I_beta=I_b, L_beta=L_b,
    )


def allocation_from_projection(spec, y, projection=None):
    """Sampling mixture for a state projected to boundary point y.

    The steering direction beta is the KKT combination of active half-space
    normals when a ProjectionResult is supplied, otherwise the minimizer of
    the membership functional at y. The returned mixture w guarantees

        inf_Q <beta, payoff(w, Q)> = clip(<beta, y>, [I(beta), L(beta)]),

    which is what the approachability argument needs: pure argmin arm when
    the target sits at I(beta), pure argmax arm at L(beta).
    """
    y = np.asarray(y, dtype=float)
    if projection is not None and projection.direction is not None:
        beta = projection.direction
    else:
        l_y, beta, _ = _membership_argmin(spec, y)
        if l_y > 10.0 * MEMBERSHIP_TOL:
            raise DomainError(
                f"y is in the interior of the target set (l={l_y:.3g}); "
                "projection-based allocation is undefined there"
            )
    cert = _allocation_for_direction(spec, beta, float(beta @ y))
    return cert.beta, cert.w


def payoff_vector(instance, w, q_rows):
    """Per-hypothesis payoff f_i = sum_a w_a D(q_a || nu_a^i) for given
    per-arm distributions q (absent arms excluded by passing None rows)."""
    weights = w.weights if isinstance(w, Allocation) else np.asarray(w, dtype=float)
    f = np.zeros(instance.m)
    for a, q in enumerate(q_rows):
        if q is None or weights[a] == 0.0:
            continue
        for i in range(instance.m):
            f[i] += weights[a] * kl_divergence(q, instance.probs[i, a])
    return f


@dataclass
class ApproachabilityRecord:
    """Everything observed in one run, enough to replay its certificates."""

    decision: int
    trajectory: np.ndarray            # (B+1, m) running-average states
    allocations: list                 # Allocation per batch
    directions: list                  # steering beta per batch (None if inside)
    projections: list                 # projected point per batch (None if inside)
    payoffs: np.ndarray               # (B, m) batch payoff vectors
    batch_counts: np.ndarray          # (B, K) samples drawn per arm
    empirical: list                   # per batch: list of K prob vectors or None


def approachability_run(instance, truth, T, B, seed, spec=None):
    """Run the approachability sampling strategy for one trial.

    T samples split into B batches (the last batch absorbs the remainder).
    Inside the target set any mixture keeps the guarantee, so the strategy
    plays uniform; outside it projects the state and plays the two-arm
    mixture certified by the projection direction. Returns
    (decision, trajectory); decision is argmin of the final state.
    """
    record = approachability_run_record(instance, truth, T, B, seed, spec=spec)
    return record.decision, record.trajectory


def approachability_run_record(instance, truth, T, B, seed, spec=None):
    if spec is None:
        _, spec = r_approach(instance)
    if not (0 <= truth < instance.m):
        raise ValidationError(f"truth must index a hypothesis in [0, {instance.m})")
    if T < B or B < 1:
        raise ValidationError(f"need T >= B >= 1, got T={T}, B={B}")
    rng = trial_rng(seed, 0)
    m, K = instance.m, instance.n_arms
    base = T // B
    x = np.zeros(m)
    traj = [x.copy()]
    allocations, directions, projections, payoffs, counts_all, empirical = (
        [], [], [], [], [], []
    )
    for n in range(B):
        batch = base if n < B - 1 else T - base * (B - 1)
        proj = project_to_bset_full(spec, x)
        if proj.l_value >= -MEMBERSHIP_TOL and proj.n_cuts == 0:
            # state already in the target set
            beta = None
            w = Allocation(np.full(K, 1.0 / K))
            projections.append(None)
        else:
            beta, w = allocation_from_projection(spec, proj.y, projection=proj)
            projections.append(proj.y.copy())
        directions.append(None if beta is None else np.asarray(beta).copy())
        counts = largest_remainder_counts(w.weights, batch)
        q_rows = []
        for a in range(K):
            if counts[a] == 0:
                q_rows.append(None)
                continue
            draw = rng.multinomial(counts[a], instance.probs[truth, a])
            q_rows.append(draw / counts[a])
        f = payoff_vector(instance, w, q_rows)
        x = n / (n + 1.0) * x + f / (n + 1.0)
        traj.append(x.copy())
        allocations.append(w)
        payoffs.append(f)
        counts_all.append(counts)
        empirical.append(q_rows)
    decision = int(np.argmin(x))
    return ApproachabilityRecord(
        decision=decision,
        trajectory=np.asarray(traj),
        allocations=allocations,
        directions=directions,
        projections=projections,
        payoffs=np.asarray(payoffs),
        batch_counts=np.asarray(counts_all),
        empirical=empirical,
    )


def verify_bset(spec, instance, n_samples=10000, seed=0, slack=1e-9):
    """Sample-based check of the approachability geometry.

    Draws states x outside the target set and adversarial per-arm
    distributions v, projects x, builds the certified allocation, and
    checks the supporting-hyperplane condition

        <x - y, f(w, v) - y> <= slack.

    Points already inside the set are counted as skipped. Returns a report
    dict with the maximum observed violation.
    """
    rng = trial_rng(seed, 1)
    m, K, S = instance.m, instance.n_arms, instance.support_size
    scale = max(spec.R, max(spec.edge_sups.values(), default=0.0), 0.05)
    checked = skipped = 0
    max_violation = -math.inf
    worst = None
    for _ in range(n_samples):
        x = rng.uniform(-0.5 * scale, 2.5 * scale, size=m)
        proj = project_to_bset_full(spec, x)
        if proj.l_value >= -MEMBERSHIP_TOL and proj.n_cuts == 0:
            skipped += 1
            continue
        beta, w = allocation_from_projection(spec, proj.y, projection=proj)
        v_rows = [rng.dirichlet(np.ones(S)) for _ in range(K)]
        f = payoff_vector(instance, w, v_rows)
        viol = float((x - proj.y) @ (f - proj.y))
        checked += 1
        if viol > max_violation:
            max_violation = viol
            worst = {"x": x.tolist(), "violation": viol}
    return {
        "n_checked": checked,
        "n_skipped": skipped,
        "max_violation": max_violation if checked else 0.0,
        "slack": slack,
        "passed": checked == 0 or max_violation <= slack,
        "worst": worst,
    }
