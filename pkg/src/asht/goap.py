"""Grid-based optimal adaptive policy over a space-time cone.

Dynamic programming for the B-batch sampling game. States are cumulative
divergence vectors; over one batch of length dt = 1/B the state moves by
dt * f with ||f||_inf <= a, so everything reachable from the origin lives
in a cone of balls whose radii grow with t. Values are stored on a lattice
restricted to those balls; one backward step applies

    F(x) = max_a  sup over envelope vertices y, s in the subdifferential of
           { dt * H_a(s) - g*(s) + <s, x> },

where g is the local convex envelope of the next level's values over the
reachable ball around x and g* its Fenchel conjugate (computed exactly at
the envelope's hull vertices). The policy replays the stored maximizing arm
at the nearest lattice point.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .bounds import hamiltonian_arm_values
from .errors import DomainError, InternalCheckError, ValidationError
from .pde import modified_terminal
from .rngs import trial_rng

UNIT_BALL_VOLUME = {2: math.pi, 3: 4.0 * math.pi / 3.0}
DEFAULT_MEMORY_CAP = 5_000_000


def consistency_dh_bound(m, kappa, dt):
    """Largest lattice pitch for which every reachable ball around a level-l
    point stays inside the convex hull of level l+1 without extra padding."""
    return kappa * dt * dt / math.sqrt(m)


@dataclass(frozen=True, eq=False)
class ConeGridSpec:
    """Lattice geometry for the cone of reachable states.

    levels[l] is the integer lattice index array (n_l, m) of points kept at
    time t_l = l * dt; D_0 is always just the origin. ball_offsets is the
    shared stencil of lattice offsets reachable in one batch.
    """

    m: int
    a_bound: float
    B: int
    kappa: float
    dh: float
    radii: tuple
    levels: tuple
    ball_offsets: np.ndarray

    @property
    def dt(self):
        return 1.0 / self.B

    @property
    def ball_radius(self):
        return math.sqrt(self.m) * self.a_bound * self.dt

    def level_points(self, level):
        return self.levels[level]

    def index_maps(self):
        return [
            {tuple(row): k for k, row in enumerate(pts)} for pts in self.levels
        ]


def _enumerate_ball(m, radius_cells):
    """Integer lattice points with Euclidean norm <= radius_cells, in
    lexicographic order."""
    r = int(math.floor(radius_cells + 1e-12))
    axes = [np.arange(-r, r + 1)] * m
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    keep = np.sum(pts.astype(float) ** 2, axis=1) <= radius_cells**2 + 1e-12
    return pts[keep].astype(np.int64)


def build_grids(
    instance,
    B,
    kappa=1.0,
    dh=None,
    ball_slack=1.0,
    memory_cap=DEFAULT_MEMORY_CAP,
):
    """Construct the cone lattice for a B-batch game.

    When dh is omitted, it is the largest pitch below the consistency bound
    kappa * dt^2 / sqrt(m) that divides the bounding hypercube of the cone
    symmetrically, so interpolation queries never leave the stored hull.
    A coarser explicit dh is accepted; level radii are then padded by
    sqrt(m) * dh per step to restore the covering property. Estimated
    storage beyond memory_cap points is refused up front.
    """
    m = instance.m
    a = instance.a_bound
    if B < 1:
        raise ValidationError(f"need B >= 1, got {B}")
    if kappa <= 0.0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    dt = 1.0 / B
    bound = consistency_dh_bound(m, kappa, dt)
    half_width = math.sqrt(m) * a + kappa
    if dh is None:
        n_half = int(math.floor(half_width / bound)) + 1
        dh = half_width / n_half
    elif dh <= 0.0:
        raise ValidationError(f"dh must be positive, got {dh}")

    step_pad = max(0.0, math.sqrt(m) * dh)
    radii = [0.0]
    for l in range(B):
        t_next = (l + 1) * dt
        natural = math.sqrt(m) * a * t_next + kappa * t_next * t_next
        covering = radii[-1] + math.sqrt(m) * a * dt + step_pad
        radii.append(max(natural, covering))

    vol = UNIT_BALL_VOLUME.get(m, 2.0**m)
    est_points = sum(
        max(1.0, vol * (r / dh + 1.0) ** m) for r in radii
    )
    if est_points > memory_cap:
        raise ValidationError(
            f"cone lattice needs about {est_points:.3g} points, over the "
            f"memory cap of {memory_cap:.3g}; raise memory_cap or coarsen dh"
        )

    levels = [np.zeros((1, m), dtype=np.int64)]
    for l in range(1, B + 1):
        levels.append(_enumerate_ball(m, radii[l] / dh))
    ball_cells = (math.sqrt(m) * a * dt + ball_slack * dh) / dh
    offsets = _enumerate_ball(m, ball_cells)
    return ConeGridSpec(
        m=m,
        a_bound=a,
        B=B,
        kappa=kappa,
        dh=dh,
        radii=tuple(radii),
        levels=tuple(levels),
        ball_offsets=offsets,
    )


@dataclass(frozen=True, eq=False)
class EnvelopeModel:
    """Lower convex envelope of finitely many lifted points.

    Piecewise linear: facet k supports the plane <normals[k], y> +
    offsets[k]. vertex_indices selects the input points on the lower hull;
    the envelope equals the stored value there and is below it everywhere.
    """

    points: np.ndarray
    values: np.ndarray
    vertex_indices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    facets: tuple
    is_affine: bool = False

    def evaluate(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.max(y @ self.normals.T + self.offsets, axis=-1)

    def conjugate(self, s):
        """g*(s) = max over hull vertices of <s, y> - g(y)."""
        vy = self.points[self.vertex_indices]
        vv = self.values[self.vertex_indices]
        s = np.atleast_2d(np.asarray(s, dtype=float))
        return np.max(s @ vy.T - vv, axis=-1)

    def vertex_subdifferentials(self):
        """Per hull vertex, the incident facet normals (rows)."""
        out = {}
        for fi, facet in enumerate(self.facets):
            for v in facet:
                out.setdefault(int(v), []).append(fi)
        return {
            v: self.normals[idx] for v, idx in out.items()
        }


def _affine_envelope(points, values):
    n, m = points.shape
    A = np.concatenate([points, np.ones((n, 1))], axis=1)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    s, b = coef[:m], coef[m]
    # shift down so the plane never exceeds the data
    b -= max(0.0, float(np.max(A @ coef - values)))
    on_plane = np.abs(points @ s + b - values) <= 1e-9 * (1.0 + np.abs(values))
    verts = np.nonzero(on_plane)[0]
    if verts.size == 0:
        verts = np.array([int(np.argmin(values - points @ s))])
    return EnvelopeModel(
        points=points,
        values=values,
        vertex_indices=verts,
        normals=s[None, :],
        offsets=np.array([b]),
        facets=(verts,),
        is_affine=True,
    )


def local_convex_envelope(points, values):
    """Lower convex envelope of value samples at scattered points.

    Lifts (y, v) to R^(m+1) and keeps the downward-facing hull facets.
    Fewer than m + 2 points, or affinely degenerate ones, fall back to the
    best dominated affine fit. Idempotent: re-enveloping the hull vertices
    with their envelope values reproduces the same function.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim != 2 or points.shape[0] != values.shape[0]:
        raise DomainError(
            f"points {points.shape} and values {values.shape} do not align"
        )
    n, m = points.shape
    if n < m + 2:
        return _affine_envelope(points, values)
    lifted = np.concatenate([points, values[:, None]], axis=1)
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        return _affine_envelope(points, values)
    eqs = hull.equations  # rows: [normal, offset], normal . z + offset = 0
    lower = eqs[:, m] < -1e-12
    if not np.any(lower):
        return _affine_envelope(points, values)
    normals = []
    offsets = []
    facets = []
    vert_set = set()
    for fi in np.nonzero(lower)[0]:
        nvec = eqs[fi, : m + 1]
        d = eqs[fi, m + 1]
        s = -nvec[:m] / nvec[m]
        b = -d / nvec[m]
        normals.append(s)
        offsets.append(b)
        facet = np.sort(hull.simplices[fi])
        facets.append(facet)
        vert_set.update(int(v) for v in facet)
    normals = np.asarray(normals)
    offsets = np.asarray(offsets)
    return EnvelopeModel(
        points=points,
        values=values,
        vertex_indices=np.asarray(sorted(vert_set), dtype=np.int64),
        normals=normals,
        offsets=offsets,
        facets=tuple(facets),
    )


@dataclass(eq=False)
class ValueTable:
    """Backward-induction values and actions on the cone lattice."""

    spec: ConeGridSpec
    values: list            # per level: (n_l,) float array
    actions: list           # per level: (n_l,) int array, -1 at the last level
    index_maps: list = field(repr=False, default=None)

    def __post_init__(self):
        if self.index_maps is None:
            self.index_maps = self.spec.index_maps()

    def value_at_origin(self):
        row = self.index_maps[0][tuple([0] * self.spec.m)]
        return float(self.values[0][row])

    def lookup(self, level, lattice_point):
        key = tuple(int(c) for c in lattice_point)
        row = self.index_maps[level].get(key)
        if row is None:
            raise InternalCheckError(
                f"lattice point {key} missing from level {level}: an "
                "interpolation query left the stored cone, which violates "
                "the grid-consistency construction; report as a bug"
            )
        return row

    def interpolate(self, level, y):
        """Piecewise-linear value at an arbitrary point via the Kuhn
        triangulation of the cell containing y (coordinate-sort rule)."""
        m = self.spec.m
        y = np.asarray(y, dtype=float) / self.spec.dh
        base = np.floor(y).astype(np.int64)
        frac = y - base
        order = np.argsort(-frac, kind="stable")
        sorted_frac = frac[order]
        weights = np.empty(m + 1)
        weights[0] = 1.0 - sorted_frac[0]
        for k in range(1, m):
            weights[k] = sorted_frac[k - 1] - sorted_frac[k]
        weights[m] = sorted_frac[m - 1]
        vertex = base.copy()
        total = weights[0] * self.values[level][self.lookup(level, vertex)]
        for k in range(m):
            vertex[order[k]] += 1
            total += weights[k + 1] * self.values[level][self.lookup(level, vertex)]
        return float(total)


def time_step_operator(instance, spec, next_values, next_index, level, point_idx):
    """One backward-induction update at a single lattice point.

    next_values/next_index describe level + 1. Returns (value, action); the
    action is the smallest arm index attaining the max.
    """
    dt = spec.dt
    x = point_idx.astype(float) * spec.dh
    cells = point_idx[None, :] + spec.ball_offsets
    vals = np.empty(cells.shape[0])
    for r, cell in enumerate(cells):
        key = tuple(int(c) for c in cell)
        row = next_index.get(key)
        if row is None:
            raise InternalCheckError(
                f"ball point {key} missing from level {level + 1}: violates "
                "the grid-consistency construction; report as a bug"
            )
        vals[r] = next_values[row]
    env = local_convex_envelope(cells.astype(float) * spec.dh, vals)
    cand = np.unique(np.round(env.normals, 12), axis=0)
    gstar = env.conjugate(cand)                       # (n_s,)
    hvals = hamiltonian_arm_values(instance, cand)    # (n_s, K)
    scores = dt * hvals - gstar[:, None] + (cand @ x)[:, None]
    per_arm = scores.max(axis=0)                      # (K,)
    action = int(np.argmax(per_arm))
    return float(per_arm[action]), action


def backward_induction(instance, spec):
    """Fill the value table from the terminal level down to the origin."""
    if spec.m != instance.m:
        raise ValidationError(f"spec built for m={spec.m}, instance has m={instance.m}")
    if abs(spec.a_bound - instance.a_bound) > 1e-9 * max(1.0, instance.a_bound):
        raise ValidationError("spec a_bound does not match the instance")
    index_maps = spec.index_maps()
    B = spec.B
    values = [None] * (B + 1)
    actions = [None] * (B + 1)
    term_pts = spec.levels[B].astype(float) * spec.dh
    values[B] = modified_terminal(term_pts, spec.a_bound)
    actions[B] = np.full(spec.levels[B].shape[0], -1, dtype=np.int64)
    for level in range(B - 1, -1, -1):
        pts = spec.levels[level]
        lv = np.empty(pts.shape[0])
        la = np.empty(pts.shape[0], dtype=np.int64)
        nxt_vals = values[level + 1]
        nxt_idx = index_maps[level + 1]
        for r in range(pts.shape[0]):
            lv[r], la[r] = time_step_operator(
                instance, spec, nxt_vals, nxt_idx, level, pts[r]
            )
        values[level] = lv
        actions[level] = la
    return ValueTable(spec=spec, values=values, actions=actions, index_maps=index_maps)


def goap_next_action(table, level, state):
    """Arm to play at a given level and continuous state.

    Projects the state to the nearest stored lattice point of that level
    (ties resolved lexicographically) and returns (arm, lattice_row).
    """
    spec = table.spec
    state = np.asarray(state, dtype=float)
    if state.shape != (spec.m,):
        raise DomainError(f"state must have shape ({spec.m},), got {state.shape}")
    if not (0 <= level < spec.B):
        raise DomainError(f"level must be in [0, {spec.B}), got {level}")
    pts = spec.levels[level]
    d2 = np.sum((pts.astype(float) * spec.dh - state) ** 2, axis=1)
    keys = [pts[:, c] for c in range(spec.m - 1, -1, -1)]
    order = np.lexsort(tuple(keys) + (d2,))
    row = int(order[0])
    return int(table.actions[level][row]), row


@dataclass
class GoapRecord:
    """One policy rollout: states, actions, and the terminal certificate."""

    decision: int
    trajectory: np.ndarray      # (B+1, m) cumulative states
    arms: np.ndarray            # (B,) arms played
    batch_counts: np.ndarray    # (B, K)
    empirical: list             # per batch: list of K prob vectors or None
    terminal_value: float       # tapered terminal cost of the final state


def goap_run_record(instance, table, truth, T, seed):
    """Play the stored policy for one trial of T samples in B batches."""
    spec = table.spec
    if not (0 <= truth < instance.m):
        raise ValidationError(f"truth must index a hypothesis in [0, {instance.m})")
    B = spec.B
    if T < B:
        raise ValidationError(f"need T >= B, got T={T}, B={B}")
    rng = trial_rng(seed, 0)
    base = T // B
    x = np.zeros(spec.m)
    traj = [x.copy()]
    arms = []
    counts_all = []
    empirical = []
    for level in range(B):
        batch = base if level < B - 1 else T - base * (B - 1)
        arm, _ = goap_next_action(table, level, x)
        draw = rng.multinomial(batch, instance.probs[truth, arm])
        q = draw / batch
        mask = q > 0.0
        qm = q[mask]
        d = np.array(
            [
                float(np.sum(qm * (np.log(qm) - np.log(instance.probs[i, arm][mask]))))
                for i in range(instance.m)
            ]
        )
        x = x + spec.dt * d
        traj.append(x.copy())
        arms.append(arm)
        counts = np.zeros(instance.n_arms, dtype=np.int64)
        counts[arm] = batch
        counts_all.append(counts)
        rows = [None] * instance.n_arms
        rows[arm] = q
        empirical.append(rows)
    decision = int(np.argmin(x))
    return GoapRecord(
        decision=decision,
        trajectory=np.asarray(traj),
        arms=np.asarray(arms, dtype=np.int64),
        batch_counts=np.asarray(counts_all),
        empirical=empirical,
        terminal_value=float(modified_terminal(x, spec.a_bound)),
    )


def goap_run(instance, table, truth, T, seed):
    rec = goap_run_record(instance, table, truth, T, seed)
    return rec.decision, rec.trajectory
