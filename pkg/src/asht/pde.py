"""Explicit upwind solver for the continuous-time exponent game.

The game value solves a terminal-value Hamilton-Jacobi equation on [0, a]^m.
After time reversal it becomes an initial-value problem on the enlarged box
[-3a/2, 3a/2]^m with the tapered terminal cost as initial data:

    V <- V + dt * H(forward differences / dh),

with the boundary of the box pinned to 0 throughout. After N_t steps of
size dt = 1/N_t the value at the origin node is the infinite-batch game
exponent. The scheme is monotone under the CFL condition
dt <= dh / (m * log(1/eps)) and converges at rate O(sqrt(dt)).
"""

import math
from dataclasses import dataclass

import numpy as np

from .bounds import hamiltonian_arm_values, terminal_g_batch
from .errors import DomainError, NumericalError, ValidationError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap


CFL_REL_SLACK = 1e-12


def cfl_max_dt(m, eps, dh):
    """Largest stable time step for the explicit scheme: dh / (m log(1/eps))."""
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if dh <= 0.0:
        raise DomainError(f"dh must be positive, got {dh!r}")
    return dh / (m * math.log(1.0 / eps))


@dataclass(frozen=True)
class UpwindGridSpec:
    """Uniform grid on [-3a/2, 3a/2]^m with N_x cells per axis and N_t time steps.

    Axis nodes are -3a/2 + i * dh for i = 0..N_x with dh = 3a/N_x; the time
    step is dt = 1/N_t. N_x must be even so the origin is a grid node.
    """

    m: int
    a_bound: float
    N_x: int
    N_t: int

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError(f"need m >= 2, got {self.m}")
        if not (self.a_bound > 0.0 and math.isfinite(self.a_bound)):
            raise ValidationError(f"a_bound must be positive and finite, got {self.a_bound!r}")
        if self.N_x < 2 or self.N_t < 2:
            raise ValidationError(
                f"need N_x >= 2 and N_t >= 2, got N_x={self.N_x}, N_t={self.N_t}"
            )

    @property
    def dh(self):
        return 3.0 * self.a_bound / self.N_x

    @property
    def dt(self):
        return 1.0 / self.N_t

    @property
    def axis(self):
        return -1.5 * self.a_bound + self.dh * np.arange(self.N_x + 1)

    def cfl_satisfied(self, eps):
        limit = cfl_max_dt(self.m, eps, self.dh)
        return self.dt <= limit * (1.0 + CFL_REL_SLACK)

    def min_N_t(self, eps):
        """Smallest stable step count for this spatial resolution."""
        return int(math.ceil(1.0 / cfl_max_dt(self.m, eps, self.dh) - 1e-12))


def default_grid_spec(instance, N_x=48, cfl_fraction=0.9):
    """Grid spec with dt at cfl_fraction of the stability limit.

    The CFL limit for dh = 3a/N_x is dt <= 3/(N_x * m) regardless of a, so
    N_t scales linearly with N_x.
    """
    if not (0.0 < cfl_fraction <= 1.0):
        raise ValidationError(f"cfl_fraction must be in (0, 1], got {cfl_fraction}")
    if N_x % 2 != 0:
        raise ValidationError(f"N_x must be even so the origin is a node, got {N_x}")
    dh = 3.0 * instance.a_bound / N_x
    max_dt = cfl_max_dt(instance.m, instance.eps, dh)
    N_t = max(2, int(math.ceil(1.0 / (cfl_fraction * max_dt) - 1e-12)))
    return UpwindGridSpec(m=instance.m, a_bound=instance.a_bound, N_x=N_x, N_t=N_t)


@dataclass(frozen=True)
class ValueSlice:
    """The value function on the grid at one time step, boundary pinned to 0."""

    spec: UpwindGridSpec
    values: np.ndarray
    step: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (self.spec.N_x + 1,) * self.spec.m
        if v.shape != expected:
            raise ValidationError(f"values must have shape {expected}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite value encountered at step {self.step}")
        for ax in range(self.spec.m):
            for side in (0, -1):
                face = np.take(v, side, axis=ax)
                if np.any(face != 0.0):
                    raise ValidationError(
                        f"boundary face (axis {ax}, side {side}) must be exactly 0"
                    )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def origin_value(self):
        if self.spec.N_x % 2 != 0:
            raise ValidationError("origin is a grid node only for even N_x")
        idx = (self.spec.N_x // 2,) * self.spec.m
        return float(self.values[idx])


def modified_terminal(x, a_bound):
    """Tapered terminal cost, zero outside [-a/2, 3a/2]^m.

    g'(x) = g(clip(x, [0, a]^m)) * max(0, 1 - 2 d_inf(x, [0, a]^m) / a),
    where g is the second-smallest coordinate. 1-Lipschitz pieces keep the
    whole thing Lipschitz with a constant independent of the grid.
    """
    v = np.asarray(x, dtype=float)
    if v.shape[-1] < 2:
        raise DomainError(f"need m >= 2 coordinates, got shape {v.shape}")
    if a_bound <= 0.0:
        raise DomainError(f"a_bound must be positive, got {a_bound!r}")
    clipped = np.clip(v, 0.0, a_bound)
    dist = np.max(np.abs(v - clipped), axis=-1)
    taper = np.maximum(0.0, 1.0 - 2.0 * dist / a_bound)
    return terminal_g_batch(clipped) * taper


def initial_slice(instance, spec):
    """Grid evaluation of the tapered terminal cost with boundary zeroed."""
    _check_spec_matches(instance, spec)
    grids = np.meshgrid(*([spec.axis] * spec.m), indexing="ij")
    pts = np.stack(grids, axis=-1)
    vals = modified_terminal(pts, spec.a_bound)
    _zero_boundary(vals)
    return ValueSlice(spec=spec, values=vals, step=0)


def _zero_boundary(v):
    for ax in range(v.ndim):
        idx_lo = [slice(None)] * v.ndim
        idx_lo[ax] = 0
        v[tuple(idx_lo)] = 0.0
        idx_hi = [slice(None)] * v.ndim
        idx_hi[ax] = -1
        v[tuple(idx_hi)] = 0.0


def _check_spec_matches(instance, spec):
    if spec.m != instance.m:
        raise ValidationError(f"spec is for m={spec.m}, instance has m={instance.m}")
    if abs(spec.a_bound - instance.a_bound) > 1e-9 * max(1.0, instance.a_bound):
        raise ValidationError(
            f"spec a_bound={spec.a_bound!r} does not match instance a_bound={instance.a_bound!r}"
        )


def _require_cfl(instance, spec):
    if not spec.cfl_satisfied(instance.eps):
        limit = cfl_max_dt(spec.m, instance.eps, spec.dh)
        raise ValidationError(
            f"CFL violated: dt={spec.dt:.9g} exceeds {limit:.9g}; "
            f"use N_t >= {spec.min_N_t(instance.eps)}"
        )


def forward_differences(values, dh):
    """One-sided differences along every axis; out-of-range neighbors read 0.

    Returns an array of shape values.shape + (m,).
    """
    m = values.ndim
    out = np.empty(values.shape + (m,), dtype=float)
    for ax in range(m):
        shifted = np.zeros_like(values)
        sl_dst = [slice(None)] * m
        sl_src = [slice(None)] * m
        sl_dst[ax] = slice(0, -1)
        sl_src[ax] = slice(1, None)
        shifted[tuple(sl_dst)] = values[tuple(sl_src)]
        out[..., ax] = (shifted - values) / dh
    return out


def upwind_step(state, instance):
    """One explicit time step; refuses to run outside the CFL region."""
    spec = state.spec
    _check_spec_matches(instance, spec)
    _require_cfl(instance, spec)
    grads = forward_differences(state.values, spec.dh)
    new_vals = state.values + spec.dt * np.max(
        hamiltonian_arm_values(instance, grads), axis=-1
    )
    _zero_boundary(new_vals)
    if not np.all(np.isfinite(new_vals)):
        raise NumericalError(f"non-finite value encountered at step {state.step + 1}")
    return ValueSlice(spec=spec, values=new_vals, step=state.step + 1)


@njit(cache=True)
def _run_kernel_m3(V, lognu, dh, dt, n_steps):  # pragma: no cover - numba
    N1 = V.shape[0]
    K = lognu.shape[1]
    S = lognu.shape[2]
    Vn = np.zeros_like(V)
    for step in range(n_steps):
        for i in range(1, N1 - 1):
            for j in range(1, N1 - 1):
                for k in range(1, N1 - 1):
                    v = V[i, j, k]
                    g0 = (V[i + 1, j, k] - v) / dh
                    g1 = (V[i, j + 1, k] - v) / dh
                    g2 = (V[i, j, k + 1] - v) / dh
                    s = g0 + g1 + g2
                    best = -1e300
                    for a in range(K):
                        mx = -1e300
                        for x in range(S):
                            w = g0 * lognu[0, a, x] + g1 * lognu[1, a, x] + g2 * lognu[2, a, x]
                            if w > mx:
                                mx = w
                        if s > 0.0:
                            acc = 0.0
                            for x in range(S):
                                w = g0 * lognu[0, a, x] + g1 * lognu[1, a, x] + g2 * lognu[2, a, x]
                                acc += math.exp((w - mx) / s)
                            val = -mx - s * math.log(acc)
                        else:
                            val = -mx
                        if val > best:
                            best = val
                    nv = v + dt * best
                    if not math.isfinite(nv):
                        return V, step + 1
                    Vn[i, j, k] = nv
        tmp = V
        V = Vn
        Vn = tmp
    return V, -1


@njit(cache=True)
def _run_kernel_m2(V, lognu, dh, dt, n_steps):  # pragma: no cover - numba
    N1 = V.shape[0]
    K = lognu.shape[1]
    S = lognu.shape[2]
    Vn = np.zeros_like(V)
    for step in range(n_steps):
        for i in range(1, N1 - 1):
            for j in range(1, N1 - 1):
                v = V[i, j]
                g0 = (V[i + 1, j] - v) / dh
                g1 = (V[i, j + 1] - v) / dh
                s = g0 + g1
                best = -1e300
                for a in range(K):
                    mx = -1e300
                    for x in range(S):
                        w = g0 * lognu[0, a, x] + g1 * lognu[1, a, x]
                        if w > mx:
                            mx = w
                    if s > 0.0:
                        acc = 0.0
                        for x in range(S):
                            w = g0 * lognu[0, a, x] + g1 * lognu[1, a, x]
                            acc += math.exp((w - mx) / s)
                        val = -mx - s * math.log(acc)
                    else:
                        val = -mx
                    if val > best:
                        best = val
                nv = v + dt * best
                if not math.isfinite(nv):
                    return V, step + 1
                Vn[i, j] = nv
        tmp = V
        V = Vn
        Vn = tmp
    return V, -1


def _solve_core(instance, spec, use_numba):
    state = initial_slice(instance, spec)
    _require_cfl(instance, spec)
    if use_numba and HAVE_NUMBA and spec.m in (2, 3):
        kernel = _run_kernel_m3 if spec.m == 3 else _run_kernel_m2
        V = np.array(state.values, dtype=float)
        out, bad = kernel(V, instance.log_probs, spec.dh, spec.dt, spec.N_t)
        if bad >= 0:
            raise NumericalError(f"non-finite value encountered at step {bad}")
        return ValueSlice(spec=spec, values=out, step=spec.N_t)
    for _ in range(spec.N_t):
        state = upwind_step(state, instance)
    return state


def solve_r_go_inf(instance, spec=None, refine=True, use_numba=True):
    """Game value at the origin after integrating the full time horizon.

    Returns (value, refinement_estimate). The estimate is the absolute
    change in the origin value when both N_x and N_t are doubled (halving
    dt at a fixed CFL ratio), an empirical stand-in for the O(sqrt(dt))
    error constant; it is None when refine is False.
    """
    if spec is None:
        spec = default_grid_spec(instance)
    if spec.N_x % 2 != 0:
        raise ValidationError(
            f"origin readout needs even N_x (origin must be a node), got {spec.N_x}"
        )
    final = _solve_core(instance, spec, use_numba)
    value = final.origin_value
    if not refine:
        return value, None
    fine = UpwindGridSpec(
        m=spec.m, a_bound=spec.a_bound, N_x=2 * spec.N_x, N_t=2 * spec.N_t
    )
    fine_value = _solve_core(instance, fine, use_numba).origin_value
    return value, abs(fine_value - value)


def solve_final_slice(instance, spec, use_numba=True):
    """Full final-time slice, for diagnostics and tests."""
    if spec is None:
        raise ValidationError("a grid spec is required")
    return _solve_core(instance, spec, use_numba)
