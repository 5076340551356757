"""Small deterministic optimization helpers used throughout the package."""

import math

import numpy as np

from .errors import DomainError, SolverBudgetError

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
INV_GOLDEN_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_max(f, lo, hi, tol=1e-10):
    """Maximize a unimodal scalar function on [lo, hi].

    Returns (x_star, f(x_star)). The bracket shrinks until its width is
    below tol, so the argmax is located to tol and the value to roughly
    tol**2 * |f''| for smooth f.
    """
    if hi < lo:
        raise DomainError(f"empty bracket: lo={lo!r} > hi={hi!r}")
    a, b = lo, hi
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + INV_GOLDEN_SQ * h
    d = a + INV_GOLDEN * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_GOLDEN_SQ * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_GOLDEN * h
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def project_to_simplex(v):
    """Euclidean projection of a vector onto the probability simplex.

    Sort-based algorithm: find the largest k such that the top-k entries,
    shifted by a common theta, stay positive.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    k = ks[cond][-1]
    theta = css[k - 1] / k
    return np.maximum(v - theta, 0.0)


def simplex_grid(m, steps):
    """All compositions of `steps` into m parts, scaled to the simplex.

    Returns an array of shape (C(steps+m-1, m-1), m) in lexicographic order.
    """
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], steps, m)
    return np.asarray(out, dtype=float) / steps


def dirichlet_starts(m, n, rng):
    """n interior simplex points drawn Dirichlet(1, ..., 1)."""
    x = rng.dirichlet(np.ones(m), size=n)
    return np.clip(x, 1e-12, None) / np.clip(x, 1e-12, None).sum(
        axis=1, keepdims=True
    )


def largest_remainder_counts(weights, total):
    """Round weights * total to integers summing to total.

    Floors first, then hands out the leftover units to the largest
    fractional remainders; ties go to the smallest index.
    """
    weights = np.asarray(weights, dtype=float)
    if total < 0:
        raise ValueError(f"total must be nonnegative, got {total}")
    raw = weights * float(total)
    base = np.floor(raw).astype(np.int64)
    short = int(total - base.sum())
    if short > 0:
        remainders = raw - base
        order = np.lexsort((np.arange(weights.size), -remainders))
        base[order[:short]] += 1
    return base


def nelder_mead_simplex_max(f, x0, rng, n_starts=20, maxiter=400, xatol=1e-10):
    """Multistart Nelder-Mead maximization over the probability simplex.

    Works in the full coordinate space and projects every query back onto
    the simplex, so the polytope boundary is reachable. Returns the best
    (x, value, n_evals) over all starts.
    """
    from scipy.optimize import minimize

    m = x0.shape[-1]
    starts = [np.asarray(x0, dtype=float)]
    if n_starts > 1:
        starts.extend(dirichlet_starts(m, n_starts - 1, rng))
    best_x, best_v, evals = None, -np.inf, 0
    n_converged = 0

    def neg(z):
        return -f(project_to_simplex(z))

    for s in starts:
        res = minimize(
            neg,
            s,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": xatol, "fatol": 1e-12},
        )
        evals += res.nfev
        if res.success:
            n_converged += 1
        x = project_to_simplex(res.x)
        v = f(x)
        if v > best_v:
            best_x, best_v = x, v
    if n_converged == 0:
        raise SolverBudgetError(
            f"no Nelder-Mead start converged within {maxiter} iterations",
            best=(best_x, best_v),
            bracket=(best_v, None),
        )
    return best_x, best_v, evals
