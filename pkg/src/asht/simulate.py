"""Monte-Carlo harness: trials, error rates, and exponent regression.

Trials are keyed by (seed, trial index) through counter-based streams, so
any single trial can be replayed bit-for-bit without resampling the rest.
Exponent estimation fits -log(error rate) against the horizon T with an
intercept absorbing the 1/T correction, weighting points by the delta-
method variance of log p-hat and bootstrapping the slope error.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .instances import Allocation
from .optim import largest_remainder_counts
from .rngs import splitmix64, trial_rng

log = logging.getLogger(__name__)

MIN_ERRORS_PER_POINT = 10


@dataclass
class TrialRecord:
    """One simulated trial and enough context to replay it."""

    policy: str
    truth: int
    decision: int
    T: int
    B: int
    seed: int
    trial: int
    state: np.ndarray            # final average divergence vector
    terminal_g: float            # second-smallest coordinate of the state
    batch_counts: np.ndarray     # (B, K)
    empirical: list              # per batch, per arm: prob vector or None
    allocations: list            # Allocation per batch
    degenerate: bool = False
    certificates: dict = field(default_factory=dict)

    @property
    def correct(self):
        return self.decision == self.truth


def sample_batch(instance, truth, weights, n, rng):
    """Draw one batch: n samples split over arms by largest remainder.

    rng may be a Generator or an integer seed. Returns (counts, q_rows)
    where q_rows[a] is the empirical distribution of arm a, or None for
    arms that received no samples (absent marker).
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    if isinstance(rng, (int, np.integer)):
        rng = trial_rng(int(rng), 0)
    w = weights.weights if isinstance(weights, Allocation) else np.asarray(weights, dtype=float)
    counts = largest_remainder_counts(w, n)
    q_rows = []
    for a in range(instance.n_arms):
        if counts[a] == 0:
            q_rows.append(None)
            continue
        draw = rng.multinomial(counts[a], instance.probs[truth, a])
        q_rows.append(draw / counts[a])
    return counts, q_rows


def _divergences_to_all(instance, arm, q):
    lp = instance.log_probs[:, arm, :]
    mask = q > 0.0
    qm = q[mask]
    ent = float(np.sum(qm * np.log(qm)))
    return ent - lp[:, mask] @ qm


def average_divergence_state(instance, allocations, empirical):
    """Average over batches of sum_a w_a D(Q_a || nu_a^i), arms without
    samples excluded from the sums."""
    m = instance.m
    B = len(allocations)
    x = np.zeros(m)
    for w, q_rows in zip(allocations, empirical):
        wv = w.weights if isinstance(w, Allocation) else np.asarray(w, dtype=float)
        f = np.zeros(m)
        for a, q in enumerate(q_rows):
            if q is None or wv[a] == 0.0:
                continue
            f += wv[a] * _divergences_to_all(instance, a, q)
        x += f
    return x / B


def run_trial(instance, policy, truth, T, B, seed, trial=0, with_certificates=False):
    """Execute one trial of a named policy and return its TrialRecord.

    policy is ("static", Allocation), ("approach", BSetSpec) or
    ("goap", ValueTable). Identical evidence for every hypothesis flags the
    record degenerate; ties resolve to the smallest hypothesis index.
    Certificate checks are filled when with_certificates is true (they add
    projection work for the approachability policy).
    """
    if not (0 <= truth < instance.m):
        raise ValidationError(f"truth must be in [0, {instance.m}), got {truth}")
    if B < 1 or T < B:
        raise ValidationError(f"need T >= B >= 1, got T={T}, B={B}")
    kind = policy[0]
    approach_rec = None
    goap_rec = None
    if kind == "static":
        alloc = policy[1]
        rng = trial_rng(seed, trial)
        allocations, empirical, counts_all = [], [], []
        base = T // B
        for n in range(B):
            batch = base if n < B - 1 else T - base * (B - 1)
            counts, q_rows = sample_batch(instance, truth, alloc, batch, rng)
            allocations.append(alloc)
            empirical.append(q_rows)
            counts_all.append(counts)
        x = average_divergence_state(instance, allocations, empirical)
        batch_counts = np.asarray(counts_all)
    elif kind == "approach":
        from .approachability import approachability_run_record

        approach_rec = approachability_run_record(
            instance, truth, T, B, seed=splitmix64(seed, trial), spec=policy[1]
        )
        allocations = approach_rec.allocations
        empirical = approach_rec.empirical
        batch_counts = approach_rec.batch_counts
        x = approach_rec.trajectory[-1]
    elif kind == "goap":
        from .goap import goap_run_record

        table = policy[1]
        goap_rec = goap_run_record(
            instance, table, truth, T, seed=splitmix64(seed, trial)
        )
        allocations = [
            Allocation(np.eye(instance.n_arms)[arm]) for arm in goap_rec.arms
        ]
        empirical = goap_rec.empirical
        batch_counts = goap_rec.batch_counts
        x = goap_rec.trajectory[-1]
        B = table.spec.B
    else:
        raise ValidationError(f"unknown policy kind {kind!r}")

    degenerate = bool(np.max(x) - np.min(x) <= 1e-15)
    decision = 0 if degenerate else int(np.argmin(x))
    record = TrialRecord(
        policy=kind,
        truth=truth,
        decision=decision,
        T=T,
        B=B,
        seed=seed,
        trial=trial,
        state=np.asarray(x, dtype=float),
        terminal_g=float(np.partition(np.asarray(x, dtype=float), 1)[1]),
        batch_counts=batch_counts,
        empirical=empirical,
        allocations=allocations,
        degenerate=degenerate,
    )
    if with_certificates:
        if kind == "goap":
            record.certificates = goap_certificate(instance, policy[1], goap_rec)
        elif kind == "approach":
            record.certificates = approach_certificate(instance, policy[1], approach_rec)
    return record


def goap_certificate(instance, table, rec):
    """Margin data for the terminal guarantee of a grid-policy rollout.

    The guarantee has the form terminal cost >= origin value - C' sqrt(dt);
    the margin reported here is (terminal - origin value) / sqrt(dt), so a
    fitted C' certifies every path whose margin is >= -C'.
    """
    dt = table.spec.dt
    v0 = table.value_at_origin()
    margin = (rec.terminal_value - v0) / math.sqrt(dt)
    return {
        "terminal_value": float(rec.terminal_value),
        "value_at_origin": float(v0),
        "sqrt_dt": math.sqrt(dt),
        "margin": float(margin),
    }


def approach_certificate(instance, spec, rec):
    """Distance-recursion data along one approachability trajectory.

    Checks (n+1)^2 d_{n+1}^2 <= n^2 d_n^2 + M^2 with M the largest payoff
    norm observed on the path, and reports the terminal distance.
    """
    from .approachability import project_to_bset_full

    B = len(rec.allocations)
    dists = np.empty(B + 1)
    for n in range(B + 1):
        proj = project_to_bset_full(spec, rec.trajectory[n])
        dists[n] = proj.distance
    M = float(np.max(np.linalg.norm(rec.payoffs, axis=1)))
    lhs = (np.arange(1, B + 1) ** 2) * dists[1:] ** 2
    rhs = (np.arange(B) ** 2) * dists[:-1] ** 2 + M ** 2
    slack = rhs - lhs
    return {
        "distances": dists.tolist(),
        "payoff_norm_max": M,
        "recursion_ok": bool(np.all(slack >= -1e-9)),
        "recursion_min_slack": float(np.min(slack)),
        "terminal_distance": float(dists[-1]),
    }


def wilson_interval(successes, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValidationError(f"need n > 0, got {n}")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _static_error_rates(instance, alloc, T_values, n_trials, seed):
    """Vectorized worst-truth error rates of a single-batch static policy.

    Matches run_trial(("static", alloc), B=1) in distribution; whole
    T x truth blocks are sampled at once from one stream per pair.
    """
    w = alloc.weights
    K = instance.n_arms
    m = instance.m
    worst = np.zeros(len(T_values))
    per_truth = np.zeros((len(T_values), m))
    for ti, T in enumerate(T_values):
        counts = largest_remainder_counts(w, T)
        for truth in range(m):
            rng = trial_rng(seed, (ti + 1) * 1_000_003 + truth)
            x = np.zeros((n_trials, m))
            for a in range(K):
                if counts[a] == 0:
                    continue
                draws = rng.multinomial(counts[a], instance.probs[truth, a], size=n_trials)
                q = draws / counts[a]
                lq = np.where(q > 0.0, np.log(np.where(q > 0.0, q, 1.0)), 0.0)
                ent = np.sum(q * lq, axis=1)
                x += w[a] * (ent[:, None] - q @ instance.log_probs[:, a, :].T)
            decisions = np.argmin(x, axis=1)
            per_truth[ti, truth] = np.mean(decisions != truth)
        worst[ti] = per_truth[ti].max()
    return worst, per_truth


def estimate_error_exponent(
    instance,
    policy,
    T_values,
    n_trials,
    seed=0,
    B=1,
    n_bootstrap=200,
):
    """Fit the large-deviation rate of a policy's worst-truth error.

    Runs n_trials per (T, truth) pair, takes the worst error rate across
    truths per T, and regresses -log(rate) on T with an intercept using
    inverse-variance weights. Points with fewer than 10 errors are dropped
    with a warning; if fewer than two horizons survive the estimate is
    refused. Returns a dict with slope, stderr, per-point rates, and
    Wilson intervals.
    """
    T_values = sorted(int(t) for t in T_values)
    if len(T_values) < 2:
        raise ValidationError("need at least two horizons T to fit a slope")
    kind = policy[0]
    if kind == "static" and B == 1:
        worst, per_truth = _static_error_rates(
            instance, policy[1], T_values, n_trials, seed
        )
    else:
        per_truth = np.zeros((len(T_values), instance.m))
        for ti, T in enumerate(T_values):
            for truth in range(instance.m):
                wrong = 0
                for k in range(n_trials):
                    rec = run_trial(
                        instance, policy, truth, T, B,
                        seed=splitmix64(seed, 1_000_003 * (ti + 1) + truth),
                        trial=k,
                    )
                    wrong += 0 if rec.correct else 1
                per_truth[ti, truth] = wrong / n_trials
        worst = per_truth.max(axis=1)
    errors = np.rint(worst * n_trials).astype(np.int64)

    keep = errors >= MIN_ERRORS_PER_POINT
    for ti, ok in enumerate(keep):
        if not ok:
            log.warning(
                "dropping T=%d: only %d errors in %d trials (need %d)",
                T_values[ti], errors[ti], n_trials, MIN_ERRORS_PER_POINT,
            )
    if not np.any(keep):
        raise InsufficientDataError(
            f"no horizon produced at least {MIN_ERRORS_PER_POINT} errors out of "
            f"{n_trials} trials; increase n_trials or shorten the horizons"
        )
    if np.sum(keep) < 2:
        raise InsufficientDataError(
            "fewer than two usable horizons after dropping low-error points"
        )
    Ts = np.asarray(T_values, dtype=float)[keep]
    p = worst[keep]
    n = float(n_trials)
    y = -np.log(p)
    var_y = (1.0 - p) / (n * p)  # delta method for log p-hat
    wts = 1.0 / var_y
    slope, intercept = _weighted_line(Ts, y, wts)

    rng = np.random.default_rng([seed, 0xB0075])
    boots = []
    k_err = np.rint(p * n).astype(np.int64)
    for _ in range(n_bootstrap):
        pb = rng.binomial(int(n), p) / n
        pb = np.clip(pb, 0.5 / n, 1.0)
        sb, _ = _weighted_line(Ts, -np.log(pb), (n * pb) / (1.0 - pb + 1e-300))
        boots.append(sb)
    stderr = float(np.std(boots, ddof=1))

    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "stderr": stderr,
        "T": Ts.tolist(),
        "rates": p.tolist(),
        "errors": k_err.tolist(),
        "dropped_T": [int(t) for t, ok in zip(T_values, keep) if not ok],
        "wilson": [wilson_interval(int(k), int(n)) for k in k_err],
        "per_truth_rates": per_truth.tolist(),
    }


def _weighted_line(x, y, w):
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    slope = np.sum(w * (x - xb) * (y - yb)) / np.sum(w * (x - xb) ** 2)
    intercept = yb - slope * xb
    return float(slope), float(intercept)
