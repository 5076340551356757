"""Finite-support bandit hypothesis classes and the information functionals on them.

An instance bundles m candidate hypotheses over K sampling actions (arms),
each hypothesis assigning one finite-support distribution per arm. All
probabilities are strictly positive, so every log-moment quantity below is
finite. Natural logarithms throughout.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, DomainError, ValidationError
from .optim import golden_section_max

PROB_SUM_TOL = 1e-9
SIMPLEX_TOL = 1e-9
DISTINCTNESS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """A strictly positive probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValidationError(
                f"distribution needs a 1-d vector with at least 2 entries, got shape {p.shape}"
            )
        if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
            bad = int(np.argmin(p))
            raise ValidationError(
                f"symbol {bad}: probability must be strictly positive and finite, got {p[bad]!r}"
            )
        s = p.sum()
        if abs(s - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities must sum to 1 within {PROB_SUM_TOL}, got {s!r}")
        p = p / s
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def support_size(self):
        return self.probs.size

    @property
    def log_probs(self):
        return np.log(self.probs)

    def __repr__(self):
        return f"FiniteDistribution({np.array2string(self.probs, precision=6)})"


def bernoulli(mean):
    """Two-symbol distribution [p, 1-p]; symbol 0 is the success outcome."""
    return FiniteDistribution(np.array([mean, 1.0 - mean]))


@dataclass(frozen=True)
class Allocation:
    """A probability vector over arms: the fraction of samples each arm gets."""

    weights: np.ndarray

    def __post_init__(self):
        w = _require_simplex(self.weights, what="allocation")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_arms(self):
        return self.weights.size

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.weights.shape == other.weights.shape and bool(
            np.all(self.weights == other.weights)
        )


def _require_simplex(v, what="vector"):
    """Validate a simplex point, renormalizing drift within SIMPLEX_TOL."""
    v = np.asarray(v, dtype=float).copy()
    if v.ndim != 1:
        raise DimensionError(f"{what} must be 1-d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{what} has non-finite entries")
    if np.any(v < -SIMPLEX_TOL):
        raise DomainError(f"{what} has a negative entry: {v.min()!r}")
    s = v.sum()
    if abs(s - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"{what} must sum to 1 within {SIMPLEX_TOL}, got {s!r}")
    np.clip(v, 0.0, None, out=v)
    return v / v.sum()


@dataclass(frozen=True, eq=False)
class BanditClass:
    """m hypotheses x K arms of finite-support distributions.

    probs has shape (m, K, support_size). eps is the smallest probability in
    the class and a_bound = log(1/eps) caps every log-likelihood ratio.
    """

    probs: np.ndarray
    log_probs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3:
            raise ValidationError(f"probs must have shape (m, K, support), got {p.shape}")
        m, K, S = p.shape
        if m < 2:
            raise ValidationError(f"need at least 2 hypotheses, got {m}")
        if K < 1 or S < 2:
            raise ValidationError(f"need K >= 1 arms and support >= 2, got K={K}, S={S}")
        for i in range(m):
            for a in range(K):
                row = p[i, a]
                if np.any(row <= 0.0) or not np.all(np.isfinite(row)):
                    x = int(np.argmin(row))
                    raise ValidationError(
                        f"hypothesis {i}, arm {a}, symbol {x}: probability must be "
                        f"strictly positive and finite, got {row[x]!r}"
                    )
                s = row.sum()
                if abs(s - 1.0) > PROB_SUM_TOL:
                    raise ValidationError(
                        f"hypothesis {i}, arm {a}: probabilities must sum to 1 "
                        f"within {PROB_SUM_TOL}, got {s!r}"
                    )
                p[i, a] = row / s
        for i in range(m):
            for j in range(i + 1, m):
                if np.max(np.abs(p[i] - p[j])) <= DISTINCTNESS_TOL:
                    raise ValidationError(
                        f"hypotheses {i} and {j} are identical across all arms"
                    )
        p.setflags(write=False)
        lp = np.log(p)
        lp.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "log_probs", lp)

    @property
    def m(self):
        return self.probs.shape[0]

    @property
    def n_arms(self):
        return self.probs.shape[1]

    @property
    def support_size(self):
        return self.probs.shape[2]

    @property
    def eps(self):
        return float(self.probs.min())

    @property
    def a_bound(self):
        return float(-math.log(self.probs.min()))

    @property
    def hypotheses(self):
        return [
            [FiniteDistribution(self.probs[i, a]) for a in range(self.n_arms)]
            for i in range(self.m)
        ]

    def distribution(self, hypothesis, arm):
        return FiniteDistribution(self.probs[hypothesis, arm])

    def permuted(self, perm):
        """Same class with hypotheses reordered by perm."""
        perm = list(perm)
        if sorted(perm) != list(range(self.m)):
            raise ValidationError(f"perm must be a permutation of range({self.m})")
        return BanditClass(self.probs[perm])

    def __repr__(self):
        return (
            f"BanditClass(m={self.m}, K={self.n_arms}, support={self.support_size}, "
            f"eps={self.eps:.6g})"
        )


def kl_divergence(p, q):
    """D(p || q) = sum_x p(x) log(p(x)/q(x)), in nats.

    p may contain zeros (empirical distributions); q must be positive
    wherever p is.
    """
    pv = p.probs if isinstance(p, FiniteDistribution) else np.asarray(p, dtype=float)
    qv = q.probs if isinstance(q, FiniteDistribution) else np.asarray(q, dtype=float)
    if pv.shape != qv.shape:
        raise DimensionError(f"shape mismatch: {pv.shape} vs {qv.shape}")
    mask = pv > 0.0
    if np.any(qv[mask] <= 0.0):
        raise DomainError("q must be positive on the support of p")
    return float(np.sum(pv[mask] * (np.log(pv[mask]) - np.log(qv[mask]))))


def log_mgf_matrix(instance, betas):
    """log sum_x prod_i nu_a^i(x)^beta_i for each arm, vectorized.

    betas: (..., m) array of exponent vectors, no simplex validation.
    Returns (..., K).
    """
    betas = np.asarray(betas, dtype=float)
    m, K, S = instance.probs.shape
    w = np.tensordot(betas, instance.log_probs, axes=(-1, 0))  # (..., K, S)
    return logsumexp(w, axis=-1)


def zeta_all_arms(instance, beta):
    """-log MGF per arm for one exponent vector; shape (K,). No validation."""
    return -log_mgf_matrix(instance, beta)


def zeta(instance, arm, beta):
    """Mixed divergence functional of arm `arm` at simplex point beta.

    zeta(a, beta) = -log sum_x prod_i nu_a^i(x)^beta_i
                  = inf_Q sum_i beta_i D(Q || nu_a^i),
    the best achievable weighted divergence against all hypotheses at once.
    Concave in beta; zero at the vertices of the simplex.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (instance.m,):
        raise DimensionError(
            f"beta must have shape ({instance.m},), got {beta.shape}"
        )
    beta = _require_simplex(beta, what="beta")
    if not (0 <= arm < instance.n_arms):
        raise DomainError(f"arm index {arm} out of range [0, {instance.n_arms})")
    return float(-log_mgf_matrix(instance, beta)[arm])


def zeta_gradient(instance, arm, beta):
    """Gradient of zeta(arm, .): component j is -E_S[log nu_a^j] under the
    tilted distribution S(x) proportional to prod_i nu_a^i(x)^beta_i."""
    beta = np.asarray(beta, dtype=float)
    lp = instance.log_probs[:, arm, :]  # (m, S)
    w = beta @ lp
    w = np.exp(w - logsumexp(w))
    return -(lp @ w)


def tilted_distribution(instance, arm, beta):
    """The minimizer Q of sum_i beta_i D(Q || nu_a^i): S(x) ~ prod nu^beta."""
    beta = np.asarray(beta, dtype=float)
    w = beta @ instance.log_probs[:, arm, :]
    w = np.exp(w - logsumexp(w))
    return FiniteDistribution(w)


def chernoff_information(p, q, tol=1e-10):
    """Chernoff information C(p, q) = max_{s in [0,1]} -log sum_x q^s p^(1-s).

    Symmetric in its arguments. The objective is concave in s, so a
    golden-section search locates the maximizer to `tol`.
    """
    pv = p.probs if isinstance(p, FiniteDistribution) else np.asarray(p, dtype=float)
    qv = q.probs if isinstance(q, FiniteDistribution) else np.asarray(q, dtype=float)
    if pv.shape != qv.shape:
        raise DimensionError(f"shape mismatch: {pv.shape} vs {qv.shape}")
    if np.any(pv <= 0.0) or np.any(qv <= 0.0):
        raise DomainError("Chernoff information needs strictly positive distributions")
    lp, lq = np.log(pv), np.log(qv)

    def objective(s):
        return -logsumexp(s * lq + (1.0 - s) * lp)

    _, value = golden_section_max(objective, 0.0, 1.0, tol=tol)
    return float(value)


def load_instance(source):
    """Build a BanditClass from a JSON file path, JSON text, or a dict.

    Expected keys: m, K, support, and either
      hypotheses: nested list indexed [hypothesis][arm][symbol], or
      bernoulli_means: list indexed [hypothesis][arm] with support == 2,
        expanded to [p, 1-p].
    """
    if isinstance(source, dict):
        data = source
    else:
        text = None
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, TypeError):
            if isinstance(source, (str, bytes)):
                text = source
            else:
                raise ValidationError(f"cannot read instance from {source!r}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"instance is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"instance JSON must be an object, got {type(data).__name__}")

    for key in ("m", "K", "support"):
        if key not in data:
            raise ValidationError(f"instance is missing required key {key!r}")
        if not isinstance(data[key], int) or data[key] < 1:
            raise ValidationError(f"key {key!r} must be a positive integer, got {data[key]!r}")
    m, K, S = data["m"], data["K"], data["support"]

    if "hypotheses" in data:
        rows = data["hypotheses"]
        arr = np.asarray(rows, dtype=float)
        if arr.shape != (m, K, S):
            raise ValidationError(
                f"hypotheses must have shape (m={m}, K={K}, support={S}), got {arr.shape}"
            )
    elif "bernoulli_means" in data:
        if S != 2:
            raise ValidationError(
                f"bernoulli_means shorthand requires support == 2, got {S}"
            )
        means = np.asarray(data["bernoulli_means"], dtype=float)
        if means.shape != (m, K):
            raise ValidationError(
                f"bernoulli_means must have shape (m={m}, K={K}), got {means.shape}"
            )
        arr = np.stack([means, 1.0 - means], axis=-1)
    else:
        raise ValidationError("instance needs either 'hypotheses' or 'bernoulli_means'")
    return BanditClass(arr)


def instance_to_dict(instance):
    return {
        "m": instance.m,
        "K": instance.n_arms,
        "support": instance.support_size,
        "hypotheses": instance.probs.tolist(),
    }


def save_instance(instance, path):
    """Write an instance as JSON. Floats use repr, so load(save(x)) == x."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")
