"""Dirichlet-process numerical primitives.

Implements the truncated stick-breaking representation used throughout the
engine, the Polya-urn predictive rule, exchangeable-partition log
probabilities, and the conjugate blocked-Gibbs updates for sticks and
collection Dirichlets.

Conventions
-----------
* Stick weights are held as a length-``kmax`` simplex vector whose last
  entry absorbs the residual mass, so the truncated vector sums to exactly
  one while the leading sticks keep their Beta marginals.
* All posterior arithmetic that multiplies probabilities happens in log
  space; callers normalize with log-sum-exp.
* Every sampling routine takes an explicit ``numpy.random.Generator`` so
  results are reproducible and concurrent callers can own separate streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "InvalidParam",
    "StickWeights",
    "stick_breaking_sample",
    "stick_posterior_update",
    "polya_predictive",
    "partition_log_prob",
    "expected_num_clusters",
    "dirichlet_collection_sample",
    "dirichlet_collection_posterior",
]


class InvalidParam(ValueError):
    """Raised when a concentration, truncation or base measure is invalid."""


@dataclass(frozen=True)
class StickWeights:
    """Truncated stick-breaking weights for one unknown-object type.

    ``weights`` is a probability vector of length ``kmax``; the final entry
    is the residual stick mass, so the vector sums to one up to 1e-12.
    """

    weights: np.ndarray
    concentration: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size < 1:
            raise InvalidParam("stick weights must be a non-empty vector")
        if np.any(w < -1e-15) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise InvalidParam("stick weights must form a probability vector")

    @property
    def kmax(self) -> int:
        return int(self.weights.size)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0:
        raise InvalidParam(f"concentration must be positive, got {alpha}")
    return alpha


def _beta_draws(rng: np.random.Generator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Beta(a, b) via two Gamma draws, stable for small shapes.

    Shapes below one are sampled through the shape-boost identity
    Gamma(a) = Gamma(a + 1) * U^(1/a), applied in log space so tiny shapes
    cannot underflow to an exact zero pair.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    log_x = _log_gamma_draws(rng, a)
    log_y = _log_gamma_draws(rng, b)
    m = np.maximum(log_x, log_y)
    return np.exp(log_x - m) / (np.exp(log_x - m) + np.exp(log_y - m))


def _log_gamma_draws(rng: np.random.Generator, shape: np.ndarray) -> np.ndarray:
    shape = np.asarray(shape, dtype=float)
    out = np.empty(shape.shape, dtype=float)
    small = shape < 1.0
    if np.any(~small):
        with np.errstate(divide="ignore"):
            out[~small] = np.log(rng.gamma(shape[~small]))
    if np.any(small):
        s = shape[small]
        boosted = rng.gamma(s + 1.0)
        u = rng.random(s.shape)
        out[small] = np.log(boosted) + np.log(u) / s
    return out


def _weights_from_sticks(sticks: np.ndarray) -> np.ndarray:
    """Assemble simplex weights from kmax-1 stick fractions; last entry is residual."""
    kmax = sticks.size + 1
    remaining = np.cumprod(1.0 - sticks)
    weights = np.empty(kmax, dtype=float)
    weights[0] = sticks[0]
    weights[1 : kmax - 1] = sticks[1:] * remaining[:-1]
    weights[-1] = max(float(remaining[-1]), 0.0)
    return weights


def stick_breaking_sample(alpha: float, kmax: int, rng: np.random.Generator) -> StickWeights:
    """Draw truncated stick-breaking weights with Beta(1, alpha) sticks."""
    alpha = _check_alpha(alpha)
    kmax = int(kmax)
    if kmax < 1:
        raise InvalidParam(f"truncation level must be >= 1, got {kmax}")
    if kmax == 1:
        return StickWeights(np.ones(1), alpha)
    sticks = _beta_draws(rng, np.ones(kmax - 1), np.full(kmax - 1, alpha))
    return StickWeights(_weights_from_sticks(sticks), alpha)


def stick_posterior_update(
    prior_alpha: float, counts: np.ndarray, rng: np.random.Generator
) -> StickWeights:
    """Blocked-Gibbs stick update given per-atom occupancy counts.

    Each stick fraction is redrawn from Beta(1 + n_k, alpha + sum_{j>k} n_j);
    with all-zero counts this reduces to the prior stick-breaking draw.
    """
    alpha = _check_alpha(prior_alpha)
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or counts.size < 1:
        raise InvalidParam("counts must be a non-empty vector")
    if np.any(counts < 0):
        raise InvalidParam("counts must be nonnegative")
    kmax = counts.size
    if kmax == 1:
        return StickWeights(np.ones(1), alpha)
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    a = 1.0 + counts[: kmax - 1]
    b = alpha + tail[: kmax - 1]
    sticks = _beta_draws(rng, a, b)
    return StickWeights(_weights_from_sticks(sticks), alpha)


def polya_predictive(counts, alpha: float, base_prob=None) -> np.ndarray:
    """Predictive distribution of the next urn draw given occupancy counts.

    With a discrete base measure ``base_prob`` over the same atoms, returns
    ``(alpha * H_k + n_k) / (alpha + N)`` per atom.  With ``base_prob=None``
    (continuous base) returns one entry per existing atom, ``n_k / (alpha + N)``,
    plus a final new-atom entry ``alpha / (alpha + N)``.
    """
    alpha = _check_alpha(alpha)
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1:
        raise InvalidParam("counts must be a vector")
    if np.any(counts < 0):
        raise InvalidParam("counts must be nonnegative")
    total = float(counts.sum())
    if base_prob is None:
        out = np.empty(counts.size + 1, dtype=float)
        out[:-1] = counts / (alpha + total)
        out[-1] = alpha / (alpha + total)
        return out
    base = np.asarray(base_prob, dtype=float)
    if base.shape != counts.shape:
        raise InvalidParam("base measure and counts must share atoms")
    if np.any(base < 0) or abs(float(base.sum()) - 1.0) > 1e-9:
        raise InvalidParam("base measure must be a probability vector")
    return (alpha * base + counts) / (alpha + total)


def partition_log_prob(partition, alpha: float) -> float:
    """Log probability of a set partition under the urn marginal.

    ``partition`` is any iterable of blocks (iterables of items); only block
    sizes matter.  Equals ``log[alpha^K * prod_b (n_b - 1)! / prod_{i<N} (alpha + i)]``,
    invariant under item permutation and block relabeling.
    """
    alpha = _check_alpha(alpha)
    sizes = [len(tuple(block)) for block in partition]
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidParam("partition must consist of non-empty blocks")
    n = sum(sizes)
    k = len(sizes)
    log_num = k * np.log(alpha) + sum(gammaln(s) for s in sizes)
    log_den = gammaln(alpha + n) - gammaln(alpha)
    return float(log_num - log_den)


def expected_num_clusters(alpha: float, n: int) -> float:
    """Expected number of distinct clusters after n urn draws: sum alpha/(alpha+i)."""
    alpha = _check_alpha(alpha)
    n = int(n)
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    return float(np.sum(alpha / (alpha + np.arange(n))))


def _dirichlet_from_log_gammas(log_gammas: np.ndarray) -> np.ndarray:
    log_gammas = log_gammas - logsumexp(log_gammas, axis=-1, keepdims=True)
    return np.exp(log_gammas)


def dirichlet_collection_sample(
    alpha_f: float, pi: StickWeights, rng: np.random.Generator
) -> np.ndarray:
    """Draw a collection distribution over atoms: Dirichlet(alpha_f * pi)."""
    alpha_f = _check_alpha(alpha_f)
    shape = alpha_f * pi.weights
    # Zero stick entries stay exactly zero in the draw.
    positive = shape > 0
    log_g = np.full(shape.shape, -np.inf)
    log_g[positive] = _log_gamma_draws(rng, shape[positive])
    return _dirichlet_from_log_gammas(log_g)


def dirichlet_collection_posterior(
    alpha_f: float, pi: StickWeights, counts, rng: np.random.Generator
) -> np.ndarray:
    """Posterior collection draw: Dirichlet(alpha_f * pi + counts)."""
    alpha_f = _check_alpha(alpha_f)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != pi.weights.shape:
        raise InvalidParam("counts must be indexed by the same atoms as pi")
    if np.any(counts < 0):
        raise InvalidParam("counts must be nonnegative")
    shape = alpha_f * pi.weights + counts
    positive = shape > 0
    log_g = np.full(shape.shape, -np.inf)
    log_g[positive] = _log_gamma_draws(rng, shape[positive])
    return _dirichlet_from_log_gammas(log_g)
