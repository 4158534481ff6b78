"""Bernoulli-Bernoulli restricted Boltzmann machine.

Parameters live in an immutable :class:`RbmParams`. Every function here is a
pure function of its arguments and an explicit ``numpy.random.Generator``.
Visible/hidden inputs may be a single state (1-D) or a batch (2-D, one state
per row); outputs follow the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# D + P above this makes enumeration too slow for an oracle.
ENUMERATION_LIMIT = 24


class DimensionError(ValueError):
    pass


class EnumerationError(ValueError):
    pass


def make_rng(seed: int | None = None) -> np.random.Generator:
    """PCG64 generator; ``split_rng`` derives independent child streams."""
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    return list(rng.spawn(n))


@dataclass(frozen=True, eq=False)
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        c = np.array(self.c, dtype=np.float64).reshape(-1)
        if W.ndim != 2:
            raise DimensionError(f"W must be 2-D, got shape {W.shape}")
        D, P = W.shape
        if D < 1 or P < 1:
            raise DimensionError("need at least one visible and one hidden unit")
        if b.shape != (D,) or c.shape != (P,):
            raise DimensionError(
                f"bias shapes {b.shape}, {c.shape} do not match W {W.shape}")
        for name, arr in (("W", W), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
            arr.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def D(self) -> int:
        return self.W.shape[0]

    @property
    def P(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, D: int, P: int) -> "RbmParams":
        return cls(np.zeros((D, P)), np.zeros(D), np.zeros(P))

    @classmethod
    def random(cls, D: int, P: int, rng: np.random.Generator,
               scale: float = 1.0) -> "RbmParams":
        return cls(rng.normal(0, scale, (D, P)), rng.normal(0, scale, D),
                   rng.normal(0, scale, P))

    def replace(self, W=None, b=None, c=None) -> "RbmParams":
        return RbmParams(self.W if W is None else W,
                         self.b if b is None else b,
                         self.c if c is None else c)

    def equals(self, other: "RbmParams") -> bool:
        return (np.array_equal(self.W, other.W) and np.array_equal(self.b, other.b)
                and np.array_equal(self.c, other.c))


def logistic(x):
    """Overflow-safe logistic sigmoid."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _check(arr, n: int, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != n:
        raise DimensionError(f"{what} has shape {arr.shape}, expected (..., {n})")
    return arr


def energy(params: RbmParams, v, h):
    """E(v, h) = -v.W.h - b.v - c.h for a single pair or matching batches."""
    v = _check(v, params.D, "visible state")
    h = _check(h, params.P, "hidden state")
    coupling = np.sum((v @ params.W) * h, axis=-1)
    return -coupling - v @ params.b - h @ params.c


def hidden_conditional(params: RbmParams, v):
    """p(h_j = 1 | v) for every hidden unit."""
    v = _check(v, params.D, "visible state")
    return logistic(v @ params.W + params.c)


def visible_conditional(params: RbmParams, h):
    """p(v_i = 1 | h) for every visible unit."""
    h = _check(h, params.P, "hidden state")
    return logistic(h @ params.W.T + params.b)


def sample_bernoulli(probs, rng: np.random.Generator) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(~((probs >= 0.0) & (probs <= 1.0))):
        raise ValueError("probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def gibbs_chain(params: RbmParams, v0, k: int, rng: np.random.Generator):
    """Run k sweeps of h ~ p(h|v) then v ~ p(v|h); return the final (v, h)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v = _check(v0, params.D, "visible state")
    for _ in range(k):
        h = sample_bernoulli(hidden_conditional(params, v), rng)
        v = sample_bernoulli(visible_conditional(params, h), rng)
    return v, h


def free_energy(params: RbmParams, v):
    """F(v) = -log sum_h exp(-E(v, h)), in closed form."""
    v = _check(v, params.D, "visible state")
    return -(v @ params.b) - np.sum(softplus(v @ params.W + params.c), axis=-1)


def all_states(n: int) -> np.ndarray:
    """Every binary vector of length n, one per row, in counting order."""
    return _bits(np.arange(1 << n), n)


def _bits(idx: np.ndarray, n: int) -> np.ndarray:
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.float64)


def _guard(params: RbmParams):
    if params.D + params.P > ENUMERATION_LIMIT:
        raise EnumerationError(
            f"D + P = {params.D + params.P} exceeds enumeration limit "
            f"{ENUMERATION_LIMIT}")


def log_partition(params: RbmParams) -> float:
    """log Z by brute-force summation over every joint (v, h) configuration."""
    _guard(params)
    H = all_states(params.P)
    hc = H @ params.c
    acc = -np.inf
    # chunk over visible states to bound memory at large D
    chunk = max(1, (1 << 20) // H.shape[0])
    for start in range(0, 1 << params.D, chunk):
        idx = np.arange(start, min(start + chunk, 1 << params.D))
        V = _bits(idx, params.D)
        neg_e = (V @ params.W) @ H.T + (V @ params.b)[:, None] + hc[None, :]
        acc = np.logaddexp(acc, _logsumexp(neg_e))
    return float(acc)


def _logsumexp(a) -> float:
    m = np.max(a)
    return float(m + np.log(np.sum(np.exp(a - m))))


def exact_partition(params: RbmParams) -> float:
    return float(np.exp(log_partition(params)))


def exact_marginal(params: RbmParams, v):
    """p(v) = exp(-F(v)) / Z, with Z from full enumeration."""
    return np.exp(-free_energy(params, v) - log_partition(params))


def exact_log_marginals(params: RbmParams) -> tuple[np.ndarray, np.ndarray]:
    """All visible states and their log-probabilities under the model."""
    _guard(params)
    V = all_states(params.D)
    return V, -free_energy(params, V) - log_partition(params)
