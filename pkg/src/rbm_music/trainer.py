"""Contrastive-divergence training and exact-enumeration gradient oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import time

import numpy as np

from .rbm import (
    DimensionError,
    RbmParams,
    _guard,
    exact_log_marginals,
    gibbs_chain,
    hidden_conditional,
    make_rng,
    sample_bernoulli,
    visible_conditional,
    free_energy,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GradientTriple:
    """Log-likelihood ascent direction (the negative KL gradient)."""

    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, self.dc])

    def cosine(self, other: "GradientTriple") -> float:
        a, b = self.flat(), other.flat()
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    def apply(self, params: RbmParams, lr: float) -> RbmParams:
        return RbmParams(params.W + lr * self.dW, params.b + lr * self.db,
                         params.c + lr * self.dc)


@dataclass
class TrainConfig:
    hidden_units: int = 1000
    cd_steps: int = 1
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    weight_init_stddev: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.cd_steps < 1:
            raise ValueError("cd_steps must be >= 1")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.weight_init_stddev < 0:
            raise ValueError("weight_init_stddev must be >= 0")


@dataclass
class TrainReport:
    reconstruction_error: list[float] = field(default_factory=list)
    free_energy: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def rows(self):
        for i, row in enumerate(zip(self.reconstruction_error, self.free_energy,
                                    self.seconds)):
            yield (i + 1, *row)


def _as_batch(batch, D: int | None = None) -> np.ndarray:
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("batch must be a nonempty list of visible states")
    if D is not None and arr.shape[1] != D:
        raise DimensionError(f"batch items have length {arr.shape[1]}, model has D={D}")
    return arr


def cd_gradient(params: RbmParams, batch, k: int, rng: np.random.Generator) -> GradientTriple:
    """CD-k estimate, averaged over the batch.

    Both phases use hidden probabilities; the negative phase starts a k-step
    chain at each data item and uses its sampled visible state.
    """
    V = _as_batch(batch, params.D)
    ph = hidden_conditional(params, V)
    v_neg, _ = gibbs_chain(params, V, k, rng)
    ph_neg = hidden_conditional(params, v_neg)
    n = V.shape[0]
    return GradientTriple((V.T @ ph - v_neg.T @ ph_neg) / n,
                          (V - v_neg).mean(axis=0),
                          (ph - ph_neg).mean(axis=0))


def _empirical(params: RbmParams, data, weights=None):
    V = _as_batch(data, params.D)
    if weights is None:
        w = np.full(V.shape[0], 1.0 / V.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (V.shape[0],) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative, one per data item")
        w = w / w.sum()
    return V, w


def exact_gradient(params: RbmParams, data, weights=None) -> GradientTriple:
    """Exact ascent direction of -KL[q || p] with q the (weighted) empirical data."""
    _guard(params)
    V, w = _empirical(params, data, weights)
    ph = hidden_conditional(params, V)
    Vall, logp = exact_log_marginals(params)
    p = np.exp(logp)
    ph_all = hidden_conditional(params, Vall)
    return GradientTriple(V.T @ (w[:, None] * ph) - Vall.T @ (p[:, None] * ph_all),
                          w @ V - p @ Vall,
                          w @ ph - p @ ph_all)


def exact_kl(params: RbmParams, data, weights=None) -> float:
    """KL[q || p] with q the empirical distribution of ``data``."""
    _guard(params)
    V, w = _empirical(params, data, weights)
    # merge duplicate states into one probability mass
    codes = V.astype(np.int64) @ (1 << np.arange(params.D - 1, -1, -1))
    q = np.bincount(codes, weights=w, minlength=1 << params.D)
    _, logp = exact_log_marginals(params)
    support = q > 0
    kl = float(np.sum(q[support] * (np.log(q[support]) - logp[support])))
    return max(kl, 0.0)


def reconstruct(params: RbmParams, v, k: int, rng: np.random.Generator) -> np.ndarray:
    """k Gibbs sweeps from v; the last visible layer is the mean thresholded at 0.5.

    A probability of exactly 0.5 maps to 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.D:
        raise DimensionError(f"visible state length {v.shape[-1]} != D={params.D}")
    if k > 1:
        v, _ = gibbs_chain(params, v, k - 1, rng)
    h = sample_bernoulli(hidden_conditional(params, v), rng)
    return (visible_conditional(params, h) >= 0.5).astype(np.uint8)


def init_params(D: int, config: TrainConfig, rng: np.random.Generator) -> RbmParams:
    P = config.hidden_units
    return RbmParams(rng.normal(0.0, config.weight_init_stddev, (D, P)),
                     np.zeros(D), np.zeros(P))


def train(dataset, config: TrainConfig, init: RbmParams | None = None,
          holdout=None, progress=None) -> tuple[RbmParams, TrainReport]:
    """Minibatch CD-k with a constant learning rate.

    ``init`` resumes from existing parameters instead of a fresh draw. The
    per-epoch free energy is measured on ``holdout`` when given, otherwise
    on a fixed sample of the training data.
    """
    X = _as_batch(dataset)
    n, D = X.shape
    rng = make_rng(config.seed)
    init_rng, shuffle_rng, chain_rng = rng.spawn(3)
    if init is None:
        params = init_params(D, config, init_rng)
    else:
        if init.D != D:
            raise DimensionError(f"checkpoint has D={init.D}, data has D={D}")
        params = init
    if holdout is None:
        monitor = X[:min(n, 64)]
    else:
        monitor = _as_batch(holdout, D)

    W, b, c = params.W.copy(), params.b.copy(), params.c.copy()
    lr, k = config.learning_rate, config.cd_steps
    report = TrainReport()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        mismatch = 0.0
        for start in range(0, n, config.batch_size):
            V = X[order[start:start + config.batch_size]]
            current = RbmParams(W, b, c)
            grad = cd_gradient(current, V, k, chain_rng)
            # reconstruction error is read off the current model, before the update
            h = sample_bernoulli(hidden_conditional(current, V), chain_rng)
            recon = visible_conditional(current, h) >= 0.5
            mismatch += float(np.sum(recon != (V > 0.5)))
            W += lr * grad.dW
            b += lr * grad.db
            c += lr * grad.dc
        params = RbmParams(W, b, c)
        report.reconstruction_error.append(mismatch / X.size)
        report.free_energy.append(float(np.mean(free_energy(params, monitor))))
        report.seconds.append(time.perf_counter() - t0)
        log.info("epoch %d: recon %.5f free energy %.3f (%.2fs)", epoch + 1,
                 report.reconstruction_error[-1], report.free_energy[-1],
                 report.seconds[-1])
        if progress is not None:
            progress(epoch + 1, params, report)
    return params, report
