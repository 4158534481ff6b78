"""Post-training analyses: energy statistics, generation traces, hidden-layer
embeddings, exact t-SNE and scale-tone overlap."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .composer import compose_window
from .pianoroll import WINDOW_SHAPE
from .rbm import RbmParams, energy, hidden_conditional, make_rng, sample_bernoulli

log = logging.getLogger(__name__)

MAJOR_SCALE = frozenset({0, 2, 4, 5, 7, 9, 11})


@dataclass
class EnergyReport:
    label: str
    mean_energy: float
    stddev: float
    samples: int


def _flat(params: RbmParams, window) -> np.ndarray:
    v = np.asarray(window, dtype=np.float64).ravel()
    if v.size != params.D:
        raise ValueError(f"window has {v.size} cells, model expects {params.D}")
    return v


def energy_protocol(params: RbmParams, window, samples: int = 10,
                    rng: np.random.Generator | None = None, label: str = "") -> EnergyReport:
    """Mean and sample stddev of E(v, h) over independent draws h ~ p(h|v)."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = make_rng(0) if rng is None else rng
    v = _flat(params, window)
    probs = hidden_conditional(params, v)
    H = sample_bernoulli(np.broadcast_to(probs, (samples, params.P)), rng)
    e = energy(params, v, H)
    return EnergyReport(label, float(e.mean()), float(e.std(ddof=1)), samples)


def energy_trace(params: RbmParams, N: int, rng: np.random.Generator,
                 shape=WINDOW_SHAPE) -> list[float]:
    """E(v_t, h_t) for t = 1..N along one run of ``compose_window``."""
    trace: list[float] = []

    def hook(t, v, h):
        if t >= 1:
            trace.append(float(energy(params, v, h)))

    compose_window(params, N, rng, shape, on_step=hook)
    return trace


def hidden_embedding(params: RbmParams, window, mode: str = "probabilities",
                     rng: np.random.Generator | None = None) -> np.ndarray:
    v = _flat(params, window)
    probs = hidden_conditional(params, v)
    if mode == "probabilities":
        return probs
    if mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        return sample_bernoulli(probs, rng)
    raise ValueError(f"unknown embedding mode {mode!r}")


def cosine_similarity(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


@dataclass
class EmbeddingSet:
    labels: list[str] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)
    projections: np.ndarray | None = None

    def add(self, label: str, activation):
        activation = np.asarray(activation, dtype=np.float64)
        if self.activations and activation.shape != self.activations[0].shape:
            raise ValueError("all activations must have the same length")
        self.labels.append(label)
        self.activations.append(activation)

    def matrix(self) -> np.ndarray:
        return np.stack(self.activations)

    def to_tsv(self, projected: bool = True) -> str:
        lines = []
        if projected:
            if self.projections is None:
                raise ValueError("no projections computed")
            lines.append("label\tx\ty")
            for label, (x, y) in zip(self.labels, self.projections):
                lines.append(f"{label}\t{float(x)!r}\t{float(y)!r}")
        else:
            for label, act in zip(self.labels, self.activations):
                lines.append("\t".join([label, *(repr(float(a)) for a in act)]))
        return "\n".join(lines) + "\n"


def scale_overlap(shift: int) -> int:
    """Pitch classes shared by the major scale and its transposition by ``shift``."""
    return len(MAJOR_SCALE & {(p + shift) % 12 for p in MAJOR_SCALE})


# --- t-SNE --------------------------------------------------------------

def _squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_affinity(d: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Gaussian conditional affinities for one row and their Shannon entropy (nats)."""
    logits = -beta * (d - d.min())
    p = np.exp(logits)
    s = p.sum()
    p /= s
    H = np.log(s) - float(logits @ p)
    return p, H


def conditional_affinities(X, perplexity: float, tol: float = 1e-5,
                           max_iter: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """p_{j|i} with each row's bandwidth bisected to the target perplexity.

    Returns the (n, n) matrix (rows sum to 1, zero diagonal) and the achieved
    perplexity per point.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 3:
        raise ValueError("t-SNE needs at least 3 points")
    if not 0 < perplexity < n:
        raise ValueError(f"perplexity must be in (0, {n}), got {perplexity}")
    D = _squared_distances(X)
    if np.all(D == 0):
        raise ValueError("all input points are identical")
    target = np.log(perplexity)
    P = np.zeros((n, n))
    achieved = np.empty(n)
    for i in range(n):
        d = np.delete(D[i], i)
        # bisect on log(beta); entropy decreases monotonically in beta
        lo, hi = -50.0, 50.0
        scale = np.median(d[d > 0]) if np.any(d > 0) else 1.0
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            p, H = _row_affinity(d, np.exp(mid) / scale)
            if abs(np.exp(H) - perplexity) < tol:
                break
            if H > target:
                lo = mid
            else:
                hi = mid
        P[i, np.arange(n) != i] = p
        achieved[i] = np.exp(H)
    return P, achieved


def joint_affinities(X, perplexity: float) -> np.ndarray:
    """Symmetrized affinities p_ij = (p_{j|i} + p_{i|j}) / 2n."""
    P, _ = conditional_affinities(X, perplexity)
    return (P + P.T) / (2.0 * P.shape[0])


def tsne(points, perplexity: float = 30.0, iterations: int = 1000, seed: int = 0,
         learning_rate: float = 200.0, exaggeration: float = 12.0,
         exaggeration_iters: int = 250, dims: int = 2) -> np.ndarray:
    """Exact t-SNE: O(n^2) affinities and gradients, no tree approximation."""
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    P = np.maximum(joint_affinities(X, perplexity), 1e-12)
    rng = make_rng(seed)
    Y = rng.normal(0.0, 1e-4, (n, dims))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    for it in range(iterations):
        early = it < exaggeration_iters
        momentum = 0.5 if early else 0.8
        Pe = P * exaggeration if early else P
        num = 1.0 / (1.0 + _squared_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        W = (Pe - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
        if log.isEnabledFor(logging.DEBUG) and (it + 1) % 100 == 0:
            log.debug("t-SNE iteration %d: KL %.5f", it + 1,
                      float(np.sum(P * np.log(P / Q))))
    return Y
