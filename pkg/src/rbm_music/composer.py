"""Note-budgeted generation from a trained RBM.

``compose_window`` grows a two-measure window from silence: at step t the
model proposes expected visible intensities and the t+1 strongest cells are
switched on (earlier cells may switch off again). ``extend_window`` does the
same for the right measure only, with the left measure clamped to the
previous window's right measure. ``compose_piece`` chains the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pianoroll import WINDOW_SHAPE
from .rbm import RbmParams, hidden_conditional, make_rng, sample_bernoulli, visible_conditional

# callback(step, visible state, hidden sample) -- v is the flat state *at* that step
StepHook = Callable[[int, np.ndarray, np.ndarray], None]


@dataclass
class ComposeConfig:
    initial_budget: int = 1000
    extension_budget: int = 500
    extensions: int = 6
    seed: int = 0
    hidden_samples: int = 1

    def __post_init__(self):
        D = WINDOW_SHAPE[0] * WINDOW_SHAPE[1]
        if not 0 <= self.initial_budget <= D:
            raise ValueError(f"initial_budget must be in [0, {D}]")
        if not 0 <= self.extension_budget <= D // 2:
            raise ValueError(f"extension_budget must be in [0, {D // 2}]")
        if self.extensions < 0:
            raise ValueError("extensions must be >= 0")
        if self.hidden_samples < 1:
            raise ValueError("hidden_samples must be >= 1")


def top_k_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the k largest entries; ties go to the lowest index."""
    order = np.argsort(-scores, kind="stable")
    mask = np.zeros(scores.shape, dtype=bool)
    mask[order[:k]] = True
    return mask


def _expected_visible(params, v, rng, m):
    h = sample_bernoulli(hidden_conditional(params, v), rng)
    if m == 1:
        return h, visible_conditional(params, h)
    u = visible_conditional(params, h)
    for _ in range(m - 1):
        u = u + visible_conditional(params, sample_bernoulli(hidden_conditional(params, v), rng))
    return h, u / m


def compose_window(params: RbmParams, N: int, rng: np.random.Generator,
                   shape=WINDOW_SHAPE, hidden_samples: int = 1,
                   on_step: StepHook | None = None) -> np.ndarray:
    """Grow a window of exactly N set cells from the all-zero state.

    ``on_step(t, v_t, h_t)`` sees every visited state for t = 0..N, where
    h_t is the hidden sample drawn from v_t. The draw for t = N happens only
    when a hook is installed; it does not affect the result.
    """
    D = params.D
    if D != shape[0] * shape[1]:
        raise ValueError(f"model has D={D}, window shape {shape} has {shape[0] * shape[1]} cells")
    if not 0 <= N <= D:
        raise ValueError(f"budget N={N} must be in [0, D={D}]")
    v = np.zeros(D)
    for t in range(N):
        h, u = _expected_visible(params, v, rng, hidden_samples)
        if on_step is not None:
            on_step(t, v, h)
        v = top_k_mask(u, t + 1).astype(np.float64)
    if on_step is not None:
        on_step(N, v, sample_bernoulli(hidden_conditional(params, v), rng))
    return v.reshape(shape).astype(np.uint8)


def _right_half(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[:, shape[1] // 2:] = True
    return mask.ravel()


def extend_window(params: RbmParams, prev, N: int, rng: np.random.Generator,
                  hidden_samples: int = 1, on_step: StepHook | None = None) -> np.ndarray:
    """Window whose left measure is prev's right measure and whose right
    measure holds exactly N freshly generated cells."""
    prev = np.asarray(prev)
    shape = prev.shape
    if prev.ndim != 2 or shape[1] % 2 or params.D != shape[0] * shape[1]:
        raise ValueError(f"previous window shape {shape} does not fit model D={params.D}")
    half = shape[1] // 2
    if not 0 <= N <= shape[0] * half:
        raise ValueError(f"budget N={N} exceeds the {shape[0] * half} cells of one half")
    u0 = np.zeros(shape)
    u0[:, :half] = prev[:, half:]
    u = u0.ravel()
    right = _right_half(shape)
    right_idx = np.flatnonzero(right)  # row-major order, so ties break by flat index
    for t in range(N):
        h, w = _expected_visible(params, u, rng, hidden_samples)
        if on_step is not None:
            on_step(t, u, h)
        u = u.copy()
        u[right_idx] = top_k_mask(w[right_idx], t + 1)
    if on_step is not None:
        on_step(N, u, sample_bernoulli(hidden_conditional(params, u), rng))
    return u.reshape(shape).astype(np.uint8)


def compose_piece(params: RbmParams, cfg: ComposeConfig,
                  shape=WINDOW_SHAPE) -> np.ndarray:
    """Strip of 2 + ``cfg.extensions`` measures."""
    rng = make_rng(cfg.seed)
    window = compose_window(params, cfg.initial_budget, rng, shape, cfg.hidden_samples)
    half = shape[1] // 2
    parts = [window]
    for _ in range(cfg.extensions):
        window = extend_window(params, window, cfg.extension_budget, rng, cfg.hidden_samples)
        parts.append(window[:, half:])
    return np.concatenate(parts, axis=1)

