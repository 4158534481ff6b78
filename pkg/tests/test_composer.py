import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbm_music.composer import (
    ComposeConfig,
    compose_piece,
    compose_window,
    extend_window,
    top_k_mask,
)
from rbm_music.rbm import RbmParams, make_rng

SHAPE = (4, 6)


def small_model(seed=0):
    return RbmParams.random(24, 5, make_rng(seed))


def test_top_k_mask_ties_go_to_lowest_index():
    scores = np.array([0.5, 0.5, 0.9, 0.5])
    assert np.flatnonzero(top_k_mask(scores, 2)).tolist() == [0, 2]
    assert not top_k_mask(scores, 0).any()
    assert top_k_mask(scores, 4).all()


def test_budget_zero_is_silence():
    p = small_model()
    assert compose_window(p, 0, make_rng(0), SHAPE).sum() == 0


def test_zero_model_fills_lowest_indices():
    z = RbmParams.zeros(24, 3)
    out = compose_window(z, 5, make_rng(0), SHAPE)
    assert np.flatnonzero(out).tolist() == [0, 1, 2, 3, 4]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 24))
def test_every_step_has_t_cells(seed, N):
    p = small_model(seed % 1000)
    seen = []
    out = compose_window(p, N, make_rng(seed), SHAPE,
                         on_step=lambda t, v, h: seen.append((t, int(v.sum()))))
    assert seen == [(t, t) for t in range(N + 1)]
    assert out.sum() == N and out.shape == SHAPE
    assert set(np.unique(out)) <= {0, 1}


def test_compose_window_is_deterministic():
    p = small_model()
    a = compose_window(p, 10, make_rng(5), SHAPE, hidden_samples=3)
    b = compose_window(p, 10, make_rng(5), SHAPE, hidden_samples=3)
    np.testing.assert_array_equal(a, b)


def test_hook_does_not_change_result():
    p = small_model(2)
    a = compose_window(p, 8, make_rng(1), SHAPE)
    b = compose_window(p, 8, make_rng(1), SHAPE, on_step=lambda *a: None)
    np.testing.assert_array_equal(a, b)


def test_compose_window_errors():
    p = small_model()
    with pytest.raises(ValueError):
        compose_window(p, 25, make_rng(0), SHAPE)
    with pytest.raises(ValueError):
        compose_window(p, 3, make_rng(0), (5, 5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 12))
def test_extend_window_clamps_left_half(seed, N):
    rng = make_rng(seed)
    p = small_model(seed % 1000)
    prev = rng.integers(0, 2, SHAPE).astype(np.uint8)
    counts = []
    out = extend_window(p, prev, N, rng, on_step=lambda t, u, h: counts.append(
        int(u.reshape(SHAPE)[:, 3:].sum())))
    np.testing.assert_array_equal(out[:, :3], prev[:, 3:])
    assert out[:, 3:].sum() == N
    assert counts == list(range(N + 1))


def test_extend_window_zero_budget():
    prev = np.ones(SHAPE, dtype=np.uint8)
    out = extend_window(small_model(), prev, 0, make_rng(0))
    assert out[:, :3].all() and not out[:, 3:].any()


def test_extend_window_errors():
    p = small_model()
    with pytest.raises(ValueError):
        extend_window(p, np.zeros(SHAPE), 13, make_rng(0))
    with pytest.raises(ValueError):
        extend_window(p, np.zeros((4, 5)), 1, make_rng(0))


def test_compose_piece_layout():
    p = small_model(4)
    cfg = ComposeConfig(initial_budget=6, extension_budget=4, extensions=3, seed=2)
    piece = compose_piece(p, cfg, SHAPE)
    assert piece.shape == (4, 6 + 3 * 3)
    assert piece[:, :6].sum() == 6
    for k in range(3):
        assert piece[:, 6 + 3 * k: 9 + 3 * k].sum() == 4
    np.testing.assert_array_equal(piece, compose_piece(p, cfg, SHAPE))
    alone = compose_piece(p, ComposeConfig(initial_budget=6, extensions=0, seed=2), SHAPE)
    np.testing.assert_array_equal(alone, piece[:, :6])


def test_compose_piece_default_geometry():
    p = RbmParams.random(13_824, 8, make_rng(0), scale=0.01)
    cfg = ComposeConfig(initial_budget=40, extension_budget=20)
    piece = compose_piece(p, cfg)
    assert piece.shape == (72, 768)
    assert piece.sum() == 40 + 6 * 20


@pytest.mark.parametrize("kwargs", [
    {"initial_budget": -1}, {"initial_budget": 13_825}, {"extension_budget": 6_913},
    {"extensions": -1}, {"hidden_samples": 0},
])
def test_compose_config_validation(kwargs):
    with pytest.raises(ValueError):
        ComposeConfig(**kwargs)
