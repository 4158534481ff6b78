import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbm_music.pianoroll import (
    DEFAULT_SHIFTS,
    ROWS,
    VISIBLE_UNITS,
    WINDOW_COLS,
    MeterError,
    PbmError,
    RollDataset,
    augment,
    rasterize,
    read_pbm,
    resize_binary,
    roll_to_score,
    segment,
    transpose_roll,
    write_pbm,
)
from rbm_music.scoreio import GrayImage, NoteEvent, Score


def window_with(cells):
    w = np.zeros((ROWS, WINDOW_COLS), dtype=np.uint8)
    for r, c in cells:
        w[r, c] = 1
    return w


def random_windows(seed, n, density=0.05):
    rng = np.random.default_rng(seed)
    return (rng.random((n, ROWS, WINDOW_COLS)) < density).astype(np.uint8)


def test_geometry_constants():
    assert VISIBLE_UNITS == 13_824 == 72 * 192


def test_rasterize_quarter_note():
    strip, dropped = rasterize(Score([NoteEvent(0, 60, 480)], 480))
    assert dropped == 0
    assert strip.shape == (72, 96)
    assert np.flatnonzero(strip.any(axis=1)).tolist() == [35]
    assert np.flatnonzero(strip[35]).tolist() == list(range(24))


def test_rasterize_pitch_range():
    strip, dropped = rasterize(Score([NoteEvent(0, 24, 24), NoteEvent(0, 95, 24),
                                      NoteEvent(0, 96, 24), NoteEvent(0, 23, 24)], 24))
    assert strip[71, 0] == 1 and strip[0, 0] == 1
    assert dropped == 2
    assert strip.sum() == 48


def test_rasterize_rounding_and_min_width():
    # tpq 480: 1 column = 20 ticks; onset 10 rounds half up to column 1
    strip, _ = rasterize(Score([NoteEvent(10, 60, 20), NoteEvent(100, 62, 3)], 480))
    assert np.flatnonzero(strip[35]).tolist() == [1]
    assert np.flatnonzero(strip[33]).tolist() == [5]  # sub-column note keeps 1 column


def test_rasterize_width_rounds_up_to_measures():
    strip, _ = rasterize(Score([NoteEvent(0, 60, 481 * 4)], 480))
    assert strip.shape[1] == 192
    strip, _ = rasterize(Score([NoteEvent(0, 60, 10)], 480, end_tick=480 * 9))
    assert strip.shape[1] == 288


def test_rasterize_rejects_other_meters():
    with pytest.raises(MeterError):
        rasterize(Score([NoteEvent(0, 60, 10)], 480, [(0, 3, 4)]))


def test_rasterize_overlaps_or_together():
    strip, _ = rasterize(Score([NoteEvent(0, 60, 48), NoteEvent(24, 60, 48)], 24))
    assert np.flatnonzero(strip[35]).tolist() == list(range(72))


def test_segment():
    assert len(segment(np.zeros((72, 384)))) == 2
    assert len(segment(np.zeros((72, 192)))) == 1
    strip = np.zeros((72, 288), dtype=np.uint8)
    strip[0, 200] = 1
    wins = segment(strip)
    assert len(wins) == 1 and wins[0].sum() == 0
    with pytest.raises(ValueError):
        segment(np.zeros((72, 100)))


def test_transpose_roll_examples():
    w = window_with([(35, 0)])
    assert np.array_equal(transpose_roll(w, 0), w)
    moved = transpose_roll(w, 6)
    assert np.argwhere(moved).tolist() == [[29, 0]]
    assert transpose_roll(window_with([(0, 5)]), 1) is None
    assert transpose_roll(window_with([(71, 5)]), -1) is None
    with pytest.raises(ValueError):
        transpose_roll(w, 72)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-71, 71))
def test_transpose_inverse(seed, s):
    w = random_windows(seed, 1, 0.01)[0]
    moved = transpose_roll(w, s)
    if moved is not None:
        assert moved.sum() == w.sum()
        assert np.array_equal(transpose_roll(moved, -s), w)


def test_augment_counts():
    assert len(augment(RollDataset())) == 0
    ds = RollDataset()
    ds.append(window_with([(35, 0), (40, 10)]), "a", 0)
    out = augment(ds)
    assert len(out) == 12 and out.rejected == 0
    assert [p[2] for p in out.provenance] == [-5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6]
    top = RollDataset()
    top.append(window_with([(0, 0)]), "b", 0)
    out = augment(top)
    assert len(out) <= 6 and out.rejected == 6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(-8, 8), max_size=6))
def test_augment_cardinality(seed, shifts):
    ds = RollDataset()
    for i, w in enumerate(random_windows(seed, 3, 0.002)):
        ds.append(w, f"s{i}", 2 * i)
    out = augment(ds, shifts)
    keys = set(shifts) | {0}
    assert len(out) + out.rejected == len(ds) * len(keys)
    assert len(out) <= len(ds) * (1 + len(shifts))


def test_resize_binary():
    assert resize_binary(GrayImage(np.zeros((28, 28)))).sum() == 0
    assert resize_binary(GrayImage(np.full((28, 28), 255))).all()
    img = np.zeros((28, 28))
    img[0, 0] = 255
    out = resize_binary(GrayImage(img))
    assert out.shape == (72, 192)
    expected = np.zeros((72, 192), dtype=np.uint8)
    expected[:-(-72 // 28), :-(-192 // 28)] = 1
    assert np.array_equal(out, expected)
    # threshold is inclusive
    assert resize_binary(GrayImage(np.full((2, 2), 128))).all()
    assert not resize_binary(GrayImage(np.full((2, 2), 127))).any()
    with pytest.raises(ValueError):
        resize_binary(GrayImage(np.zeros((0, 5))))


def test_roll_to_score_examples():
    assert roll_to_score(np.zeros((72, 192))).notes == []
    w = np.zeros((72, 192), dtype=np.uint8)
    w[35, :24] = 1
    s = roll_to_score(w)
    assert s.notes == [NoteEvent(onset=0, pitch=60, duration=24)]
    assert s.ticks_per_quarter == 24 and s.end_tick == 192


def test_roll_to_score_merges_legato():
    w = np.zeros((72, 192), dtype=np.uint8)
    w[10, 0:10] = w[10, 12:20] = 1
    assert [n.duration for n in roll_to_score(w).notes] == [10, 8]


def test_rasterize_inverts_roll_to_score_on_random_windows():
    for w in random_windows(3, 50, 0.1):
        strip, dropped = rasterize(roll_to_score(w))
        assert dropped == 0
        assert np.array_equal(strip, w)


def test_pbm_round_trip_and_layout():
    zero = np.zeros((72, 192), dtype=np.uint8)
    data = write_pbm(zero)
    assert data == b"P4\n192 72\n" + bytes(24 * 72)
    for w in random_windows(1, 20, 0.3):
        assert np.array_equal(read_pbm(write_pbm(w), width=192), w)
    strip = random_windows(2, 1)[0].repeat(2, axis=1)[:, :288]
    assert np.array_equal(read_pbm(write_pbm(strip)), strip)
    one = window_with([(0, 0), (71, 191)])
    raw = write_pbm(one)
    assert raw[len(b"P4\n192 72\n")] == 0x80 and raw[-1] == 0x01


def test_pbm_errors():
    with pytest.raises(PbmError, match="unsupported PBM variant"):
        read_pbm(b"P1\n192 72\n" + b"0 " * 13824)
    with pytest.raises(PbmError):
        read_pbm(b"P4\n192 71\n" + bytes(24 * 71))
    with pytest.raises(PbmError):
        read_pbm(write_pbm(np.zeros((72, 288))), width=192)
    with pytest.raises(PbmError):
        read_pbm(b"P4\n192 72\n" + bytes(10))
    with pytest.raises(PbmError):
        read_pbm(b"GIF89a")
    commented = b"P4\n# comment\n192 72\n" + bytes(24 * 72)
    assert read_pbm(commented).sum() == 0


def test_dataset_visible_shape():
    ds = RollDataset()
    for w in random_windows(0, 3):
        ds.append(w, "x", 0)
    assert ds.visible().shape == (3, 13_824)
    np.testing.assert_array_equal(ds.visible()[0].reshape(72, 192), ds.windows[0])


def test_from_score_provenance():
    s = Score([NoteEvent(0, 60, 480 * 12)], 480)
    ds = RollDataset.from_score(s, "piece")
    assert [p[:2] for p in ds.provenance] == [("piece", 0), ("piece", 2), ("piece", 4)][:len(ds)]
    assert len(ds) == 1  # 3 measures -> one window, trailing measure dropped
    assert DEFAULT_SHIFTS == (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6)
