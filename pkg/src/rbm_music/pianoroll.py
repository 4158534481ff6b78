"""Piano-roll geometry: 72 pitch rows (B6 at row 0 down to C1 at row 71)
by 24 columns per quarter note, two 4/4 measures per 192-column window.

Rolls are plain ``uint8`` arrays of shape (72, width).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scoreio import GrayImage, NoteEvent, Score, _netpbm_header, is_common_time

ROWS = 72
TOP_PITCH = 95     # B6
BOTTOM_PITCH = 24  # C1
COLS_PER_QUARTER = 24
MEASURE_COLS = 4 * COLS_PER_QUARTER   # 96
WINDOW_COLS = 2 * MEASURE_COLS        # 192
WINDOW_SHAPE = (ROWS, WINDOW_COLS)
VISIBLE_UNITS = ROWS * WINDOW_COLS    # 13,824
DEFAULT_SHIFTS = (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6)


class MeterError(ValueError):
    pass


class PbmError(ValueError):
    pass


def pitch_to_row(pitch: int) -> int:
    return TOP_PITCH - pitch


def row_to_pitch(row: int) -> int:
    return TOP_PITCH - row


def check_roll(roll, width: int | None = None) -> np.ndarray:
    roll = np.asarray(roll)
    if roll.ndim != 2 or roll.shape[0] != ROWS:
        raise ValueError(f"piano roll must have {ROWS} rows, got shape {roll.shape}")
    if width is not None and roll.shape[1] != width:
        raise ValueError(f"piano roll must be {width} columns wide, got {roll.shape[1]}")
    return roll.astype(np.uint8, copy=False)


def _tick_to_col(tick: int, tpq: int) -> int:
    # round half up, in integers
    return (2 * tick * COLS_PER_QUARTER + tpq) // (2 * tpq)


def rasterize(score: Score) -> tuple[np.ndarray, int]:
    """Full-length strip for a 4/4 score, plus the count of out-of-range notes dropped.

    Width is the score length in columns rounded up to whole measures.
    """
    if not is_common_time(score):
        raise MeterError("score is not in 4/4 time")
    tpq = score.ticks_per_quarter
    cols = -(-score.length * COLS_PER_QUARTER // tpq)
    width = -(-cols // MEASURE_COLS) * MEASURE_COLS
    strip = np.zeros((ROWS, width), dtype=np.uint8)
    dropped = 0
    for note in score.notes:
        if not BOTTOM_PITCH <= note.pitch <= TOP_PITCH:
            dropped += 1
            continue
        start = _tick_to_col(note.onset, tpq)
        stop = max(_tick_to_col(note.end, tpq), start + 1)
        if stop > width:
            # a minimum-width note at the very end can spill one column
            extra = -(-(stop - width) // MEASURE_COLS) * MEASURE_COLS
            strip = np.pad(strip, ((0, 0), (0, extra)))
            width += extra
        strip[pitch_to_row(note.pitch), start:stop] = 1
    return strip, dropped


def segment(strip) -> list[np.ndarray]:
    """Consecutive non-overlapping two-measure windows; a trailing lone measure is dropped."""
    strip = check_roll(strip)
    if strip.shape[1] % MEASURE_COLS:
        raise ValueError("strip width must be a multiple of 96 columns")
    return [strip[:, i:i + WINDOW_COLS].copy()
            for i in range(0, strip.shape[1] - WINDOW_COLS + 1, WINDOW_COLS)]


def transpose_roll(window, semitones: int) -> np.ndarray | None:
    """Shift up by ``semitones`` (toward row 0). None if a note would leave the range."""
    window = check_roll(window)
    if abs(semitones) > ROWS - 1:
        raise ValueError("cannot transpose by more than 71 semitones")
    rows = np.flatnonzero(window.any(axis=1))
    if rows.size and (rows.min() - semitones < 0 or rows.max() - semitones >= ROWS):
        return None
    out = np.zeros_like(window)
    if semitones >= 0:
        out[:ROWS - semitones] = window[semitones:]
    else:
        out[-semitones:] = window[:ROWS + semitones]
    return out


@dataclass
class RollDataset:
    windows: list[np.ndarray] = field(default_factory=list)
    # (source id, measure index, transposition in semitones) per window
    provenance: list[tuple[str, int, int]] = field(default_factory=list)
    rejected: int = 0  # transpositions skipped by augment

    def __len__(self):
        return len(self.windows)

    def append(self, window, source: str, measure: int, shift: int = 0):
        self.windows.append(check_roll(window, WINDOW_COLS))
        self.provenance.append((source, measure, shift))

    def visible(self) -> np.ndarray:
        """Flattened windows, one visible state of length 13,824 per row."""
        if not self.windows:
            return np.zeros((0, VISIBLE_UNITS))
        return np.stack(self.windows).reshape(len(self.windows), -1).astype(np.float64)

    @classmethod
    def from_score(cls, score: Score, source: str) -> "RollDataset":
        strip, _ = rasterize(score)
        ds = cls()
        for i, w in enumerate(segment(strip)):
            ds.append(w, source, 2 * i, 0)
        return ds


def augment(dataset: RollDataset, shifts=DEFAULT_SHIFTS) -> RollDataset:
    """Each window in every key of ``shifts`` plus the original, ordered by shift.

    Transpositions that push notes out of range are skipped and counted in
    ``rejected``.
    """
    out = RollDataset()
    keys = sorted(set(shifts) | {0})
    rejected = 0
    for window, (source, measure, base) in zip(dataset.windows, dataset.provenance):
        for s in keys:
            moved = transpose_roll(window, s)
            if moved is None:
                rejected += 1
                continue
            out.append(moved, source, measure, base + s)
    out.rejected = dataset.rejected + rejected
    return out


def resize_binary(img: GrayImage, threshold: int = 128) -> np.ndarray:
    """Nearest-neighbour resize to 72x192, then pixel >= threshold -> 1."""
    h, w = img.pixels.shape
    if h < 1 or w < 1:
        raise ValueError("cannot resize an empty image")
    rows = np.arange(ROWS) * h // ROWS
    cols = np.arange(WINDOW_COLS) * w // WINDOW_COLS
    return (img.pixels[np.ix_(rows, cols)] >= threshold).astype(np.uint8)


def roll_to_score(roll) -> Score:
    """One note per maximal horizontal run of set cells; 1 column = 1 tick at tpq 24.

    Repeated same-pitch notes with no gap between them come back as one note.
    """
    roll = check_roll(roll)
    notes = []
    for row in np.flatnonzero(roll.any(axis=1)):
        line = np.concatenate([[0], roll[row].astype(np.int8), [0]])
        edges = np.diff(line)
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1)
        pitch = row_to_pitch(int(row))
        notes.extend(NoteEvent(int(a), pitch, int(b - a)) for a, b in zip(starts, stops))
    return Score(notes, COLS_PER_QUARTER, [(0, 4, 4)], roll.shape[1])


# --- PBM ------------------------------------------------------------------

def write_pbm(roll) -> bytes:
    roll = check_roll(roll)
    if roll.shape[1] == 0 or roll.shape[1] % MEASURE_COLS:
        raise PbmError("roll width must be a positive multiple of 96")
    packed = np.packbits(roll.astype(bool), axis=1)
    return b"P4\n%d %d\n" % (roll.shape[1], roll.shape[0]) + packed.tobytes()


def read_pbm(data: bytes, width: int | None = None) -> np.ndarray:
    """Read a binary P4 roll. ``width`` pins the expected width (192 for windows)."""
    magic = data[:2]
    if magic == b"P1":
        raise PbmError("unsupported PBM variant (P1 ASCII); expected P4")
    if magic != b"P4":
        raise PbmError(f"not a binary PBM file (magic {magic!r})")
    try:
        tokens, pos = _netpbm_header(data, 3)
        w, h = int(tokens[1]), int(tokens[2])
    except ValueError as exc:
        raise PbmError(f"bad PBM header: {exc}") from exc
    if h != ROWS:
        raise PbmError(f"PBM height {h} != {ROWS}")
    if w == 0 or w % MEASURE_COLS or (width is not None and w != width):
        raise PbmError(f"unexpected PBM width {w}")
    stride = -(-w // 8)
    body = data[pos:pos + stride * h]
    if len(body) != stride * h:
        raise PbmError("truncated PBM raster")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(h, stride)
    return np.unpackbits(packed, axis=1)[:, :w]
