"""Synthetic stand-ins for data we do not ship.

``synthetic_score`` writes a short 4/4 keyboard piece built from diatonic
scale runs over block triads. ``digit_images`` upsamples scikit-learn's
bundled 8x8 handwritten digits to MNIST's 28x28 geometry.
"""

from __future__ import annotations

import numpy as np

from .scoreio import GrayImage, NoteEvent, Score

MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)
# chord roots (scale degrees) for the four half measures of a window
PROGRESSIONS = ((0, 3, 4, 0), (0, 5, 3, 4), (1, 4, 0, 0), (0, 4, 5, 3))
TPQ = 480


def _scale_pitch(tonic: int, degree: int) -> int:
    octave, step = divmod(degree, 7)
    return tonic + 12 * octave + MAJOR_STEPS[step]


def synthetic_score(rng: np.random.Generator, measures: int = 2,
                    tonic: int | None = None) -> Score:
    """Eighth-note scale runs over triads with a bass root, in one major key.

    Beats 1 and 3 get a quarter-note triad following one of a few common
    progressions; the melody walks the scale up or down from a random
    starting degree.
    """
    if tonic is None:
        tonic = int(rng.integers(55, 67))  # melody tonic, G3..F#4
    notes = []
    eighth, gap = TPQ // 2, TPQ // 24
    degree = int(rng.integers(0, 7))
    direction = 1 if rng.random() < 0.5 else -1
    progression = PROGRESSIONS[int(rng.integers(len(PROGRESSIONS)))]
    for m in range(measures):
        for hm in range(2):
            start = (4 * m + 2 * hm) * TPQ
            root = progression[(2 * m + hm) % len(progression)]
            for third in (0, 2, 4):
                notes.append(NoteEvent(start, _scale_pitch(tonic - 12, root + third), TPQ - gap))
            notes.append(NoteEvent(start, _scale_pitch(tonic - 24, root), TPQ - gap))
        for e in range(8):
            if not 0 <= degree + direction <= 13:
                direction = -direction
            pitch = _scale_pitch(tonic, degree)
            notes.append(NoteEvent(4 * m * TPQ + e * eighth, pitch, eighth - gap))
            degree += direction
    return Score(notes, TPQ, [(0, 4, 4)], 4 * measures * TPQ)


def digit_images(count: int | None = None, size: int = 28) -> list[GrayImage]:
    """Handwritten digits (0-16 gray levels) scaled to 0-255 on a size x size grid."""
    from sklearn.datasets import load_digits

    raw = load_digits().images
    if count is not None:
        reps = -(-count // len(raw))
        raw = np.concatenate([raw] * reps)[:count]
    # 8x8 -> 24x24 by pixel replication, then a 2-pixel border like MNIST
    up = np.kron(raw, np.ones((3, 3)))
    pad = (size - up.shape[1]) // 2
    up = np.pad(up, ((0, 0), (pad, size - up.shape[1] - pad), (pad, size - up.shape[2] - pad)))
    pixels = np.clip(np.rint(up * 255.0 / 16.0), 0, 255).astype(np.uint8)
    return [GrayImage(p) for p in pixels]
