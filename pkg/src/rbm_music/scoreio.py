"""Standard MIDI File and IDX readers/writers.

Only what the pipeline needs: note events and time signatures from SMF
format 0/1, a format-0 writer, and IDX3 (MNIST image) reading.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
import logging
import struct

import numpy as np

log = logging.getLogger(__name__)

PERCUSSION_CHANNEL = 9
EXPORT_VELOCITY = 80
EXPORT_TEMPO_USEC = 500_000  # 120 BPM
IDX3_MAGIC = 0x00000803


class MidiError(ValueError):
    pass


class IdxError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class NoteEvent:
    onset: int
    pitch: int
    duration: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0-127")
        if self.onset < 0:
            raise ValueError("onset must be nonnegative")
        if self.duration < 1:
            raise ValueError("duration must be >= 1 tick")

    @property
    def end(self) -> int:
        return self.onset + self.duration


@dataclass
class Score:
    """Notes sorted by (onset, pitch), plus metric context.

    ``end_tick`` is the nominal length of the piece (end-of-track), which may
    extend past the last note-off. ``dangling`` counts note-ons that were
    never closed and therefore dropped on parse.
    """

    notes: list[NoteEvent] = field(default_factory=list)
    ticks_per_quarter: int = 480
    time_signatures: list[tuple[int, int, int]] = field(default_factory=list)
    end_tick: int = 0
    dangling: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.ticks_per_quarter < 1:
            raise ValueError("ticks_per_quarter must be >= 1")
        self.notes = sorted(self.notes)

    @property
    def length(self) -> int:
        last = max((n.end for n in self.notes), default=0)
        return max(last, self.end_tick)


def is_common_time(score: Score) -> bool:
    """True when every time signature is 4/4 (none at all counts as 4/4)."""
    return all((num, den) == (4, 4) for _, num, den in score.time_signatures)


# --- variable-length quantities -------------------------------------------

def encode_vlq(value: int) -> bytes:
    if not 0 <= value <= 0x0FFFFFFF:
        raise ValueError(f"VLQ value {value} out of range")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def decode_vlq(data: bytes, pos: int) -> tuple[int, int]:
    """Return (value, new position)."""
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise MidiError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiError("variable-length quantity longer than 4 bytes")


# --- parsing ----------------------------------------------------------------

_DATA_LENGTH = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _chunks(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MidiError("truncated chunk header")
        kind = data[pos:pos + 4]
        (size,) = struct.unpack(">I", data[pos + 4:pos + 8])
        pos += 8
        if pos + size > len(data):
            raise MidiError(f"truncated {kind!r} chunk")
        yield kind, data[pos:pos + size]
        pos += size


def _track_events(track: bytes):
    """Yield (absolute tick, kind, payload) for one MTrk chunk.

    kind is "channel" with payload (status, *data bytes), "meta" with
    (meta type, data), or a final "end" when the track lacks FF 2F.
    """
    pos, tick, running = 0, 0, None
    while pos < len(track):
        delta, pos = decode_vlq(track, pos)
        tick += delta
        if pos >= len(track):
            raise MidiError("truncated event")
        status = track[pos]
        if status == 0xFF:
            if pos + 2 > len(track):
                raise MidiError("truncated meta event")
            meta_type = track[pos + 1]
            size, pos = decode_vlq(track, pos + 2)
            if pos + size > len(track):
                raise MidiError("truncated meta event")
            yield tick, "meta", (meta_type, track[pos:pos + size])
            pos += size
            running = None
            if meta_type == 0x2F:
                return
            continue
        if status in (0xF0, 0xF7):
            size, pos = decode_vlq(track, pos + 1)
            if pos + size > len(track):
                raise MidiError("truncated sysex event")
            pos += size
            running = None
            continue
        if status >= 0xF0:
            raise MidiError(f"unexpected status byte 0x{status:02X}")
        if status & 0x80:
            running = status
            pos += 1
        elif running is None:
            raise MidiError("data byte without running status")
        n = _DATA_LENGTH[running >> 4]
        if pos + n > len(track):
            raise MidiError("truncated channel event")
        args = track[pos:pos + n]
        pos += n
        if any(a & 0x80 for a in args):
            raise MidiError("channel event data byte has high bit set")
        yield tick, "channel", (running, *args)
    yield tick, "end", None


def parse_midi(data: bytes) -> Score:
    """Parse an SMF (format 0 or 1) into a Score, merging all tracks.

    Raises MidiError on malformed input; never anything else.
    """
    try:
        return _parse_midi(bytes(data))
    except MidiError:
        raise
    except (ValueError, IndexError, KeyError, struct.error) as exc:
        raise MidiError(f"malformed MIDI data: {exc}") from exc


def _parse_midi(data: bytes) -> Score:
    if data[:4] != b"MThd":
        raise MidiError("bad header magic (expected MThd)")
    chunks = _chunks(data)
    _, header = next(chunks)
    if len(header) < 6:
        raise MidiError("header chunk too short")
    fmt, ntracks, division = struct.unpack(">HHH", header[:6])
    if fmt not in (0, 1):
        raise MidiError(f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise MidiError("SMPTE time division is not supported")
    if division == 0:
        raise MidiError("ticks per quarter must be positive")

    notes: list[NoteEvent] = []
    time_sigs: list[tuple[int, int, int]] = []
    end_tick = 0
    dangling = 0
    seen = 0
    for kind, body in chunks:
        if kind != b"MTrk":
            continue  # alien chunks are skipped by length
        seen += 1
        sounding: dict[tuple[int, int], deque] = defaultdict(deque)
        last = 0
        for tick, what, payload in _track_events(body):
            last = tick
            if what == "meta":
                meta_type, meta = payload
                if meta_type == 0x58:
                    if len(meta) < 2:
                        raise MidiError("short time-signature meta event")
                    time_sigs.append((tick, meta[0], 1 << meta[1]))
                continue
            if what != "channel":
                continue
            status, *args = payload
            kind_nib, channel = status >> 4, status & 0x0F
            if kind_nib not in (0x8, 0x9) or channel == PERCUSSION_CHANNEL:
                continue
            key, velocity = args
            if kind_nib == 0x9 and velocity > 0:
                sounding[(channel, key)].append(tick)
            else:
                queue = sounding.get((channel, key))
                if not queue:
                    continue  # stray note-off
                onset = queue.popleft()
                if tick > onset:
                    notes.append(NoteEvent(onset, key, tick - onset))
                else:
                    log.debug("zero-length note %d at tick %d dropped", key, tick)
        end_tick = max(end_tick, last)
        leftover = sum(len(q) for q in sounding.values())
        if leftover:
            log.warning("%d note-on events without note-off dropped", leftover)
            dangling += leftover
    if seen == 0 and ntracks:
        raise MidiError("no track chunks found")
    return Score(notes, division, sorted(time_sigs), end_tick, dangling)


# --- writing ----------------------------------------------------------------

def _assign_channels(notes: list[NoteEvent]) -> list[int]:
    """Spread notes over channels so FIFO pairing recovers every note.

    On one channel, two same-pitch notes that overlap must end in onset
    order; otherwise the later one goes to another channel.
    """
    channels = [c for c in range(16) if c != PERCUSSION_CHANNEL]
    active: dict[tuple[int, int], list[NoteEvent]] = defaultdict(list)
    out = []
    for note in notes:
        for ch in channels:
            live = [n for n in active[(ch, note.pitch)] if n.end > note.onset]
            active[(ch, note.pitch)] = live
            if all(n.end <= note.end for n in live):
                live.append(note)
                out.append(ch)
                break
        else:
            raise ValueError(f"too many nested overlapping notes at pitch {note.pitch}")
    return out


def write_midi(score: Score) -> bytes:
    """Emit a format-0 SMF: tempo 120 BPM, 4/4, note-on velocity 80."""
    notes = sorted(score.notes)
    events = []  # (tick, order, bytes); note-offs sort before note-ons at a tick
    for note, ch in zip(notes, _assign_channels(notes)):
        events.append((note.onset, 1, bytes([0x90 | ch, note.pitch, EXPORT_VELOCITY])))
        events.append((note.end, 0, bytes([0x80 | ch, note.pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))

    track = bytearray()
    track += b"\x00\xff\x51\x03" + EXPORT_TEMPO_USEC.to_bytes(3, "big")
    track += b"\x00\xff\x58\x04\x04\x02\x18\x08"
    tick = 0
    for when, _, msg in events:
        track += encode_vlq(when - tick) + msg
        tick = when
    end = max(tick, score.end_tick)
    track += encode_vlq(end - tick) + b"\xff\x2f\x00"

    if not 1 <= score.ticks_per_quarter < 0x8000:
        raise ValueError("ticks_per_quarter must fit in 15 bits")
    header = struct.pack(">4sIHHH", b"MThd", 6, 0, 1, score.ticks_per_quarter)
    return header + struct.pack(">4sI", b"MTrk", len(track)) + bytes(track)


# --- images -----------------------------------------------------------------

@dataclass(eq=False)
class GrayImage:
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D grid")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def parse_idx(data: bytes) -> list[GrayImage]:
    """Images from an IDX3 (big-endian, unsigned byte) file, in file order."""
    if len(data) < 16:
        raise IdxError("file too short for an IDX3 header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX3_MAGIC:
        raise IdxError(f"bad IDX magic 0x{magic:08X}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise IdxError(f"IDX length {len(data)} does not match header ({expected})")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return [GrayImage(img) for img in pixels.reshape(count, rows, cols)]


def write_idx(images: list[GrayImage]) -> bytes:
    if images:
        rows, cols = images[0].pixels.shape
    else:
        rows = cols = 0
    body = b"".join(img.pixels.tobytes() for img in images)
    return struct.pack(">IIII", IDX3_MAGIC, len(images), rows, cols) + body


def parse_pgm(data: bytes) -> GrayImage:
    """Binary (P5) 8-bit PGM."""
    tokens, pos = _netpbm_header(data, 4)
    if tokens[0] != b"P5":
        raise ValueError("only binary P5 PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError("only 8-bit PGM is supported")
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise ValueError("truncated PGM data")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    if maxval != 255:
        pixels = (pixels.astype(np.uint32) * 255 // maxval).astype(np.uint8)
    return GrayImage(pixels)


def write_pgm(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def _netpbm_header(data: bytes, ntokens: int) -> tuple[list[bytes], int]:
    """Whitespace-separated header tokens (with # comments) and the data offset."""
    tokens, pos = [], 0
    while len(tokens) < ntokens:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated netpbm header")
        tokens.append(data[start:pos])
        if len(tokens) == 1 and tokens[0] not in (b"P1", b"P2", b"P3", b"P4", b"P5", b"P6"):
            raise ValueError(f"not a netpbm file (magic {tokens[0][:8]!r})")
    # exactly one whitespace byte separates the header from raster data
    return tokens, pos + 1
