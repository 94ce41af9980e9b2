"""Simulated wearable camera: paced JPEG capture over the chunk transport.

Stands in for the camera unit: while a client is connected it captures a
frame every ``capture_interval`` seconds, encodes it through the transport
codec and offers each chunk to a sink, reports its battery level every
``battery_interval`` seconds, and returns to advertising when the link
drops. All timing flows through an injectable clock so tests can drive the
cadence exactly.
"""

from __future__ import annotations

import io
import random
import socket
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from PIL import Image, ImageDraw

from .clock import VirtualClock
from .transport import Chunk, encode_frame, serialize_chunk


class SimulatorError(Exception):
    pass


class InvalidTransitionError(SimulatorError):
    pass


class SourceEmptyError(SimulatorError):
    pass


class SinkClosed(Exception):
    """Raised by a sink when the consumer is gone."""


@dataclass(frozen=True)
class LossModel:
    """Deterministic chunk-loss injection.

    ``drop_probability`` applies to data chunks, drawn from a dedicated RNG
    so equal seeds reproduce equal drop sequences. ``drop_end_flag`` drops
    every end flag unconditionally (for exercising timeout recovery).
    """

    drop_probability: float = 0.0
    drop_end_flag: bool = False
    seed: int = 0


LOSSLESS = LossModel()


class SyntheticSource:
    """Generates deterministic stripe-pattern JPEG frames on demand."""

    def __init__(self, width: int = 1024, height: int = 768):
        self.width = width
        self.height = height

    def frame(self, sequence_no: int) -> bytes:
        return make_synthetic_frame(self.width, self.height, sequence_no)


class DirectorySource:
    """Cycles through the JPEG files of a directory in sorted order."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        files = sorted(
            p for p in self.path.iterdir() if p.suffix.lower() in (".jpg", ".jpeg")
        )
        if not files:
            raise SourceEmptyError(f"no JPEG files in {self.path}")
        self._frames = [p.read_bytes() for p in files]

    def frame(self, sequence_no: int) -> bytes:
        return self._frames[sequence_no % len(self._frames)]


@dataclass
class DeviceConfig:
    capture_interval: float = 2.0
    battery_interval: float = 60.0
    battery_initial: float = 100.0
    battery_drain_per_hour: float = 5.0
    frame_source: object = field(default_factory=SyntheticSource)
    loss: LossModel = LOSSLESS

    def __post_init__(self) -> None:
        if self.capture_interval <= 0 or self.battery_interval <= 0:
            raise ValueError("intervals must be positive")
        if not 0 <= self.battery_initial <= 100:
            raise ValueError("battery_initial must be within 0..100")


class DevicePhase(Enum):
    ADVERTISING = "advertising"
    CONNECTED = "connected"
    STOPPED = "stopped"


@dataclass(frozen=True)
class FrameSent:
    at: float
    frame_no: int
    chunks_total: int
    chunks_dropped: int


@dataclass(frozen=True)
class BatteryReport:
    at: float
    level: float


@dataclass(frozen=True)
class CaptureSkipped:
    at: float


@dataclass(frozen=True)
class LinkLost:
    at: float


class CameraSimulator:
    """One logical device; the sink is invoked sequentially, never interleaved."""

    def __init__(self, config: DeviceConfig, clock=None, sink=None):
        self.config = config
        self.clock = clock if clock is not None else VirtualClock()
        self.sink = sink
        self.phase = DevicePhase.ADVERTISING
        self.frames_sent = 0
        self.chunks_dropped = 0
        self.captures_skipped = 0
        self._sequence = 0
        self._rng = random.Random(config.loss.seed)
        self._t0 = self.clock.now()
        self._next_capture = 0.0
        self._next_battery = 0.0

    def battery_level(self, at: float | None = None) -> float:
        elapsed = (at if at is not None else self.clock.now()) - self._t0
        drained = self.config.battery_drain_per_hour * elapsed / 3600.0
        return max(0.0, self.config.battery_initial - drained)

    def connect(self) -> None:
        if self.phase is not DevicePhase.ADVERTISING:
            raise InvalidTransitionError(f"connect while {self.phase.value}")
        self.phase = DevicePhase.CONNECTED
        now = self.clock.now()
        self._next_capture = now + self.config.capture_interval
        self._next_battery = now + self.config.battery_interval

    def disconnect(self) -> None:
        if self.phase is not DevicePhase.CONNECTED:
            raise InvalidTransitionError(f"disconnect while {self.phase.value}")
        self.phase = DevicePhase.ADVERTISING

    def stop(self) -> None:
        self.phase = DevicePhase.STOPPED

    def run_for(self, duration: float) -> list:
        """Advances the clock by ``duration``, emitting due frames and battery
        reports in time order. Returns the event list."""
        events: list = []
        end = self.clock.now() + duration
        while self.phase is DevicePhase.CONNECTED:
            due = min(self._next_capture, self._next_battery)
            if due > end:
                break
            if due > self.clock.now():  # a slow sink may already be past due
                self.clock.advance_to(due)
            if self._next_battery <= self._next_capture:
                events.append(BatteryReport(self.clock.now(), self.battery_level()))
                self._next_battery += self.config.battery_interval
            else:
                events.extend(self._capture_and_send())
        if self.clock.now() < end:
            self.clock.advance_to(end)
        return events

    def _should_drop(self, chunk: Chunk) -> bool:
        if chunk.is_end_flag:
            return self.config.loss.drop_end_flag
        return self._rng.random() < self.config.loss.drop_probability

    def _capture_and_send(self) -> list:
        events: list = []
        at = self.clock.now()
        frame_no = self._sequence
        jpeg = self.config.frame_source.frame(frame_no)
        self._sequence += 1
        self.frames_sent += 1
        chunks = encode_frame(jpeg)
        dropped = 0
        for chunk in chunks:
            if self._should_drop(chunk):
                dropped += 1
                continue
            if self.sink is not None:
                try:
                    self.sink.send(chunk)
                except SinkClosed:
                    # consumer gone: abandon the partial frame, re-advertise
                    self.chunks_dropped += dropped
                    self.phase = DevicePhase.ADVERTISING
                    events.append(LinkLost(self.clock.now()))
                    return events
        self.chunks_dropped += dropped
        events.append(FrameSent(at, frame_no, len(chunks), dropped))
        self._next_capture += self.config.capture_interval
        # a slow sink can overrun the next capture slot; drop, never queue
        now = self.clock.now()
        while self._next_capture <= now:
            events.append(CaptureSkipped(self._next_capture))
            self.captures_skipped += 1
            self._next_capture += self.config.capture_interval
        return events


class TcpChunkSink:
    """Streams chunks to the gateway: 1-byte length prefix per serialized chunk."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)

    def send(self, chunk: Chunk) -> None:
        raw = serialize_chunk(chunk)
        try:
            self._sock.sendall(bytes([len(raw)]) + raw)
        except OSError as exc:
            raise SinkClosed(str(exc)) from exc

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


_STRIPE_COLORS = (
    (188, 60, 48), (222, 158, 54), (92, 134, 68), (58, 110, 165),
    (116, 78, 144), (64, 64, 64), (200, 190, 172), (26, 28, 32),
)

_BIT_BAND_STRIPES = 16


def make_synthetic_frame(width: int, height: int, sequence_no: int) -> bytes:
    """Deterministic JPEG test frame.

    The top quarter encodes ``sequence_no`` as 16 black/white bit stripes
    (MSB first); the rest is a color-stripe pattern shifted by the sequence
    number. Identical inputs give byte-identical JPEGs.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    img = Image.new("RGB", (width, height))
    draw = ImageDraw.Draw(img)
    band = max(1, height // 4)
    stripe_w = width / _BIT_BAND_STRIPES
    for i in range(_BIT_BAND_STRIPES):
        bit = (sequence_no >> (_BIT_BAND_STRIPES - 1 - i)) & 1
        color = (255, 255, 255) if bit else (0, 0, 0)
        draw.rectangle(
            (round(i * stripe_w), 0, round((i + 1) * stripe_w) - 1, band - 1),
            fill=color,
        )
    body_stripe = max(8, width // 24)
    for i, x in enumerate(range(0, width, body_stripe)):
        color = _STRIPE_COLORS[(i + sequence_no) % len(_STRIPE_COLORS)]
        draw.rectangle((x, band, x + body_stripe - 1, height - 1), fill=color)
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=90)
    return buf.getvalue()


def decode_synthetic_sequence(jpeg: bytes) -> int:
    """Reads the sequence number back out of a synthetic frame's bit band."""
    img = Image.open(io.BytesIO(jpeg)).convert("L")
    width, height = img.size
    band_mid = max(0, height // 8)
    stripe_w = width / _BIT_BAND_STRIPES
    value = 0
    for i in range(_BIT_BAND_STRIPES):
        x = min(width - 1, round((i + 0.5) * stripe_w))
        bit = 1 if img.getpixel((x, band_mid)) >= 128 else 0
        value = (value << 1) | bit
    return value
