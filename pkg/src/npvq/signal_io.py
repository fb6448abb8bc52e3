"""Audio ingest/emit, framing and vector grouping.

Samples are held as float64 in [-1, 1]: 16-bit integers are divided by 32768
on read and multiplied back (with saturation) on write.
"""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np

DEFAULT_RATE = 8000
DEFAULT_FRAME_LEN = 200
SCALE = 32768.0

FORMATS = ("raw_s16le", "wav")


class AudioError(ValueError):
    """Unreadable, unsupported or empty audio."""


@dataclass(frozen=True)
class SampleBuffer:
    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if x.size and (not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1.0):
            raise ValueError("samples must be finite and lie in [-1, 1]")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Frame:
    index: int
    samples: np.ndarray


def _guess_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS:
            raise AudioError(f"unknown audio format {fmt!r}")
        return fmt
    return "wav" if str(path).lower().endswith(".wav") else "raw_s16le"


def read_audio(path, format=None) -> SampleBuffer:
    """Read 16-bit mono PCM from a WAV or headerless little-endian file.

    ``format`` is inferred from the extension when omitted (``.wav`` or raw).
    """
    fmt = _guess_format(path, format)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{path}: no such file")
    if fmt == "wav":
        try:
            with wave.open(str(path), "rb") as w:
                if w.getcomptype() != "NONE":
                    raise AudioError(f"{path}: compressed WAV not supported")
                if w.getnchannels() != 1:
                    raise AudioError(f"{path}: only mono WAV is supported")
                if w.getsampwidth() != 2:
                    raise AudioError(f"{path}: only 16-bit PCM WAV is supported")
                rate = w.getframerate()
                data = w.readframes(w.getnframes())
        except (wave.Error, EOFError) as exc:
            raise AudioError(f"{path}: {exc}") from exc
    else:
        rate = DEFAULT_RATE
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) % 2:
            raise AudioError(f"{path}: odd byte count for 16-bit samples")
    if not data:
        raise AudioError(f"{path}: empty audio")
    ints = np.frombuffer(data, dtype="<i2")
    return SampleBuffer(ints.astype(np.float64) / SCALE, rate)


def to_int16(samples) -> np.ndarray:
    x = np.round(np.asarray(samples, dtype=np.float64) * SCALE)
    return np.clip(x, -32768, 32767).astype("<i2")


def write_audio(buf: SampleBuffer, path, format=None) -> None:
    fmt = _guess_format(path, format)
    data = to_int16(buf.samples).tobytes()
    try:
        if fmt == "wav":
            with wave.open(str(path), "wb") as w:
                w.setnchannels(1)
                w.setsampwidth(2)
                w.setframerate(buf.sample_rate_hz)
                w.writeframes(data)
        else:
            with open(path, "wb") as fh:
                fh.write(data)
    except OSError as exc:
        raise AudioError(f"{path}: cannot write ({exc})") from exc


def frame_signal(buf, frame_len: int = DEFAULT_FRAME_LEN) -> list[Frame]:
    """Cut into consecutive non-overlapping frames; the last may be short."""
    if frame_len < 1:
        raise ValueError("frame_len must be >= 1")
    x = buf.samples if isinstance(buf, SampleBuffer) else np.asarray(buf, dtype=np.float64)
    return [Frame(i, x[start:start + frame_len])
            for i, start in enumerate(range(0, x.size, frame_len))]


def vectorize(samples, m: int) -> tuple[np.ndarray, int]:
    """Group samples into non-overlapping m-vectors.

    Returns the ``(n_vectors, m)`` array and the number of trailing samples
    that did not fill a vector.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    n = x.size // m
    return x[:n * m].reshape(n, m), x.size - n * m
