"""Audio decoding, windowing, and RIFF/WAVE I/O.

The only built-in codec is RIFF/WAVE PCM (8/16/24-bit int and 32/64-bit
float), which keeps the core dependency-free.  Compressed formats go through
a decoder plug-in: any callable ``(path) -> (interleaved samples, channels,
rate)``.  ``ffmpeg_decoder`` is a ready-made plug-in that shells out to an
installed ``ffmpeg``; ``decode`` falls back to it automatically for non-WAVE
files when ffmpeg is on PATH.

All decoded audio is mixed down to mono, resampled to the pipeline rate
(22050 Hz by default), and peak-limited to [-1, 1].
"""

from __future__ import annotations

import math
import shutil
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import resample_poly

from .errors import ClipTooShort, DecodeError, UnsupportedCodec

PIPELINE_RATE = 22050

# Analysis window: skip intros, then use one minute of material.
WINDOW_START_S = 60.0
WINDOW_END_S = 120.0

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# decoder plug-in contract: path -> (float samples, interleaved, in [-1, 1]
# or raw scale), channel count, sample rate
DecoderPlugin = Callable[[str], tuple[np.ndarray, int, int]]


@dataclass
class AudioClip:
    """Mono PCM samples at a known rate."""

    samples: np.ndarray
    sample_rate: int
    source_path: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a RIFF/WAVE file into a float64 array of shape (frames, channels).

    Integer PCM is scaled by the full range of its bit depth, so values land
    in [-1, 1] and a write/read round trip stays within one LSB.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise DecodeError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or len(fmt) < 16:
        raise DecodeError(f"missing fmt chunk: {path}")
    if payload is None:
        raise DecodeError(f"missing data chunk: {path}")

    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise DecodeError(f"truncated extensible fmt chunk: {path}")
        (tag,) = struct.unpack_from("<H", fmt, 24)  # subformat GUID leads with the tag
    if channels < 1 or rate <= 0:
        raise DecodeError(f"invalid wave header: {path}")

    data = _decode_pcm(payload, tag, bits, path)
    frames = len(data) // channels
    if frames == 0:
        raise DecodeError(f"zero-length audio: {path}")
    return data[: frames * channels].reshape(frames, channels), rate


def _decode_pcm(payload: bytes, tag: int, bits: int, path) -> np.ndarray:
    if tag == _WAVE_FORMAT_PCM and bits == 8:
        x = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        return (x - 128.0) / 128.0
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        return np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    if tag == _WAVE_FORMAT_PCM and bits == 24:
        b = np.frombuffer(payload[: len(payload) - len(payload) % 3], dtype=np.uint8)
        b = b.reshape(-1, 3).astype(np.int32)
        x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        x = np.where(x >= 1 << 23, x - (1 << 24), x)  # sign extension
        return x.astype(np.float64) / float(1 << 23)
    if tag == _WAVE_FORMAT_PCM and bits == 32:
        return np.frombuffer(payload, dtype="<i4").astype(np.float64) / float(1 << 31)
    if tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        return np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 64:
        return np.frombuffer(payload, dtype="<f8").astype(np.float64)
    raise UnsupportedCodec(f"unsupported wave encoding (tag={tag}, bits={bits}): {path}")


def write_wav(path, samples: np.ndarray, sample_rate: int, encoding: str = "pcm16") -> None:
    """Write mono or multi-channel samples as a RIFF/WAVE file.

    ``encoding`` is one of pcm8, pcm16, pcm24, float32.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    interleaved = x.reshape(-1)

    if encoding == "pcm16":
        tag, bits = _WAVE_FORMAT_PCM, 16
        q = np.clip(np.round(interleaved * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
    elif encoding == "pcm8":
        tag, bits = _WAVE_FORMAT_PCM, 8
        q = np.clip(np.round(interleaved * 128.0), -128, 127) + 128
        payload = q.astype(np.uint8).tobytes()
    elif encoding == "pcm24":
        tag, bits = _WAVE_FORMAT_PCM, 24
        q = np.clip(np.round(interleaved * float(1 << 23)), -(1 << 23), (1 << 23) - 1)
        q = q.astype(np.int64) & 0xFFFFFF
        b = np.empty((len(q), 3), dtype=np.uint8)
        b[:, 0] = q & 0xFF
        b[:, 1] = (q >> 8) & 0xFF
        b[:, 2] = (q >> 16) & 0xFF
        payload = b.tobytes()
    elif encoding == "float32":
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
        payload = interleaved.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding: {encoding}")

    block_align = channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH", tag, channels, sample_rate, sample_rate * block_align, block_align, bits
    )
    body = b"WAVE"
    body += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Band-limited polyphase resampling (Kaiser-windowed sinc)."""
    if rate_in == rate_out:
        return np.asarray(samples, dtype=np.float64)
    g = math.gcd(rate_in, rate_out)
    return resample_poly(np.asarray(samples, dtype=np.float64), rate_out // g, rate_in // g)


def ffmpeg_decoder(path) -> tuple[np.ndarray, int, int]:
    """Decoder plug-in that shells out to ffmpeg for compressed formats."""
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None:
        raise UnsupportedCodec(f"ffmpeg not found on PATH; cannot decode {path}")
    probe = subprocess.run(
        [ffmpeg, "-i", str(path), "-f", "f64le", "-ac", "1", "-ar", str(PIPELINE_RATE), "-"],
        capture_output=True,
    )
    if probe.returncode != 0:
        raise DecodeError(f"ffmpeg failed on {path}: {probe.stderr[-200:]!r}")
    samples = np.frombuffer(probe.stdout, dtype="<f8")
    return samples, 1, PIPELINE_RATE


def decode(path, target_rate: int = PIPELINE_RATE, decoder: DecoderPlugin | None = None) -> AudioClip:
    """Decode an audio file to a mono clip at ``target_rate``.

    WAVE files use the built-in reader; anything else goes through
    ``decoder`` if given, else the ffmpeg fallback.
    """
    path = Path(path)
    if not path.is_file():
        raise DecodeError(f"no such file: {path}")

    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == b"RIFF":
        data, rate = read_wav(path)
        mono = data.mean(axis=1)
    else:
        plugin = decoder if decoder is not None else ffmpeg_decoder
        raw, channels, rate = plugin(str(path))
        raw = np.asarray(raw, dtype=np.float64)
        if channels > 1:
            raw = raw[: len(raw) - len(raw) % channels]
            mono = raw.reshape(-1, channels).mean(axis=1)
        else:
            mono = raw

    if len(mono) == 0:
        raise DecodeError(f"zero-length audio: {path}")
    mono = resample(mono, rate, target_rate)
    peak = np.max(np.abs(mono)) if len(mono) else 0.0
    if peak > 1.0:
        mono = mono / peak
    return AudioClip(mono, target_rate, str(path))


def sample_window(clip: AudioClip) -> AudioClip:
    """Return the fixed [60 s, 120 s) analysis slice.

    Songs shorter than two minutes are rejected rather than padded.
    """
    need = int(round(WINDOW_END_S * clip.sample_rate))
    if len(clip.samples) < need:
        raise ClipTooShort(
            f"song shorter than 2 minutes ({clip.duration:.1f} s): {clip.source_path}"
        )
    start = int(round(WINDOW_START_S * clip.sample_rate))
    return AudioClip(clip.samples[start:need], clip.sample_rate, clip.source_path)
