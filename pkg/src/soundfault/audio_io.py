"""WAV decoding and channel downmix.

Hand-rolled RIFF parser rather than the stdlib ``wave`` module because we
need float32 support, tolerant chunk skipping, and precise error classes
for malformed containers.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import AudioFormatError, TruncatedDataError, UnsupportedCodecError

PCM16_SCALE = 32768.0

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Decoded audio: samples[channels, n_samples] in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int
    source_path: str

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]


def read_wav(path):
    """Decode a RIFF/WAVE file into an AudioClip.

    Supports PCM 16-bit and IEEE float32 encodings, any channel count.
    Unknown chunks are skipped. PCM16 is normalized by dividing by 32768.
    """
    path = str(path)
    with open(path, "rb") as fh:
        riff = fh.read(12)
        if len(riff) < 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            header = fh.read(8)
            if len(header) < 8:
                break
            chunk_id, chunk_size = struct.unpack("<4sI", header)
            payload = fh.read(chunk_size)
            if chunk_id == b"fmt ":
                if len(payload) < 16:
                    raise AudioFormatError(f"{path}: fmt chunk too short")
                fmt = struct.unpack("<HHIIHH", payload[:16])
            elif chunk_id == b"data":
                if len(payload) < chunk_size:
                    raise TruncatedDataError(
                        f"{path}: data chunk truncated "
                        f"({len(payload)} of {chunk_size} bytes)"
                    )
                data = payload
            if chunk_size % 2 == 1:
                fh.read(1)  # chunks are word-aligned

    if fmt is None:
        raise AudioFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise AudioFormatError(f"{path}: missing data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1:
        raise AudioFormatError(f"{path}: zero channels")
    if sample_rate <= 0:
        raise AudioFormatError(f"{path}: invalid sample rate {sample_rate}")

    if audio_format == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / PCM16_SCALE
    elif audio_format in (_FMT_IEEE_FLOAT, _FMT_EXTENSIBLE) and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: unsupported encoding (format={audio_format}, bits={bits})"
        )

    if samples.size % n_channels != 0:
        raise TruncatedDataError(
            f"{path}: sample count {samples.size} not divisible by "
            f"{n_channels} channels"
        )
    # interleaved on disk -> [channels, n_samples]
    samples = samples.reshape(-1, n_channels).T.copy()
    return AudioClip(samples=samples, sample_rate_hz=sample_rate, source_path=path)


def write_wav(path, samples, sample_rate_hz):
    """Write PCM16 WAV. samples: [channels, n] or [n], values clipped to [-1, 1)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    pcm = np.clip(np.round(samples * PCM16_SCALE), -32768, 32767).astype("<i2")
    interleaved = pcm.T.reshape(-1).tobytes()
    n_channels = samples.shape[0]
    byte_rate = sample_rate_hz * n_channels * 2
    with open(str(path), "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 36 + len(interleaved)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(
            struct.pack(
                "<IHHIIHH", 16, _FMT_PCM, n_channels, sample_rate_hz,
                byte_rate, n_channels * 2, 16,
            )
        )
        fh.write(b"data")
        fh.write(struct.pack("<I", len(interleaved)))
        fh.write(interleaved)


def downmix(clip):
    """Average all channels into a mono 1D signal."""
    return clip.samples.mean(axis=0)
