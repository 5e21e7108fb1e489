"""STFT, mel filterbank, log-mel spectrograms and sliding-window framing.

All intermediate math runs in float64; spectrogram payloads are stored as
float32. Three preprocessing profiles cover the pipeline's model paths.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ShapeError

AMIN = 1e-10
DB_FLOOR = 10.0 * np.log10(AMIN)  # -100 dB


@dataclass(frozen=True)
class StftConfig:
    n_fft: int
    hop_length: int
    center: bool = True

    def __post_init__(self):
        if self.n_fft < 2 or (self.n_fft & (self.n_fft - 1)) != 0:
            raise ConfigurationError(f"n_fft must be a power of two, got {self.n_fft}")
        if not (0 < self.hop_length <= self.n_fft):
            raise ConfigurationError(
                f"hop_length must be in (0, n_fft], got {self.hop_length}"
            )


@dataclass(frozen=True)
class MelConfig:
    n_mels: int
    f_min: float = 0.0
    f_max: float = 8000.0
    scale: str = "slaney"
    normalization: str = "slaney-area"

    def __post_init__(self):
        if self.n_mels < 1:
            raise ConfigurationError("n_mels must be >= 1")
        if not (0.0 <= self.f_min < self.f_max):
            raise ConfigurationError("need 0 <= f_min < f_max")
        if self.scale not in ("slaney", "htk"):
            raise ConfigurationError(f"unknown mel scale {self.scale!r}")
        if self.normalization not in ("slaney-area", "none"):
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class Spectrogram:
    data: np.ndarray  # [n_mels, n_frames], float32, dB
    mel_config: MelConfig
    stft_config: StftConfig
    sample_rate_hz: int

    @property
    def n_mels(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class WindowBatch:
    data: np.ndarray  # [n_windows, n_mels * context]
    context: int

    @property
    def n_windows(self):
        return self.data.shape[0]


def hann_window(n_fft):
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)


def stft(signal, cfg):
    """Short-time Fourier transform, non-negative frequency bins only.

    Returns a complex array [n_fft/2+1, n_frames] with
    n_frames = 1 + floor(len/hop) when center=True (reflect padding).
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size == 0:
        raise ShapeError("stft expects a non-empty 1D signal")
    if cfg.center:
        pad = cfg.n_fft // 2
        if signal.size > 1:
            signal = np.pad(signal, pad, mode="reflect")
        else:
            signal = np.pad(signal, pad, mode="edge")
    if signal.size < cfg.n_fft:
        signal = np.pad(signal, (0, cfg.n_fft - signal.size))
    frames = sliding_window_view(signal, cfg.n_fft)[:: cfg.hop_length]
    return np.fft.rfft(frames * hann_window(cfg.n_fft), axis=1).T


def power_spectrogram(stft_out):
    """Element-wise squared magnitude |X|^2."""
    return np.abs(stft_out) ** 2


def _hz_to_mel(freq, scale):
    freq = np.asarray(freq, dtype=np.float64)
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + freq / 700.0)
    # slaney: linear below 1 kHz, log above
    mel = 3.0 * freq / 200.0
    log_region = freq >= 1000.0
    logstep = np.log(6.4) / 27.0
    mel = np.where(
        log_region, 15.0 + np.log(np.maximum(freq, 1e-12) / 1000.0) / logstep, mel
    )
    return mel


def _mel_to_hz(mel, scale):
    mel = np.asarray(mel, dtype=np.float64)
    if scale == "htk":
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    freq = 200.0 * mel / 3.0
    log_region = mel >= 15.0
    logstep = np.log(6.4) / 27.0
    freq = np.where(log_region, 1000.0 * np.exp(logstep * (mel - 15.0)), freq)
    return freq


def mel_filterbank(sample_rate_hz, n_fft, cfg):
    """Triangular mel filters, [n_mels, n_fft/2+1].

    'slaney-area' normalization scales each row by 2/(f_upper - f_lower);
    'none' scales each row to unit peak.
    """
    if cfg.f_max > sample_rate_hz / 2:
        raise ConfigurationError("f_max above Nyquist")
    mel_pts = np.linspace(
        _hz_to_mel(cfg.f_min, cfg.scale), _hz_to_mel(cfg.f_max, cfg.scale),
        cfg.n_mels + 2,
    )
    hz_pts = _mel_to_hz(mel_pts, cfg.scale)
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft

    lower = hz_pts[:-2][:, None]
    apex = hz_pts[1:-1][:, None]
    upper = hz_pts[2:][:, None]
    up = (bin_freqs[None, :] - lower) / np.maximum(apex - lower, 1e-12)
    down = (upper - bin_freqs[None, :]) / np.maximum(upper - apex, 1e-12)
    weights = np.maximum(np.minimum(up, down), 0.0)

    peaks = weights.max(axis=1)
    if np.any(peaks <= 0.0):
        bad = int(np.argmin(peaks))
        raise ConfigurationError(
            f"mel filter {bad} has no FFT-bin support; reduce n_mels"
        )
    if cfg.normalization == "slaney-area":
        weights *= (2.0 / (hz_pts[2:] - hz_pts[:-2]))[:, None]
    else:
        weights /= peaks[:, None]
    return weights


def log_mel(power_spec, filterbank, mel_config, stft_config, sample_rate_hz):
    """Apply the filterbank and convert to dB: 10*log10(max(., 1e-10))."""
    if filterbank.shape[1] != power_spec.shape[0]:
        raise ShapeError(
            f"filterbank bins {filterbank.shape[1]} != "
            f"spectrum bins {power_spec.shape[0]}"
        )
    mel_power = filterbank @ power_spec
    data = 10.0 * np.log10(np.maximum(mel_power, AMIN))
    return Spectrogram(
        data=data.astype(np.float32),
        mel_config=mel_config,
        stft_config=stft_config,
        sample_rate_hz=sample_rate_hz,
    )


def log_mel_spectrogram(signal, sample_rate_hz, stft_cfg, mel_cfg):
    """Full chain: STFT -> power -> mel -> dB."""
    spec = power_spectrogram(stft(signal, stft_cfg))
    fb = mel_filterbank(sample_rate_hz, stft_cfg.n_fft, mel_cfg)
    return log_mel(spec, fb, mel_cfg, stft_cfg, sample_rate_hz)


def frame_windows(spec, context):
    """Concatenate `context` consecutive frames into flat windows.

    Window i is frames i..i+context-1 flattened frame-major;
    n_windows = n_frames - context + 1.
    """
    if context < 1:
        raise ConfigurationError("context must be >= 1")
    data = spec.data if isinstance(spec, Spectrogram) else np.asarray(spec)
    if data.shape[1] < context:
        raise ShapeError(
            f"need at least {context} frames, spectrogram has {data.shape[1]}"
        )
    # [n_mels, n_wins, context] -> [n_wins, context, n_mels] -> flat
    view = sliding_window_view(data, context, axis=1)
    windows = np.ascontiguousarray(view.transpose(1, 2, 0)).reshape(
        view.shape[1], -1
    )
    return WindowBatch(data=windows.astype(np.float64), context=context)


def normalize_spectrogram(spec, mode="minmax"):
    """Per-clip normalization for the CNN-style path."""
    data = spec.data.astype(np.float64)
    if mode == "minmax":
        lo, hi = data.min(), data.max()
        norm = (data - lo) / max(hi - lo, 1e-12)
    elif mode == "zscore":
        norm = (data - data.mean()) / max(data.std(), 1e-12)
    else:
        raise ConfigurationError(f"unknown normalization mode {mode!r}")
    return Spectrogram(
        data=norm.astype(np.float32),
        mel_config=spec.mel_config,
        stft_config=spec.stft_config,
        sample_rate_hz=spec.sample_rate_hz,
    )


# --------------------------------------------------------------- profiles

@dataclass(frozen=True)
class PreprocessProfile:
    name: str
    sample_rate_hz: int
    stft: StftConfig
    mel: MelConfig
    context: int = 0         # 0: no windowing
    target_frames: int = 0   # 0: keep natural frame count
    normalize: str = ""      # "": no per-clip normalization


PROFILES = {
    # autoencoder path: 64 x 313 for 10 s @ 16 kHz, context-5 windows
    "ae": PreprocessProfile(
        name="ae",
        sample_rate_hz=16000,
        stft=StftConfig(n_fft=1024, hop_length=512, center=True),
        mel=MelConfig(n_mels=64, f_min=0.0, f_max=8000.0),
        context=5,
    ),
    # CNN path: 128 x 1251, per-clip min-max normalized
    "cnn": PreprocessProfile(
        name="cnn",
        sample_rate_hz=16000,
        stft=StftConfig(n_fft=1024, hop_length=128, center=True),
        mel=MelConfig(n_mels=128, f_min=0.0, f_max=8000.0),
        normalize="minmax",
    ),
    # transformer path: padded/trimmed to a 128 x 1000 target
    "ast": PreprocessProfile(
        name="ast",
        sample_rate_hz=16000,
        stft=StftConfig(n_fft=512, hop_length=160, center=False),
        mel=MelConfig(n_mels=128, f_min=0.0, f_max=8000.0),
        target_frames=1000,
    ),
}


def profile_spectrogram(signal, sample_rate_hz, profile, normalize=None):
    """Run a preprocessing profile on a mono signal.

    Rejects signals whose sample rate differs from the profile's; no
    resampling is done. The AST profile pads (dB floor) or trims to its
    fixed frame target.
    """
    if isinstance(profile, str):
        profile = PROFILES[profile]
    if sample_rate_hz != profile.sample_rate_hz:
        raise ConfigurationError(
            f"profile {profile.name!r} expects {profile.sample_rate_hz} Hz, "
            f"got {sample_rate_hz} Hz (resampling not supported)"
        )
    spec = log_mel_spectrogram(signal, sample_rate_hz, profile.stft, profile.mel)
    if profile.target_frames:
        data = spec.data
        if data.shape[1] > profile.target_frames:
            data = data[:, : profile.target_frames]
        elif data.shape[1] < profile.target_frames:
            pad = np.full(
                (data.shape[0], profile.target_frames - data.shape[1]),
                DB_FLOOR, dtype=np.float32,
            )
            data = np.concatenate([data, pad], axis=1)
        spec = Spectrogram(data, spec.mel_config, spec.stft_config, sample_rate_hz)
    mode = normalize if normalize is not None else profile.normalize
    if mode:
        spec = normalize_spectrogram(spec, mode)
    return spec


def pooled_embedding(spec):
    """Per-clip mean+std pooling over time: [2 * n_mels] feature vector."""
    data = spec.data if isinstance(spec, Spectrogram) else np.asarray(spec)
    return np.concatenate([data.mean(axis=1), data.std(axis=1)]).astype(np.float64)


# ------------------------------------------------------------ persistence

_SPEC_MAGIC = b"SFSG"


def spectrogram_to_bytes(spec):
    """Binary container: magic, version, dims, row-major float32."""
    head = _SPEC_MAGIC + struct.pack("<BII", 1, spec.n_mels, spec.n_frames)
    return head + spec.data.astype("<f4").tobytes()


def spectrogram_meta(spec):
    return {
        "n_mels": spec.n_mels,
        "n_frames": spec.n_frames,
        "n_fft": spec.stft_config.n_fft,
        "hop_length": spec.stft_config.hop_length,
        "center": int(spec.stft_config.center),
        "f_min": spec.mel_config.f_min,
        "f_max": spec.mel_config.f_max,
        "mel_scale": spec.mel_config.scale,
        "mel_normalization": spec.mel_config.normalization,
        "sample_rate_hz": spec.sample_rate_hz,
    }


def spectrogram_from_bytes(payload, meta):
    if payload[:4] != _SPEC_MAGIC:
        raise ShapeError("not a spectrogram container")
    _, n_mels, n_frames = struct.unpack("<BII", payload[4:13])
    data = np.frombuffer(payload[13:], dtype="<f4").reshape(n_mels, n_frames)
    return Spectrogram(
        data=data.copy(),
        mel_config=MelConfig(
            n_mels=n_mels,
            f_min=float(meta["f_min"]),
            f_max=float(meta["f_max"]),
            scale=str(meta["mel_scale"]),
            normalization=str(meta["mel_normalization"]),
        ),
        stft_config=StftConfig(
            n_fft=int(meta["n_fft"]),
            hop_length=int(meta["hop_length"]),
            center=bool(int(meta["center"])),
        ),
        sample_rate_hz=int(meta["sample_rate_hz"]),
    )
