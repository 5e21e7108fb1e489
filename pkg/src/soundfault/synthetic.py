"""Synthetic machine-sound dataset for end-to-end testing.

Normal clips are a jittered harmonic tone in noise; anomalies are either
a detuned fundamental or the same tone with injected impulsive clicks.
Small, fully seeded, and written as ordinary PCM16 WAV files so the whole
pipeline can run against them.
"""

from pathlib import Path

import numpy as np

from .audio_io import write_wav
from .evaluation import ManifestRecord, write_manifest

BASE_F0_HZ = 180.0
DETUNE_FACTOR = 1.35
N_HARMONICS = 6
NOISE_SIGMA = 0.005


def _harmonic_tone(rng, duration, sample_rate_hz, f0):
    t = np.arange(int(duration * sample_rate_hz)) / sample_rate_hz
    signal = np.zeros_like(t)
    for k in range(1, N_HARMONICS + 1):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += (0.5 / k) * np.sin(2.0 * np.pi * k * f0 * t + phase)
    signal += rng.normal(0.0, NOISE_SIGMA, size=t.size)
    return 0.5 * signal / np.max(np.abs(signal))


def normal_signal(rng, duration=2.0, sample_rate_hz=16000):
    f0 = BASE_F0_HZ + rng.uniform(-3.0, 3.0)
    return _harmonic_tone(rng, duration, sample_rate_hz, f0)


def detuned_signal(rng, duration=2.0, sample_rate_hz=16000):
    f0 = (BASE_F0_HZ + rng.uniform(-3.0, 3.0)) * DETUNE_FACTOR
    return _harmonic_tone(rng, duration, sample_rate_hz, f0)


def click_signal(rng, duration=2.0, sample_rate_hz=16000, n_clicks=25):
    signal = normal_signal(rng, duration, sample_rate_hz)
    for _ in range(n_clicks):
        pos = rng.integers(0, signal.size - 40)
        click = 0.8 * np.exp(-np.arange(40) / 6.0) * rng.choice([-1.0, 1.0])
        signal[pos : pos + 40] += click
    return np.clip(signal, -1.0, 1.0)


def generate_dataset(out_dir, n_normal=200, n_anomalous=50, duration=2.0,
                     sample_rate_hz=16000, seed=0, machine_id="syn_00"):
    """Write WAV clips plus a manifest.csv; returns (manifest_path, records)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []

    for i in range(n_normal):
        clip_id = f"normal_{i:04d}"
        path = out_dir / f"{clip_id}.wav"
        write_wav(path, normal_signal(rng, duration, sample_rate_hz), sample_rate_hz)
        records.append(
            ManifestRecord(clip_id, str(path), "fan", machine_id, "normal")
        )
    for i in range(n_anomalous):
        clip_id = f"anomaly_{i:04d}"
        path = out_dir / f"{clip_id}.wav"
        maker = detuned_signal if i % 2 == 0 else click_signal
        write_wav(path, maker(rng, duration, sample_rate_hz), sample_rate_hz)
        records.append(
            ManifestRecord(clip_id, str(path), "fan", machine_id, "anomalous")
        )

    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest_path, records)
    return manifest_path, records
