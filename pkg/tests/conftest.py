import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq_hz, duration_s=1.0, sample_rate_hz=16000, amplitude=0.5):
    t = np.arange(int(duration_s * sample_rate_hz)) / sample_rate_hz
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t)
