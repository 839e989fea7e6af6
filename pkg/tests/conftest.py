import numpy as np
import pytest

from gaitpair.ingest import AccelSeries, synth_corpus, synth_gait, synth_subject


def sine_series(freq_hz, amplitude=1.0, rate_hz=50.0, seconds=20.0, offset=0.0):
    t = np.arange(int(seconds * rate_hz)) / rate_hz
    z = offset + amplitude * np.sin(2 * np.pi * freq_hz * t)
    acc = np.column_stack([np.zeros_like(t), np.zeros_like(t), z])
    return AccelSeries(t, acc, rate_hz)


@pytest.fixture(scope="session")
def walk():
    return synth_gait(1.0, 16, 50.0, seed=3, shape_jitter=0.2, noise_sd=0.05)


@pytest.fixture(scope="session")
def subject():
    return synth_subject("s01", ("waist", "shin", "chest"), seed=5)


@pytest.fixture(scope="session")
def corpus():
    return synth_corpus(4, ("waist", "shin", "chest"), seed=9)
