import numpy as np
import pytest

from holocomp.hologram import OpticalConfig, PhaseHologram


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def config():
    return OpticalConfig()


def band_limited_field(rng, size, band=None):
    """Random complex field with spectrum confined to a low-frequency box."""
    band = band or max(2, size // 8)
    spectrum = np.zeros((size, size), dtype=np.complex128)
    block = rng.standard_normal((2 * band, 2 * band)) + 1j * rng.standard_normal((2 * band, 2 * band))
    spectrum[:band, :band] = block[:band, :band]
    spectrum[:band, -band:] = block[:band, band:]
    spectrum[-band:, :band] = block[band:, :band]
    spectrum[-band:, -band:] = block[band:, band:]
    return np.fft.ifft2(spectrum)


@pytest.fixture
def smooth_image():
    """Deterministic smooth 64x64 RGB intensity image in [0, 1]."""
    size = 64
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.stack([
        0.5 + 0.4 * np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy),
        0.4 + 0.5 * np.exp(-((xx - 0.4) ** 2 + (yy - 0.6) ** 2) / 0.05),
        0.3 + 0.6 * xx * yy,
    ])
    return np.clip(img, 0.0, 1.0)


def _random_hologram(rng, config, size):
    phases = np.empty((3, size, size))
    for ch in range(3):
        field = band_limited_field(rng, size)
        phases[ch] = np.mod(np.angle(field), 2 * np.pi)
    phases[phases >= 2 * np.pi] = 0.0
    return PhaseHologram(phases, config)


@pytest.fixture
def random_hologram(rng, config):
    """Small hologram of random (but band-limited, hence plausible) phases."""
    return _random_hologram(rng, config, 32)


@pytest.fixture
def recon_hologram(rng, config):
    """Large enough that the default +-2.5 mm planes stay inside the
    propagation sampling bound."""
    return _random_hologram(rng, config, 128)
