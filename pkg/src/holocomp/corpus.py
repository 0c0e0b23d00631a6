"""Bundled test images and corpus building.

Ten procedurally generated RGB images spanning very low to very high
spatial frequencies stand in for photographic test material; everything is
deterministic in the image index and requested size, so corpora are
reproducible byte-for-byte.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import ValidationError
from .hologram import OpticalConfig, save_holo
from .optics import synthesize_hologram

CORPUS_SIZE = 10


def _grids(size: int):
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    return xx, yy


def _radial_gradient(size, rng):
    xx, yy = _grids(size)
    r = np.hypot(xx - 0.5, yy - 0.5) / np.sqrt(0.5)
    return np.stack([1.0 - r, 0.3 + 0.7 * xx, 0.2 + 0.8 * yy])


def _gaussian_blobs(size, rng):
    xx, yy = _grids(size)
    img = np.zeros((3, size, size))
    for _ in range(6):
        cx, cy = rng.uniform(0.1, 0.9, 2)
        s = rng.uniform(0.02, 0.08)
        amp = rng.uniform(0.4, 1.0, 3)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s))
        img += amp[:, None, None] * blob
    return img / img.max()


def _gratings(size, rng):
    xx, yy = _grids(size)
    return np.stack([
        0.5 + 0.5 * np.sin(2 * np.pi * 3 * xx),
        0.5 + 0.5 * np.sin(2 * np.pi * 5 * yy),
        0.5 + 0.5 * np.sin(2 * np.pi * 4 * (xx + yy)),
    ])


def _rings(size, rng):
    xx, yy = _grids(size)
    r2 = (xx - 0.5) ** 2 + (yy - 0.5) ** 2
    return np.stack([
        0.5 + 0.5 * np.cos(2 * np.pi * 20 * r2),
        0.5 + 0.5 * np.cos(2 * np.pi * 35 * r2),
        0.5 + 0.5 * np.cos(2 * np.pi * 50 * r2),
    ])


def _stripes(size, rng):
    xx, yy = _grids(size)
    return np.stack([
        0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 6 * (xx - yy))),
        0.5 + 0.5 * np.sin(2 * np.pi * 12 * (xx + 0.3 * yy)),
        0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 18 * yy)),
    ])


def _pink_noise(size, rng):
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    img = np.empty((3, size, size))
    for ch in range(3):
        spectrum = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)))
        spectrum /= f
        plane = np.fft.ifft2(spectrum).real
        plane -= plane.min()
        img[ch] = plane / plane.max()
    return img


def _bars(size, rng):
    xx, yy = _grids(size)
    img = 0.15 * np.ones((3, size, size))
    for _ in range(12):
        x0, y0 = rng.uniform(0, 0.8, 2)
        w, h = rng.uniform(0.05, 0.25, 2)
        color = rng.uniform(0.3, 1.0, 3)
        box = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
        img[:, box] = color[:, None]
    return img


def _checker_blend(size, rng):
    xx, yy = _grids(size)
    img = np.empty((3, size, size))
    for ch, cells in enumerate((8, 16, 32)):
        cx = np.floor(xx * cells).astype(int)
        cy = np.floor(yy * cells).astype(int)
        img[ch] = 0.2 + 0.8 * ((cx + cy) % 2)
    return img


def _cells(size, rng):
    xx, yy = _grids(size)
    points = rng.uniform(0, 1, (14, 2))
    values = rng.uniform(0.1, 1.0, (14, 3))
    d = (xx[None] - points[:, 0, None, None]) ** 2 + (yy[None] - points[:, 1, None, None]) ** 2
    nearest = np.argmin(d, axis=0)
    return np.moveaxis(values[nearest], -1, 0)


def _mixed(size, rng):
    xx, yy = _grids(size)
    base = 0.3 + 0.4 * xx
    blob = np.exp(-((xx - 0.35) ** 2 + (yy - 0.4) ** 2) / 0.02)
    stripe = 0.5 + 0.5 * np.sin(2 * np.pi * 10 * yy)
    edge = (xx > 0.7).astype(float)
    return np.clip(np.stack([
        base + 0.5 * blob,
        0.6 * stripe * (1 - edge) + 0.9 * edge,
        base[::-1] + 0.3 * blob,
    ]), 0, 1)


_GENERATORS = (
    _radial_gradient,
    _gaussian_blobs,
    _gratings,
    _rings,
    _stripes,
    _pink_noise,
    _bars,
    _checker_blend,
    _cells,
    _mixed,
)


def test_image(index: int, size: int) -> np.ndarray:
    """Deterministic RGB test image ``index`` in [0, 10) at ``size``^2,
    values in [0.05, 1], ordered roughly from low- to high-frequency content.

    A small intensity floor keeps every channel lit everywhere, the way
    photographic material is; truly black regions turn retrieved hologram
    phases into speckle, which is not what the corpus is meant to probe.
    """
    if not 0 <= index < len(_GENERATORS):
        raise ValidationError(f"test image index must be in [0, {len(_GENERATORS)})")
    if size < 2:
        raise ValidationError("image size must be at least 2")
    rng = np.random.default_rng(1000 + index)
    img = _GENERATORS[index](size, rng)
    return np.clip(0.05 + 0.95 * img, 0.05, 1.0)


def save_image_png(img: np.ndarray, path) -> None:
    """Write a (3, H, W) [0, 1] image as 8-bit RGB PNG."""
    arr = np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(np.moveaxis(arr, 0, -1), mode="RGB").save(path)


def build_corpus(directory, count: int = CORPUS_SIZE, size: int = 512,
                 distance: float = 2.5e-3, refine_iters: int = 30,
                 config: OpticalConfig | None = None) -> list[str]:
    """Generate ``count`` test images and their holograms under ``directory``.

    Writes ``images/img_NN.png`` plus ``holo_NN.holo`` files and returns the
    hologram paths. Deterministic for fixed arguments.
    """
    if count < 1 or count > len(_GENERATORS):
        raise ValidationError(f"count must be in [1, {len(_GENERATORS)}]")
    if size % 2:
        raise ValidationError("hologram size must be even")
    config = config or OpticalConfig()
    os.makedirs(directory, exist_ok=True)
    img_dir = os.path.join(str(directory), "images")
    os.makedirs(img_dir, exist_ok=True)
    paths = []
    for i in range(count):
        img = test_image(i, size)
        save_image_png(img, os.path.join(img_dir, f"img_{i:02d}.png"))
        holo = synthesize_hologram(img, config, scene_distance=distance,
                                   refine_iters=refine_iters)
        path = os.path.join(str(directory), f"holo_{i:02d}.holo")
        save_holo(holo, path)
        paths.append(path)
    return paths
