"""Core hologram data types, patch grid split/merge and on-disk formats.

Conventions used throughout the toolkit:

- channel order is R, G, B paired with the 639/515/473 nm primaries;
- stored phases are wrapped to [0, 2*pi) radians;
- learning and metrics operate on the normalized view phase/(2*pi) in [0, 1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    IntegrityError,
    InvalidGridError,
    StructuralError,
    UnsupportedVersionError,
    ValidationError,
)

TWO_PI = 2.0 * np.pi

HOLO_MAGIC = b"PHOL"
HOLO_VERSION = 1
_HOLO_HEADER = struct.Struct("<4sHII3dd")
HOLO_HEADER_BYTES = _HOLO_HEADER.size


def wrap_phase(phases: np.ndarray) -> np.ndarray:
    """Wrap phase values (radians) to the canonical interval [0, 2*pi).

    Adding any multiple of 2*pi to the input maps to the same canonical
    value up to floating-point rounding.
    """
    out = np.mod(np.asarray(phases, dtype=np.float64), TWO_PI)
    # np.mod of a tiny negative value can round up to exactly 2*pi.
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class OpticalConfig:
    """Optical parameters of the simulated holographic display.

    Parameters
    ----------
    wavelengths : tuple of float
        Wavelengths in meters for the (R, G, B) channels, in that order.
    pixel_pitch : float
        Center-to-center pixel spacing of the modulator, in meters.
    eval_distances : tuple of float
        Propagation distances in meters at which reconstructions are
        evaluated.
    """

    wavelengths: tuple[float, float, float] = (639e-9, 515e-9, 473e-9)
    pixel_pitch: float = 3.74e-6
    eval_distances: tuple[float, ...] = (-2.5e-3, 0.0, 2.5e-3)

    def __post_init__(self):
        if len(self.wavelengths) != 3 or any(w <= 0 for w in self.wavelengths):
            raise ValidationError("wavelengths must be three positive lengths in meters")
        if self.pixel_pitch <= 0:
            raise ValidationError("pixel_pitch must be positive")
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))
        object.__setattr__(self, "eval_distances", tuple(float(d) for d in self.eval_distances))


@dataclass(frozen=True)
class PhaseHologram:
    """A three-channel phase-only hologram.

    ``phases`` has shape (3, H, W) with values in [0, 2*pi) radians.
    """

    phases: np.ndarray
    config: OpticalConfig = field(default_factory=OpticalConfig)

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=np.float64)
        if phases.ndim != 3 or phases.shape[0] != 3:
            raise StructuralError(f"expected phases of shape (3, H, W), got {phases.shape}")
        if phases.shape[1] < 1 or phases.shape[2] < 1:
            raise StructuralError("hologram must have positive height and width")
        if not np.isfinite(phases).all():
            raise ValidationError("phases contain non-finite values")
        if phases.min() < 0.0 or phases.max() >= TWO_PI:
            raise ValidationError("phases must lie in [0, 2*pi); use PhaseHologram.from_phases to wrap")
        object.__setattr__(self, "phases", phases)

    @classmethod
    def from_phases(cls, phases: np.ndarray, config: OpticalConfig | None = None) -> "PhaseHologram":
        """Build a hologram from raw radian phases, wrapping them to [0, 2*pi)."""
        return cls(wrap_phase(phases), config or OpticalConfig())

    @property
    def height(self) -> int:
        return self.phases.shape[1]

    @property
    def width(self) -> int:
        return self.phases.shape[2]

    def normalized(self) -> np.ndarray:
        """Return phases scaled to [0, 1); this is the view training and metrics use."""
        return self.phases / TWO_PI


@dataclass(frozen=True)
class PatchGrid:
    """Raster-order partition of a hologram into equally sized patches.

    When the patch size does not divide the hologram size, the hologram is
    padded by edge replication to the next multiple; ``pad_mask`` flags the
    padded pixels so they can be dropped after merging.
    """

    patch_h: int
    patch_w: int
    height: int
    width: int

    @classmethod
    def for_shape(cls, height: int, width: int, patch_h: int, patch_w: int) -> "PatchGrid":
        if patch_h < 1 or patch_w < 1:
            raise InvalidGridError("patch size must be positive")
        if patch_h > height or patch_w > width:
            raise InvalidGridError(
                f"patch {patch_h}x{patch_w} larger than hologram {height}x{width}"
            )
        return cls(patch_h=patch_h, patch_w=patch_w, height=height, width=width)

    @property
    def rows(self) -> int:
        return -(-self.height // self.patch_h)

    @property
    def cols(self) -> int:
        return -(-self.width // self.patch_w)

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols

    @property
    def padded_height(self) -> int:
        return self.rows * self.patch_h

    @property
    def padded_width(self) -> int:
        return self.cols * self.patch_w

    @property
    def is_padded(self) -> bool:
        return self.padded_height != self.height or self.padded_width != self.width

    def pad_mask(self) -> np.ndarray:
        """Boolean (padded_height, padded_width) map, True on padded pixels."""
        mask = np.ones((self.padded_height, self.padded_width), dtype=bool)
        mask[: self.height, : self.width] = False
        return mask

    def patch_pad_mask(self, index: int) -> np.ndarray:
        """Padded-pixel flags for one patch, shape (patch_h, patch_w)."""
        r, c = divmod(index, self.cols)
        y0, x0 = r * self.patch_h, c * self.patch_w
        return self.pad_mask()[y0 : y0 + self.patch_h, x0 : x0 + self.patch_w]


def _as_channel_array(holo) -> np.ndarray:
    arr = holo.phases if isinstance(holo, PhaseHologram) else np.asarray(holo, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise StructuralError(f"expected a (3, H, W) array, got {arr.shape}")
    return arr


def split_patches(holo, grid: PatchGrid) -> list[np.ndarray]:
    """Split a hologram (or raw (3, H, W) array) into raster-order patches.

    Edge replication fills the padded band when the grid does not divide the
    hologram exactly; every original pixel appears in exactly one patch.
    """
    arr = _as_channel_array(holo)
    if arr.shape[1] != grid.height or arr.shape[2] != grid.width:
        raise InvalidGridError(
            f"grid built for {grid.height}x{grid.width}, hologram is {arr.shape[1]}x{arr.shape[2]}"
        )
    pad_h = grid.padded_height - grid.height
    pad_w = grid.padded_width - grid.width
    if pad_h or pad_w:
        arr = np.pad(arr, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    patches = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            y0, x0 = r * grid.patch_h, c * grid.patch_w
            patches.append(arr[:, y0 : y0 + grid.patch_h, x0 : x0 + grid.patch_w].copy())
    return patches


def merge_patches(patches, grid: PatchGrid) -> np.ndarray:
    """Reassemble raster-order patches into a (3, H, W) array.

    Exact inverse of :func:`split_patches` on the unpadded region; the padded
    band is discarded.
    """
    patches = list(patches)
    if len(patches) != grid.patch_count:
        raise StructuralError(f"expected {grid.patch_count} patches, got {len(patches)}")
    canvas = np.empty((3, grid.padded_height, grid.padded_width), dtype=np.float64)
    for i, patch in enumerate(patches):
        patch = np.asarray(patch, dtype=np.float64)
        if patch.shape != (3, grid.patch_h, grid.patch_w):
            raise StructuralError(
                f"patch {i} has shape {patch.shape}, expected (3, {grid.patch_h}, {grid.patch_w})"
            )
        r, c = divmod(i, grid.cols)
        y0, x0 = r * grid.patch_h, c * grid.patch_w
        canvas[:, y0 : y0 + grid.patch_h, x0 : x0 + grid.patch_w] = patch
    return canvas[:, : grid.height, : grid.width].copy()


# ---------------------------------------------------------------------------
# .holo container: raw phases with optical metadata
# ---------------------------------------------------------------------------

def save_holo(holo: PhaseHologram, path) -> None:
    """Write a hologram to a ``.holo`` file.

    Layout (little-endian): magic "PHOL", version u16, H u32, W u32, three
    wavelengths f64 (meters, RGB order), pixel_pitch f64 (meters), then
    3*H*W float32 phases in radians, row-major, channel-planar.
    """
    header = _HOLO_HEADER.pack(
        HOLO_MAGIC,
        HOLO_VERSION,
        holo.height,
        holo.width,
        *holo.config.wavelengths,
        holo.config.pixel_pitch,
    )
    payload = holo.phases.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def load_holo(path, eval_distances: tuple[float, ...] | None = None) -> PhaseHologram:
    """Read a ``.holo`` file written by :func:`save_holo`.

    The file does not carry evaluation distances; the defaults (or the
    explicit ``eval_distances``) are attached to the returned config.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HOLO_HEADER.size:
        raise IntegrityError("file too short for .holo header", offset=len(data))
    magic, version, h, w, wl_r, wl_g, wl_b, pitch = _HOLO_HEADER.unpack_from(data, 0)
    if magic != HOLO_MAGIC:
        raise IntegrityError("bad .holo magic", offset=0)
    if version != HOLO_VERSION:
        raise UnsupportedVersionError(f"unsupported .holo version {version}")
    expected = _HOLO_HEADER.size + 3 * h * w * 4
    if len(data) != expected:
        raise IntegrityError(
            f"expected {expected} bytes, file has {len(data)}", offset=min(len(data), expected)
        )
    phases = np.frombuffer(data, dtype="<f4", offset=_HOLO_HEADER.size).astype(np.float64)
    phases = phases.reshape(3, h, w)
    cfg = OpticalConfig(
        wavelengths=(wl_r, wl_g, wl_b),
        pixel_pitch=pitch,
        eval_distances=eval_distances if eval_distances is not None else OpticalConfig().eval_distances,
    )
    return PhaseHologram.from_phases(phases, cfg)


# ---------------------------------------------------------------------------
# 16-bit PNG interchange: one grayscale image per channel
# ---------------------------------------------------------------------------

_PNG_SUFFIXES = ("r", "g", "b")


def export_phase_pngs(holo: PhaseHologram, directory, stem: str = "phase") -> list[str]:
    """Write one 16-bit grayscale PNG per channel; pixel = phase/(2*pi)*65535."""
    import os

    paths = []
    for ch, suffix in enumerate(_PNG_SUFFIXES):
        quantized = np.round(holo.phases[ch] / TWO_PI * 65535.0).astype(np.uint16)
        img = Image.fromarray(quantized)  # uint16 maps to 16-bit grayscale
        path = os.path.join(str(directory), f"{stem}_{suffix}.png")
        img.save(path)
        paths.append(path)
    return paths


def import_phase_pngs(paths, config: OpticalConfig | None = None) -> PhaseHologram:
    """Read three 16-bit grayscale PNGs (R, G, B order); phase = pixel/65535*2*pi."""
    if len(paths) != 3:
        raise StructuralError(f"expected 3 channel PNGs, got {len(paths)}")
    channels = []
    for path in paths:
        with Image.open(path) as img:
            arr = np.asarray(img, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"{path} is not single-channel grayscale")
        if arr.max() > 65535 or arr.min() < 0:
            raise ValidationError(f"{path} exceeds the 16-bit range")
        channels.append(arr / 65535.0 * TWO_PI)
    shapes = {c.shape for c in channels}
    if len(shapes) != 1:
        raise StructuralError(f"channel PNGs disagree on size: {sorted(shapes)}")
    return PhaseHologram.from_phases(np.stack(channels, axis=0), config or OpticalConfig())
