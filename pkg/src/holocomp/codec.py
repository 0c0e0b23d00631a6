"""Bit-exact container for compressed holograms (``.hinr``) and the
compression-ratio accounting.

The container stores one flat parameter vector per patch, in raster order,
at a declared per-value precision (float32 by default, float16 optional),
framed by a self-describing header and a CRC-32 trailer. The byte layout is
documented in ``docs/format.md``.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import (
    IntegrityError,
    StructuralError,
    UnsupportedVersionError,
    ValidationError,
)
from .hologram import (
    HOLO_HEADER_BYTES,
    TWO_PI,
    OpticalConfig,
    PatchGrid,
    PhaseHologram,
    merge_patches,
)
from .nn import InrArchitecture, InrModel, parameter_count
from .training import patch_coordinates

HINR_MAGIC = b"HINR"
HINR_VERSION = 1

PRECISIONS = {"f32": ("<f4", 4), "f16": ("<f2", 2)}

_KIND_CODES = {nn.KIND_MLP: 0, nn.KIND_SIREN: 1, nn.KIND_FILM_SIREN: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

_FIXED = struct.Struct("<4sHBBIIHHHHH")  # magic, version, kind, precision,
                                         # H, W, patch_h, patch_w, rows, cols, n_hidden
_ARCH_TAIL = struct.Struct("<dHH")        # omega0, latent_dim, mapping_hidden
_RUN = struct.Struct("<q")                # run seed
_OPTICS = struct.Struct("<3ddH")          # wavelengths, pixel_pitch, n_eval_distances
_PAYLOAD_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")


def compression_ratio(arch: InrArchitecture, patch_size: tuple[int, int] | int) -> int:
    """Parameters per stored phase sample, as a percent rounded to nearest.

    ratio = parameter_count(arch) / (3 * patch_h * patch_w) * 100. The
    accounting assumes the same per-value precision for phase samples and
    weights, which makes it precision-agnostic.
    """
    return int(compression_ratio_exact(arch, patch_size) + 0.5)


def compression_ratio_exact(arch: InrArchitecture, patch_size: tuple[int, int] | int) -> float:
    """Unrounded percent version of :func:`compression_ratio`."""
    if isinstance(patch_size, int):
        patch_h = patch_w = patch_size
    else:
        patch_h, patch_w = patch_size
    samples = 3 * patch_h * patch_w
    return 100.0 * parameter_count(arch) / samples


def bytes_on_disk_ratio(container_bytes: int, height: int, width: int) -> float:
    """Honest percent ratio: container size (header included) against the
    raw ``.holo`` size of the same hologram (f32 samples plus its header)."""
    holo_bytes = HOLO_HEADER_BYTES + 3 * height * width * 4
    return 100.0 * container_bytes / holo_bytes


@dataclass(frozen=True)
class CodecInfo:
    """Everything the container header declares."""

    arch: InrArchitecture
    grid: PatchGrid
    config: OpticalConfig
    precision: str = "f32"
    seed: int = 0

    @property
    def payload_bytes(self) -> int:
        return self.grid.patch_count * parameter_count(self.arch) * PRECISIONS[self.precision][1]


def encode(models: list[InrModel], info: CodecInfo) -> bytes:
    """Serialize per-patch models into a ``.hinr`` byte stream.

    Deterministic: the same models and header fields produce identical
    bytes. Raises a structural error if the models disagree with the header.
    """
    if info.precision not in PRECISIONS:
        raise ValidationError(f"precision must be one of {sorted(PRECISIONS)}")
    if len(models) != info.grid.patch_count:
        raise StructuralError(
            f"{len(models)} models for a grid of {info.grid.patch_count} patches"
        )
    for i, model in enumerate(models):
        if model.arch != info.arch:
            raise StructuralError(f"model {i} architecture differs from the header's")

    arch, grid, cfg = info.arch, info.grid, info.config
    parts = [
        _FIXED.pack(
            HINR_MAGIC, HINR_VERSION, _KIND_CODES[arch.kind],
            0 if info.precision == "f32" else 1,
            grid.height, grid.width, grid.patch_h, grid.patch_w,
            grid.rows, grid.cols, len(arch.hidden),
        ),
        struct.pack(f"<{len(arch.hidden)}H", *arch.hidden),
        _ARCH_TAIL.pack(arch.omega0, arch.latent_dim, arch.mapping_hidden),
        _RUN.pack(info.seed),
        _OPTICS.pack(*cfg.wavelengths, cfg.pixel_pitch, len(cfg.eval_distances)),
        struct.pack(f"<{len(cfg.eval_distances)}d", *cfg.eval_distances),
        _PAYLOAD_LEN.pack(info.payload_bytes),
    ]
    dtype = PRECISIONS[info.precision][0]
    for model in models:
        parts.append(model.params.astype(dtype).tobytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def decode(data: bytes) -> tuple[list[InrModel], CodecInfo]:
    """Parse a ``.hinr`` stream back into models and header info.

    Integrity failures (bad magic, truncation, checksum mismatch) raise
    :class:`IntegrityError` with the offending byte offset; an unknown
    format version raises :class:`UnsupportedVersionError`.
    """
    def need(offset: int, count: int):
        if offset + count > len(data):
            raise IntegrityError("truncated stream", offset=len(data))

    need(0, _FIXED.size)
    (magic, version, kind_code, prec_code, height, width,
     patch_h, patch_w, rows, cols, n_hidden) = _FIXED.unpack_from(data, 0)
    if magic != HINR_MAGIC:
        raise IntegrityError("bad magic", offset=0)
    if version != HINR_VERSION:
        raise UnsupportedVersionError(
            f"container version {version} not supported (this build reads {HINR_VERSION})"
        )
    if kind_code not in _CODE_KINDS:
        raise IntegrityError(f"unknown architecture code {kind_code}", offset=6)
    if prec_code not in (0, 1):
        raise IntegrityError(f"unknown precision code {prec_code}", offset=7)
    pos = _FIXED.size

    need(pos, 2 * n_hidden)
    hidden = struct.unpack_from(f"<{n_hidden}H", data, pos)
    pos += 2 * n_hidden
    need(pos, _ARCH_TAIL.size)
    omega0, latent_dim, mapping_hidden = _ARCH_TAIL.unpack_from(data, pos)
    pos += _ARCH_TAIL.size
    need(pos, _RUN.size)
    (seed,) = _RUN.unpack_from(data, pos)
    pos += _RUN.size
    need(pos, _OPTICS.size)
    wl_r, wl_g, wl_b, pitch, n_eval = _OPTICS.unpack_from(data, pos)
    pos += _OPTICS.size
    need(pos, 8 * n_eval)
    eval_distances = struct.unpack_from(f"<{n_eval}d", data, pos)
    pos += 8 * n_eval
    need(pos, _PAYLOAD_LEN.size)
    (payload_len,) = _PAYLOAD_LEN.unpack_from(data, pos)
    pos += _PAYLOAD_LEN.size

    arch = InrArchitecture(
        kind=_CODE_KINDS[kind_code],
        hidden=hidden,
        omega0=omega0,
        latent_dim=latent_dim,
        mapping_hidden=mapping_hidden,
    )
    grid = PatchGrid.for_shape(height, width, patch_h, patch_w)
    if (grid.rows, grid.cols) != (rows, cols):
        raise IntegrityError(
            f"grid mismatch: header says {rows}x{cols}, geometry implies {grid.rows}x{grid.cols}",
            offset=16,
        )
    precision = "f32" if prec_code == 0 else "f16"
    info = CodecInfo(
        arch=arch,
        grid=grid,
        config=OpticalConfig((wl_r, wl_g, wl_b), pitch, eval_distances),
        precision=precision,
        seed=seed,
    )
    if payload_len != info.payload_bytes:
        raise IntegrityError(
            f"payload length {payload_len} inconsistent with header ({info.payload_bytes})",
            offset=pos - _PAYLOAD_LEN.size,
        )
    need(pos, payload_len + _CRC.size)
    if len(data) != pos + payload_len + _CRC.size:
        raise IntegrityError("trailing bytes after checksum", offset=pos + payload_len + _CRC.size)
    (stored_crc,) = _CRC.unpack_from(data, pos + payload_len)
    actual_crc = zlib.crc32(data[: pos + payload_len])
    if stored_crc != actual_crc:
        raise IntegrityError("checksum mismatch", offset=pos + payload_len)

    dtype, value_bytes = PRECISIONS[precision]
    n_params = parameter_count(arch)
    models = []
    for i in range(grid.patch_count):
        start = pos + i * n_params * value_bytes
        raw = np.frombuffer(data, dtype=dtype, count=n_params, offset=start)
        models.append(InrModel(arch=arch, params=raw.astype(np.float64), seed=seed + i))
    return models, info


def decompress(data: bytes) -> PhaseHologram:
    """Decode a container and evaluate every patch network.

    Network outputs are clamped into [0, 1), scaled to radians, merged in
    raster order and cropped to the original hologram size. Deterministic.
    """
    models, info = decode(data)
    grid = info.grid
    kernel = nn.make_kernel(info.arch, patch_coordinates(grid.patch_h, grid.patch_w))
    top = np.nextafter(1.0, 0.0)
    patches = []
    for model in models:
        out = kernel.forward(model.params)
        out = np.clip(out, 0.0, top) * TWO_PI
        patches.append(out.T.reshape(3, grid.patch_h, grid.patch_w))
    phases = merge_patches(patches, grid)
    return PhaseHologram(phases, info.config)


def save_hinr(path, data: bytes) -> None:
    with open(path, "wb") as f:
        f.write(data)


def load_hinr(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()
