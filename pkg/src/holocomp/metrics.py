"""Full-reference quality metrics (PSNR, SSIM) and the evaluation protocol
comparing an original hologram against its decompressed counterpart on the
hologram plane and on simulated focal-plane reconstructions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import StructuralError, ValidationError
from .hologram import PhaseHologram
from .optics import reconstruct

PSNR_TEXT_CAP_DB = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise StructuralError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("inputs must be finite")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for unit-range data (MAX = 1).

    Multi-channel (3, H, W) inputs are scored per channel and averaged.
    Identical inputs return +inf; text reports cap the sentinel at 100 dB.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    values = []
    for ch in range(a.shape[0]):
        mse = float(np.mean((a[ch] - b[ch]) ** 2))
        values.append(math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse))
    return float(np.mean(values))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


_WINDOW = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)


def _ssim_channel(a: np.ndarray, b: np.ndarray) -> float:
    mu_a = convolve2d(a, _WINDOW, mode="valid")
    mu_b = convolve2d(b, _WINDOW, mode="valid")
    e_aa = convolve2d(a * a, _WINDOW, mode="valid")
    e_bb = convolve2d(b * b, _WINDOW, mode="valid")
    e_ab = convolve2d(a * b, _WINDOW, mode="valid")
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    ssim_map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def ssim(a, b) -> float:
    """Structural similarity over an 11x11 Gaussian window (sigma 1.5),
    K1 = 0.01, K2 = 0.03, unit dynamic range, mean over valid windows.

    Multi-channel (3, H, W) inputs are scored per channel and averaged.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise StructuralError(f"expected 2-D or (C, H, W) images, got {a.shape}")
    if min(a.shape[1], a.shape[2]) < _SSIM_WINDOW:
        raise ValidationError(
            f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for SSIM"
        )
    return float(np.mean([_ssim_channel(a[ch], b[ch]) for ch in range(a.shape[0])]))


def format_db(value: float) -> str:
    """Render a PSNR value, capping the +inf sentinel for text output."""
    if math.isinf(value):
        return f">{PSNR_TEXT_CAP_DB:.0f}"
    return f"{value:.2f}"


# ---------------------------------------------------------------------------
# Evaluation protocol
# ---------------------------------------------------------------------------

REFERENCE_UNCOMPRESSED = "uncompressed"
REFERENCE_SOURCE = "source"


@dataclass
class PlaneMetrics:
    distance_m: float
    psnr_db: float
    ssim: float

    def to_dict(self) -> dict:
        return {"distance_m": self.distance_m, "psnr_db": self.psnr_db, "ssim": self.ssim}


@dataclass
class QualityReport:
    """Hologram-plane and reconstruction metrics plus compression accounting.

    ``reconstruction_mean`` metrics are the arithmetic means of the
    per-plane values. LPIPS is reported as the placeholder "n/a" so report
    layouts keep the conventional PSNR/SSIM/LPIPS column set.
    """

    hologram_psnr_db: float
    hologram_ssim: float
    planes: list[PlaneMetrics]
    reference_mode: str
    compression: dict | None = field(default=None)

    @property
    def mean_psnr_db(self) -> float:
        return float(np.mean([p.psnr_db for p in self.planes]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([p.ssim for p in self.planes]))

    def to_json_lines(self) -> str:
        records = [
            {"scope": "hologram_plane", "psnr_db": self.hologram_psnr_db,
             "ssim": self.hologram_ssim},
        ]
        for p in self.planes:
            rec = {"scope": "reconstruction", "lpips": "n/a"}
            rec.update(p.to_dict())
            records.append(rec)
        records.append({
            "scope": "reconstruction_mean",
            "psnr_db": self.mean_psnr_db,
            "ssim": self.mean_ssim,
            "lpips": "n/a",
            "reference": self.reference_mode,
        })
        if self.compression is not None:
            records.append({"scope": "compression", **self.compression})
        return "\n".join(json.dumps(r) for r in records) + "\n"

    def to_text(self) -> str:
        lines = [
            "hologram plane   PSNR {} dB   SSIM {:.4f}".format(
                format_db(self.hologram_psnr_db), self.hologram_ssim
            ),
            f"reconstruction (reference: {self.reference_mode})",
            "  distance      PSNR       SSIM     LPIPS",
        ]
        for p in self.planes:
            lines.append(
                f"  {p.distance_m * 1e3:+7.2f} mm  {format_db(p.psnr_db):>8} dB  "
                f"{p.ssim:.4f}      n/a"
            )
        lines.append(
            f"  mean        {format_db(self.mean_psnr_db):>8} dB  {self.mean_ssim:.4f}      n/a"
        )
        if self.compression is not None:
            lines.append(
                "compression     params {params}   ratio {ratio_percent}%   "
                "bytes {container_bytes} ({bytes_ratio_percent:.1f}% of raw)".format(**self.compression)
            )
        return "\n".join(lines) + "\n"


def evaluate_pair(original: PhaseHologram, decompressed: PhaseHologram,
                  reference_mode: str = REFERENCE_UNCOMPRESSED,
                  source_image: np.ndarray | None = None,
                  compression: dict | None = None) -> QualityReport:
    """Score a decompressed hologram against the original.

    Hologram-plane metrics compare normalized phases. Reconstruction metrics
    compare the decompressed hologram's focal stack (at the config's
    evaluation distances, max-normalized as one stack) against either the
    original hologram's stack (``uncompressed``) or the given source image
    at every plane (``source``).
    """
    if reference_mode not in (REFERENCE_UNCOMPRESSED, REFERENCE_SOURCE):
        raise ValidationError(f"unknown reference mode {reference_mode!r}")
    if original.phases.shape != decompressed.phases.shape:
        raise ValidationError("holograms differ in size")
    if (original.config.wavelengths != decompressed.config.wavelengths
            or original.config.pixel_pitch != decompressed.config.pixel_pitch):
        raise ValidationError("holograms carry different optical configs")
    if reference_mode == REFERENCE_SOURCE and source_image is None:
        raise ValidationError("source reference mode needs a source image")

    holo_psnr = psnr(original.normalized(), decompressed.normalized())
    holo_ssim = ssim(original.normalized(), decompressed.normalized())

    distances = original.config.eval_distances
    stack_dec = reconstruct(decompressed, distances).normalized()
    if reference_mode == REFERENCE_UNCOMPRESSED:
        stack_ref = reconstruct(original, distances).normalized()
    else:
        source = np.asarray(source_image, dtype=np.float64)
        if source.shape != original.phases.shape:
            raise ValidationError(
                f"source image shape {source.shape} does not match hologram {original.phases.shape}"
            )
        stack_ref = np.broadcast_to(source, stack_dec.shape)

    planes = [
        PlaneMetrics(
            distance_m=d,
            psnr_db=psnr(stack_ref[i], stack_dec[i]),
            ssim=ssim(stack_ref[i], stack_dec[i]),
        )
        for i, d in enumerate(distances)
    ]
    return QualityReport(
        hologram_psnr_db=holo_psnr,
        hologram_ssim=holo_ssim,
        planes=planes,
        reference_mode=reference_mode,
        compression=compression,
    )
