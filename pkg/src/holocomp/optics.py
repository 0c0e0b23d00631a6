"""Scalar wave optics: free-space propagation, double-phase encoding, CGH
synthesis and multi-plane reconstruction.

Propagation uses the angular spectrum method with a hard evanescent cutoff.
FFT convention: forward transform with the e^{-i 2 pi} kernel, unnormalized
forward / 1/N^2 inverse (NumPy's default), frequencies laid out on the
standard DC-first FFT grid. Round-trip identities in the tests depend on
this convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, StructuralError, UnsupportedShapeError, ValidationError
from .hologram import TWO_PI, OpticalConfig, PhaseHologram, wrap_phase


@dataclass(frozen=True)
class ComplexField:
    """A sampled complex scalar field on a regular grid.

    ``values`` has shape (H, W); ``wavelength`` and ``pixel_pitch`` are in
    meters and fix the physical sampling of the grid.
    """

    values: np.ndarray
    wavelength: float
    pixel_pitch: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2:
            raise StructuralError(f"expected a 2-D field, got shape {values.shape}")
        if not np.isfinite(values.real).all() or not np.isfinite(values.imag).all():
            raise ValidationError("field contains non-finite values")
        if self.wavelength <= 0 or self.pixel_pitch <= 0:
            raise ValidationError("wavelength and pixel_pitch must be positive")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def max_propagation_distance(height: int, width: int, pixel_pitch: float, wavelength: float) -> float:
    """Largest |distance| the sampled transfer function represents without
    aliasing: min over axes of N * pitch^2 / wavelength."""
    return min(height, width) * pixel_pitch**2 / wavelength


def _transfer_function(height: int, width: int, pixel_pitch: float, wavelength: float,
                       distance: float) -> np.ndarray:
    fy = np.fft.fftfreq(height, d=pixel_pitch)[:, None]
    fx = np.fft.fftfreq(width, d=pixel_pitch)[None, :]
    f_sq = fx * fx + fy * fy
    inv_lambda_sq = 1.0 / wavelength**2
    propagating = f_sq <= inv_lambda_sq
    kz = np.sqrt(np.maximum(inv_lambda_sq - f_sq, 0.0))
    h = np.exp(1j * TWO_PI * distance * kz)
    h[~propagating] = 0.0
    return h


def propagate_asm(field: ComplexField, distance: float) -> ComplexField:
    """Propagate a field by ``distance`` meters (angular spectrum method).

    The transfer function exp(i 2 pi d sqrt(1/lambda^2 - fx^2 - fy^2)) is
    applied between a forward and an inverse 2-D FFT; evanescent components
    (fx^2 + fy^2 > 1/lambda^2) are zeroed. Negative distances propagate
    backwards.
    """
    if field.height % 2 or field.width % 2:
        raise UnsupportedShapeError(
            f"propagation requires even dimensions, got {field.height}x{field.width}"
        )
    bound = max_propagation_distance(field.height, field.width, field.pixel_pitch, field.wavelength)
    if abs(distance) > bound:
        raise ValidationError(
            f"|distance| {abs(distance):.3e} m exceeds the sampling-validity bound {bound:.3e} m"
        )
    spectrum = np.fft.fft2(field.values)
    spectrum *= _transfer_function(
        field.height, field.width, field.pixel_pitch, field.wavelength, distance
    )
    out = np.fft.ifft2(spectrum)
    return ComplexField(out, field.wavelength, field.pixel_pitch)


# ---------------------------------------------------------------------------
# Double-phase encoding
# ---------------------------------------------------------------------------

def checkerboard_signs(height: int, width: int) -> np.ndarray:
    """+1 on pixels with even (row+col), -1 on odd ones."""
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    return np.where((rows + cols) % 2 == 0, 1.0, -1.0)


def double_phase_encode(field: ComplexField) -> tuple[np.ndarray, float]:
    """Encode a complex field as a single interleaved phase map.

    Amplitudes are normalized by their maximum (the scale is returned so the
    field can be recovered); each pixel a*e^{i phi} maps to
    phi +- arccos(a), with the + branch on even (row+col) pixels and the -
    branch on odd ones. Output phases are wrapped to [0, 2*pi).

    Returns
    -------
    (phase_map, scale) : (np.ndarray, float)
        Phase map of the field's shape, and the amplitude normalization that
        was divided out.
    """
    amplitude = np.abs(field.values)
    scale = float(amplitude.max())
    if scale == 0.0:
        raise DegenerateInputError("cannot double-phase encode a zero-energy field")
    a = amplitude / scale
    phi = np.angle(field.values)
    offset = np.arccos(np.clip(a, 0.0, 1.0))
    signs = checkerboard_signs(field.height, field.width)
    return wrap_phase(phi + signs * offset), scale


def double_phase_decode(phase_map: np.ndarray, scale: float = 1.0,
                        wavelength: float = 639e-9, pixel_pitch: float = 3.74e-6) -> ComplexField:
    """Invert :func:`double_phase_encode` by pairing checkerboard neighbours.

    Each horizontal pixel pair (columns 2k, 2k+1) carries the two phase
    branches of nearly the same field sample; averaging e^{i theta} over the
    pair recovers a*e^{i phi} exactly where the field is constant across the
    pair, and to first order in the field's gradient elsewhere. Both pixels
    of a pair receive the recovered value.
    """
    phase_map = np.asarray(phase_map, dtype=np.float64)
    if phase_map.ndim != 2:
        raise StructuralError(f"expected a 2-D phase map, got shape {phase_map.shape}")
    if phase_map.shape[1] % 2:
        raise UnsupportedShapeError("double-phase decode requires an even width")
    u = np.exp(1j * phase_map)
    paired = 0.5 * (u[:, 0::2] + u[:, 1::2])
    values = np.repeat(paired, 2, axis=1) * scale
    return ComplexField(values, wavelength, pixel_pitch)


# ---------------------------------------------------------------------------
# CGH synthesis and reconstruction
# ---------------------------------------------------------------------------

def synthesize_hologram(target_image: np.ndarray, config: OpticalConfig,
                        scene_distance: float = 0.0,
                        refine_iters: int = 30) -> PhaseHologram:
    """Compute a phase-only hologram that reconstructs ``target_image`` at
    ``scene_distance`` meters from the hologram plane.

    Per channel: amplitude = sqrt(intensity), the target field is propagated
    back to the hologram plane, and the resulting complex field is
    double-phase encoded. With ``refine_iters`` > 0 and a nonzero distance,
    the field is first refined by that many Gerchberg-Saxton projection
    rounds ending on the hologram side, which drives the hologram-plane
    amplitude to unity the way display pipelines do (the encoder's
    checkerboard offsets then vanish and the stored map is the smooth
    retrieved phase). ``refine_iters=0`` keeps the raw back-propagated
    field. A global half-turn phase offset keeps concentrated phase
    distributions away from the wrap seam. Deterministic in its inputs.
    """
    target = np.asarray(target_image, dtype=np.float64)
    if target.ndim != 3 or target.shape[0] != 3:
        raise StructuralError(f"expected a (3, H, W) intensity image, got {target.shape}")
    if target.min() < 0.0 or target.max() > 1.0:
        raise ValidationError("target intensities must lie in [0, 1]")
    if target.max() == 0.0:
        raise DegenerateInputError("target image is all zero")
    if target.shape[1] % 2 or target.shape[2] % 2:
        raise UnsupportedShapeError("target image must have even dimensions")
    if refine_iters < 0:
        raise ValidationError("refine_iters must be >= 0")

    phases = np.empty_like(target)
    for ch, wavelength in enumerate(config.wavelengths):
        amplitude = np.sqrt(target[ch])
        pitch = config.pixel_pitch
        scene = ComplexField(amplitude.astype(np.complex128), wavelength, pitch)
        if scene_distance == 0.0:
            at_hologram = scene
        else:
            at_hologram = propagate_asm(scene, -scene_distance)
            for _ in range(refine_iters):
                phase_only = ComplexField(
                    np.exp(1j * np.angle(at_hologram.values)), wavelength, pitch)
                replayed = propagate_asm(phase_only, scene_distance)
                constrained = ComplexField(
                    amplitude * np.exp(1j * np.angle(replayed.values)), wavelength, pitch)
                at_hologram = propagate_asm(constrained, -scene_distance)
            if refine_iters > 0:
                at_hologram = ComplexField(
                    np.exp(1j * np.angle(at_hologram.values)), wavelength, pitch)
        if np.abs(at_hologram.values).max() == 0.0:
            raise DegenerateInputError(f"channel {ch} field vanished during synthesis")
        centered = ComplexField(-at_hologram.values, wavelength, pitch)
        phases[ch], _ = double_phase_encode(centered)
    return PhaseHologram(phases, config)


@dataclass(frozen=True)
class ReconstructionStack:
    """Intensities of a hologram reconstruction at a set of focal planes.

    ``planes`` maps each propagation distance (meters) to a (3, H, W)
    nonnegative intensity volume. Intensities are raw |field|^2; use
    :meth:`normalized` before comparing against targets.
    """

    distances: tuple[float, ...]
    intensities: np.ndarray  # (n_planes, 3, H, W)

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[0] != len(self.distances) or arr.shape[1] != 3:
            raise StructuralError(f"bad reconstruction stack shape {arr.shape}")
        if not np.isfinite(arr).all() or arr.min() < 0.0:
            raise ValidationError("intensities must be finite and nonnegative")
        object.__setattr__(self, "intensities", arr)
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))

    def plane(self, index: int) -> np.ndarray:
        return self.intensities[index]

    def normalized(self) -> np.ndarray:
        """All planes divided by the stack's global maximum (one scalar for
        every plane and channel, preserving relative channel balance)."""
        peak = self.intensities.max()
        if peak == 0.0:
            return self.intensities.copy()
        return self.intensities / peak


def reconstruct(holo: PhaseHologram, distances=None) -> ReconstructionStack:
    """Simulate the optical reconstruction of a hologram at focal planes.

    Per channel c the displayed field is e^{i P_c}; the intensity at
    distance d is |propagate(e^{i P_c}, d)|^2.
    """
    if distances is None:
        distances = holo.config.eval_distances
    distances = tuple(float(d) for d in distances)
    if not distances:
        raise ValidationError("at least one reconstruction distance is required")
    stack = np.empty((len(distances), 3, holo.height, holo.width), dtype=np.float64)
    for ch, wavelength in enumerate(holo.config.wavelengths):
        u = ComplexField(np.exp(1j * holo.phases[ch]), wavelength, holo.config.pixel_pitch)
        for pi, d in enumerate(distances):
            out = propagate_asm(u, d) if d != 0.0 else u
            stack[pi, ch] = np.abs(out.values) ** 2
    return ReconstructionStack(distances, stack)
