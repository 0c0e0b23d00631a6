import numpy as np
import pytest

from holocomp.errors import (
    DegenerateInputError,
    UnsupportedShapeError,
    ValidationError,
)
from holocomp.hologram import TWO_PI, OpticalConfig, PhaseHologram
from holocomp.optics import (
    ComplexField,
    checkerboard_signs,
    double_phase_decode,
    double_phase_encode,
    max_propagation_distance,
    propagate_asm,
    reconstruct,
    synthesize_hologram,
)

from conftest import band_limited_field

LAMBDA_G = 515e-9
PITCH = 3.74e-6


def _field(values, wavelength=LAMBDA_G):
    return ComplexField(values, wavelength, PITCH)


def direct_plane_wave_propagate(values, wavelength, pitch, distance):
    """O(N^4) oracle: decompose into plane waves by explicit DFT sums and
    apply the exact free-space transfer phase per component."""
    h, w = values.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for ky in range(h):
        fy = (ky if ky < h / 2 else ky - h) / (h * pitch)
        for kx in range(w):
            fx = (kx if kx < w / 2 else kx - w) / (w * pitch)
            coeff = 0.0 + 0.0j
            for m in range(h):
                for n in range(w):
                    coeff += values[m, n] * np.exp(-2j * np.pi * (ky * m / h + kx * n / w))
            f_sq = fx * fx + fy * fy
            inv_l2 = 1.0 / wavelength**2
            if f_sq > inv_l2:
                continue
            transfer = np.exp(2j * np.pi * distance * np.sqrt(inv_l2 - f_sq))
            for m in range(h):
                for n in range(w):
                    out[m, n] += coeff * transfer * np.exp(2j * np.pi * (ky * m / h + kx * n / w))
    return out / (h * w)


class TestPropagation:
    def test_zero_distance_identity(self, rng):
        u = band_limited_field(rng, 32)
        field = _field(u)
        out = propagate_asm(field, 0.0)
        rel = np.linalg.norm(out.values - u) / np.linalg.norm(u)
        assert rel < 1e-10

    def test_plane_wave_stays_uniform(self):
        field = _field(np.ones((16, 16), dtype=np.complex128))
        out = propagate_asm(field, 2e-4)
        np.testing.assert_allclose(np.abs(out.values), 1.0, atol=1e-8)

    def test_round_trip(self, rng):
        u = rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128))
        field = _field(u, wavelength=515e-9)
        back = propagate_asm(propagate_asm(field, 2.5e-3), -2.5e-3)
        rel = np.linalg.norm(back.values - u) / np.linalg.norm(u)
        assert rel < 1e-6

    def test_energy_conservation(self, rng):
        u = band_limited_field(rng, 128)
        for wavelength in OpticalConfig().wavelengths:
            field = _field(u, wavelength)
            out = propagate_asm(field, 2.5e-3)
            assert abs(out.energy() - field.energy()) / field.energy() < 1e-9

    def test_composition(self, rng):
        u = band_limited_field(rng, 32)
        field = _field(u)
        once = propagate_asm(field, 0.25e-3 + 0.12e-3)
        twice = propagate_asm(propagate_asm(field, 0.25e-3), 0.12e-3)
        rel = np.linalg.norm(once.values - twice.values) / np.linalg.norm(once.values)
        assert rel < 1e-8

    def test_conjugate_symmetry(self, rng):
        u = band_limited_field(rng, 32)
        lhs = propagate_asm(_field(np.conj(u)), -0.3e-3).values
        rhs = np.conj(propagate_asm(_field(u), 0.3e-3).values)
        rel = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
        assert rel < 1e-9

    def test_matches_direct_summation_oracle(self, rng):
        u = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        d = 5e-5  # inside the 8-pixel sampling bound
        got = propagate_asm(_field(u), d).values
        want = direct_plane_wave_propagate(u, LAMBDA_G, PITCH, d)
        assert np.abs(got - want).max() < 1e-6

    def test_odd_dimensions_rejected(self):
        with pytest.raises(UnsupportedShapeError):
            propagate_asm(_field(np.ones((15, 16), dtype=complex)), 1e-3)

    def test_nonfinite_input_rejected(self):
        bad = np.ones((8, 8), dtype=complex)
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            _field(bad)

    def test_sampling_bound_enforced(self):
        field = _field(np.ones((16, 16), dtype=complex))
        bound = max_propagation_distance(16, 16, PITCH, LAMBDA_G)
        with pytest.raises(ValidationError):
            propagate_asm(field, bound * 1.01)
        propagate_asm(field, bound * 0.99)  # just inside is fine

    def test_bound_at_paper_geometry(self):
        # 512 pixels at 3.74 um and 639 nm allow ~11.2 mm, covering +-2.5 mm
        bound = max_propagation_distance(512, 512, 3.74e-6, 639e-9)
        assert 11.0e-3 < bound < 11.4e-3


class TestDoublePhase:
    def test_unit_amplitude_keeps_phase(self):
        values = np.full((4, 4), np.exp(1j * 0.7))
        phase, scale = double_phase_encode(_field(values))
        np.testing.assert_allclose(phase, 0.7, atol=1e-12)
        assert scale == pytest.approx(1.0)

    def test_zero_amplitude_splits_half_pi(self):
        values = np.ones((4, 4), dtype=complex)
        values[1, 1] = 0.0  # a=0 pixel, phi = angle(0) = 0
        phase, _ = double_phase_encode(_field(values))
        signs = checkerboard_signs(4, 4)
        expected = np.mod(signs[1, 1] * np.pi / 2, TWO_PI)
        assert phase[1, 1] == pytest.approx(expected, abs=1e-12)

    def test_output_range(self, rng):
        u = band_limited_field(rng, 16)
        phase, _ = double_phase_encode(_field(u))
        assert phase.min() >= 0.0 and phase.max() < TWO_PI

    def test_checkerboard_layout(self):
        # positive branch on even (row+col); the corner pixel pins the
        # normalization so the rest carry a = 0.5
        values = np.full((2, 4), 0.5 * np.exp(2j))
        values[0, 0] = np.exp(2j)
        phase, _ = double_phase_encode(_field(values))
        offset = np.arccos(0.5)
        assert phase[0, 0] == pytest.approx(2.0)
        assert phase[0, 1] == pytest.approx(2.0 - offset)  # odd (row+col): minus branch
        assert phase[0, 2] == pytest.approx(2.0 + offset)
        assert phase[1, 0] == pytest.approx(2.0 - offset)
        assert phase[1, 1] == pytest.approx(2.0 + offset)

    def test_zero_energy_rejected(self):
        with pytest.raises(DegenerateInputError):
            double_phase_encode(_field(np.zeros((4, 4), dtype=complex)))

    def test_cell_constant_field_decodes_exactly(self, rng):
        # constant across each horizontal pair -> pairing recovers exactly
        half = band_limited_field(rng, 4)[:4, :2]
        values = np.repeat(half, 2, axis=1)
        phase, scale = double_phase_encode(_field(values))
        decoded = double_phase_decode(phase, scale).values
        assert np.abs(decoded - values).max() < 1e-12

    def test_decode_matches_bruteforce_pairing_oracle(self, rng):
        u = band_limited_field(rng, 16)
        phase, scale = double_phase_encode(_field(u))
        decoded = double_phase_decode(phase, scale).values

        # brute-force oracle: explicit per-pair loop
        oracle = np.zeros_like(u)
        for r in range(16):
            for c in range(0, 16, 2):
                pair = 0.5 * (np.exp(1j * phase[r, c]) + np.exp(1j * phase[r, c + 1]))
                oracle[r, c] = oracle[r, c + 1] = pair * scale
        assert np.abs(decoded - oracle).max() < 1e-6

    def test_decode_recovers_smooth_fields_approximately(self, rng):
        # physics-level sanity: a gently varying field survives the pairing
        half = band_limited_field(rng, 8, band=2)
        values = np.kron(half, np.ones((4, 4)))  # 32x32, constant 4x4 blocks
        phase, scale = double_phase_encode(_field(values))
        decoded = double_phase_decode(phase, scale).values
        rel = np.linalg.norm(decoded - values) / np.linalg.norm(values)
        assert rel < 1e-10  # block-constant: pairing is exact


class TestSynthesize:
    def test_deterministic(self, smooth_image, config):
        a = synthesize_hologram(smooth_image, config, 1e-3)
        b = synthesize_hologram(smooth_image, config, 1e-3)
        np.testing.assert_array_equal(a.phases, b.phases)

    def test_uniform_white_at_zero_distance(self, config):
        target = np.ones((3, 32, 32))
        holo = synthesize_hologram(target, config, 0.0)
        # unit-amplitude constant field: both branches carry the same phase
        for ch in range(3):
            assert np.ptp(holo.phases[ch]) < 1e-12
        stack = reconstruct(holo, [0.0])
        intensity = stack.normalized()[0]
        np.testing.assert_allclose(intensity, 1.0, atol=1e-10)

    def test_impulse_refocuses_at_impulse(self, config):
        target = np.zeros((3, 128, 128))
        target[:, 64, 64] = 1.0
        holo = synthesize_hologram(target, config, 2.5e-3, refine_iters=10)
        stack = reconstruct(holo, [2.5e-3])
        for ch in range(3):
            peak = np.unravel_index(np.argmax(stack.intensities[0, ch]), (128, 128))
            assert peak == (64, 64)

    def test_all_zero_image_rejected(self, config):
        with pytest.raises(DegenerateInputError):
            synthesize_hologram(np.zeros((3, 16, 16)), config, 0.0)

    def test_odd_size_rejected(self, config):
        with pytest.raises(UnsupportedShapeError):
            synthesize_hologram(np.ones((3, 15, 16)), config, 0.0)

    def test_out_of_range_intensities_rejected(self, config):
        with pytest.raises(ValidationError):
            synthesize_hologram(np.full((3, 16, 16), 1.5), config, 0.0)

    def test_refined_hologram_reconstructs_target(self, smooth_image, config):
        holo = synthesize_hologram(smooth_image, config, 1e-3, refine_iters=30)
        stack = reconstruct(holo, [1e-3]).normalized()
        # phase-retrieval quality: not exact, but clearly the same image
        mse = np.mean((stack[0] - smooth_image) ** 2)
        assert 10 * np.log10(1 / mse) > 15.0


class TestReconstruct:
    def test_default_distances_give_three_planes(self, recon_hologram):
        stack = reconstruct(recon_hologram)
        assert stack.distances == (-2.5e-3, 0.0, 2.5e-3)
        assert stack.intensities.shape == (3, 3, 128, 128)

    def test_zero_distance_plane_is_direct_intensity(self, random_hologram):
        stack = reconstruct(random_hologram, [0.0])
        # |e^{iP}|^2 = 1 everywhere
        np.testing.assert_allclose(stack.intensities[0], 1.0, atol=1e-12)

    def test_intensities_nonnegative_finite(self, recon_hologram):
        stack = reconstruct(recon_hologram)
        assert np.isfinite(stack.intensities).all()
        assert stack.intensities.min() >= 0.0

    def test_normalized_peak_is_one(self, recon_hologram):
        stack = reconstruct(recon_hologram)
        assert stack.normalized().max() == pytest.approx(1.0)

    def test_empty_distances_rejected(self, random_hologram):
        with pytest.raises(ValidationError):
            reconstruct(random_hologram, [])
