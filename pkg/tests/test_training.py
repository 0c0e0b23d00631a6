import math

import numpy as np
import pytest

import holocomp.nn as nn
from holocomp.errors import ValidationError
from holocomp.hologram import PatchGrid, PhaseHologram
from holocomp.training import (
    STOP_EARLY,
    STOP_FAILED,
    STOP_MAX_EPOCHS,
    AdamState,
    TrainingSchedule,
    adam_step,
    patch_coordinates,
    patch_targets,
    psnr_from_loss,
    train_hologram,
    train_patch,
)

TINY_SIREN = nn.InrArchitecture(kind="siren", hidden=(8, 8))


def quick_schedule(**kw):
    defaults = dict(max_epochs=60, early_stop_window=None)
    defaults.update(kw)
    return TrainingSchedule(**defaults)


class TestSchedule:
    def test_lr_closed_form(self):
        s = TrainingSchedule()
        assert s.lr_at(0) == 1e-4
        assert s.lr_at(4999) == 1e-4
        assert s.lr_at(5000) == 5e-5
        assert s.lr_at(9999) == 5e-5

    def test_validation(self):
        with pytest.raises(ValidationError):
            TrainingSchedule(base_lr=0.0)
        with pytest.raises(ValidationError):
            TrainingSchedule(step_size=0)
        with pytest.raises(ValidationError):
            TrainingSchedule(early_stop_window=0)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        params = np.array([1.0])
        state = AdamState.zeros(1)
        adam_step(params, np.array([1.0]), state, lr=1e-4)
        # bias-corrected m_hat/sqrt(v_hat) = 1 at t=1 (up to eps)
        assert params[0] == pytest.approx(1.0 - 1e-4, abs=1e-10)
        assert state.t == 1

    def test_zero_gradient_leaves_params(self):
        params = np.array([0.3, -0.8])
        state = AdamState.zeros(2)
        for _ in range(50):
            adam_step(params, np.zeros(2), state, lr=1e-2)
        np.testing.assert_array_equal(params, [0.3, -0.8])

    def test_quadratic_convergence_matches_scalar_oracle(self):
        # independent scalar simulation of the update recurrence
        def oracle(w0, lr, steps):
            w, m, v = w0, 0.0, 0.0
            for t in range(1, steps + 1):
                g = 2.0 * w
                m = 0.9 * m + 0.1 * g
                v = 0.999 * v + 0.001 * g * g
                w -= lr * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
            return w

        params = np.array([1.0])
        state = AdamState.zeros(1)
        for _ in range(2000):
            adam_step(params, 2.0 * params, state, lr=1e-2)
        expected = oracle(1.0, 1e-2, 2000)
        assert params[0] == pytest.approx(expected, abs=1e-12)
        assert abs(params[0]) < 0.01

    def test_nonfinite_gradients_rejected(self):
        state = AdamState.zeros(1)
        with pytest.raises(ValidationError):
            adam_step(np.array([1.0]), np.array([np.nan]), state, lr=1e-4)


class TestCoordinates:
    def test_pixel_centers(self):
        coords = patch_coordinates(2, 4)
        assert coords.shape == (8, 2)
        np.testing.assert_allclose(coords[0], [-0.75, -0.5])  # (x, y) of pixel (0, 0)
        np.testing.assert_allclose(coords[-1], [0.75, 0.5])
        # row-major: second entry advances x
        np.testing.assert_allclose(coords[1], [-0.25, -0.5])

    def test_targets_layout_and_validation(self):
        patch = np.arange(24, dtype=float).reshape(3, 2, 4) / 24.0
        targets = patch_targets(patch)
        assert targets.shape == (8, 3)
        np.testing.assert_array_equal(targets[:, 0], patch[0].ravel())
        with pytest.raises(ValidationError):
            patch_targets(np.full((3, 2, 2), 1.0))  # 1.0 outside [0, 1)


class TestTrainPatch:
    def test_constant_patch_fits_fast(self):
        patch = np.full((3, 8, 8), 0.5)
        for kind in nn.KINDS:
            arch = (nn.InrArchitecture(kind=kind, hidden=(8, 8), latent_dim=4, mapping_hidden=5)
                    if kind == "film-siren" else nn.InrArchitecture(kind=kind, hidden=(8, 8)))
            _, res = train_patch(patch, arch, quick_schedule(max_epochs=500, base_lr=1e-2), seed=0)
            assert res.psnr_db > 60.0, kind
            assert not res.failed

    def test_disabled_early_stop_runs_all_epochs(self):
        patch = np.full((3, 6, 6), 0.25)
        _, res = train_patch(patch, TINY_SIREN, quick_schedule(max_epochs=73), seed=1)
        assert res.epochs == 73
        assert res.stop_reason == STOP_MAX_EPOCHS

    def test_early_stop_fires_on_plateau(self, rng):
        # an underparameterized net on noise bottoms out at an irreducible
        # loss, so the windowed improvement criterion must fire
        patch = rng.uniform(0, 1, (3, 6, 6)) * 0.999
        arch = nn.InrArchitecture(kind="siren", hidden=(4,))
        schedule = quick_schedule(max_epochs=5000, base_lr=1e-2,
                                  early_stop_window=50, early_stop_rel=1e-4)
        _, res = train_patch(patch, arch, schedule, seed=1)
        assert res.stop_reason == STOP_EARLY
        assert res.epochs < 5000
        assert res.epochs % 50 == 0

    def test_deterministic(self, rng):
        patch = rng.uniform(0, 1, (3, 8, 8)) * 0.999
        m1, r1 = train_patch(patch, TINY_SIREN, quick_schedule(), seed=7)
        m2, r2 = train_patch(patch, TINY_SIREN, quick_schedule(), seed=7)
        np.testing.assert_array_equal(m1.params, m2.params)
        assert r1.loss == r2.loss

    def test_report_psnr_consistent_with_loss(self, rng):
        patch = rng.uniform(0, 1, (3, 8, 8)) * 0.999
        _, res = train_patch(patch, TINY_SIREN, quick_schedule(), seed=7)
        assert res.psnr_db == pytest.approx(10 * math.log10(1 / res.loss), abs=1e-9)

    def test_best_loss_not_worse_than_observed(self, rng):
        patch = rng.uniform(0, 1, (3, 8, 8)) * 0.999
        observed = []
        _, res = train_patch(patch, TINY_SIREN, quick_schedule(max_epochs=40), seed=3,
                             log_fn=lambda rec: observed.append(rec["loss"]))
        assert len(observed) == 40
        assert res.loss <= min(observed) + 1e-15

    def test_warm_start_used(self, rng):
        patch = rng.uniform(0, 1, (3, 8, 8)) * 0.999
        donor, _ = train_patch(patch, TINY_SIREN, quick_schedule(max_epochs=200, base_lr=1e-2), seed=5)
        short = quick_schedule(max_epochs=5)
        warm_model, warm = train_patch(patch, TINY_SIREN, short, seed=6, init_from=donor)
        cold_model, cold = train_patch(patch, TINY_SIREN, short, seed=6)
        # the warm run starts where the donor finished, the cold one from scratch
        assert warm.loss < cold.loss
        assert not np.array_equal(warm_model.params, cold_model.params)

    def test_divergence_flags_failed_without_raising(self):
        patch = np.full((3, 6, 6), 0.9)
        schedule = quick_schedule(max_epochs=50, base_lr=1e150)  # guaranteed blow-up
        arch = nn.InrArchitecture(kind="mlp", hidden=(8, 8))
        _, res = train_patch(patch, arch, schedule, seed=2)
        assert res.failed
        assert res.stop_reason == STOP_FAILED

    def test_psnr_from_zero_loss_is_inf(self):
        assert psnr_from_loss(0.0) == math.inf


class TestTrainHologram:
    def _hologram(self, rng, size=16):
        phases = rng.uniform(0, 2 * np.pi * 0.999, (3, size, size))
        return PhaseHologram(phases)

    def test_patch_and_report_counts(self, rng):
        holo = self._hologram(rng)
        grid = PatchGrid.for_shape(16, 16, 8, 8)
        models, report = train_hologram(holo, grid, TINY_SIREN, quick_schedule(max_epochs=10))
        assert len(models) == 4
        assert len(report.patches) == 4
        assert [p.patch_index for p in report.patches] == [0, 1, 2, 3]

    def test_rerun_identical(self, rng):
        holo = self._hologram(rng)
        grid = PatchGrid.for_shape(16, 16, 8, 8)
        models1, r1 = train_hologram(holo, grid, TINY_SIREN, quick_schedule(max_epochs=15), seed=4)
        models2, r2 = train_hologram(holo, grid, TINY_SIREN, quick_schedule(max_epochs=15), seed=4)
        for a, b in zip(models1, models2):
            np.testing.assert_array_equal(a.params, b.params)
        assert [p.loss for p in r1.patches] == [p.loss for p in r2.patches]

    def test_striped_workers_match_manual_stripes(self, rng):
        # two workers split the 2-row grid into independent chains, each
        # starting fresh: stripe results must equal single-stripe runs of
        # the corresponding sub-holograms
        holo = self._hologram(rng)
        grid = PatchGrid.for_shape(16, 16, 8, 8)
        models2, _ = train_hologram(holo, grid, TINY_SIREN, quick_schedule(max_epochs=12),
                                    workers=2, seed=9)

        top = PhaseHologram(holo.phases[:, :8, :], holo.config)
        bottom = PhaseHologram(holo.phases[:, 8:, :], holo.config)
        row_grid = PatchGrid.for_shape(8, 16, 8, 8)
        top_models, _ = train_hologram(top, row_grid, TINY_SIREN,
                                       quick_schedule(max_epochs=12), seed=9)
        bottom_models, _ = train_hologram(bottom, row_grid, TINY_SIREN,
                                          quick_schedule(max_epochs=12), seed=11)
        np.testing.assert_array_equal(models2[0].params, top_models[0].params)
        np.testing.assert_array_equal(models2[1].params, top_models[1].params)
        # bottom stripe: fresh init from seed 9 + patch index 2
        np.testing.assert_array_equal(models2[2].params, bottom_models[0].params)
        np.testing.assert_array_equal(models2[3].params, bottom_models[1].params)

    def test_aggregate_statistics(self, rng):
        holo = self._hologram(rng)
        grid = PatchGrid.for_shape(16, 16, 8, 8)
        _, report = train_hologram(holo, grid, TINY_SIREN, quick_schedule(max_epochs=10))
        vals = [p.psnr_db for p in report.patches]
        assert report.mean_psnr_db == pytest.approx(float(np.mean(vals)))
        assert report.std_psnr_db == pytest.approx(float(np.std(vals)))

    def test_workers_validated(self, rng):
        holo = self._hologram(rng)
        grid = PatchGrid.for_shape(16, 16, 8, 8)
        with pytest.raises(ValidationError):
            train_hologram(holo, grid, TINY_SIREN, quick_schedule(), workers=0)
