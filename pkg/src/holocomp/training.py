"""Per-patch overfitting: Adam with stepped learning-rate decay, windowed
early stopping, warm-start chaining across patches, and a striped worker
pool for whole holograms.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ValidationError
from .hologram import TWO_PI, PatchGrid, PhaseHologram, split_patches
from .nn import InrArchitecture, InrModel

STOP_MAX_EPOCHS = "max-epochs"
STOP_EARLY = "early-stop"
STOP_FAILED = "failed"


@dataclass(frozen=True)
class TrainingSchedule:
    """Optimization schedule: Adam at ``base_lr`` decayed by ``gamma`` every
    ``step_size`` epochs, for at most ``max_epochs`` full-batch epochs.

    Early stopping fires when the best loss improves by less than
    ``early_stop_rel`` (relative) over a window of ``early_stop_window``
    epochs; set the window to ``None`` to disable it.
    """

    base_lr: float = 1e-4
    step_size: int = 5000
    gamma: float = 0.5
    max_epochs: int = 10000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_window: int | None = 500
    early_stop_rel: float = 1e-4

    def __post_init__(self):
        if self.base_lr <= 0 or self.gamma <= 0:
            raise ValidationError("base_lr and gamma must be positive")
        if self.step_size < 1 or self.max_epochs < 1:
            raise ValidationError("step_size and max_epochs must be >= 1")
        if self.early_stop_window is not None and self.early_stop_window < 1:
            raise ValidationError("early_stop_window must be >= 1 or None")

    def lr_at(self, epoch: int) -> float:
        """base_lr * gamma^floor(epoch / step_size)."""
        return self.base_lr * self.gamma ** (epoch // self.step_size)


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update, in place on ``params``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValidationError("params, grads and state must have matching lengths")
    if not np.isfinite(grads).all():
        raise ValidationError("non-finite gradients")
    state.t += 1
    nn.adam_update(params, grads, state.m, state.v, state.t, lr, beta1, beta2, eps)


def psnr_from_loss(loss: float) -> float:
    """PSNR implied by an MSE on unit-range data: 10*log10(1/loss)."""
    if loss <= 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / loss)


@dataclass
class PatchResult:
    """Training outcome for one patch."""

    patch_index: int
    loss: float
    psnr_db: float
    epochs: int
    stop_reason: str
    wall_time_s: float
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "patch_index": self.patch_index,
            "loss": self.loss,
            "psnr_db": self.psnr_db,
            "epochs": self.epochs,
            "stop_reason": self.stop_reason,
            "wall_time_s": self.wall_time_s,
            "failed": self.failed,
        }


@dataclass
class TrainReport:
    """Per-patch results plus the aggregate PSNR statistics."""

    patches: list[PatchResult] = field(default_factory=list)

    @property
    def mean_psnr_db(self) -> float:
        vals = [p.psnr_db for p in self.patches if not p.failed]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def std_psnr_db(self) -> float:
        vals = [p.psnr_db for p in self.patches if not p.failed]
        return float(np.std(vals)) if vals else math.nan

    @property
    def failed_count(self) -> int:
        return sum(1 for p in self.patches if p.failed)

    def to_dict(self) -> dict:
        return {
            "patches": [p.to_dict() for p in self.patches],
            "mean_psnr_db": self.mean_psnr_db,
            "std_psnr_db": self.std_psnr_db,
            "failed_count": self.failed_count,
        }


def patch_coordinates(patch_h: int, patch_w: int) -> np.ndarray:
    """Pixel-center coordinates in [-1, 1]^2, row-major over the patch.

    Pixel (i, j) maps to x = 2*(j + 0.5)/patch_w - 1, y = 2*(i + 0.5)/patch_h - 1.
    """
    ys = (np.arange(patch_h) + 0.5) / patch_h * 2.0 - 1.0
    xs = (np.arange(patch_w) + 0.5) / patch_w * 2.0 - 1.0
    grid_x, grid_y = np.meshgrid(xs, ys)
    return np.ascontiguousarray(np.stack([grid_x.ravel(), grid_y.ravel()], axis=1))


def patch_targets(patch: np.ndarray) -> np.ndarray:
    """Flatten a (3, h, w) normalized patch into per-pixel (N, 3) targets."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 3 or patch.shape[0] != 3:
        raise ValidationError(f"expected a (3, h, w) patch, got {patch.shape}")
    if patch.min() < 0.0 or patch.max() >= 1.0:
        raise ValidationError("patch values must lie in [0, 1)")
    return np.ascontiguousarray(patch.reshape(3, -1).T)


def train_patch(patch: np.ndarray, arch: InrArchitecture, schedule: TrainingSchedule,
                seed: int, init_from: InrModel | None = None, patch_index: int = 0,
                log_fn=None) -> tuple[InrModel, PatchResult]:
    """Overfit one network to one patch of normalized phases.

    One epoch is one Adam step over every patch pixel. Starts from
    ``init_from`` (warm start) when given, otherwise from a fresh
    initialization with ``seed``. On a non-finite loss the patch restarts
    once from a fresh init with ``seed + 1``, then is flagged failed.
    Returns the best-loss parameters observed.
    """
    targets = patch_targets(patch)
    coords = patch_coordinates(patch.shape[1], patch.shape[2])
    kernel = nn.make_kernel(arch, coords)
    start = time.perf_counter()

    attempts = []
    if init_from is not None:
        if init_from.arch != arch:
            raise ValidationError("init_from architecture differs from the requested one")
        attempts.append(init_from.params.copy())
    else:
        attempts.append(nn.init_model(arch, seed).params.copy())
    attempts.append(None)  # placeholder: fresh restart with seed + 1

    best_loss = math.inf
    best_params = attempts[0].copy()
    epochs_run = 0
    stop_reason = STOP_FAILED
    failed = True

    for attempt, start_params in enumerate(attempts):
        if start_params is None:
            start_params = nn.init_model(arch, seed + 1).params.copy()
        params = start_params.copy()
        prev = params.copy()
        m = np.zeros_like(params)
        v = np.zeros_like(params)
        best_loss = math.inf
        best_params = params.copy()
        window = schedule.early_stop_window
        anchor = None
        diverged = False
        stop_reason = STOP_MAX_EPOCHS

        for epoch in range(schedule.max_epochs):
            lr = schedule.lr_at(epoch)
            np.copyto(prev, params)
            loss = kernel.train_step(params, targets, m, v, epoch + 1, lr,
                                     schedule.adam_beta1, schedule.adam_beta2,
                                     schedule.adam_eps)
            epochs_run = epoch + 1
            if math.isnan(loss):
                diverged = True
                break
            if loss < best_loss:
                best_loss = loss
                np.copyto(best_params, prev)
            if log_fn is not None:
                log_fn({"patch": patch_index, "epoch": epoch, "loss": loss, "lr": lr})
            if window is not None and (epoch + 1) % window == 0:
                if anchor is not None:
                    rel = (anchor - best_loss) / anchor if anchor > 0 else 0.0
                    if rel < schedule.early_stop_rel:
                        stop_reason = STOP_EARLY
                        break
                anchor = best_loss

        if diverged:
            continue  # one fresh restart, then give up
        # the final update was never scored; check it against the best
        out = kernel.forward(params)
        final_loss = float(np.mean((out - targets) ** 2))
        if np.isfinite(final_loss) and final_loss < best_loss:
            best_loss = final_loss
            np.copyto(best_params, params)
        failed = False
        break
    else:
        stop_reason = STOP_FAILED

    if failed:
        stop_reason = STOP_FAILED
        if not math.isfinite(best_loss):
            best_loss = math.inf
    model = InrModel(arch=arch, params=best_params, seed=seed)
    result = PatchResult(
        patch_index=patch_index,
        loss=best_loss,
        psnr_db=psnr_from_loss(best_loss),
        epochs=epochs_run,
        stop_reason=stop_reason,
        wall_time_s=time.perf_counter() - start,
        failed=failed,
    )
    return model, result


def _stripe_bounds(rows: int, workers: int) -> list[tuple[int, int]]:
    """Split grid rows into at most ``workers`` contiguous stripes."""
    n_stripes = max(1, min(workers, rows))
    edges = np.linspace(0, rows, n_stripes + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(n_stripes) if edges[i] < edges[i + 1]]


def train_hologram(holo: PhaseHologram, grid: PatchGrid, arch: InrArchitecture,
                   schedule: TrainingSchedule, workers: int = 1, seed: int = 0,
                   log_fn=None) -> tuple[list[InrModel], TrainReport]:
    """Train one network per patch of a hologram.

    Patches run in raster order with warm-start chaining: each patch starts
    from the previous patch's weights. With ``workers`` > 1 the grid rows are
    split into contiguous stripes that chain independently (the first patch
    of each stripe starts fresh), so a single-worker run reproduces the pure
    sequential chain. Patch failures are recorded in the report without
    aborting the run.
    """
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    patches = [p / TWO_PI for p in split_patches(holo, grid)]

    models: list[InrModel | None] = [None] * grid.patch_count
    results: list[PatchResult | None] = [None] * grid.patch_count

    def run_stripe(row_lo: int, row_hi: int):
        prev_model: InrModel | None = None
        for r in range(row_lo, row_hi):
            for c in range(grid.cols):
                idx = r * grid.cols + c
                model, res = train_patch(
                    patches[idx], arch, schedule, seed=seed + idx,
                    init_from=prev_model, patch_index=idx, log_fn=log_fn,
                )
                models[idx] = model
                results[idx] = res
                # a failed patch should not poison the rest of the chain
                prev_model = model if not res.failed else prev_model

    stripes = _stripe_bounds(grid.rows, workers)
    if len(stripes) == 1:
        run_stripe(*stripes[0])
    else:
        with ThreadPoolExecutor(max_workers=len(stripes)) as pool:
            futures = [pool.submit(run_stripe, lo, hi) for lo, hi in stripes]
            for fut in futures:
                fut.result()

    report = TrainReport(patches=[r for r in results if r is not None])
    return [m for m in models if m is not None], report
