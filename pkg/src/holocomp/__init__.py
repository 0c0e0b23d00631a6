"""Patch-wise implicit-network compression for phase-only holograms.

Pipeline: synthesize (or import) a three-channel phase-only hologram, split
it into patches, overfit one small coordinate network per patch, store the
weights in a compact container, and verify fidelity on the hologram plane
and on simulated focal-plane reconstructions.
"""

__version__ = "0.1.0"

from .codec import (
    CodecInfo,
    bytes_on_disk_ratio,
    compression_ratio,
    compression_ratio_exact,
    decode,
    decompress,
    encode,
)
from .hologram import (
    OpticalConfig,
    PatchGrid,
    PhaseHologram,
    export_phase_pngs,
    import_phase_pngs,
    load_holo,
    merge_patches,
    save_holo,
    split_patches,
    wrap_phase,
)
from .metrics import QualityReport, evaluate_pair, psnr, ssim
from .optics import (
    ComplexField,
    ReconstructionStack,
    double_phase_decode,
    double_phase_encode,
    max_propagation_distance,
    propagate_asm,
    reconstruct,
    synthesize_hologram,
)
from .training import (
    AdamState,
    PatchResult,
    TrainingSchedule,
    TrainReport,
    adam_step,
    train_hologram,
    train_patch,
)

__all__ = [
    "AdamState",
    "CodecInfo",
    "ComplexField",
    "OpticalConfig",
    "PatchGrid",
    "PatchResult",
    "PhaseHologram",
    "QualityReport",
    "ReconstructionStack",
    "TrainReport",
    "TrainingSchedule",
    "adam_step",
    "bytes_on_disk_ratio",
    "compression_ratio",
    "compression_ratio_exact",
    "decode",
    "decompress",
    "double_phase_decode",
    "double_phase_encode",
    "encode",
    "evaluate_pair",
    "export_phase_pngs",
    "import_phase_pngs",
    "load_holo",
    "max_propagation_distance",
    "merge_patches",
    "propagate_asm",
    "psnr",
    "reconstruct",
    "save_holo",
    "split_patches",
    "ssim",
    "synthesize_hologram",
    "train_hologram",
    "train_patch",
    "wrap_phase",
]
