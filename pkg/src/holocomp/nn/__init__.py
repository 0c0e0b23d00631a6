"""Tiny coordinate-network engine with a compiled fast path.

The hot training kernels exist twice: a Cython extension
(``holocomp.nn._kernels``) and a pure-NumPy fallback
(``holocomp.nn.numpy_backend``). The extension is picked at import time when
it is built; set ``HOLOCOMP_BACKEND=python`` or ``=ext`` to force a choice
(``ext`` raises if the extension is missing). Both backends implement the
same math on the same flat parameter layout; ``benchmarks/bench_backends.py``
compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_backend
from .arch import (
    DEFAULT_LATENT_DIM,
    DEFAULT_OMEGA0,
    KIND_FILM_SIREN,
    KIND_MLP,
    KIND_SIREN,
    KINDS,
    PATCH_SIZES,
    InrArchitecture,
    InrModel,
    init_model,
    parameter_count,
    parameter_layout,
    preset,
)
from .numpy_backend import adam_update

__all__ = [
    "DEFAULT_LATENT_DIM",
    "DEFAULT_OMEGA0",
    "KIND_FILM_SIREN",
    "KIND_MLP",
    "KIND_SIREN",
    "KINDS",
    "PATCH_SIZES",
    "InrArchitecture",
    "InrModel",
    "adam_update",
    "backend_name",
    "forward",
    "init_model",
    "loss_and_grad",
    "make_kernel",
    "parameter_count",
    "parameter_layout",
    "preset",
]


def _select_backend():
    requested = os.environ.get("HOLOCOMP_BACKEND", "auto").lower()
    if requested not in ("auto", "ext", "python"):
        raise ValueError(f"HOLOCOMP_BACKEND must be auto, ext or python, not {requested!r}")
    if requested == "python":
        return numpy_backend
    try:
        from . import _kernels  # built by setup.py; absent on pure installs
        return _kernels
    except ImportError:
        if requested == "ext":
            raise ImportError("HOLOCOMP_BACKEND=ext but the compiled kernels are not built")
        return numpy_backend


_backend = _select_backend()


def backend_name() -> str:
    """Name of the active kernel backend: ``ext`` or ``python``."""
    return _backend.NAME


def make_kernel(arch: InrArchitecture, coords: np.ndarray):
    """Bind the active backend to (architecture, coordinate batch)."""
    return _backend.Kernel(arch, coords)


def forward(model: InrModel, coords: np.ndarray) -> np.ndarray:
    """Evaluate a model on a batch of (x, y) coordinates in [-1, 1]^2."""
    return make_kernel(model.arch, coords).forward(model.params)


def loss_and_grad(model: InrModel, coords: np.ndarray, targets: np.ndarray):
    """MSE loss over the batch and its gradient w.r.t. the flat parameters."""
    return make_kernel(model.arch, coords).loss_and_grad(model.params, targets)
