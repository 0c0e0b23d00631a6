"""Network architectures, parameter layout and initialization.

Three coordinate-network families are supported: a ReLU MLP, a SIREN (sine
activations, frequency-scaled first layer) and a FiLM-modulated SIREN whose
per-layer sine arguments are scaled/shifted by a small mapping network fed
from a learned latent vector.

All parameters of a model live in one flat float64 vector. The layout is
fixed and shared by every backend and by the codec:

- trunk layers in order, each as W (out x in, row-major) then b (out);
- for the FiLM variant, then: latent vector, mapping hidden W and b,
  mapping output W and b. The mapping output holds the scale offsets for
  every sine layer (concatenated in layer order) followed by the shifts;
  the effective per-layer scale is 1 + offset, so a zero-initialized
  mapping output leaves the trunk behaving as a plain SIREN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StructuralError, ValidationError

KIND_MLP = "mlp"
KIND_SIREN = "siren"
KIND_FILM_SIREN = "film-siren"
KINDS = (KIND_MLP, KIND_SIREN, KIND_FILM_SIREN)

DEFAULT_OMEGA0 = 30.0
DEFAULT_LATENT_DIM = 16


@dataclass(frozen=True)
class InrArchitecture:
    """Architecture descriptor for one patch network.

    ``hidden`` lists the widths of the sine/ReLU layers; input is the 2-D
    patch coordinate, output one value per color channel. ``latent_dim`` and
    ``mapping_hidden`` are only meaningful for the FiLM variant.
    """

    kind: str
    hidden: tuple[int, ...]
    omega0: float = DEFAULT_OMEGA0
    latent_dim: int = 0
    mapping_hidden: int = 0
    in_dim: int = 2
    out_dim: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown architecture kind {self.kind!r}")
        hidden = tuple(int(w) for w in self.hidden)
        if not hidden or any(w < 1 for w in hidden):
            raise ValidationError("hidden widths must be positive")
        object.__setattr__(self, "hidden", hidden)
        if self.kind != KIND_MLP and self.omega0 <= 0:
            raise ValidationError("omega0 must be positive for sine networks")
        if self.kind == KIND_FILM_SIREN:
            if self.latent_dim < 1 or self.mapping_hidden < 1:
                raise ValidationError("film-siren needs latent_dim and mapping_hidden >= 1")
        elif self.latent_dim or self.mapping_hidden:
            raise ValidationError(f"{self.kind} takes no latent/mapping parameters")

    @property
    def trunk_dims(self) -> tuple[int, ...]:
        return (self.in_dim, *self.hidden, self.out_dim)

    @property
    def film_out_dim(self) -> int:
        """Size of the mapping network output: a scale and a shift per sine unit."""
        return 2 * sum(self.hidden)


def parameter_count(arch: InrArchitecture) -> int:
    """Total number of learnable scalars in the flat parameter vector."""
    dims = arch.trunk_dims
    count = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
    if arch.kind == KIND_FILM_SIREN:
        f = arch.film_out_dim
        count += arch.latent_dim
        count += arch.latent_dim * arch.mapping_hidden + arch.mapping_hidden
        count += arch.mapping_hidden * f + f
    return count


def parameter_layout(arch: InrArchitecture) -> list[tuple[str, tuple[int, ...], slice]]:
    """Ordered (name, shape, slice) description of the flat vector."""
    layout: list[tuple[str, tuple[int, ...], slice]] = []
    offset = 0

    def add(name: str, shape: tuple[int, ...]):
        nonlocal offset
        size = int(np.prod(shape))
        layout.append((name, shape, slice(offset, offset + size)))
        offset += size

    dims = arch.trunk_dims
    for layer in range(len(dims) - 1):
        add(f"trunk{layer}.w", (dims[layer + 1], dims[layer]))
        add(f"trunk{layer}.b", (dims[layer + 1],))
    if arch.kind == KIND_FILM_SIREN:
        add("latent", (arch.latent_dim,))
        add("mapping0.w", (arch.mapping_hidden, arch.latent_dim))
        add("mapping0.b", (arch.mapping_hidden,))
        add("mapping1.w", (arch.film_out_dim, arch.mapping_hidden))
        add("mapping1.b", (arch.film_out_dim,))
    return layout


# ---------------------------------------------------------------------------
# Presets
#
# Hidden widths chosen so each (kind, patch size) lands within 5% of the
# published parameter budget while its parameters/samples ratio rounds to
# the same integer percent (see codec.compression_ratio). FiLM presets put
# roughly a third of the budget into the mapping network.
# ---------------------------------------------------------------------------

PATCH_SIZES = (64, 96, 128, 160)

_PRESET_HIDDEN = {
    (KIND_MLP, 64): (48, 48, 48),
    (KIND_MLP, 96): (72, 72, 72),
    (KIND_MLP, 128): (97, 97, 97),
    (KIND_MLP, 160): (124, 124, 124),
    (KIND_SIREN, 64): (48, 47, 48),
    (KIND_SIREN, 96): (72, 72, 72),
    (KIND_SIREN, 128): (97, 97, 97),
    (KIND_SIREN, 160): (124, 124, 124),
    (KIND_FILM_SIREN, 64): (37, 37, 37),
    (KIND_FILM_SIREN, 96): (57, 57, 57),
    (KIND_FILM_SIREN, 128): (77, 77, 77),
    (KIND_FILM_SIREN, 160): (98, 98, 98),
}

_PRESET_MAPPING_HIDDEN = {64: 7, 96: 10, 128: 13, 160: 17}


def preset(kind: str, patch_size: int) -> InrArchitecture:
    """Return the stock architecture for a (kind, patch size) pair."""
    key = (kind, int(patch_size))
    if key not in _PRESET_HIDDEN:
        raise ValidationError(
            f"no preset for kind={kind!r}, patch={patch_size}; "
            f"supported patch sizes are {PATCH_SIZES}"
        )
    hidden = _PRESET_HIDDEN[key]
    if kind == KIND_FILM_SIREN:
        return InrArchitecture(
            kind=kind,
            hidden=hidden,
            latent_dim=DEFAULT_LATENT_DIM,
            mapping_hidden=_PRESET_MAPPING_HIDDEN[int(patch_size)],
        )
    return InrArchitecture(kind=kind, hidden=hidden)


# ---------------------------------------------------------------------------
# Models and initialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InrModel:
    """One patch's network: architecture plus flat parameter vector."""

    arch: InrArchitecture
    params: np.ndarray
    seed: int = 0

    def __post_init__(self):
        params = np.ascontiguousarray(self.params, dtype=np.float64)
        expected = parameter_count(self.arch)
        if params.shape != (expected,):
            raise StructuralError(
                f"parameter vector has shape {params.shape}, expected ({expected},)"
            )
        if not np.isfinite(params).all():
            raise ValidationError("parameters contain non-finite values")
        object.__setattr__(self, "params", params)


def init_model(arch: InrArchitecture, seed: int) -> InrModel:
    """Deterministically initialize a model from an integer seed.

    - ReLU MLP: He-uniform weights, zero biases.
    - SIREN: first layer uniform(-1/in, 1/in); later layers
      uniform(+-sqrt(6/in)/omega0); biases uniform(+-1/sqrt(in)).
    - FiLM SIREN: trunk as SIREN; unit-normal latent; He-uniform mapping
      hidden layer; zero mapping output so the fresh model evaluates
      exactly like the unconditioned SIREN trunk.
    """
    rng = np.random.default_rng(seed)
    params = np.empty(parameter_count(arch), dtype=np.float64)
    dims = arch.trunk_dims
    offset = 0

    def draw(size: int, values: np.ndarray):
        nonlocal offset
        params[offset : offset + size] = values
        offset += size

    for layer in range(len(dims) - 1):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        w_size = fan_in * fan_out
        if arch.kind == KIND_MLP:
            bound = np.sqrt(6.0 / fan_in)
            draw(w_size, rng.uniform(-bound, bound, w_size))
            draw(fan_out, np.zeros(fan_out))
        else:
            if layer == 0:
                bound = 1.0 / fan_in
            else:
                bound = np.sqrt(6.0 / fan_in) / arch.omega0
            draw(w_size, rng.uniform(-bound, bound, w_size))
            draw(fan_out, rng.uniform(-1.0 / np.sqrt(fan_in), 1.0 / np.sqrt(fan_in), fan_out))

    if arch.kind == KIND_FILM_SIREN:
        draw(arch.latent_dim, rng.standard_normal(arch.latent_dim))
        bound = np.sqrt(6.0 / arch.latent_dim)
        draw(arch.latent_dim * arch.mapping_hidden,
             rng.uniform(-bound, bound, arch.latent_dim * arch.mapping_hidden))
        draw(arch.mapping_hidden, np.zeros(arch.mapping_hidden))
        f = arch.film_out_dim
        draw(arch.mapping_hidden * f, np.zeros(arch.mapping_hidden * f))
        draw(f, np.zeros(f))

    assert offset == params.size
    return InrModel(arch=arch, params=params, seed=int(seed))
