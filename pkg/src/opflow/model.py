"""The learned propagator: a time-conditioned spectral operator network.

A small fully connected generator maps a scalar time (through tanh) to the
flat weight vector of a primary network, which is a Fourier-layer operator:
lift, then `layers` blocks of (low-mode spectral multiply + pointwise
affine, activation except on the last block), then an affine projection.
Spectral weights act on the non-negative-frequency mode block and outputs
are forced real by symmetric completion, so the primary map sends real
fields to real fields of the same shape.

The flat weight vector has a fixed documented layout (see `param_layout`);
complex spectral weights are stored as interleaved (re, im) float pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .errors import ConfigurationError, ContractError, DimensionError
from .rng import named_generator
from .sampling import Grid
from .solvers import Field
from .tape import Tape, Tensor

_ACTIVATIONS = ("relu", "gelu", "tanh")


@dataclass(frozen=True)
class FnoConfig:
    """Architecture of the primary network."""

    d: int = 1
    width: int = 16
    modes: int = 12
    layers: int = 4
    activation: str = "gelu"
    coord_channels: bool = True

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigurationError(f"d must be 1 or 2, got {self.d}")
        if self.modes < 1:
            raise ConfigurationError(f"modes must be >= 1, got {self.modes}")
        if self.width < 1 or self.layers < 1:
            raise ConfigurationError("width and layers must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {_ACTIVATIONS}")

    @property
    def in_channels(self) -> int:
        return self.d + (self.d if self.coord_channels else 0)

    @property
    def out_channels(self) -> int:
        return self.d

    @property
    def mode_shape(self) -> tuple[int, ...]:
        return (self.modes,) * self.d

    def check_grid(self, n: int) -> None:
        if n < 2 * self.modes:
            raise ConfigurationError(f"grid extent {n} is below 2*modes = {2 * self.modes}")


@dataclass(frozen=True)
class HyperConfig:
    """Architecture of the weight generator."""

    hidden_layers: int = 3
    hidden_width: int = 32
    activation: str = "relu"

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ConfigurationError("hidden_layers and hidden_width must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {_ACTIVATIONS}")


@dataclass(frozen=True)
class ParamSlot:
    name: str
    offset: int
    shape: tuple[int, ...]
    is_complex: bool

    @property
    def size(self) -> int:
        """Number of float64 slots occupied in the flat vector."""
        count = int(np.prod(self.shape))
        return 2 * count if self.is_complex else count


def param_layout(cfg: FnoConfig) -> tuple[ParamSlot, ...]:
    """Documented offset table of the flat primary weight vector."""
    slots: list[ParamSlot] = []
    offset = 0

    def slot(name, shape, is_complex=False):
        nonlocal offset
        s = ParamSlot(name, offset, tuple(shape), is_complex)
        slots.append(s)
        offset += s.size

    w = cfg.width
    slot("lift.weight", (w, cfg.in_channels))
    slot("lift.bias", (w,))
    for j in range(cfg.layers):
        slot(f"block{j}.spectral", (w, w) + cfg.mode_shape, is_complex=True)
        slot(f"block{j}.pointwise.weight", (w, w))
        slot(f"block{j}.pointwise.bias", (w,))
    slot("proj.weight", (cfg.out_channels, w))
    slot("proj.bias", (cfg.out_channels,))
    return tuple(slots)


def param_count(cfg: FnoConfig) -> int:
    """Closed-form length of the flat primary weight vector."""
    w = cfg.width
    per_block = 2 * w * w * cfg.modes**cfg.d + w * (w + 1)
    return w * (cfg.in_channels + 1) + cfg.layers * per_block + cfg.out_channels * (w + 1)


def unpack_params(vector: np.ndarray, cfg: FnoConfig) -> dict[str, np.ndarray]:
    """Flat vector -> named arrays (complex for spectral slots)."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (param_count(cfg),):
        raise DimensionError(
            f"weight vector has length {vector.shape}, expected ({param_count(cfg)},)"
        )
    parts = {}
    for s in param_layout(cfg):
        seg = vector[s.offset : s.offset + s.size]
        if s.is_complex:
            pairs = seg.reshape(-1, 2)
            parts[s.name] = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(s.shape)
        else:
            parts[s.name] = seg.reshape(s.shape).copy()
    return parts


def pack_params(parts: dict[str, np.ndarray], cfg: FnoConfig) -> np.ndarray:
    """Named arrays -> flat vector; inverse of `unpack_params` bit for bit."""
    vector = np.empty(param_count(cfg), dtype=np.float64)
    for s in param_layout(cfg):
        arr = np.asarray(parts[s.name])
        if arr.shape != s.shape:
            raise DimensionError(f"{s.name} has shape {arr.shape}, expected {s.shape}")
        seg = vector[s.offset : s.offset + s.size]
        if s.is_complex:
            flat = arr.reshape(-1)
            seg[0::2] = flat.real
            seg[1::2] = flat.imag
        else:
            seg[:] = arr.reshape(-1)
    return vector


def init_primary_vector(cfg: FnoConfig, rng: np.random.Generator) -> np.ndarray:
    """Standard init for the primary network, packed flat.

    Affine maps take U[-1/sqrt(fan_in), 1/sqrt(fan_in)]; spectral weights take
    symmetric uniform complex entries scaled by 1/(width*width).
    """
    parts = {}
    spectral_scale = 1.0 / (cfg.width * cfg.width)
    for s in param_layout(cfg):
        if s.is_complex:
            re = rng.uniform(-1.0, 1.0, s.shape)
            im = rng.uniform(-1.0, 1.0, s.shape)
            parts[s.name] = spectral_scale * (re + 1j * im)
        elif s.name.endswith("bias"):
            parts[s.name] = np.zeros(s.shape)
        else:
            bound = 1.0 / np.sqrt(s.shape[-1])
            parts[s.name] = rng.uniform(-bound, bound, s.shape)
    return pack_params(parts, cfg)


@dataclass
class HyperModel:
    """Generator weights plus both architecture configs; realizes the propagator."""

    fno: FnoConfig
    hyper: HyperConfig
    weights: list[tuple[np.ndarray, np.ndarray]]
    horizon: float = 1.0

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in self.weights:
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "HyperModel":
        return HyperModel(
            self.fno,
            self.hyper,
            [(w.copy(), b.copy()) for w, b in self.weights],
            self.horizon,
        )

    def size(self) -> int:
        return sum(a.size for a in self.param_arrays())


def init_hyper_model(
    fno_cfg: FnoConfig,
    hyper_cfg: HyperConfig | None = None,
    seed: int = 0,
    horizon: float = 1.0,
    head_scale: float = 1e-3,
) -> HyperModel:
    """Seeded init of the weight generator.

    Hidden affines use the usual uniform fan-in bound.  The output head gets
    a `head_scale`-shrunk weight matrix and, as its bias, a standard primary
    init vector, so an untrained model behaves like a freshly initialized
    primary network that is nearly constant in time; without the shrink, the
    huge output head makes early gradient variance explode.
    """
    hyper_cfg = hyper_cfg or HyperConfig()
    rng = named_generator(seed, "init")
    sizes = [1] + [hyper_cfg.hidden_width] * hyper_cfg.hidden_layers + [param_count(fno_cfg)]
    weights = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, (fan_out, fan_in))
        if i == len(sizes) - 2:
            w *= head_scale
            b = init_primary_vector(fno_cfg, rng)
        else:
            b = rng.uniform(-bound, bound, fan_out)
        weights.append((w, b))
    return HyperModel(fno_cfg, hyper_cfg, weights, horizon)


def hyper_forward(
    tape: Tape,
    weights: list[tuple[Tensor, Tensor]],
    cfg: HyperConfig,
    t: Tensor,
) -> Tensor:
    """Map times (B, 1) to weight vectors (B, P): tanh, hidden MLP, affine head."""
    x = tp.tanh_(t)
    for w, b in weights[:-1]:
        x = tp.activation(tp.linear(x, w, b), cfg.activation)
    w, b = weights[-1]
    return tp.linear(x, w, b)


def _bias_reshape(bias: Tensor, grouped: bool, d: int) -> Tensor:
    trail = (1,) * d
    if grouped:
        return tp.reshape(bias, (bias.shape[0],) + bias.shape[1:] + trail)
    return tp.reshape(bias, (1,) + bias.shape + trail)


class _Patterns:
    """Einsum patterns for shared (one weight vector) vs grouped (per sample)."""

    def __init__(self, d: int, grouped: bool):
        sp = "n" if d == 1 else "xy"
        md = "k" if d == 1 else "kl"
        wp = "b" if grouped else ""
        self.affine = f"{wp}wc,bc{sp}->bw{sp}"
        self.spectral = f"{wp}oi{md},bi{md}->bo{md}"


def primary_forward(tape: Tape, w: Tensor, cfg: FnoConfig, v: Tensor) -> Tensor:
    """Apply the primary network with weights `w` to fields `v` (B, d, spatial...).

    `w` is either one flat vector (P,) shared by the whole batch or a per
    sample batch (B, P).  Output shape equals input shape.
    """
    grouped = w.value.ndim == 2
    if w.value.shape[-1] != param_count(cfg):
        raise DimensionError(
            f"weight vector length {w.value.shape[-1]} != param_count {param_count(cfg)}"
        )
    batch = v.value.shape[0]
    n = v.value.shape[-1]
    cfg.check_grid(n)
    if v.value.ndim != cfg.d + 2 or v.value.shape[1] != cfg.d:
        raise DimensionError(f"fields must be (B, {cfg.d}, spatial...), got {v.value.shape}")
    if grouped and w.value.shape[0] != batch:
        raise DimensionError("grouped weights must match the field batch")

    axes = (-1,) if cfg.d == 1 else (-2, -1)
    pats = _Patterns(cfg.d, grouped)
    slots = {s.name: s for s in param_layout(cfg)}

    def segment(name):
        s = slots[name]
        if grouped:
            seg = tp.slice_(w, (slice(None), slice(s.offset, s.offset + s.size)))
            lead = (batch,)
        else:
            seg = tp.slice_(w, (slice(s.offset, s.offset + s.size),))
            lead = ()
        if s.is_complex:
            return tp.interleaved_to_complex(seg, s.shape)
        return tp.reshape(seg, lead + s.shape)

    if cfg.coord_channels:
        coords = np.stack(
            np.meshgrid(*([np.arange(n) / n] * cfg.d), indexing="ij"), axis=0
        )
        coords = np.broadcast_to(coords[None], (batch,) + coords.shape).copy()
        h = tp.concat([v, tape.constant(coords)], axis=1)
    else:
        h = v

    h = tp.add(
        tp.einsum2(pats.affine, segment("lift.weight"), h),
        _bias_reshape(segment("lift.bias"), grouped, cfg.d),
    )

    mode_slices = (slice(0, cfg.modes),) * cfg.d
    for j in range(cfg.layers):
        spec_w = segment(f"block{j}.spectral")
        spectrum = tp.fft(h, axes=axes)
        low = tp.slice_(spectrum, (slice(None), slice(None)) + mode_slices)
        mixed = tp.einsum2(pats.spectral, spec_w, low)
        full = tp.hermitian_embed(mixed, n, d=cfg.d)
        spectral_path = tp.real(tp.ifft(full, axes=axes))
        pointwise = tp.einsum2(pats.affine, segment(f"block{j}.pointwise.weight"), h)
        h = tp.add(
            tp.add(spectral_path, pointwise),
            _bias_reshape(segment(f"block{j}.pointwise.bias"), grouped, cfg.d),
        )
        if j < cfg.layers - 1:
            h = tp.activation(h, cfg.activation)

    return tp.add(
        tp.einsum2(pats.affine, segment("proj.weight"), h),
        _bias_reshape(segment("proj.bias"), grouped, cfg.d),
    )


class TapePropagator:
    """Differentiable propagator bound to one tape.

    `apply(v, t)` runs the primary network with generator output at time(s)
    t; a scalar t shares one weight vector across the batch (cached per
    value), an array t generates per-sample weights.
    """

    def __init__(self, tape: Tape, model: HyperModel, trainable: bool = True):
        self.tape = tape
        self.model = model
        make = tape.param if trainable else tape.constant
        self.weight_tensors = [(make(w), make(b)) for w, b in model.weights]
        self._shared_cache: dict[float, Tensor] = {}

    @property
    def horizon(self) -> float:
        return self.model.horizon

    def flat_weight_tensors(self) -> list[Tensor]:
        out = []
        for w, b in self.weight_tensors:
            out.append(w)
            out.append(b)
        return out

    def weights_at(self, t) -> Tensor:
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        t_in = self.tape.constant(t_arr[:, None])
        return hyper_forward(self.tape, self.weight_tensors, self.model.hyper, t_in)

    def apply(self, v, t) -> Tensor:
        if not isinstance(v, Tensor):
            v = self.tape.constant(np.asarray(v, dtype=np.float64))
        if np.ndim(t) == 0:
            key = float(t)
            w = self._shared_cache.get(key)
            if w is None:
                w = tp.reshape(self.weights_at([key]), (param_count(self.model.fno),))
                self._shared_cache[key] = w
        else:
            w = self.weights_at(t)
        return primary_forward(self.tape, w, self.model.fno, v)


def propagate(model: HyperModel, v0, t: float):
    """Convenience forward pass without gradients.

    Accepts a Field or a (channels, spatial...) array and returns the same
    kind; deterministic in (model, v0, t).
    """
    values = v0.values if isinstance(v0, Field) else np.asarray(v0, dtype=np.float64)
    out = propagate_batch(model, values[None], t)[0]
    if isinstance(v0, Field):
        return Field(v0.grid, out)
    return out


def propagate_batch(model: HyperModel, values: np.ndarray, t) -> np.ndarray:
    """Batched no-gradient forward pass; t is a scalar or per-sample array."""
    tape = Tape()
    phi = TapePropagator(tape, model, trainable=False)
    return phi.apply(values, t).value
