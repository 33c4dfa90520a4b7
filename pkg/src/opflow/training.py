"""Adam training of the weight generator with per-iteration time resampling.

Each iteration draws fresh per-sample time plans, applies the 1-D circular
shift augmentation, evaluates the weighted loss terms on one tape, and takes
one Adam step.  All randomness is derived from (seed, stream, epoch), so a
run is bit-reproducible and resuming from a checkpoint at an epoch boundary
continues the exact same trajectory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DimensionError, NonFiniteError, TrainingDivergedError
from .losses import LossWeights, sample_time_plan, total_loss, _err_batch
from .model import HyperModel, TapePropagator, propagate_batch
from .rng import named_generator
from .tape import Tape

MAX_COMP_INTERVALS = 4  # each extra interval keeps a full forward graph alive


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and loss makeup."""

    epochs: int = 500
    batch_size: int = 20
    lr: float = 1e-3
    weight_decay: float = 1e-4
    max_intervals: int = 2
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    augment_shift: bool = True
    decoupled_decay: bool = True
    reduction: str = "mean"
    eval_every: int = 10

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if not 1 <= self.max_intervals <= MAX_COMP_INTERVALS:
            raise ConfigurationError(
                f"max_intervals must lie in [1, {MAX_COMP_INTERVALS}]; each interval "
                "chains another forward graph (roughly one batch of activations each)"
            )

    def baseline_mode(self) -> "TrainConfig":
        """Final-state-only supervision; the comparison baseline shares this code path."""
        return replace(self, weights=LossWeights.baseline())


@dataclass
class TrainHistory:
    """Per-epoch loss-term means plus periodic test error at the horizon.

    Wall times are kept here for logging but deliberately stay out of the
    CSV artifacts so re-runs are byte-identical.
    """

    epochs: list[int] = field(default_factory=list)
    final: list[float] = field(default_factory=list)
    initial: list[float] = field(default_factory=list)
    inter: list[float] = field(default_factory=list)
    comp: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    test_err: list[float | None] = field(default_factory=list)
    wall_seconds: list[float] = field(default_factory=list)

    def rows(self):
        for i, e in enumerate(self.epochs):
            yield {
                "epoch": e,
                "final": self.final[i],
                "initial": self.initial[i],
                "inter": self.inter[i],
                "comp": self.comp[i],
                "total": self.total[i],
                "test_err": self.test_err[i],
            }


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    decoupled: bool = True,
) -> None:
    """One in-place Adam update with bias correction.

    Weight decay is decoupled by default (multiplicative shrink, matching the
    common reference behavior); decoupled=False folds it into the gradient.
    """
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise DimensionError("params and grads must match in count and shapes")
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if not decoupled and weight_decay:
            g = g + weight_decay * p
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        if decoupled and weight_decay:
            p *= 1.0 - lr * weight_decay
        p -= lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + eps)


def circular_shift_augment(v0, v_final, seed: int):
    """Identically cyclic-shift an initial/final pair of 1-D fields.

    Periodic 1-D dynamics commute with translations, so shifted pairs are
    new valid samples.  Accepts (channels, n) arrays; returns shifted copies.
    """
    v0 = np.asarray(v0)
    v_final = np.asarray(v_final)
    if v0.ndim != 2 or v_final.ndim != 2:
        raise ConfigurationError("circular shift augmentation applies to 1-D fields only")
    shift = int(named_generator(seed, "augmentation").integers(0, v0.shape[-1]))
    return np.roll(v0, shift, axis=-1), np.roll(v_final, shift, axis=-1)


def _shift_batch(v0: np.ndarray, v_final: np.ndarray, rng: np.random.Generator):
    shifts = rng.integers(0, v0.shape[-1], size=v0.shape[0])
    out0 = np.empty_like(v0)
    outT = np.empty_like(v_final)
    for i, s in enumerate(shifts):
        out0[i] = np.roll(v0[i], s, axis=-1)
        outT[i] = np.roll(v_final[i], s, axis=-1)
    return out0, outT


def test_error_at_horizon(model: HyperModel, v0: np.ndarray, v_final: np.ndarray) -> float:
    """Mean per-sample relative L2 of the propagated test set at the horizon."""
    pred = propagate_batch(model, v0, model.horizon)
    return float(np.mean(_err_batch(pred, v_final)))


def train(
    model: HyperModel,
    train_v0: np.ndarray,
    train_v_final: np.ndarray,
    cfg: TrainConfig,
    test_v0: np.ndarray | None = None,
    test_v_final: np.ndarray | None = None,
    start_epoch: int = 0,
    adam_state: AdamState | None = None,
    on_epoch=None,
) -> tuple[HyperModel, TrainHistory]:
    """Optimize a copy of `model`; returns (trained model, history).

    (seed, config, data) fully determine the result bitwise.  `start_epoch`
    plus a matching `adam_state` resume a run at an epoch boundary on the
    exact trajectory of an uninterrupted run.
    """
    if train_v0.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    if train_v0.shape != train_v_final.shape:
        raise DimensionError("initial and final training arrays must match in shape")
    model = model.copy()
    params = model.param_arrays()
    state = adam_state if adam_state is not None else AdamState.for_params(params)
    history = TrainHistory()
    n_samples = train_v0.shape[0]
    augment = cfg.augment_shift and model.fno.d == 1
    term_names = ("final", "initial", "inter", "comp", "total")

    for epoch in range(start_epoch, cfg.epochs):
        tick = time.perf_counter()
        order = named_generator(cfg.seed, "shuffle", epoch).permutation(n_samples)
        plan_rng = named_generator(cfg.seed, "time-plans", epoch)
        aug_rng = named_generator(cfg.seed, "augmentation", epoch)

        sums = dict.fromkeys(term_names, 0.0)
        n_batches = 0
        for lo in range(0, n_samples, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            v0 = train_v0[idx]
            v_final = train_v_final[idx]
            if augment:
                v0, v_final = _shift_batch(v0, v_final, aug_rng)
            plan = sample_time_plan(plan_rng, len(idx), cfg.max_intervals, model.horizon)

            tape = Tape()
            phi = TapePropagator(tape, model)
            try:
                terms = total_loss(
                    phi, v0, v_final, cfg.weights, plan, cfg.max_intervals, cfg.reduction
                )
            except NonFiniteError as exc:
                raise TrainingDivergedError("forward", epoch, n_batches) from exc
            for name in term_names:
                value = terms[name]
                value = float(value.value) if hasattr(value, "value") else float(value)
                if not np.isfinite(value):
                    raise TrainingDivergedError(name, epoch, n_batches)
                sums[name] += value
            tape.backward(terms["total"])
            grads = [t.grad for t in phi.flat_weight_tensors()]
            adam_step(
                params,
                grads,
                state,
                cfg.lr,
                cfg.weight_decay,
                decoupled=cfg.decoupled_decay,
            )
            n_batches += 1

        history.epochs.append(epoch)
        for name, bucket in (
            ("final", history.final),
            ("initial", history.initial),
            ("inter", history.inter),
            ("comp", history.comp),
            ("total", history.total),
        ):
            bucket.append(sums[name] / n_batches)

        measure = test_v0 is not None and (
            (epoch + 1) % cfg.eval_every == 0 or epoch == cfg.epochs - 1
        )
        history.test_err.append(
            test_error_at_horizon(model, test_v0, test_v_final) if measure else None
        )
        history.wall_seconds.append(time.perf_counter() - tick)
        if on_epoch is not None:
            on_epoch(epoch, model, state, history)

    return model, history
