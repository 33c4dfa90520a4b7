"""Reconstruction metric, training loss terms, and stochastic time plans.

The metric is the relative L2 error sqrt(sum((a-b)^2) / sum(b^2)) with the
sums running over grid points and channels.  Four loss terms drive training:
matching the labeled final state, pinning time zero to the identity,
enforcing the composition law on random time splits, and matching the final
state through chains of random sub-interval steps.  Every function here
accepts either numpy arrays or tape tensors through the propagator object,
so exact test doubles run the identical loss code as the real model.

Losses average over the batch by default so the learning rate is batch-size
invariant; pass reduction="sum" for plain sums over samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .errors import ConfigurationError, ContractError, MetricError
from .tape import Tensor

_PRESETS = {
    "default": (1.0, 1.0, 1.0, 1.0),
    "3d": (1.0, 1.0, 0.1, 1.0),
}


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights for (final, initial, inter, comp)."""

    final: float = 1.0
    initial: float = 1.0
    inter: float = 1.0
    comp: float = 1.0

    def __post_init__(self):
        if min(self.final, self.initial, self.inter, self.comp) < 0:
            raise ConfigurationError("loss weights must be nonnegative")

    @classmethod
    def preset(cls, name: str) -> "LossWeights":
        if name not in _PRESETS:
            raise ConfigurationError(f"unknown weight preset {name!r}; have {tuple(_PRESETS)}")
        return cls(*_PRESETS[name])

    @classmethod
    def baseline(cls) -> "LossWeights":
        """Final-state supervision only: plain operator training at the label time."""
        return cls(1.0, 0.0, 0.0, 0.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.final, self.initial, self.inter, self.comp)


@dataclass
class TimeSamplePlan:
    """Random times for the consistency losses, one draw per sample.

    inter_t1/inter_t2 are nonnegative with t1 + t2 <= horizon.  comp maps
    each interval count p to positive step lengths (B, p) summing to the
    horizon whose cumulative sums are stratified: the j-th split point lies
    in [(j-1) T / p, j T / p].
    """

    horizon: float
    inter_t1: np.ndarray
    inter_t2: np.ndarray
    comp: dict[int, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        t1, t2 = self.inter_t1, self.inter_t2
        if np.any(t1 < 0) or np.any(t2 < 0) or np.any(t1 + t2 > self.horizon * (1 + 1e-12)):
            raise ContractError("inter times must be nonnegative with t1 + t2 <= horizon")
        for p, deltas in self.comp.items():
            if deltas.shape[1] != p:
                raise ContractError(f"comp plan for p={p} has shape {deltas.shape}")
            if np.any(deltas <= 0):
                raise ContractError("comp intervals must be strictly positive")
            cum = np.cumsum(deltas, axis=1)
            if np.any(np.abs(cum[:, -1] - self.horizon) > 1e-9):
                raise ContractError("comp intervals must sum to the horizon")
            j = np.arange(1, p + 1)
            lo = (j - 1) * self.horizon / p
            hi = j * self.horizon / p
            if np.any(cum < lo - 1e-12) or np.any(cum > hi + 1e-12):
                raise ContractError("comp split points violate their stratification bands")


def sample_time_plan(
    rng: np.random.Generator, batch_size: int, max_intervals: int, horizon: float = 1.0
) -> TimeSamplePlan:
    """Fresh per-sample time draws for one iteration; validated on every draw.

    For the composition chains, split points are drawn stratified (the j-th
    point uniform in its [(j-1) T / p, j T / p] band) and differenced, which
    keeps every step length positive for any p.
    """
    total = rng.uniform(0.0, horizon, batch_size)
    t1 = rng.uniform(0.0, total)
    plan = TimeSamplePlan(horizon=horizon, inter_t1=t1, inter_t2=total - t1)
    for p in range(2, max_intervals + 1):
        j = np.arange(1, p)
        points = rng.uniform(
            (j - 1) * horizon / p, j * horizon / p, size=(batch_size, p - 1)
        )
        edges = np.concatenate(
            [np.zeros((batch_size, 1)), points, np.full((batch_size, 1), horizon)], axis=1
        )
        plan.comp[p] = np.diff(edges, axis=1)
    plan.validate()
    return plan


def _is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def err(a, b):
    """Relative L2 reconstruction error of `a` against reference `b` (scalar).

    Not symmetric, and undefined (raises) for an identically zero reference.
    Works on numpy arrays or tape tensors.
    """
    if _is_tensor(a) or _is_tensor(b):
        tape = (a if _is_tensor(a) else b).tape
        a = tape.constant(a)
        b = tape.constant(b)
        diff = tp.sub(a, b)
        num = tp.sum_(tp.mul(diff, diff))
        den = tp.sum_(tp.mul(b, b))
        if float(den.value) == 0.0:
            raise MetricError("err reference is identically zero")
        return tp.sqrt_(tp.div(num, den))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = float(np.sum(b * b))
    if den == 0.0:
        raise MetricError("err reference is identically zero")
    return float(np.sqrt(np.sum((a - b) ** 2) / den))


def _err_batch(a, b):
    """Per-sample relative L2 over the leading batch axis; returns (B,) values."""
    if _is_tensor(a) or _is_tensor(b):
        tape = (a if _is_tensor(a) else b).tape
        a = tape.constant(a)
        b = tape.constant(b)
        axes = tuple(range(1, a.value.ndim))
        diff = tp.sub(a, b)
        num = tp.sum_(tp.mul(diff, diff), axis=axes)
        den = tp.sum_(tp.mul(b, b), axis=axes)
        if np.any(den.value == 0.0):
            raise MetricError("err reference contains an identically zero sample")
        return tp.sqrt_(tp.div(num, den))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    axes = tuple(range(1, a.ndim))
    den = np.sum(b * b, axis=axes)
    if np.any(den == 0.0):
        raise MetricError("err reference contains an identically zero sample")
    return np.sqrt(np.sum((a - b) ** 2, axis=axes) / den)


def _reduce(per_sample, reduction: str):
    if reduction not in ("mean", "sum"):
        raise ConfigurationError(f"reduction must be 'mean' or 'sum', got {reduction!r}")
    if _is_tensor(per_sample):
        return tp.mean(per_sample) if reduction == "mean" else tp.sum_(per_sample)
    return float(np.mean(per_sample) if reduction == "mean" else np.sum(per_sample))


def loss_final(phi, v0, v_final, reduction: str = "mean"):
    """Error of propagating initial states to the labeled final time."""
    return _reduce(_err_batch(phi.apply(v0, phi.horizon), v_final), reduction)


def loss_initial(phi, v0, reduction: str = "mean"):
    """Error of the time-zero map against the identity."""
    return _reduce(_err_batch(phi.apply(v0, 0.0), v0), reduction)


def loss_inter(phi, v0, plan: TimeSamplePlan, reduction: str = "mean"):
    """Composition-law mismatch on random splits t1 + t2 <= horizon.

    Gradients flow through both branches, including the inner application of
    the chained side.
    """
    lhs = phi.apply(v0, plan.inter_t1 + plan.inter_t2)
    rhs = phi.apply(phi.apply(v0, plan.inter_t1), plan.inter_t2)
    return _reduce(_err_batch(lhs, rhs), reduction)


def loss_comp(phi, v0, v_final, plan: TimeSamplePlan, max_intervals: int,
              reduction: str = "mean"):
    """Final-state error of chained random sub-interval steps, summed over
    p = 2..max_intervals (a single interval repeats the final-state loss, so
    it is omitted).  Chains evaluate left to right for reproducibility."""
    if max_intervals < 1:
        raise ConfigurationError(f"max_intervals must be >= 1, got {max_intervals}")
    total = None
    for p in range(2, max_intervals + 1):
        deltas = plan.comp[p]
        state = v0
        for j in range(p):
            state = phi.apply(state, deltas[:, j])
        term = _err_batch(state, v_final)
        total = term if total is None else tp.add(total, term) if _is_tensor(term) else total + term
    if total is None:
        return 0.0
    return _reduce(total, reduction)


def total_loss(
    phi,
    v0,
    v_final,
    weights: LossWeights,
    plan: TimeSamplePlan,
    max_intervals: int,
    reduction: str = "mean",
) -> dict:
    """Weighted sum of the four terms; zero-weight terms are skipped (logged 0).

    Returns {"final", "initial", "inter", "comp", "total"}; entries are tape
    tensors when `phi` records on a tape, plain floats otherwise.
    """
    zero = 0.0
    terms = {"final": zero, "initial": zero, "inter": zero, "comp": zero}
    if weights.final > 0:
        terms["final"] = loss_final(phi, v0, v_final, reduction)
    if weights.initial > 0:
        terms["initial"] = loss_initial(phi, v0, reduction)
    if weights.inter > 0:
        terms["inter"] = loss_inter(phi, v0, plan, reduction)
    if weights.comp > 0:
        terms["comp"] = loss_comp(phi, v0, v_final, plan, max_intervals, reduction)

    total = None
    for name, weight in zip(("final", "initial", "inter", "comp"), weights.as_tuple()):
        if weight == 0 or not _is_tensor(terms[name]) and terms[name] == 0.0:
            continue
        part = (
            tp.mul(terms[name], weight) if _is_tensor(terms[name]) else weight * terms[name]
        )
        total = part if total is None else (
            tp.add(total, part) if _is_tensor(part) else total + part
        )
    terms["total"] = total if total is not None else zero
    return terms
