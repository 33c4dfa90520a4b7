"""Finite-difference verification of reverse-mode gradients.

Each check rebuilds a scalar loss from fresh leaf arrays, perturbs every
real slot of every leaf by +-h (complex leaves are perturbed in their re and
im parts independently through a float view), and compares the centered
difference against the tape gradient.  The reported discrepancy for a slot
is |ad - fd| / max(1, |ad|, |fd|), i.e. relative for O(1)-or-larger
gradients and absolute below that, so the 1e-5 bound is meaningful for tiny
gradients too.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tape import Tape, Tensor

LossBuilder = Callable[[Tape, list[Tensor]], Tensor]


def _evaluate(build: LossBuilder, leaves: Sequence[np.ndarray]) -> float:
    tape = Tape()
    tensors = [tape.param(leaf) for leaf in leaves]
    return float(build(tape, tensors).value)


def tape_gradients(build: LossBuilder, leaves: Sequence[np.ndarray]) -> list[np.ndarray]:
    tape = Tape()
    tensors = [tape.param(leaf) for leaf in leaves]
    loss = build(tape, tensors)
    tape.backward(loss)
    return [t.grad for t in tensors]


def finite_difference_gradients(
    build: LossBuilder, leaves: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    grads = []
    work = [np.array(leaf) for leaf in leaves]
    for index, leaf in enumerate(work):
        flat = leaf.view(np.float64).reshape(-1)
        grad = np.zeros_like(flat)
        for slot in range(flat.size):
            original = flat[slot]
            flat[slot] = original + h
            up = _evaluate(build, work)
            flat[slot] = original - h
            down = _evaluate(build, work)
            flat[slot] = original
            grad[slot] = (up - down) / (2.0 * h)
        if np.iscomplexobj(leaf):
            grads.append(grad.view(np.complex128).reshape(leaf.shape))
        else:
            grads.append(grad.reshape(leaf.shape))
    return grads


def max_discrepancy(
    build: LossBuilder, leaves: Sequence[np.ndarray], h: float = 1e-5
) -> float:
    """Worst slot-wise discrepancy between tape and centered-difference grads."""
    analytic = tape_gradients(build, leaves)
    numeric = finite_difference_gradients(build, leaves, h=h)
    worst = 0.0
    for ad, fd in zip(analytic, numeric):
        ad = np.ascontiguousarray(ad)
        fd = np.ascontiguousarray(fd)
        ad_flat = ad.view(np.float64).reshape(-1) if np.iscomplexobj(ad) else ad.reshape(-1)
        fd_flat = fd.view(np.float64).reshape(-1) if np.iscomplexobj(fd) else fd.reshape(-1)
        denom = np.maximum(1.0, np.maximum(np.abs(ad_flat), np.abs(fd_flat)))
        worst = max(worst, float(np.max(np.abs(ad_flat - fd_flat) / denom)))
    return worst


def _projection_loss(tape: Tape, out: Tensor, seed: int) -> Tensor:
    """Smooth scalar readout: squared sum of a fixed random real pairing.

    The pairing weights are reseeded per call so repeated evaluations of the
    same builder (as finite differencing requires) see the same loss.
    """
    from . import tape as tp

    rng = np.random.default_rng(seed)
    if np.iscomplexobj(out.value):
        wr = tape.constant(rng.standard_normal(out.value.shape))
        wi = tape.constant(rng.standard_normal(out.value.shape))
        paired = tp.add(tp.mul(tp.real(out), wr), tp.mul(tp.imag(out), wi))
    else:
        paired = tp.mul(out, tape.constant(rng.standard_normal(out.value.shape)))
    total = tp.sum_(paired)
    return tp.mul(total, total)


def op_suite(seed: int = 0, h: float = 1e-5) -> list[tuple[str, float]]:
    """Finite-difference check for every registered tape op."""
    from . import tape as tp

    rng = np.random.default_rng(seed)

    def rmat(*shape):
        return rng.standard_normal(shape)

    def cmat(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    cases: list[tuple[str, list[np.ndarray], LossBuilder]] = []

    def case(name, leaves, fn):
        proj_seed = seed + len(cases) + 1
        cases.append(
            (name, leaves, lambda tape, ts: _projection_loss(tape, fn(tape, ts), proj_seed))
        )

    case("add", [rmat(3, 4), rmat(1, 4)], lambda tape, ts: tp.add(ts[0], ts[1]))
    case("sub", [rmat(3, 4), rmat(3, 1)], lambda tape, ts: tp.sub(ts[0], ts[1]))
    case("neg", [rmat(5)], lambda tape, ts: tp.neg(ts[0]))
    case("mul", [rmat(3, 4), rmat(3, 4)], lambda tape, ts: tp.mul(ts[0], ts[1]))
    case("mul_complex", [cmat(3, 4), cmat(3, 4)], lambda tape, ts: tp.mul(ts[0], ts[1]))
    case("div", [rmat(6), rmat(6) + 3.0], lambda tape, ts: tp.div(ts[0], ts[1]))
    case("sum_axis", [rmat(3, 4)], lambda tape, ts: tp.sum_(ts[0], axis=1))
    case("mean", [rmat(3, 4)], lambda tape, ts: tp.mean(ts[0], axis=0))
    case("sqrt", [np.abs(rmat(6)) + 0.5], lambda tape, ts: tp.sqrt_(ts[0]))
    case(
        "linear",
        [rmat(4, 3), rmat(2, 3), rmat(2)],
        lambda tape, ts: tp.linear(ts[0], ts[1], ts[2]),
    )
    case(
        "einsum_shared",
        [cmat(2, 3, 5), cmat(4, 2, 5)],
        lambda tape, ts: tp.einsum2("iok,bik->bok", ts[0], ts[1]),
    )
    case(
        "einsum_grouped",
        [cmat(4, 2, 3, 5), cmat(4, 3, 5)],
        lambda tape, ts: tp.einsum2("boik,bik->bok", ts[0], ts[1]),
    )
    case("relu", [rmat(7) + 0.3], lambda tape, ts: tp.relu(ts[0]))
    case("gelu", [rmat(7)], lambda tape, ts: tp.gelu(ts[0]))
    case("tanh", [rmat(7)], lambda tape, ts: tp.tanh_(ts[0]))
    case("fft_real", [rmat(3, 16)], lambda tape, ts: tp.fft(ts[0], axes=(-1,)))
    case("fft_complex", [cmat(3, 16)], lambda tape, ts: tp.fft(ts[0], axes=(-1,)))
    case("fft_2d", [rmat(2, 8, 8)], lambda tape, ts: tp.fft(ts[0], axes=(-2, -1)))
    case("ifft", [cmat(3, 16)], lambda tape, ts: tp.ifft(ts[0], axes=(-1,)))
    case("ifft_2d", [cmat(2, 8, 8)], lambda tape, ts: tp.ifft(ts[0], axes=(-2, -1)))
    case("real", [cmat(5)], lambda tape, ts: tp.real(ts[0]))
    case("imag", [cmat(5)], lambda tape, ts: tp.imag(ts[0]))
    case("abs2", [cmat(5)], lambda tape, ts: tp.abs2(ts[0]))
    case("abs2_real", [rmat(5)], lambda tape, ts: tp.abs2(ts[0]))
    case("slice", [rmat(4, 9)], lambda tape, ts: tp.slice_(ts[0], (slice(None), slice(2, 7))))
    case(
        "slice_strided",
        [rmat(12)],
        lambda tape, ts: tp.slice_(ts[0], (slice(0, 12, 2),)),
    )
    case("reshape", [rmat(3, 8)], lambda tape, ts: tp.reshape(ts[0], (6, 4)))
    case(
        "concat",
        [rmat(2, 3), rmat(2, 5)],
        lambda tape, ts: tp.concat([ts[0], ts[1]], axis=1),
    )
    case(
        "interleaved_to_complex",
        [rmat(3, 8)],
        lambda tape, ts: tp.interleaved_to_complex(ts[0], (2, 2)),
    )
    case(
        "hermitian_embed_1d",
        [cmat(2, 4)],
        lambda tape, ts: tp.hermitian_embed(ts[0], 16, d=1),
    )
    case(
        "hermitian_embed_2d",
        [cmat(2, 3, 3)],
        lambda tape, ts: tp.hermitian_embed(ts[0], 8, d=2),
    )

    results = []
    for name, leaves, build in cases:
        results.append((name, max_discrepancy(build, leaves, h=h)))
    return results
