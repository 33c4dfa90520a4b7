"""Recording reverse-mode autodiff over dense float64/complex128 arrays.

A ``Tape`` owns an append-only node list; tensor ids are positions in that
list, so creation order is already a topological order and the backward
sweep visits each node exactly once, in reverse.  Values are contiguous
row-major numpy buffers, 64-bit throughout; complex values are ordinary
complex128 (interleaved re/im in memory).  Gradients treat the real and
imaginary parts as independent real slots: every complex op here is either
R^2-linear or bilinear with the conjugate rule, and every loss is real, so
no Wirtinger machinery is needed.  When a complex adjoint reaches a
real-valued node it is projected onto its real part.

Tapes are single-threaded; independent tapes may run concurrently since the
only shared state is the FFT's idempotent twiddle cache.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from . import spectral
from .errors import ContractError, DimensionError, NonFiniteError

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A value recorded on a tape.  `grad` is populated by Tape.backward."""

    __slots__ = ("tape", "id", "value", "grad", "requires_grad")

    def __init__(self, tape: "Tape", node_id: int, value: np.ndarray, requires_grad: bool):
        self.tape = tape
        self.id = node_id
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(id={self.id}, shape={self.value.shape}, dtype={self.value.dtype})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(self.tape.constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


class Tape:
    """Append-only record of forward ops plus a one-pass reverse sweep."""

    def __init__(self, check_finite: bool = True):
        self.check_finite = check_finite
        self._nodes: list[tuple[tuple[int, ...], object]] = []
        self._tensors: list[Tensor] = []
        self._params: list[Tensor] = []

    def __len__(self):
        return len(self._nodes)

    def _as_array(self, value) -> np.ndarray:
        arr = np.asarray(value)
        if arr.dtype == np.complex128 or np.iscomplexobj(arr):
            return np.ascontiguousarray(arr, dtype=np.complex128)
        return np.ascontiguousarray(arr, dtype=np.float64)

    def record(self, op: str, value, inputs: tuple[Tensor, ...], backward) -> Tensor:
        value = self._as_array(value)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NonFiniteError(f"op '{op}' produced a non-finite value")
        requires = any(t.requires_grad for t in inputs)
        tensor = Tensor(self, len(self._nodes), value, requires)
        self._nodes.append((tuple(t.id for t in inputs), backward if requires else None))
        self._tensors.append(tensor)
        return tensor

    def param(self, value) -> Tensor:
        """Leaf tensor that receives a gradient (zero if unused)."""
        tensor = self.record("param", value, (), None)
        tensor.requires_grad = True
        self._params.append(tensor)
        return tensor

    def constant(self, value) -> Tensor:
        """Leaf tensor excluded from differentiation."""
        if isinstance(value, Tensor):
            return value
        return self.record("constant", value, (), None)

    def backward(self, loss: Tensor) -> None:
        """Reverse sweep from a real scalar `loss`; fills .grad on params."""
        if loss.tape is not self:
            raise ContractError("loss tensor belongs to a different tape")
        if loss.value.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.value.shape}")
        if np.iscomplexobj(loss.value):
            raise ContractError("loss must be real")

        adjoints: list = [None] * (loss.id + 1)
        adjoints[loss.id] = np.ones_like(loss.value)
        for node_id in range(loss.id, -1, -1):
            grad_out = adjoints[node_id]
            adjoints[node_id] = None
            if grad_out is None:
                continue
            tensor = self._tensors[node_id]
            tensor.grad = grad_out
            input_ids, backward_fn = self._nodes[node_id]
            if backward_fn is None:
                continue
            contributions = backward_fn(grad_out)
            for input_id, contribution in zip(input_ids, contributions):
                if contribution is None:
                    continue
                source = self._tensors[input_id]
                if not source.requires_grad:
                    continue
                if np.iscomplexobj(contribution) and not np.iscomplexobj(source.value):
                    contribution = contribution.real
                held = adjoints[input_id]
                adjoints[input_id] = contribution if held is None else held + contribution

        for tensor in self._params:
            if tensor.id <= loss.id and tensor.grad is not None:
                continue
            tensor.grad = np.zeros_like(tensor.value)


def _lift(a, b):
    """Promote (a, b) so both are tensors on the same tape."""
    if isinstance(a, Tensor):
        return a, a.tape.constant(b)
    if isinstance(b, Tensor):
        return b.tape.constant(a), b
    raise ContractError("at least one operand must be a Tensor")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _lift(a, b)
    av, bv = a.value, b.value

    def backward(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return a.tape.record("add", av + bv, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _lift(a, b)
    av, bv = a.value, b.value

    def backward(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return a.tape.record("sub", av - bv, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return a.tape.record("neg", -a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Elementwise product; for complex factors the adjoint picks up a conjugate."""
    a, b = _lift(a, b)
    av, bv = a.value, b.value

    def backward(g):
        return (
            _unbroadcast(g * np.conj(bv), av.shape),
            _unbroadcast(g * np.conj(av), bv.shape),
        )

    return a.tape.record("mul", av * bv, (a, b), backward)


def div(a, b) -> Tensor:
    """Elementwise quotient of real tensors."""
    a, b = _lift(a, b)
    av, bv = a.value, b.value
    if np.iscomplexobj(av) or np.iscomplexobj(bv):
        raise ContractError("div is defined for real tensors only")
    out = av / bv

    def backward(g):
        return (
            _unbroadcast(g / bv, av.shape),
            _unbroadcast(-g * out / bv, bv.shape),
        )

    return a.tape.record("div", out, (a, b), backward)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    av = a.value
    value = av.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, av.shape),)

    return a.tape.record("sum", value, (a,), backward)


def mean(a: Tensor, axis=None) -> Tensor:
    av = a.value
    count = av.size if axis is None else np.prod([av.shape[ax] for ax in np.atleast_1d(axis)])
    value = av.mean(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, av.shape),)
        gk = np.expand_dims(g, axis)
        return (np.broadcast_to(gk / count, av.shape),)

    return a.tape.record("mean", value, (a,), backward)


def sqrt_(a: Tensor) -> Tensor:
    if np.iscomplexobj(a.value):
        raise ContractError("sqrt is defined for real tensors only")
    value = np.sqrt(a.value)

    def backward(g):
        return (g / (2.0 * value),)

    return a.tape.record("sqrt", value, (a,), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map y = x @ weight.T + bias for x (B, in), weight (out, in), bias (out)."""
    xv, wv, bv = x.value, weight.value, bias.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[1] or bv.shape != (wv.shape[0],):
        raise DimensionError(
            f"linear shapes do not conform: x{xv.shape}, weight{wv.shape}, bias{bv.shape}"
        )

    def backward(g):
        return g @ wv, g.T @ xv, g.sum(axis=0)

    return x.tape.record("linear", xv @ wv.T + bv, (x, weight, bias), backward)


def einsum2(pattern: str, a: Tensor, b: Tensor) -> Tensor:
    """Bilinear contraction of two tensors by an explicit einsum pattern.

    Every index of each operand must appear in the output or in the other
    operand, which holds for all the matmul-like patterns used here.
    """
    lhs, spec_out = pattern.split("->")
    spec_a, spec_b = lhs.split(",")
    av, bv = a.value, b.value

    def backward(g):
        ga = np.einsum(f"{spec_out},{spec_b}->{spec_a}", g, np.conj(bv))
        gb = np.einsum(f"{spec_out},{spec_a}->{spec_b}", g, np.conj(av))
        return ga, gb

    return a.tape.record("einsum", np.einsum(pattern, av, bv), (a, b), backward)


def relu(a: Tensor) -> Tensor:
    av = a.value
    return a.tape.record("relu", np.maximum(av, 0.0), (a,), lambda g: (g * (av > 0.0),))


def tanh_(a: Tensor) -> Tensor:
    value = np.tanh(a.value)
    return a.tape.record("tanh", value, (a,), lambda g: (g * (1.0 - value * value),))


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-CDF gelu: x * Phi(x)."""
    av = a.value
    cdf = 0.5 * (1.0 + erf(av / _SQRT2))
    pdf = np.exp(-0.5 * av * av) * _INV_SQRT_2PI
    return a.tape.record("gelu", av * cdf, (a,), lambda g: (g * (cdf + av * pdf),))


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "gelu":
        return gelu(a)
    if kind == "tanh":
        return tanh_(a)
    raise ContractError(f"unknown activation kind {kind!r}")


def fft(a: Tensor, axes=(-1,)) -> Tensor:
    """Unnormalized forward DFT; backward applies the unnormalized inverse."""
    axes = tuple(np.atleast_1d(axes))

    def backward(g):
        return (spectral.unnormalized_inverse(g, axes),)

    return a.tape.record("fft", spectral.fft(a.value, axes), (a,), backward)


def ifft(a: Tensor, axes=(-1,)) -> Tensor:
    """Normalized inverse DFT; backward applies the 1/n-scaled forward."""
    axes = tuple(np.atleast_1d(axes))
    scale = spectral.transform_size(a.value.shape, axes)

    def backward(g):
        return (spectral.fft(g, axes) / scale,)

    return a.tape.record("ifft", spectral.ifft(a.value, axes), (a,), backward)


def real(a: Tensor) -> Tensor:
    av = a.value
    if not np.iscomplexobj(av):
        return a

    def backward(g):
        return (g.astype(np.complex128),)

    return a.tape.record("real", av.real.copy(), (a,), backward)


def imag(a: Tensor) -> Tensor:
    av = a.value
    if not np.iscomplexobj(av):
        return a.tape.record("imag", np.zeros_like(av), (a,), lambda g: (np.zeros_like(av),))
    return a.tape.record("imag", av.imag.copy(), (a,), lambda g: (1j * g,))


def abs2(a: Tensor) -> Tensor:
    """Squared magnitude |a|^2, real-valued for complex input."""
    av = a.value
    if np.iscomplexobj(av):
        value = av.real * av.real + av.imag * av.imag
        return a.tape.record("abs2", value, (a,), lambda g: (2.0 * g * av,))
    return a.tape.record("abs2", av * av, (a,), lambda g: (2.0 * g * av,))


def slice_(a: Tensor, key) -> Tensor:
    """Basic (view-style) slicing; backward scatters into zeros."""
    av = a.value
    value = av[key].copy()

    def backward(g):
        out = np.zeros_like(av)
        out[key] = g.real if (np.iscomplexobj(g) and not np.iscomplexobj(av)) else g
        return (out,)

    return a.tape.record("slice", value, (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    av = a.value
    return a.tape.record("reshape", av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    tape = tensors[0].tape
    values = [t.value for t in tensors]
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, offsets, axis=axis))

    return tape.record("concat", np.concatenate(values, axis=axis), tuple(tensors), backward)


def interleaved_to_complex(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reinterpret trailing (re, im) float pairs as complex and reshape.

    Input has trailing dimension 2*prod(shape); leading dimensions are kept.
    """
    av = a.value
    lead = av.shape[:-1]
    pairs = av.reshape(lead + (-1, 2))
    value = (pairs[..., 0] + 1j * pairs[..., 1]).reshape(lead + tuple(shape))

    def backward(g):
        flat = g.reshape(lead + (-1,))
        out = np.empty(av.shape, dtype=np.float64)
        out[..., 0::2] = flat.real
        out[..., 1::2] = flat.imag
        return (out,)

    return a.tape.record("interleaved_to_complex", value, (a,), backward)


def hermitian_embed(a: Tensor, n: int, d: int = 1) -> Tensor:
    """Scatter non-negative-frequency modes into a full Hermitian spectrum.

    Input holds modes k in [0, m) along each of its trailing d spectral axes
    (d = 1 or 2).  The zero mode is projected onto its real part and every
    mode is mirrored conjugated, so the inverse transform of the result is
    real up to rounding.
    """
    av = a.value
    if not np.iscomplexobj(av):
        raise ContractError("hermitian_embed expects a complex tensor")
    if d not in (1, 2):
        raise ContractError(f"hermitian_embed supports d in (1, 2), got {d}")
    m = av.shape[-1]
    if m > n // 2:
        raise ContractError(f"mode count {m} exceeds n/2 = {n // 2}")
    mirror = (n - np.arange(m)) % n

    if d == 1:
        def forward(z):
            z = z.copy()
            z[..., 0] = z[..., 0].real
            out = np.zeros(z.shape[:-1] + (n,), dtype=np.complex128)
            out[..., :m] = z
            out[..., mirror] = np.conj(z)
            return out

        def backward(g):
            gz = g[..., :m] + np.conj(g[..., mirror])
            gz[..., 0] = g[..., 0].real
            return (gz,)
    else:
        if av.shape[-2] != m:
            raise ContractError("2-D hermitian_embed expects a square mode block")
        rows = mirror[:, None]
        cols = mirror[None, :]

        def forward(z):
            z = z.copy()
            z[..., 0, 0] = z[..., 0, 0].real
            out = np.zeros(z.shape[:-2] + (n, n), dtype=np.complex128)
            out[..., :m, :m] = z
            out[..., rows, cols] = np.conj(z)
            return out

        def backward(g):
            gz = g[..., :m, :m] + np.conj(g[..., rows, cols])
            gz[..., 0, 0] = g[..., 0, 0].real
            return (gz,)

    return a.tape.record("hermitian_embed", forward(av), (a,), backward)
