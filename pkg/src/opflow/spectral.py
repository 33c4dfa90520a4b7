"""Radix-2 FFT kernels and wavenumber bookkeeping for periodic grids.

Spatial axes live on uniform grids over [0, 2pi) with power-of-two extents,
so iterative Cooley-Tukey butterflies cover every transform in the package
and integer wavenumbers make spectral derivatives exact.  Forward transforms
are unnormalized; ``ifft`` applies the 1/n factor per transformed axis.

Twiddle and bit-reversal tables are cached per extent.  The caches are
read-mostly and idempotent under racing writers, so concurrent tapes and
solver threads may share this module safely.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

_REVERSAL: dict[int, np.ndarray] = {}
_TWIDDLES: dict[tuple[int, int], list[np.ndarray]] = {}


def require_power_of_two(n: int) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"grid extent {n} is not a power of two >= 2")


def _reversal_indices(n: int) -> np.ndarray:
    rev = _REVERSAL.get(n)
    if rev is None:
        bits = n.bit_length() - 1
        rev = np.zeros(n, dtype=np.intp)
        for i in range(1, n):
            rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
        _REVERSAL[n] = rev
    return rev


def _stage_twiddles(n: int, sign: int) -> list[np.ndarray]:
    key = (n, sign)
    tables = _TWIDDLES.get(key)
    if tables is None:
        tables = []
        m = 2
        while m <= n:
            tables.append(np.exp(sign * 2j * np.pi * np.arange(m // 2) / m))
            m *= 2
        _TWIDDLES[key] = tables
    return tables


def _transform_last(x: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalized DFT along the last axis; sign=-1 forward, +1 inverse."""
    n = x.shape[-1]
    require_power_of_two(n)
    y = np.ascontiguousarray(x, dtype=np.complex128)[..., _reversal_indices(n)]
    for tw in _stage_twiddles(n, sign):
        half = tw.shape[0]
        m = 2 * half
        z = y.reshape(y.shape[:-1] + (n // m, m))
        t = z[..., half:] * tw
        u = z[..., :half].copy()
        z[..., :half] = u + t
        z[..., half:] = u - t
    return y


def _normalize_axes(x: np.ndarray, axes) -> tuple[int, ...]:
    if axes is None:
        axes = (-1,)
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(ax % x.ndim for ax in axes)


def fft(x: np.ndarray, axes=(-1,)) -> np.ndarray:
    """Unnormalized forward transform along `axes`."""
    out = np.asarray(x)
    for ax in _normalize_axes(out, axes):
        out = np.moveaxis(_transform_last(np.moveaxis(out, ax, -1), -1), -1, ax)
    return out


def ifft(x: np.ndarray, axes=(-1,)) -> np.ndarray:
    """Inverse transform along `axes`, normalized by 1/n per axis."""
    out = np.asarray(x)
    for ax in _normalize_axes(out, axes):
        moved = np.moveaxis(out, ax, -1)
        out = np.moveaxis(_transform_last(moved, +1) / moved.shape[-1], -1, ax)
    return out


def unnormalized_inverse(x: np.ndarray, axes=(-1,)) -> np.ndarray:
    """Inverse transform without the 1/n factor (the adjoint of `fft`)."""
    out = np.asarray(x)
    for ax in _normalize_axes(out, axes):
        out = np.moveaxis(_transform_last(np.moveaxis(out, ax, -1), +1), -1, ax)
    return out


def transform_size(shape, axes) -> int:
    """Product of the extents along the transformed axes."""
    ndim = len(shape)
    total = 1
    for ax in axes if not isinstance(axes, int) else (axes,):
        total *= shape[ax % ndim]
    return total


def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers [0, 1, ..., n/2-1, -n/2, ..., -1] for a 2pi period."""
    require_power_of_two(n)
    return np.concatenate([np.arange(0, n // 2), np.arange(-n // 2, 0)]).astype(np.float64)


def derivative_wavenumbers(n: int) -> np.ndarray:
    """Wavenumbers for odd-order derivatives: the self-conjugate Nyquist bin is
    zeroed so differentiating a real field keeps its spectrum Hermitian."""
    k = wavenumbers(n)
    k[n // 2] = 0.0
    return k


def dealias_mask(n: int, d: int = 1) -> np.ndarray:
    """Two-thirds-rule mask: keep |k| <= n//3 along each of d axes."""
    k = wavenumbers(n)
    keep = (np.abs(k) <= n // 3).astype(np.float64)
    if d == 1:
        return keep
    if d == 2:
        return keep[:, None] * keep[None, :]
    raise ConfigurationError(f"dealias_mask supports d in (1, 2), got {d}")
