"""Closed-form reference solutions used as solver oracles.

These evaluate solutions through entirely different routes than the RK4
integrators (heat-kernel transform, exact vortex decay), so agreement is a
genuine cross-check rather than a replay of the same arithmetic.
"""

from __future__ import annotations

import numpy as np

from . import spectral
from .errors import DimensionError
from .sampling import Grid
from .solvers import Field


def cole_hopf_burgers(v0: np.ndarray, nu: float, times) -> np.ndarray:
    """Viscous 1-D Burgers solution via the logarithmic substitution.

    Writing v = -2 nu (d/dx) log(phi) turns the equation into the heat
    equation for phi, solved exactly mode-by-mode.  Requires a mean-zero
    initial condition so that phi is periodic.  Returns shape (K, n).
    """
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.ndim != 1:
        raise DimensionError(f"cole_hopf_burgers expects a 1-D field, got {v0.shape}")
    n = v0.shape[0]
    k = spectral.wavenumbers(n)
    vhat = spectral.fft(v0)
    mean = vhat[0].real / n
    if abs(mean) > 1e-10:
        raise DimensionError(f"initial condition must be mean-zero, got mean {mean:.3e}")

    with np.errstate(divide="ignore", invalid="ignore"):
        anti_hat = np.where(k == 0, 0.0, vhat / (1j * k))
    antiderivative = spectral.ifft(anti_hat).real
    phi0_hat = spectral.fft(np.exp(-antiderivative / (2.0 * nu)))

    out = np.empty((len(list(times)), n))
    for i, t in enumerate(times):
        decay = np.exp(-nu * k * k * float(t))
        phi_hat = phi0_hat * decay
        phi = spectral.ifft(phi_hat).real
        phi_x = spectral.ifft(1j * k * phi_hat).real
        out[i] = -2.0 * nu * phi_x / phi
    return out


def taylor_green_vortex(grid: Grid, nu: float, t: float) -> Field:
    """Decaying vortex (sin x cos y, -cos x sin y) exp(-2 nu t)."""
    if grid.d != 2:
        raise DimensionError("taylor_green_vortex needs a 2-D grid")
    x = grid.axis_coords()[:, None]
    y = grid.axis_coords()[None, :]
    amp = np.exp(-2.0 * nu * t)
    values = np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]) * amp
    return Field(grid, values)
