"""Random initial conditions on periodic grids.

Two families: 1-D Gaussian random fields defined by a rational power
spectrum, and 2-D stationary Gaussian processes with a periodic product
kernel.  Both are synthesized spectrally, so samples are exactly periodic,
exactly mean-controlled, and bit-reproducible from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import ConfigurationError, DimensionError, KernelError

NEGATIVE_COEFF_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid over [0, 2pi) per axis."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigurationError(f"grid dimension must be 1 or 2, got {self.d}")
        spectral.require_power_of_two(self.n)

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d


@dataclass(frozen=True)
class GrfSpectrum:
    """Rational spectrum: covariance eigenvalue scale * (k^2 + tau^2) ** -exponent.

    The defaults describe the measure N(0, 625 (-Laplacian + 25 I)^-2), a
    common choice for 1-D viscous-flow initial data; both knobs are exposed
    so other spectra can be swapped in.
    """

    scale: float = 625.0
    tau: float = 5.0
    exponent: float = 2.0

    def __post_init__(self):
        if self.scale <= 0 or self.exponent <= 0:
            raise ConfigurationError("GrfSpectrum requires scale > 0 and exponent > 0")

    def covariance_eigenvalue(self, k: np.ndarray) -> np.ndarray:
        return self.scale * (k * k + self.tau * self.tau) ** (-self.exponent)


@dataclass(frozen=True)
class GpKernelConfig:
    """Amplitude and length scale of the separable periodic kernel."""

    sigma: float = 1.0
    ell: float = 0.6

    def __post_init__(self):
        if self.sigma <= 0 or self.ell <= 0:
            raise ConfigurationError("GpKernelConfig requires sigma > 0 and ell > 0")


def periodic_kernel_value(cfg: GpKernelConfig, dx, dy) -> np.ndarray:
    """Closed-form covariance at lag (dx, dy)."""
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    inv = 2.0 / (cfg.ell * cfg.ell)
    return cfg.sigma**2 * np.exp(-inv * np.sin(np.abs(dx) / 2.0) ** 2) * np.exp(
        -inv * np.sin(np.abs(dy) / 2.0) ** 2
    )


def sample_grf_1d(grid: Grid, seed: int, spectrum: GrfSpectrum | None = None) -> np.ndarray:
    """Mean-zero real 1-D field with the configured power spectrum.

    Mode k > 0 carries a complex Gaussian coefficient of variance
    c_k / (2 pi) (so the pointwise variance matches the continuum measure),
    the zero mode is pinned to 0, and the conjugate half enforces realness.
    """
    if grid.d != 1:
        raise DimensionError(f"sample_grf_1d needs a 1-D grid, got d={grid.d}")
    spectrum = spectrum or GrfSpectrum()
    n = grid.n
    rng = np.random.default_rng(seed)
    half = n // 2

    k = np.arange(1, half)
    amps = np.sqrt(spectrum.covariance_eigenvalue(k) / (2.0 * np.pi))
    re = rng.standard_normal(half - 1)
    im = rng.standard_normal(half - 1)
    nyquist = rng.standard_normal()

    coeffs = np.zeros(n, dtype=np.complex128)
    coeffs[1:half] = amps * (re + 1j * im) / np.sqrt(2.0)
    coeffs[n - 1 : half : -1] = np.conj(coeffs[1:half])
    coeffs[half] = np.sqrt(spectrum.covariance_eigenvalue(np.array([half]))[0] / (2.0 * np.pi)) * nyquist

    field = spectral.unnormalized_inverse(coeffs)
    residue = float(np.max(np.abs(field.imag)))
    if residue > 1e-12:
        raise KernelError(f"hermitian synthesis left imaginary residue {residue:.3e}")
    return field.real.copy()


def kernel_eigenvalues(cfg: GpKernelConfig, grid: Grid) -> np.ndarray:
    """Spectral coefficients of the kernel on the grid (circulant eigenvalues).

    Nonnegative by Bochner; tiny negative rounding (>= -1e-12) is clamped,
    anything more negative is a kernel error.
    """
    lags = grid.axis_coords()
    row = periodic_kernel_value(cfg, lags[:, None], lags[None, :])
    lam = spectral.fft(row, axes=(0, 1))
    worst_imag = float(np.max(np.abs(lam.imag)))
    if worst_imag > 1e-9 * float(np.max(np.abs(lam.real))):
        raise KernelError(f"kernel spectrum is not real (residue {worst_imag:.3e})")
    lam = lam.real
    floor = float(lam.min())
    if floor < -NEGATIVE_COEFF_TOL * max(1.0, float(lam.max())):
        raise KernelError(f"kernel spectral coefficient {floor:.3e} is negative")
    return np.maximum(lam, 0.0)


def sample_gp_2d_periodic(grid: Grid, cfg: GpKernelConfig, seed: int) -> np.ndarray:
    """Stationary periodic GP sample with the separable sin^2 kernel.

    The grid covariance is block circulant, so its eigenvalues are the 2-D
    spectral coefficients of the kernel row; independent complex Gaussians
    scaled by their square roots synthesize an exact grid sample.
    """
    if grid.d != 2:
        raise DimensionError(f"sample_gp_2d_periodic needs a 2-D grid, got d={grid.d}")
    lam = kernel_eigenvalues(cfg, grid)
    rng = np.random.default_rng(seed)
    zr = rng.standard_normal((grid.n, grid.n))
    zi = rng.standard_normal((grid.n, grid.n))
    field = grid.n * spectral.ifft(np.sqrt(lam) * (zr + 1j * zi), axes=(0, 1))
    return field.real.copy()


def sample_velocity_2d(grid: Grid, cfg: GpKernelConfig, seed: int) -> np.ndarray:
    """Two-component 2-D initial velocity: independent GP draws per component."""
    return np.stack(
        [
            sample_gp_2d_periodic(grid, cfg, seed),
            sample_gp_2d_periodic(grid, cfg, seed + (1 << 32)),
        ]
    )


def sample_initial_condition(
    grid: Grid,
    seed: int,
    spectrum: GrfSpectrum | None = None,
    kernel: GpKernelConfig | None = None,
) -> np.ndarray:
    """Channel-stacked initial condition matching the grid dimension."""
    if grid.d == 1:
        return sample_grf_1d(grid, seed, spectrum)[None, :]
    return sample_velocity_2d(grid, kernel or GpKernelConfig(), seed)
