"""Pseudo-spectral ground-truth integrators for the supported PDEs.

All equations evolve on periodic [0, 2pi)^d grids with an integrating-factor
RK4 scheme: the stiff linear part (diffusion, plus the linear reaction for
the cubic reaction-diffusion equation) is applied exactly through
exponential factors in Fourier space, nonlinear terms are evaluated
pseudo-spectrally with two-thirds-rule de-aliasing.  The 2-D incompressible
flow is integrated in vorticity-streamfunction form, so incompressibility
is exact in the spectral representation; the constant mean velocity is
carried separately and re-added on reconstruction.

Integration is vectorized over a leading batch axis, which is how dataset
generation runs many samples in one pass without changing per-sample
rounding (butterflies and products never mix batch rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import ConfigurationError, DimensionError, InstabilityError
from .sampling import Grid

BLOWUP_LIMIT = 1e6
_CHECK_INTERVAL = 50

PDE_KINDS = ("gen_burgers", "chafee_infante", "burgers2d", "ns2d")


@dataclass
class Field:
    """Sampled vector field: values has shape (channels, n) or (channels, n, n)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.d,) + self.grid.shape
        if self.values.shape != expected:
            raise DimensionError(
                f"field values shape {self.values.shape} does not match grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("field contains non-finite values")


@dataclass(frozen=True)
class PdeSpec:
    """Which equation to integrate, with its coefficients."""

    kind: str
    nu: float | None = None
    lam: float | None = None
    q: int | None = None

    def __post_init__(self):
        if self.kind not in PDE_KINDS:
            raise ConfigurationError(f"unknown pde kind {self.kind!r}; choose from {PDE_KINDS}")
        if self.kind == "chafee_infante":
            if self.nu is not None:
                raise ConfigurationError(
                    "chafee_infante has unit diffusion; it takes lambda, not nu"
                )
            if self.lam is None or self.lam <= 0:
                raise ConfigurationError("chafee_infante requires lambda > 0")
        else:
            if self.nu is None or self.nu <= 0:
                raise ConfigurationError(f"{self.kind} requires viscosity nu > 0")
        if self.kind == "gen_burgers":
            if self.q not in (1, 2, 3, 4):
                raise ConfigurationError("gen_burgers requires q in {1, 2, 3, 4}")
        elif self.q is not None:
            raise ConfigurationError(f"{self.kind} does not take q")

    @property
    def dimension(self) -> int:
        return 1 if self.kind in ("gen_burgers", "chafee_infante") else 2


@dataclass(frozen=True)
class SolveConfig:
    """Step size and snapshot schedule."""

    dt: float = 1e-4
    save_times: tuple[float, ...] = (1.0,)
    dealias: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        times = tuple(float(t) for t in self.save_times)
        if not times or any(t < 0 for t in times) or list(times) != sorted(set(times)):
            raise ConfigurationError("save_times must be ascending, unique and nonnegative")
        object.__setattr__(self, "save_times", times)
        for t in times:
            steps = round(t / self.dt)
            if abs(t - steps * self.dt) > 1e-12 * max(1.0, abs(t)):
                raise ConfigurationError(
                    f"save time {t} is not a multiple of dt={self.dt} within 1e-12"
                )

    def save_steps(self) -> list[int]:
        return [round(t / self.dt) for t in self.save_times]


def energy(v: Field) -> float:
    """Discrete total energy: spacing^d * sum(v^2) / 2."""
    return float(v.grid.spacing**v.grid.d * np.sum(v.values * v.values) / 2.0)


def _to_real(phys: np.ndarray) -> np.ndarray:
    residue = float(np.max(np.abs(phys.imag)))
    if residue > 1e-12 * max(1.0, float(np.max(np.abs(phys.real)))):
        raise InstabilityError(f"imaginary residue {residue:.3e} in physical field", 0.0)
    return phys.real.copy()


class _Problem:
    """Spectral state, linear symbol, and nonlinear term for one PDE kind."""

    def __init__(self, spec: PdeSpec, grid: Grid, dealias: bool):
        self.spec = spec
        self.grid = grid
        n = grid.n
        if spec.dimension != grid.d:
            raise DimensionError(f"{spec.kind} is {spec.dimension}-D but grid has d={grid.d}")
        if grid.d == 1:
            self.axes = (-1,)
            self.mask = spectral.dealias_mask(n) if dealias else np.ones(n)
            self.k = spectral.wavenumbers(n)
            self.kd = spectral.derivative_wavenumbers(n)
        else:
            k = spectral.wavenumbers(n)
            kd = spectral.derivative_wavenumbers(n)
            self.axes = (-2, -1)
            self.kx = k[:, None]
            self.ky = k[None, :]
            self.kdx = kd[:, None]
            self.kdy = kd[None, :]
            self.k2 = self.kx**2 + self.ky**2
            self.mask = spectral.dealias_mask(n, d=2) if dealias else np.ones((n, n))
            nyq_free = (np.abs(k) < n // 2).astype(np.float64)
            self.nyq_free = nyq_free[:, None] * nyq_free[None, :]

        if spec.kind == "gen_burgers":
            self.linear = -spec.nu * self.k**2
        elif spec.kind == "chafee_infante":
            self.linear = -self.k**2 + spec.lam
        else:
            self.linear = -spec.nu * self.k2
        self.mean_velocity = None

    def to_state(self, values: np.ndarray) -> np.ndarray:
        """Physical batch (B, C, ...) -> spectral state."""
        if self.spec.kind != "ns2d":
            return spectral.fft(values, self.axes)
        vhat = spectral.fft(values, self.axes)
        # Leray projection onto divergence-free fields, then scalar vorticity.
        # Nyquist-zeroed wavenumbers keep the multiplier even in array terms
        # (the +-n/2 bin is sign-ambiguous), preserving Hermitian symmetry.
        kd2 = self.kdx**2 + self.kdy**2
        kd2 = np.where(kd2 == 0, 1.0, kd2)
        div = self.kdx * vhat[:, 0] + self.kdy * vhat[:, 1]
        vhat[:, 0] -= self.kdx * div / kd2
        vhat[:, 1] -= self.kdy * div / kd2
        self.mean_velocity = vhat[:, :, 0, 0].real.copy() / self.grid.n**2
        omega = (1j * self.kdx * vhat[:, 1] - 1j * self.kdy * vhat[:, 0]) * self.nyq_free
        return omega[:, None]

    def to_physical(self, state: np.ndarray) -> np.ndarray:
        if self.spec.kind != "ns2d":
            return _to_real(spectral.ifft(state, self.axes))
        u1, u2 = self._velocity(state[:, 0])
        return np.stack([_to_real(u1), _to_real(u2)], axis=1)

    def _velocity(self, omega_hat: np.ndarray):
        """Velocity from vorticity plus the conserved mean flow (still spectral->physical)."""
        k2 = np.where(self.k2 == 0, 1.0, self.k2)
        psi = omega_hat / k2
        psi[..., 0, 0] = 0.0
        u1 = spectral.ifft(1j * self.kdy * psi, self.axes)
        u2 = spectral.ifft(-1j * self.kdx * psi, self.axes)
        u1 += self.mean_velocity[:, 0, None, None]
        u2 += self.mean_velocity[:, 1, None, None]
        return u1, u2

    def nonlinear(self, state: np.ndarray) -> np.ndarray:
        kind = self.spec.kind
        masked = state * self.mask
        if kind == "gen_burgers":
            q = self.spec.q
            v = spectral.ifft(masked, self.axes).real
            flux = spectral.fft(v ** (q + 1), self.axes)
            return -(1j * self.kd / (q + 1)) * flux * self.mask
        if kind == "chafee_infante":
            v = spectral.ifft(masked, self.axes).real
            cubic = spectral.fft(v**3, self.axes)
            return -self.spec.lam * cubic * self.mask
        if kind == "burgers2d":
            v = spectral.ifft(masked, self.axes).real
            vx = spectral.ifft(1j * self.kdx * masked, self.axes).real
            vy = spectral.ifft(1j * self.kdy * masked, self.axes).real
            advect = v[:, :1] * vx + v[:, 1:] * vy
            return -spectral.fft(advect, self.axes) * self.mask
        # ns2d: advection of vorticity by the reconstructed velocity
        omega_hat = masked[:, 0]
        u1, u2 = self._velocity(omega_hat)
        wx = spectral.ifft(1j * self.kdx * omega_hat, self.axes).real
        wy = spectral.ifft(1j * self.kdy * omega_hat, self.axes).real
        advect = u1.real * wx + u2.real * wy
        return -(spectral.fft(advect, self.axes) * self.mask)[:, None]


def _integrate(spec: PdeSpec, grid: Grid, values: np.ndarray, cfg: SolveConfig):
    """IF-RK4 over a batch (B, C, *spatial); returns (times, snaps (K, B, C, *spatial))."""
    problem = _Problem(spec, grid, cfg.dealias)
    state = problem.to_state(values.astype(np.float64))
    dt = cfg.dt
    half = np.exp(problem.linear * dt / 2.0)
    full = half * half
    save_steps = cfg.save_steps()
    total_steps = save_steps[-1]

    snaps = []
    if save_steps[0] == 0:
        snaps.append(problem.to_physical(state))
    targets = set(save_steps)

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, total_steps + 1):
            a = problem.nonlinear(state)
            b = problem.nonlinear(half * (state + (dt / 2.0) * a))
            c = problem.nonlinear(half * state + (dt / 2.0) * b)
            d = problem.nonlinear(full * state + dt * (half * c))
            state = full * state + (dt / 6.0) * (full * a + 2.0 * half * (b + c) + d)

            if step % _CHECK_INTERVAL == 0 or step in targets:
                t_now = step * dt
                if not np.all(np.isfinite(state)):
                    raise InstabilityError(
                        f"integration blew up (NaN/Inf) at t={t_now:.6g}", t_now
                    )
                phys = problem.to_physical(state)
                peak = float(np.max(np.abs(phys)))
                if peak > BLOWUP_LIMIT:
                    raise InstabilityError(
                        f"integration blew up (|v|={peak:.3e} > {BLOWUP_LIMIT:.0e}) "
                        f"at t={t_now:.6g}",
                        t_now,
                    )
                if step in targets:
                    snaps.append(phys)

    return list(cfg.save_times), np.stack(snaps)


def solve(spec: PdeSpec, v0: Field, cfg: SolveConfig) -> list[tuple[float, Field]]:
    """Integrate one initial condition; returns (time, Field) at each save time."""
    times, snaps = _integrate(spec, v0.grid, v0.values[None], cfg)
    return [(t, Field(v0.grid, snap[0])) for t, snap in zip(times, snaps)]


def solve_many(
    spec: PdeSpec, grid: Grid, values: np.ndarray, cfg: SolveConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a batch (N, C, *spatial); returns (times (K,), snaps (N, K, C, *spatial))."""
    if values.ndim != grid.d + 2:
        raise DimensionError(f"expected batched values (N, C, spatial...), got {values.shape}")
    times, snaps = _integrate(spec, grid, values, cfg)
    return np.asarray(times), np.moveaxis(snaps, 0, 1)


def solve_ns2d(nu: float, v0: Field, cfg: SolveConfig) -> list[tuple[float, Field]]:
    """2-D incompressible flow; velocity in, velocity out."""
    return solve(PdeSpec("ns2d", nu=nu), v0, cfg)
