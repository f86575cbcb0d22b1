"""Pseudo-spectral 2D Navier-Stokes on ``[0, 2 pi)^2`` in vorticity form.

RK4 in time, 2/3-rule dealiasing.  Snapshot times are shifted so that the
final time is 0; runs therefore need ``T <= 1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fieldio import SampledField
from .spectral import pressure_from_velocity

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
AUDIT_HEADER = "step,time,energy,enstrophy,audit_residual"


class CFLError(RuntimeError):
    def __init__(self, step: int, dt: float, limit: float):
        self.step = step
        super().__init__(f"CFL violated at step {step}: dt = {dt:g} exceeds {limit:g}")


@dataclass(frozen=True)
class SolverConfig:
    N: int = 64
    nu: float = 0.0
    dt: float = 1e-3
    T: float = 1.0
    ic: str = "taylor-green"
    seed: int = 0
    amplitude: float = 1.0
    snapshot_every: int = 1
    cfl: float = 0.5
    peak_wavenumber: float = 4.0
    dealias: str = "2/3"

    def __post_init__(self):
        if self.N < 8 or self.N % 2:
            raise ValueError("N must be an even integer >= 8")
        if self.nu < 0:
            raise ValueError("viscosity must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.T <= 1:
            raise ValueError("T must lie in (0, 1] so that snapshot times fit in [-1, 0]")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.ic not in ("taylor-green", "random"):
            raise ValueError(f"unknown initial condition {self.ic!r}")
        if self.dealias != "2/3":
            raise ValueError("only the 2/3 rule is supported")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"T / dt = {steps} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


class _Grid:
    def __init__(self, N: int):
        self.N = N
        self.kx = np.fft.fftfreq(N, 1.0 / N)[:, None]
        self.ky = np.fft.rfftfreq(N, 1.0 / N)[None, :]
        self.k2 = self.kx**2 + self.ky**2
        self.k2s = np.where(self.k2 == 0, 1.0, self.k2)
        self.mask = (np.abs(self.kx) < N / 3) & (np.abs(self.ky) < N / 3)
        self.h = TWO_PI / N

    def velocity_hat(self, wh):
        psi = wh / self.k2s
        psi[0, 0] = 0.0
        return 1j * self.ky * psi, -1j * self.kx * psi

    def velocity(self, wh):
        uh, vh = self.velocity_hat(wh)
        N = self.N
        return np.array([np.fft.irfft2(uh, s=(N, N)), np.fft.irfft2(vh, s=(N, N))])

    def rhs(self, wh, nu):
        N = self.N
        u, v = self.velocity(wh)
        wx = np.fft.irfft2(1j * self.kx * wh, s=(N, N))
        wy = np.fft.irfft2(1j * self.ky * wh, s=(N, N))
        adv = np.fft.rfft2(u * wx + v * wy)
        return (-adv - nu * self.k2 * wh) * self.mask

    def energy(self, u):
        return float(np.sum(u * u) * self.h**2)

    def enstrophy(self, wh):
        w = np.fft.irfft2(wh, s=(self.N, self.N))
        return float(np.sum(w * w) * self.h**2)


def initial_vorticity(config: SolverConfig) -> np.ndarray:
    """Physical-space vorticity at the start of the run."""
    N = config.N
    x = np.arange(N) * TWO_PI / N
    X, Y = np.meshgrid(x, x, indexing="ij")
    if config.ic == "taylor-green":
        return 2.0 * config.amplitude * np.sin(X) * np.sin(Y)
    g = _Grid(N)
    rng = np.random.default_rng(config.seed)
    k = np.sqrt(g.k2)
    spec = k**4 * np.exp(-2 * (k / config.peak_wavenumber) ** 2)
    noise = rng.standard_normal((N, N // 2 + 1)) + 1j * rng.standard_normal((N, N // 2 + 1))
    wh = noise * np.sqrt(spec) * g.mask
    wh[0, 0] = 0.0
    w = np.fft.irfft2(wh, s=(N, N))
    wh = np.fft.rfft2(w) * g.mask
    umax = np.max(np.abs(g.velocity(wh)))
    return np.fft.irfft2(wh * (config.amplitude / umax), s=(N, N))


def run_solver_2d(config: SolverConfig) -> SampledField:
    """Integrate and return velocity and pressure snapshots as a field on ``[0, 2 pi)^2``.

    ``metadata["audit"]`` holds one row per step: step, time, energy,
    enstrophy and the relative energy-budget residual
    ``|dE/dt + 2 nu ||grad u||^2| / E`` with trapezoidal dissipation.
    """
    g = _Grid(config.N)
    wh = np.fft.rfft2(initial_vorticity(config)) * g.mask
    nu, dt = config.nu, config.dt

    def check_cfl(step, u):
        umax = float(np.max(np.abs(u)))
        limits = []
        if umax > 0:
            limits.append(g.h / umax)
        if nu > 0:
            limits.append(g.h**2 / nu)
        if limits:
            lim = config.cfl * min(limits)
            if dt > lim:
                raise CFLError(step, dt, lim)

    times, vels, pres, audit = [], [], [], []
    u = g.velocity(wh)
    E, Z = g.energy(u), g.enstrophy(wh)
    check_cfl(0, u)
    times.append(0.0)
    vels.append(u)
    audit.append((0, 0.0, E, Z, 0.0))
    for step in range(1, config.n_steps + 1):
        k1 = g.rhs(wh, nu)
        k2 = g.rhs(wh + 0.5 * dt * k1, nu)
        k3 = g.rhs(wh + 0.5 * dt * k2, nu)
        k4 = g.rhs(wh + dt * k3, nu)
        wh = wh + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        u = g.velocity(wh)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite velocity at step {step}")
        check_cfl(step, u)
        E_new, Z_new = g.energy(u), g.enstrophy(wh)
        # in 2D periodic flow ||grad u||^2 equals the enstrophy
        budget = (E_new - E) / dt + nu * (Z + Z_new)
        res = abs(budget) / E if E > 0 else 0.0
        t = step * dt
        audit.append((step, t, E_new, Z_new, res))
        E, Z = E_new, Z_new
        if step % config.snapshot_every == 0 or step == config.n_steps:
            times.append(t)
            vels.append(u)
    T_end = times[-1]
    vel = np.array(vels)
    for uk in vel:
        pres.append(pressure_from_velocity(uk, TWO_PI))
    meta = {
        "source": "run_solver_2d",
        "config": config.__dict__.copy(),
        "audit": audit,
        "time_offset": T_end,
    }
    log.debug("solver finished: %d steps, %d snapshots", config.n_steps, len(times))
    return SampledField(2, (config.N, config.N), TWO_PI, np.maximum(np.array(times) - T_end, -1.0), vel, np.array(pres), meta)


def audit_csv(field: SampledField) -> str:
    rows = [AUDIT_HEADER]
    for step, t, E, Z, res in field.metadata.get("audit", []):
        rows.append(f"{step},{t!r},{E!r},{Z!r},{res!r}")
    return "\n".join(rows) + "\n"


def max_audit_residual(field: SampledField) -> float:
    return max((row[4] for row in field.metadata.get("audit", [])), default=0.0)
