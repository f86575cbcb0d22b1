"""Fourier-space operators on the periodic box and the Riesz-transform pressure."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .fieldio import SampledField, ball_indices, cell_volume, grid_axes, periodic_delta, unit_ball_volume


class SpectralConstants(NamedTuple):
    n: int
    omega_n: float

    @classmethod
    def for_dim(cls, n: int) -> "SpectralConstants":
        return cls(n, unit_ball_volume(n))


def _axis_wavenumbers(N: int, box_length: float) -> np.ndarray:
    k = 2 * np.pi / box_length * np.fft.fftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        # the Nyquist mode has no real-valued odd derivative; treat it as k = 0
        k[N // 2] = 0.0
    return k


def wavenumbers(shape, box_length: float) -> list[np.ndarray]:
    """Angular wavenumber grids (``ij`` indexing) for a full complex FFT, Nyquist entries zeroed."""
    return np.meshgrid(*[_axis_wavenumbers(N, box_length) for N in shape], indexing="ij", sparse=True)


def _k2(ks):
    k2 = sum(k * k for k in ks)
    return k2


def spectral_derivative(f: np.ndarray, axis: int, box_length: float, order: int = 1) -> np.ndarray:
    N = f.shape[axis]
    k = 2 * np.pi / box_length * np.fft.fftfreq(N, d=1.0 / N)
    if order % 2 == 1:
        k = _axis_wavenumbers(N, box_length)
    shape = [1] * f.ndim
    shape[axis] = N
    mult = ((1j * k) ** order).reshape(shape)
    return np.real(np.fft.ifftn(mult * np.fft.fftn(f)))


def gradient(f: np.ndarray, box_length: float) -> list[np.ndarray]:
    return [spectral_derivative(f, a, box_length) for a in range(f.ndim)]


def divergence(u: np.ndarray, box_length: float) -> np.ndarray:
    """``sum_i d_i u_i`` for ``u`` of shape ``(n, *grid)``."""
    return sum(spectral_derivative(u[i], i, box_length) for i in range(u.shape[0]))


def relative_divergence(u: np.ndarray, box_length: float) -> float:
    """``||div u||_2 / ||grad u||_2`` (0 for a constant field)."""
    div = divergence(u, box_length)
    scale = math.sqrt(sum(float(np.sum(g * g)) for i in range(u.shape[0]) for g in gradient(u[i], box_length)))
    num = math.sqrt(float(np.sum(div * div)))
    if scale == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / scale


def leray_project(u: np.ndarray, box_length: float) -> np.ndarray:
    """Divergence-free part ``u - grad Delta^{-1} div u``; the mean is kept."""
    n = u.shape[0]
    ks = wavenumbers(u.shape[1:], box_length)
    k2 = _k2(ks)
    k2s = np.where(k2 == 0, 1.0, k2)
    uh = np.array([np.fft.fftn(u[i]) for i in range(n)])
    kdotu = sum(ks[i] * uh[i] for i in range(n))
    out = np.empty_like(u, dtype=float)
    for i in range(n):
        out[i] = np.real(np.fft.ifftn(uh[i] - ks[i] * kdotu / k2s))
    return out


def _product_hats(u: np.ndarray):
    n = u.shape[0]
    return {(i, j): np.fft.fftn(u[i] * u[j]) for i in range(n) for j in range(i, n)}


def pressure_from_velocity(u: np.ndarray, box_length: float) -> np.ndarray:
    """``p = R_i R_j (u_i u_j)``, multiplier ``-xi_i xi_j / |xi|^2``, zero mean."""
    n = u.shape[0]
    ks = wavenumbers(u.shape[1:], box_length)
    k2 = _k2(ks)
    k2s = np.where(k2 == 0, 1.0, k2)
    acc = np.zeros(u.shape[1:], dtype=complex)
    for (i, j), ph in _product_hats(u).items():
        w = 1.0 if i == j else 2.0
        acc += w * ks[i] * ks[j] * ph
    ph = -acc / k2s
    ph[(0,) * n] = 0.0
    return np.real(np.fft.ifftn(ph))


def compute_pressure(field: SampledField, k: int, div_tol: float = 1e-8) -> np.ndarray:
    """Pressure at time index ``k`` from the velocity alone.

    Raises ``ValueError`` when the relative divergence exceeds ``div_tol``.
    """
    u = np.asarray(field.velocity[k])
    res = relative_divergence(u, field.box_length)
    if res > div_tol:
        raise ValueError(f"velocity at time index {k} is not divergence free (relative {res:.3e})")
    return pressure_from_velocity(u, field.box_length)


def pressure_poisson_residual(u: np.ndarray, p: np.ndarray, box_length: float) -> float:
    """Relative spectral residual of ``-Delta p = d_i d_j (u_i u_j)``."""
    ks = wavenumbers(u.shape[1:], box_length)
    k2 = _k2(ks)
    lhs = k2 * np.fft.fftn(p)
    rhs = np.zeros_like(lhs)
    for (i, j), ph in _product_hats(u).items():
        w = 1.0 if i == j else 2.0
        rhs -= w * ks[i] * ks[j] * ph
    scale = np.linalg.norm(rhs)
    diff = np.linalg.norm(lhs - rhs)
    return 0.0 if scale == 0 and diff == 0 else float(diff / scale)


def riesz_kernel_eval(y, i: int, j: int) -> float:
    """Kernel of ``R_i R_j`` away from the origin (indices are 0-based).

    ``K_ij(y) = (n y_i y_j - delta_ij |y|^2) / (n omega_n |y|^(n+2))``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for n = {n}")
    r2 = float(y @ y)
    if r2 == 0.0:
        raise ValueError("the kernel is singular at y = 0")
    delta = 1.0 if i == j else 0.0
    return (n * y[i] * y[j] - delta * r2) / (n * unit_ball_volume(n) * r2 ** ((n + 2) / 2))


def riesz_kernel_numerator(y, i: int, j: int) -> Fraction:
    """Exact ``n y_i y_j - delta_ij |y|^2`` for rational (or float, read exactly) ``y``."""
    y = [Fraction(v) for v in y]
    n = len(y)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for n = {n}")
    r2 = sum(v * v for v in y)
    return n * y[i] * y[j] - (r2 if i == j else 0)


def riesz_kernel_trace(y) -> Fraction:
    """``sum_i K_ii(y)`` up to the positive factor ``n omega_n |y|^(n+2)``, in exact arithmetic."""
    return sum(riesz_kernel_numerator(y, i, i) for i in range(len(y)))


class PressureDecomposition(NamedTuple):
    lhs: float
    term1: float
    term2: float
    term3: float

    @property
    def rhs_sum(self) -> float:
        return self.term1 + self.term2 + self.term3


def _subcube(values, grid, L, center, r):
    idx, mask = ball_indices(grid, L, center, r)
    return values[np.ix_(*idx)][mask]


def _shell_integral(weights: np.ndarray, grid, L, center, r_in, r_out, power: float) -> float:
    """``int_{r_in <= |y| < r_out} weights / |y|^power``; ``r_in > 0``."""
    idx, mask = ball_indices(grid, L, center, r_out)
    if mask.size == 0:
        return 0.0
    ax = grid_axes(grid, L)
    d2 = None
    for a, (ii, c) in enumerate(zip(idx, center)):
        d = periodic_delta(ax[a][ii], c, L) ** 2
        d2 = d if d2 is None else np.add.outer(d2, d)
    rho = np.sqrt(d2)
    sel = mask & (rho >= r_in)
    w = weights[np.ix_(*idx)][sel]
    return float(np.sum(w / rho[sel] ** power) * cell_volume(grid, L))


def _velocity_pressure(field: SampledField, k: int):
    u = np.asarray(field.velocity[k])
    p = field.pressure[k] if field.pressure is not None else pressure_from_velocity(u, field.box_length)
    return u, np.asarray(p)


def local_pressure_decomposition(field: SampledField, k: int, center, r: float, rho: float) -> PressureDecomposition:
    """Local pressure estimate ingredients at time index ``k``.

    ``lhs = ||p - (p)_r||_{L^{3/2}(B_r)}``; ``term1 = ||u||^2_{L^3(B_2r)}``;
    ``term2 = r^{2n/3+1} int_{2r<|y|<rho} |u|^2 / |y|^{n+1}``;
    ``term3 = (r/rho)^{2n/3+1} (int_{B_rho} |u|^3 + |p|^{3/2})^{2/3}``.
    The average ``(p)_r`` is over the cells of ``B_r``.
    """
    if not (0 < r <= rho / 2):
        raise ValueError(f"need 0 < r <= rho/2, got r={r}, rho={rho}")
    L, grid, n = field.box_length, field.grid, field.n
    if rho > L / 2:
        raise ValueError(f"rho = {rho} exceeds half the box side {L / 2}")
    u, p = _velocity_pressure(field, k)
    dv = cell_volume(grid, L)
    speed2 = np.sum(u * u, axis=0)
    pb = _subcube(p, grid, L, center, r)
    lhs = float(np.sum(np.abs(pb - pb.mean()) ** 1.5) * dv) ** (2 / 3) if pb.size else 0.0
    cube = speed2 ** 1.5
    term1 = float(np.sum(_subcube(cube, grid, L, center, 2 * r)) * dv) ** (2 / 3)
    term2 = r ** (2 * n / 3 + 1) * _shell_integral(speed2, grid, L, center, 2 * r, rho, n + 1)
    big = float(np.sum(_subcube(cube + np.abs(p) ** 1.5, grid, L, center, rho)) * dv)
    term3 = (r / rho) ** (2 * n / 3 + 1) * big ** (2 / 3)
    return PressureDecomposition(lhs, term1, term2, term3)


def pressure_term2_dyadic(field: SampledField, k: int, center, r: float, rho: float) -> float:
    """Shell form of the middle term: ``r^{2n/3+1} sum_j (2^j r)^{-(n+1)} int_{2^j r <= |y| < 2^{j+1} r} |u|^2``.

    The last shell is clipped at ``rho``.  Dominates ``term2`` up to ``2^{n+1}``.
    """
    if not (0 < r <= rho / 2):
        raise ValueError(f"need 0 < r <= rho/2, got r={r}, rho={rho}")
    L, grid, n = field.box_length, field.grid, field.n
    u, _ = _velocity_pressure(field, k)
    speed2 = np.sum(u * u, axis=0)
    total, j = 0.0, 1
    while 2**j * r < rho:
        a, b = 2**j * r, min(2 ** (j + 1) * r, rho)
        total += a ** (-(n + 1)) * _shell_integral(speed2, grid, L, center, a, b, 0)
        j += 1
    return r ** (2 * n / 3 + 1) * total


def fit_pressure_constant(decomps) -> tuple[float, np.ndarray]:
    """Smallest ``C`` with ``lhs <= C * rhs_sum`` over ``decomps``, and the per-sample ratios."""
    ratios = np.array([d.lhs / d.rhs_sum if d.rhs_sum > 0 else 0.0 for d in decomps])
    return (float(ratios.max()) if ratios.size else 0.0), ratios
