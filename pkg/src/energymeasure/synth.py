"""Analytic fields and measures with known ground truth.

None of the velocity fields here is claimed to solve Euler or Navier-Stokes
(except Taylor-Green); they realise hypotheses and conclusions so that the
diagnostics, not the PDE theory, are what gets tested.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .fieldio import SampledField, SampledMeasure, grid_axes, periodic_delta
from .spectral import leray_project, pressure_from_velocity

LOG2_LOG3 = math.log(2) / math.log(3)

# |U(y)| < 1e-15 beyond this many profile widths
PROFILE_SUPPORT = 8.6


class SupportOverflowError(ValueError):
    def __init__(self, t: float, radius: float, limit: float):
        self.time = t
        super().__init__(f"profile support radius {radius:.4g} exceeds {limit:.4g} at t = {t:g} (earliest offending time)")


@dataclass(frozen=True)
class SelfSimilarSpec:
    """``u(x,t) = c0 lam^(alpha-1) U(lam (x - x*))`` with ``lam = (-t)^(-1/alpha)``, ``alpha = q'``.

    ``U`` is the Gaussian swirl ``e^(1/2) (-y2, y1, 0, ...) / s * exp(-|y|^2 / 2 s^2)``,
    divergence free with ``max |U| = 1`` attained on ``|y_perp| = s, y_3 = 0``.
    """

    q: float = 2.0
    c0: float = 1.0
    x_star: Optional[tuple] = None
    width: float = 0.3
    n: int = 3

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError("q must exceed 1")
        if self.n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def alpha(self) -> float:
        return self.q / (self.q - 1)

    @property
    def profile_l2_squared(self) -> float:
        return math.e * math.pi ** (self.n / 2) * self.width**self.n

    def energy_exponent(self) -> float:
        return (self.n - 2 * (self.alpha - 1)) / self.alpha


def swirl_profile(y: np.ndarray, width: float) -> np.ndarray:
    """``U(y)`` for displacements ``y`` of shape ``(n, ...)``."""
    r2 = np.sum(y * y, axis=0)
    g = math.exp(0.5) / width * np.exp(-r2 / (2 * width**2))
    out = np.zeros_like(y)
    out[0] = -y[1] * g
    out[1] = y[0] * g
    return out


def _mesh(n, N, L):
    return np.meshgrid(*grid_axes((N,) * n, L), indexing="ij")


def gen_selfsimilar(spec: SelfSimilarSpec, N: int, times: Sequence[float], box_length: float = 2 * math.pi,
                    with_pressure: bool = False) -> SampledField:
    """Sample the self-similar family at negative ``times``.

    Raises :class:`SupportOverflowError` if the rescaled profile does not fit
    in half the box at some time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times >= 0):
        raise ValueError("self-similar fields are sampled at t < 0 only")
    n, L, a = spec.n, box_length, spec.alpha
    xs = tuple(spec.x_star) if spec.x_star is not None else (L / 2,) * n
    for t in np.sort(times):
        rad = PROFILE_SUPPORT * spec.width * (-t) ** (1 / a)
        if rad > L / 2:
            raise SupportOverflowError(float(t), rad, L / 2)
    X = _mesh(n, N, L)
    disp = np.array([periodic_delta(X[i], xs[i], L) for i in range(n)])
    vel = np.empty((len(times), n) + (N,) * n)
    for k, t in enumerate(times):
        lam = (-t) ** (-1 / a)
        vel[k] = spec.c0 * lam ** (a - 1) * swirl_profile(lam * disp, spec.width)
    pres = np.array([pressure_from_velocity(v, L) for v in vel]) if with_pressure else None
    ex = spec.energy_exponent()
    u2 = spec.profile_l2_squared
    conserved = abs(ex) < 1e-12
    meta = {
        "generator": "selfsimilar",
        "note": "realises the Type-I bounds by construction; not a solution of Euler or Navier-Stokes",
        "ground_truth": {
            "q": spec.q,
            "c0": spec.c0,
            "alpha": a,
            "x_star": list(xs),
            "width": spec.width,
            "linf_law": {"c0": spec.c0, "power": -1 / spec.q},
            "linf_argmax_offset": spec.width,
            "energy_law": {"coefficient": spec.c0**2 * u2, "power": ex},
            "profile_l2_squared": u2,
            "morrey_exponent": spec.n - 2 / (spec.q - 1),
            "limit_measure": {
                "atoms": [[list(xs), spec.c0**2 * u2]] if conserved else [],
                "density": "zero",
            },
        },
    }
    return SampledField(n, (N,) * n, L, times, vel, pres, meta)


def selfsimilar_linf_exact(spec: SelfSimilarSpec, t: float) -> float:
    """Value of ``|u(x, t)|`` at the known maximiser ``|y_perp| = width/lam``."""
    a = spec.alpha
    lam = (-t) ** (-1 / a)
    y = np.zeros((spec.n, 1))
    y[0, 0] = spec.width
    return float(spec.c0 * lam ** (a - 1) * np.linalg.norm(swirl_profile(y, spec.width)[:, 0]))


def sample_field(func: Callable, n: int, N: int, times: Sequence[float], box_length: float = 2 * math.pi,
                 with_pressure: bool = False, metadata: Optional[dict] = None) -> SampledField:
    """Field from ``func(X, t) -> array (n, *grid)`` evaluated on the corner grid."""
    X = np.array(_mesh(n, N, box_length))
    times = np.asarray(times, dtype=float)
    vel = np.array([np.asarray(func(X, float(t)), dtype=float) for t in times])
    pres = np.array([pressure_from_velocity(v, box_length) for v in vel]) if with_pressure else None
    return SampledField(n, (N,) * n, box_length, times, vel, pres, metadata or {})


def gen_taylor_green(N: int, times: Sequence[float] = (0.0,), nu: float = 0.0, amplitude: float = 1.0) -> SampledField:
    """2D Taylor-Green on ``[0, 2 pi)^2`` with exact pressure ``+(cos 2x + cos 2y) / 4``."""
    L = 2 * math.pi
    X, Y = _mesh(2, N, L)
    times = np.asarray(times, dtype=float)
    vel, pres = [], []
    for t in times:
        # decay counted from the first sample so the profile is O(1) there
        d = amplitude * math.exp(-2 * nu * (t - times[0]))
        vel.append([d * np.sin(X) * np.cos(Y), -d * np.cos(X) * np.sin(Y)])
        pres.append(d * d * (np.cos(2 * X) + np.cos(2 * Y)) / 4)
    meta = {"generator": "taylor-green", "ground_truth": {"nu": nu, "amplitude": amplitude,
                                                          "decay_rate": 2 * nu}}
    return SampledField(2, (N, N), L, times, np.array(vel), np.array(pres), meta)


def gen_smooth_field(seed: int, n: int = 2, N: int = 64, times: Sequence[float] = (0.0,), k_max: int = 6,
                     amplitude: float = 1.0, box_length: float = 2 * math.pi) -> SampledField:
    """Random band-limited divergence-free field, identical for identical arguments.

    Each time sample is an independent draw from the same generator stream.
    """
    rng = np.random.default_rng(seed)
    ks = np.meshgrid(*[np.fft.fftfreq(N, 1.0 / N)] * n, indexing="ij")
    band = (sum(k * k for k in ks) <= k_max**2) & (sum(k * k for k in ks) > 0)
    vel = []
    for _ in times:
        u = np.empty((n,) + (N,) * n)
        for i in range(n):
            c = (rng.standard_normal(band.shape) + 1j * rng.standard_normal(band.shape)) * band
            u[i] = np.real(np.fft.ifftn(c))
        u = leray_project(u, box_length)
        u *= amplitude / max(np.max(np.abs(u)), 1e-300)
        vel.append(u)
    meta = {"generator": "smooth", "ground_truth": {"seed": seed, "k_max": k_max, "onsager_slope": 2.0}}
    return SampledField(n, (N,) * n, box_length, np.asarray(times, dtype=float), np.array(vel), None, meta)


def gen_planar_jump(n: int = 2, N: int = 128, amplitude: float = 1.0, box_length: float = 2 * math.pi,
                    times: Sequence[float] = (0.0,)) -> SampledField:
    """Shear layer ``u_2 = +a`` for ``x_1 < L/2`` and ``-a`` otherwise (two planar jumps)."""
    X = _mesh(n, N, box_length)
    u = np.zeros((n,) + (N,) * n)
    u[1] = np.where(X[0] < box_length / 2, amplitude, -amplitude)
    vel = np.repeat(u[None], len(times), axis=0)
    meta = {"generator": "planar-jump", "ground_truth": {"onsager_slope": 0.0,
                                                         "theta_limit": 16 * amplitude**3 * box_length ** (n - 1)}}
    return SampledField(n, (N,) * n, box_length, np.asarray(times, dtype=float), vel, None, meta)


# ---------------------------------------------------------------------------
# measures


def cantor_points(depth: int) -> np.ndarray:
    """Centers of the ``2^depth`` intervals of the middle-thirds construction, in ``[0, 1]``."""
    pts = np.zeros(1)
    for i in range(1, depth + 1):
        pts = np.concatenate([pts, pts + 2.0 * 3.0**-i])
    return np.sort(pts + 0.5 * 3.0**-depth)


def gen_cantor_measure(depth: int, n: int = 1, embedding: str = "point", box_length: float = 1.0,
                       lattice: int = 0, grid: int = 4) -> SampledMeasure:
    """Middle-thirds Cantor measure on the first axis as ``2^depth`` atoms of weight ``2^-depth``.

    ``embedding="point"`` places the set at ``x_k = L/2`` on the remaining
    axes; ``"product"`` spreads each atom uniformly over ``lattice`` points per
    remaining axis, approximating the product with Lebesgue measure.
    """
    if not 0 <= depth <= 14:
        raise ValueError("depth must lie in [0, 14]")
    if embedding not in ("point", "product"):
        raise ValueError(f"unknown embedding {embedding!r}")
    if embedding == "product" and (n < 2 or lattice < 1):
        raise ValueError("product embedding needs n >= 2 and lattice >= 1")
    L = box_length
    xs = cantor_points(depth) * L
    w = 2.0**-depth
    truth = {"local_dimension": LOG2_LOG3, "ball_mass_law": "2^-k on B(x, L 3^-k) for x on the set, k <= depth",
             "sdensity_exponent": LOG2_LOG3, "depth": depth}
    if n == 1 or embedding == "point":
        pos = np.full((xs.size, n), L / 2)
        pos[:, 0] = xs
        weights = np.full(xs.size, w)
    else:
        ys = (np.arange(lattice) + 0.5) * L / lattice
        others = np.stack(np.meshgrid(*[ys] * (n - 1), indexing="ij"), axis=-1).reshape(-1, n - 1)
        pos = np.empty((xs.size * len(others), n))
        pos[:, 0] = np.repeat(xs, len(others))
        pos[:, 1:] = np.tile(others, (xs.size, 1))
        weights = np.full(len(pos), w / len(others))
        truth["local_dimension"] = LOG2_LOG3 + (n - 1)
    meta = {"generator": "cantor", "ground_truth": truth}
    return SampledMeasure(n, (grid,) * n, L, np.zeros((grid,) * n), pos, weights, meta)


def gen_atom_measure(positions, weights, n: Optional[int] = None, box_length: float = 1.0, grid: int = 4) -> SampledMeasure:
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = n or pos.shape[1]
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    meta = {"generator": "atoms", "ground_truth": {"local_dimension": 0.0, "concentration_dimension": 0.0,
                                                   "atom_mass": float(w.sum())}}
    return SampledMeasure(n, (grid,) * n, box_length, np.zeros((grid,) * n), pos, w, meta)


def gen_lebesgue_measure(n: int, N: int, box_length: float = 1.0, density: float = 1.0) -> SampledMeasure:
    meta = {"generator": "lebesgue", "ground_truth": {"local_dimension": float(n),
                                                     "sdensity_at_n": density * math.pi ** (n / 2) / math.gamma(n / 2 + 1) / 2**n}}
    return SampledMeasure(n, (N,) * n, box_length, np.full((N,) * n, float(density)), metadata=meta)


def measure_from_ground_truth(field: SampledField) -> SampledMeasure:
    """Limiting energy measure recorded by :func:`gen_selfsimilar`."""
    lm = field.metadata["ground_truth"]["limit_measure"]
    atoms = lm["atoms"]
    pos = np.array([a[0] for a in atoms]).reshape(-1, field.n)
    w = np.array([a[1] for a in atoms])
    return SampledMeasure(field.n, field.grid, field.box_length, np.zeros(field.grid), pos, w)


def write_sidecar(metadata: dict, path) -> None:
    """JSON sidecar ``{"ground_truth": ...}`` next to a generated file."""
    out = {"ground_truth": metadata.get("ground_truth", {})}
    for key in ("generator", "note"):
        if key in metadata:
            out[key] = metadata[key]
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n")
