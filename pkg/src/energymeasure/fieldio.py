"""Sampled fields and measures on the periodic box, their binary formats, and grid helpers.

Grid values are point samples at cell corners ``x_i = i L / N``.  Integrals use
the rectangle rule with cell volume ``prod(L / N_k)``, and balls are open,
Euclidean with periodic wrap, and collect the cells whose corner sample lies
strictly inside.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import beta as beta_fn, betainc


class FieldFormatError(ValueError):
    """Malformed or invalid VFLD1/VMSR1 content.  ``offset`` is the byte position at fault."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


FIELD_MAGIC = b"VFLD1\0"
MEASURE_MAGIC = b"VMSR1\0"


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# grid helpers


def cell_volume(grid: Sequence[int], box_length: float) -> float:
    return float(np.prod([box_length / N for N in grid]))


def grid_axes(grid: Sequence[int], box_length: float) -> list[np.ndarray]:
    return [np.arange(N) * (box_length / N) for N in grid]


def periodic_delta(a, b, box_length: float):
    """Signed minimal-image difference ``a - b`` in ``[-L/2, L/2)``."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return d - box_length * np.floor(d / box_length + 0.5)


def periodic_distance(a, b, box_length: float):
    """Euclidean distance minimised over lattice shifts; points along the last axis."""
    d = periodic_delta(a, b, box_length)
    return np.sqrt(np.sum(d * d, axis=-1))


def ball_indices(grid, box_length, center, r):
    """Per-axis index arrays of the wrapped bounding cube of ``B_r(center)`` and the mask on it.

    Index ``field[np.ix_(*idx)][mask]`` to reach exactly the cells of the open ball.
    """
    idx, sq = [], []
    for N, c in zip(grid, center):
        h = box_length / N
        d = periodic_delta(np.arange(N) * h, c, box_length)
        keep = np.nonzero(np.abs(d) < r)[0]
        idx.append(keep)
        sq.append(d[keep] ** 2)
    total = sq[0]
    for s in sq[1:]:
        total = np.add.outer(total, s)
    return idx, total < r * r


def ball_mask(grid, box_length, center, r) -> np.ndarray:
    """Boolean mask over the full grid of cells whose sample lies in the open ball."""
    idx, sub = ball_indices(grid, box_length, center, r)
    mask = np.zeros(tuple(grid), dtype=bool)
    mask[np.ix_(*idx)] = sub
    return mask


def ball_integral(values: np.ndarray, grid, box_length, center, r) -> float:
    """Rectangle-rule integral of a scalar grid function over ``B_r(center)``."""
    idx, sub = ball_indices(grid, box_length, center, r)
    if sub.size == 0:
        return 0.0
    return float(values[np.ix_(*idx)][sub].sum() * cell_volume(grid, box_length))


def ball_cell_count(grid, box_length, center, r) -> int:
    _, sub = ball_indices(grid, box_length, center, r)
    return int(sub.sum())


def integrate(values: np.ndarray, grid, box_length) -> float:
    return float(np.sum(values) * cell_volume(grid, box_length))


def unit_ball_volume(n: int) -> float:
    """``omega_n = pi^(n/2) / Gamma(n/2 + 1)``."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


# ---------------------------------------------------------------------------
# profiles and bumps


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff: 1 on ``s <= inner``, 0 on ``s >= outer``, a smoothstep in between.

    The transition is the regularised incomplete beta ``I_t(k+1, k+1)``, the
    degree ``2k+1`` polynomial with ``k`` vanishing derivatives at both ends.
    """

    inner_radius_ratio: float = 0.5
    outer_radius_ratio: float = 1.0
    smoothness: int = 2

    def __post_init__(self):
        if not 0 < self.inner_radius_ratio < self.outer_radius_ratio:
            raise ValueError("need 0 < inner < outer")
        if int(self.smoothness) != self.smoothness or self.smoothness < 0:
            raise ValueError("smoothness must be a nonnegative integer")

    @classmethod
    def standard(cls) -> "CutoffProfile":
        return cls(0.5, 1.0, 2)

    @classmethod
    def asymmetric(cls) -> "CutoffProfile":
        return cls(1.1, 1.9, 2)

    @property
    def width(self) -> float:
        return self.outer_radius_ratio - self.inner_radius_ratio

    def _t(self, s):
        return np.clip((np.abs(np.asarray(s, dtype=float)) - self.inner_radius_ratio) / self.width, 0.0, 1.0)

    def __call__(self, s):
        k = self.smoothness
        return 1.0 - betainc(k + 1, k + 1, self._t(s))

    def derivative(self, s):
        """``d psi / d|s|``; nonpositive."""
        k = self.smoothness
        t = self._t(s)
        return -(t * (1 - t)) ** k / beta_fn(k + 1, k + 1) / self.width

    def second_derivative(self, s):
        k = self.smoothness
        t = self._t(s)
        if k == 0:
            return np.zeros_like(t)
        g = k * (t * (1 - t)) ** (k - 1) * (1 - 2 * t)
        return -g / beta_fn(k + 1, k + 1) / self.width**2

    @property
    def lipschitz(self) -> float:
        k = self.smoothness
        return math.factorial(2 * k + 1) / math.factorial(k) ** 2 / 4**k / self.width


@dataclass(frozen=True)
class BumpSpec:
    """Space-time test function ``psi(|x - c|/radius) * psi_t(|t - t_center|/t_radius)``.

    With ``t_center`` unset the bump is time independent.
    """

    center: tuple
    radius: float
    profile: CutoffProfile = dc_field(default_factory=CutoffProfile.standard)
    t_center: Optional[float] = None
    t_radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        if (self.t_center is None) != (self.t_radius is None):
            raise ValueError("t_center and t_radius go together")
        if self.t_radius is not None and not self.t_radius > 0:
            raise ValueError("t_radius must be positive")

    def check_fits(self, box_length: float) -> None:
        if 2 * self.radius > box_length / 2:
            raise ValueError(f"ball of radius {2 * self.radius} does not fit in a box of side {box_length}")

    def spatial(self, grid, box_length):
        """Values of the spatial factor, its gradient and its Laplacian on the grid."""
        axes = grid_axes(grid, box_length)
        deltas = np.meshgrid(*[periodic_delta(a, c, box_length) for a, c in zip(axes, self.center)], indexing="ij")
        rho = np.sqrt(sum(d * d for d in deltas))
        s = rho / self.radius
        val = self.profile(s)
        d1 = self.profile.derivative(s) / self.radius
        d2 = self.profile.second_derivative(s) / self.radius**2
        safe = np.where(rho > 0, rho, 1.0)
        grad = [np.where(rho > 0, d1 * d / safe, 0.0) for d in deltas]
        n = len(grid)
        # radial Laplacian; d1 vanishes near the origin since inner > 0
        lap = d2 + np.where(rho > 0, (n - 1) * d1 / safe, 0.0)
        return val, grad, lap

    def temporal(self, t):
        """Time factor and its derivative at ``t``."""
        t = np.asarray(t, dtype=float)
        if self.t_center is None:
            return np.ones_like(t), np.zeros_like(t)
        dt = t - self.t_center
        s = np.abs(dt) / self.t_radius
        val = self.profile(s)
        der = self.profile.derivative(s) * np.sign(dt) / self.t_radius
        return val, der


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True, eq=False)
class SampledField:
    """Velocity (and optional pressure) time series on ``[0, L)^n``.

    ``velocity`` has shape ``(T, n, *grid)`` and ``pressure`` ``(T, *grid)``.
    Arrays are stored as read-only copies.
    """

    n: int
    grid: tuple
    box_length: float
    times: np.ndarray
    velocity: np.ndarray
    pressure: Optional[np.ndarray] = None
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "times", _frozen(np.atleast_1d(self.times)))
        object.__setattr__(self, "velocity", _frozen(self.velocity))
        if self.pressure is not None:
            object.__setattr__(self, "pressure", _frozen(self.pressure))
        self.validate()

    def validate(self) -> None:
        n, grid, T = self.n, self.grid, len(self.times)
        if n not in (2, 3):
            raise ValueError(f"n must be 2 or 3, got {n}")
        if len(grid) != n or any(g < 1 for g in grid):
            raise ValueError(f"grid {grid} does not match n = {n}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ValueError("box length must be positive and finite")
        if T == 0:
            raise ValueError("field has no time samples")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.times[0] < -1 or self.times[-1] > 0:
            raise ValueError("times must lie in [-1, 0]")
        if self.velocity.shape != (T, n, *grid):
            raise ValueError(f"velocity shape {self.velocity.shape} != {(T, n, *grid)}")
        if not np.all(np.isfinite(self.velocity)):
            raise ValueError("velocity contains non-finite values")
        if self.pressure is not None:
            if self.pressure.shape != (T, *grid):
                raise ValueError(f"pressure shape {self.pressure.shape} != {(T, *grid)}")
            if not np.all(np.isfinite(self.pressure)):
                raise ValueError("pressure contains non-finite values")

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def cell_volume(self) -> float:
        return cell_volume(self.grid, self.box_length)

    def speed_squared(self, k: int) -> np.ndarray:
        return np.sum(self.velocity[k] ** 2, axis=0)

    def energy(self, k: int) -> float:
        """``int |u(t_k)|^2 dx`` (no factor 1/2)."""
        return integrate(self.speed_squared(k), self.grid, self.box_length)

    def divergence_residual(self, k: int) -> float:
        """Spectral ``||div u|| / ||grad u||`` at time index ``k``."""
        from .spectral import relative_divergence

        return relative_divergence(self.velocity[k], self.box_length)

    def check_divergence(self, tol: float = 1e-8) -> None:
        for k in range(self.n_times):
            res = self.divergence_residual(k)
            if res > tol:
                raise ValueError(f"relative divergence {res:.3e} exceeds {tol:g} at time index {k}")

    def with_pressure(self, pressure) -> "SampledField":
        return SampledField(self.n, self.grid, self.box_length, self.times, self.velocity, pressure, dict(self.metadata))

    def nearest_time_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


@dataclass(frozen=True, eq=False)
class SampledMeasure:
    """Grid density plus weighted atoms on ``[0, L)^n``."""

    n: int
    grid: tuple
    box_length: float
    density: np.ndarray
    atom_positions: np.ndarray = None
    atom_weights: np.ndarray = None
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "density", _frozen(self.density))
        pos = np.zeros((0, self.n)) if self.atom_positions is None else self.atom_positions
        w = np.zeros(0) if self.atom_weights is None else self.atom_weights
        object.__setattr__(self, "atom_positions", _frozen(np.reshape(pos, (-1, self.n))))
        object.__setattr__(self, "atom_weights", _frozen(np.ravel(w)))
        self.validate()

    def validate(self) -> None:
        if self.n < 1 or len(self.grid) != self.n:
            raise ValueError(f"grid {self.grid} does not match n = {self.n}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ValueError("box length must be positive and finite")
        if self.density.shape != self.grid:
            raise ValueError(f"density shape {self.density.shape} != {self.grid}")
        if not np.all(np.isfinite(self.density)):
            raise ValueError("density contains non-finite values")
        if np.any(self.density < 0):
            raise ValueError("density must be nonnegative")
        if len(self.atom_positions) != len(self.atom_weights):
            raise ValueError("atom positions and weights differ in length")
        if not np.all(np.isfinite(self.atom_weights)) or np.any(self.atom_weights <= 0):
            raise ValueError("atom weights must be positive and finite")
        p = self.atom_positions
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p >= self.box_length):
            raise ValueError("atom positions must lie in [0, L)")

    @property
    def cell_volume(self) -> float:
        return cell_volume(self.grid, self.box_length)

    @property
    def density_mass(self) -> float:
        return integrate(self.density, self.grid, self.box_length)

    @property
    def atom_mass(self) -> float:
        return float(np.sum(self.atom_weights))

    @property
    def total_mass(self) -> float:
        return self.density_mass + self.atom_mass

    @property
    def n_atoms(self) -> int:
        return len(self.atom_weights)


def window(field: SampledField, center, radius: float, t_lo: float, t_hi: float) -> SampledField:
    """Restriction of ``field`` to ``B_radius(center) x [t_lo, t_hi]``.

    The spatial restriction is a masked copy on the parent grid (zero outside
    the ball), so grid integrals of the window equal ball integrals of the
    parent.  The result is generally not divergence free.
    """
    keep = (field.times >= t_lo) & (field.times <= t_hi)
    if not keep.any():
        raise ValueError(f"no time samples in [{t_lo}, {t_hi}]")
    mask = ball_mask(field.grid, field.box_length, center, radius)
    vel = field.velocity[keep] * mask
    pres = None if field.pressure is None else field.pressure[keep] * mask
    meta = dict(field.metadata)
    meta["window"] = {"center": [float(c) for c in center], "radius": float(radius), "t_lo": t_lo, "t_hi": t_hi}
    return SampledField(field.n, field.grid, field.box_length, field.times[keep], vel, pres, meta)


# ---------------------------------------------------------------------------
# binary formats


def _header(magic: bytes, n: int, comps: int, grid, L: float) -> bytes:
    return magic + struct.pack("<BBH", n, comps, 0) + struct.pack(f"<{n}I", *grid) + struct.pack("<d", L)


def field_to_bytes(field: SampledField) -> bytes:
    comps = field.n + (1 if field.pressure is not None else 0)
    out = [_header(FIELD_MAGIC, field.n, comps, field.grid, field.box_length)]
    out.append(struct.pack("<I", field.n_times))
    out.append(np.asarray(field.times, dtype="<f8").tobytes())
    for k in range(field.n_times):
        out.append(np.ascontiguousarray(field.velocity[k], dtype="<f8").tobytes())
        if field.pressure is not None:
            out.append(np.ascontiguousarray(field.pressure[k], dtype="<f8").tobytes())
    return b"".join(out)


def save_field(field: SampledField, path) -> None:
    Path(path).write_bytes(field_to_bytes(field))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, nbytes: int, what: str) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise FieldFormatError(f"truncated while reading {what}", self.pos)
        b = self.data[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return b

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, count: int, what: str) -> np.ndarray:
        start = self.pos
        arr = np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(float)
        bad = np.nonzero(~np.isfinite(arr))[0]
        if bad.size:
            raise FieldFormatError(f"non-finite value in {what}", start + 8 * int(bad[0]))
        return arr


def _read_header(r: _Reader, magic: bytes, kind: str):
    got = r.take(len(magic), "magic")
    if got != magic:
        raise FieldFormatError(f"bad magic {got!r}, expected {magic!r} for {kind}", 0)
    off = r.pos
    n, comps, zero = r.unpack("<BBH", "header")
    if zero != 0:
        raise FieldFormatError("reserved header field is not zero", off + 2)
    if n < 1 or n > 8:
        raise FieldFormatError(f"unsupported dimension {n}", off)
    off_grid = r.pos
    grid = r.unpack(f"<{n}I", "grid sizes")
    if any(g == 0 for g in grid):
        raise FieldFormatError("zero grid size", off_grid)
    off_L = r.pos
    (L,) = r.unpack("<d", "box length")
    if not (math.isfinite(L) and L > 0):
        raise FieldFormatError(f"invalid box length {L}", off_L)
    return n, comps, grid, L, off


def field_from_bytes(data: bytes) -> SampledField:
    r = _Reader(data)
    n, comps, grid, L, off_n = _read_header(r, FIELD_MAGIC, "VFLD1")
    if n not in (2, 3):
        raise FieldFormatError(f"field dimension must be 2 or 3, got {n}", off_n)
    if comps not in (n, n + 1):
        raise FieldFormatError(f"component count {comps} does not match n = {n}", off_n + 1)
    off_T = r.pos
    (T,) = r.unpack("<I", "time count")
    if T == 0:
        raise FieldFormatError("no time samples", off_T)
    off_times = r.pos
    times = r.floats(T, "times")
    for k in range(1, T):
        if not times[k] > times[k - 1]:
            raise FieldFormatError(f"times not strictly increasing at index {k}", off_times + 8 * k)
    for k in range(T):
        if not -1 <= times[k] <= 0:
            raise FieldFormatError(f"time {times[k]} outside [-1, 0]", off_times + 8 * k)
    npts = int(np.prod(grid))
    block = comps * npts
    if len(data) < r.pos + T * block * 8:
        missing_k = (len(data) - r.pos) // (block * 8)
        raise FieldFormatError(f"truncated payload in time block {missing_k}", r.pos + missing_k * block * 8)
    vel = np.empty((T, n, *grid))
    pres = np.empty((T, *grid)) if comps == n + 1 else None
    for k in range(T):
        arr = r.floats(block, f"time block {k}").reshape(comps, *grid)
        vel[k] = arr[:n]
        if pres is not None:
            pres[k] = arr[n]
    if r.pos != len(data):
        raise FieldFormatError("trailing bytes after payload", r.pos)
    return SampledField(n, grid, L, times, vel, pres)


def load_field(path) -> SampledField:
    return field_from_bytes(Path(path).read_bytes())


def measure_to_bytes(m: SampledMeasure) -> bytes:
    out = [_header(MEASURE_MAGIC, m.n, 1, m.grid, m.box_length)]
    out.append(np.ascontiguousarray(m.density, dtype="<f8").tobytes())
    out.append(struct.pack("<I", m.n_atoms))
    recs = np.concatenate([m.atom_positions, m.atom_weights[:, None]], axis=1)
    out.append(np.ascontiguousarray(recs, dtype="<f8").tobytes())
    return b"".join(out)


def save_measure(m: SampledMeasure, path) -> None:
    Path(path).write_bytes(measure_to_bytes(m))


def measure_from_bytes(data: bytes) -> SampledMeasure:
    r = _Reader(data)
    n, comps, grid, L, off_n = _read_header(r, MEASURE_MAGIC, "VMSR1")
    if comps != 1:
        raise FieldFormatError(f"measure component count must be 1, got {comps}", off_n + 1)
    off_d = r.pos
    dens = r.floats(int(np.prod(grid)), "density").reshape(grid)
    neg = np.nonzero(dens.ravel() < 0)[0]
    if neg.size:
        raise FieldFormatError("negative density", off_d + 8 * int(neg[0]))
    (m_atoms,) = r.unpack("<I", "atom count")
    off_a = r.pos
    recs = r.floats(m_atoms * (n + 1), "atom records").reshape(m_atoms, n + 1)
    for i in range(m_atoms):
        rec_off = off_a + 8 * (n + 1) * i
        if recs[i, n] <= 0:
            raise FieldFormatError(f"atom {i} has nonpositive weight", rec_off + 8 * n)
        if np.any(recs[i, :n] < 0) or np.any(recs[i, :n] >= L):
            raise FieldFormatError(f"atom {i} lies outside the box", rec_off)
    if r.pos != len(data):
        raise FieldFormatError("trailing bytes after payload", r.pos)
    return SampledMeasure(n, grid, L, dens, recs[:, :n], recs[:, n])


def load_measure(path) -> SampledMeasure:
    return measure_from_bytes(Path(path).read_bytes())


def export_slice_csv(field: SampledField, path, k: int = -1, quantity: str = "speed2", plane: int = 0) -> None:
    """Write one scalar slice as CSV ``x,y,value``.

    ``quantity`` is ``u0``, ``u1``, ... , ``p`` or ``speed2``; for 3D fields
    the slice is the plane ``x3 = plane * h``.
    """
    if quantity == "speed2":
        vals = field.speed_squared(k)
    elif quantity == "p":
        if field.pressure is None:
            raise ValueError("field has no pressure")
        vals = field.pressure[k]
    elif quantity.startswith("u") and quantity[1:].isdigit() and int(quantity[1:]) < field.n:
        vals = field.velocity[k, int(quantity[1:])]
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    if field.n == 3:
        vals = vals[:, :, plane]
    ax = grid_axes(field.grid[:2], field.box_length)
    with open(path, "w", newline="") as fh:
        fh.write("x,y,value\n")
        for i, x in enumerate(ax[0]):
            for j, y in enumerate(ax[1]):
                fh.write(f"{float(x)!r},{float(y)!r},{float(vals[i, j])!r}\n")
