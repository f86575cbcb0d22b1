"""Energy measure snapshots, defect decomposition, and local dimension and density estimators."""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .fieldio import (
    BumpSpec,
    SampledField,
    SampledMeasure,
    ball_integral,
    grid_axes,
    periodic_delta,
)

_TREES: "weakref.WeakKeyDictionary[SampledMeasure, cKDTree]" = weakref.WeakKeyDictionary()


def _atom_tree(m: SampledMeasure) -> Optional[cKDTree]:
    if m.n_atoms == 0:
        return None
    tree = _TREES.get(m)
    if tree is None:
        tree = cKDTree(np.asarray(m.atom_positions), boxsize=m.box_length)
        _TREES[m] = tree
    return tree


def atom_mass_in_ball(m: SampledMeasure, center, r: float) -> float:
    tree = _atom_tree(m)
    if tree is None:
        return 0.0
    c = np.mod(np.asarray(center, dtype=float), m.box_length)
    idx = tree.query_ball_point(c, r)
    if not idx:
        return 0.0
    idx = np.asarray(idx)
    d = np.sqrt(np.sum(periodic_delta(m.atom_positions[idx], c, m.box_length) ** 2, axis=-1))
    return float(np.sum(m.atom_weights[idx][d < r]))


def measure_ball(m: SampledMeasure, center, r: float) -> float:
    """``m(B_r(center))``: grid density over the open ball plus the atoms strictly inside."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    dens = ball_integral(m.density, m.grid, m.box_length, center, r) if np.any(m.density) else 0.0
    return dens + atom_mass_in_ball(m, center, r)


def pair_with_bump(m: SampledMeasure, bump: BumpSpec) -> float:
    """``int sigma dm`` for the spatial factor of ``bump``."""
    phi, _, _ = bump.spatial(m.grid, m.box_length)
    val = float(np.sum(m.density * phi) * m.cell_volume)
    if m.n_atoms:
        d = np.sqrt(np.sum(periodic_delta(m.atom_positions, bump.center, m.box_length) ** 2, axis=-1))
        val += float(np.sum(m.atom_weights * bump.profile(d / bump.radius)))
    return val


def bump_panel(n: int, box_length: float, count: int = 10, seed: int = 0) -> list[BumpSpec]:
    """Fixed panel of test bumps: deterministic centers, radius ``L/8``."""
    rng = np.random.default_rng(seed)
    return [BumpSpec(tuple(rng.uniform(0, box_length, n)), box_length / 8) for _ in range(count)]


# ---------------------------------------------------------------------------
# energy measure


@dataclass
class EnergyMeasureApprox:
    times: np.ndarray
    snapshots: list
    limit: SampledMeasure
    bumps: list
    convergence_report: np.ndarray
    limit_source: str = "final snapshot"

    @property
    def gaps(self) -> np.ndarray:
        """Largest Cauchy gap over the bump panel for each snapshot."""
        return self.convergence_report.max(axis=1)

    def masses(self) -> np.ndarray:
        return np.array([s.total_mass for s in self.snapshots])


def snapshot_measure(field: SampledField, k: int) -> SampledMeasure:
    """``|u(t_k)|^2 dx`` as a pure density."""
    return SampledMeasure(field.n, field.grid, field.box_length, field.speed_squared(k),
                          metadata={"time": float(field.times[k])})


def build_energy_measure(field: SampledField, K: int, limit: Optional[SampledMeasure] = None,
                         bumps: Optional[Sequence[BumpSpec]] = None) -> EnergyMeasureApprox:
    """Snapshots ``|u(t_k)|^2 dx`` of the last ``K`` samples and their Cauchy gaps.

    The limit is the final snapshot unless a ground-truth ``limit`` is given.
    ``convergence_report[k, b] = |<snapshot_k - snapshot_K, sigma_b>|``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if K > field.n_times:
        raise ValueError(f"K = {K} exceeds the {field.n_times} available samples")
    ks = range(field.n_times - K, field.n_times)
    snaps = [snapshot_measure(field, k) for k in ks]
    bumps = list(bumps) if bumps is not None else bump_panel(field.n, field.box_length)
    pair = np.array([[pair_with_bump(s, b) for b in bumps] for s in snaps])
    report = np.abs(pair - pair[-1])
    source = "final snapshot"
    if limit is None:
        limit = snaps[-1]
    else:
        if limit.grid != field.grid or limit.box_length != field.box_length:
            raise ValueError("limit measure grid does not match the field")
        source = "supplied"
    return EnergyMeasureApprox(np.array(field.times[list(ks)]), snaps, limit, bumps, report, source)


@dataclass(frozen=True)
class DefectReport:
    theta: SampledMeasure
    negative_part_mass: float
    oscillation_indicator: float
    concentration_indicator: float
    total_variation: float

    def summary(self) -> dict:
        return {
            "negative_part_mass": self.negative_part_mass,
            "oscillation_indicator": self.oscillation_indicator,
            "concentration_indicator": self.concentration_indicator,
            "total_variation": self.total_variation,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary())


def defect_decomposition(E: EnergyMeasureApprox, final_field_slice, k: int = -1) -> DefectReport:
    """``theta = limit - |u|^2 dx`` with ``u`` the slice ``k`` of ``final_field_slice``.

    The density part is clipped at zero; the mass of the negative part is
    reported, not discarded.  Atoms of the limit are the concentration part.
    """
    lim = E.limit
    if isinstance(final_field_slice, SampledField):
        f = final_field_slice
        if f.grid != lim.grid or f.box_length != lim.box_length:
            raise ValueError(f"grid mismatch: {f.grid} vs {lim.grid}")
        s2 = f.speed_squared(k)
    else:
        s2 = np.asarray(final_field_slice, dtype=float)
        if s2.shape != lim.grid:
            raise ValueError(f"grid mismatch: {s2.shape} vs {lim.grid}")
    diff = lim.density - s2
    dv = lim.cell_volume
    neg = float(np.sum(np.maximum(-diff, 0.0)) * dv)
    pos = np.maximum(diff, 0.0)
    theta = SampledMeasure(lim.n, lim.grid, lim.box_length, pos, lim.atom_positions, lim.atom_weights,
                           metadata={"kind": "defect"})
    osc = float(np.sum(pos) * dv)
    conc = float(np.sum(lim.atom_weights))
    return DefectReport(theta, neg, osc, conc, osc + neg + conc)


# ---------------------------------------------------------------------------
# local dimension and density


@dataclass(frozen=True)
class LocalDimensionReport:
    estimate: float
    radii: np.ndarray
    masses: np.ndarray
    slopes: np.ndarray

    def to_csv(self, x) -> str:
        xs = ",".join(f"x{i}" for i in range(len(x)))
        vals = ",".join(repr(float(c)) for c in x)
        rows = [f"{xs},level,r,mass,slope"]
        for j, (r, m) in enumerate(zip(self.radii, self.masses)):
            s = "" if j == 0 else repr(float(self.slopes[j - 1]))
            rows.append(f"{vals},{j},{r!r},{m!r},{s}")
        return "\n".join(rows) + "\n"


def _check_ladder(radii) -> np.ndarray:
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 6:
        raise ValueError("the radius ladder needs at least 6 levels")
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ValueError("the radius ladder must be positive and strictly decreasing")
    return r


def _tail(a: np.ndarray) -> np.ndarray:
    return a[len(a) // 2:]


def lower_local_dimension_report(m: SampledMeasure, x, radii) -> LocalDimensionReport:
    r = _check_ladder(radii)
    masses = np.array([measure_ball(m, x, rj) for rj in r])
    if np.any(masses <= 0):
        return LocalDimensionReport(math.inf, r, masses, np.full(r.size - 1, math.nan))
    slopes = np.diff(np.log(masses)) / np.diff(np.log(r))
    return LocalDimensionReport(float(np.min(_tail(slopes))), r, masses, slopes)


def lower_local_dimension(m: SampledMeasure, x, radii) -> float:
    """Finite-scale lower local dimension: min of the successive log-mass/log-radius slopes
    over the finest half of the ladder.  ``inf`` when some ball carries no mass."""
    return lower_local_dimension_report(m, x, radii).estimate


def upper_s_density(m: SampledMeasure, x, s: float, radii) -> float:
    """``max`` over the finest half of the ladder of ``(2r)^-s m(B_r(x))``."""
    r = _check_ladder(radii)
    vals = np.array([(2 * rj) ** (-s) * measure_ball(m, x, rj) for rj in r])
    return float(np.max(_tail(vals)))


def upper_s_density_series(m: SampledMeasure, x, s: float, radii) -> np.ndarray:
    r = _check_ladder(radii)
    return np.array([(2 * rj) ** (-s) * measure_ball(m, x, rj) for rj in r])


# ---------------------------------------------------------------------------
# concentration dimension


@dataclass(frozen=True)
class ConcentrationReport:
    value: float
    s_grid: np.ndarray
    certified: np.ndarray
    radii: np.ndarray
    sup_masses: np.ndarray
    resolution_floor: float


def default_centers(m: SampledMeasure, per_axis: int = 16, max_atoms: int = 256) -> np.ndarray:
    """Lattice of ``per_axis^n`` grid points, the same lattice shifted by half a cell, and up to
    ``max_atoms`` atom positions."""
    ax = [a[:: max(1, len(a) // per_axis)] for a in grid_axes(m.grid, m.box_length)]
    lattice = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, m.n)
    half = 0.5 * m.box_length / np.asarray(m.grid, dtype=float)
    parts = [lattice, lattice + half]
    if m.n_atoms:
        step = max(1, m.n_atoms // max_atoms)
        parts.append(np.asarray(m.atom_positions)[::step][:max_atoms])
    return np.concatenate(parts)


def default_concentration_radii(m: SampledMeasure, levels: int = 6) -> np.ndarray:
    """Dyadic ladder ending at ``L/128``, or at eight cells when the density is nonzero and coarser."""
    L = m.box_length
    finest = L / 128
    if np.any(m.density):
        finest = max(finest, 8 * L / min(m.grid))
    return finest * 2.0 ** np.arange(levels - 1, -1, -1)


def concentration_dim_report(m: SampledMeasure, s_grid, radii=None, centers=None,
                             tol: float = 0.01) -> ConcentrationReport:
    """Largest ``s <= n`` for which ``S(r) = sup_x m(B_r(x)) / r^s`` does not grow between the two finest radii.

    ``s`` is certified when ``S(r_last) <= (1 + tol) S(r_prev)``; the ratio is
    increasing in ``s``, so the certified set is an initial segment of the grid.
    Grid values above ``n`` are never certified.
    """
    if m.total_mass <= 0:
        raise ValueError("measure is zero")
    s_grid = np.sort(np.asarray(s_grid, dtype=float))
    if radii is None:
        radii = default_concentration_radii(m)
    r = _check_ladder(radii)
    centers = default_centers(m) if centers is None else np.asarray(centers, dtype=float)
    sup = np.array([max(measure_ball(m, c, rj) for c in centers) for rj in r[-2:]])
    cert = np.array([s <= m.n and sup[1] * r[-1] ** (-s) <= (1 + tol) * sup[0] * r[-2] ** (-s) for s in s_grid])
    ok = s_grid[cert]
    value = float(ok.max()) if ok.size else float(s_grid.min())
    return ConcentrationReport(value, s_grid, cert, r, sup, float(r[-1]))


def concentration_dim_lower_bound(m: SampledMeasure, s_grid, radii=None, centers=None, tol: float = 0.01) -> float:
    return concentration_dim_report(m, s_grid, radii, centers, tol).value
