"""Scale-invariant energy, flux and pressure quantities, Morrey seminorms, the Onsager modulus
and the local energy balance, all evaluated on sampled fields."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .exponents import PQPoint, scaling_exponents
from .fieldio import (
    BumpSpec,
    CutoffProfile,
    SampledField,
    ball_indices,
    cell_volume,
    grid_axes,
    periodic_delta,
)
from .spectral import gradient, pressure_from_velocity


class TimeWindowError(ValueError):
    pass


def _check_radius(r):
    if not (r > 0 and math.isfinite(r)):
        raise ValueError(f"radius must be positive, got {r}")


def _ball_sum(values, grid, L, center, r) -> float:
    idx, mask = ball_indices(grid, L, center, r)
    if mask.size == 0:
        return 0.0
    return float(values[np.ix_(*idx)][mask].sum() * cell_volume(grid, L))


def ball_energy(field: SampledField, k: int, center, r: float) -> float:
    """``int_{B_r(center)} |u(t_k)|^2 dx``."""
    _check_radius(r)
    return _ball_sum(field.speed_squared(k), field.grid, field.box_length, center, r)


def time_weights(times: np.ndarray, lo: float, hi: float = 0.0) -> np.ndarray:
    """Nearest-sample rectangle weights of each sample for integrals over ``[lo, hi]``.

    Sample ``k`` owns the cell between the midpoints to its neighbours; the
    first cell extends half a spacing below ``t_0`` and the last one up to 0.
    """
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        edges = np.array([min(t[0], lo), max(t[0], hi, 0.0)])
    else:
        mids = 0.5 * (t[1:] + t[:-1])
        edges = np.concatenate([[t[0] - 0.5 * (t[1] - t[0])], mids, [max(0.0, t[-1])]])
    a = np.clip(edges[:-1], lo, hi)
    b = np.clip(edges[1:], lo, hi)
    return np.maximum(b - a, 0.0)


def _window(field: SampledField, alpha: float, r: float):
    lo = -(r**alpha)
    t = field.times
    first_edge = t[0] - 0.5 * (t[1] - t[0]) if t.size > 1 else t[0]
    if lo < first_edge - 1e-12:
        raise TimeWindowError(
            f"field starts at t = {t[0]:g} but the window (-r^alpha, 0) = ({lo:g}, 0) is required"
        )
    w = time_weights(t, lo, 0.0)
    ks = np.nonzero(w > 0)[0]
    if ks.size == 0:
        raise TimeWindowError(f"no samples in the window ({lo:g}, 0)")
    return ks, w


def _exponents(pq: PQPoint):
    se = scaling_exponents(pq)
    return float(se.alpha), float(se.beta)


def _pressure(field: SampledField, k: int) -> np.ndarray:
    if field.pressure is not None:
        return np.asarray(field.pressure[k])
    return pressure_from_velocity(np.asarray(field.velocity[k]), field.box_length)


def quantity_A(field: SampledField, pq: PQPoint, center, r: float) -> float:
    """``r^-beta sup_{-r^alpha < t < 0} int_{B_r} |u|^2`` over the available samples."""
    _check_radius(r)
    alpha, beta = _exponents(pq)
    ks, _ = _window(field, alpha, r)
    return float(r ** (-beta) * max(ball_energy(field, int(k), center, r) for k in ks))


def quantity_G(field: SampledField, pq: PQPoint, center, r: float) -> float:
    """``r^(-beta-1) int int_{Q_r} |u|^3``."""
    _check_radius(r)
    alpha, beta = _exponents(pq)
    ks, w = _window(field, alpha, r)
    grid, L = field.grid, field.box_length
    total = sum(w[k] * _ball_sum(field.speed_squared(k) ** 1.5, grid, L, center, r) for k in ks)
    return float(r ** (-beta - 1) * total)


def quantity_P(field: SampledField, pq: PQPoint, center, r: float) -> float:
    """``r^(-beta-1) int int_{Q_r} |p - (p)_r| |u|``, with ``(p)_r`` the per-time average over ``B_r``."""
    _check_radius(r)
    alpha, beta = _exponents(pq)
    ks, w = _window(field, alpha, r)
    grid, L = field.grid, field.box_length
    idx, mask = ball_indices(grid, L, center, r)
    dv = cell_volume(grid, L)
    total = 0.0
    for k in ks:
        if mask.size == 0 or not mask.any():
            continue
        p = _pressure(field, int(k))[np.ix_(*idx)][mask]
        speed = np.sqrt(field.speed_squared(int(k))[np.ix_(*idx)][mask])
        total += w[k] * float(np.sum(np.abs(p - p.mean()) * speed) * dv)
    return float(r ** (-beta - 1) * total)


# ---------------------------------------------------------------------------
# ladder


@dataclass(frozen=True)
class LevelRecord:
    level: int
    r: float
    A: float
    G: float
    P: float
    ratio_AG: float
    ratio_chain: Optional[float]


@dataclass
class ScaleLadderReport:
    center: tuple
    R: float
    levels: int
    alpha: float
    beta: float
    records: list = dc_field(default_factory=list)
    truncated: bool = False
    reason: str = ""
    zero_ratio_levels: list = dc_field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    def no_upward_trend(self, name: str = "ratio_chain", tol: float = 10.0) -> bool:
        """``max`` over levels at most ``tol`` times the coarsest value."""
        vals = self.series(name)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return True
        return bool(vals.max() <= tol * vals[0]) if vals[0] > 0 else bool(vals.max() == 0)

    def to_csv(self) -> str:
        rows = ["level,r,A,G,P,ratio_AG,ratio_chain"]
        for rec in self.records:
            chain = "" if rec.ratio_chain is None else repr(rec.ratio_chain)
            rows.append(f"{rec.level},{rec.r!r},{rec.A!r},{rec.G!r},{rec.P!r},{rec.ratio_AG!r},{chain}")
        return "\n".join(rows) + "\n"


def _safe_ratio(num: float, den: float):
    if den == 0:
        return 0.0, num == 0
    return num / den, False


def ladder_report(field: SampledField, pq: PQPoint, center, R: float, J: int, jobs: int = 1) -> ScaleLadderReport:
    """A, G, P at ``r_j = R / 2^j`` for ``j < J`` and the two chain ratios.

    ``ratio_AG = G_j / A_j^((p-3)/(p-2))`` and
    ``ratio_chain = A_{j+1} / (G_j^(2/3) + G_j + P_j)``.  Division ``0/0`` is
    taken as 0 and the level is listed in ``zero_ratio_levels``.
    """
    alpha, beta = _exponents(pq)
    rep = ScaleLadderReport(tuple(float(c) for c in center), float(R), int(J), alpha, beta)
    x = pq.inv_p
    expo = float((1 - 3 * x) / (1 - 2 * x)) if 2 * x < 1 else math.nan

    def level(j):
        r = R / 2**j
        return r, quantity_A(field, pq, center, r), quantity_G(field, pq, center, r), quantity_P(field, pq, center, r)

    raw = []
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            futs = [ex.submit(level, j) for j in range(J)]
            for j, f in enumerate(futs):
                try:
                    raw.append(f.result())
                except ValueError as exc:
                    rep.truncated, rep.reason = True, f"level {j}: {exc}"
                    break
    else:
        for j in range(J):
            try:
                raw.append(level(j))
            except ValueError as exc:
                rep.truncated, rep.reason = True, f"level {j}: {exc}"
                break
    for j, (r, A, G, P) in enumerate(raw):
        rag, z1 = _safe_ratio(G, A**expo if A > 0 else 0.0)
        chain = None
        if j + 1 < len(raw):
            chain, z2 = _safe_ratio(raw[j + 1][1], G ** (2 / 3) + G + P)
            z1 = z1 or z2
        if z1:
            rep.zero_ratio_levels.append(j)
        rep.records.append(LevelRecord(j, r, A, G, P, float(rag), None if chain is None else float(chain)))
    return rep


# ---------------------------------------------------------------------------
# windowed energy


def windowed_energy_E(field: SampledField, t: float, center, r: float,
                      profile: Optional[CutoffProfile] = None, check: bool = False) -> float:
    """``E(t, r) = int |u(x, t)|^2 psi(|x - center| / r) dx`` at the sample nearest ``t``.

    With ``check=True`` the bounds ``||u||^2_{B_{inner r}} <= E <= ||u||^2_{B_{outer r}}``
    are asserted.
    """
    _check_radius(r)
    profile = profile or CutoffProfile.standard()
    L, grid = field.box_length, field.grid
    if r * profile.outer_radius_ratio > L / 2:
        raise ValueError(f"cutoff support {r * profile.outer_radius_ratio:g} exceeds half the box side")
    k = field.nearest_time_index(t)
    idx, mask = ball_indices(grid, L, center, r * profile.outer_radius_ratio)
    ax = grid_axes(grid, L)
    d2 = None
    for a, (ii, c) in enumerate(zip(idx, center)):
        d = periodic_delta(ax[a][ii], c, L) ** 2
        d2 = d if d2 is None else np.add.outer(d2, d)
    phi = profile(np.sqrt(d2) / r)
    s2 = field.speed_squared(k)[np.ix_(*idx)]
    val = float(np.sum(s2 * phi) * cell_volume(grid, L))
    if check:
        lo = _ball_sum(field.speed_squared(k), grid, L, center, r * profile.inner_radius_ratio)
        hi = _ball_sum(field.speed_squared(k), grid, L, center, r * profile.outer_radius_ratio)
        slack = 1e-12 * max(hi, 1e-300)
        if not (lo - slack <= val <= hi + slack):
            raise AssertionError(f"sandwich violated: {lo} <= {val} <= {hi}")
    return val


def windowed_energy_Ek(field: SampledField, t: float, center, r: float, k: int,
                       profile: Optional[CutoffProfile] = None) -> float:
    """``E_k(t, r) = E(t, 2^k r) / 2^(k n)``."""
    return windowed_energy_E(field, t, center, 2.0**k * r, profile) / 2.0 ** (k * field.n)


# ---------------------------------------------------------------------------
# Morrey


@dataclass(frozen=True)
class MorreyReport:
    exponent: float
    value: float
    x0: tuple
    r: float
    t: float
    radii: tuple
    center_stride: int
    time_spacing: float


def _ball_kernel(grid, L, r):
    ax = grid_axes(grid, L)
    d = np.meshgrid(*[periodic_delta(a, 0.0, L) for a in ax], indexing="ij", sparse=True)
    return (sum(x * x for x in d) < r * r).astype(float)


def ball_energy_map(s2: np.ndarray, grid, L, r) -> np.ndarray:
    """``int_{B_r(x)} |u|^2`` for every grid center ``x`` at once (periodic convolution)."""
    ker = _ball_kernel(grid, L, r)
    axes = tuple(range(s2.ndim))
    conv = np.fft.irfftn(np.fft.rfftn(s2) * np.conj(np.fft.rfftn(ker)), s=s2.shape, axes=axes)
    return conv * cell_volume(grid, L)


def default_morrey_radii(field: SampledField) -> list[float]:
    L = field.box_length
    h = L / min(field.grid)
    radii, r = [], L
    while r >= 2 * h:
        radii.append(r)
        r /= 2
    return radii


def morrey_seminorm(field: SampledField, lam: float, radii: Optional[Sequence[float]] = None,
                    center_stride: Optional[int] = None, jobs: int = 1) -> MorreyReport:
    """``sup r^-lam int_{B_r(x0)} |u(t)|^2`` over a lattice of centers, dyadic radii and all samples.

    Centers are grid points with index a multiple of ``center_stride`` on each
    axis (default: about 16 per axis).  Radii default to ``L, L/2, ...`` down to
    two grid spacings.
    """
    if not 0 <= lam <= field.n:
        raise ValueError(f"lambda must lie in [0, {field.n}], got {lam}")
    radii = list(radii) if radii is not None else default_morrey_radii(field)
    stride = center_stride or max(1, min(field.grid) // 16)
    sl = tuple(slice(None, None, stride) for _ in field.grid)
    L, grid = field.box_length, field.grid

    def one(r):
        best = (-1.0, None, None)
        for k in range(field.n_times):
            m = ball_energy_map(field.speed_squared(k), grid, L, r)[sl]
            i = int(np.argmax(m))
            if m.flat[i] > best[0]:
                best = (float(m.flat[i]), np.unravel_index(i, m.shape), k)
        return best

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(one, radii))
    else:
        results = [one(r) for r in radii]
    best_v, best = -1.0, None
    for r, (v, ij, k) in zip(radii, results):
        scaled = v * r ** (-lam)
        if scaled > best_v:
            best_v, best = scaled, (r, ij, k)
    r, ij, k = best
    x0 = tuple(float(i * stride * L / N) for i, N in zip(ij, grid))
    dt = float(np.min(np.diff(field.times))) if field.n_times > 1 else 0.0
    return MorreyReport(float(lam), max(best_v, 0.0), x0, float(r), float(field.times[k]), tuple(radii), stride, dt)


def morrey_csv(rep: MorreyReport) -> str:
    xs = ",".join(f"x0_{i}" for i in range(len(rep.x0)))
    vals = ",".join(repr(x) for x in rep.x0)
    return f"lambda,value,{xs},r,t\n{rep.exponent!r},{rep.value!r},{vals},{rep.r!r},{rep.t!r}\n"


# ---------------------------------------------------------------------------
# Onsager modulus


def _full_time_weights(times):
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        return np.ones(1)
    mids = 0.5 * (t[1:] + t[:-1])
    edges = np.concatenate([[t[0]], mids, [t[-1]]])
    return np.diff(edges)


def onsager_modulus(field: SampledField, shifts: Sequence[float]) -> dict:
    """``Theta(|y|) = max_axis |y|^-1 int int |u(x + y) - u(x)|^3`` for grid-aligned axis shifts.

    Time integration uses nearest-sample cells over the sampled span; a
    single snapshot gets weight 1.
    """
    L = field.box_length
    w = _full_time_weights(field.times)
    out = {}
    for y in shifts:
        y = float(y)
        if not y > 0:
            raise ValueError(f"shift must be positive, got {y}")
        best = 0.0
        for axis, N in enumerate(field.grid):
            h = L / N
            m = y / h
            if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
                raise ValueError(f"shift {y} is not a multiple of the grid spacing {h} on axis {axis}")
            m = int(round(m))
            total = 0.0
            for k in range(field.n_times):
                u = np.asarray(field.velocity[k])
                du = np.roll(u, -m, axis=axis + 1) - u
                total += w[k] * float(np.sum(np.sum(du * du, axis=0) ** 1.5)) * cell_volume(field.grid, L)
            best = max(best, total / y)
        out[y] = float(best)
    return out


def loglog_slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if np.any(ys <= 0):
        raise ValueError("log-log slope needs positive values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def onsager_csv(theta: dict) -> str:
    return "shift,theta\n" + "".join(f"{float(y)!r},{float(v)!r}\n" for y, v in sorted(theta.items()))


# ---------------------------------------------------------------------------
# local energy balance


@dataclass(frozen=True)
class LocalEnergyBalance:
    lhs: float
    rhs: float
    scale: float

    @property
    def residual(self) -> float:
        den = max(abs(self.lhs), self.scale)
        return 0.0 if den == 0 else abs(self.lhs - self.rhs) / den


def local_energy_balance(field: SampledField, nu: float, bump: BumpSpec, t_a: float, t_b: float,
                         quadrature: str = "trapezoid") -> LocalEnergyBalance:
    """Both sides of the local energy equality for ``sigma = psi_x * psi_t``.

    ``LHS = [int |u|^2 sigma]_{t_a}^{t_b}``; ``RHS`` integrates
    ``|u|^2 d_t sigma + (|u|^2 + 2p) u . grad sigma + nu |u|^2 Lap sigma - 2 nu |grad u|^2 sigma``
    over the samples in ``[t_a, t_b]`` with the trapezoid rule (second order in the
    sample spacing) or ``"simpson"``.
    """
    if quadrature not in ("simpson", "trapezoid"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    if field.pressure is None:
        raise ValueError("local energy balance needs pressure samples")
    if not t_a < t_b:
        raise ValueError("need t_a < t_b")
    L, grid = field.box_length, field.grid
    bump.check_fits(L)
    ka, kb = field.nearest_time_index(t_a), field.nearest_time_index(t_b)
    tol = 1e-9 * max(1.0, abs(t_a), abs(t_b))
    if abs(field.times[ka] - t_a) > tol or abs(field.times[kb] - t_b) > tol:
        raise ValueError("t_a and t_b must be sample times")
    phi, gphi, lphi = bump.spatial(grid, L)
    dv = cell_volume(grid, L)
    ks = range(ka, kb + 1)
    ts = field.times[ka:kb + 1]
    eta, deta = bump.temporal(ts)
    integrand, mass = [], []
    for i, k in enumerate(ks):
        u = np.asarray(field.velocity[k])
        p = np.asarray(field.pressure[k])
        s2 = np.sum(u * u, axis=0)
        flux = sum(u[a] * gphi[a] for a in range(field.n))
        val = np.sum(s2 * phi) * deta[i] + eta[i] * np.sum((s2 + 2 * p) * flux)
        if nu:
            g2 = sum(sum(g * g for g in gradient(u[a], L)) for a in range(field.n))
            val += nu * eta[i] * np.sum(s2 * lphi) - 2 * nu * eta[i] * np.sum(g2 * phi)
        integrand.append(float(val) * dv)
        mass.append(float(np.sum(s2 * phi)) * dv * eta[i])
    lhs = float(mass[-1] - mass[0])
    if quadrature == "simpson" and len(ts) >= 3:
        rhs = float(integrate.simpson(integrand, x=ts))
    else:
        rhs = float(integrate.trapezoid(integrand, x=ts))
    return LocalEnergyBalance(lhs, rhs, float(max(mass)))


def local_energy_residual(field: SampledField, nu: float, bump: BumpSpec, t_a: float, t_b: float,
                          quadrature: str = "trapezoid") -> float:
    """``|LHS - RHS| / max(|LHS|, max_k int |u_k|^2 sigma_k)``; 0 for a vanishing field."""
    return local_energy_balance(field, nu, bump, t_a, t_b, quadrature).residual


def random_bump_panel(n: int, box_length: float, count: int = 20, seed: int = 0,
                      t_range: tuple = (-1.0, 0.0)) -> list[BumpSpec]:
    """Random space-time bumps with a smooth (C^6) profile, sized relative to the box.

    Spatial radii are uniform in ``[0.8, 1.5] * L / (2 pi)``; the time factor is
    centered in ``t_range`` with half-width between 1.5 and 3 times its length.
    """
    rng = np.random.default_rng(seed)
    prof = CutoffProfile(0.3, 1.0, 6)
    scale = box_length / (2 * math.pi)
    t0, t1 = t_range
    span = t1 - t0
    out = []
    for _ in range(count):
        c = tuple(rng.uniform(0, box_length, n))
        r = rng.uniform(0.8, 1.5) * scale
        tc = rng.uniform(t0, t1)
        tr = rng.uniform(1.5, 3.0) * span
        out.append(BumpSpec(c, r, prof, tc, tr))
    return out
