"""Covering sums over families of space-time cylinders and the Gronwall-type iteration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg

from .fieldio import CutoffProfile


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved relative tolerance {achieved:.3e})")


@dataclass(frozen=True, eq=False)
class CoverSpec:
    """Balls ``B_{r_i}(x_i)`` with ``r_i < delta`` and time intervals ``I_i = (-2 r_i^alpha, 0)``."""

    centers: np.ndarray
    radii: np.ndarray
    alpha: float
    d: float
    delta: Optional[float] = None

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        c = np.asarray(self.centers, dtype=float)
        c = c.reshape(len(r), -1) if c.size else np.zeros((len(r), 1))
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "centers", c)
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("radii must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.delta is None:
            object.__setattr__(self, "delta", float(np.nextafter(r.max(), np.inf)) if r.size else 1.0)
        if r.size and not np.all(r < self.delta):
            raise ValueError("every radius must be below delta")

    @property
    def H(self) -> float:
        return math.fsum(self.radii**self.d)

    @property
    def interval_lengths(self) -> np.ndarray:
        return 2 * self.radii**self.alpha

    @classmethod
    def from_json(cls, text: str) -> "CoverSpec":
        obj = json.loads(text)
        balls = obj.get("balls", [])
        centers = np.array([b["x"] for b in balls], dtype=float) if balls else np.zeros((0, 1))
        radii = np.array([b["r"] for b in balls], dtype=float)
        return cls(centers, radii, float(obj["alpha"]), float(obj["d"]), obj.get("delta"))

    def to_json(self) -> str:
        obj = {"alpha": self.alpha, "d": self.d,
               "balls": [{"x": [float(v) for v in c], "r": float(r)} for c, r in zip(self.centers, self.radii)],
               "delta": self.delta}
        return json.dumps(obj)

    @classmethod
    def load(cls, path) -> "CoverSpec":
        return cls.from_json(Path(path).read_text())


def cover_sum(spec: CoverSpec, sigma: float, s: float) -> float:
    """``int (sum_i r_i^-sigma chi_{I_i}(t))^s dt``, evaluated exactly.

    The integrand is constant between consecutive interval endpoints
    ``-2 r_i^alpha``; sorting them gives the integral as a finite sum.
    """
    if not (sigma > 0 and s > 0):
        raise ValueError("sigma and s must be positive")
    if spec.radii.size == 0:
        return 0.0
    a = spec.interval_lengths
    order = np.argsort(-a, kind="stable")
    a = a[order]
    w = spec.radii[order] ** (-sigma)
    # on (-a_k, -a_{k+1}) exactly the k+1 longest intervals are active
    level = np.cumsum(w)
    lengths = a - np.append(a[1:], 0.0)
    return math.fsum(lengths * level**s)


def conv_admissible(d: float, sigma: float, s: float, alpha: float) -> bool:
    """Parameter range in which the covering sum is bounded by ``H^s``."""
    e = alpha / s - sigma
    if d == 0 and e >= 0:
        return True
    return (s >= 1 and d <= e) or (s < 1 and d < e)


@dataclass(frozen=True)
class ConvVerdict:
    admissible: bool
    ratios: tuple
    bounded: Optional[bool]

    def to_dict(self) -> dict:
        return {"admissible": self.admissible, "ratios": list(self.ratios), "bounded": self.bounded}


def check_conv_bound(family: Sequence[CoverSpec], sigma: float, s: float, factor: float = 10.0) -> ConvVerdict:
    """Ratios ``cover_sum / H^s`` along a refining family of covers.

    For admissible parameters ``bounded`` says whether every ratio stays
    within ``factor`` times the first; otherwise it is ``None`` (report only).
    """
    family = list(family)
    if not family:
        raise ValueError("empty cover family")
    d, alpha = family[0].d, family[0].alpha
    ratios = []
    for spec in family:
        H = spec.H
        ratios.append(cover_sum(spec, sigma, s) / H**s if H > 0 else math.inf)
    adm = conv_admissible(d, sigma, s, alpha)
    bounded = bool(max(ratios) <= factor * ratios[0]) if adm else None
    return ConvVerdict(adm, tuple(ratios), bounded)


def dyadic_segment_covers(levels: int, alpha: float, n: int = 2, length: float = 1.0, start: int = 0) -> list[CoverSpec]:
    """Covers of the segment ``[0, length] x {0}`` by ``2^j`` balls of radius ``length 2^-(j+1)``."""
    out = []
    for j in range(start, start + levels):
        m = 2**j
        r = length / (2 * m)
        c = np.zeros((m, n))
        c[:, 0] = (np.arange(m) + 0.5) * 2 * r
        out.append(CoverSpec(c, np.full(m, r), alpha, 1.0, delta=length))
    return out


def point_covers(levels: int, alpha: float, n: int = 2) -> list[CoverSpec]:
    """Single balls ``B_{2^-j}(0)`` around one point (``d = 0``)."""
    return [CoverSpec(np.zeros((1, n)), np.array([2.0**-j]), alpha, 0.0, delta=2.0) for j in range(1, levels + 1)]


def sup_test_function_eval(spec: CoverSpec, x, t, profile: Optional[CutoffProfile] = None):
    """``phi^N(x,t) = max_i psi(|x - x_i| / r_i) psi(|t| / r_i^alpha)`` and ``sup_i |grad phi_i|``.

    ``x`` has shape ``(P, n)`` (or ``(n,)``) and ``t`` shape ``(P,)``;
    distances are Euclidean.
    """
    profile = profile or CutoffProfile.asymmetric()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if spec.radii.size == 0:
        z = np.zeros(len(x))
        return z, z
    diff = x[:, None, :] - spec.centers[None, :, :]
    rho = np.sqrt(np.sum(diff * diff, axis=-1))
    r = spec.radii[None, :]
    ra = r**spec.alpha
    s_x, s_t = rho / r, np.abs(t)[:, None] / ra
    px, pt = profile(s_x), profile(s_t)
    vals = px * pt
    dpx = profile.derivative(s_x) / r
    dpt = profile.derivative(s_t) / ra
    gx2 = (dpx * pt) ** 2
    gt2 = (px * dpt) ** 2
    grad = np.sqrt(gx2 + gt2)
    return vals.max(axis=1), grad.max(axis=1)


# ---------------------------------------------------------------------------
# Gronwall iteration


@dataclass(frozen=True)
class DepthRecord:
    M: int
    closed_form: float
    nested_quadrature: float
    gap: float


@dataclass
class IterationTrace:
    q: float
    c0: float
    r: float
    t0: float
    C0: float
    C1: float
    records: list = dc_field(default_factory=list)
    partial_sums: list = dc_field(default_factory=list)
    remainders: list = dc_field(default_factory=list)
    exp_C1: float = 0.0
    viscous_term: float = 0.0
    ladder_check: Optional[dict] = None

    def to_csv(self) -> str:
        rows = ["M,closed_form,nested_quadrature,gap"]
        rows += [f"{d.M},{d.closed_form!r},{d.nested_quadrature!r},{d.gap!r}" for d in self.records]
        return "\n".join(rows) + "\n"

    def max_relative_gap(self) -> float:
        return max((d.gap / abs(d.closed_form) for d in self.records if d.closed_form), default=0.0)


def _gauss_panel_ops(order: int):
    """Gauss-Legendre nodes/weights on [-1, 1] and the matrix of running integrals from -1."""
    x, w = npleg.leggauss(order)
    V = npleg.legvander(x, order - 1)
    Vinv = np.linalg.inv(V)
    S = np.empty((order, order))
    for j in range(order):
        c = np.zeros(order)
        c[j] = 1.0
        ci = npleg.legint(c, lbnd=-1)
        S[:, j] = npleg.legval(x, ci)
    return x, w, S @ Vinv


def _graded_panels(t0: float, levels: int, ratio: float = 0.5):
    """Panels on ``[t0, 0)`` shrinking geometrically toward the singular endpoint 0."""
    edges = [t0 * ratio**k for k in range(levels + 1)]
    return list(zip(edges[:-1], edges[1:]))


def nested_integrals(f: Callable, t0: float, M: int, order: int = 16, levels: int = 80) -> list[float]:
    """``I_m = int_{t0}^0 f(t1) int_{t0}^{t1} f(t2) ... int_{t0}^{t_{m-1}} f(t_m)`` for ``m = 1..M``.

    Each level is the running integral of ``f`` times the previous level,
    computed panel by panel with a Legendre integration matrix.
    """
    x, w, S = _gauss_panel_ops(order)
    panels = _graded_panels(t0, levels)
    nodes = [0.5 * (b - a) * x + 0.5 * (a + b) for a, b in panels]
    halfw = [0.5 * (b - a) for a, b in panels]
    fvals = [f(t) for t in nodes]
    prev = [np.ones(order) for _ in panels]
    out = []
    for _ in range(M):
        offset = 0.0
        cur = []
        total = []
        for p in range(len(panels)):
            g = fvals[p] * prev[p]
            cur.append(offset + halfw[p] * (S @ g))
            total.append(halfw[p] * float(w @ g))
            offset += total[-1]
        out.append(math.fsum(total))
        prev = cur
    return out


def gronwall_iteration(q: float, c0: float = 1.0, r: float = 1.0, C0: float = 1.0, M_nested: int = 5,
                       M_series: int = 20, order: int = 16, tol: float = 1e-8, viscous_C: float = 0.0,
                       ladder: Optional[Callable] = None) -> IterationTrace:
    """Verify the nested-integral identity, the factorial series and, optionally, the final bound.

    ``f(t) = c0 |t|^(-1/q)``, ``t0 = -r^q'``, ``C1 = C0 c0 q'``.  The nested
    integrals are computed at Gauss order ``order`` and ``2 * order``; if the
    two disagree by more than ``tol`` a :class:`QuadratureError` is raised.
    ``ladder`` is an optional callable ``ladder(trace) -> dict`` run last.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    qc = q / (q - 1)
    t0 = -(r**qc)
    C1 = C0 * c0 * qc

    def f(t):
        return c0 * np.abs(t) ** (-1.0 / q)

    # the omitted piece [t0 2^-levels, 0] scales like 2^(-levels (1 - 1/q))
    levels = min(4000, int(math.ceil(47.0 / (1.0 - 1.0 / q))))
    lo = nested_integrals(f, t0, M_nested, order, levels)
    hi = nested_integrals(f, t0, M_nested, 2 * order, levels)
    achieved = max(abs(a - b) / abs(b) for a, b in zip(lo, hi))
    if achieved > tol:
        raise QuadratureError("nested quadrature did not converge", achieved)
    trace = IterationTrace(q, c0, r, t0, C0, C1, viscous_term=viscous_C * abs(t0) / r)
    for m, val in enumerate(hi, start=1):
        nested = (C0 / r) ** m * val
        closed = C1**m / math.factorial(m)
        trace.records.append(DepthRecord(m, closed, nested, abs(closed - nested)))
    terms = [C1**j / math.factorial(j) for j in range(M_series + 1)]
    trace.partial_sums = [math.fsum(terms[:k]) for k in range(1, M_series + 1)]
    trace.remainders = terms[1:]
    trace.exp_C1 = math.exp(C1)
    if ladder is not None:
        trace.ladder_check = ladder(trace)
    return trace


def iteration_bound(trace: IterationTrace, n: int, total_energy: float, M: int = 20) -> float:
    """``r^n f(t0)^2 e^C1 + viscous term + (C1^M / M!) * total_energy``."""
    f_t0 = trace.c0 * abs(trace.t0) ** (-1.0 / trace.q)
    lead = trace.r**n * f_t0**2 + trace.viscous_term
    return lead * math.exp(trace.C1) + trace.C1**M / math.factorial(M) * total_energy


def ladder_bound_check(field, center, samples, n: int, M: int = 20, C0_grid=None):
    """Closure for ``gronwall_iteration(ladder=...)`` comparing ``E(t, r)`` with the iterated bound.

    ``samples`` are ``(t, r)`` pairs.  When ``C0_grid`` is given, the smallest
    ``C0`` in it for which every sample passes is reported as the fitted
    constant.
    """
    from .diagnostics import windowed_energy_E

    def run(trace: IterationTrace) -> dict:
        total = max(field.energy(k) for k in range(field.n_times))
        vals = [(t, r, windowed_energy_E(field, t, center, r)) for t, r in samples]

        def passes(C0):
            out = []
            for t, r, E in vals:
                tr = IterationTrace(trace.q, trace.c0, r, -(r ** (trace.q / (trace.q - 1))), C0,
                                    C0 * trace.c0 * trace.q / (trace.q - 1), viscous_term=trace.viscous_term)
                out.append(E <= iteration_bound(tr, n, total, M))
            return out

        result = {"samples": [[t, r, E] for t, r, E in vals], "pass": passes(trace.C0), "C0": trace.C0}
        if C0_grid is not None:
            fitted = next((c for c in sorted(C0_grid) if all(passes(c))), None)
            result["fitted_C0"] = fitted
        return result

    return run
