"""Scaling exponents, admissibility, threshold dimensions and the NSE region map.

Every formula is evaluated in reciprocal coordinates ``x = 1/p``, ``y = 1/q``
so that ``p = inf`` or ``q = inf`` is the exact value 0.  When the inputs are
rational (``int``, ``Fraction`` or strings such as ``"5/2"``) all arithmetic is
exact; float inputs fall through to ordinary floating point.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from numbers import Real
from typing import Optional, Union

Number = Union[Fraction, float]

HALF = Fraction(1, 2)
ONE = Fraction(1)


class DomainError(ValueError):
    """Raised when an exponent formula is evaluated outside its domain."""


def parse_exponent(value) -> Number:
    """Return the reciprocal ``1/value`` of an integrability exponent.

    Accepts ``"inf"``/``math.inf``, integers, fractions, rational strings such
    as ``"5/2"`` or ``"2.5"``, and floats.  Rational inputs give a ``Fraction``.
    """
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("inf", "infinity", "+inf", "oo"):
            return Fraction(0)
        try:
            v = Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse exponent {value!r}") from exc
    elif isinstance(value, (int, Fraction)):
        v = Fraction(value)
    elif isinstance(value, Real):
        v = float(value)
        if math.isinf(v) and v > 0:
            return Fraction(0)
        if math.isnan(v):
            raise DomainError("exponent is NaN")
        if v.is_integer():
            v = Fraction(int(v))
    else:
        raise DomainError(f"unsupported exponent type {type(value).__name__}")
    if v < 1:
        raise DomainError(f"exponent must be >= 1, got {value!r}")
    return 1 / v


def _as_number(v) -> Number:
    return v if isinstance(v, Fraction) else float(v)


@dataclass(frozen=True)
class PQPoint:
    """Integrability pair ``u in L^q_t L^p_x`` in ``n`` space dimensions.

    Stored as reciprocals ``inv_p = 1/p`` and ``inv_q = 1/q`` in ``[0, 1]``.
    Use :meth:`of` to build from ``(p, q)``.
    """

    inv_p: Number
    inv_q: Number
    n: int = 3

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int):
            raise DomainError(f"n must be an integer, got {self.n!r}")
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        for name in ("inv_p", "inv_q"):
            v = getattr(self, name)
            if not isinstance(v, Fraction):
                v = float(v)
                if not math.isfinite(v):
                    raise DomainError(f"{name} must be finite")
                object.__setattr__(self, name, v)
            if not 0 <= v <= 1:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def of(cls, p, q, n: int = 3) -> "PQPoint":
        return cls(parse_exponent(p), parse_exponent(q), n)

    @property
    def p(self) -> Number:
        return math.inf if self.inv_p == 0 else 1 / self.inv_p

    @property
    def q(self) -> Number:
        return math.inf if self.inv_q == 0 else 1 / self.inv_q

    @property
    def exact(self) -> bool:
        return isinstance(self.inv_p, Fraction) and isinstance(self.inv_q, Fraction)

    def __str__(self) -> str:
        def fmt(v):
            return "inf" if v == math.inf else str(v)

        return f"(p={fmt(self.p)}, q={fmt(self.q)}, n={self.n})"


@dataclass(frozen=True)
class ScalingExponents:
    alpha: Number
    beta: Number
    q_conj: Number
    admissible: bool


class RegionTag(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    OUTSIDE = "OUTSIDE"


@dataclass(frozen=True)
class Region:
    tag: RegionTag
    strict_threshold: bool
    point: Optional[tuple] = field(default=None, repr=False, compare=False)

    @cached_property
    def nearest(self) -> Optional[RegionTag]:
        """For ``OUTSIDE`` points, the most frequent region on a small circle around the point."""
        if self.tag is not RegionTag.OUTSIDE or self.point is None:
            return None
        return _nearest_region(*self.point)


@dataclass(frozen=True)
class ThresholdResult:
    value: Optional[Number]
    strict: bool
    formula_branch: str


def is_admissible(pq: PQPoint) -> bool:
    """``2n/p + (2+n)/q <= n``, equivalently ``beta >= 0``."""
    n = pq.n
    return 2 * n * pq.inv_p + (2 + n) * pq.inv_q <= n


def scaling_exponents(pq: PQPoint) -> ScalingExponents:
    """Time-scaling ``alpha`` and energy-decay ``beta`` of the scaling that fixes L^qL^p."""
    x, y, n = pq.inv_p, pq.inv_q, pq.n
    if y >= 1:
        raise DomainError("alpha is undefined at q = 1")
    q_conj = 1 / (1 - y)
    alpha = q_conj * (1 + n * x)
    beta = q_conj * (n - 2 * n * x - (2 + n) * y)
    return ScalingExponents(alpha=alpha, beta=beta, q_conj=q_conj, admissible=is_admissible(pq))


def morrey_exponent(pq: PQPoint) -> Number:
    """Rate ``n - 2/(q-1)`` of the Morrey bound under ``|u|_inf <= c|t|^(-1/q)``."""
    y = pq.inv_q
    if y >= 1:
        raise DomainError("q must exceed 1")
    return pq.n - 2 * y / (1 - y)


def euler_threshold_formula(pq: PQPoint) -> Number:
    """``n - (2/q) / (1 - 2/p - 1/q)`` without any branch logic."""
    x, y = pq.inv_p, pq.inv_q
    den = 1 - 2 * x - y
    if den <= 0:
        raise DomainError(f"1 - 2/p - 1/q = {den} <= 0 at {pq}")
    return pq.n - 2 * y / den


def euler_threshold(pq: PQPoint) -> ThresholdResult:
    """Hausdorff-dimension threshold below which the energy measure cannot charge a set (Euler).

    Branches: ``q <= p, q < inf`` (non-strict), ``3 <= p < q < inf`` (strict),
    ``q = inf, p > 2`` (value ``n``, strict).  Pairs violating the scaling
    condition, and admissible pairs with ``p < 3 < q`` that no branch covers,
    return ``value=None``.
    """
    x, y, n = pq.inv_p, pq.inv_q, pq.n
    if not is_admissible(pq):
        return ThresholdResult(None, True, "inadmissible")
    if y == 0:
        if x < HALF:
            return ThresholdResult(_as_number(Fraction(n)) if pq.exact else float(n), True, "q=inf")
        return ThresholdResult(None, True, "uncovered")
    if 1 - 2 * x - y <= 0:
        return ThresholdResult(None, True, "inadmissible")
    if x <= y:
        return ThresholdResult(euler_threshold_formula(pq), False, "q<=p")
    if 3 * x <= 1:
        return ThresholdResult(euler_threshold_formula(pq), True, "3<=p<q")
    return ThresholdResult(None, True, "uncovered")


def optimal_alpha(pq: PQPoint) -> Number:
    """Time scaling that balances the two covering constraints: ``(1-2/p)/(1-2/p-1/q)``."""
    x, y = pq.inv_p, pq.inv_q
    den = 1 - 2 * x - y
    if den <= 0:
        raise DomainError(f"1 - 2/p - 1/q = {den} <= 0 at {pq}")
    return (1 - 2 * x) / den


# ---------------------------------------------------------------------------
# Navier-Stokes regions (n = 3)


def _h(x):
    return (HALF - x) * (2 - 3 * x)


def _scaled(x, y):
    """``(X, Y, D)`` with ``x = X / D`` and ``y = Y / D``: integers for exact input, ``D = 1`` otherwise."""
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        d = math.lcm(x.denominator, y.denominator)
        return x.numerator * (d // x.denominator), y.numerator * (d // y.denominator), d
    return float(x), float(y), 1.0


def _in_region(x, y) -> Optional[RegionTag]:
    # every predicate is homogeneous in (x, y, 1), so it is checked on the scaled integers
    X, Y, D = _scaled(x, y)
    s2 = 2 * (X + Y)
    six_five = 6 * X + 5 * Y <= 3 * D
    if X <= Y and s2 > D and six_five:
        return RegionTag.I
    if 3 * X <= D and Y < X and s2 >= D and six_five:
        return RegionTag.II
    h2 = (D - 2 * X) * (2 * D - 3 * X)  # 2 D^2 h(x)
    if 3 * X > D and 2 * X < D:
        if h2 <= 2 * D * Y and Y * (7 * D - 6 * X) <= 3 * h2:
            return RegionTag.III
    if s2 <= D and 3 * X + Y <= D:
        return RegionTag.IV
    if s2 < D and 2 * D * Y < h2:
        return RegionTag.V
    return None


def region_memberships(pq: PQPoint) -> list[RegionTag]:
    """Every region whose defining inequalities hold at ``pq`` (for disjointness checks)."""
    x, y = pq.inv_p, pq.inv_q
    s = x + y
    out = []
    if x <= y and s > HALF and 6 * x + 5 * y <= 3:
        out.append(RegionTag.I)
    if 3 * x <= 1 and y < x and s >= HALF and 6 * x + 5 * y <= 3:
        out.append(RegionTag.II)
    if 3 * x > 1 and 2 * x < 1 and _h(x) <= y <= _h(x) / (Fraction(7, 6) - x):
        out.append(RegionTag.III)
    iv = s <= HALF and 3 * x + y <= 1
    if iv:
        out.append(RegionTag.IV)
    if s < HALF and y < _h(x) and not iv:
        out.append(RegionTag.V)
    return out


_ORDER = [RegionTag.I, RegionTag.II, RegionTag.III, RegionTag.IV, RegionTag.V]


def _nearest_region(x: float, y: float) -> Optional[RegionTag]:
    for eps in (1e-9, 1e-6, 1e-4, 1e-2):
        hits = Counter()
        for k in range(32):
            a = 2 * math.pi * k / 32
            px, py = x + eps * math.cos(a), y + eps * math.sin(a)
            if 0 <= px <= 1 and 0 <= py <= 1:
                tag = _in_region(px, py)
                if tag is not None:
                    hits[tag] += 1
        if hits:
            best = max(hits.values())
            return next(t for t in _ORDER if hits.get(t) == best)
    return None


def classify_region(pq: PQPoint) -> Region:
    """Locate ``pq`` among the NSE regions I-V (``n`` must be 3).

    Boundary points follow the printed strictness of each set.  A point in no
    set is ``OUTSIDE``; its ``nearest`` attribute (computed on first access)
    is the most frequent region found on a small circle around it.
    """
    if pq.n != 3:
        raise DomainError(f"regions are defined for n = 3 only, got n = {pq.n}")
    tag = _in_region(pq.inv_p, pq.inv_q)
    if tag is None:
        return Region(RegionTag.OUTSIDE, True, (float(pq.inv_p), float(pq.inv_q)))
    return Region(tag, tag is not RegionTag.I)


def _f_region3(x, y):
    return 3 - 2 * y * (6 * x - 1) / ((2 - 3 * x - 3 * y) * (1 - 2 * x))


def nse_threshold(pq: PQPoint) -> ThresholdResult:
    """Threshold dimension ``f(p, q)`` for 3D Navier-Stokes with its strictness flag."""
    if pq.n != 3:
        raise DomainError(f"NSE thresholds are defined for n = 3 only, got n = {pq.n}")
    if not is_admissible(pq):
        return ThresholdResult(None, True, "inadmissible")
    x, y = pq.inv_p, pq.inv_q
    region = classify_region(pq)
    three = Fraction(3) if pq.exact else 3.0
    if region.tag in (RegionTag.I, RegionTag.II):
        return ThresholdResult(euler_threshold_formula(pq), region.tag is RegionTag.II, "I/II")
    if region.tag is RegionTag.III:
        return ThresholdResult(_f_region3(x, y), True, "III")
    if region.tag in (RegionTag.IV, RegionTag.V):
        return ThresholdResult(three, True, "IV/V")
    if y == 0 and x < HALF:
        return ThresholdResult(three, True, "Lp")
    return ThresholdResult(None, True, "outside")


def region5_g(pq: PQPoint) -> Number:
    """Auxiliary threshold used on region V; exceeds 1 everywhere on V."""
    if classify_region(pq).tag is not RegionTag.V:
        raise DomainError(f"{pq} is not in region V")
    x, y = pq.inv_p, pq.inv_q
    if 2 * x + y > Fraction(5, 6):
        return _f_region3(x, y)
    return 3 - 4 * y / (1 - 2 * x)


def region3_identity_residual(pq: PQPoint, form: str = "corrected") -> Number:
    """LHS minus RHS of the rewriting of the region-III threshold as a deviation from region II.

    ``form="corrected"`` carries the factor ``2/q`` on the last term, which
    makes the identity exact; ``form="printed"`` omits it and is kept for
    comparison (its residual vanishes only on ``p = 3``).
    """
    if form not in ("corrected", "printed"):
        raise ValueError(f"unknown form {form!r}")
    x, y = pq.inv_p, pq.inv_q
    d1 = 1 - 2 * x - y
    d2 = 2 - 3 * x - 3 * y
    d3 = 1 - 2 * x
    if d1 == 0 or d2 == 0 or d3 == 0:
        raise DomainError(f"zero denominator at {pq}")
    lhs = 3 - 2 * y * (6 * x - 1) / (d2 * d3)
    tail = (3 * x - 1) * (3 - 6 * x - 4 * y) / (d3 * d1 * d2)
    if form == "corrected":
        tail = 2 * y * tail
    return lhs - (3 - 2 * y / d1 - tail)


def interp_to_diagonal(pq: PQPoint) -> PQPoint:
    """Diagonal pair ``(r, r)``, ``r = 2 + q - 2q/p``, on the segment from ``(1/p, 1/q)`` to ``(1/2, 0)``."""
    x, y = pq.inv_p, pq.inv_q
    if not y > x:
        raise DomainError(f"need q < p, got {pq}")
    # 1/r = y / (2y + 1 - 2x)
    inv_r = y / (2 * y + 1 - 2 * x)
    return PQPoint(inv_r, inv_r, pq.n)


def interp_below3(pq: PQPoint, check_domain: bool = True) -> tuple[Number, Number, Number]:
    """Exponents ``(a, alpha~, beta~)`` obtained by interpolating L^qL^p (2<p<3) with L^2H^1.

    With ``check_domain=False`` the condition ``9/p + 5/q <= 4`` is not
    enforced and the closed forms are evaluated as long as ``2 < p < 3``.
    """
    x, y = pq.inv_p, pq.inv_q
    if not (3 * x > 1 and 2 * x < 1):
        raise DomainError(f"need 2 < p < 3, got {pq}")
    if check_domain and 9 * x + 5 * y > 4:
        raise DomainError(f"need 9/p + 5/q <= 4, got {9 * x + 5 * y}")
    a = (6 * x - 1) / (3 * x + y - 1)
    alpha_t = 2 * (6 * x - 1) / (3 * x - y)
    beta_t = (4 - 9 * x - 5 * y) / (3 * x - y)
    return a, alpha_t, beta_t


def random_admissible(rng, n_max: int = 4, endpoint_prob: float = 0.1, denom: int = 997) -> PQPoint:
    """Random exact admissible pair with ``2 <= n <= n_max``.

    Each reciprocal is 0 (an infinite exponent) with probability
    ``endpoint_prob``; otherwise a random fraction with denominator ``denom``.
    """
    n = int(rng.integers(2, n_max + 1))
    while True:
        x = Fraction(0) if rng.random() < endpoint_prob else Fraction(int(rng.integers(1, denom // 2)), denom)
        y = Fraction(0) if rng.random() < endpoint_prob else Fraction(int(rng.integers(1, denom)), denom)
        pq = PQPoint(x, y, n)
        if is_admissible(pq):
            return pq


INFORMATIONAL_CHECKS = frozenset({"beta_gt_2_iff_3x_plus_2y_gt_1"})


@dataclass
class IdentityCheck:
    name: str
    checked: int = 0
    failed: int = 0
    example: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failed == 0

    def record(self, ok: bool, pq: PQPoint) -> None:
        self.checked += 1
        if not ok:
            self.failed += 1
            if self.example is None:
                self.example = str(pq)


def identity_sweep(samples: int, seed: int = 0, n_max: int = 4) -> list[IdentityCheck]:
    """Check the exponent identities exactly on random admissible pairs.

    ``beta_gt_2_iff_3x_plus_2y_gt_1`` is reported for information; it does not
    hold in general (it fails at ``p = q = inf``).  The statement that does
    hold at ``n = 3`` is the ``alpha`` version.
    """
    import numpy as np

    rng = np.random.default_rng(seed)
    names = ["threshold_ge_beta", "equality_iff_p_inf", "region3_identity",
             "alpha_gt_2_iff_3x_plus_2y_gt_1", "optimal_alpha_ge_2_iff_x_plus_y_ge_half",
             "beta_gt_2_iff_3x_plus_2y_gt_1"]
    checks = {k: IdentityCheck(k) for k in names}
    for _ in range(samples):
        pq = random_admissible(rng, n_max)
        x, y = pq.inv_p, pq.inv_q
        se = scaling_exponents(pq)
        th = euler_threshold(pq)
        if th.value is not None and se.beta > 0:
            checks["threshold_ge_beta"].record(th.value >= se.beta, pq)
            checks["equality_iff_p_inf"].record((th.value == se.beta) == (x == 0), pq)
        if 1 - 2 * x - y > 0 and 2 - 3 * x - 3 * y != 0 and 1 - 2 * x != 0:
            checks["region3_identity"].record(region3_identity_residual(pq) == 0, pq)
            checks["optimal_alpha_ge_2_iff_x_plus_y_ge_half"].record(
                (optimal_alpha(pq) >= 2) == (x + y >= HALF), pq)
        if pq.n == 3:
            checks["alpha_gt_2_iff_3x_plus_2y_gt_1"].record((se.alpha > 2) == (3 * x + 2 * y > 1), pq)
            checks["beta_gt_2_iff_3x_plus_2y_gt_1"].record((se.beta > 2) == (3 * x + 2 * y > 1), pq)
    return [checks[k] for k in names]


# ---------------------------------------------------------------------------
# figure data


@dataclass(frozen=True)
class RegionPlot:
    csv: str
    svg: str
    resolution: int
    mode: str


_REGION_COLORS = {
    RegionTag.I: "#4e79a7",
    RegionTag.II: "#f28e2b",
    RegionTag.III: "#59a14f",
    RegionTag.IV: "#e15759",
    RegionTag.V: "#b07aa1",
}


def _plot_value(x: float, y: float, mode: str, n: int):
    pq = PQPoint(x, y, n)
    if mode == "nse":
        res = nse_threshold(pq)
        tag = classify_region(pq).tag if is_admissible(pq) else RegionTag.OUTSIDE
        return res.value, tag.value, res.strict
    res = euler_threshold(pq)
    return res.value, res.formula_branch, res.strict


def emit_region_plot(resolution: int, mode: str = "nse", n: int = 3,
                     csv_path=None, svg_path=None) -> RegionPlot:
    """Sample the threshold on a ``resolution x resolution`` grid in ``(1/p, 1/q)``.

    The grid covers ``[0, 1/2] x [0, 3/5]``, which contains every admissible
    pair for ``n = 3``.  ``mode="nse"`` uses the region map and ``f``;
    ``mode="euler"`` uses the Euler threshold for dimension ``n``.  Returns the
    CSV and SVG text and writes them when paths are given.
    """
    import html

    import contourpy
    import numpy as np

    if not isinstance(resolution, int) or resolution < 16:
        raise DomainError(f"resolution must be an integer >= 16, got {resolution!r}")
    if mode not in ("nse", "euler"):
        raise DomainError(f"mode must be 'nse' or 'euler', got {mode!r}")
    if mode == "nse" and n != 3:
        raise DomainError("nse mode requires n = 3")
    xs = np.linspace(0.0, 0.5, resolution)
    ys = np.linspace(0.0, 0.6, resolution)
    vals = np.full((resolution, resolution), np.nan)
    labels = np.empty((resolution, resolution), dtype=object)
    lines = ["inv_p,inv_q,value,region,strict"]
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            v, lab, strict = _plot_value(float(x), float(y), mode, n)
            labels[j, i] = lab
            if v is not None:
                vals[j, i] = float(v)
            lines.append(f"{x:.10g},{y:.10g},{'' if v is None else repr(float(v))},{lab},{str(strict).lower()}")
    csv_text = "\n".join(lines) + "\n"

    W, H, pad = 500.0, 600.0, 40.0

    def to_svg(px, py):
        return pad + px / 0.5 * W, pad + H - py / 0.6 * H

    def path_d(segs):
        out = []
        for seg in segs:
            if len(seg) < 2:
                continue
            pts = [to_svg(a, b) for a, b in seg]
            out.append("M" + " L".join(f"{a:.2f},{b:.2f}" for a, b in pts))
        return " ".join(out)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W + 2 * pad:.0f}" height="{H + 2 * pad:.0f}">',
        f'<rect x="{pad}" y="{pad}" width="{W}" height="{H}" fill="none" stroke="black"/>',
    ]
    if mode == "nse":
        tags = list(_REGION_COLORS)
    else:
        tags = sorted({lab for lab in labels.ravel() if lab not in ("inadmissible", "uncovered")})
    for tag in tags:
        key = tag.value if isinstance(tag, RegionTag) else tag
        label = html.escape(key)
        mask = (labels == key).astype(float)
        if not mask.any():
            continue
        gen = contourpy.contour_generator(xs, ys, mask)
        d = path_d(gen.lines(0.5))
        color = _REGION_COLORS.get(tag, "#333333")
        parts.append(f'<path class="region" data-region="{label}" d="{d}" fill="none" stroke="{color}" stroke-width="2"/>')
        jj, ii = np.nonzero(mask)
        cx, cy = to_svg(xs[int(np.median(ii))], ys[int(np.median(jj))])
        parts.append(f'<text x="{cx:.1f}" y="{cy:.1f}" font-size="16" fill="{color}">{label}</text>')
    finite = np.where(np.isfinite(vals), vals, np.nan)
    if np.isfinite(finite).any():
        gen = contourpy.contour_generator(xs, ys, np.nan_to_num(finite, nan=float(n)))
        top = float(n)
        for level in np.linspace(0.5, top - 0.5, int(2 * top) - 1):
            d = path_d(gen.lines(float(level)))
            if d:
                parts.append(f'<path class="level" data-level="{level:g}" d="{d}" fill="none" stroke="#999" stroke-dasharray="4 3"/>')
    parts.append(f'<text x="{pad + W / 2:.0f}" y="{H + 2 * pad - 8:.0f}" font-size="14">1/p</text>')
    parts.append(f'<text x="6" y="{pad + H / 2:.0f}" font-size="14">1/q</text>')
    parts.append("</svg>")
    svg_text = "\n".join(parts) + "\n"

    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(csv_text)
    if svg_path is not None:
        with open(svg_path, "w") as fh:
            fh.write(svg_text)
    return RegionPlot(csv_text, svg_text, resolution, mode)
