"""Command-line entry point.

Exit status: 0 on success, 2 when an input (or a verification) fails
validation, 1 on any other error.  Every CSV, JSON and SVG output carries a
reproducibility stamp with the full flag set and library versions.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import covers, diagnostics, exponents, fieldio, measures, spectral, synth
from .solver import CFLError, SolverConfig, audit_csv, max_audit_residual, run_solver_2d

log = logging.getLogger("energymeasure")


class VerificationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting


def _num(v):
    """JSON-friendly number: exact integers stay integers, ``inf`` becomes a string."""
    if v is None:
        return None
    if isinstance(v, bool):
        return v
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def _exact(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return str(v)


def _stamp(args) -> dict:
    import scipy

    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)}
    return {"tool": "energymeasure", "version": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "flags": flags}


def _stamp_line(args) -> str:
    return json.dumps(_stamp(args), sort_keys=True, default=str)


def _emit(args, text: str, kind: str, stdout: bool = False) -> None:
    """Write ``text`` to ``--out`` (unless ``stdout``) or stdout with the stamp in the header."""
    stamp = _stamp_line(args)
    if kind == "csv":
        text = f"# {stamp}\n{text}"
    elif kind == "svg":
        head, _, rest = text.partition("\n")
        text = f"{head}\n<!-- {stamp.replace('--', '- -')} -->\n{rest}"
    elif kind == "text":
        print(f"# {stamp}", file=sys.stderr)
    out = None if stdout else getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(args, obj: dict, stdout: bool = False) -> None:
    obj = dict(obj)
    obj["stamp"] = _stamp(args)
    _emit(args, json.dumps(obj, separators=(",", ":"), default=str) + "\n", "json", stdout)


def _csv_rows(header: str, rows) -> str:
    def cell(v):
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)

    return header + "\n" + "".join(",".join(cell(v) for v in r) + "\n" for r in rows)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _pq(args) -> exponents.PQPoint:
    return exponents.PQPoint.of(args.p, args.q, args.n)


def _fmt(args, default: str) -> str:
    return args.format or default


# ---------------------------------------------------------------------------
# exponent commands


def cmd_exponents(args):
    pq = _pq(args)
    se = exponents.scaling_exponents(pq)
    obj = {"alpha": _num(se.alpha), "beta": _num(se.beta), "q_conj": _num(se.q_conj),
           "admissible": se.admissible}
    try:
        obj["morrey_exponent"] = _num(exponents.morrey_exponent(pq))
    except exponents.DomainError:
        obj["morrey_exponent"] = None
    obj.update({"p": _exact(pq.p), "q": _exact(pq.q), "n": pq.n,
                "exact": {k: _exact(v) for k, v in (("alpha", se.alpha), ("beta", se.beta))} if pq.exact else None})
    if _fmt(args, "json") == "csv":
        _emit(args, _csv_rows("p,q,n,alpha,beta,q_conj,admissible",
                              [(obj["p"], obj["q"], pq.n, _exact(se.alpha), _exact(se.beta), _exact(se.q_conj),
                                se.admissible)]), "csv")
    else:
        _emit_json(args, obj)


def cmd_threshold(args):
    pq = _pq(args)
    mode = args.mode or ("nse" if pq.n == 3 else "euler")
    res = exponents.nse_threshold(pq) if mode == "nse" else exponents.euler_threshold(pq)
    obj = {"value": _num(res.value), "strict": res.strict, "branch": res.formula_branch, "mode": mode,
           "exact": _exact(res.value) if res.value is not None and pq.exact else None}
    if _fmt(args, "json") == "csv":
        _emit(args, _csv_rows("p,q,n,value,strict,branch",
                              [(_exact(pq.p), _exact(pq.q), pq.n, obj["value"], res.strict, res.formula_branch)]), "csv")
    else:
        _emit_json(args, obj)


def cmd_classify(args):
    pq = _pq(args)
    reg = exponents.classify_region(pq)
    fmt = _fmt(args, "text")
    if fmt == "json":
        _emit_json(args, {"region": reg.tag.value, "strict": reg.strict_threshold,
                          "nearest": reg.nearest.value if reg.nearest else None})
    else:
        text = reg.tag.value
        if reg.nearest is not None:
            text += f" (nearest {reg.nearest.value})"
        _emit(args, text + "\n", "text")


def cmd_plot_regions(args):
    plot = exponents.emit_region_plot(args.resolution, args.mode, args.n)
    if _fmt(args, "svg") == "csv":
        _emit(args, plot.csv, "csv")
    else:
        _emit(args, plot.svg, "svg")


# ---------------------------------------------------------------------------
# generators, solver, pressure


def _times(args) -> np.ndarray:
    if args.nt == 1:
        return np.array([args.t_max])
    if getattr(args, "geometric", False):
        return -np.geomspace(-args.t_min, -args.t_max, args.nt)
    return np.linspace(args.t_min, args.t_max, args.nt)


def _write_generated(args, obj, kind: str):
    if kind == "field":
        fieldio.save_field(obj, args.out)
    else:
        fieldio.save_measure(obj, args.out)
    side = str(args.out) + ".json"
    synth.write_sidecar(obj.metadata, side)
    _emit_json(args, {"written": str(args.out), "sidecar": side,
                      "ground_truth": obj.metadata.get("ground_truth", {})}, stdout=True)


def cmd_synth(args):
    g = args.generator
    if g == "selfsim":
        spec = synth.SelfSimilarSpec(q=args.q, c0=args.c0, width=args.width, n=args.n)
        obj = synth.gen_selfsimilar(spec, args.N, _times(args), args.L, with_pressure=args.pressure)
        kind = "field"
    elif g == "taylor-green":
        obj, kind = synth.gen_taylor_green(args.N, _times(args), args.nu, args.amplitude), "field"
    elif g == "smooth":
        obj = synth.gen_smooth_field(args.seed, args.n, args.N, _times(args), args.k_max, box_length=args.L)
        kind = "field"
    elif g == "cantor":
        obj = synth.gen_cantor_measure(args.depth, args.n, args.embedding, args.L, args.lattice, args.grid)
        kind = "measure"
    else:
        pos = np.array([_floats(p) for p in args.positions.split(";")])
        w = _floats(args.weights) if args.weights else [1.0] * len(pos)
        obj, kind = synth.gen_atom_measure(pos, w, pos.shape[1], args.L, args.grid), "measure"
    _write_generated(args, obj, kind)


def cmd_solve2d(args):
    cfg = SolverConfig(N=args.N, nu=args.nu, dt=args.dt, T=args.T, ic=args.ic, seed=args.seed,
                       amplitude=args.amplitude, snapshot_every=args.snapshot_every)
    f = run_solver_2d(cfg)
    fieldio.save_field(f, args.out)
    if args.audit:
        Path(args.audit).write_text(f"# {_stamp_line(args)}\n" + audit_csv(f))
    _emit_json(args, {"written": str(args.out), "snapshots": f.n_times, "steps": cfg.n_steps,
                      "initial_energy": f.energy(0), "final_energy": f.energy(-1),
                      "max_audit_residual": max_audit_residual(f)}, stdout=True)


def cmd_pressure(args):
    f = fieldio.load_field(args.field)
    pres = np.array([spectral.compute_pressure(f, k, args.div_tol) for k in range(f.n_times)])
    res = max(spectral.pressure_poisson_residual(np.asarray(f.velocity[k]), pres[k], f.box_length)
              for k in range(f.n_times))
    if args.out:
        fieldio.save_field(f.with_pressure(pres), args.out)
    _emit_json(args, {"written": args.out, "max_poisson_residual": res}, stdout=True)


# ---------------------------------------------------------------------------
# analysis


def cmd_analyze(args):
    f = fieldio.load_field(args.field)
    a = args.analysis
    fmt = _fmt(args, "csv")
    if a == "scale":
        center = _floats(args.center) if args.center else [f.box_length / 2] * f.n
        rep = diagnostics.ladder_report(f, _pq(args), center, args.R, args.levels, jobs=args.jobs)
        if fmt == "json":
            _emit_json(args, {"truncated": rep.truncated, "reason": rep.reason,
                              "zero_ratio_levels": rep.zero_ratio_levels,
                              "no_upward_trend_A": rep.no_upward_trend("A"),
                              "records": [r.__dict__ for r in rep.records]})
        else:
            _emit(args, rep.to_csv(), "csv")
    elif a == "morrey":
        rep = diagnostics.morrey_seminorm(f, args.lam, center_stride=args.stride, jobs=args.jobs)
        if fmt == "json":
            _emit_json(args, {k: v for k, v in rep.__dict__.items()})
        else:
            _emit(args, diagnostics.morrey_csv(rep), "csv")
    elif a == "onsager":
        h = f.box_length / min(f.grid)
        shifts = _floats(args.shifts) if args.shifts else [h * 2**j for j in range(5)]
        theta = diagnostics.onsager_modulus(f, shifts)
        if fmt == "json":
            ys = sorted(theta)
            _emit_json(args, {"theta": [[y, theta[y]] for y in ys],
                              "loglog_slope": diagnostics.loglog_slope(ys, [theta[y] for y in ys])})
        else:
            _emit(args, diagnostics.onsager_csv(theta), "csv")
    else:
        t_a = f.times[0] if args.t_a is None else args.t_a
        t_b = f.times[-1] if args.t_b is None else args.t_b
        bumps = diagnostics.random_bump_panel(f.n, f.box_length, args.bumps, args.seed, (t_a, t_b))
        rows = []
        for i, b in enumerate(bumps):
            bal = diagnostics.local_energy_balance(f, args.nu, b, t_a, t_b)
            rows.append((i, bal.lhs, bal.rhs, bal.residual))
        if fmt == "json":
            _emit_json(args, {"max_residual": max(r[3] for r in rows), "rows": rows})
        else:
            _emit(args, _csv_rows("bump,lhs,rhs,residual", rows), "csv")


def _ladder(args, m) -> np.ndarray:
    if args.radii:
        return np.array(_floats(args.radii))
    R = args.R if args.R is not None else m.box_length / 4
    return R / 2.0 ** np.arange(args.levels)


def cmd_measure(args):
    a = args.operation
    fmt = _fmt(args, "json")
    if a in ("build", "defect"):
        f = fieldio.load_field(args.input)
        limit = fieldio.load_measure(args.limit) if args.limit else None
        E = measures.build_energy_measure(f, args.K, limit)
        if a == "build":
            if args.save:
                fieldio.save_measure(E.limit, args.save)
            rows = [(k, float(t), float(g)) for k, (t, g) in enumerate(zip(E.times, E.gaps))]
            if fmt == "csv":
                _emit(args, _csv_rows("k,time,gap", rows), "csv")
            else:
                _emit_json(args, {"limit_source": E.limit_source, "masses": E.masses().tolist(),
                                  "gaps": [r[2] for r in rows], "written": args.save})
        else:
            rep = measures.defect_decomposition(E, f, -1)
            _emit_json(args, rep.summary())
        return
    m = fieldio.load_measure(args.input)
    if a == "dim":
        x = _floats(args.x)
        rep = measures.lower_local_dimension_report(m, x, _ladder(args, m))
        if fmt == "csv":
            _emit(args, rep.to_csv(x), "csv")
        else:
            _emit_json(args, {"estimate": rep.estimate, "radii": rep.radii.tolist(),
                              "masses": rep.masses.tolist(), "slopes": rep.slopes.tolist()})
    elif a == "density":
        x, r = _floats(args.x), _ladder(args, m)
        series = measures.upper_s_density_series(m, x, args.s, r)
        _emit_json(args, {"upper_density": measures.upper_s_density(m, x, args.s, r),
                          "radii": r.tolist(), "series": series.tolist()})
    else:
        s_grid = np.round(np.arange(0.0, args.s_max + 1e-12, args.s_step), 12)
        radii = _ladder(args, m) if (args.radii or args.R is not None) else None
        rep = measures.concentration_dim_report(m, s_grid, radii, tol=args.tol)
        _emit_json(args, {"concentration_dimension": rep.value, "resolution_floor": rep.resolution_floor,
                          "sup_masses": rep.sup_masses.tolist(), "radii": rep.radii.tolist()})


# ---------------------------------------------------------------------------
# covers and verification


def cmd_covers(args):
    if args.operation == "sum":
        spec = covers.CoverSpec.load(args.spec)
        val = covers.cover_sum(spec, args.sigma, args.s)
        H = spec.H
        _emit_json(args, {"cover_sum": val, "H": H, "ratio": val / H**args.s if H > 0 else None})
        return
    if args.specs:
        fam = [covers.CoverSpec.load(p) for p in args.specs]
    elif args.family == "segment":
        fam = covers.dyadic_segment_covers(args.levels, args.alpha)
    else:
        fam = covers.point_covers(args.levels, args.alpha)
    verdict = covers.check_conv_bound(fam, args.sigma, args.s, args.factor)
    _emit_json(args, verdict.to_dict())
    if verdict.bounded is False:
        raise VerificationFailed("admissible parameters but the ratio sequence is not bounded")


def cmd_verify(args):
    v = args.check
    fmt = _fmt(args, "csv" if v != "identities" else "text")
    if v == "identities":
        checks = exponents.identity_sweep(args.samples, args.seed)
        ok = all(c.passed for c in checks if c.name not in exponents.INFORMATIONAL_CHECKS)
        if fmt == "json":
            _emit_json(args, {"all_pass": ok, "checks": [
                {"name": c.name, "checked": c.checked, "failed": c.failed, "example": c.example,
                 "informational": c.name in exponents.INFORMATIONAL_CHECKS} for c in checks]})
        else:
            lines = []
            for c in checks:
                tag = "info" if c.name in exponents.INFORMATIONAL_CHECKS else ("pass" if c.passed else "FAIL")
                extra = f" first counterexample {c.example}" if c.example else ""
                lines.append(f"{tag:4} {c.name}: {c.checked} checked, {c.failed} failed{extra}")
            lines.append("all exponent identities pass" if ok else "some exponent identities FAIL")
            _emit(args, "\n".join(lines) + "\n", "text")
        if not ok:
            raise VerificationFailed("exponent identity sweep failed")
        return
    trace = covers.gronwall_iteration(args.q, args.c0, args.r, args.C0, M_nested=args.depth,
                                      M_series=args.M, viscous_C=args.viscous)
    if v == "nested":
        if fmt == "json":
            _emit_json(args, {"C1": trace.C1, "max_relative_gap": trace.max_relative_gap(),
                              "records": [d.__dict__ for d in trace.records]})
        else:
            _emit(args, trace.to_csv(), "csv")
        if trace.max_relative_gap() > args.tol:
            raise VerificationFailed(f"nested-integral gap {trace.max_relative_gap():.3e} exceeds {args.tol:g}")
        return
    rows = [(m + 1, ps, rem, trace.exp_C1) for m, (ps, rem) in enumerate(zip(trace.partial_sums, trace.remainders))]
    if fmt == "json":
        _emit_json(args, {"C1": trace.C1, "exp_C1": trace.exp_C1, "final_gap": trace.exp_C1 - trace.partial_sums[-1],
                          "rows": rows})
    else:
        _emit(args, _csv_rows("M,partial_sum,remainder,exp_C1", rows), "csv")
    if not all(ps < trace.exp_C1 for ps in trace.partial_sums):
        raise VerificationFailed("a partial sum reached exp(C1)")


# ---------------------------------------------------------------------------
# parser


def _add_pq(p, need=True):
    p.add_argument("--p", required=need, help="space exponent: number, rational like 5/2, or inf")
    p.add_argument("--q", required=need, help="time exponent: number, rational like 5/2, or inf")
    p.add_argument("--n", type=int, default=3, help="space dimension (default 3)")


def _add_out(p, formats=("csv", "json")):
    p.add_argument("--format", choices=list(formats), default=None)
    p.add_argument("--out", help="output file (default: stdout)")


def _add_times(p, t_min=-1.0, t_max=0.0, nt=8):
    p.add_argument("--t-min", type=float, default=t_min)
    p.add_argument("--t-max", type=float, default=t_max)
    p.add_argument("--nt", type=int, default=nt, help="number of time samples")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="energymeasure", description="Energy-measure diagnostics toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="scaling exponents alpha, beta")
    _add_pq(p)
    _add_out(p)
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("threshold", help="threshold dimension f(p, q)")
    _add_pq(p)
    p.add_argument("--mode", choices=["nse", "euler"], default=None)
    _add_out(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("classify", help="NSE region of (p, q)")
    _add_pq(p)
    _add_out(p, ("text", "json"))
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("plot-regions", help="region map as SVG or CSV")
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--mode", choices=["nse", "euler"], default="nse")
    p.add_argument("--n", type=int, default=3)
    _add_out(p, ("svg", "csv"))
    p.set_defaults(func=cmd_plot_regions)

    p = sub.add_parser("synth", help="synthetic fields and measures")
    gs = p.add_subparsers(dest="generator", required=True)
    g = gs.add_parser("selfsim")
    g.add_argument("--q", type=float, default=2.0)
    g.add_argument("--c0", type=float, default=1.0)
    g.add_argument("--width", type=float, default=0.3)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--N", type=int, default=32)
    g.add_argument("--L", type=float, default=2 * math.pi)
    g.add_argument("--geometric", action="store_true", help="geometric time spacing toward 0")
    g.add_argument("--pressure", action="store_true")
    _add_times(g, -1.0, -1e-3, 16)
    g = gs.add_parser("taylor-green")
    g.add_argument("--N", type=int, default=64)
    g.add_argument("--nu", type=float, default=0.0)
    g.add_argument("--amplitude", type=float, default=1.0)
    _add_times(g)
    g = gs.add_parser("smooth")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--N", type=int, default=64)
    g.add_argument("--k-max", type=int, default=6)
    g.add_argument("--L", type=float, default=2 * math.pi)
    _add_times(g, nt=1)
    g = gs.add_parser("cantor")
    g.add_argument("--depth", type=int, default=12)
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--embedding", choices=["point", "product"], default="point")
    g.add_argument("--lattice", type=int, default=0, help="points per unit side for the product factor")
    g.add_argument("--grid", type=int, default=4)
    g.add_argument("--L", type=float, default=1.0)
    g = gs.add_parser("atoms")
    g.add_argument("--positions", required=True, help='coordinates, atoms separated by ";" e.g. "0.5,0.5;0.2,0.1"')
    g.add_argument("--weights", default=None, help="comma separated weights (default all 1)")
    g.add_argument("--grid", type=int, default=4)
    g.add_argument("--L", type=float, default=1.0)
    for g in gs.choices.values():
        g.add_argument("--out", required=True, help="output file (VFLD1 or VMSR1); sidecar goes to OUT.json")
        g.set_defaults(format=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve2d", help="2D pseudo-spectral solver")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--ic", choices=["taylor-green", "random"], default="taylor-green")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--snapshot-every", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--audit", help="write the per-step energy audit CSV here")
    p.set_defaults(func=cmd_solve2d, format=None)

    p = sub.add_parser("pressure", help="spectral pressure for every time slice")
    p.add_argument("field")
    p.add_argument("--out", help="write the field with pressure here")
    p.add_argument("--div-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_pressure, format=None)

    p = sub.add_parser("analyze", help="diagnostics on a sampled field")
    asub = p.add_subparsers(dest="analysis", required=True)
    a = asub.add_parser("scale")
    _add_pq(a)
    a.add_argument("--center", help="comma separated coordinates (default box center)")
    a.add_argument("--R", type=float, default=1.0)
    a.add_argument("--levels", type=int, default=8)
    a = asub.add_parser("morrey")
    a.add_argument("--lam", type=float, default=1.0)
    a.add_argument("--stride", type=int, default=None)
    a = asub.add_parser("onsager")
    a.add_argument("--shifts", help="comma separated shift lengths (default h, 2h, ..., 16h)")
    a = asub.add_parser("energy-residual")
    a.add_argument("--nu", type=float, default=0.0)
    a.add_argument("--bumps", type=int, default=20)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--t-a", type=float, default=None)
    a.add_argument("--t-b", type=float, default=None)
    for a in asub.choices.values():
        a.add_argument("field")
        a.add_argument("--jobs", type=int, default=1, help="worker threads; output order does not depend on it")
        _add_out(a)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("measure", help="energy measure and dimension estimators")
    msub = p.add_subparsers(dest="operation", required=True)
    m = msub.add_parser("build")
    m.add_argument("--save", help="write the limit measure (VMSR1) here")
    for name in ("build", "defect"):
        m = msub.choices.get(name) or msub.add_parser(name)
        m.add_argument("--K", type=int, default=4, help="number of final slices")
        m.add_argument("--limit", help="ground-truth limit measure (VMSR1)")
    for name in ("dim", "density", "concdim"):
        m = msub.add_parser(name)
        m.add_argument("--R", type=float, default=None, help="largest radius (default L/4; concdim picks a resolution-aware ladder)")
        m.add_argument("--levels", type=int, default=8)
        m.add_argument("--radii", help="explicit decreasing radius ladder")
    msub.choices["dim"].add_argument("--x", required=True)
    msub.choices["density"].add_argument("--x", required=True)
    msub.choices["density"].add_argument("--s", type=float, required=True)
    msub.choices["concdim"].add_argument("--s-max", type=float, default=3.0)
    msub.choices["concdim"].add_argument("--s-step", type=float, default=0.05)
    msub.choices["concdim"].add_argument("--tol", type=float, default=0.01)
    for m in msub.choices.values():
        m.add_argument("input", help="field (build, defect) or measure file")
        _add_out(m)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("covers", help="covering sums")
    csub = p.add_subparsers(dest="operation", required=True)
    c = csub.add_parser("sum")
    c.add_argument("spec", help='JSON cover spec {"alpha","d","balls":[{"x","r"}],"delta"}')
    c = csub.add_parser("check")
    c.add_argument("specs", nargs="*", help="JSON cover specs forming a refining family")
    c.add_argument("--family", choices=["segment", "point"], default="segment")
    c.add_argument("--levels", type=int, default=8)
    c.add_argument("--alpha", type=float, default=2.0)
    c.add_argument("--factor", type=float, default=10.0)
    for c in csub.choices.values():
        c.add_argument("--sigma", type=float, required=True)
        c.add_argument("--s", type=float, required=True)
        _add_out(c, ("json",))
    p.set_defaults(func=cmd_covers)

    p = sub.add_parser("verify", help="numerical verification of identities and iterations")
    vsub = p.add_subparsers(dest="check", required=True)
    for name in ("gronwall", "nested"):
        v = vsub.add_parser(name)
        v.add_argument("--q", type=float, default=2.0)
        v.add_argument("--c0", type=float, default=1.0)
        v.add_argument("--r", type=float, default=1.0)
        v.add_argument("--C0", type=float, default=1.0)
        v.add_argument("--M", type=int, default=20, help="series length")
        v.add_argument("--depth", type=int, default=5, help="nested-integral depth")
        v.add_argument("--viscous", type=float, default=0.0, help="viscous constant in the recursion")
        v.add_argument("--tol", type=float, default=1e-6)
        _add_out(v)
    v = vsub.add_parser("identities")
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    _add_out(v, ("text", "json"))
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError, CFLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
