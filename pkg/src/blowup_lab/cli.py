"""Command line entry point: ``blowup-lab <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 audit failure, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import certifier, exports, metrics, nullframe, sweep
from .charsolver import detect_blowup, lower_bound_audit, z_monotonicity_audit
from .config import SweepConfig, config_from_text, load_config
from .errors import BlowupLabError, ConfigError, ConstraintViolation
from .initial_data import profile_from_text

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT, EXIT_RUNTIME = 0, 2, 3, 4


class AuditFailure(Exception):
    pass


def _formats(text: str | None, default=("csv", "json", "svg")) -> tuple[str, ...]:
    if text is None:
        return tuple(default)
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = set(fmts) - {"csv", "json", "svg"}
    if bad:
        raise ConfigError(f"unknown formats: {sorted(bad)}")
    return fmts


def _config(args) -> SweepConfig:
    over = {"out": getattr(args, "out", None), "workers": getattr(args, "workers", None)}
    if getattr(args, "format", None) is not None:
        over["formats"] = _formats(args.format)
    if args.config:
        return load_config(args.config, **over)
    return config_from_text("", **over)


def _out(args, cfg: SweepConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.profile:
        try:
            prof = profile_from_text(Path(args.profile).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read profile {args.profile}: {exc.strerror}") from None
        except ConstraintViolation as exc:
            raise ConfigError(f"profile: {exc}") from None
        cfg = replace(cfg, family=prof.family.value, p=prof.p, n=prof.n, eps0=prof.eps0,
                      theta0=prof.theta0, theta1=prof.theta1, mu=prof.mu,
                      transition=prof.transition, eps=(prof.eps,))
    eps = args.eps if args.eps is not None else (cfg.eps[0] if cfg.eps else None)
    if eps is None:
        raise ConfigError("simulate needs eps (config key, --eps, or --profile)")
    if cfg.mode == "lifespan" and eps >= cfg.eps0:
        raise ConfigError(f"eps = {eps:g} violates the data-family constraint eps < eps0 = {cfg.eps0:g}")
    problem = sweep.build_problem(cfg, eps)
    thr = sweep.job_threshold(cfg, problem)
    hs = sweep.grid_sequence(cfg, eps)
    est, fields = detect_blowup(problem, hs, thr, keep_fields=True)
    out = _out(args, cfg)
    finest = fields[-1]
    exports.dump_lattice(finest, out / "field.bin")
    fmts = cfg.formats
    payload = est.record()
    payload.update(eps=eps, growth_time=est.growth_time, T_lattice=list(est.T_lattice))
    audit_ok = True
    if cfg.mode == "lifespan" and est.blew_up:
        prof = cfg.profile(eps)
        lb = lower_bound_audit(finest, prof)
        zm = z_monotonicity_audit(finest, prof)
        payload["audits"] = {f"lower_bound_m{m}": asdict(r) | {"passed": r.passed} for m, r in lb.items()}
        payload["audits"]["z_monotone"] = asdict(zm) | {"passed": zm.passed}
        audit_ok = all(r.passed for r in lb.values()) and zm.passed
    if "json" in fmts:
        exports.write_json(out / "lifespan.json", payload)
    if "csv" in fmts:
        exports.lattice_csv(finest, out / "field.csv")
    state = f"T* = {est.T_star:.6g} +- {est.error_bar:.3g}" if est.blew_up else \
        f"no blow-up before t = {est.T_star:.6g}"
    print(f"eps = {eps:g}: {state}; threshold {thr:.4g}; grids {', '.join(f'{h:.4g}' for h in hs)}")
    if est.crossing_node is not None:
        print(f"first crossing at (t, r*) = ({est.crossing_node[0]:.4g}, {est.crossing_node[1]:.4g}), "
              f"outgoing cone: {est.in_outgoing_cone}")
    if not audit_ok:
        raise AuditFailure("lower-bound or monotonicity audit failed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if len(cfg.eps) < 1:
        raise ConfigError("sweep needs an eps list")
    out = _out(args, cfg)
    table = sweep.run_sweep(cfg, out, resume=not args.fresh)
    paths = sweep.emit(table, cfg.formats, out)
    for r in table.records:
        mark = "blow-up" if r.blew_up else ("ERROR " + r.error if r.status != "ok" else "none")
        print(f"eps {r.eps:<8g} T* {r.T_star:<12.6g} err {r.error_bar:<10.3g} h {r.h:<10.4g} {mark}")
    try:
        fit = sweep.fit_exponent(table)
        print(f"slope {fit.slope:.4f} +- {fit.stderr:.4f} (reference {fit.expected:.4f})")
    except BlowupLabError as exc:
        print(f"no fit: {exc}")
    for p in paths:
        print(f"wrote {p}")
    if any(r.status != "ok" for r in table.records):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_fit(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / "sweep.csv"
    try:
        table = sweep.read_table_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    table.n, table.p = args.n, args.p
    fit = sweep.fit_exponent(table)
    print(f"slope {fit.slope:.6f} stderr {fit.stderr:.3g} intercept {fit.intercept:.6f} "
          f"reference {fit.expected:.6f} points {fit.points}")
    if args.out:
        exports.write_json(_out(args) / "fit.json", asdict(fit))
    if args.tolerance is not None and fit.relative_deviation > args.tolerance:
        raise AuditFailure(f"slope deviates {fit.relative_deviation:.1%} from the reference")
    return EXIT_OK


ODE_GRID = [(c, p) for c in (0.1, 1.0, 10.0) for p in (1.5, 2.0, 3.0)]


def cmd_certify(args) -> int:
    ps = [float(x) for x in args.p.split(",")]
    rows, payload, ok_all = [], {"sequences": {}, "ode": []}, True
    for p in ps:
        seq = certifier.dm_sequence(p, args.m_max)
        m = slice(0, min(args.m_max, 50) + 1)
        rel = np.max(np.abs(seq.ln_d_m[m] - seq.ln_d_m_product[m]) / np.abs(seq.ln_d_m_product[m]))
        cross = bool(rel <= 1e-10)
        tail = bool(seq.tail_ratio <= 1.1 / p)
        lower = bool(np.all(seq.ln_C_direct[m] + seq.ln_d_m[m] >= 0))
        ok_all &= cross and tail and lower
        rows.append((f"p={p:g}", cross, tail, lower, f"rel {rel:.1e}, ratio {seq.tail_ratio:.3f}"))
        payload["sequences"][f"{p:g}"] = seq.records()
    for c, p in ODE_GRID:
        W0 = 1.0
        res = certifier.blowup_ode_solve(c, p, W0, certifier.zero_energy_slope(c, p, W0))
        ref = certifier.separation_bound(c, p, W0)
        good = abs(res.T - ref) / ref <= 0.01
        ok_all &= good
        rows.append((f"ode c={c:g} p={p:g}", good, None, None, f"T {res.T:.6g} vs {ref:.6g}"))
        payload["ode"].append({"c": c, "p": p, "T": res.T, "closed_form": ref})
    print(f"{'case':<18} {'check':<6} {'tail':<6} {'C(m)':<6} detail")
    for name, a, b, c, detail in rows:
        f = lambda v: "-" if v is None else ("pass" if v else "FAIL")  # noqa: E731
        print(f"{name:<18} {f(a):<6} {f(b):<6} {f(c):<6} {detail}")
    if args.out:
        exports.write_json(_out(args) / "certify.json", payload)
    if not ok_all:
        raise AuditFailure("certificate checks failed")
    return EXIT_OK


def cmd_nullframe(args) -> int:
    cfg = _config(args)
    metric = cfg.build_metric()
    chart = nullframe.build_null_chart(metric, args.t_max, (args.r_min, args.r_max), args.h)
    out = _out(args, cfg)
    exports.dump_chart(chart, out / "chart.bin")
    exports.coefficients_csv(nullframe.coefficient_table(chart, args.n), out / "coefficients.csv")
    re, rx = chart.transport_residuals()
    print(f"chart {chart.t.size} x {chart.r.size} nodes, {int(chart.valid.sum())} valid")
    print(f"transport residuals: eta {re:.3e}, xi {rx:.3e}")
    print(f"wrote {out / 'chart.bin'} and {out / 'coefficients.csv'}")
    return EXIT_OK


def cmd_check_metric(args) -> int:
    cfg = _config(args)
    metric = cfg.build_metric()
    rng = np.random.default_rng(args.seed)
    if args.r_min is not None:
        lo = args.r_min
    elif metric.horizon > 0:
        lo = max(metric.horizon * 1.05, metric.horizon + 0.1)
    else:
        # no known horizon: stay in the asymptotic region
        lo = max(metric.R, 0.5) if metric.kind is metrics.MetricKind.GENERIC else 0.5
    worst = 0.0
    for _ in range(args.points):
        r = lo + rng.uniform(0, 1) ** 2 * 50.0
        pt = (rng.uniform(0, 10), r, rng.uniform(0.1, math.pi - 0.1), rng.uniform(0, 2 * math.pi))
        worst = max(worst, abs(metrics.structural_residual(metric, pt, args.fd_step)))
    R = max(metric.R, lo)
    rep = metrics.af_decay_audit(metric, R, np.geomspace(10 * R, 1000 * R, 40))
    struct_ok = worst < args.tolerance
    print(f"structural residual max {worst:.3e} over {args.points} points "
          f"({'pass' if struct_ok else 'FAIL'} at {args.tolerance:g})")
    for line in rep.lines():
        print(line)
    if not (struct_ok and rep.passed):
        raise AuditFailure("metric audit failed")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, workers=False, fmt=True):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory")
        if workers:
            p.add_argument("--workers", type=int, help="worker processes")
        if fmt:
            p.add_argument("--format", help="comma list of csv,json,svg")

    p = sub.add_parser("simulate", help="single lifespan run with audits")
    common(p)
    p.add_argument("--profile", help="data profile text block")
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="lifespans over the eps list and the scaling fit")
    common(p, workers=True)
    p.add_argument("--fresh", action="store_true", help="ignore journaled results")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit ln T* against ln eps from a sweep CSV")
    p.add_argument("--input", required=True, help="sweep.csv or a sweep output directory")
    p.add_argument("--out")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--tolerance", type=float, help="relative slope tolerance; exceeding it exits 3")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("certify", help="lower-bound iteration and ODE certificates")
    p.add_argument("--p", default="1.5,2,2.2,2.4")
    p.add_argument("--m-max", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("nullframe", help="null chart and reduced coefficients dump")
    common(p, fmt=False)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--r-min", type=float, default=20.0)
    p.add_argument("--r-max", type=float, default=60.0)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--n", type=int, default=3)
    p.set_defaults(func=cmd_nullframe)

    p = sub.add_parser("check-metric", help="structural condition and decay audits")
    common(p, fmt=False)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--r-min", type=float, help="smallest sampled radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_check_metric)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConstraintViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuditFailure as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (BlowupLabError, OSError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
