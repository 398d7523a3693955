"""Parameter sweeps over eps: lifespans, the scaling fit, and tables/plots.

Each (eps, h) lattice run is an independent job. Finished jobs are appended to
``records.jsonl`` in the output directory as soon as they return, keyed by a
hash of the physics configuration, eps and h, so a killed sweep resumes where
it stopped. Output order is fixed by (eps, h) and never by completion order.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .certifier import blowup_ode_solve, lifespan_exponent
from .charsolver import GridCrossing, ReducedProblem, combine_crossings, grid_crossing, schwarzschild_problem
from .config import SweepConfig
from .errors import BlowupLabError, InsufficientDataError
from .exports import write_csv, write_json
from .nonlinearity import apply_nonlinearity

CSV_COLUMNS = ("eps", "T_star", "error_bar", "h", "blew_up", "seconds")
JOURNAL = "records.jsonl"


# --------------------------------------------------------------------------
# problems
# --------------------------------------------------------------------------


class _SlabData:
    def __init__(self, level: float):
        self.level = level

    def __call__(self, rstar):
        return np.full_like(rstar, self.level), np.zeros_like(rstar)


class _PowerRhs:
    def __init__(self, c: float, p: float, nonlin: str):
        self.c, self.p, self.nonlin = c, p, nonlin

    def __call__(self, rstar, r, W):
        return self.c * apply_nonlinearity(W, self.p, self.nonlin)


def surrogate_oracle(config: SweepConfig, eps: float) -> dict:
    """ODE reference for the spatially homogeneous surrogate ``W'' = c F(W)``, ``W(0) = A eps``."""
    W0 = config.amplitude * eps
    ode = blowup_ode_solve(config.coefficient, config.p, W0, 0.0)
    return {"W0": W0, "T_blowup": ode.T, "t": ode.t, "W": ode.W}


def ode_crossing(oracle: dict, threshold: float) -> float:
    """Time the ODE trajectory reaches ``threshold`` (linear in ``ln W``)."""
    t, W = oracle["t"], oracle["W"]
    k = int(np.searchsorted(W, threshold))
    if k == 0:
        return 0.0
    if k >= W.size:
        return oracle["T_blowup"]
    a, b = math.log(W[k - 1]), math.log(W[k])
    return float(t[k - 1] + (math.log(threshold) - a) / (b - a) * (t[k] - t[k - 1]))


def build_problem(config: SweepConfig, eps: float) -> ReducedProblem:
    if config.mode == "surrogate":
        oracle = surrogate_oracle(config, eps)
        t_max = 1.2 * oracle["T_blowup"]
        width = config.width if config.width is not None else 2.0 * t_max + 1.0
        return ReducedProblem(0.0, config.p, config.nonlinearity, 0.0, width, t_max,
                              data=_SlabData(oracle["W0"]),
                              rhs=_PowerRhs(config.coefficient, config.p, config.nonlinearity))
    profile = config.profile(eps)
    if config.metric != "schwarzschild":
        raise BlowupLabError("lifespan sweeps run on the Schwarzschild reduction only")
    return schwarzschild_problem(profile, M=config.M, nonlin=config.nonlinearity,
                                 t_max=config.t_max_factor * profile.L)


def initial_sup(problem: ReducedProblem, samples: int = 20001) -> float:
    """``sup |W|`` of the data on a fixed fine sampling of the slice (grid independent)."""
    from .metrics import inverse_tortoise

    x = np.linspace(problem.x_min, problem.x_max, samples)
    r = inverse_tortoise(problem.M, x) if problem.M > 0 else x
    W0, _ = problem.initial_data(x, r)
    return float(np.max(np.abs(W0)))


def job_threshold(config: SweepConfig, problem: ReducedProblem) -> float:
    if config.threshold is not None:
        return config.threshold
    return config.threshold_factor * initial_sup(problem)


def grid_sequence(config: SweepConfig, eps: float) -> tuple[float, ...]:
    if config.h:
        return config.h
    if config.mode == "surrogate":
        scale = surrogate_oracle(config, eps)["T_blowup"]
    else:
        scale = config.profile(eps).L
    return tuple(scale / k for k in config.h_divisions)


# --------------------------------------------------------------------------
# jobs
# --------------------------------------------------------------------------


def run_job(config: SweepConfig, eps: float, h: float) -> dict:
    """One lattice run; failures are captured in the result, never raised."""
    start = time.perf_counter()
    out = {"key": config.job_key(eps, h), "eps": eps, "h": h}
    try:
        problem = build_problem(config, eps)
        thr = job_threshold(config, problem)
        cross, fld = grid_crossing(problem, h, thr)
        del fld
        out.update(status="ok", threshold=thr, t_max=problem.t_max, t=cross.t,
                   t_lattice=cross.t_lattice, node=cross.node, growth_time=cross.growth_time)
    except Exception as exc:  # recorded per job so sibling runs continue
        out.update(status="error", error=f"{type(exc).__name__}: {exc}")
    out["seconds"] = time.perf_counter() - start if config.timing else 0.0
    return out


def _run_job_tuple(args):
    return run_job(*args)


def _encode(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, (list, tuple)):
        return [_encode(v) for v in x]
    return x


def _decode(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, list):
        return [_decode(v) for v in x]
    return x


def load_journal(path: Path) -> dict[str, dict]:
    done: dict[str, dict] = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line from an interrupted write
            rec = {k: _decode(v) for k, v in rec.items()}
            if rec.get("status") == "ok":
                done[rec["key"]] = rec
    return done


def _drop_torn_tail(path: Path) -> None:
    """Cut a partial last line left by a killed writer so appends start clean."""
    if not path.exists():
        return
    raw = path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        with open(path, "r+b") as fh:
            fh.truncate(raw.rfind(b"\n") + 1)


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    T_star: float
    error_bar: float
    h: float
    blew_up: bool
    seconds: float
    status: str = "ok"
    error: str = ""
    T_by_h: tuple[float, ...] = ()
    crossing_node: tuple[float, float] | None = None
    in_outgoing_cone: bool | None = None
    growth_time: float = math.nan
    threshold: float = math.nan
    oracle_T: float | None = None

    def csv_row(self):
        return (self.eps, self.T_star, self.error_bar, self.h, self.blew_up, self.seconds)


@dataclass
class SweepTable:
    records: list[SweepRecord]
    n: int = 3
    p: float = 2.0
    config: dict = field(default_factory=dict)

    def blown(self) -> list[SweepRecord]:
        return [r for r in self.records if r.blew_up and r.status == "ok"]


def table_from_pairs(pairs, n: int = 3, p: float = 2.0, error_bar: float = 0.0) -> SweepTable:
    """Build a table from ``(eps, T_star)`` pairs, e.g. for fitting external data."""
    recs = [SweepRecord(float(e), float(T), error_bar, math.nan, True, 0.0) for e, T in pairs]
    return SweepTable(recs, n, p)


def _combine(config: SweepConfig, eps: float, results: list[dict]) -> SweepRecord:
    hs = [r["h"] for r in results]
    bad = [r for r in results if r.get("status") != "ok"]
    seconds = float(sum(r.get("seconds", 0.0) for r in results))
    oracle_T = None
    if bad:
        return SweepRecord(eps, math.nan, math.nan, hs[-1], False, seconds, "error",
                           "; ".join(r["error"] for r in bad))
    crossings = [GridCrossing(r["h"], r["t"], r["t_lattice"],
                              tuple(r["node"]) if r["node"] is not None else None, r["growth_time"])
                 for r in results]
    est = combine_crossings(crossings, results[-1]["threshold"], results[-1]["t_max"])
    if config.mode == "surrogate":
        oracle_T = ode_crossing(surrogate_oracle(config, eps), est.threshold)
    return SweepRecord(eps, est.T_star, est.error_bar, hs[-1], est.blew_up, seconds,
                       T_by_h=est.T_by_h, crossing_node=est.crossing_node,
                       in_outgoing_cone=est.in_outgoing_cone, growth_time=est.growth_time,
                       threshold=est.threshold, oracle_T=oracle_T)


def run_sweep(config: SweepConfig, out_dir=None, resume: bool = True) -> SweepTable:
    """Run every (eps, h) job, journaling each as it finishes; returns the table in eps order."""
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)
    journal = out / JOURNAL
    done = load_journal(journal) if resume else {}
    if not resume and journal.exists():
        journal.unlink()
    _drop_torn_tail(journal)

    plan = [(eps, grid_sequence(config, eps)) for eps in config.eps]
    jobs = [(config, eps, h) for eps, hs in plan for h in hs
            if config.job_key(eps, h) not in done]

    with open(journal, "a") as fh:
        def write(rec):
            fh.write(json.dumps({k: _encode(v) for k, v in rec.items()}, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
            if rec.get("status") == "ok":
                done[rec["key"]] = rec

        fresh: dict[str, dict] = {}
        if config.workers == 1 or len(jobs) <= 1:
            for job in jobs:
                rec = run_job(*job)
                write(rec)
                fresh[rec["key"]] = rec
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for rec in pool.map(_run_job_tuple, jobs):
                    write(rec)
                    fresh[rec["key"]] = rec

    records = []
    for eps, hs in plan:
        results = []
        for h in hs:
            key = config.job_key(eps, h)
            results.append(done.get(key) or fresh[key])
        records.append(_combine(config, eps, results))
    return SweepTable(records, config.n, config.p, config.physics())


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float
    expected: float
    points: int

    @property
    def relative_deviation(self) -> float:
        return abs(self.slope - self.expected) / abs(self.expected)


def fit_exponent(table: SweepTable) -> ExponentFit:
    """Least squares of ``ln T*`` on ``ln eps`` over blow-up records."""
    recs = table.blown()
    if len(recs) < 3:
        raise InsufficientDataError(f"need at least 3 blow-up records, have {len(recs)}")
    x = np.log([r.eps for r in recs])
    y = np.log([r.T_star for r in recs])
    res = stats.linregress(x, y)
    expected = -lifespan_exponent(table.n, table.p, "n3" if table.n == 3 else "general").value
    return ExponentFit(float(res.slope), float(res.stderr), float(res.intercept), expected, len(recs))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def read_table_csv(path) -> SweepTable:
    recs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            recs.append(SweepRecord(float(row["eps"]), float(row["T_star"]), float(row["error_bar"]),
                                    float(row["h"]), row["blew_up"] == "true", float(row["seconds"])))
    return SweepTable(recs)


def _svg(table: SweepTable, fit: ExponentFit | None) -> str:
    pts = [(math.log10(r.eps), math.log10(r.T_star)) for r in table.blown()]
    W, H, pad = 480, 360, 50
    if not pts:
        xs, ys = [-1.0, 0.0], [0.0, 1.0]
    else:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1 = min(xs) - 0.05, max(xs) + 0.05
    y0, y1 = min(ys) - 0.1, max(ys) + 0.1

    def X(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def Y(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<polyline class="axes" fill="none" stroke="black" points="{pad},{pad} {pad},{H - pad} {W - pad},{H - pad}"/>',
             f'<text x="{W / 2:.0f}" y="{H - 12}" text-anchor="middle" font-size="13">log10 eps</text>',
             f'<text x="14" y="{H / 2:.0f}" font-size="13" transform="rotate(-90 14 {H / 2:.0f})" '
             f'text-anchor="middle">log10 T*</text>']
    for x, y in pts:
        parts.append(f'<circle class="point" cx="{X(x):.2f}" cy="{Y(y):.2f}" r="3.5" fill="black"/>')
    if fit is not None and pts:
        ln10 = math.log(10)
        b = fit.intercept / ln10
        parts.append(f'<line class="fit" stroke="#1f4fbf" stroke-width="1.5" x1="{X(x0):.2f}" '
                     f'y1="{Y(b + fit.slope * x0):.2f}" x2="{X(x1):.2f}" y2="{Y(b + fit.slope * x1):.2f}"/>')
        xm, ym = sum(xs) / len(xs), sum(ys) / len(ys)
        parts.append(f'<line class="reference" stroke="#bf3f1f" stroke-dasharray="5,4" x1="{X(x0):.2f}" '
                     f'y1="{Y(ym + fit.expected * (x0 - xm)):.2f}" x2="{X(x1):.2f}" '
                     f'y2="{Y(ym + fit.expected * (x1 - xm)):.2f}"/>')
        parts.append(f'<text x="{W - pad}" y="{pad - 10}" text-anchor="end" font-size="12">'
                     f'fit {fit.slope:.3f} ± {fit.stderr:.3f}, reference {fit.expected:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit(table: SweepTable, formats, out_dir, stem: str = "sweep") -> list[Path]:
    """Write the requested formats; returns the paths written."""
    formats = list(formats)
    if not formats:
        return []
    if not table.records:
        raise InsufficientDataError("cannot emit an empty table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        fit = fit_exponent(table)
    except InsufficientDataError:
        fit = None
    paths = []
    for fmt in formats:
        path = out / f"{stem}.{fmt}"
        if fmt == "csv":
            write_csv(path, CSV_COLUMNS, (r.csv_row() for r in table.records))
        elif fmt == "json":
            write_json(path, {"config": table.config,
                              "records": [asdict(r) for r in table.records],
                              "fit": asdict(fit) if fit else None})
        elif fmt == "svg":
            try:
                path.write_text(_svg(table, fit))
            except OSError as exc:
                raise OSError(exc.errno, f"{exc.strerror}: {path}") from None
        else:
            raise ValueError(f"unknown format {fmt!r}")
        paths.append(path)
    return paths
