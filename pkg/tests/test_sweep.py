import json
import math
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from blowup_lab import sweep
from blowup_lab.config import SweepConfig, config_from_text, load_config, parse_kv
from blowup_lab.errors import ConfigError, InsufficientDataError
from blowup_lab.sweep import (
    JOURNAL,
    emit,
    fit_exponent,
    load_journal,
    read_table_csv,
    run_sweep,
    table_from_pairs,
)

SURROGATE = "mode = surrogate\neps = 1, 0.7, 0.5\nh_divisions = 50, 100\n"


# -- configuration ---------------------------------------------------------------------

def test_parse_kv_comments_and_blank_lines():
    kv = parse_kv("# header\n\np = 2   # inline\neps = 0.2, 0.1\n")
    assert kv == {"p": "2", "eps": "0.2, 0.1"}


@pytest.mark.parametrize("text, match", [
    ("p 2\n", "expected 'key = value'"),
    ("bogus = 1\n", "unknown key"),
    ("p = 2\np = 3\n", "duplicate key"),
    ("p = two\n", "not a number"),
    ("workers = 1.5\n", "not an integer"),
    ("timing = maybe\n", "on or off"),
    ("eps = 0.1, 0.2\n", "strictly decreasing"),
    ("h_divisions = 25\n", "at least two"),
    ("formats = csv, pdf\n", "unknown formats"),
    ("mode = other\n", "mode"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        config_from_text(text)


def test_eps_at_or_above_eps0_cites_constraint():
    with pytest.raises(ConfigError, match="data-family constraint"):
        config_from_text("eps0 = 0.21\neps = 0.3, 0.1\n")
    with pytest.raises(ConfigError, match="data-family constraint"):
        config_from_text("eps0 = 0.21\neps = 0.21\n")


def test_config_text_roundtrip():
    cfg = config_from_text("metric = custom\ng_tt = -(1 - 2/r)\ng_rr = 1/(1 - 2/r)\n"
                           "eps = 0.2, 0.1, 0.05\nworkers = 3\ntiming = on\n")
    assert config_from_text(cfg.to_text()) == cfg


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "nope.cfg")


def test_job_key_ignores_presentation_fields():
    a = config_from_text("eps = 0.2\n")
    b = config_from_text("eps = 0.2\nworkers = 4\nout = elsewhere\nformats = csv\n")
    c = config_from_text("eps = 0.2\np = 2.2\n")
    assert a.job_key(0.2, 0.1) == b.job_key(0.2, 0.1)
    assert a.job_key(0.2, 0.1) != c.job_key(0.2, 0.1)
    assert a.job_key(0.2, 0.1) != a.job_key(0.2, 0.05)


# -- sweeps ----------------------------------------------------------------------------------

def test_no_nonlinearity_never_blows_up(tmp_path):
    cfg = config_from_text("eps = 0.2, 0.15, 0.1\nnonlinearity = zero\nh_divisions = 10, 20\n")
    table = run_sweep(cfg, tmp_path)
    assert [r.blew_up for r in table.records] == [False] * 3
    assert all(r.status == "ok" for r in table.records)


def test_surrogate_matches_ode(tmp_path):
    table = run_sweep(config_from_text(SURROGATE), tmp_path)
    for rec in table.records:
        assert rec.blew_up
        assert abs(rec.T_star - rec.oracle_T) <= 0.03 * rec.oracle_T
        assert rec.h == pytest.approx(sweep.surrogate_oracle(config_from_text(SURROGATE), rec.eps)["T_blowup"] / 100)


def test_worker_count_does_not_change_output(tmp_path):
    outs = []
    for k in (1, 8):
        cfg = config_from_text(SURROGATE + f"workers = {k}\nformats = csv, json\n")
        d = tmp_path / f"w{k}"
        emit(run_sweep(cfg, d), cfg.formats, d)
        outs.append(((d / "sweep.csv").read_bytes(), json.loads((d / "sweep.json").read_text())))
    assert outs[0][0] == outs[1][0]
    assert outs[0][1]["records"] == outs[1][1]["records"]


def test_resume_skips_finished_jobs(tmp_path, monkeypatch):
    cfg = config_from_text(SURROGATE)
    first = run_sweep(cfg, tmp_path)
    lines = (tmp_path / JOURNAL).read_text().splitlines()
    assert len(lines) == 6

    def boom(*a, **k):
        raise AssertionError("finished job was rerun")

    monkeypatch.setattr(sweep, "grid_crossing", boom)
    again = run_sweep(cfg, tmp_path)
    assert again.records == first.records
    assert (tmp_path / JOURNAL).read_text().splitlines() == lines


def test_resume_after_partial_journal(tmp_path):
    cfg = config_from_text(SURROGATE)
    full = run_sweep(cfg, tmp_path / "full")
    lines = (tmp_path / "full" / JOURNAL).read_text().splitlines()
    part = tmp_path / "part"
    part.mkdir()
    # two finished jobs, then a write torn by a kill
    (part / JOURNAL).write_text("\n".join(lines[:2]) + "\n" + lines[2][: len(lines[2]) // 2])
    assert len(load_journal(part / JOURNAL)) == 2
    resumed = run_sweep(cfg, part)
    assert resumed.records == full.records
    assert len(load_journal(part / JOURNAL)) == 6


def test_fresh_run_discards_journal(tmp_path):
    cfg = config_from_text(SURROGATE)
    run_sweep(cfg, tmp_path)
    run_sweep(cfg, tmp_path, resume=False)
    assert len((tmp_path / JOURNAL).read_text().splitlines()) == 6


def test_failed_run_is_recorded_not_raised(tmp_path, monkeypatch):
    cfg = config_from_text(SURROGATE)
    real = sweep.grid_crossing

    def flaky(problem, h, thr):
        if problem.initial_data(np.zeros(1), np.zeros(1))[0][0] < 0.6:
            raise FloatingPointError("injected")
        return real(problem, h, thr)

    monkeypatch.setattr(sweep, "grid_crossing", flaky)
    table = run_sweep(cfg, tmp_path)
    statuses = [r.status for r in table.records]
    assert "error" in statuses and "ok" in statuses
    bad = next(r for r in table.records if r.status == "error")
    assert "injected" in bad.error and not bad.blew_up
    # failed jobs are not treated as finished on resume
    monkeypatch.setattr(sweep, "grid_crossing", real)
    assert all(r.status == "ok" for r in run_sweep(cfg, tmp_path).records)


def test_lifespan_requires_schwarzschild():
    cfg = SweepConfig(metric="minkowski", eps=(0.2,))
    with pytest.raises(Exception, match="Schwarzschild"):
        sweep.build_problem(cfg, 0.2)


# -- fitting ------------------------------------------------------------------------------------

def test_exact_power_law():
    eps = np.geomspace(0.2, 0.01, 6)
    fit = fit_exponent(table_from_pairs(zip(eps, 5 * eps**-2.0)))
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(5), abs=1e-12)
    assert fit.expected == pytest.approx(-2.0)
    assert fit.points == 6


@pytest.mark.parametrize("seed", range(5))
def test_noisy_power_law(seed):
    rng = np.random.default_rng(seed)
    eps = np.geomspace(0.2, 0.01, 12)
    T = 5 * eps**-2.0 * (1 + 0.02 * rng.standard_normal(eps.size))
    fit = fit_exponent(table_from_pairs(zip(eps, T)))
    assert abs(fit.slope + 2.0) <= 3 * fit.stderr


def test_fit_needs_three_points():
    with pytest.raises(InsufficientDataError):
        fit_exponent(table_from_pairs([(0.2, 10.0), (0.1, 40.0)]))


def test_fit_skips_runs_without_blowup():
    t = table_from_pairs([(0.2, 10.0), (0.1, 40.0), (0.05, 160.0)])
    t.records.append(sweep.SweepRecord(0.01, 1e5, 0.0, 1.0, False, 0.0))
    assert fit_exponent(t).points == 3


# -- emission ---------------------------------------------------------------------------------

def _sample_table():
    eps = [0.2, 0.1, 0.05, 0.025]
    t = table_from_pairs(zip(eps, [5 * e**-2.0 for e in eps]), error_bar=0.125)
    t.records[:] = [replace(r, h=0.5) for r in t.records]
    t.records.append(sweep.SweepRecord(0.01, 1234.5, 0.0, 0.25, False, 0.0))
    return t


def test_empty_format_list_writes_nothing(tmp_path):
    assert emit(_sample_table(), [], tmp_path / "x") == []
    assert not (tmp_path / "x").exists()


def test_empty_table_rejected(tmp_path):
    with pytest.raises(InsufficientDataError):
        emit(sweep.SweepTable([]), ["csv"], tmp_path)


def test_csv_roundtrip(tmp_path):
    table = _sample_table()
    (path,) = emit(table, ["csv"], tmp_path)
    back = read_table_csv(path)
    assert [r.csv_row() for r in back.records] == [r.csv_row() for r in table.records]
    assert path.read_text().splitlines()[0] == ",".join(sweep.CSV_COLUMNS)


def test_svg_structure(tmp_path):
    (path,) = emit(_sample_table(), ["svg"], tmp_path)
    root = ET.parse(path).getroot()
    lines = [el for el in root.iter() if el.tag.endswith("line")]
    assert sum(el.get("class") == "fit" for el in lines) == 1
    assert sum(el.get("class") == "reference" for el in lines) == 1
    assert sum(el.get("class") == "point" for el in root.iter()) == 4


def test_json_payload(tmp_path):
    (path,) = emit(_sample_table(), ["json"], tmp_path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"config", "records", "fit"}
    assert doc["fit"]["slope"] == pytest.approx(-2.0)
    assert len(doc["records"]) == 5


def test_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit(_sample_table(), ["csv"], blocker)
