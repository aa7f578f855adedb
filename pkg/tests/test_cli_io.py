import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freqbin.beating import BeatingParams, delay_grid, synthesize_beating_dataset
from freqbin.cli_io import formats
from freqbin.cli_io.cli import build_report, main
from freqbin.cli_io.config import config_fields, load_config, paper_profile, parse_config
from freqbin.counting import BranchCounts
from freqbin.errors import ConfigError, SchemaError
from freqbin.estimation import BeatingFit, fit_beating
from freqbin.estimation.fitting import PARAM_NAMES


def make_fit(V, phi=0.0, sV=0.01, sphi=0.01):
    unc = dict.fromkeys(PARAM_NAMES, 0.0)
    unc["visibility_V"] = sV
    unc["phase_phi"] = sphi
    return BeatingFit(BeatingParams(1000.0, V, 0.6, 13.8, phi), unc, 1.0, True, 5, n_points=501)


def tomo_inputs(tmp_path, V, n_ab, n_ba):
    fit_path = tmp_path / "fit.json"
    branch_path = tmp_path / "branch.csv"
    formats.write_json(fit_path, formats.fit_to_dict(make_fit(V)))
    formats.write_branch_csv(branch_path, BranchCounts.poissonian(0, 0, n_ab, n_ba))
    return str(fit_path), str(branch_path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    sim, fit, tomo, rep = (root / d for d in ("sim", "fit", "tomo", "report"))
    codes = [
        main(["simulate", "--out", str(sim)]),
        main(["fit", str(sim / "beating.csv"), "--out", str(fit)]),
        main(["tomo", str(fit / "fit.json"), str(sim / "branch_counts.csv"), "--out", str(tomo),
              "--power-scan", str(sim / "power_scan.csv"), "--replicates", "200"]),
        main(["report", str(tomo / "report.json"), "--out", str(rep)]),
    ]
    return root, codes


# config ------------------------------------------------------------------------

def test_builtin_profile_loads():
    cfg = paper_profile()
    assert cfg.seed == 20231016
    assert cfg.frequencies().lambda_signal == pytest.approx(1549.32, abs=0.005)
    assert cfg.beating_params().delta_omega == pytest.approx(13.8, rel=0.01)
    assert load_config("paper-profile").config_hash() == cfg.config_hash()


def test_profile_operating_point():
    cfg = paper_profile()
    from freqbin.counting import car_point

    pt = car_point(cfg.source_model(), cfg["pump.power_mw"], cfg.coincidence())
    assert pt.coincidence == pytest.approx(75360, rel=1e-3)
    assert pt.car == pytest.approx(1477, abs=1)
    assert cfg.accidentals_per_point() == pytest.approx(1000 / pt.car)


def test_partial_config_layers_over_profile(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("seed = 5\npump.power_mw = 50.0\n")
    cfg = load_config(path)
    assert cfg.seed == 5 and cfg["pump.power_mw"] == 50.0
    assert cfg["coincidence.window_ps"] == 300.0


def test_config_hash_changes_with_values():
    assert paper_profile().config_hash() != paper_profile().with_seed(1).config_hash()


@pytest.mark.parametrize(
    "text, field, line",
    [
        ("seed = 1\nsource.collection_efficiency_signal = 1.5\n", "source.collection_efficiency_signal", 2),
        ("\n\nbeating.visibility = 1.2\n", "beating.visibility", 3),
        ("pump.power_mw = -1\n", "pump.power_mw", 1),
        ("bogus.key = 3\n", "bogus.key", 1),
        ("seed = 1\nchannels.lambda_idler_nm = 700.0\n", "channels.lambda_idler_nm", 2),
        ('scan.arm = "both"\n', "scan.arm", 1),
    ],
)
def test_config_diagnostics(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, paper_profile().values)
    assert info.value.field == field
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_config_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("seed = = 3")


def test_config_fields_cover_schema():
    assert "beating.accidentals_per_point" in config_fields()


def test_invalid_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("seed = 1\nsource.collection_efficiency_idler = 2.0\n")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "source.collection_efficiency_idler" in err


# CSV / JSON --------------------------------------------------------------------------

def test_branch_csv_round_trip(tmp_path):
    c = BranchCounts.poissonian(155, 157, 22427, 28560)
    formats.write_branch_csv(tmp_path / "b.csv", c)
    assert formats.read_branch_csv(tmp_path / "b.csv") == c


def test_beating_csv_round_trip(tmp_path):
    d = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8), delay_grid(10, 0.05), seed=3)
    formats.write_beating_csv(tmp_path / "d.csv", d)
    assert formats.read_beating_csv(tmp_path / "d.csv") == d


@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False), min_size=1, max_size=20))
def test_fmt_round_trips_floats(xs):
    assert [float(formats.fmt(x)) for x in xs] == xs


def test_truncated_beating_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("delay_ps,counts,sigma\n" + "".join(f"{i}.0,10,3.1\n" for i in range(20)) + "20.0,10\n")
    with pytest.raises(SchemaError) as info:
        formats.read_beating_csv(path)
    # rows count file lines, header included
    assert info.value.row == 22


def test_bad_cell_reports_column(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("branch,counts,sigma\naa,1,1\nbb,x,1\nab,1,1\nba,1,1\n")
    with pytest.raises(SchemaError) as info:
        formats.read_branch_csv(path)
    assert info.value.row == 3 and info.value.column == "counts"


def test_wrong_header(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaError):
        formats.read_power_scan_csv(path)


def test_truncated_csv_exit_code(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text("delay_ps,counts,sigma\n0.0,10,3\n0.1,")
    assert main(["fit", str(path), "--out", str(tmp_path)]) == 1
    assert "row" in capsys.readouterr().err


def test_fit_json_round_trip(tmp_path):
    d = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8), delay_grid(10, 0.05), seed=3)
    fit = fit_beating(d)
    formats.write_json(tmp_path / "f.json", formats.fit_to_dict(fit, d))
    fit2, d2 = formats.fit_from_dict(formats.read_json(tmp_path / "f.json"))
    assert fit2 == fit and d2 == d


def test_fit_json_wrong_schema():
    with pytest.raises(SchemaError):
        formats.fit_from_dict({"schema": "something/9"})


def test_report_round_trip_infinite_ratio():
    counts = BranchCounts.poissonian(0, 0, 44, 56)
    report = build_report(make_fit(0.96), None, counts, replicates=100)
    assert math.isinf(report.ratio_db)
    back = formats.ReportBundle.from_dict(json.loads(json.dumps(report.to_dict())))
    assert math.isinf(back.ratio_db)
    assert back.fidelity == report.fidelity
    assert back.bootstrap == pytest.approx(report.bootstrap)


# tomo --------------------------------------------------------------------------

@pytest.mark.parametrize(
    "V, n_ab, n_ba, code, fidelity",
    [(0.96, 44, 56, 0, 0.98), (1.0, 50, 50, 0, 1.0), (1.02, 50, 50, 3, None)],
)
def test_tomo_cases(tmp_path, V, n_ab, n_ba, code, fidelity):
    fit_path, branch_path = tomo_inputs(tmp_path, V, n_ab, n_ba)
    assert main(["tomo", fit_path, branch_path, "--out", str(tmp_path / "o"), "--replicates", "100"]) == code
    report = formats.ReportBundle.from_dict(formats.read_json(tmp_path / "o" / "report.json"))
    if fidelity is not None:
        assert report.fidelity == pytest.approx(fidelity, abs=1e-12)
        assert report.p == pytest.approx(n_ba / (n_ab + n_ba))
    else:
        assert not report.physical
        assert report.density_matrix.V == 1.02


def test_tomo_project_physical(tmp_path):
    fit_path, branch_path = tomo_inputs(tmp_path, 1.02, 50, 50)
    out = tmp_path / "o"
    assert main(["tomo", fit_path, branch_path, "--out", str(out), "--replicates", "100", "--project-physical"]) == 0
    report = formats.ReportBundle.from_dict(formats.read_json(out / "report.json"))
    assert report.density_matrix.V == 1.0 and report.density_matrix.projected
    assert any("projected" in w for w in report.warnings)
    rho = formats.read_density_csv(out / "density_matrix.csv")
    assert rho == pytest.approx(report.density_matrix.entries)


def test_nonconverged_fit_exit_code(tmp_path):
    d = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8), delay_grid(10, 0.05), seed=3)
    formats.write_beating_csv(tmp_path / "d.csv", d)
    from freqbin.cli_io import cli

    fit = fit_beating(d, max_iter=1)
    assert not fit.converged
    orig = cli.fit_beating
    cli.fit_beating = lambda data, **kw: fit_beating(data, max_iter=1, **kw)
    try:
        assert main(["fit", str(tmp_path / "d.csv"), "--out", str(tmp_path)]) == 2
    finally:
        cli.fit_beating = orig


# end to end ------------------------------------------------------------------------

def test_pipeline_exit_codes(pipeline):
    _, codes = pipeline
    assert codes == [0, 0, 0, 0]


def test_pipeline_recovers_reference_figures(pipeline):
    root, _ = pipeline
    report = formats.ReportBundle.from_dict(formats.read_json(root / "tomo" / "report.json"))
    fit = report.beating_fit
    assert abs(fit.params.visibility_V - 0.96) <= 3 * fit.uncertainties["visibility_V"]
    assert report.p == pytest.approx(0.56, abs=0.01)
    assert report.ratio_db == pytest.approx(22.13, abs=1.0)
    assert report.fidelity == pytest.approx(0.98, abs=0.01)
    assert report.physical
    assert report.power_fit is not None


def test_report_writes_four_plots_with_sidecars(pipeline):
    root, _ = pipeline
    rep = root / "report"
    svgs = sorted(p.name for p in rep.glob("*.svg"))
    assert svgs == ["beating.svg", "branch_counts.svg", "density_matrix.svg", "power_scan.svg"]
    assert (rep / "summary.txt").read_text()


def test_sidecar_passes_data_through(pipeline):
    root, _ = pipeline
    data = formats.read_beating_csv(root / "sim" / "beating.csv")
    with open(root / "report" / "beating_plot.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert np.array_equal([float(r["counts"]) for r in rows], data.counts)
    assert np.array_equal([float(r["delay_ps"]) for r in rows], data.delays)


def test_report_without_power_scan(tmp_path, pipeline, caplog):
    root, _ = pipeline
    tomo = tmp_path / "tomo"
    assert main(["tomo", str(root / "fit" / "fit.json"), str(root / "sim" / "branch_counts.csv"),
                 "--out", str(tomo), "--replicates", "100"]) == 0
    assert main(["report", str(tomo / "report.json"), "--out", str(tmp_path / "rep")]) == 0
    assert len(list((tmp_path / "rep").glob("*.svg"))) == 3
    assert "power scan" in (tmp_path / "rep" / "summary.txt").read_text()
    assert any("power scan" in r.message for r in caplog.records)


def test_simulate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--out", str(tmp_path / d), "--seed", "7"]) == 0
    for name in ("branch_counts.csv", "beating.csv", "power_scan.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_is_byte_identical(tmp_path, pipeline):
    root, _ = pipeline
    main(["report", str(root / "tomo" / "report.json"), "--out", str(tmp_path / "again")])
    for p in (root / "report").iterdir():
        assert (tmp_path / "again" / p.name).read_bytes() == p.read_bytes()


def test_seed_changes_output(tmp_path):
    main(["simulate", "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["simulate", "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "beating.csv").read_bytes() != (tmp_path / "b" / "beating.csv").read_bytes()
