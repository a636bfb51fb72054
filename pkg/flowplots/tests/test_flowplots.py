import os
import subprocess
import sys

import numpy as np
import pytest

from flowplots import (classify, fit_slope, load_refinement, load_series,
                       render_report)
from flowplots.cli import main as cli_main

SERIES_HEADER = ("t,norm_Rc,norm_H,norm_dH,norm_Np,norm_Nm,r1,r2,r3,"
                 "compat_p,compat_m,min_eig_g,norm_Xp,norm_Xm,j2_defect")


def write_series(path, rows=6):
    lines = [SERIES_HEADER]
    for i in range(rows):
        t = 0.01 * i
        vals = [t, 2.5 - 0.1 * i, 2.0, 1e-12, 1e-11, 1e-11, 1e-10 * (i + 1),
                1e-10, 0.0, 1e-12, 1e-12, 0.9, 2.0, 2.0, 1e-15]
        lines.append(",".join("%.17g" % v for v in vals))
    path.write_text("\n".join(lines) + "\n")


def write_refinement(path, order=4.0):
    lines = ["operator,resolution,error"]
    for op in ("exterior_derivative", "riemann"):
        for n in (16, 32, 64):
            err = 1e-3 * (16.0 / n) ** order
            lines.append("%s,%d,%.17g" % (op, n, err))
    path.write_text("\n".join(lines) + "\n")


def test_classify(tmp_path):
    s = tmp_path / "series.csv"
    r = tmp_path / "refinement.csv"
    write_series(s)
    write_refinement(r)
    assert classify(str(s)) == "series"
    assert classify(str(r)) == "refinement"


def test_load_series_and_terminal_row(tmp_path):
    s = tmp_path / "series.csv"
    write_series(s)
    bundle = load_series(str(s))
    assert len(bundle) == 6
    assert bundle.columns["t"][1] == pytest.approx(0.01)
    # terminal row preserved as raw strings
    term = bundle.terminal_row()
    assert term["t"] == "%.17g" % 0.05


def test_missing_mandatory_column_aborts(tmp_path):
    s = tmp_path / "bad.csv"
    s.write_text("t,norm_Rc\n0,1\n")
    with pytest.raises(ValueError) as err:
        load_series(str(s))
    assert "norm_H" in str(err.value)


def test_empty_csv_aborts(tmp_path):
    s = tmp_path / "empty.csv"
    s.write_text("")
    with pytest.raises(ValueError):
        load_series(str(s))


def test_fit_slope_recovers_order():
    res = [16, 32, 64]
    errs = [1e-3 * (16.0 / n) ** 4 for n in res]
    assert fit_slope(res, errs) == pytest.approx(4.0, abs=1e-10)


def test_render_report_writes_figures_and_summary(tmp_path):
    s = tmp_path / "series.csv"
    r = tmp_path / "refinement.csv"
    write_series(s)
    write_refinement(r, order=4.0)
    out = tmp_path / "figs"
    manifest = render_report([str(s), str(r)], str(out))
    assert os.path.exists(manifest["summary"])
    assert len(manifest["figures"]) >= 3
    for fig in manifest["figures"]:
        assert os.path.getsize(fig) > 1000
    summary = open(manifest["summary"]).read()
    # terminal row echoed exactly
    last_line = (s.read_text().strip().splitlines())[-1]
    for key, cell in zip(SERIES_HEADER.split(","), last_line.split(",")):
        assert "%s,%s" % (key, cell) in summary
    assert manifest["orders"]["riemann"] == pytest.approx(4.0, abs=1e-9)


def test_render_rejects_empty_input(tmp_path):
    with pytest.raises(ValueError):
        render_report([], str(tmp_path))


def test_cli_usage_error_on_no_inputs(capsys):
    with pytest.raises(SystemExit):
        cli_main(["render"])


def test_cli_render(tmp_path, capsys):
    s = tmp_path / "series.csv"
    write_series(s)
    assert cli_main(["render", str(s), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "summary.txt" in out


def test_cli_missing_file_exits_2(tmp_path):
    assert cli_main(["render", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_end_to_end_with_gkflow(tmp_path):
    """Drive the laboratory CLI through its external interface and render
    its artifacts: the flagship-run residual curves and the refinement
    figure whose fitted slopes must reproduce the measured orders."""
    env = dict(os.environ)
    cfg1 = tmp_path / "flag.txt"
    cfg1.write_text("scenario = HOPF_SQUASHED\nsteps = 60\ndt = 0.004\nout = %s\n"
                    % tmp_path)
    cfg2 = tmp_path / "conv.txt"
    cfg2.write_text("scenario = CONVERGENCE\nresolutions = 16,32,64\nout = %s\n"
                    % tmp_path)
    for cfg in (cfg1, cfg2):
        proc = subprocess.run([sys.executable, "-m", "gkflow.cli", "run", str(cfg)],
                              capture_output=True, env=env)
        assert proc.returncode == 0, proc.stdout.decode() + proc.stderr.decode()
    series = tmp_path / "hopf_squashed" / "series.csv"
    refine = tmp_path / "convergence" / "refinement.csv"
    manifest = render_report([str(series), str(refine)], str(tmp_path / "figs"))
    assert len(manifest["figures"]) >= 4
    for op, slope in manifest["orders"].items():
        assert abs(slope - 4.0) <= 0.5, (op, slope)
