# %%
"""End-to-end tests of the command line interface."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest

from connectedness_surface.cli import RunConfig, main, parse_args
from connectedness_surface.serialize import model_to_dict, write_json
from tests.conftest import random_model

if TYPE_CHECKING:
    from pathlib import Path

    from connectedness_surface.riskmodel import RiskModel


def model_file(tmp_path: Path, model: RiskModel, name: str = "model.json") -> str:
    path = tmp_path / name
    write_json(model_to_dict(model), path)
    return str(path)


@pytest.fixture
def panel_file(tmp_path: Path) -> str:
    path = tmp_path / "returns.csv"
    args = ["synth", "--seed", "42", "--n", "4", "--t", "400", "--regime", "factor"]
    assert main([*args, "-o", str(path)]) == 0
    return str(path)


def test_parse_args() -> None:
    conf = parse_args(["solve", "-i", "m.json", "--lambda", "0.3", "-j", "0"])
    assert isinstance(conf, RunConfig)
    assert conf.command == "solve"
    assert conf.lam == 0.3
    assert conf.workers == 0
    assert conf.long_only is False
    assert conf.window == 252


def test_unknown_command() -> None:
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2


def test_synth_needs_seed(tmp_path: Path) -> None:
    assert main(["synth", "-o", str(tmp_path / "x.csv")]) == 2


def test_missing_input() -> None:
    assert main(["frontier", "-o", "out"]) == 2


def test_estimate_is_reproducible(
    tmp_path: Path, panel_file: str, capsys: pytest.CaptureFixture[str]
) -> None:
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert main(["estimate", "-i", panel_file, "-o", str(first), "--window", "300"]) == 0
    assert main(["estimate", "-i", panel_file, "-o", str(second), "--window", "300"]) == 0
    assert first.read_bytes() == second.read_bytes()
    doc = json.loads(first.read_text(encoding="utf-8"))
    assert doc["n"] == 4
    assert doc["tci"] > 50
    out = capsys.readouterr().out
    assert "TCI" in out
    assert "asset_4" in out


def test_rolling_estimate(tmp_path: Path, panel_file: str) -> None:
    output = tmp_path / "rolling.json"
    args = ["--window", "300", "--rolling", "50", "--shrinkage", "0.2", "-j", "2"]
    assert main(["estimate", "-i", panel_file, "-o", str(output), *args]) == 0
    docs = json.loads(output.read_text(encoding="utf-8"))
    assert len(docs) == 3
    assert docs[0]["window_end"] < docs[-1]["window_end"]


def test_estimate_errors(tmp_path: Path) -> None:
    blank = tmp_path / "blank.csv"
    blank.write_text("date,a,b\n2020-01-01,0.1,\n", encoding="utf-8")
    assert main(["estimate", "-i", str(blank), "-o", str(tmp_path / "m.json")]) == 2
    short = tmp_path / "short.csv"
    assert main(["synth", "--seed", "1", "--n", "3", "--t", "100", "-o", str(short)]) == 0
    assert main(["estimate", "-i", str(short), "-o", str(tmp_path / "m.json")]) == 3
    bad = ["--shrinkage", "lots"]
    assert main(["estimate", "-i", str(short), "-o", str(tmp_path / "m.json"), *bad]) == 2


@pytest.mark.parametrize(("flags", "variance"), [([], 0.03354), (["--long-only"], 0.03731)])
def test_minimum_variance_surface(
    tmp_path: Path, model_a: RiskModel, flags: list[str], variance: float
) -> None:
    stem = tmp_path / "a3"
    args = ["surface", "-i", model_file(tmp_path, model_a), "-o", str(stem)]
    assert main([*args, "--lambda-grid", "1", *flags]) == 0
    frame = pd.read_csv(tmp_path / "a3.csv")
    assert len(frame) == 1
    assert frame.loc[0, "variance"] == pytest.approx(variance, abs=5e-4)
    assert frame.loc[0, "status"] == "ok"
    doc = json.loads((tmp_path / "a3.json").read_text(encoding="utf-8"))
    assert doc["mu0_grid"] is None


def test_full_surface_files(tmp_path: Path, model_c: RiskModel) -> None:
    stem = tmp_path / "grid.csv"
    args = ["surface", "-i", model_file(tmp_path, model_c), "-o", str(stem)]
    assert main([*args, "--mu0-grid", "0.06:0.12:0.02", "--lambda-grid", "0:1:0.5"]) == 0
    frame = pd.read_csv(tmp_path / "grid.csv")
    assert len(frame) == 12
    assert set(frame["status"]) == {"ok"}
    assert main([*args, "--mu0-grid", "auto", "--long-only", "--lambda-grid", "0.5"]) == 0
    assert len(pd.read_csv(tmp_path / "grid.csv")) == 21


def test_frontier(tmp_path: Path, model_c: RiskModel, capsys: pytest.CaptureFixture[str]) -> None:
    stem = tmp_path / "frontier"
    assert main(["frontier", "-i", model_file(tmp_path, model_c), "-o", str(stem)]) == 0
    frame = pd.read_csv(tmp_path / "frontier.csv")
    assert len(frame) == 21
    assert frame["variance"].is_monotonic_decreasing
    assert "frontier: 1 x 21 cells" in capsys.readouterr().out


def test_asymmetric_model_is_rejected(tmp_path: Path, model_c: RiskModel) -> None:
    doc = model_to_dict(model_c)
    doc["sigma"][0][2] = 0.05
    path = tmp_path / "bad.json"
    write_json(doc, path)
    assert main(["solve", "-i", str(path), "-o", str(tmp_path / "r.json")]) == 2


def test_solve(tmp_path: Path, model_c: RiskModel) -> None:
    output = tmp_path / "solve.json"
    args = ["solve", "-i", model_file(tmp_path, model_c), "-o", str(output), "--lambda", "0.4"]
    assert main(args) == 0
    doc = json.loads(output.read_text(encoding="utf-8"))
    np.testing.assert_allclose(doc["weights"], [0.3378, 0.3804, 0.2818], atol=1e-3)
    assert doc["theta"] == 0.0
    assert doc["mu0"] is None
    assert main([*args, "--mu0", "0.2", "--long-only"]) == 3


def test_betas(tmp_path: Path, model_c: RiskModel) -> None:
    output = tmp_path / "betas.csv"
    args = ["betas", "-i", model_file(tmp_path, model_c), "-o", str(output), "--top", "2"]
    assert main([*args, "--lambda", "0.4"]) == 0
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["label", "beta"]
    assert len(frame) == 2
    assert frame["beta"].is_monotonic_decreasing


def test_decompose(tmp_path: Path, model_c: RiskModel, capsys: pytest.CaptureFixture[str]) -> None:
    output = tmp_path / "decompose.json"
    args = ["decompose", "-i", model_file(tmp_path, model_c), "-o", str(output)]
    assert main([*args, "--lambda", "0.4"]) == 0
    doc = json.loads(output.read_text(encoding="utf-8"))
    np.testing.assert_allclose(doc["alphas"], [0.063, 1.565, -0.628], atol=2e-2)
    assert doc["convex"] is False
    assert doc["funds"]["maxmu"] == [0.0, 0.0, 1.0]
    assert "affine but not convex" in capsys.readouterr().out


def test_scan(tmp_path: Path, model_c: RiskModel) -> None:
    output = tmp_path / "scan.csv"
    assert main(["scan", "-i", model_file(tmp_path, model_c), "-o", str(output)]) == 0
    frame = pd.read_csv(output)
    assert len(frame) == 21
    assert frame.loc[frame["lambda"] == 0.4, "convex"].item() == 0


def test_check_random_model(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    report = tmp_path / "check.txt"
    args = ["check", "-i", model_file(tmp_path, random_model(3, 4)), "-o", str(report)]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("OK")
    assert "Analytic curves: skipped" in out
    assert report.read_text(encoding="utf-8") == out


def test_check_reports_hull_exit(tmp_path: Path, model_c: RiskModel) -> None:
    report = tmp_path / "check.txt"
    assert main(["check", "-i", model_file(tmp_path, model_c), "-o", str(report)]) == 0
    text = report.read_text(encoding="utf-8")
    assert "negative alphas at lambda = " in text
    assert "0.4" in text.split("negative alphas at lambda = ")[1].splitlines()[0]
    assert "VIOLATION" not in text


def test_check_proportional_model(tmp_path: Path, model_a: RiskModel) -> None:
    report = tmp_path / "check.txt"
    assert main(["check", "-i", model_file(tmp_path, model_a), "-o", str(report)]) == 0
    text = report.read_text(encoding="utf-8")
    assert "Separation scan: skipped" in text
    assert "Analytic curves: max identity residual" in text
