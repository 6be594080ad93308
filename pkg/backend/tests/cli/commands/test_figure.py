from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from g3m.main import app
from g3m.models import EtaRow, WeightRow
from g3m.utils import read_rows


def run(runner: CliRunner, *args: str) -> pd.DataFrame:
    result = runner.invoke(app, ["figure", *args])
    assert result.exit_code == 0, result.output
    return pd.read_csv(StringIO(result.stdout))


def test_eta_figure(runner: CliRunner) -> None:
    frame = run(runner, "eta")
    assert list(frame.columns) == ["panel", "w", "rho_or_sigma", "eta"]
    assert set(frame["panel"]) == {"rho", "sigma"}
    assert len(frame) == 2 * 5 * 21
    assert (frame.loc[frame["w"].isin([0.0, 1.0]), "eta"] == 0.0).all()
    assert (frame["eta"] <= 1e-15).all()
    half = frame[(frame["panel"] == "rho") & (frame["w"] == 0.5) & (frame["rho_or_sigma"] == 0.0)]
    assert half["eta"].iloc[0] == pytest.approx(-0.01625, abs=1e-12)


def test_weights_figure(runner: CliRunner) -> None:
    frame = run(runner, "weights")
    assert list(frame.columns) == ["x", "tau", "w"]
    assert len(frame) == 21 * 4
    np.testing.assert_allclose(frame.loc[frame["x"] == 100.0, "w"], 0.5, atol=1e-12)
    assert frame["w"].between(0.0, 1.0).all()


def test_figure_grid_from_config(runner: CliRunner, tmp_path: Path) -> None:
    config = tmp_path / "figure.toml"
    config.write_text('[figure.weights]\nx_grid = [90, 100]\ntau_grid = ["1/2"]\n')
    out = tmp_path / "weights.csv"
    result = runner.invoke(app, ["figure", "weights", "-c", str(config), "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame["x"]) == [90.0, 100.0]
    assert list(frame["tau"]) == [0.5, 0.5]


def test_figure_output_from_config(runner: CliRunner, tmp_path: Path) -> None:
    out = tmp_path / "eta.csv"
    config = tmp_path / "figure.toml"
    config.write_text(f'output = "{out.as_posix()}"\n\n[figure.eta]\nw_grid = [0, 0.5, 1]\n')
    result = runner.invoke(app, ["figure", "eta", "-c", str(config)])
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(out)) == 2 * 5 * 3


def test_unknown_figure(runner: CliRunner) -> None:
    result = runner.invoke(app, ["figure", "gamma"])
    assert result.exit_code == 2


def test_figure_validation_error(runner: CliRunner, tmp_path: Path) -> None:
    config = tmp_path / "figure.toml"
    config.write_text("[figure.eta]\nsigma_a = -1\n")
    result = runner.invoke(app, ["figure", "eta", "-c", str(config)])
    assert result.exit_code == 2
    assert "figure.eta.sigma_a:" in result.output

    config.write_text("[figure.eta]\nrho_grid = [1.5]\n")
    result = runner.invoke(app, ["figure", "eta", "-c", str(config)])
    assert result.exit_code == 2
    assert "error:" in result.output


def test_figure_rows_read_back(runner: CliRunner) -> None:
    eta = runner.invoke(app, ["figure", "eta"])
    assert eta.exit_code == 0, eta.output
    rows = read_rows(eta.stdout, EtaRow)
    assert len(rows) == 2 * 5 * 21
    assert all(isinstance(row, EtaRow) for row in rows)

    weights = runner.invoke(app, ["figure", "weights"])
    assert weights.exit_code == 0, weights.output
    back = [WeightRow.model_validate(row) for row in read_rows(weights.stdout, WeightRow)]
    assert len(back) == 21 * 4
    assert all(0.0 <= row.w <= 1.0 for row in back)
