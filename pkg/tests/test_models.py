import logging

import numpy as np
import pytest
from pydantic import ValidationError

from mppi.config import Settings
from mppi.logger import logger, set_level
from mppi.models import (BenchRow, HalfLine, IterationRecord, MaxStrategy, MinStrategy, SolveOptions,
                         SolveReport)


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv("MPPI_EPS_G", "1e-8")
    monkeypatch.setenv("MPPI_SOLVER", "sor")
    monkeypatch.setenv("MPPI_LOG_LEVEL", "debug")
    s = Settings()
    assert s.eps_g == 1e-8
    assert s.solver == "sor"
    assert s.log_level == "DEBUG"


@pytest.mark.parametrize("name, value", [
    ("MPPI_LOG_LEVEL", "chatty"),
    ("MPPI_SOR_OMEGA", "2.5"),
    ("MPPI_EPS_ETA", "0"),
    ("MPPI_SOLVER", "cg"),
])
def test_settings_rejects_bad_env(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValidationError):
        Settings()


def test_set_level():
    before = logger.level
    try:
        set_level("warning")
        assert logger.level == logging.WARNING or any(isinstance(h, logging.FileHandler) for h in logger.handlers)
    finally:
        set_level(logging.getLevelName(before))


def test_halfline_validation():
    hl = HalfLine(eta=[1, 2], v=[0.5, 0.0])
    assert hl.n == 2
    np.testing.assert_allclose(hl.at(2.0), [2.5, 4.0])
    with pytest.raises(ValueError):
        hl.eta[0] = 3.0
    with pytest.raises(ValidationError):
        HalfLine(eta=[1.0], v=[0.0, 0.0])
    with pytest.raises(ValidationError):
        HalfLine(eta=[np.inf], v=[0.0])


def test_strategies():
    sigma = MinStrategy(actions=[1, 0, 2])
    assert sigma.as_tuple() == (1, 0, 2)
    assert sigma == MinStrategy(actions=(1, 0, 2))
    assert sigma != MaxStrategy(actions=[1, 0, 2])
    assert len({sigma, MinStrategy(actions=[1, 0, 2])}) == 1
    with pytest.raises(ValidationError):
        MinStrategy(actions=[0, -1])
    with pytest.raises(ValidationError):
        MinStrategy(actions=[0.5])


def test_solve_options_overrides():
    opts = SolveOptions.from_settings(eps_g=1e-6, solver=None, strict_trace=True)
    assert opts.eps_g == 1e-6
    assert opts.solver == "lu"
    assert not opts.use_warm_start
    assert not opts.use_shortcut
    assert opts.linear().solver == opts.solver
    with pytest.raises(ValidationError):
        SolveOptions.from_settings(sor_omega=2.0)


def test_report_json_dict():
    trace = [
        IterationRecord(outer_index=0, inner_iterations=2, residual=1.0),
        IterationRecord(outer_index=1, inner_iterations=3, eta_change=0.0, residual=0.0,
                        degenerate=True, strongly_degenerate=True, critical_scc_count=2),
    ]
    report = SolveReport(halfline=HalfLine(eta=[0.0], v=[1.0]), sigma=MinStrategy(actions=[0]),
                         delta=MaxStrategy(actions=[0]), residual=0.0, trace=trace)
    data = report.to_json_dict()
    assert list(data)[:4] == ["eta", "v", "sigma", "delta"]
    assert data["iterations_outer"] == 2
    assert data["iterations_inner_total"] == 5
    assert data["degenerate"] == 1 and data["strongly_degenerate"] == 1
    assert data["trace"][1]["critical_scc_count"] == 2


def test_bench_row_csv():
    row = BenchRow(size=10, seed=3, iter_outer=4, iter_inner=9, degenerate=1,
                   strongly_degenerate=0, residual=0.0, seconds=0.25)
    assert len(row.to_csv_row()) == len(BenchRow.csv_fields)
    assert row.to_csv_row()[:2] == ["10", "3"]
    failed = BenchRow(size=10, seed=4, error="boom")
    assert failed.iter_outer == -1
