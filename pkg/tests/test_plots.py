import warnings

import pytest

from cauchylab import experiments as ex
from cauchylab.plots import emit_plots


def _tiny_a_report():
    return ex.ExperimentReport(
        "A",
        metrics={},
        series={
            "family_loss": {"a": [0.0, 1.0], "loss": [0.0, 0.0]},
            "pairwise": {"a": [1.0], "b": [0.0], "distance": [0.4]},
        },
        verdicts=[], provenance={})


def test_plots_are_written_and_deterministic(tmp_path):
    report = _tiny_a_report()
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    files1 = emit_plots(report, d1)
    files2 = emit_plots(report, d2)
    assert [f.name for f in files1] == [f.name for f in files2]
    assert len(files1) == 2
    for f1, f2 in zip(files1, files2):
        assert f1.read_bytes() == f2.read_bytes()
        assert b"<svg" in f1.read_bytes()


def test_empty_series_produce_no_files(tmp_path):
    report = ex.ExperimentReport("A", {}, {}, [], {})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        files = emit_plots(report, tmp_path)
    assert files == []


def test_missing_series_warn_but_do_not_fail(tmp_path):
    report = ex.ExperimentReport(
        "B", {}, {"loss": {"step": [0, 1], "total": [1.0, 0.5],
                           "residual": [0.5, 0.2], "initial": [0.5, 0.3]}},
        [], {})
    with pytest.warns(UserWarning):
        files = emit_plots(report, tmp_path)
    assert [f.name for f in files] == ["b_loss.svg"]


def test_unknown_experiment_id_warns(tmp_path):
    report = ex.ExperimentReport("Q", {}, {}, [], {})
    with pytest.warns(UserWarning):
        assert emit_plots(report, tmp_path) == []


def test_d2_scaling_plot_per_precision_row(tmp_path):
    report = ex.ExperimentReport(
        "D2", {},
        {"cells": {"bits": [10, 10, 20, 20], "dx": [0.1, 0.02, 0.1, 0.02],
                   "error": [0.3, 0.13, 0.2, 0.09],
                   "prediction": [0.4, 0.18, 0.25, 0.11]}},
        [], {})
    files = emit_plots(report, tmp_path)
    assert sorted(f.name for f in files) == ["d2_scaling_p10.svg",
                                             "d2_scaling_p20.svg"]
