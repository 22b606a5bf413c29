"""Driver-level checks that run in seconds.

Frozen constants here were produced by independent oracle scripts
(piecewise closed forms, graded quadrature) before the drivers were
written; the drivers must land on them, not the other way round.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchylab import experiments as ex


# --- report plumbing -------------------------------------------------------


def test_verdict_line_format():
    v = ex.Verdict("loss is tiny", "< 1e-10", 3.0e-12, "1e-10", True)
    line = v.line()
    assert line.startswith("[PASS] loss is tiny:")
    assert "predicted" in line and "measured" in line and "tolerance" in line
    assert ex.Verdict("x", 1, 2, "t", False).line().startswith("[FAIL]")


def test_report_json_roundtrip(tmp_path):
    report = ex.ExperimentReport(
        "A", {"m": 1.5}, {"s": {"x": [1, 2], "y": [3.0, 4.0]}},
        [ex.Verdict("c", 0.0, 0.0, "0", True)], {"config": {"nx": 3}})
    path = tmp_path / "report.json"
    report.to_json(path)
    back = ex.ExperimentReport.from_json(path)
    assert back.exp_id == "A"
    assert back.metrics == report.metrics
    assert back.series == report.series
    assert back.verdicts == report.verdicts
    assert back.passed
    # a second write of the same content is byte-identical
    text = path.read_text()
    back.to_json(path)
    assert path.read_text() == text


def test_fit_loglog_slope_recovers_a_power_law():
    xs = [0.1, 0.02, 0.004]
    ys = [7.0 * x ** 0.5 for x in xs]
    assert ex.fit_loglog_slope(xs, ys) == pytest.approx(0.5, abs=1e-12)


def test_unknown_experiment_is_rejected():
    with pytest.raises(ValueError):
        ex.run_experiment("Z")


# --- kink-avoiding grid ----------------------------------------------------


def test_kink_avoiding_grid_stays_off_the_ridge_lines():
    """Ridge kinks of the zero-loss family sit at x = 0 and |x| = a t;
    for rational a and t those columns are rational, and the irrational
    offset keeps every grid point strictly away."""
    nx, nt = 201, 101
    xs = ex.kink_avoiding_xs(nx)
    ts = np.linspace(0.0, 1.0, nt)
    worst = np.inf
    for a in (0.5, 1.0, 2.0):
        for t in ts:
            for kink in (0.0, a * t, -a * t):
                worst = min(worst, float(np.min(np.abs(xs - kink))))
    assert worst > 1e-6
    assert xs[0] > -1.0 and xs[-1] < 1.0


# --- precision-floor closed forms ------------------------------------------


def test_step_fit_error_closed_form_values():
    # frozen from direct evaluation of the stable form; the second value
    # is the p = 53, dx = 0.01 stop scale, approximately 0.0307
    assert ex.step_fit_error_exact(10.0) == pytest.approx(
        0.1965437251755603, abs=1e-12)
    assert ex.floor_prediction(3604.0) == pytest.approx(
        0.030652786658711403, abs=1e-12)


def test_prediction_approaches_the_large_w_asymptote():
    w = 1e8
    asym = math.sqrt((2 * math.log(2.0) + 2.0) / w)
    assert ex.floor_prediction(w) == pytest.approx(asym, rel=1e-6)


def test_closed_form_matches_quadrature():
    for w in (5.0, 40.0, 300.0):
        assert ex.step_fit_error_quad(w) == pytest.approx(
            ex.step_fit_error_exact(w), abs=1e-10)


def test_closed_form_survives_huge_arguments():
    # the naive bracket overflows near w = 700
    assert math.isfinite(ex.step_fit_error_exact(1e6))
    assert math.isfinite(ex.floor_prediction(1e6))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=6, max_value=53),
       st.sampled_from([0.1, 0.05, 0.02, 0.01, 0.004]))
def test_flush_scale_oracle_respects_the_printed_bound(bits, dx):
    w = ex.predicted_flush_w(bits, dx)
    assert w <= (bits - 1) * math.log(2.0) / dx + 1e-6


def test_flush_scale_is_monotone_in_precision():
    ws = [ex.predicted_flush_w(p, 0.1) for p in (10, 20, 30, 40, 53)]
    assert all(a < b for a, b in zip(ws, ws[1:]))


def test_floor_cell_runs_and_halts_quickly_at_low_precision():
    cell = ex.run_floor_cell(8, 0.1)
    assert cell["halted"]
    assert cell["w_stop"] <= 7 * math.log(2.0) / 0.1
    assert cell["error"] > 0.0
    assert cell["error"] == pytest.approx(cell["error_exact"], abs=1e-10)


# --- gradient fidelity -----------------------------------------------------


def test_gradient_fidelity_reports_small_deviation():
    out = ex.gradient_fidelity(n_per_activation=6, seed=123)
    assert out["max_rel_dev"] < 1e-4
    assert set(out["by_activation"]) == {"tanh", "sigmoid", "relu"}


# --- tiny driver runs ------------------------------------------------------


def test_exp_a_report_shape():
    report = ex.run_exp_a()
    assert report.exp_id == "A"
    assert len(report.verdicts) == 10
    assert report.passed
    assert report.metrics["max_loss"] == 0.0
    assert report.provenance["config"]["nx"] == 201


def test_exp_d1_with_reduced_sharpness_grid():
    cfg = ex.ExpD1Config(ns=(10, 100), spike_ns=(1, 2, 3))
    report = ex.run_exp_d1(cfg)
    errors = report.series["errors"]
    assert errors["sigmoid"][1] < errors["sigmoid"][0]
    assert errors["relu"][1] < errors["relu"][0]
    # closed-form law for the piecewise-linear fit: e^2 = 1/n - 4/(3 n^2)
    for n, e in zip(cfg.ns, errors["relu"]):
        law = math.sqrt(1.0 / n - 4.0 / (3.0 * n * n))
        assert e == pytest.approx(law, abs=1e-12)


def test_exp_d2_single_cell_sweep_structure():
    cfg = ex.ExpD2Config(bits=(8,), dxs=(0.1,))
    report = ex.run_exp_d2(cfg)
    cells = report.series["cells"]
    assert len(cells["bits"]) == 1
    assert report.metrics["n_cells"] == 1
    assert report.metrics["n_inconclusive"] == 0
    # single-point axes cannot give slopes, so only the two cell verdicts
    assert len(report.verdicts) == 2
