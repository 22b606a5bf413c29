"""Acceptance suite: eight numbered criteria, one summary line each.

Every criterion re-runs its full experiment at production settings and
checks the stated tolerances; the terminal summary section lists one
PASS or FAIL line per criterion. Criterion 6 is honestly red: in five
coarse-spacing cells the stalled error lands just below half the
closed-form floor prediction, which drags two column exponents past
their tolerance as well. Those eight checks are marked strict-xfail so
a change in the pattern fails loudly either way, and the summary test
pins the red set exactly.

Criteria 7 and 8 reuse the on-disk reference cache under cache/ at the
repo root; the first cold run pays for two long spectral solves, so the
wall-clock budget of criterion 8 is only enforced when the cache was
already warm (the shipped workflow, see README).
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from cauchylab import experiments as ex
from cauchylab import reference as ref
from cauchylab.problems import make_burgers, make_transport

pytestmark = pytest.mark.acceptance

REPO_ROOT = Path(__file__).resolve().parent.parent
CACHE_DIR = REPO_ROOT / "cache"


def _record(pytestconfig, num: int, name: str, ok: bool, detail: str):
    line = f"criterion {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    pytestconfig.acceptance_lines.append(line)
    print(line)


def _claims(report) -> dict:
    return {v.claim: v for v in report.verdicts}


# ---------------------------------------------------------------------------
# 1: parameter gradients match finite differences


def test_criterion_1_gradients_match_finite_differences(pytestconfig):
    t0 = time.perf_counter()
    out = ex.gradient_fidelity()
    elapsed = time.perf_counter() - t0
    ok = out["max_rel_dev"] < 1e-4 and elapsed < 60.0
    _record(pytestconfig, 1, "gradients match finite differences", ok,
            f"max rel dev {out['max_rel_dev']:.2e} < 1e-4 over "
            f"{out['n_per_activation']} configs per activation, "
            f"{elapsed:.0f}s < 60s")
    assert out["max_rel_dev"] < 1e-4
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 2: distinct solutions of the squared-gradient problem, all at zero loss

# closed-form pairwise distances, frozen from a standalone derivation
ORACLE_PAIR_DIST = {
    (0.5, 0.0): 0.07216878364870322,
    (1.0, 0.0): 0.40824829046386313,
    (2.0, 0.0): 2.23606797749979,
    (1.0, 0.5): 0.3461093276215865,
    (2.0, 0.5): 2.185415673657226,
    (2.0, 1.0): 1.8708286933869707,
}


def test_criterion_2_zero_loss_family_stays_separated(pytestconfig):
    report = ex.run_exp_a()
    pair = report.series["pairwise"]
    gaps = [abs(d - ORACLE_PAIR_DIST[(a, b)])
            for a, b, d in zip(pair["a"], pair["b"], pair["distance"])]
    ok = (report.passed and report.metrics["max_loss"] < 1e-10
          and min(pair["distance"]) > 0.01 and max(gaps) < 1e-6)
    _record(pytestconfig, 2, "zero-loss family stays separated", ok,
            f"max loss {report.metrics['max_loss']:.2e} < 1e-10, "
            f"min pairwise L2 {min(pair['distance']):.4g} > 0.01, "
            f"oracle gap {max(gaps):.2e} < 1e-6")
    assert report.passed
    assert report.metrics["max_loss"] < 1e-10
    assert min(pair["distance"]) > 0.01
    assert max(gaps) < 1e-6


# ---------------------------------------------------------------------------
# 3: the interior error of a trained transport network is an inflow trace


def test_criterion_3_transport_error_rides_the_characteristics(pytestconfig):
    t0 = time.perf_counter()
    report = ex.run_exp_b()
    elapsed = time.perf_counter() - t0
    m = report.metrics
    budget = m["wall_trace_l2"] * 0.05 + m["slack"]
    ok = (report.passed and m["msr"] < 1e-5 and m["gap"] <= budget
          and m["drift_excess"] <= 0.0 and elapsed < 600.0)
    _record(pytestconfig, 3, "transport error rides the characteristics",
            ok, f"mean squared residual {m['msr']:.2e} < 1e-5, trace gap "
            f"{m['gap']:.2e} <= {budget:.2e}, drift excess "
            f"{m['drift_excess']:.1e} <= 0, {elapsed:.0f}s < 600s")
    assert report.passed
    assert m["msr"] < 1e-5
    assert m["gap"] <= budget
    assert m["drift_excess"] <= 0.0
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 4: mass far outside the window moves the heat solution inside it


def test_criterion_4_far_mass_moves_the_heat_solution(pytestconfig):
    t0 = time.perf_counter()
    report = ex.run_exp_c()
    elapsed = time.perf_counter() - t0
    m = report.metrics
    sep = report.series["separation"]
    ic_exact = _claims(report)["initial data agree exactly on the window"]
    ok = (report.passed and m["max_residual"] < 1e-4 and ic_exact.passed
          and m["largest_separation"] > 1.0 and elapsed < 60.0)
    _record(pytestconfig, 4, "far mass moves the heat solution", ok,
            f"max FD residual {m['max_residual']:.2e} < 1e-4, separation "
            f"linear to {report.provenance['config']['linearity_tol']:g} "
            f"relative, {m['largest_separation']:.3g} > 1 at amplitude "
            f"{sep['amplitude'][-1]:g}, {elapsed:.0f}s < 60s")
    assert report.passed
    assert m["max_residual"] < 1e-4
    assert ic_exact.passed
    assert m["largest_separation"] > 1.0
    assert sep["amplitude"] == [0.0, 1.0, 2.0, 4.0, 8.0]
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 5: step constructions sharpen as promised and spikes stay orthogonal


def test_criterion_5_step_fits_sharpen_and_spikes_separate(pytestconfig):
    report = ex.run_exp_d1()
    errs = report.series["errors"]
    dec_sig = all(b < a for a, b in zip(errs["sigmoid"], errs["sigmoid"][1:]))
    dec_relu = all(b < a for a, b in zip(errs["relu"], errs["relu"][1:]))
    m = report.metrics
    ok = (report.passed and dec_sig and dec_relu
          and m["relu_error_at_largest"] < 0.05
          and m["spike_norm_gap"] < 1e-12 and m["spike_dist_gap"] < 1e-9)
    _record(pytestconfig, 5, "step fits sharpen, spikes stay apart", ok,
            f"errors strictly decreasing over n={errs['n']}, "
            f"pw-linear error {m['relu_error_at_largest']:.4g} < 0.05 at "
            f"n={errs['n'][-1]}, spike norm gap {m['spike_norm_gap']:.1e}, "
            f"distance gap {m['spike_dist_gap']:.1e}")
    assert report.passed
    assert errs["n"] == [10, 100, 1000]
    assert dec_sig and dec_relu
    assert m["relu_error_at_largest"] < 0.05
    assert m["spike_norm_gap"] < 1e-12
    assert m["spike_dist_gap"] < 1e-9


# ---------------------------------------------------------------------------
# 6: finite-precision error floor (honest red, pattern pinned below)

D2_BITS = (10, 20, 30, 40, 53)
D2_DXS = (0.1, 0.02, 0.004)

# cells where the stalled error sits just below half the predicted floor
D2_RATIO_FAILS = {(20, 0.1), (30, 0.1), (40, 0.1), (53, 0.1), (53, 0.02)}
# rows/columns whose fitted exponent those cells drag out of tolerance
D2_DX_SLOPE_FAILS = {10}
D2_EPS_SLOPE_FAILS = {0.02, 0.004}

_XFAIL_RATIO = pytest.mark.xfail(
    strict=True, reason="stalled error is just under half the closed-form "
    "prediction; the asymptotic model overshoots by ~2x in this regime")
_XFAIL_SLOPE = pytest.mark.xfail(
    strict=True, reason="fitted exponent dragged out of tolerance by the "
    "half-floor cells in this row or column")


@pytest.fixture(scope="session")
def d2_run():
    t0 = time.perf_counter()
    report = ex.run_exp_d2()
    return report, time.perf_counter() - t0


def test_criterion_6_stall_bound_holds_in_every_cell(d2_run):
    report, _ = d2_run
    claims = _claims(report)
    for b in D2_BITS:
        for dx in D2_DXS:
            v = claims[f"stop scale obeys the flush bound (p={b} dx={dx:g})"]
            assert v.passed, v.line()


@pytest.mark.parametrize(
    "bits,dx",
    [pytest.param(b, d, marks=(_XFAIL_RATIO,) if (b, d) in D2_RATIO_FAILS
                  else ())
     for b in D2_BITS for d in D2_DXS])
def test_criterion_6_error_lands_within_2x_of_prediction(d2_run, bits, dx):
    report, _ = d2_run
    v = _claims(report)[
        f"achieved error within 2x of the predicted floor (p={bits} dx={dx:g})"]
    assert v.passed, v.line()


@pytest.mark.parametrize(
    "bits",
    [pytest.param(b, marks=(_XFAIL_SLOPE,) if b in D2_DX_SLOPE_FAILS else ())
     for b in D2_BITS])
def test_criterion_6_error_scales_as_sqrt_dx(d2_run, bits):
    report, _ = d2_run
    v = _claims(report)[f"error scales like sqrt(grid spacing) at p={bits}"]
    assert v.passed, v.line()


@pytest.mark.parametrize(
    "dx",
    [pytest.param(d, marks=(_XFAIL_SLOPE,) if d in D2_EPS_SLOPE_FAILS else ())
     for d in D2_DXS])
def test_criterion_6_error_scales_as_inverse_sqrt_bits(d2_run, dx):
    report, _ = d2_run
    v = _claims(report)[
        f"error scales like 1/sqrt(precision bits) at dx={dx:g}"]
    assert v.passed, v.line()


def test_criterion_6_red_set_matches_the_analysis(d2_run, pytestconfig):
    """The failing checks are exactly the analyzed ones, nothing drifted."""
    report, elapsed = d2_run
    failed = {v.claim for v in report.verdicts if not v.passed}
    expected = (
        {f"achieved error within 2x of the predicted floor "
         f"(p={b} dx={d:g})" for b, d in D2_RATIO_FAILS}
        | {f"error scales like sqrt(grid spacing) at p={b}"
           for b in D2_DX_SLOPE_FAILS}
        | {f"error scales like 1/sqrt(precision bits) at dx={d:g}"
           for d in D2_EPS_SLOPE_FAILS})
    _record(pytestconfig, 6, "finite-precision error floor", False,
            f"honest red: {len(failed)} of {len(report.verdicts)} checks "
            f"out of tolerance, exactly the analyzed set; stall bound holds "
            f"in all 15 cells; {elapsed:.0f}s < 600s")
    assert failed == expected
    assert report.metrics["n_inconclusive"] == 0
    assert report.metrics["max_quad_vs_exact"] < 1e-12
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 7: the viscous shock defeats physics training at the desk scale


@pytest.fixture(scope="session")
def e_run():
    t0 = time.perf_counter()
    report = ex.run_exp_e(ex.ExpEConfig(cache_dir=str(CACHE_DIR)))
    return report, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_7_shock_defeats_physics_training(e_run, pytestconfig):
    report, elapsed = e_run
    m = report.metrics
    ok = (report.passed and m["adam_slope"] < 20.0 and m["ref_slope"] > 100.0
          and m["ratio"] >= 5.0 and m["data_abs_l2"] > 1e-3
          and m["sgd_rel_l2"] > 0.1 and elapsed < 3600.0)
    _record(pytestconfig, 7, "viscous shock defeats physics training", ok,
            f"trained end-slope {m['adam_slope']:.3g} < 20 vs reference "
            f"{m['ref_slope']:.3g} > 100, sample fit {m['ratio']:.2g}x "
            f"closer (abs {m['data_abs_l2']:.2e} > 1e-3), plain descent "
            f"rel L2 {m['sgd_rel_l2']:.3g} > 0.1, {elapsed:.0f}s < 3600s")
    assert report.passed
    assert m["adam_slope"] < 20.0
    assert m["ref_slope"] > 100.0
    assert m["ratio"] >= 5.0
    assert m["data_abs_l2"] > 1e-3
    assert m["sgd_rel_l2"] > 0.1
    assert elapsed < 3600.0


# ---------------------------------------------------------------------------
# 8: the reference solvers validate themselves


@pytest.mark.slow
def test_criterion_8_reference_solvers_validate_themselves(pytestconfig):
    problem = make_burgers()
    warm = all(
        (CACHE_DIR / f"{ref.solver_cache_key(p)}.npz").exists()
        for p in ({"problem": problem.key_dict(), "modes": m, "dt": 5e-5,
                   "x_stride_out": s} for m, s in ((8192, 2), (16384, 4))))
    t0 = time.perf_counter()
    doubling = ref.burgers_mode_doubling(problem, cache_dir=CACHE_DIR)

    s = 1.0

    def gauss(x):
        return np.exp(-x ** 2 / (2 * s ** 2)) / math.sqrt(2 * math.pi * s * s)

    xs = np.linspace(-1.0, 1.0, 41)
    ts = np.array([0.25, 0.5, 1.0])
    field = ref.solve_heat_kernel(gauss, xs, ts, radius=40.0)
    var = s * s + 2.0 * ts[None, :]
    exact = np.exp(-xs[:, None] ** 2 / (2 * var)) / np.sqrt(
        2 * math.pi * var)
    heat_gap = float(np.max(np.abs(field.values - exact)))

    transport = make_transport()
    worst = 0.0
    for x0 in np.linspace(-1.0, -0.1, 7):
        u0 = transport.initial(np.array([x0]))[0]
        for t in np.linspace(0.0, 1.0, 9):
            u = ref.solve_transport_exact(
                transport, np.array([x0 + t]), np.array([t])).values[0, 0]
            worst = max(worst, abs(u - u0))
    elapsed = time.perf_counter() - t0

    ok = (doubling["error"] < 1e-6 and heat_gap < 1e-8 and worst < 1e-12
          and (not warm or elapsed < 300.0))
    _record(pytestconfig, 8, "reference solvers validate themselves", ok,
            f"mode-doubling rel gap {doubling['error']:.2e} < 1e-6, heat "
            f"vs evolved Gaussian {heat_gap:.2e} < 1e-8, transport "
            f"constancy {worst:.1e} < 1e-12, {elapsed:.0f}s "
            f"({'warm cache, < 300s' if warm else 'cold cache'})")
    assert doubling["error"] < 1e-6
    assert heat_gap < 1e-8
    assert worst < 1e-12
    if warm:
        assert elapsed < 300.0
