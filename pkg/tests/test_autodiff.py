import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchylab.autodiff import (Jet2, JetLossTerm, NonFiniteJetError,
                                ValueLossTerm, jet_apply, jet_eval,
                                jet_eval_batch, jet_forward, loss_param_grad,
                                value_forward)
from cauchylab.mlp import MlpParams, eval_batch, glorot_init

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)


@given(finite, finite, finite, finite, finite, finite, finite, finite)
def test_jet_addition_componentwise(a, b, c, d, e, f, g, h):
    lhs = Jet2(a, b, c, d) + Jet2(e, f, g, h)
    assert lhs.as_tuple() == (a + e, b + f, c + g, d + h)


@given(finite, finite, finite, finite)
def test_jet_scalar_product_scales_all_components(v, dx, dt, dxx):
    j = 3.0 * Jet2(v, dx, dt, dxx)
    assert j.as_tuple() == (3 * v, 3 * dx, 3 * dt, 3 * dxx)


def test_jet_product_rule_matches_polynomial():
    # (x + 2t)(x^2): seed x-jet at x=1.5, t=0.25
    x = Jet2(1.5, dx=1.0)
    t = Jet2(0.25, dt=1.0)
    p = (x + 2.0 * t) * (x * x)
    xv, tv = 1.5, 0.25
    assert p.val == pytest.approx((xv + 2 * tv) * xv ** 2)
    assert p.dx == pytest.approx(3 * xv ** 2 + 4 * tv * xv)
    assert p.dt == pytest.approx(2 * xv ** 2)
    assert p.dxx == pytest.approx(6 * xv + 4 * tv)


def test_jet_apply_chain_rule_on_sin():
    j = Jet2(0.7, dx=2.0, dt=-1.0, dxx=0.5)
    out = jet_apply(j, math.sin, math.cos, lambda z: -math.sin(z))
    s, c = math.sin(0.7), math.cos(0.7)
    assert out.val == pytest.approx(s)
    assert out.dx == pytest.approx(c * 2.0)
    assert out.dt == pytest.approx(c * -1.0)
    assert out.dxx == pytest.approx(-s * 4.0 + c * 0.5)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid", "relu"])
def test_network_value_agrees_with_jet_value_bitwise(activation):
    """Plain evaluation and jet evaluation share the affine path, so the
    values must match exactly, not merely to rounding."""
    params = glorot_init((2, 7, 5, 1), activation, seed=3)
    pts = np.column_stack([np.linspace(-1, 1, 17),
                           np.linspace(0, 1, 17)])
    vals = eval_batch(params, pts)
    jets, _ = jet_forward(params, pts)
    assert np.array_equal(vals, jets.val)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
def test_jet_derivatives_match_finite_differences(activation):
    params = glorot_init((2, 8, 8, 1), activation, seed=11)
    x0, t0, h = 0.3, 0.4, 1e-5
    j = jet_eval(params, x0, t0)

    def u(x, t):
        return eval_batch(params, np.array([[x, t]]))[0]

    assert j.dx == pytest.approx((u(x0 + h, t0) - u(x0 - h, t0)) / (2 * h),
                                 rel=1e-6, abs=1e-8)
    assert j.dt == pytest.approx((u(x0, t0 + h) - u(x0, t0 - h)) / (2 * h),
                                 rel=1e-6, abs=1e-8)
    assert j.dxx == pytest.approx(
        (u(x0 + h, t0) - 2 * u(x0, t0) + u(x0 - h, t0)) / h ** 2,
        rel=1e-4, abs=1e-6)


def test_relu_second_derivative_is_zero_off_the_kinks():
    params = glorot_init((2, 6, 1), "relu", seed=5)
    jets, _ = jet_forward(params, np.array([[0.37, 0.21], [-0.8, 0.9]]))
    assert np.all(jets.dxx == 0.0)


def test_jet_eval_batch_broadcasts():
    params = glorot_init((2, 4, 1), "tanh", seed=0)
    xs = np.linspace(-1, 1, 5)
    out = jet_eval_batch(params, xs, 0.5)
    assert out.val.shape == (5,)
    single = jet_eval(params, float(xs[2]), 0.5)
    # batched matmul may accumulate in a different order, so compare to
    # rounding rather than bitwise
    assert out.row(2).as_tuple() == pytest.approx(single.as_tuple(),
                                                  rel=1e-14, abs=1e-15)


def test_nonfinite_input_raises():
    params = glorot_init((2, 4, 1), "tanh", seed=0)
    with pytest.raises(NonFiniteJetError):
        jet_eval(params, float("nan"), 0.5)


def _quadratic_loss_terms(points):
    def seeds(pts, jets):
        value = float(np.mean(jets.dx ** 2))
        gx = 2.0 * jets.dx / len(pts)
        z = np.zeros_like(gx)
        return value, (z, gx, z, z)

    return [JetLossTerm(points, seeds)]


def test_loss_param_grad_matches_directional_difference():
    params = glorot_init((2, 5, 1), "tanh", seed=9)
    pts = np.column_stack([np.linspace(-0.9, 0.9, 7),
                           np.linspace(0.1, 0.9, 7)])
    terms = _quadratic_loss_terms(pts)
    total, grad = loss_param_grad(params, terms)
    rng = np.random.default_rng(1)
    direction = rng.normal(size=params.n_params)
    direction /= np.linalg.norm(direction)
    h = 1e-6

    def value_at(vec):
        p = params.with_flat(vec)
        jets, _ = jet_forward(p, pts)
        return float(np.mean(jets.dx ** 2))

    theta = params.flat()
    fd = (value_at(theta + h * direction)
          - value_at(theta - h * direction)) / (2 * h)
    assert grad.flat() @ direction == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_value_loss_term_gradient_runs_through_value_path():
    params = glorot_init((2, 5, 1), "sigmoid", seed=2)
    pts = np.array([[0.1, 0.0], [0.5, 0.0]])
    target = np.array([0.3, -0.2])

    def seeds(p, vals):
        d = vals - target
        return float(d @ d), 2.0 * d

    total, grad = loss_param_grad(params, [ValueLossTerm(pts, seeds)])
    vals, _ = value_forward(params, pts)
    assert total == pytest.approx(float((vals - target) @ (vals - target)))
    assert np.all(np.isfinite(grad.flat()))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_grad_accumulation_is_order_stable(seed):
    """Two identical terms give exactly twice the one-term gradient;
    fixed reduction order keeps this bitwise."""
    params = glorot_init((2, 4, 1), "tanh", seed=seed)
    pts = np.array([[0.2, 0.3], [-0.4, 0.8], [0.9, 0.1]])
    terms = _quadratic_loss_terms(pts)
    _, g1 = loss_param_grad(params, terms)
    _, g2 = loss_param_grad(params, terms + terms)
    assert np.array_equal(2.0 * g1.flat(), g2.flat())
