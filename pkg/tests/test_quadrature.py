import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchylab.quadrature import (composite_nodes, gauss_legendre,
                                  graded_edges, integrate)


def test_gauss_legendre_weights_sum_to_interval():
    z, w = gauss_legendre(12)
    assert np.sum(w) == pytest.approx(2.0, abs=1e-14)
    assert np.all((z > -1.0) & (z < 1.0))


def test_polynomial_exactness():
    # an n-node rule integrates degree 2n-1 exactly
    z, w = gauss_legendre(5)
    for k in range(10):
        exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
        assert w @ z ** k == pytest.approx(exact, abs=1e-13)


def test_integrate_matches_closed_forms():
    assert integrate(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1.0,
                                                        abs=1e-12)
    assert integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_composite_nodes_reject_bad_edges():
    with pytest.raises(ValueError):
        composite_nodes([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        composite_nodes([1.0])


def test_composite_nodes_cover_each_panel():
    xs, ws = composite_nodes([0.0, 0.25, 1.0], nodes_per_panel=4)
    assert len(xs) == 8
    assert np.sum(ws) == pytest.approx(1.0, abs=1e-14)
    assert np.all((xs > 0.0) & (xs < 1.0))


def test_graded_edges_refine_toward_the_target():
    edges = graded_edges(-1.0, 1.0, refine_at=(0.0,), finest=1e-6)
    gaps = np.diff(edges)
    assert np.all(gaps > 0.0)
    at = np.searchsorted(edges, 0.0)
    assert gaps[max(at - 1, 0)] <= 4e-6
    assert edges[0] == -1.0 and edges[-1] == 1.0


def test_graded_edges_resolve_a_boundary_layer():
    """Integrating a sharp sigmoid derivative with graded panels hits the
    closed form; uniform panels at the same budget do not."""
    w = 1e5

    def f(x):
        s = 1.0 / (1.0 + np.exp(np.clip(-w * x, -700, 700)))
        return w * s * (1.0 - s)

    edges = graded_edges(-1.0, 1.0, refine_at=(0.0,), finest=1e-9)
    xs, ws = composite_nodes(edges, 12)
    val = ws @ f(xs)
    # sigma(w) - sigma(-w) with tails below 1e-300 at this sharpness
    assert val == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-0.9, max_value=0.9),
       st.integers(min_value=2, max_value=6))
def test_integral_is_additive_over_a_split(c, panels):
    def f(x):
        return np.cos(3.0 * x) + x ** 2

    whole = integrate(f, -1.0, 1.0, panels=2 * panels)
    left = integrate(f, -1.0, c, panels=panels)
    right = integrate(f, c, 1.0, panels=panels)
    assert whole == pytest.approx(left + right, abs=1e-12)
