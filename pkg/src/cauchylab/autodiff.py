"""Second-order forward jets through MLPs, and reverse mode over them.

A jet carries (val, dx, dt, dxx): value, first derivatives in the two
inputs, and the pure second x-derivative.  That is exactly what the
residuals of first-order-in-time problems need; no t-t derivative is
carried.  Propagation through an activation g uses

    g(j).val = g(v)
    g(j).dx  = g'(v) jx          (same for dt)
    g(j).dxx = g''(v) jx^2 + g'(v) jxx

Parameter gradients of losses built from jet components are obtained by
reverse mode over the recorded jet forward pass.  Backward through an
activation therefore needs g''' wherever the loss touches dxx.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mlp import ACTIVATIONS, MlpParams

__all__ = [
    "Jet2",
    "jet_apply",
    "JetBatch",
    "ParamGrad",
    "NonFiniteJetError",
    "NonFiniteGradientError",
    "jet_eval",
    "jet_eval_batch",
    "value_forward",
    "value_backward",
    "jet_forward",
    "jet_backward",
    "JetLossTerm",
    "ValueLossTerm",
    "loss_param_grad",
    "per_sample_value_grads",
]


class NonFiniteJetError(ValueError):
    """A jet component overflowed; carries the offending input point."""

    def __init__(self, x: float, t: float):
        self.point = (x, t)
        super().__init__(f"non-finite jet at (x, t) = ({x}, {t})")


class NonFiniteGradientError(ValueError):
    """A parameter-gradient block overflowed; carries the layer index."""

    def __init__(self, layer: int):
        self.layer = layer
        super().__init__(f"non-finite gradient in layer {layer}")


# --- scalar jets -----------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    val: float
    dx: float = 0.0
    dt: float = 0.0
    dxx: float = 0.0

    def __add__(self, other):
        o = _as_jet(other)
        return Jet2(self.val + o.val, self.dx + o.dx, self.dt + o.dt, self.dxx + o.dxx)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, -self.dx, -self.dt, -self.dxx)

    def __sub__(self, other):
        return self + (-_as_jet(other))

    def __rsub__(self, other):
        return (-self) + _as_jet(other)

    def __mul__(self, other):
        o = _as_jet(other)
        return Jet2(
            self.val * o.val,
            self.dx * o.val + self.val * o.dx,
            self.dt * o.val + self.val * o.dt,
            self.dxx * o.val + 2.0 * self.dx * o.dx + self.val * o.dxx,
        )

    __rmul__ = __mul__

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.val, self.dx, self.dt, self.dxx)


def _as_jet(v) -> Jet2:
    if isinstance(v, Jet2):
        return v
    if isinstance(v, (int, float, np.floating)):
        return Jet2(float(v))
    raise TypeError(f"cannot treat {type(v).__name__} as a jet")


def jet_apply(j: Jet2, f: Callable[[float], float], d1: Callable[[float], float],
              d2: Callable[[float], float]) -> Jet2:
    """Compose a scalar function onto a jet by the chain rule."""
    fv, f1, f2 = f(j.val), d1(j.val), d2(j.val)
    return Jet2(fv, f1 * j.dx, f1 * j.dt, f2 * j.dx * j.dx + f1 * j.dxx)


# --- batched jets ----------------------------------------------------------

@dataclass
class JetBatch:
    """Component arrays of shape (n,) or (n, width)."""

    val: np.ndarray
    dx: np.ndarray
    dt: np.ndarray
    dxx: np.ndarray

    def row(self, i: int) -> Jet2:
        return Jet2(float(self.val[i]), float(self.dx[i]),
                    float(self.dt[i]), float(self.dxx[i]))


@dataclass
class ParamGrad:
    """Per-layer gradient blocks congruent with an MlpParams record."""

    d_weights: tuple[np.ndarray, ...]
    d_biases: tuple[np.ndarray, ...]

    def flat(self) -> np.ndarray:
        parts = []
        for dw, db in zip(self.d_weights, self.d_biases):
            parts.append(dw.ravel())
            parts.append(db)
        return np.concatenate(parts)

    def check_finite(self) -> "ParamGrad":
        for k, (dw, db) in enumerate(zip(self.d_weights, self.d_biases)):
            if not (np.isfinite(dw).all() and np.isfinite(db).all()):
                raise NonFiniteGradientError(k)
        return self

    @staticmethod
    def zeros_like(params: MlpParams) -> "ParamGrad":
        return ParamGrad(tuple(np.zeros_like(w) for w in params.weights),
                         tuple(np.zeros_like(b) for b in params.biases))

    def add_(self, other: "ParamGrad") -> "ParamGrad":
        for dw, odw in zip(self.d_weights, other.d_weights):
            dw += odw
        for db, odb in zip(self.d_biases, other.d_biases):
            db += odb
        return self


# --- plain value pass ------------------------------------------------------

def value_forward(params: MlpParams, inputs: np.ndarray):
    """Forward pass caching what backward needs.  Returns (out (n,), cache)."""
    a = np.asarray(inputs, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    act = ACTIVATIONS[params.activation]
    last = params.n_layers - 1
    inputs_per_layer, d1_per_layer = [], []
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs_per_layer.append(a)
        z = a @ w.T + b
        if k < last or params.output_activation:
            f, d1 = act.stack(z, 1)
            a = f
            d1_per_layer.append(d1)
        else:
            a = z
            d1_per_layer.append(None)
    cache = (inputs_per_layer, d1_per_layer)
    return a[:, 0], cache


def value_backward(params: MlpParams, cache, seed: np.ndarray) -> ParamGrad:
    """Reverse pass from d(loss)/d(output), seed shape (n,)."""
    inputs_per_layer, d1_per_layer = cache
    g = np.asarray(seed, dtype=np.float64)[:, None]
    dws: list[np.ndarray | None] = [None] * params.n_layers
    dbs: list[np.ndarray | None] = [None] * params.n_layers
    for k in range(params.n_layers - 1, -1, -1):
        if d1_per_layer[k] is not None:
            g = g * d1_per_layer[k]
        a_in = inputs_per_layer[k]
        dws[k] = g.T @ a_in
        dbs[k] = g.sum(axis=0)
        if k > 0:
            g = g @ params.weights[k]
    return ParamGrad(tuple(dws), tuple(dbs)).check_finite()


# --- jet pass --------------------------------------------------------------

def jet_forward(params: MlpParams, points: np.ndarray):
    """Propagate (val, dx, dt, dxx) jets through the network.

    points has shape (n, 2) holding (x, t) rows; the network must take 2-D
    input.  Returns (JetBatch of shape (n,), cache).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("jet evaluation expects (n, 2) input points")
    if params.sizes[0] != 2:
        raise ValueError("jet evaluation needs a network with 2-D input")
    n = pts.shape[0]
    v = pts.copy()
    jx = np.tile(np.array([[1.0, 0.0]]), (n, 1))
    jt = np.tile(np.array([[0.0, 1.0]]), (n, 1))
    jxx = np.zeros((n, 2))

    act = ACTIVATIONS[params.activation]
    last = params.n_layers - 1
    layer_caches = []
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        a_in = (v, jx, jt, jxx)
        v = v @ w.T + b
        jx = jx @ w.T
        jt = jt @ w.T
        jxx = jxx @ w.T
        if k < last or params.output_activation:
            f, d1, d2, d3 = act.stack(v, 3)
            pre = (v, jx, jt, jxx)
            v = f
            jx = d1 * jx
            jt = d1 * jt
            jxx = d2 * pre[1] * pre[1] + d1 * pre[3]
            layer_caches.append((a_in, pre, (d1, d2, d3)))
        else:
            layer_caches.append((a_in, None, None))
    out = JetBatch(v[:, 0], jx[:, 0], jt[:, 0], jxx[:, 0])
    return out, (pts, layer_caches)


def jet_backward(params: MlpParams, cache, seeds) -> ParamGrad:
    """Reverse mode over the jet forward pass.

    seeds = (gv, gx, gt, gxx), each shape (n,): derivatives of the loss with
    respect to the output jet components.
    """
    _, layer_caches = cache
    gv, gx, gt, gxx = (np.asarray(s, dtype=np.float64)[:, None] for s in seeds)
    dws: list[np.ndarray | None] = [None] * params.n_layers
    dbs: list[np.ndarray | None] = [None] * params.n_layers
    for k in range(params.n_layers - 1, -1, -1):
        a_in, pre, derivs = layer_caches[k]
        if pre is not None:
            zv, zx, zt, zxx = pre
            d1, d2, d3 = derivs
            n_gv = gv * d1 + gx * d2 * zx + gt * d2 * zt + gxx * (d3 * zx * zx + d2 * zxx)
            n_gx = gx * d1 + gxx * (2.0 * d2 * zx)
            n_gt = gt * d1
            n_gxx = gxx * d1
            gv, gx, gt, gxx = n_gv, n_gx, n_gt, n_gxx
        av, ax, at, axx = a_in
        w = params.weights[k]
        dws[k] = gv.T @ av + gx.T @ ax + gt.T @ at + gxx.T @ axx
        dbs[k] = gv.sum(axis=0)
        if k > 0:
            gv = gv @ w
            gx = gx @ w
            gt = gt @ w
            gxx = gxx @ w
    return ParamGrad(tuple(dws), tuple(dbs)).check_finite()


def jet_eval(params: MlpParams, x: float, t: float) -> Jet2:
    """Network value and derivatives at one point."""
    out, _ = jet_forward(params, np.array([[x, t]]))
    j = out.row(0)
    if not all(np.isfinite(j.as_tuple())):
        raise NonFiniteJetError(x, t)
    return j


def jet_eval_batch(params: MlpParams, xs: np.ndarray, ts: np.ndarray) -> JetBatch:
    pts = np.column_stack([np.broadcast_to(xs, np.broadcast_shapes(np.shape(xs), np.shape(ts))).ravel(),
                           np.broadcast_to(ts, np.broadcast_shapes(np.shape(xs), np.shape(ts))).ravel()])
    out, _ = jet_forward(params, pts)
    return out


# --- loss gradients --------------------------------------------------------

@dataclass(frozen=True)
class JetLossTerm:
    """Loss contribution that reads jet components at interior points.

    `seeds(points, jets)` returns (term value, (gv, gx, gt, gxx)).
    """

    points: np.ndarray
    seeds: Callable[[np.ndarray, JetBatch], tuple[float, tuple]]


@dataclass(frozen=True)
class ValueLossTerm:
    """Loss contribution that reads plain network values.

    `seeds(points, values)` returns (term value, gv).
    """

    points: np.ndarray
    seeds: Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def loss_param_grad(params: MlpParams, terms: Sequence[JetLossTerm | ValueLossTerm]
                    ) -> tuple[float, ParamGrad]:
    """Total loss and its parameter gradient, accumulated in term order."""
    total = 0.0
    grad = ParamGrad.zeros_like(params)
    for term in terms:
        if isinstance(term, JetLossTerm):
            jets, cache = jet_forward(params, term.points)
            if not (np.isfinite(jets.val).all() and np.isfinite(jets.dx).all()
                    and np.isfinite(jets.dt).all() and np.isfinite(jets.dxx).all()):
                bad = np.argmax(~(np.isfinite(jets.val) & np.isfinite(jets.dx)
                                  & np.isfinite(jets.dt) & np.isfinite(jets.dxx)))
                raise NonFiniteJetError(*term.points[bad])
            value, seeds = term.seeds(term.points, jets)
            grad.add_(jet_backward(params, cache, seeds))
        else:
            vals, cache = value_forward(params, term.points)
            value, gv = term.seeds(term.points, vals)
            grad.add_(value_backward(params, cache, gv))
        total += value
    return total, grad.check_finite()


def per_sample_value_grads(params: MlpParams, inputs: np.ndarray,
                           seed_rows: np.ndarray) -> np.ndarray:
    """Rows of d(seeded output)/d(theta), one per sample: shape (n, n_params).

    Used by precision simulation, which flushes gradients sample by sample
    before they are averaged.  Memory is n * n_params, so callers keep the
    networks small.
    """
    a = np.asarray(inputs, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    n = a.shape[0]
    if n * params.n_params > 50_000_000:
        raise ValueError("per-sample gradient matrix would be too large")
    _, cache = value_forward(params, a)
    inputs_per_layer, d1_per_layer = cache
    g = np.asarray(seed_rows, dtype=np.float64)[:, None]
    blocks: list[np.ndarray | None] = [None] * (2 * params.n_layers)
    for k in range(params.n_layers - 1, -1, -1):
        if d1_per_layer[k] is not None:
            g = g * d1_per_layer[k]
        a_in = inputs_per_layer[k]
        dw_rows = np.einsum("no,ni->noi", g, a_in).reshape(n, -1)
        blocks[2 * k] = dw_rows
        blocks[2 * k + 1] = g.copy()
        if k > 0:
            g = g @ params.weights[k]
    return np.concatenate(blocks, axis=1)
