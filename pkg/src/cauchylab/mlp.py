"""Fully connected networks as plain numpy parameter records.

The container is deliberately dumb: a tuple of weight matrices and bias
vectors plus an activation tag.  Everything that differentiates networks
lives in `autodiff`; this module only knows how to build, evaluate, and
serialize them.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ACTIVATIONS",
    "MlpParams",
    "glorot_init",
    "eval_batch",
    "mlp_eval",
    "sigmoid_box_network",
    "relu_interval_network",
    "DyadicSpike",
    "dyadic_spike",
    "save_mlp",
    "load_mlp",
]


# --- activations -----------------------------------------------------------

@dataclass(frozen=True)
class Activation:
    name: str
    # stack(z, upto) returns [f(z), f'(z), ..., f^(upto)(z)]
    stack: Callable[[np.ndarray, int], list[np.ndarray]]


def _sigmoid_stack(z: np.ndarray, upto: int) -> list[np.ndarray]:
    from scipy.special import expit

    s = expit(z)
    out = [s]
    if upto >= 1:
        d1 = s * (1.0 - s)
        out.append(d1)
    if upto >= 2:
        d2 = d1 * (1.0 - 2.0 * s)
        out.append(d2)
    if upto >= 3:
        out.append(d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1)
    return out


def _tanh_stack(z: np.ndarray, upto: int) -> list[np.ndarray]:
    t = np.tanh(z)
    out = [t]
    if upto >= 1:
        d1 = 1.0 - t * t
        out.append(d1)
    if upto >= 2:
        d2 = -2.0 * t * d1
        out.append(d2)
    if upto >= 3:
        out.append(-2.0 * (d1 * d1 + t * d2))
    return out


def _relu_stack(z: np.ndarray, upto: int) -> list[np.ndarray]:
    # Subgradient at the kink is 0; all higher derivatives are 0 everywhere.
    out = [np.maximum(z, 0.0)]
    if upto >= 1:
        out.append((z > 0.0).astype(np.float64))
    for _ in range(2, upto + 1):
        out.append(np.zeros_like(np.asarray(z, dtype=np.float64)))
    return out


ACTIVATIONS: dict[str, Activation] = {
    "sigmoid": Activation("sigmoid", _sigmoid_stack),
    "tanh": Activation("tanh", _tanh_stack),
    "relu": Activation("relu", _relu_stack),
}


# --- parameter record ------------------------------------------------------

@dataclass(frozen=True)
class MlpParams:
    """Weights, biases, and activation tag of one fully connected network.

    weights[k] has shape (fan_out, fan_in); biases[k] has shape (fan_out,).
    The final layer is linear unless `output_activation` is set.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str
    output_activation: bool = False

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and congruent")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {k}: shape mismatch {w.shape} vs {b.shape}")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: fan_in does not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: non-finite parameter")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        """Parameters as one vector, layer by layer, weights before bias."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        """New record with the same shape, parameters taken from `vec`."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vec.shape}")
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[k:k + w.size].reshape(w.shape).copy())
            k += w.size
            bs.append(vec[k:k + b.size].copy())
            k += b.size
        return MlpParams(tuple(ws), tuple(bs), self.activation, self.output_activation)

    def max_abs_param(self) -> float:
        return max(max(np.abs(w).max(), np.abs(b).max() if b.size else 0.0)
                   for w, b in zip(self.weights, self.biases))


def glorot_init(sizes: Sequence[int], activation: str, seed: int,
                output_activation: bool = False) -> MlpParams:
    """Uniform Glorot weights, zero biases, deterministic per seed."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"bad layer sizes {sizes!r}")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MlpParams(tuple(ws), tuple(bs), activation, output_activation)


# --- evaluation ------------------------------------------------------------

def eval_batch(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """Forward pass for a batch of rows; returns shape (n,) for scalar output."""
    a = np.asarray(inputs, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] != params.sizes[0]:
        raise ValueError(f"expected input dim {params.sizes[0]}, got {a.shape[1]}")
    act = ACTIVATIONS[params.activation]
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w.T + b
        if k < last or params.output_activation:
            a = act.stack(a, 0)[0]
    return a[:, 0] if a.shape[1] == 1 else a


def mlp_eval(params: MlpParams, x: float, t: float | None = None) -> float:
    """Scalar evaluation; pass t only for networks with 2-D input."""
    row = [x] if t is None else [x, t]
    return float(eval_batch(params, np.array([row]))[0])


# --- sharp indicator constructions ----------------------------------------

def sigmoid_box_network(n: float, box: Sequence[tuple[float, float]] = ((0.0, 1.0),)
                        ) -> MlpParams:
    """Sigmoid network that sharpens to the indicator of a box as n grows.

    Two hidden units per coordinate detect the two faces; the output unit
    fires only when all 2d detectors agree.  All weight magnitudes are O(n),
    which is the point: sharp steps force large parameters.
    """
    d = len(box)
    w1 = np.zeros((2 * d, d))
    b1 = np.zeros(2 * d)
    for i, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise ValueError(f"degenerate box side {lo}, {hi}")
        w1[2 * i, i] = n
        b1[2 * i] = -n * lo
        w1[2 * i + 1, i] = -n
        b1[2 * i + 1] = n * hi
    w2 = np.full((1, 2 * d), float(n))
    b2 = np.array([-n * (d + 0.5)])
    return MlpParams((w1, w2), (b1, b2), "sigmoid", output_activation=True)


def relu_interval_network(n: float, lo: float = 0.0, hi: float = 1.0) -> MlpParams:
    """ReLU network that sharpens to the indicator of [lo, hi] as n grows.

    Four first-layer ramps form two unit plateaus (right of lo, left of hi);
    the output unit rescales relu(y - 2 + 1/n) by n so the plateau value is
    exactly 1.  Outside a 1/(2n) collar the output is exactly 0.
    """
    if not lo < hi:
        raise ValueError(f"degenerate interval {lo}, {hi}")
    w1 = np.array([[n], [n], [-n], [-n]], dtype=np.float64)
    b1 = np.array([-n * lo + 0.5, -n * lo - 0.5, n * hi + 0.5, n * hi - 0.5])
    w2 = np.array([[n, -n, n, -n]], dtype=np.float64)
    b2 = np.array([-2.0 * n + 1.0])
    return MlpParams((w1, w2), (b1, b2), "relu", output_activation=True)


# --- spike family ----------------------------------------------------------

@dataclass(frozen=True)
class DyadicSpike:
    """Unit-norm indicator spike on the dyadic interval (1 - 2^(1-n), 1 - 2^-n).

    The supports for different n are pairwise disjoint, so every pair sits
    at L2 distance sqrt(2): an isometric copy of an infinite discrete set
    inside the unit sphere of L2(0, 1).
    """

    n: int

    @property
    def lo(self) -> float:
        return 1.0 - 2.0 ** (1 - self.n)

    @property
    def hi(self) -> float:
        return 1.0 - 2.0 ** (-self.n)

    @property
    def height(self) -> float:
        # |support| = 2^-n, so unit L2 norm needs height 2^(n/2)
        return 2.0 ** (self.n / 2.0)

    def sample(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return np.where((xs > self.lo) & (xs < self.hi), self.height, 0.0)

    def norm(self) -> float:
        """Exact L2(0, 1) norm by interval arithmetic."""
        return math.sqrt(self.height ** 2 * (self.hi - self.lo))

    def distance(self, other: "DyadicSpike") -> float:
        """Exact L2(0, 1) distance; sqrt(2) for distinct n."""
        if self.n == other.n:
            return 0.0
        return math.sqrt(self.height ** 2 * (self.hi - self.lo)
                         + other.height ** 2 * (other.hi - other.lo))


def dyadic_spike(n: int) -> DyadicSpike:
    if n < 1:
        raise ValueError("spike index must be >= 1")
    return DyadicSpike(n)


# --- checkpoint io ---------------------------------------------------------

_FORMAT = "cauchylab-mlp"
_VERSION = 1


def save_mlp(params: MlpParams, path) -> None:
    """Versioned JSON checkpoint; parameters as little-endian f64, base64."""
    flat = params.flat().astype("<f8")
    rec = {
        "format": _FORMAT,
        "version": _VERSION,
        "sizes": list(params.sizes),
        "activation": params.activation,
        "output_activation": params.output_activation,
        "params_b64": base64.b64encode(flat.tobytes()).decode("ascii"),
    }
    with open(path, "w") as fh:
        json.dump(rec, fh)
        fh.write("\n")


def load_mlp(path) -> MlpParams:
    with open(path) as fh:
        rec = json.load(fh)
    if rec.get("format") != _FORMAT:
        raise ValueError(f"not a {_FORMAT} checkpoint: {path}")
    if rec.get("version") != _VERSION:
        raise ValueError(f"unsupported checkpoint version {rec.get('version')!r}")
    sizes = [int(s) for s in rec["sizes"]]
    flat = np.frombuffer(base64.b64decode(rec["params_b64"]), dtype="<f8")
    flat = flat.astype(np.float64)
    template = _zeros_like_arch(sizes, rec["activation"], bool(rec["output_activation"]))
    if flat.size != template.n_params:
        raise ValueError("checkpoint parameter count does not match sizes")
    return template.with_flat(flat)


def _zeros_like_arch(sizes: Sequence[int], activation: str,
                     output_activation: bool) -> MlpParams:
    ws = tuple(np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:]))
    bs = tuple(np.zeros(o) for o in sizes[1:])
    return MlpParams(ws, bs, activation, output_activation)
