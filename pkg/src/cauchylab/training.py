"""Loss assembly, optimisers, and the deterministic training loop.

Losses are sums of labeled terms. Residual terms approximate the squared
L2 norm of the pointwise equation residual (domain volume times the mean
square over collocation points), initial terms the squared L2 misfit on
the initial axis (interval width times the mean square), data terms are a
plain mean squared error. The same config and seed reproduce training
bitwise: reductions run in a fixed order and nothing draws entropy at
step time.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import (JetLossTerm, NonFiniteGradientError, NonFiniteJetError,
                       ValueLossTerm, jet_forward, loss_param_grad,
                       per_sample_value_grads, value_forward)
from .mlp import MlpParams
from .problems import CauchyProblem, CollocationSet

__all__ = [
    "TrainConfig", "TrainLog", "LabeledTerm", "residual_term", "initial_term",
    "data_term", "pinn_terms", "loss_values", "mean_squared_residual",
    "train", "flush_small",
]


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    steps: int = 1000
    lambda_residual: float = 1.0
    lambda_initial: float = 1.0
    precision_bits: "int | None" = None
    seed: int = 0
    log_every: int = 100
    divergence_cap: float = 1e12
    batch_size: "int | None" = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ValueError("lr must be positive and finite")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if not (self.lambda_residual >= 0 and self.lambda_initial >= 0):
            raise ValueError("loss weights must be nonnegative")
        if self.precision_bits is not None and self.precision_bits < 2:
            raise ValueError("precision_bits must be at least 2")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


_LOG_COLUMNS = ("step", "loss_total", "loss_res", "loss_ic", "loss_data",
                "w_norm", "g_norm")


@dataclasses.dataclass
class TrainLog:
    """Per-logged-step series plus how the run ended."""

    steps: np.ndarray
    loss_total: np.ndarray
    loss_res: np.ndarray
    loss_ic: np.ndarray
    loss_data: np.ndarray
    w_norm: np.ndarray
    g_norm: np.ndarray
    halt_reason: str
    halt_step: int

    def to_csv(self, path: "str | Path") -> None:
        lines = [",".join(_LOG_COLUMNS)]
        for i in range(len(self.steps)):
            row = [str(int(self.steps[i]))]
            row += [f"{float(col[i])!r}" for col in
                    (self.loss_total, self.loss_res, self.loss_ic,
                     self.loss_data, self.w_norm, self.g_norm)]
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")

    def final_loss(self) -> float:
        return float(self.loss_total[-1])


@dataclasses.dataclass(frozen=True)
class LabeledTerm:
    """A loss term tagged for logging: residual, initial, or data.

    ``minibatch``, when set, builds the same term restricted to an index
    subset of its sample points; the training loop uses it when
    ``TrainConfig.batch_size`` is smaller than the term's point count.
    """

    label: str
    term: "JetLossTerm | ValueLossTerm"
    minibatch: "Callable[[np.ndarray], JetLossTerm | ValueLossTerm] | None" \
        = None

    def __post_init__(self) -> None:
        if self.label not in ("residual", "initial", "data"):
            raise ValueError(f"unknown term label {self.label!r}")


def residual_term(problem: CauchyProblem, points: np.ndarray,
                  weight: float = 1.0) -> LabeledTerm:
    """weight * vol(D) * mean of squared equation residual at the points."""
    points = np.asarray(points, dtype=np.float64)
    scale = weight * problem.domain.volume

    def seeds(pts: np.ndarray, jets) -> tuple[float, tuple[np.ndarray, ...]]:
        r = problem.form.values(jets.val, jets.dx, jets.dt, jets.dxx)
        value = scale * float(np.mean(r * r))
        rv, rx, rt, rxx = problem.form.partials(jets.val, jets.dx, jets.dt,
                                                jets.dxx)
        c = scale * 2.0 / len(r)
        return value, (c * r * rv, c * r * rx, c * r * rt, c * r * rxx)

    return LabeledTerm("residual", JetLossTerm(points, seeds))


def initial_term(problem: CauchyProblem, xs: np.ndarray,
                 weight: float = 1.0) -> LabeledTerm:
    """weight * width * mean squared misfit against the initial data at t=0."""
    xs = np.asarray(xs, dtype=np.float64)
    points = np.stack([xs, np.zeros_like(xs)], axis=1)
    target = np.asarray(problem.initial(xs), dtype=np.float64)
    scale = weight * problem.domain.width

    def seeds(pts: np.ndarray, vals: np.ndarray) -> tuple[float, np.ndarray]:
        d = vals - target
        value = scale * float(np.mean(d * d))
        return value, (scale * 2.0 / len(d)) * d

    return LabeledTerm("initial", ValueLossTerm(points, seeds))


def data_term(points: np.ndarray, targets: np.ndarray,
              weight: float = 1.0) -> LabeledTerm:
    """weight * mean squared misfit against given target values."""
    points = np.asarray(points, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(points) != len(targets):
        raise ValueError("points and targets disagree in length")

    def make(pts: np.ndarray, tgt: np.ndarray) -> ValueLossTerm:
        def seeds(_: np.ndarray, vals: np.ndarray
                  ) -> tuple[float, np.ndarray]:
            d = vals - tgt
            value = weight * float(np.mean(d * d))
            return value, (weight * 2.0 / len(d)) * d

        return ValueLossTerm(pts, seeds)

    return LabeledTerm("data", make(points, targets),
                       minibatch=lambda idx: make(points[idx], targets[idx]))


def pinn_terms(problem: CauchyProblem, colloc: CollocationSet,
               config: TrainConfig) -> list[LabeledTerm]:
    if config.lambda_residual == 0 and config.lambda_initial == 0:
        raise ValueError("at least one loss weight must be positive")
    return [residual_term(problem, colloc.interior, config.lambda_residual),
            initial_term(problem, colloc.initial, config.lambda_initial)]


def loss_values(params: MlpParams, terms: Sequence[LabeledTerm]
                ) -> dict[str, float]:
    """Evaluate the loss parts without gradients; also returns 'total'."""
    out = {"residual": 0.0, "initial": 0.0, "data": 0.0}
    for lt in terms:
        t = lt.term
        if isinstance(t, JetLossTerm):
            jets, _ = jet_forward(params, t.points)
            value, _ = t.seeds(t.points, jets)
        else:
            vals, _ = value_forward(params, t.points)
            value, _ = t.seeds(t.points, vals)
        out[lt.label] += float(value)
    out["total"] = out["residual"] + out["initial"] + out["data"]
    return out


def mean_squared_residual(params: MlpParams, problem: CauchyProblem,
                          points: np.ndarray) -> float:
    """Unweighted mean squared equation residual at the given points."""
    jets, _ = jet_forward(params, np.asarray(points, dtype=np.float64))
    r = problem.form.values(jets.val, jets.dx, jets.dt, jets.dxx)
    return float(np.mean(r * r))


# ---------------------------------------------------------------------------
# optimisers


class _Sgd:
    def __init__(self, lr: float) -> None:
        self.lr = lr

    def step(self, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
        return theta - self.lr * g


class _Adam:
    def __init__(self, lr: float, beta1: float, beta2: float, eps: float,
                 n: int) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        mh = self.m / (1.0 - self.beta1 ** self.t)
        vh = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.lr * mh / (np.sqrt(vh) + self.eps)


def _make_optimizer(config: TrainConfig, n_params: int):
    if config.optimizer == "sgd":
        return _Sgd(config.lr)
    return _Adam(config.lr, config.adam_beta1, config.adam_beta2,
                 config.adam_eps, n_params)


# ---------------------------------------------------------------------------
# flushed gradients


def flush_small(values: np.ndarray, bits: int,
                reference: float = 1.0) -> np.ndarray:
    """Zero every entry with magnitude below reference * 2**-bits.

    Models a p-bit mantissa relative to a reference magnitude: increments
    smaller than one ulp of the reference are lost. Idempotent, and the
    threshold halves for each extra bit.
    """
    if reference <= 0:
        raise ValueError("reference magnitude must be positive")
    thresh = reference * 2.0 ** (-bits)
    return np.where(np.abs(values) < thresh, 0.0, values)


def _flushed_gradient(params: MlpParams, terms: Sequence[LabeledTerm],
                      bits: int) -> tuple[dict[str, float], np.ndarray]:
    """Per-point gradients flushed below 2**-bits, then averaged.

    Every built-in term is a mean over its sample points, so scaling the
    aggregate value seeds by the point count recovers the per-point
    gradient rows the flush applies to. Jet-based terms are not supported
    here; flushed training targets plain data fits.
    """
    parts = {"residual": 0.0, "initial": 0.0, "data": 0.0}
    acc = np.zeros(params.n_params)
    for lt in terms:
        t = lt.term
        if not isinstance(t, ValueLossTerm):
            raise ValueError("flushed training supports value-based terms only")
        vals, _ = value_forward(params, t.points)
        value, gv = t.seeds(t.points, vals)
        parts[lt.label] += float(value)
        rows = per_sample_value_grads(params, t.points, gv * len(vals))
        acc += np.mean(flush_small(rows, bits), axis=0)
    parts["total"] = parts["residual"] + parts["initial"] + parts["data"]
    return parts, acc


# ---------------------------------------------------------------------------
# training loop


def train(params: MlpParams, terms: Sequence[LabeledTerm],
          config: TrainConfig,
          callback: "Callable[[int, dict, MlpParams], None] | None" = None,
          ) -> tuple[MlpParams, TrainLog]:
    """Run the optimiser; halts on divergence, non-finite values, or a
    fully flushed (all-zero) gradient in reduced-precision mode."""
    opt = _make_optimizer(config, params.n_params)
    rows: list[tuple[float, ...]] = []
    batch_rng = np.random.default_rng(config.seed)

    def step_terms() -> list:
        out = []
        for lt in terms:
            n = len(lt.term.points)
            if (config.batch_size is not None and lt.minibatch is not None
                    and config.batch_size < n):
                idx = batch_rng.choice(n, size=config.batch_size,
                                       replace=False)
                out.append(lt.minibatch(np.sort(idx)))
            else:
                out.append(lt.term)
        return out

    def log_row(step: int, parts: dict[str, float], theta: np.ndarray,
                g: np.ndarray) -> None:
        rows.append((step, parts["total"], parts["residual"],
                     parts["initial"], parts["data"],
                     float(np.linalg.norm(theta)), float(np.linalg.norm(g))))

    halt_reason = "completed"
    halt_step = config.steps
    theta = params.flat()
    step = 0
    while step < config.steps:
        parts = None
        try:
            if config.precision_bits is None:
                total, grad = loss_param_grad(params, step_terms())
                g = grad.flat()
            else:
                parts, g = _flushed_gradient(params, terms,
                                             config.precision_bits)
                total = parts["total"]
        except (NonFiniteJetError, NonFiniteGradientError):
            halt_reason = "nonfinite"
            halt_step = step
            break
        if not (math.isfinite(total) and np.all(np.isfinite(g))):
            halt_reason = "nonfinite"
            halt_step = step
            break
        diverged = total > config.divergence_cap
        flushed_out = config.precision_bits is not None and not np.any(g)
        if diverged or flushed_out or step % config.log_every == 0:
            if parts is None:
                parts = loss_values(params, terms)
            log_row(step, parts, theta, g)
            if callback is not None:
                callback(step, parts, params)
        if diverged:
            halt_reason = "diverged"
            halt_step = step
            break
        if flushed_out:
            halt_reason = "flushed_zero"
            halt_step = step
            break
        theta = opt.step(theta, g)
        params = params.with_flat(theta)
        step += 1

    if halt_reason == "completed":
        # g_norm is nan on the final row: no gradient is taken there
        parts = loss_values(params, terms)
        log_row(config.steps, parts, theta, np.full(1, np.nan))

    cols = list(zip(*rows)) if rows else [[] for _ in _LOG_COLUMNS]
    log = TrainLog(np.asarray(cols[0], dtype=np.int64),
                   *(np.asarray(c, dtype=np.float64) for c in cols[1:]),
                   halt_reason=halt_reason, halt_step=halt_step)
    return params, log
