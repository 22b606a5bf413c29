"""Cauchy problems on a space-time strip, phrased for residual training.

Each problem bundles a domain, an initial condition, and a residual form
R(u) such that the PDE is  u_t + R-terms = 0  in the quadratic-loss sense.
Residual forms expose both values and partial derivatives with respect to
the jet components (val, dx, dt, dxx); that is all the trainer needs to
seed reverse mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Jet2

__all__ = [
    "Domain",
    "SmoothFn",
    "sin_half_wave",
    "zero_fn",
    "smooth_bump",
    "ResidualForm",
    "CauchyProblem",
    "make_transport",
    "make_hamilton_jacobi",
    "make_heat",
    "make_burgers",
    "CollocationSpec",
    "CollocationSet",
    "sample_collocation",
    "exact_solution_cases",
]

DEFAULT_XLO, DEFAULT_XHI, DEFAULT_T = -1.0, 1.0, 1.0


@dataclass(frozen=True)
class Domain:
    x_lo: float = DEFAULT_XLO
    x_hi: float = DEFAULT_XHI
    t_end: float = DEFAULT_T

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.t_end > 0):
            raise ValueError(f"degenerate domain {self}")

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def volume(self) -> float:
        return self.width * self.t_end

    def contains(self, x, t) -> np.ndarray:
        return ((self.x_lo <= np.asarray(x)) & (np.asarray(x) <= self.x_hi)
                & (0.0 <= np.asarray(t)) & (np.asarray(t) <= self.t_end))


@dataclass(frozen=True)
class SmoothFn:
    """A scalar function with optional first and second derivatives."""

    label: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray] | None = None
    d2f: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=np.float64))


def sin_half_wave() -> SmoothFn:
    """sin(pi x / 2): odd, 4-periodic, the stock initial profile."""
    w = math.pi / 2.0
    return SmoothFn("sin_half_wave",
                    lambda x: np.sin(w * x),
                    lambda x: w * np.cos(w * x),
                    lambda x: -w * w * np.sin(w * x))


def zero_fn() -> SmoothFn:
    return SmoothFn("zero",
                    lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
                    lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
                    lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)))


def smooth_bump(center: float = 0.0, halfwidth: float = 0.8,
                amplitude: float = 1.0) -> SmoothFn:
    """C-infinity bump exp(1 - 1/(1 - y^2)), y = (x - center)/halfwidth.

    Compactly supported on [center - halfwidth, center + halfwidth], peak
    value `amplitude` at the center.
    """
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")

    def f(x):
        y = (np.asarray(x, dtype=np.float64) - center) / halfwidth
        out = np.zeros_like(y)
        inside = np.abs(y) < 1.0
        yi = y[inside]
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - yi * yi))
        return out

    label = f"bump(c={center},h={halfwidth},a={amplitude})"
    return SmoothFn(label, f)


@dataclass(frozen=True)
class ResidualForm:
    """Residual r = dt + <terms>; `kind` selects the algebraic shape."""

    kind: str
    coeffs: tuple[float, ...] = ()

    def values(self, val, dx, dt, dxx):
        if self.kind == "transport":
            b, c = self.coeffs
            return dt + b * dx - c
        if self.kind == "hamilton_jacobi":
            return dt + dx * dx
        if self.kind == "heat":
            return dt - dxx
        if self.kind == "burgers":
            mu, nu = self.coeffs
            return dt + mu * val * dx - nu * dxx
        raise ValueError(f"unknown residual form {self.kind!r}")

    def partials(self, val, dx, dt, dxx):
        """d(residual)/d(val, dx, dt, dxx), broadcastable with the inputs."""
        one = np.ones_like(np.asarray(dt, dtype=np.float64))
        zero = np.zeros_like(one)
        if self.kind == "transport":
            b, _ = self.coeffs
            return zero, b * one, one, zero
        if self.kind == "hamilton_jacobi":
            return zero, 2.0 * dx, one, zero
        if self.kind == "heat":
            return zero, zero, one, -one
        if self.kind == "burgers":
            mu, nu = self.coeffs
            return mu * dx, mu * val, one, -nu * one
        raise ValueError(f"unknown residual form {self.kind!r}")


@dataclass(frozen=True)
class CauchyProblem:
    name: str
    form: ResidualForm
    initial: SmoothFn
    domain: Domain = field(default_factory=Domain)

    def residual(self, x: float, t: float, jet: Jet2) -> float:
        return float(self.form.values(jet.val, jet.dx, jet.dt, jet.dxx))

    def residual_batch(self, jets) -> np.ndarray:
        return self.form.values(jets.val, jets.dx, jets.dt, jets.dxx)

    def key_dict(self) -> dict:
        """Stable description used for cache keys and provenance."""
        return {
            "name": self.name,
            "form": self.form.kind,
            "coeffs": list(self.form.coeffs),
            "initial": self.initial.label,
            "domain": [self.domain.x_lo, self.domain.x_hi, self.domain.t_end],
        }


def make_transport(b: float = 1.0, c: float = 0.0,
                   initial: SmoothFn | None = None,
                   domain: Domain | None = None) -> CauchyProblem:
    """u_t + b u_x = c with constant coefficients."""
    return CauchyProblem("transport", ResidualForm("transport", (b, c)),
                         initial or sin_half_wave(), domain or Domain())


def make_hamilton_jacobi(initial: SmoothFn | None = None,
                         domain: Domain | None = None) -> CauchyProblem:
    """u_t + u_x^2 = 0; the zero initial condition admits a fan of weak solutions."""
    return CauchyProblem("hamilton_jacobi", ResidualForm("hamilton_jacobi"),
                         initial or zero_fn(), domain or Domain())


def make_heat(initial: SmoothFn | None = None,
              domain: Domain | None = None) -> CauchyProblem:
    """u_t = u_xx."""
    return CauchyProblem("heat", ResidualForm("heat"),
                         initial or smooth_bump(), domain or Domain())


def make_burgers(mu: float = -1.0, nu: float = 1e-3,
                 initial: SmoothFn | None = None,
                 domain: Domain | None = None) -> CauchyProblem:
    """u_t + mu u u_x = nu u_xx; defaults steepen into a shock at x = 0."""
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    return CauchyProblem("burgers", ResidualForm("burgers", (mu, nu)),
                         initial or sin_half_wave(), domain or Domain())


# --- collocation -----------------------------------------------------------

@dataclass(frozen=True)
class CollocationSpec:
    n_interior: int = 2048
    n_initial: int = 256
    scheme: str = "uniform"  # "uniform" or "grid"
    seed: int = 0
    nx: int | None = None    # grid scheme only
    nt: int | None = None


@dataclass(frozen=True)
class CollocationSet:
    interior: np.ndarray   # (n, 2) rows of (x, t)
    initial: np.ndarray    # (m,) x locations on the t = 0 axis
    scheme: str
    seed: int | None


def sample_collocation(domain: Domain, spec: CollocationSpec) -> CollocationSet:
    """Deterministic collocation points inside the strip plus a t=0 set."""
    if spec.scheme == "uniform":
        rng = np.random.default_rng(spec.seed)
        xs = rng.uniform(domain.x_lo, domain.x_hi, spec.n_interior)
        ts = rng.uniform(0.0, domain.t_end, spec.n_interior)
        x0 = rng.uniform(domain.x_lo, domain.x_hi, spec.n_initial)
        return CollocationSet(np.column_stack([xs, ts]), np.sort(x0),
                              "uniform", spec.seed)
    if spec.scheme == "grid":
        nx = spec.nx or max(2, int(round(math.sqrt(spec.n_interior * 2))))
        nt = spec.nt or max(2, int(math.ceil(spec.n_interior / nx)))
        xs = np.linspace(domain.x_lo, domain.x_hi, nx)
        ts = np.linspace(0.0, domain.t_end, nt)
        gx, gt = np.meshgrid(xs, ts, indexing="ij")
        x0 = np.linspace(domain.x_lo, domain.x_hi, spec.n_initial)
        return CollocationSet(np.column_stack([gx.ravel(), gt.ravel()]), x0,
                              "grid", None)
    raise ValueError(f"unknown collocation scheme {spec.scheme!r}")


# --- registered exact solutions -------------------------------------------

def exact_solution_cases() -> list[tuple[str, CauchyProblem, Callable]]:
    """(name, problem, jet closure) triples with residual identically zero.

    The closures return component arrays (val, dx, dt, dxx) so the residual
    form can be checked pointwise without any network in the loop.
    """
    cases = []

    b, c = 1.0, 0.0
    transport = make_transport(b, c)
    w = math.pi / 2.0

    def transport_jet(x, t, b=b, c=c, w=w):
        z = np.asarray(x) - b * np.asarray(t)
        return (np.sin(w * z) + c * np.asarray(t), w * np.cos(w * z),
                -b * w * np.cos(w * z) + c, -w * w * np.sin(w * z))

    cases.append(("transport_sin", transport, transport_jet))

    heat = make_heat()
    zeros = lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
    ones = lambda x: np.ones_like(np.asarray(x, dtype=np.float64))
    cases.append(("heat_const", heat,
                  lambda x, t: (ones(x), zeros(x), zeros(x), zeros(x))))
    cases.append(("heat_linear", heat,
                  lambda x, t: (np.asarray(x, dtype=np.float64), ones(x),
                                zeros(x), zeros(x))))
    cases.append(("heat_parabolic", heat,
                  lambda x, t: (np.asarray(x) ** 2 + 2.0 * np.asarray(t),
                                2.0 * np.asarray(x, dtype=np.float64),
                                2.0 * ones(x), 2.0 * ones(x))))

    hj = make_hamilton_jacobi()
    cases.append(("hamilton_jacobi_zero", hj,
                  lambda x, t: (zeros(x), zeros(x), zeros(x), zeros(x))))
    return cases
