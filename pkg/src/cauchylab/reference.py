"""Reference solutions: closed forms, heat-kernel quadrature, spectral Burgers.

Every solver returns a SolutionField (values on a tensor grid, x-major).
Fields round-trip through CSV (header ``x,t,u``, x outer loop) and through
compressed npz with grid metadata; expensive solves can be cached on disk
keyed by a content hash of the solver parameters.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .problems import CauchyProblem, Domain, SmoothFn
from .quadrature import composite_nodes

__all__ = [
    "SolutionField", "l2_field_error", "l2_field_norm", "field_from_fn",
    "write_field_csv", "read_field_csv", "solve_transport_exact",
    "CharacteristicFoot", "characteristic_foot", "hj_family",
    "hj_pairwise_distance", "hj_family_jet",
    "solve_heat_kernel", "heat_kernel", "heat_fd_residual",
    "BurgersRun", "solve_burgers_spectral", "solver_cache_key",
    "cache_load", "cache_store", "burgers_cached", "burgers_mode_doubling",
]


# ---------------------------------------------------------------------------
# field container


@dataclasses.dataclass(frozen=True)
class SolutionField:
    """Solution values on a tensor grid: values[i, j] = u(xs[i], ts[j])."""

    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=np.float64)
        ts = np.asarray(self.ts, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(xs), len(ts)):
            raise ValueError(f"values shape {vals.shape} does not match grid "
                             f"({len(xs)}, {len(ts)})")
        for g in (xs, ts):
            if len(g) > 1 and np.any(np.diff(g) <= 0):
                raise ValueError("grid axes must be strictly increasing")

    def slice_at(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[j] - t) > 1e-9:
            raise ValueError(f"t={t} not on the grid")
        return self.values[:, j]

    def same_grid(self, other: "SolutionField") -> bool:
        return (self.xs.shape == other.xs.shape
                and self.ts.shape == other.ts.shape
                and bool(np.array_equal(self.xs, other.xs))
                and bool(np.array_equal(self.ts, other.ts)))


def field_from_fn(fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  xs: np.ndarray, ts: np.ndarray) -> SolutionField:
    X, T = np.meshgrid(np.asarray(xs, dtype=np.float64),
                       np.asarray(ts, dtype=np.float64), indexing="ij")
    return SolutionField(np.asarray(xs), np.asarray(ts),
                         np.asarray(fn(X, T), dtype=np.float64))


def _trapezoid_weights(g: np.ndarray) -> np.ndarray:
    if len(g) == 1:
        return np.ones(1)
    w = np.zeros_like(g)
    d = np.diff(g)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def l2_field_error(field: SolutionField,
                   other: "SolutionField | Callable[[np.ndarray, np.ndarray], np.ndarray]",
                   ) -> float:
    """L2 norm over the grid rectangle of (field - other), trapezoid rule."""
    if isinstance(other, SolutionField):
        if not field.same_grid(other):
            raise ValueError("fields live on different grids")
        diff = field.values - other.values
    else:
        diff = field.values - field_from_fn(other, field.xs, field.ts).values
    wx = _trapezoid_weights(field.xs)
    wt = _trapezoid_weights(field.ts)
    return float(math.sqrt(max(wx @ (diff * diff) @ wt, 0.0)))


def l2_field_norm(field: SolutionField) -> float:
    return l2_field_error(field, lambda x, t: np.zeros_like(x))


# ---------------------------------------------------------------------------
# CSV / binary round-trip


def write_field_csv(field: SolutionField, path: "str | Path") -> None:
    lines = ["x,t,u"]
    for i, x in enumerate(field.xs):
        for j, t in enumerate(field.ts):
            lines.append(f"{float(x)!r},{float(t)!r},{float(field.values[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path: "str | Path") -> SolutionField:
    raw = Path(path).read_text().strip().split("\n")
    if raw[0].strip() != "x,t,u":
        raise ValueError(f"unexpected header {raw[0]!r}")
    xs_seen: list[float] = []
    ts_seen: list[float] = []
    tripes = []
    for line in raw[1:]:
        a, b, c = line.split(",")
        tripes.append((float(a), float(b), float(c)))
    for x, t, _ in tripes:
        if not xs_seen or x != xs_seen[-1]:
            if x not in xs_seen:
                xs_seen.append(x)
    for x, t, _ in tripes:
        if t not in ts_seen:
            ts_seen.append(t)
        else:
            break
    xs = np.array(xs_seen)
    ts = np.array(ts_seen)
    vals = np.array([v for _, _, v in tripes]).reshape(len(xs), len(ts))
    return SolutionField(xs, ts, vals)


def solver_cache_key(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_store(cache_dir: "str | Path", key: str, field: SolutionField,
                meta: "dict | None" = None) -> Path:
    d = Path(cache_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{key}.npz"
    np.savez_compressed(path, xs=field.xs, ts=field.ts, values=field.values,
                        meta=np.frombuffer(
                            json.dumps(meta or {}).encode(), dtype=np.uint8))
    return path


def cache_load(cache_dir: "str | Path", key: str
               ) -> "tuple[SolutionField, dict] | None":
    path = Path(cache_dir) / f"{key}.npz"
    if not path.exists():
        return None
    with np.load(path) as z:
        field = SolutionField(z["xs"], z["ts"], z["values"])
        meta = json.loads(bytes(z["meta"].tobytes()).decode() or "{}")
    return field, meta


# ---------------------------------------------------------------------------
# transport


def solve_transport_exact(problem: CauchyProblem, xs: np.ndarray,
                          ts: np.ndarray) -> SolutionField:
    if problem.form.kind != "transport":
        raise ValueError("problem is not a transport equation")
    b, c = problem.form.coeffs
    phi = problem.initial
    return field_from_fn(lambda x, t: phi(x - b * t) + c * t, xs, ts)


class CharacteristicFoot(NamedTuple):
    """Entry point of the backward characteristic through (x, t)."""

    x0: float
    t0: float
    on_initial: bool


def characteristic_foot(b: float, x: float, t: float,
                        domain: "Domain | None" = None) -> CharacteristicFoot:
    """Trace (x, t) backward along dx/ds = b until the boundary.

    Feet on the corner count as initial-axis feet.
    """
    dom = domain or Domain()
    if t < 0.0 or not dom.x_lo <= x <= dom.x_hi:
        raise ValueError(f"({x}, {t}) outside the domain")
    if b == 0.0:
        return CharacteristicFoot(x, 0.0, True)
    wall = dom.x_lo if b > 0.0 else dom.x_hi
    t_exit = (x - wall) / b
    if t <= t_exit:
        return CharacteristicFoot(x - b * t, 0.0, True)
    return CharacteristicFoot(wall, t - t_exit, False)


# ---------------------------------------------------------------------------
# the quadratic-Hamiltonian family of weak solutions


def hj_family(a: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """u_a(x, t) = -a * max(0, a t - |x|); a=0 gives the zero solution."""

    def u(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        return -a * np.maximum(0.0, a * t - np.abs(x))

    return u


def hj_pairwise_distance(a: float, b: float, domain: "Domain | None" = None) -> float:
    """L2 distance over the space-time rectangle between u_a and u_b.

    Both members are piecewise quadratic with kinks along |x| = a t, so
    Gauss panels split at the kinks integrate the square exactly; the
    result is accurate to roundoff.
    """
    dom = domain or Domain()
    if abs(dom.x_lo) != dom.x_hi:
        raise ValueError("expects an x-interval symmetric about 0")
    ua, ub = hj_family(a), hj_family(b)
    tz, tw = np.polynomial.legendre.leggauss(12)
    xz, xw = np.polynomial.legendre.leggauss(8)
    x_max = dom.x_hi
    t_breaks = sorted({0.0, dom.t_end}
                      | {x_max / abs(v) for v in (a, b)
                         if abs(v) > 0 and x_max / abs(v) < dom.t_end})
    total = 0.0
    for t_lo, t_hi in zip(t_breaks[:-1], t_breaks[1:]):
        tm, th = 0.5 * (t_hi + t_lo), 0.5 * (t_hi - t_lo)
        for zt, wt in zip(tz, tw):
            t = tm + th * zt
            x_breaks = sorted({0.0, x_max}
                              | {min(abs(v) * t, x_max) for v in (a, b)})
            row = 0.0
            for x_lo, x_hi in zip(x_breaks[:-1], x_breaks[1:]):
                xm, xh = 0.5 * (x_hi + x_lo), 0.5 * (x_hi - x_lo)
                xs = xm + xh * xz
                tt = np.full_like(xs, t)
                d = ua(xs, tt) - ub(xs, tt)
                row += xh * float(xw @ (d * d))
            total += wt * th * 2.0 * row  # both members are even in x
    return math.sqrt(total)


def hj_family_jet(a: float) -> Callable[[np.ndarray, np.ndarray],
                                        tuple[np.ndarray, ...]]:
    """Pointwise (val, dx, dt, dxx) of u_a away from its kink lines."""

    def jets(x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, ...]:
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        inside = np.abs(x) < a * t
        val = np.where(inside, a * np.abs(x) - a * a * t, 0.0)
        dx = np.where(inside, a * np.sign(x), 0.0)
        dt = np.where(inside, -a * a, 0.0)
        return val, dx, dt, np.zeros_like(val)

    return jets


# ---------------------------------------------------------------------------
# heat equation via kernel quadrature


def heat_kernel(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return np.exp(-x * x / (4.0 * t)) / (2.0 * np.sqrt(np.pi * t))


def solve_heat_kernel(phi: SmoothFn, xs: np.ndarray, ts: np.ndarray,
                      support: "Sequence[tuple[float, float]] | None" = None,
                      radius: "float | None" = None,
                      panels_per_interval: int = 24,
                      nodes_per_panel: int = 16,
                      tail_tol: float = 1e-10) -> SolutionField:
    """Convolve the initial data with the heat kernel by composite quadrature.

    With ``support`` the integral is truncated exactly to those intervals.
    Otherwise it is truncated to [min(xs)-radius, max(xs)+radius]; the
    neglected tail is bounded by sup |phi| outside the window (estimated
    from the window endpoints, so phi must decay monotonically out there)
    times the unit kernel mass, and the solve refuses to proceed if that
    bound exceeds ``tail_tol``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if support is not None:
        intervals = [(float(a), float(b)) for a, b in support]
    else:
        r = radius if radius is not None else 12.0
        a = float(xs.min() - r)
        b = float(xs.max() + r)
        tail_bound = max(abs(float(phi(np.array([a]))[0])),
                         abs(float(phi(np.array([b]))[0])))
        if tail_bound > tail_tol:
            raise ValueError(
                f"initial data not negligible at the truncation radius "
                f"(bound {tail_bound:.3e} > {tail_tol:.1e}); enlarge radius")
        intervals = [(a, b)]

    nodes_list = []
    wphi_list = []
    for a, b in intervals:
        edges = np.linspace(a, b, panels_per_interval + 1)
        q, w = composite_nodes(edges, nodes_per_panel)
        nodes_list.append(q)
        wphi_list.append(w * np.asarray(phi(q), dtype=np.float64))
    nodes = np.concatenate(nodes_list)
    wphi = np.concatenate(wphi_list)

    vals = np.empty((len(xs), len(ts)))
    for j, t in enumerate(ts):
        if t <= 0.0:
            if t < 0.0:
                raise ValueError("negative time")
            vals[:, j] = np.asarray(phi(xs), dtype=np.float64)
            continue
        kern = heat_kernel(xs[:, None] - nodes[None, :], t)
        vals[:, j] = kern @ wphi
    return SolutionField(xs, ts, vals)


def heat_fd_residual(field: SolutionField) -> float:
    """Max |u_t - u_xx| over interior nodes, fourth-order central stencils.

    Requires uniform axes with at least five nodes each.
    """
    xs, ts, u = field.xs, field.ts, field.values
    hx = np.diff(xs)
    ht = np.diff(ts)
    if len(xs) < 5 or len(ts) < 5:
        raise ValueError("grid too small for the stencil")
    if np.ptp(hx) > 1e-12 * hx[0] or np.ptp(ht) > 1e-12 * ht[0]:
        raise ValueError("stencil needs uniform grids")
    dx, dt = hx[0], ht[0]
    c = u[2:-2, 2:-2]
    u_t = (-u[2:-2, 4:] + 8 * u[2:-2, 3:-1] - 8 * u[2:-2, 1:-3]
           + u[2:-2, :-4]) / (12 * dt)
    u_xx = (-u[4:, 2:-2] + 16 * u[3:-1, 2:-2] - 30 * c
            + 16 * u[1:-3, 2:-2] - u[:-4, 2:-2]) / (12 * dx * dx)
    return float(np.max(np.abs(u_t - u_xx)))


# ---------------------------------------------------------------------------
# Burgers via Fourier pseudo-spectral integrating-factor RK4


@dataclasses.dataclass(frozen=True)
class BurgersRun:
    """Restricted solution field plus solver diagnostics."""

    field: SolutionField
    mass_drift: float
    max_dx_final: float
    modes: int
    dt: float


def solve_burgers_spectral(problem: CauchyProblem, modes: int = 8192,
                           dt: float = 5e-5, t_stride_out: int = 200,
                           x_stride_out: int = 32,
                           period: float = 4.0,
                           x_left: float = -2.0) -> BurgersRun:
    """March u_t + mu u u_x = nu u_xx on the periodic cell, conservation form.

    The initial data is evaluated on the periodic grid and must be
    period-compatible. Quadratic terms are 2/3-dealiased; the viscous part
    is handled exactly by the integrating factor, so the zeroth mode (the
    mass) is preserved to roundoff. Output is restricted to the problem
    domain on an exact sub-grid of the collocation points.
    """
    if problem.form.kind != "burgers":
        raise ValueError("problem is not a Burgers equation")
    mu, nu = problem.form.coeffs
    dom = problem.domain
    n = modes
    L = period
    xs_full = x_left + L * np.arange(n) / n
    u0 = np.asarray(problem.initial(xs_full), dtype=np.float64)

    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    ik = 1j * k
    keep = np.arange(len(k)) <= n // 3  # 2/3 rule for the quadratic term
    ef_half = np.exp(-nu * k * k * (dt / 2.0))
    ef_full = ef_half * ef_half

    def nonlin(v: np.ndarray) -> np.ndarray:
        u = np.fft.irfft(v, n=n)
        w = np.fft.rfft(0.5 * u * u)
        return np.where(keep, -mu * ik * w, 0.0)

    n_steps = int(round(dom.t_end / dt))
    if abs(n_steps * dt - dom.t_end) > 1e-9:
        raise ValueError("dt must divide the time horizon")
    if n_steps % t_stride_out != 0:
        raise ValueError("t_stride_out must divide the step count")
    if n % 4 != 0 or x_stride_out < 1:
        raise ValueError("mode count must be divisible by 4")

    in_dom = np.where((xs_full >= dom.x_lo - 1e-12)
                      & (xs_full <= dom.x_hi + 1e-12))[0]
    sel = in_dom[::x_stride_out]
    if abs(xs_full[sel[-1]] - dom.x_hi) > 1e-12:
        raise ValueError("x_stride_out must land on the right edge")
    xs_out = xs_full[sel]
    ts_out = np.empty(n_steps // t_stride_out + 1)
    vals = np.empty((len(sel), len(ts_out)))

    v = np.fft.rfft(u0)
    mass0 = v[0].real
    mass_drift = 0.0
    ts_out[0] = 0.0
    vals[:, 0] = u0[sel]
    row = 1
    for step in range(1, n_steps + 1):
        n1 = nonlin(v)
        n2 = nonlin(ef_half * (v + (dt / 2.0) * n1))
        n3 = nonlin(ef_half * v + (dt / 2.0) * n2)
        n4 = nonlin(ef_full * v + dt * ef_half * n3)
        v = ef_full * v + (dt / 6.0) * (ef_full * n1
                                        + 2.0 * ef_half * (n2 + n3) + n4)
        mass_drift = max(mass_drift, abs(v[0].real - mass0) * (L / n))
        if step % t_stride_out == 0:
            u = np.fft.irfft(v, n=n)
            if not np.all(np.isfinite(u)):
                raise FloatingPointError(f"solver blew up at step {step}")
            ts_out[row] = step * dt
            vals[:, row] = u[sel]
            row += 1
    max_dx = float(np.max(np.abs(np.fft.irfft(ik * v, n=n))))
    field = SolutionField(xs_out, ts_out, vals)
    return BurgersRun(field, float(mass_drift), max_dx, modes, dt)


def burgers_cached(problem: CauchyProblem, modes: int, dt: float,
                   x_stride_out: int,
                   cache_dir: "str | Path | None" = None
                   ) -> "tuple[SolutionField, dict]":
    """Solve through the on-disk cache; returns (field, meta).

    meta carries max_dx_final and mass_drift either way; the cache key
    hashes the problem together with modes, dt, and output stride.
    """
    params = {"problem": problem.key_dict(), "modes": modes, "dt": dt,
              "x_stride_out": x_stride_out}
    key = solver_cache_key(params)
    if cache_dir is not None:
        hit = cache_load(cache_dir, key)
        if hit is not None:
            return hit
    run = solve_burgers_spectral(problem, modes=modes, dt=dt,
                                 x_stride_out=x_stride_out)
    meta = {"max_dx_final": run.max_dx_final, "mass_drift": run.mass_drift}
    if cache_dir is not None:
        cache_store(cache_dir, key, run.field, meta)
    return run.field, meta


def burgers_mode_doubling(problem: CauchyProblem, modes: int = 8192,
                          dt: float = 5e-5, x_stride_out: int = 2,
                          cache_dir: "str | Path | None" = None) -> dict:
    """Relative gap between a solve and its mode-doubled twin.

    Doubling the stride along with the mode count keeps the two runs on
    the same output grid, so whole fields compare directly.
    """
    coarse, meta_c = burgers_cached(problem, modes, dt, x_stride_out,
                                    cache_dir)
    fine, meta_f = burgers_cached(problem, 2 * modes, dt, 2 * x_stride_out,
                                  cache_dir)
    return {"error": l2_field_error(coarse, fine) / l2_field_norm(fine),
            "coarse": meta_c, "fine": meta_f,
            "modes": modes, "dt": dt}
