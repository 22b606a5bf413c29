"""Command-line entry point.

Subcommands: exp, solve-ref, train, gradcheck, report, config-ref.
Artifacts land in out/<EXP>/<timestamp>/ as report.json plus CSV tables
and SVG plots; the expensive Burgers reference is cached under cache/
keyed by a hash of the solver parameters. Exit code 0 means every
verdict passed, 2 means some cells were inconclusive, 1 means an error
or a failed verdict.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 and older
    import tomli as tomllib

from . import experiments as ex
from . import problems as pb
from . import reference as ref
from . import training as tr
from .mlp import glorot_init, save_mlp, load_mlp

_EXP_CONFIGS = {
    "A": ex.ExpAConfig, "B": ex.ExpBConfig, "C": ex.ExpCConfig,
    "D1": ex.ExpD1Config, "D2": ex.ExpD2Config, "E": ex.ExpEConfig,
}

_SCHEMA_HINT = ("run `cauchylab config-ref` to see every recognised "
                "key with its default")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config file handling


def _coerce(name: str, value, default):
    """Fit a TOML value to the type of the dataclass default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} expects a boolean")
        return value
    if isinstance(default, float) and isinstance(value, (int, float)):
        return float(value)
    if isinstance(default, int) and isinstance(value, int):
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{name} expects an array")
        return tuple(value)
    if default is None or isinstance(default, (str, int, float)):
        if isinstance(value, type(default)) or default is None:
            return value
    raise ConfigError(f"{name} has the wrong type ({type(value).__name__})")


def _build_config(exp_id: str, overrides: dict):
    cls = _EXP_CONFIGS[exp_id]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in overrides.items():
        if key not in fields:
            raise ConfigError(f"unknown key exp.{exp_id}.{key}; "
                              + _SCHEMA_HINT)
        kwargs[key] = _coerce(f"exp.{exp_id}.{key}", value,
                              getattr(defaults, key))
    return cls(**kwargs)


def load_lab_config(path: "str | Path | None") -> dict:
    """Parse the TOML config file into {'lab': {...}, 'exp': {id: {...}}}.

    Unknown tables or keys are rejected so typos fail loudly.
    """
    out = {"lab": {}, "exp": {}}
    if path is None:
        return out
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    for table, content in raw.items():
        if table == "lab":
            for key, value in content.items():
                if key not in ("out_dir", "cache_dir", "jobs", "plots"):
                    raise ConfigError(f"unknown key lab.{key}; "
                                      + _SCHEMA_HINT)
                out["lab"][key] = value
        elif table == "exp":
            for exp_id, overrides in content.items():
                if exp_id not in _EXP_CONFIGS:
                    raise ConfigError(f"unknown table exp.{exp_id}; "
                                      + _SCHEMA_HINT)
                if not isinstance(overrides, dict):
                    raise ConfigError(f"exp.{exp_id} must be a table")
                out["exp"][exp_id] = dict(overrides)
        else:
            raise ConfigError(f"unknown table {table}; " + _SCHEMA_HINT)
    return out


def config_reference() -> str:
    """Generated TOML listing every recognised key and its default."""
    lines = ["# cauchylab configuration reference (generated)",
             "# every key is optional; values shown are the defaults",
             "",
             "[lab]",
             'out_dir = "out"',
             'cache_dir = "cache"',
             "jobs = 1",
             "plots = true"]
    for exp_id, cls in _EXP_CONFIGS.items():
        lines += ["", f"[exp.{exp_id}]"]
        for f in dataclasses.fields(cls):
            v = getattr(cls(), f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, tuple):
                s = "[" + ", ".join(repr(x) for x in v) + "]"
            elif isinstance(v, str):
                s = f'"{v}"'
            elif v is None:
                lines.append(f"# {f.name} = <unset>")
                continue
            else:
                s = repr(v)
            lines.append(f"{f.name} = {s}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# artifact writing


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y%m%dT%H%M%SZ")


def _is_table(series: dict) -> bool:
    lengths = set()
    for v in series.values():
        if not isinstance(v, list) or any(isinstance(x, list) for x in v):
            return False
        lengths.add(len(v))
    return len(lengths) == 1


def _write_series_csvs(report: ex.ExperimentReport, out: Path) -> list[Path]:
    files = []
    for name, series in report.series.items():
        if not isinstance(series, dict) or not series or not _is_table(series):
            continue
        cols = list(series)
        n = len(series[cols[0]])
        path = out / f"{name}.csv"
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(n):
                fh.write(",".join(repr(series[c][i])
                                  for c in cols) + "\n")
        files.append(path)
    return files


def write_report_artifacts(report: ex.ExperimentReport, out_dir: Path,
                           plots: bool = True) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_json(out_dir / "report.json")
    _write_series_csvs(report, out_dir)
    if plots:
        from .plots import emit_plots
        emit_plots(report, out_dir)
    return out_dir


def _print_report(report: ex.ExperimentReport) -> None:
    for line in report.summary_lines():
        print(line)


def _verdict_exit(reports) -> int:
    if any(not r.passed for r in reports):
        return 1
    if any(r.metrics.get("n_inconclusive", 0) for r in reports):
        return 2
    return 0


# ---------------------------------------------------------------------------
# subcommands


def _cmd_exp(args) -> int:
    cfg_file = load_lab_config(args.config)
    lab = cfg_file["lab"]
    out_root = Path(args.out or lab.get("out_dir", "out"))
    cache_dir = Path(args.cache or lab.get("cache_dir", "cache"))
    jobs = args.jobs or int(lab.get("jobs", 1))
    plots = lab.get("plots", True) and not args.no_plots
    ids = list(ex.EXPERIMENT_IDS) if args.id == "all" else [args.id]

    def make_config(exp_id: str):
        overrides = dict(cfg_file["exp"].get(exp_id, {}))
        if exp_id == "D2":
            if args.ps:
                overrides["bits"] = [int(p) for p in args.ps.split(",")]
            if args.dxs:
                overrides["dxs"] = [float(d) for d in args.dxs.split(",")]
        if exp_id == "E":
            overrides.setdefault("cache_dir", str(cache_dir))
        return _build_config(exp_id, overrides)

    configs = {i: make_config(i) for i in ids}
    stamp = _timestamp()
    reports = {}
    if jobs > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {i: pool.submit(ex.run_experiment, i, configs[i])
                       for i in ids}
            reports = {i: f.result() for i, f in futures.items()}
    else:
        for i in ids:
            reports[i] = ex.run_experiment(i, configs[i])
    for i in ids:
        out_dir = write_report_artifacts(reports[i], out_root / i / stamp,
                                         plots=plots)
        _print_report(reports[i])
        print(f"wrote {out_dir}")
    return _verdict_exit(list(reports.values()))


_REF_GRIDS = {"nx": 201, "nt": 101}


def _cmd_solve_ref(args) -> int:
    xs = np.linspace(-1.0, 1.0, args.nx)
    ts = np.linspace(0.0, 1.0, args.nt)
    meta: dict = {"problem": args.problem, "nx": args.nx, "nt": args.nt}
    if args.problem == "transport":
        field = ref.solve_transport_exact(pb.make_transport(), xs, ts)
    elif args.problem == "hj":
        field = ref.field_from_fn(ref.hj_family(args.a), xs, ts)
        meta["a"] = args.a
    elif args.problem == "heat":
        problem = pb.make_heat()
        field = ref.solve_heat_kernel(problem.initial, xs, ts)
    else:
        problem = pb.make_burgers()
        params = {"problem": problem.key_dict(), "modes": args.modes,
                  "dt": args.dt, "x_stride_out": args.x_stride}
        key = ref.solver_cache_key(params)
        cached = ref.cache_load(args.cache, key)
        if cached is not None:
            field, cmeta = cached
            meta.update(cmeta)
            meta["cache_hit"] = True
        else:
            run = ref.solve_burgers_spectral(problem, modes=args.modes,
                                             dt=args.dt,
                                             x_stride_out=args.x_stride)
            field = run.field
            meta.update({"max_dx_final": run.max_dx_final,
                         "mass_drift": run.mass_drift,
                         "cache_hit": False})
            ref.cache_store(args.cache, key, field,
                            {"max_dx_final": run.max_dx_final,
                             "mass_drift": run.mass_drift})
        meta.update({"modes": args.modes, "dt": args.dt,
                     "cache_key": key})
        del meta["nx"], meta["nt"]
    out_dir = Path(args.out) / "ref" / _timestamp()
    out_dir.mkdir(parents=True, exist_ok=True)
    ref.write_field_csv(field, out_dir / "field.csv")
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    print(f"{args.problem}: grid {len(field.xs)}x{len(field.ts)}, "
          f"wrote {out_dir}")
    return 0


_TRAIN_PROBLEMS = {"transport": pb.make_transport, "hj":
                   pb.make_hamilton_jacobi, "heat": pb.make_heat,
                   "burgers": pb.make_burgers}


def _cmd_train(args) -> int:
    problem = _TRAIN_PROBLEMS[args.problem]()
    spec = pb.CollocationSpec(n_interior=args.colloc,
                              n_initial=args.n_initial,
                              seed=args.colloc_seed)
    colloc = pb.sample_collocation(problem.domain, spec)
    config = tr.TrainConfig(optimizer=args.optimizer, lr=args.lr,
                            steps=args.steps, seed=args.seed,
                            log_every=args.log_every,
                            precision_bits=args.precision_bits,
                            batch_size=args.batch_size)
    sizes = (2, *([args.width] * args.depth), 1)
    if args.checkpoint:
        params = load_mlp(args.checkpoint)
    else:
        params = glorot_init(sizes, args.activation, seed=args.seed)
    terms = tr.pinn_terms(problem, colloc, config)
    params, log = tr.train(params, terms, config)
    out_dir = Path(args.out) / "train" / _timestamp()
    out_dir.mkdir(parents=True, exist_ok=True)
    log.to_csv(out_dir / "log.csv")
    save_mlp(params, out_dir / "model.json")
    final = tr.loss_values(params, terms)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump({"final_loss": final, "halt_reason": log.halt_reason,
                   "halt_step": log.halt_step}, fh, indent=2,
                  sort_keys=True)
    print(f"{args.problem}: loss {final['total']:.6g} "
          f"(residual {final['residual']:.6g}, "
          f"initial {final['initial']:.6g}), halt={log.halt_reason}, "
          f"wrote {out_dir}")
    return 0 if log.halt_reason in ("completed", "flushed_zero") else 2


def _cmd_gradcheck(args) -> int:
    out = ex.gradient_fidelity(n_per_activation=args.n, h=args.h,
                               rel_tol=args.tol, seed=args.seed)
    for act, dev in out["by_activation"].items():
        print(f"{act}: max relative deviation {dev:.3e}")
    print(f"max relative deviation {out['max_rel_dev']:.3e} "
          f"(tolerance {args.tol:g})")
    return 0 if out["max_rel_dev"] < args.tol else 1


def _cmd_report(args) -> int:
    path = Path(args.dir)
    report = ex.ExperimentReport.from_json(path / "report.json")
    from .plots import emit_plots
    files = emit_plots(report, path)
    _print_report(report)
    print(f"re-rendered {len(files)} plot(s) in {path}")
    return _verdict_exit([report])


def _cmd_config_ref(args) -> int:
    text = config_reference()
    if args.path:
        Path(args.path).write_text(text)
        print(f"wrote {args.path}")
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cauchylab",
        description="train small physics-informed networks on Cauchy "
                    "problems and check the failure-mode claims")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exp", help="run an experiment and write a report")
    p.add_argument("id", choices=list(ex.EXPERIMENT_IDS) + ["all"])
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--out", help="output root (default out)")
    p.add_argument("--cache", help="reference cache dir (default cache)")
    p.add_argument("--jobs", type=int, default=0,
                   help="concurrent experiments for 'all'")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--ps", help="D2: comma list of mantissa widths")
    p.add_argument("--dxs", help="D2: comma list of grid spacings")
    p.set_defaults(fn=_cmd_exp)

    p = sub.add_parser("solve-ref", help="write a reference solution field")
    p.add_argument("problem", choices=("transport", "hj", "heat", "burgers"))
    p.add_argument("--nx", type=int, default=_REF_GRIDS["nx"])
    p.add_argument("--nt", type=int, default=_REF_GRIDS["nt"])
    p.add_argument("--a", type=float, default=1.0,
                   help="hj: family member")
    p.add_argument("--modes", type=int, default=8192)
    p.add_argument("--dt", type=float, default=5e-5)
    p.add_argument("--x-stride", type=int, default=32)
    p.add_argument("--out", default="out")
    p.add_argument("--cache", default="cache")
    p.set_defaults(fn=_cmd_solve_ref)

    p = sub.add_parser("train", help="train one network, save log + model")
    p.add_argument("problem", choices=tuple(_TRAIN_PROBLEMS))
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--depth", type=int, default=2,
                   help="hidden layer count")
    p.add_argument("--activation", default="tanh",
                   choices=("tanh", "sigmoid", "relu"))
    p.add_argument("--colloc", type=int, default=1024)
    p.add_argument("--n-initial", type=int, default=128)
    p.add_argument("--colloc-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--precision-bits", type=int, default=None)
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--checkpoint", help="resume from a saved model")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("gradcheck",
                       help="compare gradients against finite differences")
    p.add_argument("--n", type=int, default=100,
                   help="configurations per activation")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("report", help="re-render plots from a stored report")
    p.add_argument("dir")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("config-ref",
                       help="print the generated config reference")
    p.add_argument("path", nargs="?")
    p.set_defaults(fn=_cmd_config_ref)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        ap.print_usage(sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
