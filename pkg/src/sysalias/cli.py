"""Command-line entry point: ``sysalias gen | reconstruct | alias | eval``.

Exit codes: 0 success, 1 numeric or solver failure, 2 input or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import aliasing
from .errors import InvalidInputError, SysAliasError
from .evalharness import run_batch
from .matfun import expm
from .reconstruct import QPSettings, SolverOptions, lambda_grid, reconstruct
from .simulate import ExperimentConfig, generate_dataset, load_series, save_dataset
from .sysmodel import CTSystem, load_json, save_json

log = logging.getLogger("sysalias")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

_EXP_FIELDS = {f.name for f in fields(ExperimentConfig)}
_SOLVER_FIELDS = {f.name for f in fields(SolverOptions)} - {"qp", "B_fixed"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


# ------------------------------------------------------------------ config

def _load_config(path) -> dict:
    """Sections ``experiment``, ``solver`` and ``eval``; flat keys are sorted into them."""
    if path is None:
        return {"experiment": {}, "solver": {}, "eval": {}}
    raw = load_json(path)
    if not isinstance(raw, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    out = {"experiment": dict(raw.get("experiment", {})), "solver": dict(raw.get("solver", {})),
           "eval": dict(raw.get("eval", {}))}
    for k, v in raw.items():
        if k in ("experiment", "solver", "eval"):
            continue
        if k in _EXP_FIELDS:
            out["experiment"][k] = v
        elif k in _SOLVER_FIELDS:
            out["solver"][k] = v
        elif k in ("n_systems", "workers", "baselines"):
            out["eval"][k] = v
        else:
            raise InvalidInputError(f"{path}: unknown config key {k!r}")
    return out


def _experiment(args, cfg: dict) -> ExperimentConfig:
    d = dict(cfg["experiment"])
    for name in _EXP_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if isinstance(d.get("h"), str) and d["h"] != "auto":
        try:
            d["h"] = float(d["h"])
        except ValueError as exc:
            raise InvalidInputError(f"h must be 'auto' or a number, got {d['h']!r}") from exc
    return ExperimentConfig.from_dict(d)


def _solver(args, cfg: dict) -> SolverOptions:
    d = dict(cfg["solver"])
    qp = d.pop("qp", {}) or {}
    unknown = set(d) - _SOLVER_FIELDS
    if unknown:
        raise InvalidInputError(f"unknown solver keys: {sorted(unknown)}")
    for name in _SOLVER_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    try:
        return SolverOptions(**d, qp=QPSettings(**qp))
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from exc


def _solver_dict(opts: SolverOptions) -> dict:
    d = opts.to_dict()
    d.pop("B_fixed", None)
    return d


def _write_run_config(out: Path, command: str, **parts) -> None:
    save_json({"command": command, **parts}, out / "run_config.json")


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    exp = _experiment(args, cfg)
    ds = generate_dataset(exp)
    out = save_dataset(ds, args.out)
    print(f"wrote dataset to {out} (n={exp.n}, samples={exp.n_samples}, h={ds.series.h:.6g})")
    return EXIT_OK


def _lambdas(args) -> list | None:
    if args.lambdas:
        return [float(x) for x in args.lambdas]
    if args.lambda_sweep:
        lo, hi, num = args.lambda_sweep
        return lambda_grid(float(lo), float(hi), int(num)).tolist()
    return None


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    opts = _solver(args, cfg)
    series = load_series(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lams = _lambdas(args)
    runs = [(None, opts)] if lams is None else [(k, replace(opts, lam=lam)) for k, lam in enumerate(lams)]
    _write_run_config(out, "reconstruct", dataset=str(args.dataset), solver=_solver_dict(opts),
                      lambdas=lams)
    status = EXIT_OK
    for k, o in runs:
        tag = "" if k is None else f"_{k:02d}"
        try:
            res = reconstruct(series, o)
        except SysAliasError as exc:
            if k is None:
                raise
            print(f"lambda[{k}] = {o.lam:g}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        d = res.to_dict()
        d["lambda_index"] = k
        save_json(d, out / f"result{tag}.json")
        save_json(res.network(args.threshold).to_dict(), out / f"network{tag}.json")
        print(f"lambda={o.lam:g}: {res.termination} after {res.state.iteration} iterations, "
              f"objective {res.state.objective:.6g}, nnz {int(np.count_nonzero(res.A))}")
    return status


def _system_from(path) -> CTSystem:
    path = Path(path)
    if path.is_dir():
        path = path / "truth.json"
    d = load_json(path)
    if "A" not in d:
        raise InvalidInputError(f"{path}: no 'A' entry")
    return CTSystem.from_dict({k: d[k] for k in ("A", "B", "R") if k in d})


def cmd_alias(args) -> int:
    if args.alias_cmd == "bound":
        sys_ = _system_from(args.system)
        report = aliasing.sampling_bound(sys_.A).to_dict()
    elif args.alias_cmd == "test":
        model = _system_from(args.model)
        probe = load_series(args.probe)
        report = aliasing.alias_test(model, args.h1, probe, args.alpha).to_dict()
    else:
        if args.system is not None:
            if args.h is None:
                raise InvalidInputError("--h is required with --system")
            Ad, h = expm(args.h * _system_from(args.system).A), args.h
        else:
            d = load_json(args.ad)
            if "Ad" not in d or "h" not in d:
                raise InvalidInputError(f"{args.ad}: expected keys 'Ad' and 'h'")
            Ad, h = np.asarray(d["Ad"], dtype=float), float(args.h if args.h is not None else d["h"])
        aliases = aliasing.enumerate_aliases(Ad, h, args.kappa)
        report = aliases.to_dict()
        if len(aliases):
            best = aliasing.sparsest_alias(aliases)
            report["sparsest"] = {"j": best.j.tolist(), "weighted_norm": best.weighted_norm}
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    exp = _experiment(args, cfg)
    opts = _solver(args, cfg)
    ev = cfg["eval"]
    n_systems = args.n_systems if args.n_systems is not None else int(ev.get("n_systems", 50))
    workers = args.workers if args.workers is not None else int(ev.get("workers", 1))
    baselines = () if args.no_baseline else tuple(ev.get("baselines", ("logm",)))
    report = run_batch(n_systems, exp, opts, baselines=baselines, workers=workers)
    out = Path(args.out)
    report.write(out, plots=not args.no_plots)
    _write_run_config(out, "eval", experiment=exp.to_dict(), solver=_solver_dict(opts),
                      n_systems=n_systems, workers=workers, baselines=list(baselines))
    for name, m in report.methods.items():
        print(f"{name}: mean AUC {m.mean_auc:.4f} +/- {m.std_auc:.4f} over {m.aucs.size} datasets")
    for d in report.failures:
        print(f"dataset {d.index} (seed {d.seed}) failed: {d.error}", file=sys.stderr)
    if not report.methods:
        print("every dataset failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_experiment_flags(p) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--n", type=int)
    g.add_argument("--density", type=float)
    g.add_argument("--N", type=int, help="number of transitions (N + 1 samples)")
    g.add_argument("--h", help="sampling period or 'auto'")
    g.add_argument("--h-factor", dest="h_factor", type=float)
    g.add_argument("--snr-db", dest="snr_db", type=float)
    g.add_argument("--input-kind", dest="input_kind", choices=["none", "square_wave"])
    g.add_argument("--input-period", dest="input_period", type=float)
    g.add_argument("--input-amplitude", dest="input_amplitude", type=float)
    g.add_argument("--sigma-init", dest="sigma_init", type=float)
    g.add_argument("--noise-free", dest="noise_free", action="store_const", const=True)
    g.add_argument("--seed", type=int, help="master seed")


def _add_solver_flags(p) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--lam", "--lambda", dest="lam", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--mode", choices=["A", "AB"])
    g.add_argument("--diagonal-B", dest="diagonal_B", action="store_const", const=True)
    g.add_argument("--init", choices=["ls-logm", "zero"])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sysalias", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random system and sampled series")
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    _add_experiment_flags(g)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reconstruct", help="l1-regularised Gauss-Newton reconstruction")
    r.add_argument("dataset", help="dataset directory or series CSV")
    r.add_argument("--out", required=True)
    r.add_argument("--config")
    r.add_argument("--threshold", type=float, help="absolute zero threshold for the network")
    sweep = r.add_mutually_exclusive_group()
    sweep.add_argument("--lambdas", nargs="+", metavar="LAM")
    sweep.add_argument("--lambda-sweep", nargs=3, metavar=("LO", "HI", "NUM"))
    _add_solver_flags(r)
    r.set_defaults(func=cmd_reconstruct)

    a = sub.add_parser("alias", help="sampling bound, alias test, alias enumeration")
    asub = a.add_subparsers(dest="alias_cmd", required=True, parser_class=_Parser)
    b = asub.add_parser("bound")
    b.add_argument("system", help="system JSON or dataset directory")
    b.add_argument("--out")
    t = asub.add_parser("test")
    t.add_argument("--model", required=True, help="fitted system JSON (A, optional B)")
    t.add_argument("--h1", type=float, required=True, help="period the model was fitted at")
    t.add_argument("--probe", required=True, help="series CSV or dataset sampled at h2")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--out")
    e = asub.add_parser("enum")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--system", help="system JSON; Ad = expm(h A)")
    src.add_argument("--ad", help="JSON with keys Ad and h")
    e.add_argument("--h", type=float)
    e.add_argument("--kappa", type=float, required=True)
    e.add_argument("--out")
    a.set_defaults(func=cmd_alias)

    v = sub.add_parser("eval", help="batch study with ROC / PR curves")
    v.add_argument("--out", required=True)
    v.add_argument("--config")
    v.add_argument("--n-systems", dest="n_systems", type=int)
    v.add_argument("--workers", type=int)
    v.add_argument("--no-plots", action="store_true")
    v.add_argument("--no-baseline", action="store_true")
    _add_experiment_flags(v)
    _add_solver_flags(v)
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SysAliasError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
