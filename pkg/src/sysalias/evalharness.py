"""Batch experiments: ROC / precision-recall on fixed grids, AUC, and a principal-log baseline."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidInputError, SysAliasError
from .matfun import logm_principal
from .reconstruct import ResidualContext, SolverOptions, least_squares_discrete, reconstruct
from .simulate import ExperimentConfig, generate_dataset
from .sysmodel import BooleanNetwork, boolean_network, save_json

log = logging.getLogger(__name__)

GRID_POINTS = 101
SCORE_FLOOR = 1e-6  # relative to the largest entry; smaller scores count as zero
COMPLEX_TOL = 1e-8
METHODS = ("proposed", "logm")


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    fpr: float
    tpr: float
    precision: float  # nan when nothing is predicted
    recall: float


def truth_mask(truth: BooleanNetwork, shape) -> np.ndarray:
    """Boolean ``p x (p + m)`` matrix: entry (i, j) is the arc from source j into y_{i+1}."""
    p = truth.n_outputs
    rows, cols = shape
    if rows != p or cols not in (p, p + truth.n_inputs):
        raise InvalidInputError(
            f"score shape {shape} does not fit a network with {p} outputs and {truth.n_inputs} inputs")
    sources = truth.outputs + truth.inputs
    mask = np.zeros(shape, dtype=bool)
    for src, tgt in truth.edges:
        j = sources.index(src)
        if j < cols:
            mask[int(tgt[1:]) - 1, j] = True
    return mask


def roc_pr(score, truth: BooleanNetwork, grid) -> list[CurvePoint]:
    """Curve points for ``arc iff score > threshold`` at each grid threshold."""
    score = np.abs(np.asarray(score, dtype=float))
    grid = np.asarray(grid, dtype=float).ravel()
    if np.any(np.diff(grid) < 0):
        raise InvalidInputError("threshold grid must be sorted ascending")
    mask = truth_mask(truth, score.shape)
    counts = kernels.confusion_sweep(np.ascontiguousarray(score.ravel()), mask.ravel(), grid)
    out = []
    for t, (tp, fp, tn, fn) in zip(grid, counts):
        pos, neg, pred = tp + fn, fp + tn, tp + fp
        tpr = tp / pos if pos else math.nan
        fpr = fp / neg if neg else math.nan
        prec = tp / pred if pred else math.nan
        out.append(CurvePoint(float(t), float(fpr), float(tpr), float(prec), float(tpr)))
    return out


def auc(curve) -> float:
    """Trapezoidal ROC area with the sweep closed at (0, 0) and (1, 1)."""
    pts = [(c.fpr, c.tpr) for c in curve if math.isfinite(c.fpr) and math.isfinite(c.tpr)]
    if not pts:
        raise InvalidInputError("curve has no defined ROC points")
    pts = sorted(set(pts) | {(0.0, 0.0), (1.0, 1.0)})
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return float(np.trapezoid(y, x))


def score_matrix(A) -> np.ndarray:
    """|A| with entries below ``SCORE_FLOOR`` times the largest set to zero."""
    S = np.abs(np.asarray(A))
    top = float(np.max(S, initial=0.0))
    S = S.astype(float)
    S[S < SCORE_FLOOR * top] = 0.0
    return S


def threshold_grid(scores, num: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced grid spanning the positive pooled scores.

    The lowest threshold sits just under the smallest positive score so that
    every nonzero entry is predicted at the first grid point.
    """
    pooled = np.concatenate([np.ravel(s) for s in scores]) if scores else np.zeros(0)
    pos = pooled[pooled > 0]
    if pos.size == 0:
        return np.zeros(num)
    lo, hi = float(pos.min()), float(pos.max())
    if hi <= lo:
        hi = lo * 2.0
    return np.geomspace(lo * (1.0 - 1e-9), hi, num)


def logm_baseline(ctx: ResidualContext):
    """Principal log of the least-squares ``Ad`` over ``h``.

    Returns ``(A, failed)``.  When no real principal log exists the
    magnitude of the eigen-decomposition log is used as score, so that a
    failed baseline still yields a curve.
    """
    Ad, _ = least_squares_discrete(ctx)
    try:
        return logm_principal(Ad) / ctx.h, False
    except SysAliasError:
        pass
    w, V = np.linalg.eig(Ad.astype(complex))
    with np.errstate(divide="ignore", invalid="ignore"):
        L = (V * np.log(w)) @ np.linalg.pinv(V) / ctx.h
    if not np.all(np.isfinite(L)):
        L = np.zeros_like(L)
    return np.abs(L), True


@dataclass(frozen=True, eq=False)
class DatasetResult:
    index: int
    seed: int
    status: str
    error: str = ""
    scores: dict = field(default_factory=dict)
    truth: BooleanNetwork | None = None
    termination: str = ""
    iterations: int = 0
    logm_failed: bool = False

    def to_dict(self) -> dict:
        return {"index": self.index, "seed": self.seed, "status": self.status, "error": self.error,
                "termination": self.termination, "iterations": self.iterations,
                "logm_failed": self.logm_failed}


@dataclass(frozen=True, eq=False)
class MethodSummary:
    name: str
    grid: np.ndarray
    curves: list           # one list of CurvePoint per dataset
    aucs: np.ndarray
    mean: dict             # fpr, tpr, precision, recall arrays over the grid
    std: dict
    undefined: np.ndarray  # grid points where some dataset has undefined precision
    defined_count: np.ndarray

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs)) if self.aucs.size else math.nan

    @property
    def std_auc(self) -> float:
        return float(np.std(self.aucs)) if self.aucs.size else math.nan

    def to_dict(self) -> dict:
        def enc(a):
            return [None if not math.isfinite(v) else float(v) for v in a]
        return {
            "mean_auc": self.mean_auc, "std_auc": self.std_auc, "aucs": enc(self.aucs),
            "grid": enc(self.grid),
            "mean": {k: enc(v) for k, v in self.mean.items()},
            "std": {k: enc(v) for k, v in self.std.items()},
            "undefined_mask": self.undefined.tolist(),
            "precision_defined_count": self.defined_count.tolist(),
        }


def summarize(name: str, scores: list, truths: list, grid=None) -> MethodSummary:
    """Curves on a shared grid, their mean and std, and the undefined-precision mask."""
    if grid is None:
        grid = threshold_grid(scores)
    curves = [roc_pr(s, t, grid) for s, t in zip(scores, truths)]
    aucs = np.array([auc(c) for c in curves])
    mean, std = {}, {}
    defined_count = np.zeros(len(grid), dtype=int)
    for key in ("fpr", "tpr", "precision", "recall"):
        M = np.array([[getattr(p, key) for p in c] for c in curves]).reshape(len(curves), len(grid))
        ok = np.isfinite(M)
        cnt = ok.sum(axis=0)
        tot = np.where(ok, M, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)
            var = np.where(cnt > 0, np.where(ok, (M - mu) ** 2, 0.0).sum(axis=0) / np.maximum(cnt, 1), np.nan)
        mean[key], std[key] = mu, np.sqrt(var)
        if key == "precision":
            defined_count = cnt
    undefined = defined_count < len(curves)
    return MethodSummary(name, np.asarray(grid, dtype=float), curves, aucs, mean, std, undefined, defined_count)


@dataclass(frozen=True, eq=False)
class BatchReport:
    config: ExperimentConfig
    options: SolverOptions
    datasets: list
    methods: dict

    @property
    def failures(self) -> list:
        return [d for d in self.datasets if d.status != "ok"]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "solver": {"lam": self.options.lam, "alpha": self.options.alpha, "beta": self.options.beta,
                       "delta": self.options.delta, "max_iter": self.options.max_iter,
                       "mode": self.options.mode, "init": self.options.init},
            "n_systems": len(self.datasets),
            "n_failed": len(self.failures),
            "datasets": [d.to_dict() for d in self.datasets],
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
        }

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "threshold", "fpr_mean", "fpr_std", "tpr_mean", "tpr_std"])
        for name, m in self.methods.items():
            for k, t in enumerate(m.grid):
                w.writerow([name, repr(float(t)), _num(m.mean["fpr"][k]), _num(m.std["fpr"][k]),
                            _num(m.mean["tpr"][k]), _num(m.std["tpr"][k])])
        return buf.getvalue()

    def pr_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "threshold", "recall_mean", "recall_std", "precision_mean",
                    "precision_std", "precision_defined", "undefined"])
        for name, m in self.methods.items():
            for k, t in enumerate(m.grid):
                w.writerow([name, repr(float(t)), _num(m.mean["recall"][k]), _num(m.std["recall"][k]),
                            _num(m.mean["precision"][k]), _num(m.std["precision"][k]),
                            int(m.defined_count[k]), int(m.undefined[k])])
        return buf.getvalue()

    def write(self, outdir, plots: bool = True) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "report.json", out / "roc.csv", out / "pr.csv"]
        save_json(self.to_dict(), paths[0])
        paths[1].write_text(self.roc_csv())
        paths[2].write_text(self.pr_csv())
        if plots and self.methods:
            for kind in ("roc", "pr"):
                p = out / f"{kind}.svg"
                p.write_text(curve_svg(self, kind))
                paths.append(p)
        return paths


def _num(v) -> str:
    return repr(float(v)) if math.isfinite(v) else "nan"


def _dataset_seeds(master: int, n: int) -> list[int]:
    children = np.random.SeedSequence(master).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def _run_one(args) -> DatasetResult:
    index, seed, config, opts, baselines = args
    cfg = replace(config, seed=seed)
    try:
        ds = generate_dataset(cfg)
        ctx = ResidualContext.from_series(ds.series)
        res = reconstruct(ctx, opts)
    except SysAliasError as exc:
        log.warning("dataset %d (seed %d) failed: %s", index, seed, exc)
        return DatasetResult(index, seed, "failed", f"{type(exc).__name__}: {exc}")
    B = ds.truth.B if opts.mode == "AB" else None
    truth = boolean_network(ds.truth.A, B)
    est = res.A if opts.mode != "AB" else np.hstack([res.A, res.B])
    scores = {"proposed": score_matrix(est)}
    failed = False
    if "logm" in baselines:
        L, failed = logm_baseline(ctx)
        if opts.mode == "AB":
            L = np.hstack([L, np.zeros_like(res.B)])
        scores["logm"] = score_matrix(L)
    return DatasetResult(index, seed, "ok", "", scores, truth, res.termination,
                         res.state.iteration, failed)


def run_batch(n_systems: int, config: ExperimentConfig, opts: SolverOptions | None = None,
              baselines=("logm",), workers: int = 1) -> BatchReport:
    """Seeded batch study; ``config.seed`` is the master seed.

    Per-dataset failures are recorded and left out of the averages.
    """
    if int(n_systems) != n_systems or n_systems < 1:
        raise InvalidInputError("n_systems must be a positive integer")
    unknown = set(baselines) - set(METHODS[1:])
    if unknown:
        raise InvalidInputError(f"unknown baselines: {sorted(unknown)}")
    opts = opts or SolverOptions()
    seeds = _dataset_seeds(config.seed, n_systems)
    jobs = [(i, s, config, opts, tuple(baselines)) for i, s in enumerate(seeds)]
    if workers > 1 and n_systems > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.index)
    ok = [r for r in results if r.status == "ok"]
    methods = {}
    for name in ("proposed",) + tuple(b for b in METHODS[1:] if b in baselines):
        if ok:
            methods[name] = summarize(name, [r.scores[name] for r in ok], [r.truth for r in ok])
    return BatchReport(config, opts, results, methods)


# ---------------------------------------------------------------- SVG output

_COLORS = {"proposed": "#1f77b4", "logm": "#d62728"}


def curve_svg(report: BatchReport, kind: str = "roc", width: int = 480, height: int = 400) -> str:
    """Mean curves with a shaded one-std band; ``kind`` is "roc" or "pr"."""
    if kind not in ("roc", "pr"):
        raise InvalidInputError("kind must be 'roc' or 'pr'")
    xk, yk = ("fpr", "tpr") if kind == "roc" else ("recall", "precision")
    pad = 50
    pw, ph = width - 2 * pad, height - 2 * pad

    def px(x, y):
        return pad + x * pw, height - pad - y * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="{pad}" y="{pad}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for v in (0.0, 0.5, 1.0):
        x0, y0 = px(v, 0.0)
        parts.append(f'<text x="{x0:.1f}" y="{y0 + 16:.1f}" font-size="11" text-anchor="middle">{v:g}</text>')
        x0, y0 = px(0.0, v)
        parts.append(f'<text x="{x0 - 6:.1f}" y="{y0 + 4:.1f}" font-size="11" text-anchor="end">{v:g}</text>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 12}" font-size="12" text-anchor="middle">{xk}</text>')
    parts.append(f'<text x="14" y="{height / 2:.1f}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {height / 2:.1f})">{yk}</text>')
    for row, (name, m) in enumerate(report.methods.items()):
        color = _COLORS.get(name, "#2ca02c")
        x, y, s = m.mean[xk], m.mean[yk], m.std[yk]
        ok = np.isfinite(x) & np.isfinite(y)
        if not np.any(ok):
            continue
        x, y, s = x[ok], y[ok], np.nan_to_num(s[ok])
        upper = [px(a, min(1.0, b + c)) for a, b, c in zip(x, y, s)]
        lower = [px(a, max(0.0, b - c)) for a, b, c in zip(x, y, s)]
        band = " ".join(f"{a:.2f},{b:.2f}" for a, b in upper + lower[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{a:.2f},{b:.2f}" for a, b in (px(a, b) for a, b in zip(x, y)))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 16 + 16 * row}" font-size="12" fill="{color}">'
                     f'{name} (AUC {m.mean_auc:.3f})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
