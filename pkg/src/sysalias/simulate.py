"""Random stable sparse networks and exact-discretization sampling."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GenerationFailure, InvalidInputError
from .matfun import raw_eigenvalues
from .sysmodel import CTSystem, TimeSeries, discretize, load_json, save_json

STABILITY_RETRIES = 1000
INPUT_KINDS = ("none", "square_wave")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 24
    density: float = 0.1
    N: int = 24
    h: float | str = "auto"
    h_factor: float = 0.9
    snr_db: float = 0.0
    input_kind: str = "none"
    input_period: float | None = None  # None means 2h
    input_amplitude: float = 1.0
    sigma_init: float = 1.0
    x0_mean: float = 0.0
    noise_free: bool = False
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidInputError(f"n must be an integer >= 2, got {self.n}")
        if not 0.0 <= self.density <= 1.0:
            raise InvalidInputError(f"density must lie in [0, 1], got {self.density}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"N must be an integer >= 1, got {self.N}")
        if not math.isfinite(self.snr_db):
            raise InvalidInputError("snr_db must be finite (use noise_free for no noise)")
        if self.h != "auto" and not (isinstance(self.h, (int, float)) and self.h > 0):
            raise InvalidInputError(f"h must be 'auto' or positive, got {self.h!r}")
        if not self.h_factor > 0:
            raise InvalidInputError("h_factor must be positive")
        if self.input_kind not in INPUT_KINDS:
            raise InvalidInputError(f"input_kind must be one of {INPUT_KINDS}, got {self.input_kind!r}")
        if self.input_period is not None and not self.input_period > 0:
            raise InvalidInputError("input_period must be positive")
        if not self.sigma_init > 0:
            raise InvalidInputError("sigma_init must be positive")

    @property
    def n_samples(self) -> int:
        """Stored columns: N transitions need N + 1 samples."""
        return self.N + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidInputError(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class Dataset:
    truth: CTSystem
    series: TimeSeries
    config: ExperimentConfig
    meta: dict = field(default_factory=dict)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def is_stable(A) -> bool:
    return bool(np.max(raw_eigenvalues(A).real) < 0)


def random_stable_sparse(n: int, density: float, seed=None) -> CTSystem:
    """Stable ``A`` built from a permuted directed loop plus a sparse random overlay.

    The base has a negative diagonal and a cycle 0 -> 1 -> ... -> n-1 -> 0, so the
    graph is strongly connected and never block separable.  Returned with
    ``B`` empty and ``R = I``.
    """
    if int(n) != n or n < 2:
        raise InvalidInputError(f"n must be an integer >= 2, got {n}")
    if not 0.0 <= density <= 1.0:
        raise InvalidInputError(f"density must lie in [0, 1], got {density}")
    rng = _rng(seed)
    for _ in range(STABILITY_RETRIES):
        A = np.diag(rng.uniform(-2.0, -0.5, n))
        loop = rng.uniform(0.5, 1.5, n) * rng.choice([-1.0, 1.0], n)
        idx = np.arange(n)
        A[idx[:-1], idx[1:]] = loop[:-1]
        A[n - 1, 0] = loop[-1]
        overlay = rng.random((n, n)) < density
        vals = rng.uniform(0.2, 1.0, (n, n)) * rng.choice([-1.0, 1.0], (n, n))
        A = A + np.where(overlay, vals, 0.0)
        perm = rng.permutation(n)
        A = A[np.ix_(perm, perm)]
        if is_stable(A):
            return CTSystem(A, np.zeros((n, 0)), np.eye(n))
    raise GenerationFailure(f"no stable matrix after {STABILITY_RETRIES} draws")


def square_wave(period: float, amplitude: float = 1.0, t0: float = 0.0):
    """Return ``u(t)``: +amplitude on the first half period from ``t0``, then -amplitude."""
    if not period > 0:
        raise InvalidInputError("period must be positive")
    half = 0.5 * period

    def u(t):
        k = np.floor((np.asarray(t, dtype=float) - t0) / half + 1e-9)
        return np.where(k % 2 == 0, amplitude, -amplitude)

    return u


def resolve_h(A, config: ExperimentConfig) -> float:
    if config.h != "auto":
        return float(config.h)
    from .aliasing import sampling_bound

    h_max = sampling_bound(A).h_max
    # Real spectrum: no aliasing limit, fall back to unit period.
    return config.h_factor * h_max if math.isfinite(h_max) else 1.0


def input_matrix(config: ExperimentConfig, h: float, n_in: int) -> np.ndarray:
    """Zero-order-held input samples; channel k uses period ``(k + 1) * base``."""
    t = h * np.arange(config.n_samples)
    if config.input_kind == "none" or n_in == 0:
        return np.zeros((0, t.size))
    base = config.input_period if config.input_period is not None else 2.0 * h
    return np.vstack([square_wave(base * (k + 1), config.input_amplitude)(t) for k in range(n_in)])


def noise_scale(A, h: float, config: ExperimentConfig) -> float:
    """Gain ``c`` of ``R = c I`` meeting the configured SNR against mean diag(R_d)."""
    if config.noise_free:
        return 0.0
    from .matfun import lyapunov_integral

    unit = float(np.mean(np.diag(lyapunov_integral(h, A, np.eye(A.shape[0])))))
    target = config.sigma_init ** 2 / 10.0 ** (config.snr_db / 10.0)
    return math.sqrt(target / unit)


def simulate_series(sys: CTSystem, config: ExperimentConfig, seed=None, h: float | None = None) -> Dataset:
    """Sample ``x(t_k)`` exactly from the discretized SDE; outputs equal states."""
    n = sys.n
    if config.n != n:
        raise InvalidInputError(f"config.n = {config.n} but system has n = {n}")
    rng = _rng(seed)
    h = resolve_h(sys.A, config) if h is None else float(h)
    U = input_matrix(config, h, sys.m)
    if U.shape[0] != sys.m:
        raise InvalidInputError("system has inputs but config.input_kind is 'none'")
    d = discretize(sys, h)
    X = np.empty((n, config.n_samples))
    X[:, 0] = config.x0_mean + config.sigma_init * rng.standard_normal(n)
    if config.noise_free:
        L = np.zeros((n, n))
    else:
        w, V = np.linalg.eigh(d.Rd)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    for k in range(config.N):
        x = d.Ad @ X[:, k] + L @ rng.standard_normal(n)
        if sys.m:
            x += d.Bd @ U[:, k]
        X[:, k + 1] = x
    series = TimeSeries(0.0, h, X, U)
    return Dataset(sys, series, replace(config, h=h) if config.h == "auto" else config,
                   {"h_resolved": h})


def generate_dataset(config: ExperimentConfig) -> Dataset:
    """Truth and series from ``config.seed`` via independent spawned streams."""
    s_sys, s_sim, s_in = np.random.SeedSequence(config.seed).spawn(3)
    base = random_stable_sparse(config.n, config.density, np.random.default_rng(s_sys))
    n = config.n
    if config.input_kind != "none":
        B = np.diag(np.random.default_rng(s_in).uniform(0.5, 1.5, n))
    else:
        B = np.zeros((n, 0))
    h = resolve_h(base.A, config)
    c = noise_scale(base.A, h, config)
    truth = CTSystem(base.A, B, c * np.eye(n))
    return simulate_series(truth, config, np.random.default_rng(s_sim), h=h)


def save_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    save_json(ds.truth.to_dict(), path / "truth.json")
    (path / "series.csv").write_text(ds.series.to_csv())
    save_json(ds.config.to_dict(), path / "config.json")
    return path


def load_series(path) -> TimeSeries:
    path = Path(path)
    csv_path = path / "series.csv" if path.is_dir() else path
    if not csv_path.exists():
        raise InvalidInputError(f"missing {csv_path}")
    return TimeSeries.from_csv(csv_path.read_text())


def load_dataset(path) -> Dataset:
    path = Path(path)
    for name in ("truth.json", "series.csv", "config.json"):
        if not (path / name).exists():
            raise InvalidInputError(f"dataset directory {path} lacks {name}")
    truth = CTSystem.from_dict(load_json(path / "truth.json"))
    series = load_series(path)
    config = ExperimentConfig.from_dict(load_json(path / "config.json"))
    return Dataset(truth, series, config)


def config_from_json(text: str, **overrides) -> ExperimentConfig:
    d = json.loads(text) if text else {}
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d)
