"""Continuous/discrete system types, exact discretization, Boolean networks and IO."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CSVParseError, InvalidInputError
from .matfun import expm, lyapunov_integral, phi_integral


def _as2d(X, name: str, rows: int | None = None) -> np.ndarray:
    X = np.array(X, dtype=float)
    if X.ndim == 1 and X.size == 0 and rows is not None:
        X = X.reshape(rows, 0)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} has non-finite entries")
    X.setflags(write=False)
    return X


@dataclass(frozen=True, eq=False)
class CTSystem:
    """dx = A x dt + B u dt + R dw."""

    A: np.ndarray
    B: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = _as2d(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidInputError(f"A must be square, got {A.shape}")
        B = _as2d(self.B, "B", rows=n)
        if B.shape[0] != n:
            raise InvalidInputError(f"B must have {n} rows, got {B.shape}")
        R = _as2d(self.R, "R")
        if R.shape != (n, n):
            raise InvalidInputError(f"R must be {n}x{n}, got {R.shape}")
        if not np.allclose(R, R.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(R).max())):
            raise InvalidInputError("R must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "R": self.R.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CTSystem":
        try:
            A = np.array(d["A"], dtype=float)
            n = A.shape[0]
            B = d.get("B")
            B = np.zeros((n, 0)) if B is None else np.array(B, dtype=float).reshape(n, -1)
            R = d.get("R")
            R = np.eye(n) if R is None else R
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise InvalidInputError(f"malformed system JSON: {exc}") from exc
        return cls(A, B, R)


@dataclass(frozen=True, eq=False)
class DTSystem:
    """x(t_{k+1}) = Ad x(t_k) + Bd u(t_k) + v(t_k),  v ~ N(0, Rd)."""

    Ad: np.ndarray
    Bd: np.ndarray
    Rd: np.ndarray
    h: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidInputError(f"h must be positive and finite, got {self.h}")
        Ad = _as2d(self.Ad, "Ad")
        n = Ad.shape[0]
        object.__setattr__(self, "Ad", Ad)
        object.__setattr__(self, "Bd", _as2d(self.Bd, "Bd", rows=n))
        object.__setattr__(self, "Rd", _as2d(self.Rd, "Rd"))
        object.__setattr__(self, "h", float(self.h))

    def to_dict(self) -> dict:
        return {"Ad": self.Ad.tolist(), "Bd": self.Bd.tolist(), "Rd": self.Rd.tolist(), "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "DTSystem":
        try:
            Ad = np.array(d["Ad"], dtype=float)
            n = Ad.shape[0]
            Bd = np.array(d.get("Bd", np.zeros((n, 0))), dtype=float).reshape(n, -1)
            Rd = np.array(d.get("Rd", np.zeros((n, n))), dtype=float)
            return cls(Ad, Bd, Rd, float(d["h"]))
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise InvalidInputError(f"malformed system JSON: {exc}") from exc


def discretize(sys: CTSystem, h: float) -> DTSystem:
    """Exact zero-order-hold discretization with period ``h``."""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    Ad = expm(h * sys.A)
    Bd = phi_integral(h, sys.A) @ sys.B if sys.m else np.zeros((sys.n, 0))
    Rd = lyapunov_integral(h, sys.A, sys.R)
    return DTSystem(Ad, Bd, Rd, h)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Equidistant samples; column k of ``Y``/``U`` is time ``t0 + k h``."""

    t0: float
    h: float
    Y: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidInputError(f"h must be positive and finite, got {self.h}")
        Y = _as2d(self.Y, "Y")
        U = np.asarray(self.U, dtype=float)
        if U.size == 0:
            U = np.zeros((0, Y.shape[1]))
        U = _as2d(U, "U")
        if U.shape[1] != Y.shape[1]:
            raise InvalidInputError(f"Y has {Y.shape[1]} samples but U has {U.shape[1]}")
        if Y.shape[1] < 2:
            raise InvalidInputError("a time series needs at least two samples")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        """Number of transitions (samples minus one)."""
        return self.Y.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.Y.shape[1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"y{i + 1}" for i in range(self.n)] + [f"u{k + 1}" for k in range(self.m)])
        data = np.vstack([self.times[None, :], self.Y, self.U]).T
        for row in data:
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise CSVParseError("empty file", 1)
        header = [c.strip() for c in rows[0]]
        if not header or header[0] != "t":
            raise CSVParseError("header must start with 't'", 1)
        ny = sum(1 for c in header if c.startswith("y"))
        nu = sum(1 for c in header if c.startswith("u"))
        expected = ["t"] + [f"y{i + 1}" for i in range(ny)] + [f"u{k + 1}" for k in range(nu)]
        if header != expected:
            raise CSVParseError(f"unexpected header {header}", 1)
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CSVParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise CSVParseError(f"bad number ({exc})", lineno) from exc
            if not all(math.isfinite(v) for v in vals):
                raise CSVParseError("non-finite value", lineno)
            data.append(vals)
        if len(data) < 2:
            raise CSVParseError("need at least two samples", len(rows))
        arr = np.array(data)
        t = arr[:, 0]
        h = t[1] - t[0]
        if not h > 0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12 * max(1.0, abs(t[-1]))):
            raise CSVParseError("time column is not equidistant and increasing", 2)
        return cls(t[0], h, arr[:, 1:1 + ny].T, arr[:, 1 + ny:].T)


@dataclass(frozen=True)
class BooleanNetwork:
    """Digraph over outputs y1..yp and inputs u1..um; arcs are (source, target)."""

    n_outputs: int
    n_inputs: int
    edges: frozenset

    @property
    def outputs(self) -> list[str]:
        return [f"y{i + 1}" for i in range(self.n_outputs)]

    @property
    def inputs(self) -> list[str]:
        return [f"u{k + 1}" for k in range(self.n_inputs)]

    def candidate_arcs(self) -> list[tuple[str, str]]:
        """Every admissible arc: anything into an output (never into an input)."""
        return [(s, t) for t in self.outputs for s in self.outputs + self.inputs]

    def to_dict(self) -> dict:
        return {"outputs": self.outputs, "inputs": self.inputs,
                "edges": sorted([list(e) for e in self.edges])}


def boolean_network(A, B=None, threshold: float = 0.0) -> BooleanNetwork:
    """Arc y_j -> y_i iff |A_ij| > threshold; arc u_k -> y_i iff |B_ik| > threshold."""
    if threshold < 0:
        raise InvalidInputError("threshold must be non-negative")
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = np.zeros((n, 0)) if B is None else np.asarray(B, dtype=float).reshape(n, -1)
    edges = set()
    for i, j in zip(*np.nonzero(np.abs(A) > threshold)):
        edges.add((f"y{j + 1}", f"y{i + 1}"))
    for i, k in zip(*np.nonzero(np.abs(B) > threshold)):
        edges.add((f"u{k + 1}", f"y{i + 1}"))
    return BooleanNetwork(n, B.shape[1], frozenset(edges))


@dataclass(frozen=True)
class StructureCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def structure_metrics(estimated: BooleanNetwork, truth: BooleanNetwork) -> StructureCounts:
    """Confusion counts over all admissible ordered (source, target) pairs."""
    if (estimated.n_outputs, estimated.n_inputs) != (truth.n_outputs, truth.n_inputs):
        raise InvalidInputError("networks have different node sets")
    tp = fp = tn = fn = 0
    for arc in truth.candidate_arcs():
        est, tru = arc in estimated.edges, arc in truth.edges
        if est and tru:
            tp += 1
        elif est:
            fp += 1
        elif tru:
            fn += 1
        else:
            tn += 1
    return StructureCounts(tp, fp, tn, fn)


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
