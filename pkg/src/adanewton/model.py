"""Datasets, per-sample loss models and statistical-accuracy policies."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "AccuracyPolicy",
    "DataFormatError",
    "Dataset",
    "LossModel",
    "RiskConfig",
    "accuracy",
    "load_csv",
    "load_libsvm",
    "normalize_maxabs",
    "synth_logistic",
]


class DataFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense feature matrix with +-1 labels in a fixed (shuffled) row order.

    The prefix of length ``n`` is the sample set S_n, so smaller prefixes are
    always nested inside larger ones.
    """

    features: np.ndarray
    labels: np.ndarray
    shuffle_seed: int = 0
    ground_truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-d array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("labels must be exactly -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def prefix(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Return views ``(X[:n], y[:n])`` of the sample set S_n."""
        if not 1 <= n <= self.N:
            raise ValueError(f"sample size {n} outside [1, {self.N}]")
        return self.features[:n], self.labels[:n]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.features.shape, dtype=np.int64).tobytes())
        h.update(self.features.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()[:16]


def _shuffle(X: np.ndarray, y: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    return X[perm], y[perm]


def _map_label(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"line {lineno}: bad label {token!r}") from None
    if value == 1.0:
        return 1.0
    if value in (0.0, -1.0):
        return -1.0
    raise DataFormatError(f"line {lineno}: label {token!r} is not one of -1, 0, +1")


def load_libsvm(path, seed: int = 0, n_features: int | None = None) -> Dataset:
    """Read a LIBSVM text file into a dense, shuffled :class:`Dataset`.

    Labels ``0``/``1`` and ``-1``/``+1`` are both accepted; ``0`` maps to -1.
    Indices are 1-based and must be strictly increasing within a line.
    ``n_features`` pads the width beyond the largest index seen.
    """
    rows: list[tuple[list[int], list[float]]] = []
    labels: list[float] = []
    max_index = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_map_label(tokens[0], lineno))
            idx: list[int] = []
            val: list[float] = []
            last = 0
            for tok in tokens[1:]:
                try:
                    i_str, v_str = tok.split(":", 1)
                    i, v = int(i_str), float(v_str)
                except ValueError:
                    raise DataFormatError(f"line {lineno}: malformed entry {tok!r}") from None
                if i <= last:
                    raise DataFormatError(
                        f"line {lineno}: index {i} not strictly increasing (previous {last})"
                    )
                if not math.isfinite(v):
                    raise DataFormatError(f"line {lineno}: non-finite value {v_str!r}")
                idx.append(i)
                val.append(v)
                last = i
            max_index = max(max_index, last)
            rows.append((idx, val))
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    p = max_index if n_features is None else n_features
    if p < max_index:
        raise DataFormatError(f"{path}: index {max_index} exceeds n_features={p}")
    if p < 1:
        raise DataFormatError(f"{path}: no features")
    X = np.zeros((len(rows), p))
    for r, (idx, val) in enumerate(rows):
        X[r, np.asarray(idx, dtype=np.int64) - 1] = val
    X, y = _shuffle(X, np.asarray(labels), seed)
    return Dataset(X, y, shuffle_seed=seed)


def load_csv(path, seed: int = 0) -> Dataset:
    """Read a CSV file with header ``label,f1,...,fp``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "label" or len(header) < 2:
            raise DataFormatError(f"{path}: header must be 'label,f1,...,fp'")
        p = len(header) - 1
        labels, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != p + 1:
                raise DataFormatError(f"line {lineno}: expected {p + 1} fields, got {len(rec)}")
            labels.append(_map_label(rec[0], lineno))
            try:
                rows.append([float(v) for v in rec[1:]])
            except ValueError:
                raise DataFormatError(f"line {lineno}: non-numeric feature") from None
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    X, y = _shuffle(np.asarray(rows), np.asarray(labels), seed)
    return Dataset(X, y, shuffle_seed=seed)


def synth_logistic(n: int, p: int, seed: int = 0, separation: float = 1.0) -> Dataset:
    """Sample a logistic-model dataset with standard-normal features.

    Ground-truth coordinates are i.i.d. ``N(0, separation^2)``; labels are
    drawn with ``P(y=+1 | x) = sigmoid(<w_true, x>)``.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    rng = np.random.default_rng(seed)
    w_true = separation * rng.standard_normal(p)
    X = rng.standard_normal((n, p))
    y = np.where(rng.random(n) < expit(X @ w_true), 1.0, -1.0)
    return Dataset(X, y, shuffle_seed=seed, ground_truth=w_true)


def normalize_maxabs(data: Dataset) -> Dataset:
    """Scale every column by its maximum absolute value (all-zero columns kept)."""
    scale = np.abs(data.features).max(axis=0)
    scale[scale == 0.0] = 1.0
    truth = None if data.ground_truth is None else data.ground_truth * scale
    return Dataset(data.features / scale, data.labels, data.shuffle_seed, truth)


@dataclass(frozen=True)
class LossModel:
    """A generalized-linear per-sample loss ``f(w; x, y) = phi(<w, x>, y)``.

    ``slope`` and ``curvature`` are the first and second derivatives of phi
    with respect to the margin, so the per-sample gradient is ``slope * x``
    and the per-sample Hessian is ``curvature * x x^T``.
    """

    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in ("logistic", "quadratic"):
            raise ValueError(f"unknown loss kind {self.kind!r}")

    def value(self, z, y):
        if self.kind == "logistic":
            return np.logaddexp(0.0, -y * z)
        return 0.5 * (z - y) ** 2

    def slope(self, z, y):
        if self.kind == "logistic":
            return -y * expit(-y * z)
        return z - y

    def curvature(self, z, y):
        if self.kind == "logistic":
            return expit(z) * expit(-z)
        return np.ones_like(np.asarray(z, dtype=float))

    def sample_gradient(self, w, x, y):
        return self.slope(x @ w, y) * x

    def sample_hessian(self, w, x, y):
        return self.curvature(x @ w, y) * np.outer(x, x)


LOGISTIC = LossModel("logistic")
QUADRATIC = LossModel("quadratic")


@dataclass(frozen=True)
class AccuracyPolicy:
    """Statistical accuracy ``V_n = scale / n`` or ``scale / sqrt(n)``."""

    kind: str = "inverse_n"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("inverse_n", "inverse_sqrt_n"):
            raise ValueError(f"unknown accuracy policy {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("policy scale must be positive")

    def __call__(self, n: int) -> float:
        return accuracy(self, n)


def accuracy(policy: AccuracyPolicy, n: int) -> float:
    if n < 1:
        raise ValueError(f"accuracy undefined for n={n}")
    if policy.kind == "inverse_n":
        return policy.scale / n
    return policy.scale / math.sqrt(n)


@dataclass(frozen=True)
class RiskConfig:
    """Parameters of the regularized risk R_n for every sample size n."""

    c: float = 200.0
    policy: AccuracyPolicy = AccuracyPolicy()
    lipschitz_M: float = 1.0
    loss: LossModel = LOGISTIC

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("regularization constant c must be positive")
        if not self.lipschitz_M > 0:
            raise ValueError("Lipschitz constant M must be positive")

    def V(self, n: int) -> float:
        return accuracy(self.policy, n)

    def reg(self, n: int) -> float:
        """The ridge weight c * V_n."""
        return self.c * accuracy(self.policy, n)
