"""Synthetic datasets, CSV ingestion and train/test/OOD splits."""

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateSplit, MissingFile, ParseError, UnknownColumn

TASKS = ("classification", "regression")


@dataclass
class Dataset:
    """Inputs ``(n, d)`` with integer class labels or real targets ``(n, k)``.

    ``descriptor`` records how the data was produced so a test run can
    rebuild it from an archive.
    """

    inputs: np.ndarray
    targets: np.ndarray
    task: str
    feature_names: list = field(default_factory=list)
    descriptor: dict | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError(f"inputs must be a non-empty (n, d) matrix, got {self.inputs.shape}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.task == "classification":
            self.targets = np.asarray(self.targets).astype(np.int64).ravel()
            if self.targets.min() < 0:
                raise ValueError("class labels must be >= 0")
        else:
            self.targets = np.asarray(self.targets, dtype=np.float64).reshape(self.n, -1)
        if self.targets.shape[0] != self.n:
            raise ValueError("targets and inputs differ in length")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.dim)]

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def n_outputs(self):
        """Number of classes (classification) or target columns (regression)."""
        if self.task == "classification":
            return int(self.targets.max()) + 1
        return self.targets.shape[1]

    def subset(self, idx):
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx])


def _centers(n_classes, dim, separation):
    if dim == 1:
        return np.linspace(-separation, separation, n_classes).reshape(-1, 1)
    if dim == 2 or n_classes > dim:
        angles = 2 * np.pi * np.arange(n_classes) / n_classes
        c = np.zeros((n_classes, dim))
        c[:, 0] = separation * np.cos(angles)
        c[:, 1] = separation * np.sin(angles)
        return c
    # vertices of a regular simplex, centred, at distance `separation` from the origin
    v = np.eye(dim)[:n_classes]
    v = v - v.mean(axis=0)
    norm = np.linalg.norm(v[0])
    return separation * v / norm if norm > 0 else v


def make_blobs(n_per_class, n_classes=2, dim=2, separation=3.0, seed=0):
    """Balanced unit-variance Gaussian clusters.

    Centres sit on a circle of radius ``separation`` (``dim=2``), on the
    vertices of a simplex (``dim > 2``), or evenly on ``[-sep, sep]``
    (``dim=1``).
    """
    if min(n_per_class, n_classes, dim) < 1:
        raise ValueError("n_per_class, n_classes and dim must all be >= 1")
    rng = np.random.default_rng(seed)
    centers = _centers(n_classes, dim, separation)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    inputs = centers[labels] + rng.standard_normal((labels.size, dim))
    desc = {"name": "blobs", "n_per_class": n_per_class, "n_classes": n_classes,
            "dim": dim, "separation": separation, "seed": seed}
    return Dataset(inputs, labels, "classification", descriptor=desc)


def make_sine(n, noise=0.1, seed=0):
    """``y = sin(2 pi x) + noise * eps`` with ``x ~ U[-1, 1]``."""
    if n < 1 or noise < 0:
        raise ValueError("need n >= 1 and noise >= 0")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 1))
    y = np.sin(2 * np.pi * x) + noise * rng.standard_normal((n, 1))
    return Dataset(x, y, "regression", ["x"],
                   descriptor={"name": "sine", "n": n, "noise": noise, "seed": seed})


def load_csv(path, target_col, task="classification"):
    """Read a headed, comma-separated numeric file.

    Raises
    ------
    MissingFile, UnknownColumn, ParseError
    """
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(0, None, "missing header row") from None
        header = [h.strip() for h in header]
        if target_col not in header:
            raise UnknownColumn(target_col)
        rows = []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(r, None, f"expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(r, name, f"not a number: {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise ParseError(1, None, "no data rows")
    table = np.array(rows, dtype=np.float64)
    j = header.index(target_col)
    features = [h for h in header if h != target_col]
    inputs = np.delete(table, j, axis=1)
    y = table[:, j]
    if task == "classification":
        bad = np.flatnonzero(y != np.round(y))
        if bad.size:
            raise ParseError(int(bad[0]) + 1, target_col, "class label is not an integer")
    desc = {"name": "csv", "path": os.path.abspath(path), "target_col": target_col, "task": task}
    return Dataset(inputs, y, task, features, descriptor=desc)


def write_csv(path, dataset, target_col="target"):
    """Write a dataset so that :func:`load_csv` reproduces it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [target_col])
        targets = dataset.targets.reshape(dataset.n, -1)[:, 0]
        for x, y in zip(dataset.inputs, targets):
            w.writerow([repr(float(v)) for v in x] + [repr(y.item())])


def split(dataset, train_fraction, seed=0):
    """Seeded random partition into ``(train, test)``; train gets ``floor(f * n)`` rows."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(math.floor(train_fraction * dataset.n))
    if n_train == 0 or n_train == dataset.n:
        raise DegenerateSplit(f"split of {dataset.n} rows at {train_fraction} leaves a side empty")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def ood_shift(dataset, offset):
    """Copy of ``dataset`` with a constant offset added to every input row."""
    offset = np.broadcast_to(np.asarray(offset, dtype=np.float64), (dataset.dim,))
    return replace(dataset, inputs=dataset.inputs + offset)


def from_descriptor(desc):
    """Rebuild a dataset from the ``descriptor`` recorded on it."""
    name = desc["name"]
    if name == "blobs":
        return make_blobs(desc["n_per_class"], desc["n_classes"], desc["dim"],
                          desc["separation"], desc["seed"])
    if name == "sine":
        return make_sine(desc["n"], desc["noise"], desc["seed"])
    if name == "csv":
        return load_csv(desc["path"], desc["target_col"], desc["task"])
    raise ValueError(f"unknown dataset {name!r}")
