"""Predictive metrics and tempering-curve tables."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionMismatch, DuplicateTemperature, EmptyInput

METRICS_COLUMNS = ("temperature", "accuracy", "log_lik", "ece", "auroc")


@dataclass
class MetricReport:
    """Test-set metrics of one run. Regression runs leave ``accuracy``/``ece`` as NaN."""

    temperature: float
    accuracy: float
    log_lik: float
    ece: float
    auroc: float

    def row(self):
        return [repr(float(getattr(self, c))) for c in METRICS_COLUMNS]


def _check_probs(probs, targets):
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets).astype(np.int64).ravel()
    if probs.ndim != 2 or probs.shape[0] != targets.size:
        raise DimensionMismatch(f"probabilities {probs.shape} do not match {targets.size} targets")
    if not np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ValueError("probability rows must sum to 1")
    return probs, targets


def classification_metrics(probs, targets):
    """Accuracy (argmax) and mean log probability of the targets."""
    probs, targets = _check_probs(probs, targets)
    accuracy = float(np.mean(np.argmax(probs, axis=1) == targets))
    with np.errstate(divide="ignore"):
        log_lik = float(np.mean(np.log(probs[np.arange(targets.size), targets])))
    return accuracy, log_lik


def ece(probs, targets, bins=15):
    """Expected calibration error over equal-width max-probability bins.

    Bins are ``(k/B, (k+1)/B]``, with confidences of exactly 0 placed in the
    first bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    probs, targets = _check_probs(probs, targets)
    conf = probs.max(axis=1)
    correct = (np.argmax(probs, axis=1) == targets).astype(float)
    idx = np.clip(np.ceil(conf * bins).astype(np.int64) - 1, 0, bins - 1)
    n = conf.size
    total = 0.0
    for b in np.unique(idx):
        m = idx == b
        total += m.sum() / n * abs(correct[m].mean() - conf[m].mean())
    return float(total)


def predictive_entropy(probs):
    p = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)


def ood_auroc(in_scores, ood_scores):
    """AUROC for separating OOD points (higher score) from in-distribution ones.

    Mann-Whitney rank statistic; ties count one half.
    """
    a = np.asarray(in_scores, dtype=np.float64).ravel()
    b = np.asarray(ood_scores, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both score lists must be non-empty")
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[a.size:].sum() - b.size * (b.size + 1) / 2.0
    return float(u / (a.size * b.size))


def tempering_table(reports):
    """Reports sorted by ascending temperature.

    Raises
    ------
    DuplicateTemperature
        If two reports share a temperature.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports")
    temps = [r.temperature for r in reports]
    if len(set(temps)) != len(temps):
        raise DuplicateTemperature(f"duplicate temperatures in {temps}")
    return sorted(reports, key=lambda r: r.temperature)


def write_metrics_csv(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for r in reports:
            w.writerow(r.row())


def read_metrics_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [MetricReport(**{k: float(row[k]) for k in METRICS_COLUMNS}) for row in rows]


def in_valid_ranges(report):
    """True when every defined metric lies in its valid range."""
    for name in ("accuracy", "ece", "auroc"):
        v = getattr(report, name)
        if not (math.isnan(v) or 0.0 <= v <= 1.0):
            return False
    if math.isnan(report.accuracy):
        # regression: a log density, any finite value
        return math.isfinite(report.log_lik)
    return report.log_lik <= 0.0
