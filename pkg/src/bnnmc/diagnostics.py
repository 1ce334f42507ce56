"""Temperature diagnostics for tempered chains.

Both estimators have expectation ``T`` under the tempered target:

* kinetic, ``p^T M^-1 p / d`` with ``p ~ N(0, T M)``;
* configurational, ``theta^T grad_U(theta) / d`` (integration by parts).

A chain whose estimates drift from the sampler temperature signals a step
size that is too large or a chain that has not converged.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyChain

DIAGNOSTICS_COLUMNS = ("step", "group", "kinetic_temp", "config_temp", "step_size",
                       "accept", "delta_H")


def kinetic_temperature(p, mass, d):
    p = np.asarray(p, dtype=np.float64)
    return float(np.sum(p * p / mass)) / d


def configurational_temperature(theta, grad_U, d):
    return float(np.dot(np.ravel(theta), np.ravel(grad_U))) / d


def batch_means_se(x):
    """Standard error of the mean of a correlated series, from ``floor(sqrt(n))`` batch means.

    The leading ``n mod n_batches`` values are dropped so batches have equal
    length. Returns 0 for a series of fewer than two batches with no spread.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n == 0:
        raise EmptyChain("empty series")
    b = math.isqrt(n)
    if b < 2:
        return 0.0 if np.all(x == x[0]) else math.inf
    m = n // b
    means = x[n - b * m:].reshape(b, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


@dataclass
class TemperatureSeries:
    group: str
    estimator: str
    values: np.ndarray
    mean: float
    se: float
    running_mean: np.ndarray

    @classmethod
    def from_values(cls, group, estimator, values):
        values = np.asarray(values, dtype=np.float64)
        running = np.cumsum(values) / np.arange(1, values.size + 1)
        return cls(group, estimator, values, float(values.mean()), batch_means_se(values), running)

    def verdict(self, temperature, n_se=3.0):
        """``"PASS"`` if the mean lies within ``n_se`` standard errors of ``temperature``."""
        # slack for round-off in the mean of a constant series
        slack = 8 * np.finfo(float).eps * max(abs(temperature), abs(self.mean), 1.0)
        return "PASS" if abs(self.mean - temperature) <= n_se * self.se + slack else "FLAG"


@dataclass
class ChainSummary:
    temperature: float
    kinetic: dict
    configurational: dict
    verdicts: dict
    acceptance_rate: float | None
    mean_accept_prob: float | None

    def all_pass(self, estimator=None):
        keys = [k for k in self.verdicts if estimator is None or k[1] == estimator]
        return all(self.verdicts[k] == "PASS" for k in keys)

    def lines(self):
        out = []
        for (group, est), v in sorted(self.verdicts.items()):
            s = (self.kinetic if est == "kinetic" else self.configurational)[group]
            out.append(f"{v}  {est:<16} {group:<28} mean={s.mean:.5g} se={s.se:.2g} "
                       f"T={self.temperature:g}")
        if self.acceptance_rate is not None:
            out.append(f"acceptance rate {self.acceptance_rate:.4f}")
        return out


def group_names(layout):
    """Group names from ``[(name, slice), ...]`` or archive-style layout dicts."""
    return [g["name"] if isinstance(g, dict) else g[0] for g in layout]


def summarize(records, layout, temperature, include_burn_in=False, n_se=3.0):
    """Per-group temperature series, calibration verdicts and acceptance summary.

    Parameters
    ----------
    records : list of ChainRecord
    layout : list
        Group layout matching the per-record estimate arrays.
    temperature : float
        Sampler temperature each estimator is compared against.
    include_burn_in : bool
        Burn-in records are skipped unless set.

    Returns
    -------
    ChainSummary
        Verdicts are keyed by ``(group, estimator)``. Groups whose kinetic
        estimate is undefined (SGLD) only get a configurational verdict.
    """
    recs = [r for r in records if include_burn_in or not r.burn_in]
    if not recs:
        raise EmptyChain("no records to summarise")
    names = group_names(layout)
    kin = np.array([r.kinetic for r in recs], dtype=np.float64).reshape(len(recs), -1)
    conf = np.array([r.configurational for r in recs], dtype=np.float64).reshape(len(recs), -1)
    kinetic, configurational, verdicts = {}, {}, {}
    for j, name in enumerate(names):
        if not np.all(np.isnan(kin[:, j])):
            kinetic[name] = TemperatureSeries.from_values(name, "kinetic", kin[:, j])
            verdicts[(name, "kinetic")] = kinetic[name].verdict(temperature, n_se)
        configurational[name] = TemperatureSeries.from_values(name, "configurational", conf[:, j])
        verdicts[(name, "configurational")] = configurational[name].verdict(temperature, n_se)
    acc = [r.accept for r in recs if r.accept is not None]
    probs = [r.accept_prob for r in recs if r.accept_prob is not None]
    return ChainSummary(
        temperature, kinetic, configurational, verdicts,
        float(np.mean(acc)) if acc else None,
        float(np.mean(probs)) if probs else None,
    )


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return repr(float(x))


def write_diagnostics_csv(path, records, layout):
    """One row per (step, group) with the columns in :data:`DIAGNOSTICS_COLUMNS`."""
    names = group_names(layout)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(DIAGNOSTICS_COLUMNS)
        for r in records:
            for j, name in enumerate(names):
                kin = r.kinetic[j]
                w.writerow([r.t, name, "" if np.isnan(kin) else repr(float(kin)),
                            _fmt(r.configurational[j]), _fmt(r.step_size),
                            _fmt(r.accept), _fmt(r.delta_H)])
