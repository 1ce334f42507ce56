import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnnmc import diagnostics as D
from bnnmc import sampler as S
from bnnmc.errors import EmptyChain
from bnnmc.sampler import ChainRecord

from oracles import batch_means, gaussian_potential


def _records(kin, conf, accept=None, burn=0):
    out = []
    for t, (k, c) in enumerate(zip(kin, conf)):
        out.append(ChainRecord(t, 0.1, np.atleast_1d(k), np.atleast_1d(c), 0.0,
                               accept, None if accept is None else 1.0, 0.0, t < burn))
    return out


class TestEstimators:
    def test_kinetic_examples(self):
        assert D.kinetic_temperature(np.zeros(3), np.ones(3), 3) == 0.0
        assert D.kinetic_temperature([1.0, 1.0], np.ones(2), 2) == 1.0

    def test_kinetic_mass(self):
        assert D.kinetic_temperature([2.0, 3.0], np.array([4.0, 9.0]), 2) == 1.0

    def test_kinetic_chi2_mean(self):
        rng = np.random.default_rng(0)
        d, n, T = 4, 100_000, 0.3
        mass = np.array([0.5, 1.0, 2.0, 8.0])
        p = rng.normal(size=(n, d)) * np.sqrt(T * mass)
        est = np.sum(p * p / mass, axis=1) / d
        assert abs(est.mean() - T) <= 4 * math.sqrt(2 / (d * n)) * T
        assert D.kinetic_temperature(p[0], mass, d) == pytest.approx(est[0], rel=1e-15)

    def test_configurational_examples(self):
        assert D.configurational_temperature([2.0], [2.0], 1) == 4.0
        assert D.configurational_temperature(np.zeros(5), np.ones(5), 5) == 0.0

    @pytest.mark.parametrize("T", [0.5, 1.0])
    def test_configurational_exact_samples(self, T):
        theta = np.random.default_rng(1).normal(scale=math.sqrt(T), size=100_000)
        est = theta * theta  # theta * grad U for U = theta^2 / 2
        mean, se = batch_means(est)
        assert abs(mean - T) <= 3 * se

    @settings(max_examples=100, deadline=None)
    @given(p=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=10), c=st.floats(-100, 100))
    def test_quadratic_scaling(self, p, c):
        p = np.array(p)
        mass = np.linspace(0.5, 2.0, p.size)
        a = D.kinetic_temperature(c * p, mass, p.size)
        b = c * c * D.kinetic_temperature(p, mass, p.size)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


class TestBatchMeans:
    def test_matches_reference(self):
        x = np.random.default_rng(0).normal(size=1003)
        assert D.batch_means_se(x) == pytest.approx(batch_means(x)[1], rel=1e-14)

    def test_constant_zero(self):
        assert D.batch_means_se(np.full(100, 0.7)) == 0.0

    def test_short(self):
        assert D.batch_means_se([1.0, 1.0, 1.0]) == 0.0
        assert D.batch_means_se([1.0, 2.0]) == math.inf

    def test_empty(self):
        with pytest.raises(EmptyChain):
            D.batch_means_se([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300))
    def test_non_negative(self, x):
        assert D.batch_means_se(x) >= 0


class TestSummarize:
    layout = [("w", slice(0, 3))]

    def test_constant_at_T_passes(self):
        recs = _records([0.3] * 50, [0.3] * 50, accept=True)
        s = D.summarize(recs, self.layout, 0.3)
        assert s.verdicts == {("w", "kinetic"): "PASS", ("w", "configurational"): "PASS"}
        assert s.kinetic["w"].se == 0.0
        assert s.acceptance_rate == 1.0

    def test_double_T_flags(self):
        recs = _records([2.0] * 50, [2.0] * 50)
        s = D.summarize(recs, self.layout, 1.0)
        assert set(s.verdicts.values()) == {"FLAG"}
        assert not s.all_pass()

    def test_burn_in_excluded(self):
        recs = _records([5.0] * 10 + [1.0] * 40, [5.0] * 10 + [1.0] * 40, burn=10)
        post = D.summarize(recs, self.layout, 1.0)
        full = D.summarize(recs, self.layout, 1.0, include_burn_in=True)
        assert post.all_pass() and post.kinetic["w"].values.size == 40
        assert full.kinetic["w"].mean == pytest.approx(90 / 50)

    def test_empty(self):
        with pytest.raises(EmptyChain):
            D.summarize([], self.layout, 1.0)
        with pytest.raises(EmptyChain):
            D.summarize(_records([1.0], [1.0], burn=1), self.layout, 1.0)

    def test_sgld_has_no_kinetic_verdict(self):
        recs = _records([np.nan] * 20, [1.0] * 20)
        s = D.summarize(recs, self.layout, 1.0)
        assert list(s.verdicts) == [("w", "configurational")]
        assert s.acceptance_rate is None

    def test_running_mean(self):
        series = D.TemperatureSeries.from_values("w", "kinetic", [1.0, 3.0, 2.0])
        np.testing.assert_allclose(series.running_mean, [1.0, 2.0, 2.0])

    def test_gaussian_toy_passes(self):
        fn = gaussian_potential(np.ones(10))
        cfg = S.SamplerConfig(kind="ggmc", step_size=0.05, steps=20_000, burn_in=1000)
        _, recs, _ = S.sample_potential(fn, np.zeros(10), cfg, schedule=S.constant_schedule)
        s = D.summarize(recs, [("theta", slice(0, 10))], 1.0)
        assert s.all_pass("kinetic") and s.all_pass("configurational"), s.lines()
        assert len(s.kinetic["theta"].values) == 20_000


class TestCsv:
    def test_columns_and_rows(self, tmp_path):
        recs = _records([1.0, 0.5], [0.9, 1.1], accept=True)
        recs[1].accept = False
        path = tmp_path / "diag.csv"
        D.write_diagnostics_csv(path, recs, [("w", slice(0, 1))])
        rows = list(csv.reader(open(path)))
        assert tuple(rows[0]) == D.DIAGNOSTICS_COLUMNS
        assert rows[1] == ["0", "w", "1.0", "0.9", "0.1", "1", "0.0"]
        assert rows[2][5] == "0"

    def test_sgld_blank_cells(self, tmp_path):
        path = tmp_path / "diag.csv"
        D.write_diagnostics_csv(path, _records([np.nan], [1.0]), [{"name": "g"}])
        row = list(csv.reader(open(path)))[1]
        assert row[2] == "" and row[5] == "" and row[6] == "0.0"
