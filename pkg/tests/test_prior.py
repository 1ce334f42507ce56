import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from bnnmc import prior as P
from bnnmc.errors import (
    CyclicHierarchy,
    DimensionMismatch,
    DomainError,
    EmptyMixture,
    InvalidHyperprior,
    MissingHyperparameters,
    NegativeWeight,
    NonPositiveScale,
    NonPSDCovariance,
)
from bnnmc.prior import PriorSpec

from oracles import central_differences, max_relative_error

UNIVARIATE = [
    PriorSpec.gaussian(0.3, 1.7),
    PriorSpec.laplace(-0.2, 0.8),
    PriorSpec.student_t(3.0, 0.1, 0.6),
    PriorSpec.cauchy(0.5, 2.0),
]

COV = [[1.0, 0.4, 0.0], [0.4, 2.0, -0.3], [0.0, -0.3, 0.5]]


def all_kinds():
    return UNIVARIATE + [
        PriorSpec.mv_gaussian([0.1, -0.2, 0.3], COV),
        PriorSpec.mv_t(4.0, [0.0, 1.0, 0.0], COV),
        PriorSpec.mixture([PriorSpec.gaussian(0, 0.5), PriorSpec.laplace(1.0, 1.0),
                           PriorSpec.student_t(2.5)], [0.2, 0.3, 0.5]),
    ]


class TestValidate:
    def test_gaussian_ok(self):
        P.validate(PriorSpec.gaussian(0, 1))

    def test_zero_scale(self):
        with pytest.raises(NonPositiveScale, match=r"prior\.params\.scale"):
            P.validate(PriorSpec.gaussian(0, 0))

    def test_empty_mixture(self):
        with pytest.raises(EmptyMixture):
            P.validate(PriorSpec.mixture([], []))

    def test_negative_weight_names_path(self):
        spec = PriorSpec.mixture([PriorSpec.gaussian(), PriorSpec.cauchy()], [1.0, -0.5])
        with pytest.raises(NegativeWeight, match=r"weights\[1\]"):
            P.validate(spec)

    def test_non_psd(self):
        with pytest.raises(NonPSDCovariance):
            P.validate(PriorSpec.mv_gaussian([0, 0], [[1, 2], [2, 1]]))

    def test_asymmetric_cov(self):
        with pytest.raises(NonPSDCovariance):
            P.validate(PriorSpec.mv_gaussian([0, 0], [[1, 0.5], [0.0, 1]]))

    def test_nested_path(self):
        spec = PriorSpec.mixture([PriorSpec.gaussian(), PriorSpec.laplace(0, -1)])
        with pytest.raises(NonPositiveScale, match=r"components\[1\]\.params\.scale"):
            P.validate(spec)

    def test_bad_df(self):
        with pytest.raises(DomainError):
            P.validate(PriorSpec.student_t(0.0))

    def test_cycle(self):
        spec = PriorSpec.hierarchical("Gaussian", {})
        spec.hyperpriors["scale"] = spec
        with pytest.raises(CyclicHierarchy):
            P.validate(spec)

    def test_positive_hyperprior_must_be_centered(self):
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.gaussian(1.0, 1.0)})
        with pytest.raises(InvalidHyperprior):
            P.validate(spec)

    def test_hierarchical_nested_valid(self):
        inner = PriorSpec.hierarchical("Cauchy", {"scale": PriorSpec.gaussian(0, 2)})
        spec = PriorSpec.hierarchical("StudentT", {"scale": inner, "loc": PriorSpec.laplace(1, 1)},
                                      df=3.0)
        P.validate(spec)
        assert P.hyper_paths(spec) == [("loc", False), ("scale", True), ("scale.scale", True)]

    def test_mixture_dimension_conflict(self):
        spec = PriorSpec.mixture([PriorSpec.mv_gaussian([0, 0], np.eye(2)),
                                  PriorSpec.mv_gaussian([0, 0, 0], np.eye(3))])
        with pytest.raises(DimensionMismatch):
            P.validate(spec)


class TestLogDensity:
    def test_gaussian_peak(self):
        r = P.log_density(PriorSpec.gaussian(0, 1), [0.0])
        assert r.value == pytest.approx(-0.9189385, abs=1e-7)
        assert r.value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)

    def test_cauchy_at_one(self):
        # log(1 / (2 pi)) and -2x / (1 + x^2) at x = 1
        r = P.log_density(PriorSpec.cauchy(0, 1), [1.0])
        assert r.value == pytest.approx(-1.8378770664093453, abs=1e-14)
        np.testing.assert_allclose(r.gradient, [-1.0], atol=1e-15)

    @pytest.mark.parametrize("x", [-30.0, -2.5, -0.1, 0.0, 0.7, 4.0, 1e3])
    def test_student_t_one_is_cauchy(self, x):
        a = P.log_density(PriorSpec.student_t(1.0), [x])
        b = P.log_density(PriorSpec.cauchy(), [x])
        assert abs(a.value - b.value) <= 1e-12
        np.testing.assert_allclose(a.gradient, b.gradient, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("spec,ref", [
        (PriorSpec.gaussian(0.3, 1.7), stats.norm(0.3, 1.7)),
        (PriorSpec.laplace(-0.2, 0.8), stats.laplace(-0.2, 0.8)),
        (PriorSpec.student_t(3.0, 0.1, 0.6), stats.t(3.0, 0.1, 0.6)),
        (PriorSpec.cauchy(0.5, 2.0), stats.cauchy(0.5, 2.0)),
    ])
    def test_univariate_matches_scipy(self, spec, ref):
        x = np.linspace(-6, 6, 41)
        assert P.log_density(spec, x).value == pytest.approx(ref.logpdf(x).sum(), rel=1e-12)

    def test_mv_gaussian_matches_scipy(self):
        x = np.array([0.5, -1.0, 2.0])
        ref = stats.multivariate_normal([0.1, -0.2, 0.3], COV).logpdf(x)
        assert P.log_density(PriorSpec.mv_gaussian([0.1, -0.2, 0.3], COV), x).value == \
            pytest.approx(ref, rel=1e-12)

    def test_mv_t_matches_scipy(self):
        x = np.array([0.5, -1.0, 2.0])
        ref = stats.multivariate_t([0.0, 1.0, 0.0], COV, df=4.0).logpdf(x)
        assert P.log_density(PriorSpec.mv_t(4.0, [0.0, 1.0, 0.0], COV), x).value == \
            pytest.approx(ref, rel=1e-12)

    def test_mv_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            P.log_density(PriorSpec.mv_gaussian([0, 0], np.eye(2)), [1.0, 2.0, 3.0])

    def test_mixture_matches_direct_sum(self):
        spec = PriorSpec.mixture([PriorSpec.gaussian(-1, 0.5), PriorSpec.cauchy(2, 1)], [1, 3])
        x = np.array([-0.4, 1.1, 5.0])
        direct = np.log(0.25 * stats.norm(-1, 0.5).pdf(x) + 0.75 * stats.cauchy(2, 1).pdf(x))
        assert P.log_density(spec, x).value == pytest.approx(direct.sum(), rel=1e-12)

    def test_mixture_default_weights_equal(self):
        comps = [PriorSpec.gaussian(-1, 1), PriorSpec.gaussian(1, 1)]
        a = P.log_density(PriorSpec.mixture(comps), [0.3]).value
        b = P.log_density(PriorSpec.mixture(comps, [0.5, 0.5]), [0.3]).value
        assert a == b

    def test_mixture_of_one_is_component(self):
        for comp in all_kinds():
            d = P.element_dim(comp)
            x = np.random.default_rng(0).normal(size=d if d > 1 else 5)
            a = P.log_density(PriorSpec.mixture([comp]), x)
            b = P.log_density(comp, x)
            assert a.value == b.value
            np.testing.assert_array_equal(a.gradient, b.gradient)

    def test_hierarchical_needs_values(self):
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.cauchy()})
        with pytest.raises(MissingHyperparameters):
            P.log_density(spec, [0.0])

    def test_hierarchical_natural_scale(self):
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.cauchy(0, 2)})
        x = np.array([0.3, -1.2])
        r = P.log_density(spec, x, hyper={"scale": 0.7})
        expected = stats.norm(0, 0.7).logpdf(x).sum() + stats.halfcauchy(0, 2).logpdf(0.7)
        assert r.value == pytest.approx(expected, rel=1e-12)

    def test_hierarchical_rejects_nonpositive_scale(self):
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.cauchy()})
        with pytest.raises(NonPositiveScale):
            P.log_density(spec, [0.0], hyper={"scale": -1.0})

    def test_hierarchical_df_domain(self):
        spec = PriorSpec.hierarchical("StudentT", {"df": PriorSpec.gaussian(0, 3)}, scale=1.0)
        with pytest.raises(DomainError):
            P.log_density(spec, [0.0], hyper={"df": 0.0})

    def test_unconstrained_adds_jacobian(self):
        spec = PriorSpec.hierarchical("Laplace", {"scale": PriorSpec.gaussian(0, 1)})
        x = np.array([0.2, 0.9])
        nat, _, _ = P.log_joint(spec, x, {"scale": 1.5}, unconstrained=False)
        unc, _, _ = P.log_joint(spec, x, {"scale": math.log(1.5)})
        assert unc - nat == pytest.approx(math.log(1.5), abs=1e-14)

    def test_half_prior_normalised(self):
        # folded hyperprior pushed to log coordinates integrates to one
        from scipy.integrate import quad
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.student_t(3, 0, 0.5)})
        total, _ = quad(lambda u: math.exp(P.log_joint(spec, np.array([]), {"scale": u})[0]),
                        -40, 40, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)


def _random_point(spec, rng):
    d = P.element_dim(spec)
    return rng.normal(scale=1.5, size=d if d > 1 else 4)


class TestGradients:
    @pytest.mark.parametrize("spec", all_kinds(), ids=lambda s: s.kind)
    def test_finite_differences(self, spec):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = _random_point(spec, rng)
            g = P.log_density(spec, x).gradient
            fd = central_differences(lambda z: P.log_density(spec, z).value, x)
            assert max_relative_error(g, fd) <= 1e-6

    def test_hierarchical_joint_gradient(self):
        inner = PriorSpec.hierarchical("Cauchy", {"scale": PriorSpec.gaussian(0, 2)})
        spec = PriorSpec.hierarchical(
            "StudentT", {"scale": inner, "loc": PriorSpec.laplace(1, 1),
                         "df": PriorSpec.gaussian(0, 5)})
        paths = [p for p, _ in P.hyper_paths(spec)]
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.normal(size=6)
            h = rng.normal(scale=0.5, size=len(paths))
            z = np.concatenate([x, h])

            def f(z):
                return P.log_joint(spec, z[:6], dict(zip(paths, z[6:])))[0]

            value, gx, gh = P.log_joint(spec, x, dict(zip(paths, h)))
            g = np.concatenate([gx, [gh[p] for p in paths]])
            assert max_relative_error(g, central_differences(f, z)) <= 1e-6


class TestNormalisation:
    @pytest.mark.parametrize("spec", [UNIVARIATE[0], UNIVARIATE[1], UNIVARIATE[2]],
                             ids=lambda s: s.kind)
    def test_trapezoid_40_scales(self, spec):
        loc, scale = spec.params["loc"], spec.params["scale"]
        x = np.linspace(loc - 40 * scale, loc + 40 * scale, 400_001)
        z = np.exp(P._rows(spec, x.reshape(-1, 1))[0])
        assert 0.999 <= trapezoid(z, x) <= 1.001

    def test_cauchy_tangent_substitution(self):
        # +-40 scale units miss ~1.6% of Cauchy mass; integrate on the real line
        # through theta = loc + scale * tan(u) instead
        spec = UNIVARIATE[3]
        loc, scale = spec.params["loc"], spec.params["scale"]
        u = np.linspace(-np.pi / 2, np.pi / 2, 200_001)[1:-1]
        x = loc + scale * np.tan(u)
        z = np.exp(P._rows(spec, x.reshape(-1, 1))[0]) * scale / np.cos(u) ** 2
        assert 0.999 <= trapezoid(z, u) <= 1.001


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(perm_seed=st.integers(0, 10_000), x=st.lists(st.floats(-20, 20), min_size=1, max_size=6))
    def test_mixture_permutation_invariance(self, perm_seed, x):
        comps = [PriorSpec.gaussian(-1, 0.5), PriorSpec.laplace(2, 1), PriorSpec.student_t(4)]
        w = [0.1, 0.6, 0.3]
        perm = np.random.default_rng(perm_seed).permutation(3)
        a = P.log_density(PriorSpec.mixture(comps, w), x)
        b = P.log_density(PriorSpec.mixture([comps[i] for i in perm], [w[i] for i in perm]), x)
        assert a.value == pytest.approx(b.value, rel=1e-13, abs=1e-13)
        np.testing.assert_allclose(a.gradient, b.gradient, rtol=1e-12, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(mu=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           sigma=st.floats(0.1, 10), x=st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    def test_isotropic_mvn_is_product(self, mu, sigma, x):
        mv = P.log_density(PriorSpec.mv_gaussian(mu, sigma**2 * np.eye(3)), x).value
        uni = sum(P.log_density(PriorSpec.gaussian(m, sigma), [v]).value for m, v in zip(mu, x))
        assert abs(mv - uni) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(x=st.lists(st.floats(-50, 50), min_size=1, max_size=5), k=st.integers(0, 6))
    def test_gradient_property(self, x, k):
        spec = all_kinds()[k]
        if P.element_dim(spec) > 1:
            x = (x * 3)[:3]
            if len(x) < 3:
                x = x + [0.5] * (3 - len(x))
        x = np.asarray(x, dtype=float)
        if spec.kind == "Laplace":
            x = x[np.abs(x - spec.params["loc"]) > 1e-3]
            if x.size == 0:
                return
        g = P.log_density(spec, x).gradient
        fd = central_differences(lambda z: P.log_density(spec, z).value, x)
        assert max_relative_error(g, fd) <= 1e-6


class TestSample:
    def test_gaussian_mean(self):
        x = P.sample(PriorSpec.gaussian(0, 1), np.random.default_rng(0), 100_000)
        assert x.shape == (100_000, 1)
        assert abs(x.mean()) < 4 / math.sqrt(1e5)

    def test_degenerate_mixture(self):
        spec = PriorSpec.mixture([PriorSpec.gaussian(-5, 0.1), PriorSpec.gaussian(5, 0.1)], [1, 0])
        x = P.sample(spec, np.random.default_rng(0), 1000)
        assert np.all(np.abs(x + 5) < 1.0)

    def test_mvn_reproducible(self):
        spec = PriorSpec.mv_gaussian([0, 0], np.eye(2))
        a = P.sample(spec, np.random.default_rng(7), 50)
        b = P.sample(spec, np.random.default_rng(7), 50)
        assert a.tobytes() == b.tobytes()

    def test_mvn_covariance(self):
        cov = np.array([[2.0, 0.6], [0.6, 0.5]])
        x = P.sample(PriorSpec.mv_gaussian([1, -1], cov), np.random.default_rng(1), 200_000)
        np.testing.assert_allclose(x.mean(0), [1, -1], atol=0.02)
        np.testing.assert_allclose(np.cov(x.T), cov, atol=0.02)

    @pytest.mark.parametrize("spec,ref", [
        (PriorSpec.laplace(1, 2), stats.laplace(1, 2)),
        (PriorSpec.student_t(5, 0, 2), stats.t(5, 0, 2)),
        (PriorSpec.cauchy(0, 1), stats.cauchy(0, 1)),
    ])
    def test_univariate_ks(self, spec, ref):
        x = P.sample(spec, np.random.default_rng(3), 5000).ravel()
        assert stats.kstest(x, ref.cdf).pvalue > 0.01

    def test_mixture_weights_frequency(self):
        spec = PriorSpec.mixture([PriorSpec.gaussian(-10, 0.1), PriorSpec.gaussian(10, 0.1)],
                                 [0.3, 0.7])
        x = P.sample(spec, np.random.default_rng(4), 100_000).ravel()
        assert abs(np.mean(x > 0) - 0.7) < 4 * math.sqrt(0.21 / 1e5)

    def test_hierarchical_marginal(self):
        # scale ~ half-normal: marginal draws are symmetric with heavier tails than N(0, 1)
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.gaussian(0, 1)})
        x = P.sample(spec, np.random.default_rng(5), 100_000).ravel()
        assert abs(x.mean()) < 0.02
        # E[x^2] = E[scale^2] = 1 for a half-normal(1) scale
        assert x.var() == pytest.approx(1.0, abs=0.03)

    def test_sample_group_hyper_positive(self):
        spec = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.cauchy()})
        values, hyper = P.sample_group(spec, np.random.default_rng(0), 10)
        assert values.shape == (10,) and set(hyper) == {"scale"}
        assert math.isfinite(hyper["scale"])


class TestJson:
    def test_field_names(self):
        d = json.loads(PriorSpec.gaussian(0, 1).to_json())
        assert set(d) == {"kind", "params", "components", "weights", "hyperpriors"}

    def test_round_trip(self):
        spec = PriorSpec.mixture([
            PriorSpec.hierarchical("StudentT", {"scale": PriorSpec.cauchy()}, df=3.0),
            PriorSpec.mv_gaussian([0, 0], np.eye(2)),
        ], [0.4, 0.6])
        assert PriorSpec.from_json(spec.to_json()) == spec
