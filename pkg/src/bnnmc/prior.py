"""Prior distributions over network weights.

A prior is described by a :class:`PriorSpec`, a small recursive record that
serialises to JSON. The functions in this module evaluate normalised log
densities with their gradients, draw samples, and validate parameter domains.

Univariate kinds (``Gaussian``, ``Laplace``, ``StudentT``, ``Cauchy``) act
elementwise on a weight vector and their log densities are summed. The
multivariate kinds act on blocks of length ``p``. ``Mixture`` is a normalised
weighted mixture whose components are themselves priors, and ``Hierarchical``
places priors on the hyperparameters of a univariate base kind.

Hyperparameters of hierarchical priors are sampled jointly with the weights.
Positive hyperparameters (``scale``, ``df``) are handled in log coordinates
``u = log(x)``; their hyperprior must be symmetric about zero and is folded
onto ``(0, inf)`` (half-normal, half-Cauchy, ...), which doubles its density.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .errors import (
    CyclicHierarchy,
    DimensionMismatch,
    DomainError,
    EmptyMixture,
    InvalidHyperprior,
    MissingHyperparameters,
    NegativeWeight,
    NonPositiveScale,
    NonPSDCovariance,
    PriorError,
)

UNIVARIATE_KINDS = ("Gaussian", "Laplace", "StudentT", "Cauchy")
MULTIVARIATE_KINDS = ("MultivariateGaussian", "MultivariateT")
KINDS = UNIVARIATE_KINDS + MULTIVARIATE_KINDS + ("Hierarchical", "Mixture")

# hyperparameters that must be > 0 and live in log coordinates when sampled
POSITIVE_PARAMS = frozenset({"scale", "df"})

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_2 = math.log(2.0)


@dataclass
class PriorSpec:
    """Recursive description of a prior.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    params : dict
        Hyperparameter values. For ``Hierarchical`` this holds ``base`` (the
        univariate base kind) and any base hyperparameters kept fixed.
    components : list of PriorSpec
        Mixture components.
    weights : list of float, optional
        Mixture weights; normalised on use, equal weights when omitted.
    hyperpriors : dict of str to PriorSpec
        Priors on named base hyperparameters (``Hierarchical`` only).
    """

    kind: str
    params: dict = field(default_factory=dict)
    components: list = field(default_factory=list)
    weights: list | None = None
    hyperpriors: dict = field(default_factory=dict)

    # convenience constructors ------------------------------------------

    @classmethod
    def gaussian(cls, loc=0.0, scale=1.0):
        return cls("Gaussian", {"loc": loc, "scale": scale})

    @classmethod
    def laplace(cls, loc=0.0, scale=1.0):
        return cls("Laplace", {"loc": loc, "scale": scale})

    @classmethod
    def student_t(cls, df, loc=0.0, scale=1.0):
        return cls("StudentT", {"df": df, "loc": loc, "scale": scale})

    @classmethod
    def cauchy(cls, loc=0.0, scale=1.0):
        return cls("Cauchy", {"loc": loc, "scale": scale})

    @classmethod
    def mv_gaussian(cls, loc, cov):
        return cls("MultivariateGaussian",
                   {"loc": [float(v) for v in loc], "cov": np.asarray(cov, float).tolist()})

    @classmethod
    def mv_t(cls, df, loc, cov):
        return cls("MultivariateT", {"df": df, "loc": [float(v) for v in loc],
                                     "cov": np.asarray(cov, float).tolist()})

    @classmethod
    def mixture(cls, components, weights=None):
        return cls("Mixture", components=list(components),
                   weights=None if weights is None else [float(w) for w in weights])

    @classmethod
    def hierarchical(cls, base, hyperpriors, **fixed):
        return cls("Hierarchical", {"base": base, **fixed}, hyperpriors=dict(hyperpriors))

    # serialisation -------------------------------------------------------

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "components": [c.to_dict() for c in self.components],
            "weights": None if self.weights is None else list(self.weights),
            "hyperpriors": {k: v.to_dict() for k, v in self.hyperpriors.items()},
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise PriorError("prior JSON must be an object with a 'kind' field")
        kind = d["kind"]
        if kind not in KINDS:
            raise PriorError(f"unknown prior kind {kind!r}")
        weights = d.get("weights")
        return cls(
            kind=kind,
            params=dict(d.get("params") or {}),
            components=[cls.from_dict(c) for c in d.get("components") or []],
            weights=None if weights is None else [float(w) for w in weights],
            hyperpriors={k: cls.from_dict(v) for k, v in (d.get("hyperpriors") or {}).items()},
        )

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class LogDensityResult:
    value: float
    gradient: np.ndarray


# ---------------------------------------------------------------------------
# univariate families
#
# Each family works on arrays: ``x`` and every parameter broadcast together.
# ``dparams`` returns elementwise derivatives of the log density with respect
# to each named hyperparameter.


class _Gaussian:
    names = ("loc", "scale")

    @staticmethod
    def logpdf(x, loc, scale):
        z = (x - loc) / scale
        return -0.5 * _LOG_2PI - np.log(scale) - 0.5 * z * z

    @staticmethod
    def dx(x, loc, scale):
        return -(x - loc) / scale**2

    @staticmethod
    def dparams(x, loc, scale):
        r = x - loc
        return {"loc": r / scale**2, "scale": -1.0 / scale + r * r / scale**3}

    @staticmethod
    def rvs(rng, size, loc, scale):
        return loc + scale * rng.standard_normal(size)


class _Laplace:
    names = ("loc", "scale")

    @staticmethod
    def logpdf(x, loc, scale):
        return -_LOG_2 - np.log(scale) - np.abs(x - loc) / scale

    @staticmethod
    def dx(x, loc, scale):
        return -np.sign(x - loc) / scale

    @staticmethod
    def dparams(x, loc, scale):
        r = x - loc
        return {"loc": np.sign(r) / scale, "scale": -1.0 / scale + np.abs(r) / scale**2}

    @staticmethod
    def rvs(rng, size, loc, scale):
        return loc + scale * rng.laplace(0.0, 1.0, size)


class _StudentT:
    names = ("df", "loc", "scale")

    @staticmethod
    def logpdf(x, df, loc, scale):
        z = (x - loc) / scale
        return (gammaln(0.5 * (df + 1.0)) - gammaln(0.5 * df)
                - 0.5 * np.log(df * math.pi) - np.log(scale)
                - 0.5 * (df + 1.0) * np.log1p(z * z / df))

    @staticmethod
    def dx(x, df, loc, scale):
        z = (x - loc) / scale
        return -(df + 1.0) * z / (scale * (df + z * z))

    @staticmethod
    def dparams(x, df, loc, scale):
        z = (x - loc) / scale
        z2 = z * z
        ddf = (0.5 * digamma(0.5 * (df + 1.0)) - 0.5 * digamma(0.5 * df) - 0.5 / df
               - 0.5 * np.log1p(z2 / df) + 0.5 * (df + 1.0) * z2 / (df * (df + z2)))
        return {
            "df": ddf,
            "loc": (df + 1.0) * z / (scale * (df + z2)),
            "scale": -1.0 / scale + (df + 1.0) * z2 / (scale * (df + z2)),
        }

    @staticmethod
    def rvs(rng, size, df, loc, scale):
        return loc + scale * rng.standard_t(df, size)


class _Cauchy:
    names = ("loc", "scale")

    @staticmethod
    def logpdf(x, loc, scale):
        z = (x - loc) / scale
        return -math.log(math.pi) - np.log(scale) - np.log1p(z * z)

    @staticmethod
    def dx(x, loc, scale):
        r = x - loc
        return -2.0 * r / (scale**2 + r * r)

    @staticmethod
    def dparams(x, loc, scale):
        r = x - loc
        return {"loc": 2.0 * r / (scale**2 + r * r),
                "scale": -1.0 / scale + 2.0 * r * r / (scale * (scale**2 + r * r))}

    @staticmethod
    def rvs(rng, size, loc, scale):
        return loc + scale * rng.standard_cauchy(size)


_FAMILIES = {"Gaussian": _Gaussian, "Laplace": _Laplace,
             "StudentT": _StudentT, "Cauchy": _Cauchy}


def _univariate_params(spec):
    fam = _FAMILIES[spec.kind]
    p = {"loc": 0.0, **spec.params}
    return {k: float(p[k]) for k in fam.names}


def _mixture_weights(spec):
    k = len(spec.components)
    if spec.weights is None:
        return np.full(k, 1.0 / k)
    w = np.asarray(spec.weights, dtype=float)
    return w / w.sum()


def _cholesky(spec):
    return np.linalg.cholesky(np.asarray(spec.params["cov"], dtype=float))


# ---------------------------------------------------------------------------
# validation


def validate(spec):
    """Check every parameter domain, recursively.

    Raises a subclass of :class:`~bnnmc.errors.PriorError` naming the path of
    the offending node, e.g. ``prior.components[1].params.scale``.
    """
    _validate(spec, "prior", ())


def _check_scale(value, path):
    try:
        ok = np.isfinite(value) and value > 0
    except TypeError:
        ok = False
    if not ok:
        raise NonPositiveScale(f"scale must be > 0, got {value!r}", path)


def _check_df(value, path):
    try:
        ok = np.isfinite(value) and value > 0
    except TypeError:
        ok = False
    if not ok:
        raise DomainError(f"degrees of freedom must be > 0, got {value!r}", path)


def _validate(spec, path, stack):
    if not isinstance(spec, PriorSpec):
        raise PriorError(f"expected PriorSpec, got {type(spec).__name__}", path)
    if id(spec) in stack:
        raise CyclicHierarchy("prior refers to itself", path)
    stack = stack + (id(spec),)
    kind = spec.kind
    if kind not in KINDS:
        raise PriorError(f"unknown prior kind {kind!r}", path)

    if kind in UNIVARIATE_KINDS:
        names = _FAMILIES[kind].names
        for name in names:
            if name not in spec.params and name != "loc":
                raise PriorError(f"missing parameter {name!r}", f"{path}.params")
        extra = set(spec.params) - set(names)
        if extra:
            raise PriorError(f"unknown parameters {sorted(extra)}", f"{path}.params")
        p = _univariate_params(spec)
        _check_scale(p["scale"], f"{path}.params.scale")
        if "df" in p:
            _check_df(p["df"], f"{path}.params.df")
        if not np.isfinite(p["loc"]):
            raise DomainError("loc must be finite", f"{path}.params.loc")

    elif kind in MULTIVARIATE_KINDS:
        loc = np.asarray(spec.params.get("loc", []), dtype=float)
        cov = np.asarray(spec.params.get("cov", []), dtype=float)
        if loc.ndim != 1 or loc.size == 0:
            raise PriorError("loc must be a non-empty vector", f"{path}.params.loc")
        if cov.shape != (loc.size, loc.size):
            raise DimensionMismatch(f"{path}.params.cov: expected shape "
                                    f"{(loc.size, loc.size)}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise NonPSDCovariance("covariance is not symmetric", f"{path}.params.cov")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NonPSDCovariance("Cholesky factorisation failed", f"{path}.params.cov") from None
        if kind == "MultivariateT":
            _check_df(spec.params.get("df"), f"{path}.params.df")

    elif kind == "Mixture":
        if not spec.components:
            raise EmptyMixture("mixture has no components", path)
        if spec.weights is not None:
            if len(spec.weights) != len(spec.components):
                raise DimensionMismatch(f"{path}.weights: {len(spec.weights)} weights for "
                                        f"{len(spec.components)} components")
            for i, w in enumerate(spec.weights):
                if not (w >= 0):
                    raise NegativeWeight(f"weight {w!r} < 0", f"{path}.weights[{i}]")
            if not sum(spec.weights) > 0:
                raise NegativeWeight("weights sum to zero", f"{path}.weights")
        dims = set()
        for i, comp in enumerate(spec.components):
            cpath = f"{path}.components[{i}]"
            _validate(comp, cpath, stack)
            if comp.kind == "Hierarchical":
                raise InvalidHyperprior("hierarchical mixture components are not supported", cpath)
            d = element_dim(comp)
            if d > 1:
                dims.add(d)
        if len(dims) > 1:
            raise DimensionMismatch(f"{path}: components have dimensions {sorted(dims)}")

    else:  # Hierarchical
        base = spec.params.get("base")
        if base not in _FAMILIES:
            raise PriorError(f"base must be one of {UNIVARIATE_KINDS}, got {base!r}",
                             f"{path}.params.base")
        names = _FAMILIES[base].names
        fixed = {k: v for k, v in spec.params.items() if k != "base"}
        if set(fixed) - set(names):
            raise PriorError(f"unknown parameters {sorted(set(fixed) - set(names))}",
                             f"{path}.params")
        if set(spec.hyperpriors) - set(names):
            raise PriorError(f"no hyperparameter(s) {sorted(set(spec.hyperpriors) - set(names))} "
                             f"on {base}", f"{path}.hyperpriors")
        if set(fixed) & set(spec.hyperpriors):
            raise PriorError(f"{sorted(set(fixed) & set(spec.hyperpriors))} both fixed and "
                             f"given a hyperprior", path)
        if not spec.hyperpriors:
            raise PriorError("hierarchical prior needs at least one hyperprior", path)
        for name in names:
            if name == "loc" or name in spec.hyperpriors:
                continue
            if name not in fixed:
                raise PriorError(f"missing parameter {name!r}", f"{path}.params")
            if name == "scale":
                _check_scale(fixed[name], f"{path}.params.scale")
            else:
                _check_df(fixed[name], f"{path}.params.df")
        for name, hp in spec.hyperpriors.items():
            hpath = f"{path}.hyperpriors.{name}"
            _validate(hp, hpath, stack)
            if element_dim(hp) != 1:
                raise InvalidHyperprior("hyperprior must be scalar", hpath)
            if name in POSITIVE_PARAMS and not _is_centered(hp):
                raise InvalidHyperprior(
                    f"hyperprior for positive parameter {name!r} must be symmetric about 0 "
                    f"(fixed loc = 0); it is folded onto (0, inf)", hpath)


def _is_centered(spec):
    if spec.kind in UNIVARIATE_KINDS:
        return float(spec.params.get("loc", 0.0)) == 0.0
    if spec.kind in MULTIVARIATE_KINDS:
        return all(v == 0.0 for v in spec.params["loc"])
    if spec.kind == "Mixture":
        return all(_is_centered(c) for c in spec.components)
    return "loc" not in spec.hyperpriors and float(spec.params.get("loc", 0.0)) == 0.0


def element_dim(spec):
    """Length of the block a prior acts on: 1 for elementwise kinds, ``p`` otherwise."""
    if spec.kind in MULTIVARIATE_KINDS:
        return len(spec.params["loc"])
    if spec.kind == "Mixture":
        return max(element_dim(c) for c in spec.components)
    return 1


def hyper_paths(spec):
    """Dotted paths of all hyperparameters sampled jointly with the weights.

    Returns a list of ``(path, positive)`` pairs in a fixed order: base
    parameter order at each level, depth first.
    """
    if spec.kind != "Hierarchical":
        return []
    out = []
    for name in _FAMILIES[spec.params["base"]].names:
        if name in spec.hyperpriors:
            out.append((name, name in POSITIVE_PARAMS))
            out.extend((f"{name}.{p}", pos) for p, pos in hyper_paths(spec.hyperpriors[name]))
    return out


# ---------------------------------------------------------------------------
# log densities


def _rows(spec, X):
    """Per-row log density and gradient for ``X`` of shape ``(n, k)``."""
    kind = spec.kind
    if kind in UNIVARIATE_KINDS:
        fam = _FAMILIES[kind]
        p = _univariate_params(spec)
        return fam.logpdf(X, **p).sum(axis=1), fam.dx(X, **p)

    if kind in MULTIVARIATE_KINDS:
        loc = np.asarray(spec.params["loc"], dtype=float)
        if X.shape[1] != loc.size:
            raise DimensionMismatch(f"{kind} has dimension {loc.size}, got blocks of {X.shape[1]}")
        L = _cholesky(spec)
        R = X - loc
        # whitened residuals and Sigma^{-1} r, one row per block
        Z = np.linalg.solve(L, R.T).T
        Sinv_r = np.linalg.solve(L.T, Z.T).T
        q = np.einsum("ij,ij->i", Z, Z)
        half_logdet = np.log(np.diag(L)).sum()
        p = loc.size
        if kind == "MultivariateGaussian":
            return -0.5 * p * _LOG_2PI - half_logdet - 0.5 * q, -Sinv_r
        nu = float(spec.params["df"])
        vals = (gammaln(0.5 * (nu + p)) - gammaln(0.5 * nu) - 0.5 * p * math.log(nu * math.pi)
                - half_logdet - 0.5 * (nu + p) * np.log1p(q / nu))
        return vals, -((nu + p) / (nu + q))[:, None] * Sinv_r

    if kind == "Mixture":
        logw = np.log(_mixture_weights(spec))
        vals, grads = zip(*(_rows(c, X) for c in spec.components))
        lp = np.stack(vals) + logw[:, None]  # (k, n)
        total = logsumexp(lp, axis=0)
        resp = np.exp(lp - total)
        grad = np.einsum("kn,knd->nd", resp, np.stack(grads))
        return total, grad

    raise MissingHyperparameters("hierarchical prior needs hyperparameter values; "
                                 "use log_joint or pass hyper=")


def _as_blocks(theta, d):
    theta = np.asarray(theta, dtype=float).ravel()
    if d == 1:
        return theta.reshape(-1, 1)
    if theta.size % d:
        raise DimensionMismatch(f"length {theta.size} is not a multiple of block size {d}")
    return theta.reshape(-1, d)


def log_density(spec, theta, hyper=None):
    """Normalised log density and its gradient with respect to ``theta``.

    Parameters
    ----------
    spec : PriorSpec
    theta : array_like
        Weight vector. Univariate kinds apply elementwise; multivariate
        kinds (and mixtures of them) require a vector of length ``p``.
    hyper : dict, optional
        Natural-scale hyperparameter values keyed by dotted path (see
        :func:`hyper_paths`). Required for ``Hierarchical``; the result then
        includes the hyperprior log densities ``sum log p(psi)``.

    Returns
    -------
    LogDensityResult
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if spec.kind == "Hierarchical":
        if hyper is None:
            raise MissingHyperparameters("hyperparameter values required", "prior")
        value, grad, _ = log_joint(spec, theta, hyper, unconstrained=False)
        return LogDensityResult(value, grad)
    d = element_dim(spec)
    if d > 1 and theta.size != d:
        raise DimensionMismatch(f"expected length {d}, got {theta.size}")
    vals, grad = _rows(spec, _as_blocks(theta, d))
    return LogDensityResult(float(vals.sum()), grad.reshape(theta.shape))


def log_density_blocks(spec, theta):
    """Like :func:`log_density` but applies a block prior to every ``p``-block."""
    theta = np.asarray(theta, dtype=float).ravel()
    vals, grad = _rows(spec, _as_blocks(theta, element_dim(spec)))
    return float(vals.sum()), grad.reshape(theta.shape)


def log_joint(spec, theta, hyper, unconstrained=True):
    """Joint log density of weights and hierarchical hyperparameters.

    Parameters
    ----------
    spec : PriorSpec
    theta : array_like
        Weights governed by ``spec``.
    hyper : dict
        Hyperparameter coordinates keyed by dotted path. With
        ``unconstrained=True`` positive parameters are given as ``log(x)``
        and the Jacobian ``log x`` is included in the value.
    unconstrained : bool

    Returns
    -------
    value : float
    grad_theta : ndarray
    grad_hyper : dict
        Gradient with respect to each entry of ``hyper`` (in the coordinates
        it was supplied in).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if spec.kind != "Hierarchical":
        value, grad = log_density_blocks(spec, theta)
        return value, grad, {}

    fam = _FAMILIES[spec.params["base"]]
    params = {"loc": 0.0}
    params.update({k: float(v) for k, v in spec.params.items() if k != "base"})
    coords = {}
    for name in spec.hyperpriors:
        if name not in hyper:
            raise MissingHyperparameters(f"no value for hyperparameter {name!r}")
        c = float(hyper[name])
        coords[name] = c
        if name in POSITIVE_PARAMS:
            if unconstrained:
                params[name] = math.exp(c)
            elif c <= 0:
                cls = NonPositiveScale if name == "scale" else DomainError
                raise cls(f"{name} must be > 0, got {c!r}", f"hyper.{name}")
            else:
                params[name] = c
        else:
            params[name] = c
    params = {k: params[k] for k in fam.names}

    value = float(fam.logpdf(theta, **params).sum())
    grad = fam.dx(theta, **params)
    dparams = fam.dparams(theta, **params)
    grads_hyper = {}
    for name, hp in spec.hyperpriors.items():
        x = params[name]
        prefix = name + "."
        sub = {k[len(prefix):]: v for k, v in hyper.items() if k.startswith(prefix)}
        v, gx, sub_grads = log_joint(hp, np.array([x]), sub, unconstrained)
        dx = float(np.sum(dparams[name])) + float(gx[0])
        if name in POSITIVE_PARAMS:
            v += _LOG_2
            if unconstrained:
                v += coords[name]
                dx = x * dx + 1.0
        value += v
        grads_hyper[name] = dx
        grads_hyper.update({prefix + k: g for k, g in sub_grads.items()})
    return value, grad, grads_hyper


# ---------------------------------------------------------------------------
# sampling


def sample(spec, rng, n):
    """Draw ``n`` i.i.d. samples; returns an array of shape ``(n, element_dim)``."""
    return _sample_rows(spec, rng, int(n), element_dim(spec))


def _sample_rows(spec, rng, n, d):
    kind = spec.kind
    if kind in UNIVARIATE_KINDS:
        return _FAMILIES[kind].rvs(rng, (n, d), **_univariate_params(spec))

    if kind in MULTIVARIATE_KINDS:
        loc = np.asarray(spec.params["loc"], dtype=float)
        L = _cholesky(spec)
        draws = rng.standard_normal((n, loc.size)) @ L.T
        if kind == "MultivariateT":
            nu = float(spec.params["df"])
            draws *= np.sqrt(nu / rng.chisquare(nu, n))[:, None]
        return loc + draws

    if kind == "Mixture":
        w = _mixture_weights(spec)
        idx = rng.choice(len(w), size=n, p=w)
        out = np.empty((n, d))
        for c, comp in enumerate(spec.components):
            rows = np.flatnonzero(idx == c)
            if rows.size:
                out[rows] = _sample_rows(comp, rng, rows.size, d)
        return out

    # Hierarchical: fresh hyperparameters for every row
    fam = _FAMILIES[spec.params["base"]]
    params = {"loc": 0.0}
    params.update({k: float(v) for k, v in spec.params.items() if k != "base"})
    for name, hp in spec.hyperpriors.items():
        x = _sample_rows(hp, rng, n, 1)
        params[name] = np.abs(x) if name in POSITIVE_PARAMS else x
    return fam.rvs(rng, (n, d), **{k: params[k] for k in fam.names})


def _draw_scalar(spec, rng):
    """One scalar draw plus the hyperparameter values it was drawn with."""
    if spec.kind != "Hierarchical":
        return float(_sample_rows(spec, rng, 1, 1)[0, 0]), {}
    tree, params = _draw_level(spec, rng)
    fam = _FAMILIES[spec.params["base"]]
    return float(fam.rvs(rng, 1, **params)[0]), tree


def _draw_level(spec, rng):
    fam = _FAMILIES[spec.params["base"]]
    params = {"loc": 0.0}
    params.update({k: float(v) for k, v in spec.params.items() if k != "base"})
    tree = {}
    for name in fam.names:
        if name not in spec.hyperpriors:
            continue
        x, sub = _draw_scalar(spec.hyperpriors[name], rng)
        if name in POSITIVE_PARAMS:
            x = abs(x)
        params[name] = x
        tree[name] = x
        tree.update({f"{name}.{k}": v for k, v in sub.items()})
    return tree, {k: params[k] for k in fam.names}


def sample_group(spec, rng, size):
    """Draw initial values for one parameter group of ``size`` weights.

    All weights in the group share one draw of the hyperparameters.

    Returns
    -------
    values : ndarray of shape (size,)
    hyper : dict
        Unconstrained hyperparameter coordinates keyed by dotted path.
    """
    if spec.kind != "Hierarchical":
        d = element_dim(spec)
        if size % d:
            raise DimensionMismatch(f"group of {size} weights cannot be split into blocks of {d}")
        return _sample_rows(spec, rng, size // d, d).ravel(), {}
    tree, params = _draw_level(spec, rng)
    values = _FAMILIES[spec.params["base"]].rvs(rng, size, **params)
    positive = dict(hyper_paths(spec))
    hyper = {}
    for path, x in tree.items():
        if positive[path]:
            hyper[path] = math.log(max(x, np.finfo(float).tiny))
        else:
            hyper[path] = x
    return values, hyper
