"""Parameter storage, small fully-connected networks and the potential energy.

The potential is the negative log joint

    U(theta) = -(N / |B|) * sum_{i in B} log p(y_i | x_i, theta) - log p(theta)

with gradients computed by hand-written reverse-mode passes through the
dense layers. Temperature never enters here; samplers divide by it.

Flattening order is fixed: groups in store order (``layer0.weight``,
``layer0.bias``, ``layer1.weight``, ... then hyperparameter groups), row-major
within each group. Weight matrices have shape ``(out, in)``.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import prior as _prior
from .errors import DimensionMismatch, EmptyArchive, NonFiniteGradient

ARCHS = ("linear", "mlp")
ACTIVATIONS = ("tanh", "relu")
LIKELIHOODS = ("categorical", "gaussian")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and likelihood of a fully-connected network.

    ``widths`` lists layer sizes from input to output. ``noise`` is the fixed
    observation standard deviation of the Gaussian likelihood.
    """

    arch: str = "mlp"
    widths: tuple = (2, 16, 2)
    activation: str = "tanh"
    likelihood: str = "categorical"
    noise: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"likelihood must be one of {LIKELIHOODS}, got {self.likelihood!r}")
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError(f"widths must have >= 2 entries, all >= 1; got {self.widths}")
        if self.arch == "linear" and len(self.widths) != 2:
            raise ValueError("linear model takes exactly two widths [in, out]")
        if not self.noise > 0:
            raise ValueError(f"noise must be > 0, got {self.noise}")

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def to_dict(self):
        d = {"arch": self.arch, "widths": list(self.widths),
             "activation": self.activation, "likelihood": self.likelihood}
        if self.likelihood == "gaussian":
            d["noise"] = self.noise
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"arch", "widths", "activation", "likelihood", "noise"}
        if unknown:
            raise ValueError(f"unknown model keys {sorted(unknown)}")
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ParamGroup:
    name: str
    shape: tuple
    offset: int
    prior: _prior.PriorSpec | None
    is_hyperparameter: bool = False
    # for hyperparameter groups: owning weight group and dotted path in its prior
    owner: str | None = None
    path: str | None = None

    @property
    def size(self):
        return math.prod(self.shape)

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)


@dataclass
class ParamStore:
    """Named parameter groups over one flat float64 vector.

    Hyperparameter groups hold unconstrained coordinates (``log`` of positive
    hyperparameters).
    """

    groups: list
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ValueError("group names must be unique")
        if self.values.shape != (self.dim,):
            raise DimensionMismatch(f"expected {self.dim} values, got {self.values.shape}")

    @property
    def dim(self):
        return sum(g.size for g in self.groups)

    def group(self, name):
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def __getitem__(self, name):
        g = self.group(name)
        return self.values[g.slice].reshape(g.shape)

    def with_values(self, values):
        return replace(self, values=np.array(values, dtype=np.float64))

    def layout(self):
        return [{"name": g.name, "shape": list(g.shape), "offset": g.offset, "length": g.size}
                for g in self.groups]

    def weight_groups(self):
        return [g for g in self.groups if not g.is_hyperparameter]


@dataclass
class PotentialResult:
    U: float
    grad_U: np.ndarray
    log_prior: float
    log_lik_estimate: float


def layer_shapes(model):
    """``[(name, shape), ...]`` of the network parameters in flattening order."""
    out = []
    for i, (n_in, n_out) in enumerate(zip(model.widths[:-1], model.widths[1:])):
        out.append((f"layer{i}.weight", (n_out, n_in)))
        out.append((f"layer{i}.bias", (n_out,)))
    return out


def init_params(model, prior, rng):
    """Bind ``prior`` to every weight group and draw initial values from it.

    ``prior`` is a single :class:`PriorSpec` or a mapping from group name to
    spec. Hierarchical hyperparameters get their own groups, appended after
    the network parameters, named ``<group>.<path>``.
    """
    groups, chunks, hyper_groups, hyper_vals = [], [], [], []
    offset = 0
    for name, shape in layer_shapes(model):
        spec = prior[name] if isinstance(prior, dict) else prior
        _prior.validate(spec)
        size = math.prod(shape)
        values, hyper = _prior.sample_group(spec, rng, size)
        groups.append(ParamGroup(name, shape, offset, spec))
        chunks.append(values)
        offset += size
        for path, _ in _prior.hyper_paths(spec):
            hyper_groups.append((name, path, _hyperprior_at(spec, path)))
            hyper_vals.append(hyper[path])
    for name, path, hp in hyper_groups:
        groups.append(ParamGroup(f"{name}.{path}", (1,), offset, hp, True, name, path))
        offset += 1
    values = np.concatenate(chunks + [np.asarray(hyper_vals, dtype=float)])
    return ParamStore(groups, values)


def _hyperprior_at(spec, path):
    for part in path.split("."):
        spec = spec.hyperpriors[part]
    return spec


def _activate(model, z):
    if model.activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(model, z, a):
    if model.activation == "tanh":
        return 1.0 - a * a
    return (z > 0).astype(float)


def _layers(model, params):
    return [(params[f"layer{i}.weight"], params[f"layer{i}.bias"]) for i in range(model.n_layers)]


def forward(model, params, inputs):
    """Network outputs: logits (categorical) or means (gaussian).

    ``params`` is a :class:`ParamStore` or any mapping from group name to
    array.
    """
    out, _ = _forward(model, _layers(model, params), inputs)
    return out


def _forward(model, layers, inputs):
    a = np.asarray(inputs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.widths[0]:
        raise DimensionMismatch(f"inputs must have shape (n, {model.widths[0]}), got {a.shape}")
    cache = []
    for i, (W, b) in enumerate(layers):
        z = a @ W.T + b
        cache.append((a, z))
        a = z if i == len(layers) - 1 else _activate(model, z)
    return a, cache


def _backward(model, layers, cache, dout):
    """Reverse pass: gradient of a scalar with respect to every layer parameter."""
    grads = [None] * len(layers)
    g = dout
    for i in range(len(layers) - 1, -1, -1):
        a_in, _ = cache[i]
        W, _ = layers[i]
        grads[i] = (g.T @ a_in, g.sum(axis=0))
        if i > 0:
            z_prev = cache[i - 1][1]
            g = (g @ W) * _activation_grad(model, z_prev, a_in)
    return grads


def log_likelihood(model, outputs, targets):
    """Summed log likelihood of ``targets`` and its gradient with respect to ``outputs``."""
    if model.likelihood == "categorical":
        y = np.asarray(targets).astype(np.int64).ravel()
        if y.shape[0] != outputs.shape[0]:
            raise DimensionMismatch("targets and inputs differ in length")
        if y.min(initial=0) < 0 or y.max(initial=0) >= outputs.shape[1]:
            raise DimensionMismatch(f"class labels must lie in [0, {outputs.shape[1]})")
        logp = outputs - logsumexp(outputs, axis=1, keepdims=True)
        rows = np.arange(y.size)
        d = -np.exp(logp)
        d[rows, y] += 1.0
        return float(logp[rows, y].sum()), d
    y = np.asarray(targets, dtype=np.float64).reshape(outputs.shape[0], -1)
    if y.shape != outputs.shape:
        raise DimensionMismatch(f"targets shape {y.shape} != outputs shape {outputs.shape}")
    s2 = model.noise**2
    r = y - outputs
    ll = -0.5 * r.size * math.log(2 * math.pi * s2) - 0.5 * float((r * r).sum()) / s2
    return ll, r / s2


def log_prior(params):
    """Sum of all group prior log densities (hyperpriors and Jacobians included) and its gradient."""
    total = 0.0
    grad = np.zeros(params.dim)
    hyper_index = {}
    for g in params.groups:
        if g.is_hyperparameter:
            hyper_index.setdefault(g.owner, {})[g.path] = g
    for g in params.weight_groups():
        owned = hyper_index.get(g.name, {})
        hyper = {path: params.values[hg.offset] for path, hg in owned.items()}
        value, gw, gh = _prior.log_joint(g.prior, params.values[g.slice], hyper)
        total += value
        grad[g.slice] += gw
        for path, d in gh.items():
            grad[owned[path].offset] += d
    return total, grad


def potential(model, params, batch, dataset_size):
    """Minibatch estimate of the potential energy and its gradient.

    Parameters
    ----------
    model : ModelSpec
    params : ParamStore
    batch : tuple of (inputs, targets)
    dataset_size : int
        N, the full training-set size; the batch likelihood is scaled by
        ``N / len(batch)``.

    Returns
    -------
    PotentialResult

    Raises
    ------
    NonFiniteGradient
        If the energy or any gradient coordinate is NaN or infinite.
    """
    inputs, targets = batch
    inputs = np.asarray(inputs, dtype=np.float64)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if dataset_size < n:
        raise ValueError(f"dataset_size {dataset_size} < batch size {n}")
    scale = dataset_size / n

    layers = _layers(model, params)
    with np.errstate(over="ignore", invalid="ignore"):
        out, cache = _forward(model, layers, inputs)
        ll, dout = log_likelihood(model, out, targets)
        lgrads = _backward(model, layers, cache, dout)
        lp, grad = log_prior(params)
    grad = -grad
    for i, (gW, gb) in enumerate(lgrads):
        grad[params.group(f"layer{i}.weight").slice] -= scale * gW.ravel()
        grad[params.group(f"layer{i}.bias").slice] -= scale * gb
    ll_est = scale * ll
    U = -ll_est - lp
    if not (math.isfinite(U) and np.all(np.isfinite(grad))):
        raise NonFiniteGradient(f"non-finite potential or gradient (U={U})")
    return PotentialResult(U, grad, lp, ll_est)


def make_potential_fn(model, params, inputs, targets, dataset_size=None):
    """Bind data to a ``theta -> (U, grad_U)`` callable over the flat vector."""
    n = np.asarray(inputs).shape[0]
    N = n if dataset_size is None else dataset_size

    def fn(theta):
        r = potential(model, params.with_values(theta), (inputs, targets), N)
        return r.U, r.grad_U

    fn.stochastic = n < N
    return fn


# ---------------------------------------------------------------------------
# predictive


@dataclass
class Predictive:
    """Bayesian model average over archive samples.

    For categorical models ``probs`` holds the averaged class probabilities.
    For regression ``mean``/``var`` summarise the Gaussian mixture and
    ``sample_means`` keeps its components.
    """

    kind: str
    probs: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None
    sample_means: np.ndarray | None = None
    noise: float | None = None

    def log_lik(self, targets):
        """Per-point log predictive density of ``targets``."""
        if self.kind == "categorical":
            y = np.asarray(targets).astype(np.int64).ravel()
            with np.errstate(divide="ignore"):
                return np.log(self.probs[np.arange(y.size), y])
        y = np.asarray(targets, dtype=float).reshape(self.mean.shape)
        S = self.sample_means.shape[0]
        r = y[None] - self.sample_means
        comp = (-0.5 * math.log(2 * math.pi * self.noise**2)
                - 0.5 * r * r / self.noise**2).sum(axis=2)
        return logsumexp(comp, axis=0) - math.log(S)


def unflatten(layout, theta):
    """Map a flat vector onto ``{group name: array}`` using an archive layout."""
    return {g["name"]: theta[g["offset"]:g["offset"] + g["length"]].reshape(g["shape"])
            for g in layout}


def log_predictive(model, archive, inputs):
    """Model-averaged predictive distribution at ``inputs``.

    ``archive`` needs ``samples`` (S x D) and ``layout`` attributes, as on
    :class:`bnnmc.archive.SampleArchive`.
    """
    samples = np.asarray(archive.samples)
    if samples.shape[0] == 0:
        raise EmptyArchive("archive holds no samples")
    outs = np.stack([forward(model, unflatten(archive.layout, s), inputs) for s in samples])
    if model.likelihood == "categorical":
        probs = np.exp(outs - logsumexp(outs, axis=2, keepdims=True)).mean(axis=0)
        return Predictive("categorical", probs=probs)
    mean = outs.mean(axis=0)
    var = outs.var(axis=0) + model.noise**2
    return Predictive("gaussian", mean=mean, var=var, sample_means=outs, noise=model.noise)


class BatchedPotential:
    """Potential over a dataset, served as full-batch or epoch-shuffled minibatches.

    ``next_batch(rng)`` walks through a fresh permutation of the data each
    epoch (a trailing partial batch is dropped) and returns a minibatch
    potential function scaled to the full dataset size.
    """

    def __init__(self, model, params, inputs, targets, batch_size=None):
        self.inputs = np.asarray(inputs, dtype=np.float64)
        self.targets = np.asarray(targets)
        self.n = self.inputs.shape[0]
        if batch_size is not None and not 1 <= batch_size:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self.batch_size = self.n if batch_size is None else min(int(batch_size), self.n)
        self.stochastic = self.batch_size < self.n
        self.model = model
        self.params = params
        self.full = make_potential_fn(model, params, self.inputs, self.targets)
        self._perm = None
        self._pos = 0

    def next_batch(self, rng):
        if not self.stochastic:
            return self.full
        if self._perm is None or self._pos + self.batch_size > self.n:
            self._perm = rng.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return make_potential_fn(self.model, self.params, self.inputs[idx], self.targets[idx], self.n)
