"""Tempered MCMC kernels targeting ``pi_T(theta) ~ exp(-U(theta) / T)``.

Three kernels share one interface ``step(state, potential_fn, config, h,
groups) -> (state, ChainRecord)``:

* :func:`sgld_step` -- preconditioned overdamped Langevin, no correction.
* :func:`ggmc_step` -- OBABO underdamped Langevin with a Metropolis-Hastings
  test over the inner BAB segment; rejections flip the momentum.
* :func:`hmc_round` -- fresh momentum, ``L`` leapfrog steps, MH test.

A potential function maps a flat ``theta`` to ``(U, grad_U)``. Functions
carrying ``stochastic = True`` are minibatch estimates.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import configurational_temperature, kinetic_temperature
from .errors import DivergenceDetected, NonFiniteGradient, RequiresFullBatch

KINDS = ("sgld", "ggmc", "hmc")


@dataclass(frozen=True)
class PrecondConfig:
    beta: float = 0.99
    damping: float = 1e-4

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"precond beta must lie in (0, 1), got {self.beta}")
        if not self.damping > 0:
            raise ValueError(f"precond damping must be > 0, got {self.damping}")


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings.

    ``friction`` is the per-step momentum decay ``a`` of the GGMC O-step
    (for a friction rate ``gamma`` use ``a = exp(-gamma * h)``). ``steps``
    counts sampling steps after ``burn_in``; the cyclical step-size schedule
    runs over those ``steps`` only, burn-in uses ``step_size`` directly.
    """

    kind: str = "ggmc"
    step_size: float = 0.01
    temperature: float = 1.0
    friction: float = 0.9
    leapfrog_steps: int = 10
    cycles: int = 1
    steps: int = 1000
    burn_in: int = 0
    thin: int = 1
    precond: PrecondConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.precond, dict):
            object.__setattr__(self, "precond", PrecondConfig(**self.precond))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        # T = 0 is meaningful only for SGLD (noise-free gradient descent)
        if not (self.temperature > 0 or (self.kind == "sgld" and self.temperature == 0)):
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 <= self.friction < 1:
            raise ValueError(f"friction must lie in [0, 1), got {self.friction}")
        for name in ("leapfrog_steps", "cycles", "thin"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.steps < 0 or self.burn_in < 0:
            raise ValueError("steps and burn_in must be >= 0")
        if self.steps and self.steps < self.cycles:
            raise ValueError(f"steps ({self.steps}) must be >= cycles ({self.cycles})")

    def to_dict(self):
        return {
            "kind": self.kind, "step_size": self.step_size, "temperature": self.temperature,
            "friction": self.friction, "leapfrog_steps": self.leapfrog_steps,
            "cycles": self.cycles, "steps": self.steps, "burn_in": self.burn_in,
            "thin": self.thin,
            "precond": None if self.precond is None else
            {"beta": self.precond.beta, "damping": self.precond.damping},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sampler keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class KernelState:
    theta: np.ndarray
    momentum: np.ndarray | None
    mass: np.ndarray
    t: int
    rng: np.random.Generator = field(repr=False)
    # potential and gradient at theta, when valid for the current potential
    U: float | None = None
    grad: np.ndarray | None = None
    # EMA of squared gradients for the preconditioner
    sq_avg: np.ndarray | None = None
    last_grad: np.ndarray | None = None


@dataclass
class ChainRecord:
    t: int
    step_size: float
    kinetic: np.ndarray
    configurational: np.ndarray
    U: float
    accept: bool | None = None
    accept_prob: float | None = None
    delta_H: float | None = None
    burn_in: bool = False


def init_state(theta, config, rng=None):
    """Starting state: unit mass, momentum ``~ N(0, T M)`` for momentum kernels."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    theta = np.array(theta, dtype=np.float64).ravel()
    mass = np.ones_like(theta)
    p = None
    if config.kind == "ggmc":
        p = math.sqrt(config.temperature) * rng.standard_normal(theta.size)
    return KernelState(theta, p, mass, 0, rng, sq_avg=np.zeros_like(theta))


def _groups(groups, D):
    return [("theta", slice(0, D))] if groups is None else groups


def _kinetic(p, mass, groups):
    return np.array([kinetic_temperature(p[s], mass[s], s.stop - s.start) for _, s in groups])


def _configurational(theta, grad, groups):
    return np.array([configurational_temperature(theta[s], grad[s], s.stop - s.start)
                     for _, s in groups])


def _evaluate(potential_fn, theta, t):
    if not np.all(np.isfinite(theta)):
        raise DivergenceDetected(t, reason="non-finite parameters")
    try:
        U, grad = potential_fn(theta)
    except NonFiniteGradient as e:
        raise DivergenceDetected(t, reason=str(e)) from e
    if not (math.isfinite(U) and np.all(np.isfinite(grad))):
        raise DivergenceDetected(t, reason=f"non-finite potential (U={U})")
    return float(U), np.asarray(grad, dtype=np.float64)


def _current(state, potential_fn):
    if state.U is not None:
        return state.U, state.grad
    return _evaluate(potential_fn, state.theta, state.t)


def sgld_step(state, potential_fn, config, h=None, groups=None):
    """One preconditioned SGLD update.

    ``theta' = theta - h M^-1 grad_U + xi``, ``xi ~ N(0, 2 h T M^-1)``. The
    record carries diagnostics of the pre-update point (where the gradient
    was evaluated); the kinetic temperature is NaN.
    """
    h = config.step_size if h is None else h
    groups = _groups(groups, state.theta.size)
    U, g = _current(state, potential_fn)
    M = state.mass
    noise = np.sqrt(2.0 * h * config.temperature / M) * state.rng.standard_normal(M.size)
    theta = state.theta - h * g / M + noise
    if not np.all(np.isfinite(theta)):
        raise DivergenceDetected(state.t, reason="non-finite parameters")
    record = ChainRecord(state.t, h, np.full(len(groups), np.nan),
                         _configurational(state.theta, g, groups), U)
    new = replace(state, theta=theta, t=state.t + 1, U=None, grad=None, last_grad=g)
    return new, record


def _o_step(p, mass, a, T, rng):
    return math.sqrt(a) * p + np.sqrt((1.0 - a) * T * mass) * rng.standard_normal(p.size)


def ggmc_step(state, potential_fn, config, h=None, groups=None):
    """One OBABO step with a Metropolis-Hastings test on the BAB segment.

    The energy ``H = U + p^T M^-1 p / 2`` is compared right after the first
    O-step and right after the second B-step; the move is accepted with
    probability ``min(1, exp(-dH / T))``. On rejection ``theta`` is restored
    and the momentum negated before the final O-step. With a minibatch
    potential both energies use the same minibatch.
    """
    h = config.step_size if h is None else h
    groups = _groups(groups, state.theta.size)
    T, a, M, rng = config.temperature, config.friction, state.mass, state.rng
    U0, g0 = _current(state, potential_fn)

    p = _o_step(state.momentum, M, a, T, rng)
    H0 = U0 + 0.5 * float(np.sum(p * p / M))
    p1 = p - 0.5 * h * g0
    theta1 = state.theta + h * p1 / M
    U1, g1 = _evaluate(potential_fn, theta1, state.t)
    p1 = p1 - 0.5 * h * g1
    H1 = U1 + 0.5 * float(np.sum(p1 * p1 / M))
    dH = H1 - H0
    if not math.isfinite(dH):
        raise DivergenceDetected(state.t, reason=f"non-finite energy change ({dH})")

    log_ratio = -dH / T
    accept = math.log(rng.random()) < log_ratio
    accept_prob = math.exp(min(0.0, log_ratio))
    if accept:
        theta, p, U, g = theta1, p1, U1, g1
    else:
        theta, p, U, g = state.theta, -p, U0, g0
    p = _o_step(p, M, a, T, rng)

    record = ChainRecord(state.t, h, _kinetic(p, M, groups), _configurational(theta, g, groups),
                         U, accept, accept_prob, dH)
    new = replace(state, theta=theta, momentum=p, t=state.t + 1, U=U, grad=g, last_grad=g)
    return new, record


def leapfrog(theta, p, grad, potential_fn, h, n_steps, mass):
    """``n_steps`` velocity-Verlet steps; returns ``(theta, p, U, grad)`` at the end."""
    theta = np.array(theta, dtype=np.float64)
    p = np.array(p, dtype=np.float64)
    U = None
    for _ in range(n_steps):
        p -= 0.5 * h * grad
        theta += h * p / mass
        U, grad = potential_fn(theta)
        if not (math.isfinite(U) and np.all(np.isfinite(grad))):
            break
        p -= 0.5 * h * grad
    return theta, p, U, grad


def hmc_round(state, potential_fn, config, h=None, groups=None):
    """One HMC transition: ``p ~ N(0, T M)``, leapfrog, exact MH test.

    Raises
    ------
    RequiresFullBatch
        If ``potential_fn`` is a stochastic (minibatch) estimate.
    """
    if getattr(potential_fn, "stochastic", False):
        raise RequiresFullBatch("HMC needs the exact full-batch potential")
    h = config.step_size if h is None else h
    groups = _groups(groups, state.theta.size)
    T, M, rng = config.temperature, state.mass, state.rng
    U0, g0 = _current(state, potential_fn)
    p0 = np.sqrt(T * M) * rng.standard_normal(M.size)
    try:
        theta1, p1, U1, g1 = leapfrog(state.theta, p0, g0, potential_fn, h,
                                      config.leapfrog_steps, M)
    except NonFiniteGradient as e:
        raise DivergenceDetected(state.t, reason=str(e)) from e
    if not (np.all(np.isfinite(theta1)) and math.isfinite(U1) and np.all(np.isfinite(g1))):
        raise DivergenceDetected(state.t, reason="leapfrog trajectory diverged")
    dH = (U1 + 0.5 * float(np.sum(p1 * p1 / M))) - (U0 + 0.5 * float(np.sum(p0 * p0 / M)))
    log_ratio = -dH / T
    accept = math.log(rng.random()) < log_ratio
    accept_prob = math.exp(min(0.0, log_ratio))
    if accept:
        theta, p, U, g = theta1, p1, U1, g1
    else:
        theta, p, U, g = state.theta, p0, U0, g0
    record = ChainRecord(state.t, h, _kinetic(p, M, groups), _configurational(theta, g, groups),
                         U, accept, accept_prob, dH)
    new = replace(state, theta=theta, momentum=p, t=state.t + 1, U=U, grad=g, last_grad=g)
    return new, record


KERNELS = {"sgld": sgld_step, "ggmc": ggmc_step, "hmc": hmc_round}


def cycle_length(config):
    return math.ceil(config.steps / config.cycles)


def schedule_step_size(t, config):
    """Cyclical cosine step size ``h0/2 * (cos(pi * (t mod C) / C) + 1)``, ``C = ceil(K / cycles)``."""
    if not 0 <= t < config.steps:
        raise ValueError(f"step index {t} outside [0, {config.steps})")
    C = cycle_length(config)
    return 0.5 * config.step_size * (math.cos(math.pi * (t % C) / C) + 1.0)


def constant_schedule(t, config):
    """Fixed step size ``h0`` for every sampling step."""
    return config.step_size


def update_preconditioner(state, grad, config):
    """Update the squared-gradient EMA and recompute the diagonal mass.

    ``v <- beta v + (1 - beta) grad^2``, ``sigma = sqrt(v) + damping`` and
    ``M = sigma / geometric_mean(sigma)``.
    """
    pc = config.precond or PrecondConfig()
    v = state.sq_avg if state.sq_avg is not None else np.zeros_like(state.theta)
    v = pc.beta * v + (1.0 - pc.beta) * np.square(grad)
    sigma = np.sqrt(v) + pc.damping
    # shift by one coordinate first so equal sigmas give exactly unit mass
    log_sigma = np.log(sigma) - math.log(sigma[0])
    mass = np.exp(log_sigma - np.mean(log_sigma))
    return replace(state, sq_avg=v, mass=mass)


def sample_steps(config, n_samples=None):
    """Sampling-phase step indices at which ``theta`` is stored.

    Within each cycle the candidates are the cycle's last step (smallest
    step size) and every ``thin``-th step before it. With ``n_samples`` the
    candidates are ranked by distance from their cycle end, later cycles
    first, and the best ``n_samples`` are kept.
    """
    K, C = config.steps, cycle_length(config) if config.steps else 1
    ranked = []
    for c, start in enumerate(range(0, K, C)):
        end = min(start + C, K) - 1
        for r, t in enumerate(range(end, start - 1, -config.thin)):
            ranked.append((r, -c, t))
    if n_samples is None:
        return sorted(t for _, _, t in ranked)
    if n_samples > len(ranked):
        raise ValueError(f"n_samples={n_samples} exceeds the {len(ranked)} available "
                         f"sampling points (steps={K}, cycles={config.cycles}, thin={config.thin})")
    ranked.sort()
    return sorted(t for _, _, t in ranked[:n_samples])


def iterate_chain(potential, theta0, config, groups=None, rng=None, schedule=None):
    """Run burn-in then sampling, yielding ``(state, record)`` after every step.

    ``potential`` is a potential function, or an object with a
    ``next_batch(rng)`` method returning a fresh minibatch potential function
    for each step. ``schedule(t, config)`` gives the sampling-phase step size
    and defaults to :func:`schedule_step_size`.
    """
    schedule = schedule_step_size if schedule is None else schedule
    rng = np.random.default_rng(config.seed) if rng is None else rng
    state = init_state(theta0, config, rng)
    groups = _groups(groups, state.theta.size)
    kernel = KERNELS[config.kind]
    batched = hasattr(potential, "next_batch")
    for t in range(config.burn_in + config.steps):
        burn = t < config.burn_in
        h = config.step_size if burn else schedule(t - config.burn_in, config)
        if batched:
            fn = potential.next_batch(state.rng)
            state = replace(state, U=None, grad=None)
        else:
            fn = potential
        state, record = kernel(state, fn, config, h=h, groups=groups)
        record.burn_in = burn
        if burn and config.precond is not None:
            state = update_preconditioner(state, state.last_grad, config)
        yield state, record


def sample_potential(potential, theta0, config, groups=None, n_samples=None, rng=None,
                     schedule=None, callback=None):
    """Run a chain and collect stored samples.

    ``callback(state, record)``, when given, is called after every step.

    Returns
    -------
    samples : ndarray of shape (S, D)
    records : list of ChainRecord
    state : KernelState
        Final state.
    """
    keep = set(config.burn_in + s for s in sample_steps(config, n_samples))
    samples, records = [], []
    state = None
    for state, record in iterate_chain(potential, theta0, config, groups, rng, schedule):
        records.append(record)
        if callback is not None:
            callback(state, record)
        if record.t in keep:
            samples.append(state.theta.copy())
    D = np.asarray(theta0).size
    return np.array(samples, dtype=np.float64).reshape(-1, D), records, state


def run_chain(model, prior, data, config, batch_size=None, n_samples=None, schedule=None,
              callback=None):
    """Sample a network posterior and package the draws.

    Parameters
    ----------
    model : ModelSpec
    prior : PriorSpec or dict of group name to PriorSpec
    data : Dataset
    config : SamplerConfig
    batch_size : int, optional
        Minibatch size; ``None`` uses the full batch (exact MH for GGMC).
    n_samples : int, optional
        Number of stored samples (see :func:`sample_steps`).
    schedule : callable, optional
        Sampling-phase step size, as in :func:`iterate_chain`.
    callback : callable, optional
        Called as ``callback(state, record)`` after every step.

    Returns
    -------
    archive : SampleArchive
    records : list of ChainRecord
    """
    from .archive import SampleArchive
    from .model import BatchedPotential, init_params

    if config.kind == "hmc" and batch_size is not None and batch_size < data.n:
        raise RequiresFullBatch("HMC needs the exact full-batch potential")
    init_seed, chain_seed = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(model, prior, np.random.default_rng(init_seed))
    potential = BatchedPotential(model, params, data.inputs, data.targets, batch_size)
    if not potential.stochastic:
        potential = potential.full
    groups = [(g.name, g.slice) for g in params.groups]
    samples, records, _ = sample_potential(potential, params.values, config, groups,
                                           n_samples, np.random.default_rng(chain_seed),
                                           schedule, callback)
    archive = SampleArchive(
        samples=samples,
        layout=params.layout(),
        meta={
            "model": model.to_dict(),
            "prior": _prior_dict(prior),
            "sampler": config.to_dict(),
            "batch_size": batch_size,
            "dataset": getattr(data, "descriptor", None),
        },
    )
    return archive, records


def _prior_dict(prior):
    if isinstance(prior, dict):
        return {k: v.to_dict() for k, v in prior.items()}
    return prior.to_dict()
