"""
Weight priors
=============

Build prior specs, evaluate log densities and gradients, draw samples and
bind a prior to a small network.
"""

# %%
import numpy as np

from bnnmc import PriorSpec, init_params, log_density, sample, validate
from bnnmc.model import ModelSpec
from bnnmc.prior import hyper_paths, log_joint

rng = np.random.default_rng(0)

# %%
# Four univariate families share the loc/scale parameterisation.
# Heavy tails show up as a slowly falling log density far from zero.
specs = {
    "gaussian": PriorSpec.gaussian(0, 1),
    "laplace": PriorSpec.laplace(0, 1),
    "student-t(3)": PriorSpec.student_t(3.0),
    "cauchy": PriorSpec.cauchy(),
}
print(f"{'prior':<14}" + "".join(f"{x:>10g}" for x in (0.0, 1.0, 5.0, 20.0)))
for name, spec in specs.items():
    vals = [log_density(spec, [x]).value for x in (0.0, 1.0, 5.0, 20.0)]
    print(f"{name:<14}" + "".join(f"{v:>10.3f}" for v in vals))

# %%
# Gradients come with the value. For the Cauchy at 1 the slope is -1.
r = log_density(specs["cauchy"], [1.0])
print("cauchy at 1:", r.value, r.gradient)

# %%
# Mixtures normalise their weights; a spike-and-slab style prior:
mix = PriorSpec.mixture([PriorSpec.gaussian(0, 0.05), PriorSpec.gaussian(0, 1.0)], [0.8, 0.2])
validate(mix)
draws = sample(mix, rng, 10_000).ravel()
print("mixture: fraction with |w| < 0.15 =", np.mean(np.abs(draws) < 0.15).round(3))

# %%
# Multivariate priors act on consecutive blocks of a weight group.
mvn = PriorSpec.mv_gaussian([0, 0], [[1.0, 0.9], [0.9, 1.0]])
pairs = sample(mvn, rng, 5000)
print("correlated pair, sample correlation:", np.corrcoef(pairs.T)[0, 1].round(3))

# %%
# Hierarchical priors put a hyperprior on a parameter of the base family.
# A positive parameter (here the scale) gets a half-Cauchy and is sampled
# in log coordinates.
hier = PriorSpec.hierarchical("Gaussian", {"scale": PriorSpec.cauchy(0, 1)})
print("hyperparameters:", hyper_paths(hier))
value, g_w, g_h = log_joint(hier, np.array([0.2, -0.4]), {"scale": np.log(0.5)})
print("joint log density", round(value, 4), "d/dlog(scale)", round(g_h["scale"], 4))

# %%
# Binding to a network adds one scale per weight group.
model = ModelSpec("mlp", (2, 4, 2))
params = init_params(model, hier, rng)
for g in params.layout():
    print(f"{g['name']:<22} shape={g['shape']} offset={g['offset']}")
print("D =", params.dim)

# %%
# Specs serialise to JSON, which is also what the command line accepts.
print(mix.to_json())
