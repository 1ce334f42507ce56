"""
Checking a sampler against a closed-form posterior
==================================================

For a linear model with Gaussian noise and a Gaussian prior the posterior
is Gaussian and known exactly. The sample archive should recover it.
"""

# %%
import numpy as np

from bnnmc import sampler as S
from bnnmc.data import Dataset
from bnnmc.model import ModelSpec
from bnnmc.prior import PriorSpec

rng = np.random.default_rng(0)
X = rng.normal(size=(30, 2))
y = X @ [0.7, -1.2] + 0.4 + 0.5 * rng.normal(size=30)
data = Dataset(X, y.reshape(-1, 1), "regression")

# %%
# Exact posterior over (w1, w2, b).
Phi = np.hstack([X, np.ones((30, 1))])
precision = Phi.T @ Phi / 0.5 ** 2 + np.eye(3)
cov = np.linalg.inv(precision)
mean = cov @ Phi.T @ y / 0.5 ** 2

# %%
model = ModelSpec("linear", (2, 1), likelihood="gaussian", noise=0.5)
for kind in ("ggmc", "hmc", "sgld"):
    h = {"ggmc": 0.02, "hmc": 0.02, "sgld": 0.002}[kind]
    steps = 20_000 if kind != "hmc" else 4000
    cfg = S.SamplerConfig(kind=kind, step_size=h, steps=steps, burn_in=1000, thin=5)
    arc, _ = S.run_chain(model, PriorSpec.gaussian(), data, cfg, schedule=S.constant_schedule)
    est_mean = arc.samples.mean(axis=0)
    est_cov = np.cov(arc.samples.T)
    print(f"{kind:<5} S={arc.n_samples:<5} |mean error| {np.abs(est_mean - mean).max():.4f}"
          f"   |cov error| {np.abs(est_cov - cov).max():.5f}")

print("exact mean", mean.round(4))
print("exact sd  ", np.sqrt(np.diag(cov)).round(4))
