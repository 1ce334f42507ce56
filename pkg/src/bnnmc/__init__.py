"""Tempered MCMC for small Bayesian neural networks with a library of weight priors."""

__version__ = "0.1.0"

from .archive import SampleArchive, read_archive, write_archive
from .data import Dataset, load_csv, make_blobs, make_sine, ood_shift, split
from .diagnostics import (
    configurational_temperature,
    kinetic_temperature,
    summarize,
)
from .metrics import (
    MetricReport,
    classification_metrics,
    ece,
    ood_auroc,
    tempering_table,
)
from .model import ModelSpec, ParamStore, forward, init_params, log_predictive, potential
from .prior import PriorSpec, log_density, log_joint, sample, validate
from .sampler import (
    SamplerConfig,
    PrecondConfig,
    ggmc_step,
    hmc_round,
    run_chain,
    schedule_step_size,
    sgld_step,
    update_preconditioner,
)

__all__ = [
    "SampleArchive", "read_archive", "write_archive",
    "Dataset", "load_csv", "make_blobs", "make_sine", "ood_shift", "split",
    "configurational_temperature", "kinetic_temperature", "summarize",
    "MetricReport", "classification_metrics", "ece", "ood_auroc", "tempering_table",
    "ModelSpec", "ParamStore", "forward", "init_params", "log_predictive", "potential",
    "PriorSpec", "log_density", "log_joint", "sample", "validate",
    "SamplerConfig", "PrecondConfig", "ggmc_step", "hmc_round", "run_chain",
    "schedule_step_size", "sgld_step", "update_preconditioner",
]
