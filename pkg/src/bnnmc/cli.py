"""Command line: ``bnnmc train``, ``bnnmc test`` and ``bnnmc sweep``.

Settings come from built-in defaults, then an optional ``--config`` JSON file,
then explicit flags; later sources win.

Exit codes: 0 success, 1 I/O failure, 2 invalid arguments or malformed
archive, 3 chain divergence.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import data as _data
from .archive import read_archive, write_archive
from .diagnostics import summarize, write_diagnostics_csv
from .errors import (
    ArchiveFormatError,
    BnnMcError,
    DivergenceDetected,
    DuplicateTemperature,
    EmptyArchive,
    MissingFile,
    PriorError,
)
from .metrics import (
    MetricReport,
    classification_metrics,
    ece,
    ood_auroc,
    predictive_entropy,
    tempering_table,
    write_metrics_csv,
)
from .model import ModelSpec, forward, layer_shapes, log_likelihood, log_predictive, unflatten
from .prior import PriorSpec, validate
from .sampler import PrecondConfig, SamplerConfig, run_chain

DEFAULTS = {
    "model": "mlp",
    "prior": "gaussian",
    "data": "blobs",
    "inference": "ggmc",
    "n_samples": 20,
    "steps": 2000,
    "burn_in": 500,
    "temperature": 1.0,
    "lr": 0.01,
    "cycles": 1,
    "precond": "off",
    "seed": 0,
    "outdir": "runs/bnn",
    "target_col": "target",
    "batch_size": None,
    "friction": 0.9,
    "leapfrog_steps": 10,
    "hidden": 16,
    "noise": 0.1,
    "train_fraction": 0.8,
    "data_seed": 0,
    "ood_offset": 10.0,
    "task": "classification",
    "temperatures": None,
}

PRIOR_PRESETS = {
    "gaussian": lambda: PriorSpec.gaussian(0.0, 1.0),
    "laplace": lambda: PriorSpec.laplace(0.0, 1.0),
    "student-t": lambda: PriorSpec.student_t(3.0, 0.0, 1.0),
    "cauchy": lambda: PriorSpec.cauchy(0.0, 1.0),
    "hierarchical-gaussian": lambda: PriorSpec.hierarchical(
        "Gaussian", {"scale": PriorSpec.cauchy(0.0, 1.0)}),
    "gaussian-mixture": lambda: PriorSpec.mixture(
        [PriorSpec.gaussian(0.0, 0.1), PriorSpec.gaussian(0.0, 1.0)], [0.5, 0.5]),
}


class UsageError(Exception):
    """Invalid command-line setting; message names the flag."""


# ---------------------------------------------------------------------------
# argument handling


def _add_common(p):
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--model", help="'mlp', 'linear' or a ModelSpec JSON object")
    p.add_argument("--prior", help=f"one of {sorted(PRIOR_PRESETS)} or a PriorSpec JSON object")
    p.add_argument("--data", help="'blobs', 'sine' or 'csv:PATH'")
    p.add_argument("--target-col", dest="target_col", help="target column for csv data")
    p.add_argument("--task", choices=["classification", "regression"], help="task for csv data")
    p.add_argument("--inference", choices=["sgld", "ggmc", "hmc"])
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--steps", type=int, help="sampling steps after burn-in")
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--lr", type=float, help="initial step size")
    p.add_argument("--cycles", type=int)
    p.add_argument("--precond", choices=["on", "off"])
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="minibatch size (default full)")
    p.add_argument("--friction", type=float, help="GGMC per-step momentum decay")
    p.add_argument("--leapfrog-steps", dest="leapfrog_steps", type=int)
    p.add_argument("--hidden", type=int, help="hidden width of the named mlp")
    p.add_argument("--data-seed", dest="data_seed", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--ood-offset", dest="ood_offset", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="bnnmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("train", help="sample a posterior and write an archive"))
    t = sub.add_parser("test", help="evaluate an archive written by train")
    t.add_argument("--outdir", help="run directory written by train")
    t.add_argument("--archive", help="archive directory (default OUTDIR/archive)")
    t.add_argument("--ood-offset", dest="ood_offset", type=float)
    s = sub.add_parser("sweep", help="train + test over several temperatures")
    _add_common(s)
    s.add_argument("--temperatures", help="comma-separated list, e.g. 0.1,0.3,1.0")
    return parser


def resolve_settings(args):
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"--config: invalid JSON ({e})") from None
        sampler = cfg.pop("sampler", None)
        if sampler is not None:
            cfg.update(_settings_from_sampler(sampler))
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"--config: unknown keys {sorted(unknown)}")
        settings.update(cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            settings[key] = value
    return settings


_SAMPLER_TO_SETTING = {"kind": "inference", "step_size": "lr", "temperature": "temperature",
                       "friction": "friction", "leapfrog_steps": "leapfrog_steps",
                       "cycles": "cycles", "steps": "steps", "burn_in": "burn_in",
                       "precond": "precond", "seed": "seed"}


def _settings_from_sampler(d):
    """Settings for the keys present in a SamplerConfig object (``thin`` is derived)."""
    try:
        SamplerConfig.from_dict(d)
    except (TypeError, ValueError) as e:
        raise UsageError(f"--config: sampler: {e}") from None
    out = {}
    for key, value in d.items():
        if key == "thin":
            continue
        if key == "precond":
            value = "off" if value is None else "on"
        out[_SAMPLER_TO_SETTING[key]] = value
    return out


def _parse_json_or_name(text, flag):
    text = text.strip() if isinstance(text, str) else text
    if isinstance(text, dict):
        return text
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise UsageError(f"{flag}: invalid JSON ({e})") from None
    return text


def make_prior(value):
    value = _parse_json_or_name(value, "--prior")
    if isinstance(value, dict):
        try:
            spec = PriorSpec.from_dict(value)
            validate(spec)
        except PriorError as e:
            raise UsageError(f"--prior: {e}") from None
        return spec
    if value not in PRIOR_PRESETS:
        raise UsageError(f"--prior: unknown prior {value!r}; choose from {sorted(PRIOR_PRESETS)} "
                         f"or pass a JSON object")
    return PRIOR_PRESETS[value]()


def make_dataset(settings):
    value = settings["data"]
    if value == "blobs":
        return _data.make_blobs(100, 2, 2, 3.0, settings["data_seed"])
    if value == "sine":
        return _data.make_sine(200, settings["noise"], settings["data_seed"])
    if isinstance(value, str) and value.startswith("csv:"):
        path = value[4:]
        try:
            return _data.load_csv(path, settings["target_col"], settings["task"])
        except MissingFile:
            raise
        except (BnnMcError, ValueError) as e:
            raise UsageError(f"--data: {e}") from None
    raise UsageError(f"--data: expected blobs, sine or csv:PATH, got {value!r}")


def make_model(value, dataset, settings):
    value = _parse_json_or_name(value, "--model")
    likelihood = "categorical" if dataset.task == "classification" else "gaussian"
    d_in, d_out = dataset.dim, dataset.n_outputs
    try:
        if isinstance(value, dict):
            model = ModelSpec.from_dict(value)
        elif value == "mlp":
            model = ModelSpec("mlp", (d_in, settings["hidden"], d_out), "tanh", likelihood,
                              settings["noise"])
        elif value == "linear":
            model = ModelSpec("linear", (d_in, d_out), "tanh", likelihood, settings["noise"])
        else:
            raise UsageError(f"--model: expected mlp, linear or a JSON object, got {value!r}")
    except (TypeError, ValueError) as e:
        raise UsageError(f"--model: {e}") from None
    if model.widths[0] != d_in or (model.likelihood == "categorical") != (likelihood == "categorical"):
        raise UsageError(f"--model: widths/likelihood do not fit the data "
                         f"({d_in} inputs, {dataset.task})")
    if model.likelihood == "categorical" and model.widths[-1] < d_out:
        raise UsageError(f"--model: {model.widths[-1]} outputs for {d_out} classes")
    return model


def make_sampler_config(settings):
    try:
        return SamplerConfig(
            kind=settings["inference"], step_size=settings["lr"],
            temperature=settings["temperature"], friction=settings["friction"],
            leapfrog_steps=settings["leapfrog_steps"], cycles=settings["cycles"],
            steps=settings["steps"], burn_in=settings["burn_in"],
            thin=_thin_for(settings),
            precond=PrecondConfig() if settings["precond"] == "on" else None,
            seed=settings["seed"],
        )
    except (TypeError, ValueError) as e:
        flag = str(e).split()[0].replace("step_size", "lr").replace("_", "-")
        raise UsageError(f"--{flag}: {e}") from None


def _thin_for(settings):
    n, K, M = settings["n_samples"], settings["steps"], max(1, settings["cycles"])
    if n is None or n <= 0 or K <= 0:
        return 1
    per_cycle = math.ceil(n / M)
    return max(1, math.ceil(K / M) // per_cycle)


# ---------------------------------------------------------------------------
# commands


def _network_layout(model):
    layout, offset = [], 0
    for name, shape in layer_shapes(model):
        length = math.prod(shape)
        layout.append({"name": name, "shape": list(shape), "offset": offset, "length": length})
        offset += length
    return layout


def _training_curve_callback(model, train, every, rows):
    """Every ``every`` steps, log U and the train-set fit of the current parameters."""
    layout = _network_layout(model)
    classification = model.likelihood == "categorical"

    def cb(state, record):
        if record.t % every:
            return
        out = forward(model, unflatten(layout, state.theta), train.inputs)
        ll, _ = log_likelihood(model, out, train.targets)
        acc = float(np.mean(out.argmax(axis=1) == train.targets)) if classification else math.nan
        rows.append([record.t, repr(record.U), repr(ll / train.n), repr(acc)])

    return cb


def _split(settings, dataset):
    try:
        return _data.split(dataset, settings["train_fraction"], settings["data_seed"])
    except (BnnMcError, ValueError) as e:
        raise UsageError(f"--train-fraction: {e}") from None


def run_train(settings, out=sys.stdout):
    dataset = make_dataset(settings)
    model = make_model(settings["model"], dataset, settings)
    prior = make_prior(settings["prior"])
    config = make_sampler_config(settings)
    if settings["n_samples"] < 0:
        raise UsageError("--n-samples: must be >= 0")
    if settings["n_samples"] > settings["steps"]:
        raise UsageError(f"--n-samples: {settings['n_samples']} exceeds --steps {settings['steps']}")
    if config.kind == "hmc" and settings["batch_size"] is not None:
        raise UsageError("--batch-size: hmc requires the full batch")
    train, _ = _split(settings, dataset)

    rows = []
    every = max(1, (config.burn_in + config.steps) // 100)
    cb = _training_curve_callback(model, train, every, rows)
    try:
        archive, records = run_chain(model, prior, train, config, settings["batch_size"],
                                     settings["n_samples"], callback=cb)
    except ValueError as e:
        raise UsageError(f"--n-samples: {e}") from None
    archive.meta["dataset"] = {
        "source": dataset.descriptor,
        "train_fraction": settings["train_fraction"],
        "split_seed": settings["data_seed"],
    }
    archive.meta["ood_offset"] = settings["ood_offset"]

    outdir = settings["outdir"]
    write_archive(archive, os.path.join(outdir, "archive"))
    write_diagnostics_csv(os.path.join(outdir, "diagnostics.csv"), records, archive.layout)
    with open(os.path.join(outdir, "training_curve.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "U", "train_log_lik", "train_accuracy"])
        w.writerows(rows)

    summary = summarize(records, archive.layout, config.temperature)
    print(f"wrote {archive.n_samples} samples (D={archive.dim}) to {outdir}", file=out)
    for line in summary.lines():
        print(line, file=out)
    return archive


def run_test(run_dir, archive_dir=None, ood_offset=None, out=sys.stdout):
    archive_dir = archive_dir or os.path.join(run_dir, "archive")
    archive = read_archive(archive_dir, allow_empty=False)
    meta = archive.meta
    try:
        model = ModelSpec.from_dict(meta["model"])
        ds_meta = meta["dataset"]
        dataset = _data.from_descriptor(ds_meta["source"])
        _, test = _data.split(dataset, ds_meta["train_fraction"], ds_meta["split_seed"])
        T = float(meta["sampler"]["temperature"])
    except (KeyError, TypeError) as e:
        raise ArchiveFormatError(f"meta.json lacks required field {e}") from None
    offset = meta.get("ood_offset", DEFAULTS["ood_offset"]) if ood_offset is None else ood_offset
    ood = _data.ood_shift(test, offset)

    pred = log_predictive(model, archive, test.inputs)
    pred_ood = log_predictive(model, archive, ood.inputs)
    if model.likelihood == "categorical":
        acc, ll = classification_metrics(pred.probs, test.targets)
        cal = ece(pred.probs, test.targets)
        auroc = ood_auroc(predictive_entropy(pred.probs), predictive_entropy(pred_ood.probs))
    else:
        acc, cal = math.nan, math.nan
        ll = float(np.mean(pred.log_lik(test.targets)))
        auroc = ood_auroc(pred.var.sum(axis=1), pred_ood.var.sum(axis=1))
    report = MetricReport(T, acc, ll, cal, auroc)
    write_metrics_csv(os.path.join(run_dir, "metrics.csv"), [report])
    print(f"T={T:g} accuracy={acc:.4f} log_lik={ll:.4f} ece={cal:.4f} auroc={auroc:.4f}", file=out)
    return report


def parse_temperatures(text):
    if not text:
        raise UsageError("--temperatures: required for sweep")
    try:
        temps = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--temperatures: not a list of numbers: {text!r}") from None
    if not temps:
        raise UsageError("--temperatures: empty list")
    if len(set(temps)) != len(temps):
        raise UsageError(f"--temperatures: duplicate temperature in {temps}")
    return temps


def run_sweep(settings, out=sys.stdout):
    temps = parse_temperatures(settings["temperatures"])
    reports = []
    for i, T in enumerate(temps):
        job = dict(settings, temperature=T, seed=settings["seed"] + i,
                   outdir=os.path.join(settings["outdir"], f"T{i}_{T:g}"))
        run_train(job, out)
        reports.append(run_test(job["outdir"], out=out))
    try:
        table = tempering_table(reports)
    except DuplicateTemperature as e:
        raise UsageError(f"--temperatures: {e}") from None
    write_metrics_csv(os.path.join(settings["outdir"], "tempering.csv"), table)
    print(f"wrote tempering table with {len(table)} rows", file=out)
    return table


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "test":
            if not args.outdir and not args.archive:
                raise UsageError("--outdir: required (run directory written by train)")
            run_dir = args.outdir or os.path.dirname(os.path.abspath(args.archive))
            run_test(run_dir, args.archive, args.ood_offset)
            return 0
        settings = resolve_settings(args)
        if args.command == "train":
            run_train(settings)
        else:
            run_sweep(settings)
        return 0
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EmptyArchive, ArchiveFormatError) as e:
        print(f"error: malformed archive: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except DivergenceDetected as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: I/O failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
