"""
Train, test and sweep from the command line
===========================================

The same steps as the shell commands

    bnnmc train --prior student-t --temperature 0.3 --outdir runs/t03
    bnnmc test --outdir runs/t03
    bnnmc sweep --prior gaussian --temperatures 0.1,0.3,1.0 --outdir runs/sweep

run in-process through ``cli.main``.
"""

# %%
import csv
import os
import tempfile

from bnnmc import cli
from bnnmc.archive import read_archive

out = tempfile.mkdtemp(prefix="bnnmc-")
common = ["--steps", "1000", "--burn-in", "300", "--n-samples", "20"]

# %%
# One run: archive, per-step diagnostics and a training curve.
run = os.path.join(out, "t03")
cli.main(["train", "--prior", "student-t", "--temperature", "0.3", "--outdir", run, *common])
print(sorted(os.listdir(run)))
arc = read_archive(os.path.join(run, "archive"))
print("archive:", arc.n_samples, "samples of", arc.dim, "parameters")

# %%
# Test: held-out accuracy, log likelihood, calibration and OOD detection.
cli.main(["test", "--outdir", run])

# %%
# Sweeps repeat train + test per temperature and collect a tempering table.
for prior in ("gaussian", "student-t"):
    sweep_dir = os.path.join(out, f"sweep-{prior}")
    cli.main(["sweep", "--prior", prior, "--temperatures", "0.1,0.3,1.0",
              "--outdir", sweep_dir, *common])
    with open(os.path.join(sweep_dir, "tempering.csv")) as f:
        rows = list(csv.reader(f))
    print(f"\n{prior}")
    for row in rows:
        print("  " + "  ".join(f"{c[:8]:>8}" for c in row))

# %%
# Invalid settings exit with code 2 and name the offending flag.
print("exit code:", cli.main(["train", "--prior", "nosuch", "--outdir", run]))
