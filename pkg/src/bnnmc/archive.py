"""On-disk sample archives.

An archive is a directory with three files:

``meta.json``
    format version, model/prior/sampler configuration, dataset descriptor,
    ``D`` (parameters per sample) and ``S`` (sample count).
``index.json``
    one entry ``{name, shape, offset, length}`` per parameter group.
``samples.bin``
    ``S x D`` little-endian float64, row-major, one row per sample.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ArchiveFormatError, EmptyArchive

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class SampleArchive:
    samples: np.ndarray
    layout: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        D = sum(g["length"] for g in self.layout)
        self.samples = self.samples.reshape(-1, D)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def full_meta(self):
        from . import __version__
        meta = dict(self.meta)
        meta.update({
            "format_version": FORMAT_VERSION,
            "D": self.dim,
            "S": self.n_samples,
            "creation": {"library": "bnnmc", "version": __version__},
        })
        return meta


def _dump_json(obj):
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_archive(archive, directory):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "meta.json"), "wb") as f:
        f.write(_dump_json(archive.full_meta()))
    with open(os.path.join(directory, "index.json"), "wb") as f:
        f.write(_dump_json(archive.layout))
    with open(os.path.join(directory, "samples.bin"), "wb") as f:
        f.write(np.ascontiguousarray(archive.samples, dtype=_DTYPE).tobytes())


def read_archive(directory, allow_empty=True):
    """Load and check an archive.

    Raises
    ------
    FileNotFoundError
        If the directory or one of its files is missing.
    ArchiveFormatError
        Naming the violated invariant (version, partition, file size).
    EmptyArchive
        If ``allow_empty`` is false and ``S == 0``.
    """
    paths = {name: os.path.join(directory, name)
             for name in ("meta.json", "index.json", "samples.bin")}
    for p in paths.values():
        if not os.path.isfile(p):
            raise FileNotFoundError(f"archive file missing: {p}")
    try:
        with open(paths["meta.json"], encoding="utf-8") as f:
            meta = json.load(f)
        with open(paths["index.json"], encoding="utf-8") as f:
            layout = json.load(f)
    except json.JSONDecodeError as e:
        raise ArchiveFormatError(f"invalid JSON: {e}") from None

    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError(f"format_version mismatch: archive has {version!r}, "
                                 f"reader expects {FORMAT_VERSION}")
    for key in ("D", "S"):
        if not isinstance(meta.get(key), int) or meta[key] < 0:
            raise ArchiveFormatError(f"meta.json field {key!r} missing or invalid")
    D, S = meta["D"], meta["S"]

    pos = 0
    for g in sorted(layout, key=lambda g: g.get("offset", -1)):
        if not {"name", "shape", "offset", "length"} <= set(g):
            raise ArchiveFormatError(f"index entry missing fields: {g}")
        if g["offset"] != pos:
            raise ArchiveFormatError(f"index offsets do not partition [0, D): group "
                                     f"{g['name']!r} starts at {g['offset']}, expected {pos}")
        if math.prod(g["shape"]) != g["length"]:
            raise ArchiveFormatError(f"group {g['name']!r}: shape {g['shape']} does not match "
                                     f"length {g['length']}")
        pos += g["length"]
    if pos != D:
        raise ArchiveFormatError(f"index offsets do not partition [0, D): cover {pos}, D = {D}")

    size = os.path.getsize(paths["samples.bin"])
    if size != S * D * _DTYPE.itemsize:
        raise ArchiveFormatError(f"samples.bin has {size} bytes, expected S*D*8 = "
                                 f"{S * D * _DTYPE.itemsize}")
    if S == 0 and not allow_empty:
        raise EmptyArchive("archive holds no samples (S = 0)")
    samples = np.fromfile(paths["samples.bin"], dtype=_DTYPE).astype(np.float64).reshape(S, D)
    stored = {k: v for k, v in meta.items()
              if k not in ("format_version", "D", "S", "creation")}
    return SampleArchive(samples, layout, stored)
