"""Instance documents: versioned JSON with exact float round-trip.

Layout (``format`` = ``"hetcc-instance"``, ``version`` = ``1``)::

    {
      "format": "hetcc-instance", "version": 1,
      "name": str, "seed": int, "total_dim": int, "effective_dim": int,
      "degree": int, "bounds": [lower, upper],
      "dims": [int, ...], "functions": [1..7, ...], "weights": [float, ...],
      "overlaps": [int, ...],            # K - 1 adjacent shared-variable counts
      "permutation": [int, ...],         # global layout, effective_dim entries
      "x_opt": [float, ...],
      "rotations": [null | [[float]*D_k]*D_k, ...]   # row-major, one per subproblem
    }

Floats are written with Python's shortest round-trip repr, so
``import_instance(export_instance(p))`` evaluates bit-identically to ``p``.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .assembly import InstanceConfig, InstanceConfigError, ProblemInstance

FORMAT = "hetcc-instance"
VERSION = 1


class InstanceFormatError(ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def instance_to_dict(instance: ProblemInstance) -> dict:
    cfg = instance.config
    return {
        "format": FORMAT,
        "version": VERSION,
        "name": cfg.name,
        "seed": int(cfg.seed),
        "total_dim": int(cfg.total_dim),
        "effective_dim": instance.dim,
        "degree": int(cfg.separability_degree),
        "bounds": [float(b) for b in cfg.bounds],
        "dims": list(cfg.subproblem_dims),
        "functions": list(cfg.function_map),
        "weights": instance.weights.tolist(),
        "overlaps": list(instance.overlaps),
        "permutation": instance.permutation.tolist(),
        "x_opt": instance.x_opt.tolist(),
        "rotations": [None if c.rotation is None else c.rotation.tolist() for c in instance.chains],
    }


def export_instance(instance: ProblemInstance) -> str:
    # one top-level field per line so parse errors can name a line
    doc = instance_to_dict(instance)
    body = ",\n".join(f" {json.dumps(k)}: {json.dumps(v)}" for k, v in doc.items())
    return "{\n" + body + "\n}\n"


def _line_of(text: str, key: str):
    if text is None:
        return None
    pos = text.find(f'"{key}"')
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def instance_from_dict(doc: dict, text: str | None = None) -> ProblemInstance:
    def fail(message, key):
        raise InstanceFormatError(message, field=key, line=_line_of(text, key))

    def require(key, kind):
        if key not in doc:
            fail("missing required field", key)
        value = doc[key]
        if kind is list and not isinstance(value, list):
            fail("expected an array", key)
        if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
            fail("expected an integer", key)
        return value

    if not isinstance(doc, dict):
        raise InstanceFormatError("document root must be an object", line=1)
    if doc.get("format") != FORMAT:
        fail(f"unknown document format {doc.get('format')!r}", "format")
    version = require("version", int)
    if version > VERSION:
        fail(f"document version {version} is newer than supported {VERSION}", "version")
    degree = require("degree", int)
    dims = require("dims", list)
    functions = require("functions", list)
    weights = require("weights", list)
    rotations = require("rotations", list)
    permutation = require("permutation", list)
    x_opt = require("x_opt", list)
    bounds = require("bounds", list)
    overlaps = require("overlaps", list)
    total_dim = require("total_dim", int)
    if len(rotations) != len(dims):
        fail("one rotation entry per subproblem is required", "rotations")
    for k, rot in enumerate(rotations):
        if degree >= 2 and rot is None:
            fail(f"subproblem {k} lacks a rotation but degree is {degree}", "rotations")
        if degree < 2 and rot is not None:
            fail(f"subproblem {k} has a rotation but degree is {degree}", "rotations")
        if rot is not None and np.shape(rot) != (dims[k], dims[k]):
            fail(f"rotation {k} must be {dims[k]}x{dims[k]}", "rotations")
    try:
        config = InstanceConfig(
            subproblem_dims=dims,
            function_map=functions,
            separability_degree=degree,
            seed=int(doc.get("seed", 0)),
            weights=[float(w) for w in weights],
            bounds=tuple(float(b) for b in bounds),
            total_dim=total_dim,
            name=str(doc.get("name", "")),
        )
    except (InstanceConfigError, ValueError) as err:
        raise InstanceFormatError(str(err), field="dims", line=_line_of(text, "dims")) from err
    if list(overlaps) != config.overlap_counts():
        fail("overlap counts inconsistent with dims and degree", "overlaps")
    if "effective_dim" in doc and doc["effective_dim"] != config.effective_dim():
        fail("effective_dim inconsistent with dims and overlaps", "effective_dim")
    try:
        rots = [None if r is None else np.asarray(r, dtype=float) for r in rotations]
        return ProblemInstance(config, weights, x_opt, permutation, rots)
    except (InstanceConfigError, ValueError) as err:
        raise InstanceFormatError(str(err)) from err


def import_instance(text: str) -> ProblemInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"malformed JSON: {err.msg}", line=err.lineno) from err
    return instance_from_dict(doc, text)


def save_instance(instance: ProblemInstance, path) -> Path:
    """Write the document and a ``.sha256`` checksum sidecar next to it."""
    path = Path(path)
    text = export_instance(instance)
    path.write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    Path(str(path) + ".sha256").write_text(f"{digest}  {path.name}\n")
    return path


def load_instance(path) -> ProblemInstance:
    return import_instance(Path(path).read_text())
