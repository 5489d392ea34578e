"""Versioned textual checkpoints: parameter tensors, optimizer state, config echo.

A checkpoint is one JSON document (layout in docs/FORMATS.md) holding every
parameter path with its shape and row-major values, the Adam moments and step
counter, the model config, the variant name, and the schema header plus its
hash so consumers can refuse mismatched datasets. Floats serialize via repr,
so a save/load round trip is bitwise exact and same-seed runs write identical
bytes.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .errors import CheckpointError
from .model import CtrModel, ModelConfig, VARIANTS
from .params import ParamStore
from .schema import Schema

FORMAT_NAME = "ctrnet-checkpoint"
FORMAT_VERSION = 1


def _config_to_json(config: ModelConfig) -> dict:
    out = dataclasses.asdict(config)
    out["mlp_dims"] = list(config.mlp_dims)
    return out


def _config_from_json(obj: dict) -> ModelConfig:
    names = {f.name for f in dataclasses.fields(ModelConfig)}
    unknown = set(obj) - names
    if unknown:
        raise CheckpointError(f"unknown config keys {sorted(unknown)}")
    kw = dict(obj)
    kw["mlp_dims"] = tuple(kw.get("mlp_dims", (32, 8)))
    return ModelConfig(**kw)


def save_checkpoint(path, model: CtrModel, store: ParamStore) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "variant": model.variant.name,
        "config": _config_to_json(model.config),
        "schema": model.schema.header_line(),
        "schema_hash": model.schema.content_hash(),
        "step": store.step,
        "params": {
            spec.path: {
                "shape": list(spec.shape),
                "data": store.tensors[spec.path].reshape(-1).tolist(),
            }
            for spec in store.specs
        },
        "adam_m": {p: store.adam_m[p].reshape(-1).tolist() for p in store.paths()},
        "adam_v": {p: store.adam_v[p].reshape(-1).tolist() for p in store.paths()},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[CtrModel, ParamStore]:
    """Rebuild the model and its parameter store; validates format, paths, and shapes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"not a valid checkpoint: {exc}") from None
    if doc.get("format") != FORMAT_NAME:
        raise CheckpointError(f"unexpected format marker {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    variant = doc.get("variant")
    if variant not in VARIANTS:
        raise CheckpointError(f"unknown variant {variant!r}")
    schema = Schema.from_header_line(doc["schema"])
    if schema.content_hash() != doc.get("schema_hash"):
        raise CheckpointError("schema hash does not match the embedded schema")
    config = _config_from_json(doc["config"])
    model = CtrModel(schema, config, variant)

    specs = model.param_specs()
    saved = doc["params"]
    expected = {s.path for s in specs}
    if set(saved) != expected:
        missing = expected - set(saved)
        extra = set(saved) - expected
        raise CheckpointError(f"parameter paths differ: missing {sorted(missing)}, extra {sorted(extra)}")
    store = ParamStore(specs, {})
    for spec in specs:
        entry = saved[spec.path]
        if tuple(entry["shape"]) != spec.shape:
            raise CheckpointError(
                f"{spec.path}: saved shape {entry['shape']} vs expected {list(spec.shape)}"
            )
        store.tensors[spec.path] = np.array(entry["data"], dtype=np.float64).reshape(spec.shape)
        store.adam_m[spec.path] = np.array(doc["adam_m"][spec.path], dtype=np.float64).reshape(spec.shape)
        store.adam_v[spec.path] = np.array(doc["adam_v"][spec.path], dtype=np.float64).reshape(spec.shape)
    store.step = int(doc.get("step", 0))
    return model, store
