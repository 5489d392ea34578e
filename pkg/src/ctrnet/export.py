"""Write per-instance attention weights as tab-separated text for heatmap rendering.

One row per (instance, family): behavior weights over all padded positions
(zero at padding; the row is omitted when an instance has no behaviors at
all, since there is no distribution to show), user-field weights, context-
field weights, and the fused-slot weights with their fixed labels. Weights
serialize via repr, so re-running the forward pass reproduces the file
bitwise.
"""

from __future__ import annotations

import numpy as np

from .checkpoint import load_checkpoint
from .data import InstanceBatch
from .datasynth import iter_dataset, read_header
from .errors import CheckpointError

EXPORT_HEADER = "index\tfamily\tlabels\tweights"


def export_attention(checkpoint_path, data_path, out_path, limit: int | None = None,
                     batch_size: int = 512) -> int:
    """Run the checkpointed model over a dataset and dump its attention weights.

    Returns the number of instances exported. Refuses datasets whose schema
    hash differs from the checkpoint's.
    """
    model, store = load_checkpoint(checkpoint_path)
    data_schema = read_header(data_path)
    if data_schema.content_hash() != model.schema.content_hash():
        raise CheckpointError(
            "dataset schema does not match the checkpoint "
            f"({data_schema.content_hash()[:12]} vs {model.schema.content_hash()[:12]})"
        )
    instances = []
    for inst in iter_dataset(data_path):
        instances.append(inst)
        if limit is not None and len(instances) >= limit:
            break

    user_labels = ",".join(f.name for f in model.schema.user)
    ctx_labels = ",".join(f.name for f in model.schema.context)
    n_written = 0
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EXPORT_HEADER + "\n")
        for lo in range(0, len(instances), batch_size):
            chunk = instances[lo:lo + batch_size]
            batch = InstanceBatch.from_instances(model.schema, chunk)
            out = model.predict(batch, store)
            attn = out.attention
            for row in range(len(chunk)):
                index = lo + row
                if attn.alpha_behavior is not None and batch.behavior_mask[row].any():
                    t = attn.alpha_behavior.shape[1]
                    labels = ",".join(f"b{i}" for i in range(t))
                    fh.write(_row(index, "ibim", labels, attn.alpha_behavior[row]))
                if attn.alpha_user is not None:
                    fh.write(_row(index, "iuim", user_labels, attn.alpha_user[row]))
                if attn.alpha_context is not None:
                    fh.write(_row(index, "icim", ctx_labels, attn.alpha_context[row]))
                if attn.alpha_global is not None:
                    fh.write(_row(index, "gim", ",".join(attn.slot_labels), attn.alpha_global[row]))
            n_written += len(chunk)
    return n_written


def _row(index: int, family: str, labels: str, weights: np.ndarray) -> str:
    values = ",".join(repr(float(w)) for w in weights)
    return f"{index}\t{family}\t{labels}\t{values}\n"


def read_attention_rows(path) -> list[dict]:
    """Parse an export back into dicts with index, family, labels, weights."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != EXPORT_HEADER:
            raise ValueError(f"unexpected export header {header!r}")
        for line in fh:
            index, family, labels, weights = line.rstrip("\n").split("\t")
            rows.append({
                "index": int(index),
                "family": family,
                "labels": labels.split(","),
                "weights": np.array([float(w) for w in weights.split(",")]),
            })
    return rows
