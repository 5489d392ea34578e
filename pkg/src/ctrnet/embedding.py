"""Embedding layer: sparse grouped raw features to dense per-group representations.

Categorical fields are row lookups into per-field tables; numerical fields go
through a learned per-field affine map so every field comes out width d. The
item group's per-field embeddings are concatenated and linearly projected back
to d. Behavior steps are embedded per position, padded positions are zeroed,
and an explicit mask records which positions are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .data import InstanceBatch, RawInstance, validate_instance
from .errors import OutOfVocabularyError, SchemaError
from .numerics import GradTape, Tensor
from .params import ParamSpec
from .schema import FieldSpec, Schema


@dataclass
class EmbeddedInstance:
    """Dense views of one instance: item vector, behavior rows, user rows, context rows."""

    e_i: np.ndarray  # (d,)
    e_b: np.ndarray  # (T, d), padded rows all-zero
    e_u: np.ndarray  # (J, d)
    e_c: np.ndarray  # (K, d)
    behavior_mask: np.ndarray  # (T,) bool


@dataclass
class EmbeddedBatch:
    """Batched dense views; fields are Tensors when produced under a tape."""

    e_i: Tensor  # (B, d)
    e_b: Tensor  # (B, T, d)
    e_u: Tensor  # (B, J, d)
    e_c: Tensor  # (B, K, d)
    behavior_mask: np.ndarray  # (B, T) bool

    @property
    def size(self) -> int:
        return int(self.behavior_mask.shape[0])

    @property
    def seq_len(self) -> int:
        return int(self.behavior_mask.shape[1])

    def instance(self, row: int) -> EmbeddedInstance:
        return EmbeddedInstance(
            e_i=self.e_i.data[row].copy(),
            e_b=self.e_b.data[row].copy(),
            e_u=self.e_u.data[row].copy(),
            e_c=self.e_c.data[row].copy(),
            behavior_mask=self.behavior_mask[row].copy(),
        )


class EmbeddingLayer:
    """Owns the field-to-parameter binding and the embedding computations.

    With share_item_table enabled (the default), a categorical behavior field
    whose name matches an item field reuses that item field's table, so the
    candidate item and the behavior steps live in one embedding space.
    """

    def __init__(self, schema: Schema, dim: int, share_item_table: bool = True):
        if dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {dim}")
        self.schema = schema
        self.dim = dim
        self.share_item_table = share_item_table
        self.table_path: dict[tuple[str, str], str] = {}
        self._specs: list[ParamSpec] = []
        self._build()

    def _bind_table(self, field: FieldSpec, owner_group: str) -> None:
        path = f"embed.table.{owner_group}.{field.name}"
        self.table_path[(field.group, field.name)] = path
        if owner_group == field.group:
            self._specs.append(
                ParamSpec(path, (field.vocab_size, self.dim), init="normal")
            )

    def _build(self) -> None:
        item_cat = {f.name: f for f in self.schema.item if f.kind == "categorical"}
        for group in ("item", "behavior", "user", "context"):
            for f in self.schema.fields(group):
                if f.kind != "categorical":
                    continue
                if (
                    group == "behavior"
                    and self.share_item_table
                    and f.name in item_cat
                ):
                    if item_cat[f.name].vocab_size != f.vocab_size:
                        raise SchemaError(
                            f"behavior field '{f.name}' cannot share the item table: "
                            f"vocab {f.vocab_size} != {item_cat[f.name].vocab_size}"
                        )
                    self._bind_table(f, "item")
                else:
                    self._bind_table(f, group)
        for group in ("item", "behavior", "user", "context"):
            for f in self.schema.fields(group):
                if f.kind == "numerical":
                    self._specs.append(
                        ParamSpec(f"embed.num.{group}.{f.name}.w", (self.dim,), init="normal")
                    )
                    self._specs.append(
                        ParamSpec(f"embed.num.{group}.{f.name}.b", (self.dim,), init="zeros")
                    )
        n_item = len(self.schema.item)
        self._specs.append(
            ParamSpec(
                "embed.item_proj.w", (n_item * self.dim, self.dim),
                init="normal", weight_decay=True,
            )
        )
        self._specs.append(ParamSpec("embed.item_proj.b", (self.dim,), init="zeros"))
        if len(self.schema.behavior) > 1:
            n_beh = len(self.schema.behavior)
            self._specs.append(
                ParamSpec(
                    "embed.behavior_proj.w", (n_beh * self.dim, self.dim),
                    init="normal", weight_decay=True,
                )
            )
            self._specs.append(
                ParamSpec("embed.behavior_proj.b", (self.dim,), init="zeros")
            )

    def param_specs(self) -> list[ParamSpec]:
        return list(self._specs)

    # -- single-field / single-instance API (evaluation path) --

    def embed_field(self, field: FieldSpec, value, params) -> np.ndarray:
        """Embed one field value to a length-d vector.

        Categorical values are exact row lookups; numerical values go through
        the field's affine map (value 0 returns the learned bias vector).
        """
        if field.kind == "categorical":
            if not 0 <= int(value) < field.vocab_size:
                raise OutOfVocabularyError(field.name, int(value), field.vocab_size)
            table = _arr(params[self.table_path[(field.group, field.name)]])
            return table[int(value)].copy()
        w = _arr(params[f"embed.num.{field.group}.{field.name}.w"])
        b = _arr(params[f"embed.num.{field.group}.{field.name}.b"])
        return float(value) * w + b

    def embed_instance(self, raw: RawInstance, params) -> EmbeddedInstance:
        """Embed one raw instance; deterministic given (raw, params)."""
        validate_instance(self.schema, raw)
        batch = InstanceBatch.from_instances(self.schema, [raw])
        emb = self.embed_batch(batch, params, tape=None)
        return emb.instance(0)

    # -- batched API (training path; records on `tape` when given) --

    def embed_batch(
        self, batch: InstanceBatch, params, tape: GradTape | None = None
    ) -> EmbeddedBatch:
        del tape  # the leaf tensors in `params` already carry the tape
        b = batch.size
        t_pad = batch.seq_len
        d = self.dim

        item_parts = [
            self._field_column(f, batch.item[f.name], params) for f in self.schema.item
        ]
        e_i = nm.concat_cols(item_parts) if len(item_parts) > 1 else item_parts[0]
        e_i = nm.add_bias(
            nm.matmul(e_i, params["embed.item_proj.w"]), params["embed.item_proj.b"]
        )

        beh_parts = [
            self._field_column(f, batch.behavior[f.name].reshape(-1), params)
            for f in self.schema.behavior
        ]
        e_b = nm.concat_cols(beh_parts) if len(beh_parts) > 1 else beh_parts[0]
        if len(beh_parts) > 1:
            e_b = nm.add_bias(
                nm.matmul(e_b, params["embed.behavior_proj.w"]),
                params["embed.behavior_proj.b"],
            )
        # zero the padded rows so they carry no signal and receive no gradient
        mask_col = batch.behavior_mask.reshape(-1, 1).astype(np.float64)
        e_b = nm.mul(e_b, mask_col)
        e_b = nm.reshape(e_b, (b, t_pad, d))

        e_u = self._group_matrix(self.schema.user, batch.user, b, params)
        e_c = self._group_matrix(self.schema.context, batch.context, b, params)
        return EmbeddedBatch(e_i, e_b, e_u, e_c, batch.behavior_mask.copy())

    def _field_column(self, field: FieldSpec, values: np.ndarray, params):
        if field.kind == "categorical":
            if values.size and (values.min() < 0 or values.max() >= field.vocab_size):
                bad = values[(values < 0) | (values >= field.vocab_size)][0]
                raise OutOfVocabularyError(field.name, int(bad), field.vocab_size)
            return nm.gather_rows(
                params[self.table_path[(field.group, field.name)]], values
            )
        w = params[f"embed.num.{field.group}.{field.name}.w"]
        bias = params[f"embed.num.{field.group}.{field.name}.b"]
        wrow = nm.reshape(w, (1, self.dim))
        return nm.add_bias(nm.mul(wrow, values.reshape(-1, 1)), bias)

    def _group_matrix(self, fields, columns, b: int, params):
        parts = [self._field_column(f, columns[f.name], params) for f in fields]
        flat = nm.concat_cols(parts) if len(parts) > 1 else parts[0]
        return nm.reshape(flat, (b, len(fields), self.dim))


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)
