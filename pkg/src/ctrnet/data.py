"""Raw labeled instances and their dense batched form.

A RawInstance carries one labeled sample as plain python values; InstanceBatch
packs a sequence of them into the integer/float arrays the model consumes,
padding behavior sequences to a fixed length with an explicit validity mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .schema import FieldSpec, Schema

Value = int | float


@dataclass(frozen=True)
class RawInstance:
    """One labeled sample: candidate item, behavior steps (oldest first), user and context fields."""

    label: int
    item: tuple[Value, ...]
    behaviors: tuple[tuple[Value, ...], ...]
    user: tuple[Value, ...]
    context: tuple[Value, ...]


def _check_group_values(fields: tuple[FieldSpec, ...], values: tuple[Value, ...], where: str) -> None:
    if len(values) != len(fields):
        raise SchemaError(
            f"{where}: expected {len(fields)} values, got {len(values)}"
        )
    for f, v in zip(fields, values):
        if f.kind == "categorical":
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise SchemaError(f"{where}: field '{f.name}' expects an integer, got {v!r}")
            if not 0 <= v < f.vocab_size:
                raise SchemaError(
                    f"{where}: field '{f.name}' value {v} outside vocab of size {f.vocab_size}"
                )
        else:
            if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
                raise SchemaError(f"{where}: field '{f.name}' expects a number, got {v!r}")


def validate_instance(schema: Schema, instance: RawInstance) -> None:
    """Check one instance against the schema; raises SchemaError naming the offending field."""
    if instance.label not in (0, 1):
        raise SchemaError(f"label must be 0 or 1, got {instance.label!r}")
    if len(instance.behaviors) > schema.max_behaviors:
        raise SchemaError(
            f"behavior sequence length {len(instance.behaviors)} exceeds "
            f"max_behaviors {schema.max_behaviors}"
        )
    _check_group_values(schema.item, instance.item, "item group")
    for t, step in enumerate(instance.behaviors):
        _check_group_values(schema.behavior, step, f"behavior step {t}")
    _check_group_values(schema.user, instance.user, "user group")
    _check_group_values(schema.context, instance.context, "context group")


def _column(fields, values_per_row, field_index, kind):
    if kind == "categorical":
        return np.array([row[field_index] for row in values_per_row], dtype=np.int64)
    return np.array([row[field_index] for row in values_per_row], dtype=np.float64)


@dataclass
class InstanceBatch:
    """Column-wise arrays for a batch: one array per field, behaviors padded to seq_len."""

    labels: np.ndarray  # (B,) int64
    item: dict[str, np.ndarray]  # (B,)
    behavior: dict[str, np.ndarray]  # (B, T)
    behavior_mask: np.ndarray  # (B, T) bool, True at real steps
    user: dict[str, np.ndarray]  # (B,)
    context: dict[str, np.ndarray]  # (B,)

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def seq_len(self) -> int:
        return int(self.behavior_mask.shape[1])

    @classmethod
    def from_instances(
        cls,
        schema: Schema,
        instances: list[RawInstance],
        pad_to: int | None = None,
    ) -> "InstanceBatch":
        """Pack instances into arrays, padding behaviors to `pad_to` (default schema length).

        Padded behavior positions hold value 0 and are marked invalid in the
        mask; they are zeroed at embedding time and excluded from attention.
        """
        if not instances:
            raise ValueError("cannot build a batch from zero instances")
        t_pad = schema.max_behaviors if pad_to is None else pad_to
        b = len(instances)
        labels = np.array([inst.label for inst in instances], dtype=np.int64)

        item_rows = [inst.item for inst in instances]
        user_rows = [inst.user for inst in instances]
        ctx_rows = [inst.context for inst in instances]
        item = {
            f.name: _column(schema.item, item_rows, i, f.kind)
            for i, f in enumerate(schema.item)
        }
        user = {
            f.name: _column(schema.user, user_rows, i, f.kind)
            for i, f in enumerate(schema.user)
        }
        context = {
            f.name: _column(schema.context, ctx_rows, i, f.kind)
            for i, f in enumerate(schema.context)
        }

        mask = np.zeros((b, t_pad), dtype=bool)
        behavior: dict[str, np.ndarray] = {}
        for i, f in enumerate(schema.behavior):
            dtype = np.int64 if f.kind == "categorical" else np.float64
            behavior[f.name] = np.zeros((b, t_pad), dtype=dtype)
        for row, inst in enumerate(instances):
            n = len(inst.behaviors)
            if n > t_pad:
                raise SchemaError(
                    f"instance {row}: {n} behaviors exceed padded length {t_pad}"
                )
            mask[row, :n] = True
            for t, step in enumerate(inst.behaviors):
                for i, f in enumerate(schema.behavior):
                    behavior[f.name][row, t] = step[i]
        return cls(labels, item, behavior, mask, user, context)
