"""Seeded synthetic CTR dataset with planted, module-attributable signals.

The click logit mixes three signals, one per interaction pathway: a binary
behavior-match bit (the candidate's category appears among the categories of
the behavior items), a user-affinity term indexed by the first user field and
the candidate category, and a seasonality term indexed by the first context
field and the candidate category, plus Gaussian noise. Labels are Bernoulli
draws of the logistic of that logit. A configurable fraction of users is
"inactive" with 0-3 behaviors, matching the long-tail activity shape real
logs show.

Randomness comes from the counter-based Philox generator so files are
reproducible across platforms and reimplementations: stream 0 derives the
shared tables, stream i+1 drives instance i. The draw order inside each
stream and the file layout are fixed bit-exactly in docs/FORMATS.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import RawInstance, validate_instance
from .errors import DatasetFormatError, SchemaError
from .schema import FieldSpec, Schema


@dataclass(frozen=True)
class SynthConfig:
    """Generator knobs: sizes, vocabularies, signal weights, and the seed."""

    n_instances: int = 50_000
    n_items: int = 2_000
    n_categories: int = 40
    user_vocab: int = 50
    context_vocab: int = 20
    n_user_fields: int = 6
    n_context_fields: int = 4
    max_behaviors: int = 30
    w_behavior: float = 2.0
    w_user: float = 1.5
    w_context: float = 1.5
    noise_std: float = 0.5
    inactive_frac: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_instances < 1:
            raise ValueError("n_instances must be >= 1")
        if min(self.n_items, self.n_categories, self.user_vocab, self.context_vocab) < 1:
            raise ValueError("vocabulary sizes must be >= 1")
        if self.n_user_fields < 1 or self.n_context_fields < 1:
            raise ValueError("need at least one user field and one context field")
        if self.max_behaviors < 1:
            raise ValueError("max_behaviors must be >= 1")
        if not 0.0 <= self.inactive_frac <= 1.0:
            raise ValueError("inactive_frac must lie in [0, 1]")
        for w in (self.w_behavior, self.w_user, self.w_context, self.noise_std):
            if not math.isfinite(w):
                raise ValueError("signal weights and noise_std must be finite")


def build_schema(config: SynthConfig) -> Schema:
    return Schema(
        item=(
            FieldSpec("item_id", "categorical", config.n_items, "item"),
            FieldSpec("item_category", "categorical", config.n_categories, "item"),
        ),
        behavior=(FieldSpec("item_id", "categorical", config.n_items, "behavior"),),
        user=tuple(
            FieldSpec(f"user_{j}", "categorical", config.user_vocab, "user")
            for j in range(config.n_user_fields)
        ),
        context=tuple(
            FieldSpec(f"ctx_{k}", "categorical", config.context_vocab, "context")
            for k in range(config.n_context_fields)
        ),
        max_behaviors=config.max_behaviors,
    )


def substream(seed: int, stream_id: int) -> np.random.Generator:
    """Philox substream keyed by (seed, stream_id); stream 0 is reserved for tables."""
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass
class SignalTables:
    """Shared ground-truth tables drawn once from stream 0."""

    category_of_item: np.ndarray  # (n_items,) int
    affinity: np.ndarray  # (user_vocab, n_categories)
    season: np.ndarray  # (context_vocab, n_categories)


def signal_tables(config: SynthConfig) -> SignalTables:
    rng = substream(config.seed, 0)
    return SignalTables(
        category_of_item=rng.integers(0, config.n_categories, size=config.n_items),
        affinity=rng.standard_normal((config.user_vocab, config.n_categories)),
        season=rng.standard_normal((config.context_vocab, config.n_categories)),
    )


def _draw_length(rng: np.random.Generator, config: SynthConfig) -> int:
    t = config.max_behaviors
    if rng.random() < config.inactive_frac:
        return int(rng.integers(0, min(3, t) + 1))
    return int(rng.integers(min(4, t), t + 1))


def generate(config: SynthConfig) -> tuple[Schema, list[RawInstance]]:
    """Materialize the dataset in memory; identical configs agree bitwise."""
    schema = build_schema(config)
    tables = signal_tables(config)
    instances = []
    for i in range(config.n_instances):
        rng = substream(config.seed, i + 1)
        item_id = int(rng.integers(0, config.n_items))
        item_cat = int(tables.category_of_item[item_id])
        length = _draw_length(rng, config)
        behavior_ids = rng.integers(0, config.n_items, size=length)
        user_values = rng.integers(0, config.user_vocab, size=config.n_user_fields)
        ctx_values = rng.integers(0, config.context_vocab, size=config.n_context_fields)
        noise = float(rng.normal(0.0, config.noise_std)) if config.noise_std > 0 else 0.0
        match = 1.0 if item_cat in set(tables.category_of_item[behavior_ids]) else 0.0
        z = (
            config.w_behavior * match
            + config.w_user * float(tables.affinity[user_values[0], item_cat])
            + config.w_context * float(tables.season[ctx_values[0], item_cat])
            + noise
        )
        label = int(rng.random() < sigmoid(z))
        instances.append(
            RawInstance(
                label=label,
                item=(item_id, item_cat),
                behaviors=tuple((int(b),) for b in behavior_ids),
                user=tuple(int(v) for v in user_values),
                context=tuple(int(v) for v in ctx_values),
            )
        )
    return schema, instances


# ---------------------------------------------------------------------------
# dataset file format (see docs/FORMATS.md for the bit-exact definition)
# ---------------------------------------------------------------------------


def _format_value(spec: FieldSpec, value) -> str:
    if spec.kind == "categorical":
        return str(int(value))
    return repr(float(value))


def _format_instance(schema: Schema, inst: RawInstance) -> str:
    item = ",".join(_format_value(f, v) for f, v in zip(schema.item, inst.item))
    behaviors = "|".join(
        ",".join(_format_value(f, v) for f, v in zip(schema.behavior, step))
        for step in inst.behaviors
    )
    user = ",".join(_format_value(f, v) for f, v in zip(schema.user, inst.user))
    ctx = ",".join(_format_value(f, v) for f, v in zip(schema.context, inst.context))
    return f"{inst.label}\t{item}\t{behaviors}\t{user}\t{ctx}"


def write_dataset(path, schema: Schema, instances: list[RawInstance]) -> None:
    """Header line then one tab-separated line per instance, trailing newline included."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(schema.header_line() + "\n")
        for inst in instances:
            fh.write(_format_instance(schema, inst) + "\n")


def generate_to_file(config: SynthConfig, path) -> Schema:
    schema, instances = generate(config)
    write_dataset(path, schema, instances)
    return schema


def _parse_group(fields, text: str, line_number: int, where: str):
    tokens = text.split(",") if text else []
    if len(tokens) != len(fields):
        raise DatasetFormatError(
            line_number, f"{where}: expected {len(fields)} values, got {len(tokens)}"
        )
    values = []
    for f, token in zip(fields, tokens):
        try:
            values.append(int(token) if f.kind == "categorical" else float(token))
        except ValueError:
            raise DatasetFormatError(
                line_number, f"{where}: bad value {token!r} for field '{f.name}'"
            ) from None
    return tuple(values)


def parse_instance_line(schema: Schema, line: str, line_number: int) -> RawInstance:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 5:
        raise DatasetFormatError(
            line_number, f"expected 5 tab-separated sections, got {len(parts)}"
        )
    label_text, item_text, behavior_text, user_text, ctx_text = parts
    if label_text not in ("0", "1"):
        raise DatasetFormatError(line_number, f"label must be 0 or 1, got {label_text!r}")
    behaviors = tuple(
        _parse_group(schema.behavior, step, line_number, "behavior step")
        for step in (behavior_text.split("|") if behavior_text else [])
    )
    inst = RawInstance(
        label=int(label_text),
        item=_parse_group(schema.item, item_text, line_number, "item group"),
        behaviors=behaviors,
        user=_parse_group(schema.user, user_text, line_number, "user group"),
        context=_parse_group(schema.context, ctx_text, line_number, "context group"),
    )
    try:
        validate_instance(schema, inst)
    except SchemaError as exc:
        raise DatasetFormatError(line_number, str(exc)) from None
    return inst


def read_header(path) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
    if not header:
        raise DatasetFormatError(1, "empty file, expected a header line")
    try:
        return Schema.from_header_line(header)
    except SchemaError as exc:
        raise DatasetFormatError(1, str(exc)) from None


def iter_dataset(path) -> Iterator[RawInstance]:
    """Stream instances, validating each against the header schema as it is read."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise DatasetFormatError(1, "empty file, expected a header line")
        try:
            schema = Schema.from_header_line(header)
        except SchemaError as exc:
            raise DatasetFormatError(1, str(exc)) from None
        for line_number, line in enumerate(fh, start=2):
            if line and not line.endswith("\n"):
                # a record without its newline means the write was cut short
                raise DatasetFormatError(line_number, "truncated record (missing newline)")
            yield parse_instance_line(schema, line, line_number)


def load_dataset(path) -> tuple[Schema, list[RawInstance]]:
    schema = read_header(path)
    return schema, list(iter_dataset(path))
