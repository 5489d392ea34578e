"""Field schemas for the four feature groups and their single-line header encoding.

A dataset file starts with one header line that fully determines the schema:
group tags, field names, kinds, vocabulary sizes, and the padded behavior
length. The encoding is documented bit-exactly in docs/FORMATS.md.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import SchemaError

GROUPS = ("item", "behavior", "user", "context")

_KIND_TOKEN = {"categorical": "cat", "numerical": "num"}
_TOKEN_KIND = {v: k for k, v in _KIND_TOKEN.items()}


@dataclass(frozen=True)
class FieldSpec:
    """One fine-grained field: a named categorical or numerical attribute of a group."""

    name: str
    kind: str  # "categorical" | "numerical"
    vocab_size: int = 0
    group: str = ""

    def __post_init__(self):
        if self.kind not in ("categorical", "numerical"):
            raise SchemaError(f"field '{self.name}': unknown kind {self.kind!r}")
        if self.group not in GROUPS:
            raise SchemaError(f"field '{self.name}': unknown group {self.group!r}")
        if self.kind == "categorical" and self.vocab_size < 1:
            raise SchemaError(
                f"field '{self.name}': categorical vocab_size must be >= 1, "
                f"got {self.vocab_size}"
            )
        if not self.name or any(c in self.name for c in ",:\t|="):
            raise SchemaError(f"invalid field name {self.name!r}")

    def _token(self) -> str:
        if self.kind == "categorical":
            return f"{self.name}:cat:{self.vocab_size}"
        return f"{self.name}:num"


@dataclass(frozen=True)
class Schema:
    """Field specs for the item, behavior, user, and context groups, plus the padded length."""

    item: tuple[FieldSpec, ...]
    behavior: tuple[FieldSpec, ...]
    user: tuple[FieldSpec, ...]
    context: tuple[FieldSpec, ...]
    max_behaviors: int  # padded behavior sequence length

    def __post_init__(self):
        for group in GROUPS:
            fields = self.fields(group)
            if not fields:
                raise SchemaError(f"group '{group}' must declare at least one field")
            names = [f.name for f in fields]
            if len(set(names)) != len(names):
                raise SchemaError(f"group '{group}': duplicate field names {names}")
            for f in fields:
                if f.group != group:
                    raise SchemaError(
                        f"field '{f.name}' tagged group '{f.group}' placed under '{group}'"
                    )
        if self.max_behaviors < 1:
            raise SchemaError(f"max_behaviors must be >= 1, got {self.max_behaviors}")

    def fields(self, group: str) -> tuple[FieldSpec, ...]:
        return getattr(self, group)

    @property
    def n_user_fields(self) -> int:
        return len(self.user)

    @property
    def n_context_fields(self) -> int:
        return len(self.context)

    def header_line(self) -> str:
        """Encode the schema as the dataset header line (no trailing newline)."""
        sections = [
            "#ctrdata",
            "v=1",
            f"T={self.max_behaviors}",
            f"J={self.n_user_fields}",
            f"K={self.n_context_fields}",
        ]
        for group in GROUPS:
            tokens = ",".join(f._token() for f in self.fields(group))
            sections.append(f"{group}={tokens}")
        return "\t".join(sections)

    def content_hash(self) -> str:
        """Stable identity of the schema, used to pair checkpoints with datasets."""
        return hashlib.sha256(self.header_line().encode("utf-8")).hexdigest()

    @classmethod
    def from_header_line(cls, line: str) -> "Schema":
        parts = line.rstrip("\n").split("\t")
        if not parts or parts[0] != "#ctrdata":
            raise SchemaError("header must start with '#ctrdata'")
        kv: dict[str, str] = {}
        for section in parts[1:]:
            if "=" not in section:
                raise SchemaError(f"malformed header section {section!r}")
            key, value = section.split("=", 1)
            if key in kv:
                raise SchemaError(f"duplicate header section {key!r}")
            kv[key] = value
        for required in ("v", "T", "J", "K", *GROUPS):
            if required not in kv:
                raise SchemaError(f"header missing section {required!r}")
        if kv["v"] != "1":
            raise SchemaError(f"unsupported dataset format version {kv['v']!r}")
        groups: dict[str, tuple[FieldSpec, ...]] = {}
        for group in GROUPS:
            fields = []
            for token in kv[group].split(","):
                bits = token.split(":")
                if len(bits) == 3 and bits[1] == "cat":
                    try:
                        vocab = int(bits[2])
                    except ValueError:
                        raise SchemaError(f"bad vocab size in field token {token!r}") from None
                    fields.append(FieldSpec(bits[0], "categorical", vocab, group))
                elif len(bits) == 2 and bits[1] in _TOKEN_KIND:
                    if bits[1] == "cat":
                        raise SchemaError(f"categorical field token missing vocab: {token!r}")
                    fields.append(FieldSpec(bits[0], "numerical", 0, group))
                else:
                    raise SchemaError(f"malformed field token {token!r}")
            groups[group] = tuple(fields)
        try:
            t = int(kv["T"])
        except ValueError:
            raise SchemaError(f"bad T value {kv['T']!r}") from None
        schema = cls(
            item=groups["item"],
            behavior=groups["behavior"],
            user=groups["user"],
            context=groups["context"],
            max_behaviors=t,
        )
        if int(kv["J"]) != schema.n_user_fields or int(kv["K"]) != schema.n_context_fields:
            raise SchemaError(
                f"header J/K ({kv['J']}/{kv['K']}) disagree with declared fields "
                f"({schema.n_user_fields}/{schema.n_context_fields})"
            )
        return schema
