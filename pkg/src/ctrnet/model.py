"""Model assembly: configuration, parameter layout, forward pass, and loss.

A model instance binds a schema, a configuration, and a variant (which modules
are active). The full variant embeds the four groups, encodes behaviors with
the pre-norm transformer block, runs the three candidate-conditioned
interactions, fuses seven slots with global attention, and predicts through a
ReLU MLP ending in two logits and a two-class softmax. Ablation variants
disable modules; two reference baselines (a linear model over one-hot fields
and a plain embedding MLP) share the training and evaluation machinery.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .behavior import IbimParams, TransformerParams, encode_behaviors_batch, ibim_attention_batch
from .data import InstanceBatch, RawInstance
from .embedding import EmbeddedBatch, EmbeddedInstance, EmbeddingLayer
from .errors import SchemaError
from .fusion import GlobalParams, SLOT_LABELS, assemble_slots_batch, gim_batch
from .interactions import LocalAttentionParams, field_attention_batch
from .numerics import GradCheckReport, GradTape, Tensor, check_finite, grad_check
from .params import ParamSpec, ParamStore
from .schema import Schema


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; defaults are the published training setup where one exists."""

    embed_dim: int = 16
    seq_len: int = 30
    n_heads: int = 8
    mlp_dims: tuple[int, ...] = (32, 8)
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    dropout: float = 0.2
    l2_coeff: float = 1e-3
    init_stddev: float = 0.02
    epochs: int = 3
    seed: int = 42
    ffn_dim: int = 0  # 0 selects 4 * embed_dim
    ln_eps: float = 1e-6
    adam_eps: float = 1e-8
    share_item_table: bool = True

    @property
    def ffn_width(self) -> int:
        return self.ffn_dim if self.ffn_dim > 0 else 4 * self.embed_dim

    def replace(self, **kw) -> "ModelConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "mlp_dims":
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            kw[key] = _parse_config_value(known[key], value, lineno)
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ModelConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def _parse_config_value(f: dataclasses.Field, value: str, lineno: int):
    try:
        if f.name == "mlp_dims":
            return tuple(int(v) for v in value.split(",") if v)
        if f.type in ("int", int):
            return int(value)
        if f.type in ("float", float):
            return float(value)
        if f.type in ("bool", bool):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        return value
    except ValueError:
        raise ValueError(f"config line {lineno}: bad value {value!r} for {f.name}") from None


@dataclass(frozen=True)
class VariantSpec:
    """Which modules a model variant keeps active."""

    name: str
    use_ibim: bool = True
    use_iuim: bool = True
    use_icim: bool = True
    use_gim: bool = True
    transformer: str = "pre_ln"  # "pre_ln" | "post_ln" | "none"
    family: str = "interaction"  # "interaction" | "lr" | "mlp"

    def slot_labels(self) -> tuple[str, ...]:
        drop = set()
        if not self.use_ibim:
            drop.add("R_ibim")
        if not self.use_iuim:
            drop.add("R_iuim")
        if not self.use_icim:
            drop.add("R_icim")
        return tuple(label for label in SLOT_LABELS if label not in drop)


VARIANTS: dict[str, VariantSpec] = {
    "full": VariantSpec("full"),
    "no_ibim": VariantSpec("no_ibim", use_ibim=False),
    "no_iuim": VariantSpec("no_iuim", use_iuim=False),
    "no_icim": VariantSpec("no_icim", use_icim=False),
    "no_gim": VariantSpec("no_gim", use_gim=False),
    "no_iuim_icim": VariantSpec("no_iuim_icim", use_iuim=False, use_icim=False),
    "post_ln": VariantSpec("post_ln", transformer="post_ln"),
    "no_transformer": VariantSpec("no_transformer", transformer="none"),
    "lr_baseline": VariantSpec(
        "lr_baseline", use_ibim=False, use_iuim=False, use_icim=False,
        use_gim=False, transformer="none", family="lr",
    ),
    "mlp_baseline": VariantSpec(
        "mlp_baseline", use_ibim=False, use_iuim=False, use_icim=False,
        use_gim=False, transformer="none", family="mlp",
    ),
}


@dataclass
class AttentionRecord:
    """Exported attention weights of one instance; absent families are None."""

    alpha_behavior: np.ndarray | None  # (T,), zero at padded steps
    alpha_user: np.ndarray | None  # (J,)
    alpha_context: np.ndarray | None  # (K,)
    alpha_global: np.ndarray | None  # (L,)
    slot_labels: tuple[str, ...]


@dataclass
class AttentionBatch:
    """Batched attention weights plus the slot stack, for export and reconstruction checks."""

    alpha_behavior: np.ndarray | None  # (B, T)
    alpha_user: np.ndarray | None  # (B, J)
    alpha_context: np.ndarray | None  # (B, K)
    alpha_global: np.ndarray | None  # (B, L)
    slot_labels: tuple[str, ...]
    slots: np.ndarray | None  # (B, L, d)
    fused: np.ndarray | None  # (B, d)

    def record(self, row: int) -> AttentionRecord:
        pick = lambda a: None if a is None else a[row].copy()
        return AttentionRecord(
            alpha_behavior=pick(self.alpha_behavior),
            alpha_user=pick(self.alpha_user),
            alpha_context=pick(self.alpha_context),
            alpha_global=pick(self.alpha_global),
            slot_labels=self.slot_labels,
        )


@dataclass
class ForwardOutput:
    logits: Tensor  # (B, 2)
    p_click: np.ndarray  # (B,)
    attention: AttentionBatch


@dataclass
class LossOutput:
    total: Tensor  # scalar, cross-entropy plus L2 penalty
    cross_entropy: Tensor  # scalar
    probs: np.ndarray  # (B, 2)
    forward: ForwardOutput


def p_click_from_logits(logits: np.ndarray) -> np.ndarray:
    """Two-class softmax click probability; identical to sigmoid(z1 - z0)."""
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    return e[:, 1] / e.sum(axis=1)


class CtrModel:
    """Binds schema + config + variant; owns parameter layout and the forward pass."""

    def __init__(self, schema: Schema, config: ModelConfig, variant: VariantSpec | str = "full"):
        if isinstance(variant, str):
            if variant not in VARIANTS:
                raise ValueError(f"unknown variant {variant!r}")
            variant = VARIANTS[variant]
        self.schema = schema
        self.config = config
        self.variant = variant
        if schema.max_behaviors != config.seq_len:
            raise SchemaError(
                f"schema pads behaviors to {schema.max_behaviors} but the "
                f"config expects seq_len {config.seq_len}"
            )
        d = config.embed_dim
        if variant.use_ibim and variant.transformer != "none" and d % config.n_heads != 0:
            raise SchemaError(f"embed_dim {d} not divisible by n_heads {config.n_heads}")
        self.embedding = EmbeddingLayer(schema, d, config.share_item_table)
        self.slot_labels = variant.slot_labels()
        self._specs = self._build_specs()

    # -- parameter layout --

    def _build_specs(self) -> list[ParamSpec]:
        cfg = self.config
        d = cfg.embed_dim
        v = self.variant
        if v.family == "lr":
            specs = []
            for group in ("item", "user", "context"):
                for f in self.schema.fields(group):
                    if f.kind == "categorical":
                        specs.append(ParamSpec(f"lr.table.{group}.{f.name}", (f.vocab_size, 1)))
                    else:
                        specs.append(ParamSpec(f"lr.num.{group}.{f.name}", (1, 1)))
            specs.append(ParamSpec("lr.bias", (1,), init="zeros"))
            return specs

        specs = self.embedding.param_specs()
        if v.use_ibim:
            if v.transformer != "none":
                for name in ("wq", "wk", "wv", "wo"):
                    specs.append(ParamSpec(f"ibim.attn.{name}", (d, d), weight_decay=True))
                specs.append(ParamSpec("ibim.ffn.w1", (d, cfg.ffn_width), weight_decay=True))
                specs.append(ParamSpec("ibim.ffn.b1", (cfg.ffn_width,), init="zeros"))
                specs.append(ParamSpec("ibim.ffn.w2", (cfg.ffn_width, d), weight_decay=True))
                specs.append(ParamSpec("ibim.ffn.b2", (d,), init="zeros"))
                for ln in ("ln1", "ln2"):
                    specs.append(ParamSpec(f"ibim.{ln}.gamma", (d,), init="ones"))
                    specs.append(ParamSpec(f"ibim.{ln}.beta", (d,), init="zeros"))
            specs.append(ParamSpec("ibim.score.w", (2 * d, 1), weight_decay=True))
            specs.append(ParamSpec("ibim.score.b", (1,), init="zeros"))
        if v.use_iuim:
            j = self.schema.n_user_fields
            specs.append(ParamSpec("iuim.score.w", (j, 2 * d), weight_decay=True))
            specs.append(ParamSpec("iuim.score.b", (j,), init="zeros"))
        if v.use_icim:
            k = self.schema.n_context_fields
            specs.append(ParamSpec("icim.score.w", (k, 2 * d), weight_decay=True))
            specs.append(ParamSpec("icim.score.b", (k,), init="zeros"))

        if v.family == "interaction":
            n_slots = len(self.slot_labels)
            if any(label.startswith("R_") for label in self.slot_labels):
                specs.append(ParamSpec("gim.proj.w", (2 * d, d), weight_decay=True))
            if v.use_gim:
                specs.append(ParamSpec("gim.score.w", (n_slots, d), weight_decay=True))
                specs.append(ParamSpec("gim.score.b", (n_slots,), init="zeros"))
                mlp_in = d
            else:
                mlp_in = n_slots * d
        else:  # plain embedding MLP baseline
            mlp_in = (2 + self.schema.n_user_fields + self.schema.n_context_fields) * d

        width = mlp_in
        for i, hidden in enumerate(cfg.mlp_dims):
            specs.append(ParamSpec(f"mlp.h{i}.w", (width, hidden), weight_decay=True))
            specs.append(ParamSpec(f"mlp.h{i}.b", (hidden,), init="zeros"))
            width = hidden
        specs.append(ParamSpec("mlp.out.w", (width, 2), weight_decay=True))
        specs.append(ParamSpec("mlp.out.b", (2,), init="zeros"))
        return specs

    def param_specs(self) -> list[ParamSpec]:
        return list(self._specs)

    def init_params(self, seed: int | None = None) -> ParamStore:
        seed = self.config.seed if seed is None else seed
        return ParamStore.initialize(self._specs, seed, self.config.init_stddev)

    # -- parameter views --

    def transformer_params(self, leaves) -> TransformerParams:
        return TransformerParams(
            wq=leaves["ibim.attn.wq"], wk=leaves["ibim.attn.wk"],
            wv=leaves["ibim.attn.wv"], wo=leaves["ibim.attn.wo"],
            w1=leaves["ibim.ffn.w1"], b1=leaves["ibim.ffn.b1"],
            w2=leaves["ibim.ffn.w2"], b2=leaves["ibim.ffn.b2"],
            ln1_gamma=leaves["ibim.ln1.gamma"], ln1_beta=leaves["ibim.ln1.beta"],
            ln2_gamma=leaves["ibim.ln2.gamma"], ln2_beta=leaves["ibim.ln2.beta"],
            n_heads=self.config.n_heads, ln_eps=self.config.ln_eps,
        )

    def ibim_params(self, leaves) -> IbimParams:
        return IbimParams(score_w=leaves["ibim.score.w"], score_b=leaves["ibim.score.b"])

    def iuim_params(self, leaves) -> LocalAttentionParams:
        return LocalAttentionParams(leaves["iuim.score.w"], leaves["iuim.score.b"])

    def icim_params(self, leaves) -> LocalAttentionParams:
        return LocalAttentionParams(leaves["icim.score.w"], leaves["icim.score.b"])

    def global_params(self, leaves) -> GlobalParams:
        return GlobalParams(
            proj_w=leaves.get("gim.proj.w"),
            score_w=leaves["gim.score.w"],
            score_b=leaves["gim.score.b"],
            labels=self.slot_labels,
        )

    # -- forward --

    def forward_batch(
        self,
        batch: InstanceBatch,
        leaves,
        mode: str = "eval",
        rng: np.random.Generator | None = None,
    ) -> ForwardOutput:
        """Forward over a packed batch. `leaves` maps path to Tensor (taped) or array."""
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        if self.variant.family == "lr":
            return self._forward_lr(batch, leaves)
        emb = self.embedding.embed_batch(batch, leaves)
        check_finite(emb.e_i, "embedding layer")
        if self.variant.family == "mlp":
            return self._forward_plain_mlp(batch, emb, leaves, mode, rng)
        return self.forward_embedded_batch(emb, leaves, mode, rng)

    def forward_embedded_batch(
        self,
        emb: EmbeddedBatch,
        leaves,
        mode: str = "eval",
        rng: np.random.Generator | None = None,
    ) -> ForwardOutput:
        v = self.variant
        mask = emb.behavior_mask
        interactive: dict[str, Tensor] = {}
        alpha_t = alpha_u = alpha_c = None

        if v.use_ibim:
            h_b = encode_behaviors_batch(
                emb.e_b, mask,
                self.transformer_params(leaves) if v.transformer != "none" else None,
                v.transformer,
            )
            r_ibim, a_t = ibim_attention_batch(emb.e_i, h_b, mask, self.ibim_params(leaves))
            interactive["R_ibim"] = r_ibim
            alpha_t = a_t.data
        if v.use_iuim:
            r_iuim, a_u = field_attention_batch(emb.e_i, emb.e_u, self.iuim_params(leaves))
            interactive["R_iuim"] = r_iuim
            alpha_u = a_u.data
        if v.use_icim:
            r_icim, a_c = field_attention_batch(emb.e_i, emb.e_c, self.icim_params(leaves))
            interactive["R_icim"] = r_icim
            alpha_c = a_c.data

        proj = leaves.get("gim.proj.w") if any(l.startswith("R_") for l in self.slot_labels) else None
        slots = assemble_slots_batch(emb, interactive, proj, self.slot_labels)
        if v.use_gim:
            fused, a_g = gim_batch(slots, self.global_params(leaves))
            check_finite(fused, "global fusion")
            mlp_in = fused
            alpha_g, fused_data = a_g.data, fused.data
        else:
            b = emb.size
            mlp_in = nm.reshape(slots, (b, len(self.slot_labels) * self.config.embed_dim))
            alpha_g, fused_data = None, None

        logits = self._mlp(mlp_in, leaves, mode, rng)
        attention = AttentionBatch(
            alpha_behavior=alpha_t, alpha_user=alpha_u, alpha_context=alpha_c,
            alpha_global=alpha_g, slot_labels=self.slot_labels,
            slots=slots.data, fused=fused_data,
        )
        return ForwardOutput(logits, p_click_from_logits(logits.data), attention)

    def _mlp(self, x, leaves, mode: str, rng: np.random.Generator | None) -> Tensor:
        cfg = self.config
        for i in range(len(cfg.mlp_dims)):
            x = nm.relu(nm.add_bias(nm.matmul(x, leaves[f"mlp.h{i}.w"]), leaves[f"mlp.h{i}.b"]))
            if mode == "train" and cfg.dropout > 0.0:
                if rng is None:
                    raise ValueError("train mode with dropout needs a random generator")
                x = nm.dropout(x, cfg.dropout, rng)
        logits = nm.add_bias(nm.matmul(x, leaves["mlp.out.w"]), leaves["mlp.out.b"])
        check_finite(logits, "prediction head")
        return logits

    def _forward_plain_mlp(self, batch, emb, leaves, mode, rng) -> ForwardOutput:
        from .fusion import masked_mean_weights, mean_pool_rows

        b = emb.size
        d = self.config.embed_dim
        j = self.schema.n_user_fields
        k = self.schema.n_context_fields
        pooled_b = mean_pool_rows(emb.e_b, masked_mean_weights(emb.behavior_mask))
        parts = [
            emb.e_i,
            pooled_b,
            nm.reshape(emb.e_u, (b, j * d)),
            nm.reshape(emb.e_c, (b, k * d)),
        ]
        logits = self._mlp(nm.concat_cols(parts), leaves, mode, rng)
        attention = AttentionBatch(None, None, None, None, (), None, None)
        return ForwardOutput(logits, p_click_from_logits(logits.data), attention)

    def _forward_lr(self, batch: InstanceBatch, leaves) -> ForwardOutput:
        b = batch.size
        z = None
        for group, columns in (("item", batch.item), ("user", batch.user), ("context", batch.context)):
            for f in self.schema.fields(group):
                if f.kind == "categorical":
                    values = columns[f.name]
                    if values.min() < 0 or values.max() >= f.vocab_size:
                        raise SchemaError(f"field '{f.name}': value outside vocab")
                    part = nm.gather_rows(leaves[f"lr.table.{group}.{f.name}"], values)
                else:
                    part = nm.matmul(
                        columns[f.name].reshape(-1, 1), leaves[f"lr.num.{group}.{f.name}"]
                    )
                z = part if z is None else nm.add(z, part)
        z = nm.add_bias(z, leaves["lr.bias"])
        logits = nm.concat_cols([np.zeros((b, 1)), z])
        check_finite(logits, "linear model output")
        attention = AttentionBatch(None, None, None, None, (), None, None)
        return ForwardOutput(logits, p_click_from_logits(logits.data), attention)

    # -- loss --

    def loss_batch(
        self,
        batch: InstanceBatch,
        leaves,
        mode: str = "train",
        rng: np.random.Generator | None = None,
    ) -> LossOutput:
        """Mean cross-entropy from logits plus the L2 penalty on weight matrices."""
        out = self.forward_batch(batch, leaves, mode, rng)
        ce, probs = nm.cross_entropy_logits(out.logits, batch.labels)
        total = ce
        coeff = self.config.l2_coeff
        if coeff > 0.0:
            penalty = None
            for spec in self._specs:
                if spec.weight_decay:
                    term = nm.sumsq(leaves[spec.path])
                    penalty = term if penalty is None else nm.add(penalty, term)
            if penalty is not None:
                total = nm.add(ce, nm.scale(penalty, coeff))
        return LossOutput(total, ce, probs, out)

    # -- convenience single-instance paths --

    def forward_instance(self, raw: RawInstance, store: ParamStore) -> tuple[float, AttentionRecord]:
        batch = InstanceBatch.from_instances(self.schema, [raw])
        out = self.forward_batch(batch, store.tensors, "eval")
        return float(out.p_click[0]), out.attention.record(0)

    def forward_embedded(
        self, emb: EmbeddedInstance, store: ParamStore, mode: str = "eval",
        rng: np.random.Generator | None = None,
    ) -> tuple[float, AttentionRecord]:
        """Prediction from an already-embedded instance (interaction family only)."""
        if self.variant.family != "interaction":
            raise ValueError("embedded-instance forward applies to interaction models only")
        batch = EmbeddedBatch(
            e_i=Tensor(np.asarray(emb.e_i)[None, :]),
            e_b=Tensor(np.asarray(emb.e_b)[None, :, :]),
            e_u=Tensor(np.asarray(emb.e_u)[None, :, :]),
            e_c=Tensor(np.asarray(emb.e_c)[None, :, :]),
            behavior_mask=np.asarray(emb.behavior_mask, dtype=bool)[None, :],
        )
        out = self.forward_embedded_batch(batch, store.tensors, mode, rng)
        return float(out.p_click[0]), out.attention.record(0)

    def predict(self, batch: InstanceBatch, store: ParamStore) -> ForwardOutput:
        return self.forward_batch(batch, store.tensors, "eval")

    # -- gradient checking --

    def gradient_check(
        self,
        batch: InstanceBatch,
        store: ParamStore,
        *,
        step: float = 1e-5,
        n_samples: int = 64,
        tolerance: float | None = None,
        seed: int = 0,
    ) -> GradCheckReport:
        """Compare reverse-mode batch-loss gradients against central differences.

        Dropout is disabled (evaluation-mode loss) so the objective is
        deterministic; sampled coordinates keep the cost far below one forward
        pass per parameter.
        """

        def objective(tensors: dict[str, np.ndarray], need_grad: bool):
            if need_grad:
                tape = GradTape()
                leaves = {path: Tensor(arr, tape) for path, arr in tensors.items()}
                loss = self.loss_batch(batch, leaves, mode="eval").total
                tape.backward(loss)
                grads = {
                    path: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
                    for path, leaf in leaves.items()
                }
                return float(loss.data), grads
            loss = self.loss_batch(batch, tensors, mode="eval").total
            return float(loss.data), None

        return grad_check(
            objective, store.tensors,
            step=step, n_samples=n_samples, tolerance=tolerance, seed=seed,
        )
