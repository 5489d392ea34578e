"""NumPy implementation of an attention-based CTR model over grouped fine-grained features.

The model embeds four feature groups (candidate item, behavior sequence, user
fields, context fields), encodes behaviors with a pre-norm transformer block,
pools each group against the candidate with tanh-scored softmax attention,
fuses everything with a global attention stage, and predicts through a small
MLP. Training runs on a from-scratch reverse-mode tape; a seeded synthetic
data generator, AUC/logloss metrics, an ablation runner, and a CLI round out
the desk-scale harness.
"""

from .ablation import DEFAULT_VARIANTS, run_ablation, run_variant, write_ablation_tsv
from .behavior import (
    IbimParams,
    TransformerParams,
    ibim_attention,
    multi_head_self_attention,
    post_ln_transformer,
    pre_ln_transformer,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import InstanceBatch, RawInstance, validate_instance
from .datasynth import (
    SynthConfig,
    generate,
    generate_to_file,
    iter_dataset,
    load_dataset,
    write_dataset,
)
from .embedding import EmbeddedBatch, EmbeddedInstance, EmbeddingLayer
from .errors import (
    AllMaskedError,
    CheckpointError,
    CtrnetError,
    DatasetFormatError,
    NonFiniteError,
    OutOfVocabularyError,
    SchemaError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .export import export_attention, read_attention_rows
from .fusion import GlobalParams, SLOT_LABELS, assemble_slots, gim
from .interactions import LocalAttentionParams, icim, iuim
from .metrics import MetricsReport, SingleClassError, auc, auc_brute_force, evaluate, logloss
from .model import (
    AttentionRecord,
    CtrModel,
    ModelConfig,
    VARIANTS,
    VariantSpec,
    p_click_from_logits,
)
from .numerics import GradCheckReport, GradTape, Tensor, grad_check
from .params import ParamSpec, ParamStore
from .schema import FieldSpec, Schema
from .training import TrainResult, adam_step, predict_scores, split_train_heldout, train

__version__ = "0.1.0"

__all__ = [
    "AllMaskedError",
    "AttentionRecord",
    "CheckpointError",
    "CtrModel",
    "CtrnetError",
    "DEFAULT_VARIANTS",
    "DatasetFormatError",
    "EmbeddedBatch",
    "EmbeddedInstance",
    "EmbeddingLayer",
    "FieldSpec",
    "GlobalParams",
    "GradCheckReport",
    "GradTape",
    "IbimParams",
    "InstanceBatch",
    "LocalAttentionParams",
    "MetricsReport",
    "ModelConfig",
    "NonFiniteError",
    "OutOfVocabularyError",
    "ParamSpec",
    "ParamStore",
    "RawInstance",
    "Schema",
    "SchemaError",
    "ShapeMismatchError",
    "SingleClassError",
    "SLOT_LABELS",
    "SynthConfig",
    "Tensor",
    "TrainResult",
    "TrainingDivergedError",
    "TransformerParams",
    "VARIANTS",
    "VariantSpec",
    "adam_step",
    "assemble_slots",
    "auc",
    "auc_brute_force",
    "evaluate",
    "export_attention",
    "generate",
    "generate_to_file",
    "gim",
    "grad_check",
    "ibim_attention",
    "icim",
    "iter_dataset",
    "iuim",
    "load_checkpoint",
    "load_dataset",
    "logloss",
    "multi_head_self_attention",
    "p_click_from_logits",
    "post_ln_transformer",
    "pre_ln_transformer",
    "predict_scores",
    "read_attention_rows",
    "run_ablation",
    "run_variant",
    "save_checkpoint",
    "split_train_heldout",
    "train",
    "validate_instance",
    "write_ablation_tsv",
    "write_dataset",
]
