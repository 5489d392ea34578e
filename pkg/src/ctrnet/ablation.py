"""Ablation runner: train module-disabled variants side by side on one dataset.

Each variant trains independently with its own parameter store initialized
from the same seed, so nothing is shared or mutated across variants and the
per-variant results do not depend on execution order. A disabled interaction
module contributes nothing beyond the original embeddings (its slot simply
disappears from the fusion stage); disabling the fusion stage feeds the plain
concatenation of the remaining slots to the MLP.
"""

from __future__ import annotations

from .data import RawInstance
from .metrics import MetricsReport
from .model import CtrModel, ModelConfig, VARIANTS
from .schema import Schema
from .training import TrainResult, train

DEFAULT_VARIANTS = (
    "full",
    "no_ibim",
    "no_iuim",
    "no_icim",
    "no_gim",
    "no_iuim_icim",
    "post_ln",
    "no_transformer",
    "lr_baseline",
    "mlp_baseline",
)


def run_variant(
    schema: Schema, instances: list[RawInstance], config: ModelConfig, name: str
) -> TrainResult:
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; known: {', '.join(sorted(VARIANTS))}")
    model = CtrModel(schema, config, name)
    return train(model, instances, config)


def run_ablation(
    schema: Schema,
    instances: list[RawInstance],
    config: ModelConfig,
    variants: tuple[str, ...] = DEFAULT_VARIANTS,
) -> dict[str, MetricsReport]:
    """Train every named variant from identical seeds; returns held-out metrics per variant."""
    results: dict[str, MetricsReport] = {}
    for name in variants:
        results[name] = run_variant(schema, instances, config, name).report
    return results


def write_ablation_tsv(path, results: dict[str, MetricsReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant\tauc\tlogloss\tfinal_train_loss\n")
        for name, report in results.items():
            final_loss = report.loss_curve[-1] if report.loss_curve else float("nan")
            fh.write(f"{name}\t{report.auc!r}\t{report.logloss!r}\t{final_loss!r}\n")
