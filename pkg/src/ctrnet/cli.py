"""Command-line entry points: gen-data, train, eval, ablate, gradcheck, export-attention.

Every subcommand accepts --seed and is fully deterministic given its inputs:
rerunning with the same flags writes byte-identical files. Failures print a
single machine-parsable "error: ..." line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .ablation import DEFAULT_VARIANTS, run_ablation, write_ablation_tsv
from .checkpoint import load_checkpoint, save_checkpoint
from .data import InstanceBatch
from .datasynth import SynthConfig, generate, generate_to_file, load_dataset
from .errors import CtrnetError
from .export import export_attention
from .metrics import MetricsReport, evaluate, write_metrics_tsv
from .model import CtrModel, ModelConfig, VARIANTS
from .training import predict_scores, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctrnet",
        description="Attention-based CTR model: synthetic data, training, evaluation, ablations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a seeded synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=SynthConfig.n_instances)
    g.add_argument("--items", type=int, default=SynthConfig.n_items)
    g.add_argument("--categories", type=int, default=SynthConfig.n_categories)
    g.add_argument("--user-vocab", type=int, default=SynthConfig.user_vocab)
    g.add_argument("--context-vocab", type=int, default=SynthConfig.context_vocab)
    g.add_argument("--user-fields", type=int, default=SynthConfig.n_user_fields)
    g.add_argument("--context-fields", type=int, default=SynthConfig.n_context_fields)
    g.add_argument("--max-behaviors", type=int, default=SynthConfig.max_behaviors)
    g.add_argument("--w-behavior", type=float, default=SynthConfig.w_behavior)
    g.add_argument("--w-user", type=float, default=SynthConfig.w_user)
    g.add_argument("--w-context", type=float, default=SynthConfig.w_context)
    g.add_argument("--noise-std", type=float, default=SynthConfig.noise_std)
    g.add_argument("--inactive-frac", type=float, default=SynthConfig.inactive_frac)
    g.add_argument("--seed", type=int, default=SynthConfig.seed)

    t = sub.add_parser("train", help="train a variant and write a checkpoint")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="key=value config file (ModelConfig field names)")
    t.add_argument("--variant", default="full", choices=sorted(VARIANTS))
    t.add_argument("--report", help="optional metrics TSV path")
    t.add_argument("--seed", type=int, help="overrides the config seed")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="metrics TSV path (stdout when omitted)")
    e.add_argument("--seed", type=int, help="accepted for uniformity; evaluation is deterministic")

    a = sub.add_parser("ablate", help="train several variants and tabulate held-out metrics")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True, help="ablation table TSV path")
    a.add_argument("--config", help="key=value config file")
    a.add_argument("--variants", default=",".join(DEFAULT_VARIANTS),
                   help="comma-separated variant names")
    a.add_argument("--seed", type=int, help="overrides the config seed")

    c = sub.add_parser("gradcheck", help="finite-difference check of the full model gradient")
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--samples", type=int, default=64, help="sampled coordinates per tensor")
    c.add_argument("--step", type=float, default=1e-5)
    c.add_argument("--batch", type=int, default=16, help="synthetic minibatch size")
    c.add_argument("--seed", type=int, default=0)

    x = sub.add_parser("export-attention", help="dump per-instance attention weights to TSV")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--data", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--limit", type=int)
    x.add_argument("--seed", type=int, help="accepted for uniformity; export is deterministic")
    return parser


def _load_config(args) -> ModelConfig:
    config = ModelConfig.from_file(args.config) if args.config else ModelConfig()
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    return config


def _cmd_gen_data(args) -> int:
    config = SynthConfig(
        n_instances=args.n,
        n_items=args.items,
        n_categories=args.categories,
        user_vocab=args.user_vocab,
        context_vocab=args.context_vocab,
        n_user_fields=args.user_fields,
        n_context_fields=args.context_fields,
        max_behaviors=args.max_behaviors,
        w_behavior=args.w_behavior,
        w_user=args.w_user,
        w_context=args.w_context,
        noise_std=args.noise_std,
        inactive_frac=args.inactive_frac,
        seed=args.seed,
    )
    generate_to_file(config, args.out)
    print(f"wrote {config.n_instances} instances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    schema, instances = load_dataset(args.data)
    config = config.replace(seq_len=schema.max_behaviors)
    model = CtrModel(schema, config, args.variant)
    result = train(model, instances, config)
    save_checkpoint(args.out, model, result.store)
    if args.report:
        write_metrics_tsv(args.report, {args.variant: result.report})
    print(
        f"trained {args.variant}: heldout auc={result.report.auc:.6f} "
        f"logloss={result.report.logloss:.6f}; checkpoint {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    model, store = load_checkpoint(args.checkpoint)
    schema, instances = load_dataset(args.data)
    if schema.content_hash() != model.schema.content_hash():
        raise CtrnetError("dataset schema does not match the checkpoint")
    scores = predict_scores(model, store, instances)
    report = evaluate(scores, np.array([inst.label for inst in instances]))
    if args.out:
        write_metrics_tsv(args.out, {"eval": report})
    else:
        sys.stdout.write("auc\tlogloss\tn_pos\tn_neg\n")
        sys.stdout.write(f"{report.auc!r}\t{report.logloss!r}\t{report.n_pos}\t{report.n_neg}\n")
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args)
    schema, instances = load_dataset(args.data)
    config = config.replace(seq_len=schema.max_behaviors)
    names = tuple(v for v in args.variants.split(",") if v)
    results = run_ablation(schema, instances, config, names)
    write_ablation_tsv(args.out, results)
    for name in names:
        print(f"{name}\tauc={results[name].auc:.6f}\tlogloss={results[name].logloss:.6f}")
    return 0


def _cmd_gradcheck(args) -> int:
    synth = SynthConfig(
        n_instances=max(args.batch, 2),
        n_items=50,
        n_categories=8,
        user_vocab=10,
        context_vocab=8,
        seed=args.seed,
    )
    schema, instances = generate(synth)
    config = ModelConfig(seed=args.seed)
    model = CtrModel(schema, config, "full")
    store = model.init_params(config.seed)
    batch_instances = instances[: args.batch]
    batch = InstanceBatch.from_instances(schema, batch_instances)
    report = model.gradient_check(
        batch, store, step=args.step, n_samples=args.samples,
        tolerance=args.tol, seed=args.seed,
    )
    for path in sorted(report.per_tensor):
        print(f"{path}\t{report.per_tensor[path]:.3e}")
    status = "PASS" if report.passed else "FAIL"
    print(
        f"gradcheck {status}: max_rel_err={report.max_rel_err:.3e} at "
        f"{report.worst_path} (tolerance {args.tol:g}, "
        f"{report.n_evaluations} finite-difference evaluations)"
    )
    return 0 if report.passed else 1


def _cmd_export(args) -> int:
    n = export_attention(args.checkpoint, args.data, args.out, limit=args.limit)
    print(f"exported attention for {n} instances to {args.out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "gradcheck": _cmd_gradcheck,
    "export-attention": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (CtrnetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
