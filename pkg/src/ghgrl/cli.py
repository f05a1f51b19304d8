"""Command-line front end wiring the pipeline stages through files.

Stages are separable so the expensive annotation pass is paid once and
cached; every command writes a manifest next to its primary output.
Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ghgrl import __version__
from ghgrl.analysis import (
    ablation_config,
    oversmoothing_profile,
    pagnn_profile_runner,
    save_comparison_csv,
    save_gnuplot_data,
    save_profile_csv,
)
from ghgrl.errors import BackendError, DataError
from ghgrl.graph import (
    CorruptionSpec,
    corrupt,
    load_dataset,
    load_nodes,
    load_pool,
    node_id_map,
    save_nodes,
    stratified_splits,
)
from ghgrl.llm import (
    MockEmbedder,
    MockLLMBackend,
    RemoteEmbedder,
    RemoteLLMBackend,
    TypeSchema,
    annotate_all,
    build_feature_matrix,
    default_templates,
    generate_type_schema,
    load_annotations,
    sample_attributes,
    save_annotations,
)
from ghgrl.llm.pipeline import FeatureMatrix
from ghgrl.manifest import write_run_manifest
from ghgrl.pagnn import PagnnConfig, init_params, load_checkpoint, save_checkpoint
from ghgrl.train import TrainConfig, evaluate_params, save_history, train


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _flags(args: argparse.Namespace) -> dict:
    return {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k != "handler" and not k.startswith("_")
    }


def _make_llm_backend(kind: str):
    if kind == "mock":
        return MockLLMBackend()
    return RemoteLLMBackend()


def _make_embedder(kind: str, dim: int):
    if kind == "mock":
        return MockEmbedder(dim)
    return RemoteEmbedder()


def _load_graph_with_splits(args) -> "HeteroGraph":
    graph = load_dataset(args.nodes, args.edges)
    if graph.splits is None:
        if graph.labels is None:
            raise DataError("dataset has no labels; cannot build splits")
        graph = stratified_splits(
            graph, args.train_frac, args.val_frac, args.split_seed
        )
    return graph


def _pagnn_config(args, d_in: int, m_fmt: int, m_cont: int, num_classes: int) -> PagnnConfig:
    return PagnnConfig(
        num_layers=args.layers,
        l_fmt=args.l_fmt,
        l_cont=args.l_cont,
        d_in=d_in,
        d_fmt=args.hidden_dim,
        d_cont=args.hidden_dim,
        d_rgn=args.hidden_dim,
        num_format_types=m_fmt,
        num_content_types=m_cont,
        num_classes=num_classes,
        alpha=args.alpha,
        activation=args.activation,
        use_input_projection=True,
        confidence_floor=args.confidence_floor,
        seed=args.seed,
    )


def _cmd_gen_types(args) -> int:
    graph = load_dataset(args.nodes, args.edges)
    sample = sample_attributes(graph, args.char_budget, args.seed)
    schema = generate_type_schema(
        sample,
        args.m_fmt,
        args.m_cont,
        default_templates(),
        _make_llm_backend(args.backend),
        max_retries=args.max_retries,
        out_path=args.out,
    )
    write_run_manifest(
        args.out, "gen-types", _flags(args),
        inputs={"nodes": args.nodes, "edges": args.edges},
        seeds={"sample": args.seed},
    )
    print(
        f"wrote {args.out}: {len(schema.format_types)} format types, "
        f"{len(schema.content_types)} content types"
    )
    return 0


def _cmd_annotate(args) -> int:
    graph = load_dataset(args.nodes, args.edges)
    schema = TypeSchema.load(args.schema)
    cache_dir = args.cache_dir or os.environ.get("GHGRL_CACHE_DIR")
    annotations = annotate_all(
        graph,
        schema,
        default_templates(),
        _make_llm_backend(args.backend),
        cache_dir=cache_dir,
        max_in_flight=args.max_in_flight,
        max_retries=args.max_retries,
        fallback=not args.no_fallback,
    )
    save_annotations(annotations, args.out)
    write_run_manifest(
        args.out, "annotate", _flags(args),
        inputs={"nodes": args.nodes, "edges": args.edges, "schema": args.schema},
        seeds={},
        schema_path=args.schema,
    )
    print(f"wrote {args.out}: {len(annotations)} annotations")
    return 0


def _cmd_embed(args) -> int:
    annotations = load_annotations(args.annotations)
    matrix = build_feature_matrix(annotations, _make_embedder(args.backend, args.dim))
    matrix.save(args.out)
    write_run_manifest(
        args.out, "embed", _flags(args),
        inputs={"annotations": args.annotations},
        seeds={},
    )
    print(f"wrote {args.out}: {matrix.node_count} rows, dim {matrix.dim}")
    return 0


def _cmd_train(args) -> int:
    graph = _load_graph_with_splits(args)
    schema = TypeSchema.load(args.schema)
    annotations = load_annotations(args.annotations)
    features = FeatureMatrix.load(args.features)
    if graph.num_classes is None:
        raise DataError("dataset has no labels; cannot train")
    config = _pagnn_config(
        args, features.dim,
        len(schema.format_types), len(schema.content_types), graph.num_classes,
    )
    train_config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        early_stop_patience=args.patience,
        seed=args.seed,
    )
    result = train(graph, annotations, features.rows, config, train_config)
    save_checkpoint(args.out, config, result.params)
    if args.history:
        save_history(result.history, args.history)
    write_run_manifest(
        args.out, "train", _flags(args),
        inputs={
            "nodes": args.nodes, "edges": args.edges,
            "annotations": args.annotations, "features": args.features,
            "schema": args.schema,
        },
        seeds={"params": args.seed, "split": args.split_seed},
        schema_path=args.schema,
    )
    print(
        f"wrote {args.out}: best epoch {result.best_epoch}, "
        f"val macro-F1 {result.best_val_macro_f1:.4f}"
    )
    return 0


def _cmd_eval(args) -> int:
    graph = _load_graph_with_splits(args)
    config, params = load_checkpoint(args.model)
    annotations = load_annotations(args.annotations)
    features = FeatureMatrix.load(args.features)
    report = evaluate_params(
        graph, annotations, features.rows, config, params, args.split
    )
    Path(args.out).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    write_run_manifest(
        args.out, "eval", _flags(args),
        inputs={
            "nodes": args.nodes, "edges": args.edges,
            "annotations": args.annotations, "features": args.features,
            "model": args.model,
        },
        seeds={"split": args.split_seed},
    )
    print(
        f"{args.split} macro-F1 {report.macro_f1:.4f} "
        f"micro-F1 {report.micro_f1:.4f}"
    )
    return 0


def _cmd_diagnose(args) -> int:
    graph = load_dataset(args.nodes, args.edges)
    schema = TypeSchema.load(args.schema)
    annotations = load_annotations(args.annotations)
    features = FeatureMatrix.load(args.features)
    if args.max_layer < 1:
        raise DataError("--max-layer must be at least 1")
    num_classes = graph.num_classes if graph.num_classes is not None else 2
    full = PagnnConfig(
        num_layers=args.max_layer,
        l_fmt=args.max_layer,
        l_cont=args.max_layer,
        d_in=features.dim,
        d_fmt=args.hidden_dim,
        d_cont=args.hidden_dim,
        d_rgn=args.hidden_dim,
        num_format_types=len(schema.format_types),
        num_content_types=len(schema.content_types),
        num_classes=num_classes,
        alpha=args.alpha,
        activation=args.activation,
        use_input_projection=True,
        confidence_floor=args.confidence_floor,
        seed=args.seed,
    )
    ablation = ablation_config(full)
    profiles = {}
    for name, config in (("full", full), ("ablation", ablation)):
        runner = pagnn_profile_runner(features.rows, config, init_params(config))
        profiles[name] = oversmoothing_profile(
            runner, graph, annotations, args.max_layer
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_profile_csv(profiles["full"], out_dir / "profile_full.csv")
    save_profile_csv(profiles["ablation"], out_dir / "profile_ablation.csv")
    comparison = out_dir / "profile_comparison.csv"
    save_comparison_csv(profiles, comparison)
    save_gnuplot_data(profiles, out_dir / "profiles.gnuplot.dat")
    write_run_manifest(
        comparison, "diagnose", _flags(args),
        inputs={
            "nodes": args.nodes, "edges": args.edges,
            "annotations": args.annotations, "features": args.features,
            "schema": args.schema,
        },
        seeds={"params": args.seed},
        schema_path=args.schema,
    )
    last = args.max_layer
    print(
        f"layer-{last} type-mean cosine: full "
        f"{profiles['full'].values[last]:.4f}, ablation "
        f"{profiles['ablation'].values[last]:.4f}"
    )
    return 0


def _cmd_corrupt(args) -> int:
    if args.edges is not None:
        graph = load_dataset(args.nodes, args.edges)
    else:
        graph = load_nodes(args.nodes)
    kind = args.kind.upper()
    pool = None
    if kind == "RIR":
        if args.pool is None:
            raise DataError("--pool is required for RIR corruption")
        pool = load_pool(args.pool, node_id_map(args.nodes))
    spec = CorruptionSpec(
        kind=kind,
        r=args.r,
        deletion_fraction=args.deletion,
        pool=pool,
        seed=args.seed,
    )
    save_nodes(corrupt(graph, spec), args.out)
    inputs = {"nodes": args.nodes}
    if args.edges is not None:
        inputs["edges"] = args.edges
    if args.pool is not None:
        inputs["pool"] = args.pool
    write_run_manifest(
        args.out, "corrupt", _flags(args), inputs=inputs,
        seeds={"corruption": args.seed},
    )
    print(f"wrote {args.out}")
    return 0


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nodes", required=True, type=Path, help="nodes JSONL file")
    p.add_argument("--edges", required=True, type=Path, help="edges CSV file")


def _add_split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-frac", type=float, default=0.6,
                   help="train fraction when the dataset has no split column")
    p.add_argument("--val-frac", type=float, default=0.2,
                   help="val fraction when the dataset has no split column")
    p.add_argument("--split-seed", type=int, default=0)


def _add_network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--l-fmt", type=int, default=1)
    p.add_argument("--l-cont", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--activation", choices=["relu", "leaky_relu"], default="relu")
    p.add_argument("--confidence-floor", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghgrl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ghgrl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-types", help="generate a type schema from sampled attributes")
    _add_dataset_args(p)
    p.add_argument("--m-fmt", required=True, type=int, help="number of format types")
    p.add_argument("--m-cont", required=True, type=int, help="number of content types")
    p.add_argument("--backend", choices=["mock", "remote"], default="mock")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--char-budget", type=int, default=8000,
                   help="total characters of sampled attributes in the prompt")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_gen_types)

    p = sub.add_parser("annotate", help="annotate every node against a schema")
    _add_dataset_args(p)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--backend", choices=["mock", "remote"], default="mock")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--cache-dir", type=Path, default=None,
                   help="annotation cache (default: $GHGRL_CACHE_DIR if set)")
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--no-fallback", action="store_true",
                   help="fail instead of substituting fallback annotations")
    p.set_defaults(handler=_cmd_annotate)

    p = sub.add_parser("embed", help="embed annotations into a feature matrix")
    p.add_argument("--annotations", required=True, type=Path)
    p.add_argument("--backend", choices=["mock", "remote"], default="mock")
    p.add_argument("--dim", type=int, default=64, help="mock embedder dimension")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=_cmd_embed)

    p = sub.add_parser("train", help="train the network on a featurized graph")
    _add_dataset_args(p)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--annotations", required=True, type=Path)
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="checkpoint output")
    p.add_argument("--history", type=Path, default=None, help="history CSV output")
    _add_network_args(p)
    _add_split_args(p)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    _add_dataset_args(p)
    p.add_argument("--annotations", required=True, type=Path)
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--out", required=True, type=Path, help="JSON report output")
    _add_split_args(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("diagnose", help="emit over-smoothing profiles (full vs ablation)")
    _add_dataset_args(p)
    p.add_argument("--schema", required=True, type=Path)
    p.add_argument("--annotations", required=True, type=Path)
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--max-layer", type=int, default=4)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--activation", choices=["relu", "leaky_relu"], default="relu")
    p.add_argument("--confidence-floor", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_diagnose)

    p = sub.add_parser("corrupt", help="rewrite node attributes (RIR/RID)")
    p.add_argument("--nodes", required=True, type=Path)
    p.add_argument("--edges", type=Path, default=None,
                   help="optional; validates endpoints when given")
    p.add_argument("--kind", choices=["rir", "rid"], required=True)
    p.add_argument("--r", type=float, required=True,
                   help="fraction of nodes corrupted")
    p.add_argument("--deletion", type=float, default=0.0,
                   help="RID: fraction of tokens deleted per selected node")
    p.add_argument("--pool", type=Path, default=None,
                   help="RIR: JSONL replacement pool {'id':..,'candidates':[..]}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=_cmd_corrupt)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"ghgrl: data error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"ghgrl: backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
