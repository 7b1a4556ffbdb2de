"""Command-line interface: the pipeline as reproducible subcommands.

Every subcommand takes --seed and --out, writes its outputs plus a
manifest into --out, and derives all randomness from the one seed
through named streams. Exit codes: 0 success, 1 usage error, 2 data
error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    CorpusError,
    build_label_set,
    corpus_stats,
    extract_context_spans,
    read_corpus_file,
    read_exclusion_file,
    read_label_file,
    read_span_file,
    span_uids,
    split_dataset,
    write_corpus_file,
    write_label_file,
    write_span_file,
)
from .evaluation import f1_report
from .explain import explain
from .keywords import pooled_keywords
from .loss import LossWeights
from .manifest import RunManifest
from .masking import keyword_mask, random_mask
from .pcem import PcemError, read_embedding_map
from .projection import project_2d
from .prototypes import ProvisionTextMissing, write_prototype_dump
from .seeding import derive_seed
from .synth import generate_corpus, generate_split_corpora, provision_text
from .training import (
    Checkpoint,
    CheckpointError,
    ConfigError,
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    train,
    write_train_log,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_DATA_ERRORS = (
    CorpusError,
    PcemError,
    CheckpointError,
    ConfigError,
    ProvisionTextMissing,
    TrainingDiverged,
    FileNotFoundError,
    ValueError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    manifest = RunManifest(
        subcommand=args.subcommand,
        config=_public_config(args),
        seed=getattr(args, "seed", 0),
        inputs=_input_paths(args),
    )
    out_dir = Path(args.out)
    manifest.write(out_dir)
    try:
        args.func(args, manifest, out_dir)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest.finalize(out_dir, status="failed")
        return EXIT_DATA
    manifest.finalize(out_dir, status="ok")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="protocite", description=__doc__)
    parser.add_argument("--version", action="version", version=f"protocite {__version__}")
    sub = parser.add_subparsers(dest="subcommand")

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="run seed; all randomness derives from it")
        p.add_argument("--out", required=True, help="output directory (also receives the manifest)")
        p.add_argument("--jobs", type=int, default=1,
                       help="internal fan-out limit; results are independent of it")

    p = sub.add_parser("ingest", help="corpus -> spans + label set + splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--exclude", help="file of canonical citation keys to drop from the label set")
    p.add_argument("--provisions", help="directory of <sanitized-key>.txt provision texts")
    p.add_argument("--ratios", default="0.8,0.05,0.15")
    common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="citation frequency tables")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", help="label file; otherwise --top-k builds one")
    p.add_argument("--top-k", type=int, default=20)
    common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("synth", help="generate the synthetic keyword-driven corpus")
    p.add_argument("--labels", type=int, default=3, dest="n_labels")
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--val", type=int, default=25)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--window", type=int, default=2)
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a checkpoint")
    p.add_argument("--spans-train", required=True)
    p.add_argument("--spans-val", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--config", help="key=value file; explicit flags win")
    for flag, kind in _CONFIG_FLAGS.items():
        p.add_argument(f"--{flag.replace('_', '-')}", type=kind, default=None, dest=flag)
    p.add_argument("--embeddings", help="PCEM file (required for frozen mode)")
    p.add_argument("--provision-embeddings", help="PCEM file of per-label provision embeddings")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a span file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--embeddings", help="PCEM file for frozen checkpoints")
    common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("perturb", help="masking perturbations + evaluation")
    p.add_argument("--kind", choices=("keyword", "random"), required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--rate", type=float, default=0.15, help="random masking rate")
    p.add_argument("--keyword-count", type=int, default=20)
    p.add_argument("--max-ngram", type=int, default=2)
    common(p)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("project", help="2D projection of spans and prototypes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--labels", required=True)
    common(p)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("explain", help="prototype evidence for predictions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--top-k", type=int, default=3)
    common(p)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("prototypes", help="dump or inspect a checkpoint's prototypes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inspect", action="store_true", help="print a summary table")
    common(p)
    p.set_defaults(func=_cmd_prototypes)
    return parser


_CONFIG_FLAGS: dict[str, type] = {
    "mode": str,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "recluster_every": int,
    "k": int,
    "hash_dim": int,
    "embed_dim": int,
    "head_features": str,
    "lambda1": float,
    "lambda2": float,
    "lambda3": float,
    "delta": float,
    "epsilon": float,
    "s_max": float,
    "s_min": float,
}


# -- subcommands ---------------------------------------------------------------


def _cmd_ingest(args, manifest: RunManifest, out: Path) -> None:
    docs = read_corpus_file(args.corpus)
    exclude = read_exclusion_file(args.exclude) if args.exclude else []
    label_set = build_label_set(docs, args.top_k, exclude)
    provision_paths: dict[str, str] = {}
    if args.provisions:
        prov_dir = Path(args.provisions)
        for key in label_set.keys():
            candidate = prov_dir / f"{sanitize_key(key)}.txt"
            if candidate.exists():
                label_set.provision_texts[key] = candidate.read_text(encoding="utf-8")
                provision_paths[key] = str(candidate.resolve())
    for ref in exclude:
        label_set.procedural.setdefault(ref.key, True)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise CorpusError(f"--ratios needs three comma-separated values, got {args.ratios!r}")

    fallback_seed = derive_seed(args.seed, "fallback")
    spans = []
    for doc in docs:
        spans.extend(extract_context_spans(doc, label_set, args.window, fallback_seed))
    train_spans, val_spans, test_spans = split_dataset(spans, ratios, manifest.sub_seeds["split"])

    write_label_file(label_set, out / "labels.tsv", provision_paths)
    for name, part in (("train", train_spans), ("val", val_spans), ("test", test_spans)):
        write_span_file(part, out / f"spans.{name}.jsonl")
    manifest.outputs = {
        "labels": str(out / "labels.tsv"),
        "spans_train": str(out / "spans.train.jsonl"),
        "spans_val": str(out / "spans.val.jsonl"),
        "spans_test": str(out / "spans.test.jsonl"),
    }
    print(f"ingested {len(docs)} documents -> {len(spans)} spans "
          f"({len(train_spans)}/{len(val_spans)}/{len(test_spans)}), {label_set.n} labels")


def _cmd_stats(args, manifest: RunManifest, out: Path) -> None:
    docs = read_corpus_file(args.corpus)
    if args.labels:
        label_set = read_label_file(args.labels, load_provisions=False)
    else:
        label_set = build_label_set(docs, args.top_k)
    report = corpus_stats(docs, label_set)
    (out / "stats.tsv").write_text(report.to_tsv(), encoding="utf-8")
    manifest.outputs = {"stats": str(out / "stats.tsv")}
    print(f"{len(docs)} documents, {label_set.n} labels, "
          f"mean {report.mean_citations_per_doc:.2f} target citations/document")


def _cmd_synth(args, manifest: RunManifest, out: Path) -> None:
    train_c, val_c, test_c = generate_split_corpora(
        args.n_labels, args.train, args.val, args.test, seed=args.seed, window=args.window
    )
    label_set = train_c.label_set
    prov_dir = out / "provisions"
    prov_dir.mkdir(parents=True, exist_ok=True)
    provision_paths = {}
    for index, key in enumerate(label_set.keys()):
        path = prov_dir / f"{sanitize_key(key)}.txt"
        path.write_text(provision_text(index), encoding="utf-8")
        provision_paths[key] = f"provisions/{path.name}"
    write_label_file(label_set, out / "labels.tsv", provision_paths)
    all_docs = train_c.documents + val_c.documents + test_c.documents
    write_corpus_file(all_docs, out / "corpus.jsonl")
    fallback_seed = derive_seed(args.seed, "fallback")
    for name, corpus in (("train", train_c), ("val", val_c), ("test", test_c)):
        write_span_file(corpus.spans(args.window, fallback_seed), out / f"spans.{name}.jsonl")
    manifest.outputs = {
        "corpus": str(out / "corpus.jsonl"),
        "labels": str(out / "labels.tsv"),
        "spans_train": str(out / "spans.train.jsonl"),
        "spans_val": str(out / "spans.val.jsonl"),
        "spans_test": str(out / "spans.test.jsonl"),
    }
    print(f"synthesized {len(all_docs)} documents over {args.n_labels} labels")


def _cmd_train(args, manifest: RunManifest, out: Path) -> None:
    config = _resolve_train_config(args)
    manifest.config["resolved"] = _config_dict(config)
    label_set = read_label_file(args.labels)
    train_spans = read_span_file(args.spans_train, label_set.n)
    val_spans = read_span_file(args.spans_val, label_set.n)
    checkpoint, logs, diagnostics = train(config, train_spans, val_spans, label_set)
    save_checkpoint(checkpoint, out / "checkpoint.bin")
    write_train_log(logs, out / "train_log.tsv")
    _write_val_history(logs, out / "val_history.tsv")
    write_prototype_dump(checkpoint.prototypes, out / "prototypes.jsonl")
    manifest.outputs = {
        "checkpoint": str(out / "checkpoint.bin"),
        "train_log": str(out / "train_log.tsv"),
        "val_history": str(out / "val_history.tsv"),
        "prototypes": str(out / "prototypes.jsonl"),
    }
    manifest.config["diagnostics"] = {
        "labels_without_positives": diagnostics.get("labels_without_positives", []),
        "recluster_epochs": diagnostics.get("recluster_epochs", []),
    }
    print(f"best epoch {checkpoint.epoch}: validation macro-F1 {checkpoint.val_macro_f1:.4f}")


def _cmd_eval(args, manifest: RunManifest, out: Path) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    label_set = read_label_file(args.labels, load_provisions=False)
    spans = read_span_file(args.spans, label_set.n)
    results = _predict_spans(checkpoint, spans, args.embeddings)
    report = f1_report(
        np.stack([r.predicted for r in results]),
        np.stack([s.label_vector for s in spans]),
    )
    (out / "eval.tsv").write_text(report.to_tsv(label_set.keys()), encoding="utf-8")
    manifest.outputs = {"eval": str(out / "eval.tsv")}
    print(f"macro-F1 {report.macro_f1:.4f}  micro-F1 {report.micro_f1:.4f}  ({len(spans)} spans)")


def _cmd_perturb(args, manifest: RunManifest, out: Path) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    if checkpoint.mode == "frozen":
        raise ConfigError("perturbations need a checkpoint that can encode masked text")
    label_set = read_label_file(args.labels)
    spans = read_span_file(args.spans, label_set.n)
    if args.kind == "keyword":
        keywords = pooled_keywords(label_set.provision_texts, args.keyword_count, args.max_ngram)
        if not keywords:
            raise ConfigError("no provision texts available to extract keywords from")
        masked = keyword_mask(spans, keywords)
    else:
        masked = random_mask(spans, args.rate, seed=manifest.sub_seeds["mask"])
    write_span_file(masked, out / "masked_spans.jsonl")

    golds = np.stack([s.label_vector for s in spans])
    base = f1_report(np.stack([r.predicted for r in predict_batch(checkpoint, spans)]), golds)
    pert = f1_report(np.stack([r.predicted for r in predict_batch(checkpoint, masked)]), golds)
    lines = [
        "setting\tmacro_f1\tmicro_f1",
        f"baseline\t{base.macro_f1:.6f}\t{base.micro_f1:.6f}",
        f"{args.kind}_masked\t{pert.macro_f1:.6f}\t{pert.micro_f1:.6f}",
        f"delta\t{pert.macro_f1 - base.macro_f1:+.6f}\t{pert.micro_f1 - base.micro_f1:+.6f}",
    ]
    (out / "perturb_eval.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest.outputs = {
        "masked_spans": str(out / "masked_spans.jsonl"),
        "perturb_eval": str(out / "perturb_eval.tsv"),
    }
    print(lines[1] + "\n" + lines[2])


def _cmd_project(args, manifest: RunManifest, out: Path) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    label_set = read_label_file(args.labels, load_provisions=False)
    spans = read_span_file(args.spans, label_set.n)
    results = _predict_spans(checkpoint, spans, None, need_embeddings=True)
    embeddings, _ = results
    first_label = [
        int(s.label_vector.nonzero()[0][0]) if s.label_vector.any() else -1 for s in spans
    ]
    projection = project_2d(
        embeddings,
        checkpoint.prototypes,
        sample_labels=first_label,
        sample_ids=span_uids(spans),
        seed=args.seed,
    )
    (out / "projection.csv").write_text(projection.to_csv(), encoding="utf-8")
    manifest.outputs = {"projection": str(out / "projection.csv")}
    flag = " (rank-deficient: second axis zeroed)" if projection.degenerate else ""
    print(f"projected {len(projection.points)} points{flag}")


def _cmd_explain(args, manifest: RunManifest, out: Path) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    label_set = read_label_file(args.labels, load_provisions=False)
    spans = read_span_file(args.spans, label_set.n)
    results = predict_batch(checkpoint, spans)
    uids = span_uids(spans)
    with open(out / "explanations.jsonl", "w", encoding="utf-8") as fh:
        for uid, result in zip(uids, results):
            evidence = explain(result, checkpoint.prototypes, args.top_k)
            record = {
                "span": uid,
                "predicted": [label_set.keys()[i] for i in result.predicted.nonzero()[0]],
                "evidence": {
                    label_set.keys()[label]: [
                        {"kind": e.kind, "source": e.source, "score": round(e.score, 6)}
                        for e in items
                    ]
                    for label, items in evidence.items()
                },
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    manifest.outputs = {"explanations": str(out / "explanations.jsonl")}
    print(f"explained {len(spans)} spans")


def _cmd_prototypes(args, manifest: RunManifest, out: Path) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    write_prototype_dump(checkpoint.prototypes, out / "prototypes.jsonl")
    manifest.outputs = {"prototypes": str(out / "prototypes.jsonl")}
    if args.inspect:
        print("label\tkind\tsource\tnorm")
        for p in checkpoint.prototypes:
            print(f"{p.label_index}\t{p.kind}\t{p.source}\t{np.linalg.norm(p.vector):.4f}")
    print(f"dumped {len(checkpoint.prototypes)} prototypes")


# -- helpers -------------------------------------------------------------------


def sanitize_key(key: str) -> str:
    """Canonical citation key -> filesystem-safe provision file stem."""
    return re.sub(r"[^A-Za-z0-9]+", "_", key).strip("_")


def _predict_spans(checkpoint: Checkpoint, spans, embeddings_path, need_embeddings: bool = False):
    if checkpoint.mode == "frozen" or embeddings_path:
        if not embeddings_path:
            raise ConfigError("frozen checkpoints need --embeddings for evaluation")
        table = read_embedding_map(embeddings_path, expected_dim=checkpoint.params.embed_dim)
        uids = span_uids(spans)
        missing = [u for u in uids if u not in table]
        if missing:
            raise ConfigError(f"embedding file lacks {len(missing)} spans (first: {missing[:3]})")
        embeddings = np.stack([table[u] for u in uids])
    else:
        from .encoder import encode_features, hash_features_batch

        feats = hash_features_batch(spans, checkpoint.params.hash_dim)
        embeddings, _ = encode_features(feats, checkpoint.params)
    if need_embeddings:
        return embeddings, None
    return predict_batch(checkpoint, spans, embeddings=embeddings)


def _resolve_train_config(args) -> TrainConfig:
    values: dict[str, object] = {}
    if args.config:
        values.update(_read_config_file(args.config))
    for flag, kind in _CONFIG_FLAGS.items():
        given = getattr(args, flag)
        if given is not None:
            values[flag] = given
        elif flag in values:
            values[flag] = kind(values[flag])
    weight_fields = ("lambda1", "lambda2", "lambda3", "delta", "epsilon", "s_max", "s_min")
    weights = LossWeights(**{f: float(values.pop(f)) for f in weight_fields if f in values})
    return TrainConfig(
        weights=weights,
        seed=args.seed,
        embedding_file=args.embeddings,
        provision_embedding_file=args.provision_embeddings,
        **values,
    )


def _read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_FLAGS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _config_dict(config: TrainConfig) -> dict:
    out = {
        name: getattr(config, name)
        for name in (
            "mode", "epochs", "batch_size", "learning_rate", "weight_decay",
            "recluster_every", "k", "hash_dim", "embed_dim", "head_features",
            "embedding_file", "provision_embedding_file",
        )
    }
    out["weights"] = {
        name: getattr(config.weights, name)
        for name in ("lambda1", "lambda2", "lambda3", "delta", "epsilon", "s_max", "s_min")
    }
    return out


def _public_config(args) -> dict:
    skip = {"func", "subcommand", "out", "seed"}
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in skip and not key.startswith("_") and value is not None
    }


def _input_paths(args) -> dict[str, str]:
    names = ("corpus", "labels", "spans", "spans_train", "spans_val", "checkpoint",
             "embeddings", "provision_embeddings", "exclude", "provisions", "config")
    found = {}
    for name in names:
        value = getattr(args, name, None)
        if isinstance(value, str):
            found[name] = value
    return found


def _write_val_history(logs, path: Path) -> None:
    lines = ["epoch\tval_macro_f1"]
    lines += [f"{log.epoch}\t{log.val_macro_f1:.6f}" for log in logs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
