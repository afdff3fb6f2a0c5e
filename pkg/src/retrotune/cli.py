"""Command-line front end.

Exit codes: 0 on success, 1 on usage errors (bad flags, missing arguments),
2 on data errors (unreadable or malformed inputs, failed runs). Every run
prints its resolved configuration before doing any work, and no command
modifies its input files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import evaluation, finetune, graph, reports
from .embeddings import FORMATS, load_embeddings, nearest_neighbors, save_embeddings
from .freezing import VARIANCE_SOURCES, save_freeze_state
from .retrofit import ALPHA_MODES, RetrofitConfig, retrofit


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_vectors_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--vectors", required=True, help="embedding file")
    p.add_argument("--format", default="text", choices=FORMATS,
                   help="embedding file format")


def _load_vectors(args):
    return load_embeddings(args.vectors, args.format)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="retrotune", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("convert", help="convert embeddings between text and binary")
    p.add_argument("--in", dest="input", required=True, help="input embedding file")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--from", dest="from_fmt", default="text", choices=FORMATS)
    p.add_argument("--to", dest="to_fmt", default="text", choices=FORMATS)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("build-graph", help="build a relation graph from a lexicon and/or corpus PMI")
    _add_vectors_flags(p)
    p.add_argument("--corpus", help="text corpus, one sample per line")
    p.add_argument("--lexicon", help="lexicon file, 'head neighbor...' lines")
    p.add_argument("--stopwords", help="stopword file, one token per line")
    p.add_argument("--min-count", type=int, default=50, help="drop pairs rarer than this")
    p.add_argument("--top-k", type=int, default=10, help="PMI links kept per word")
    p.add_argument("--keep-case", action="store_true", help="skip lowercasing")
    p.add_argument("--out", required=True, help="edge list output")
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("merge-graph", help="union of edge lists, max weight wins")
    _add_vectors_flags(p)
    p.add_argument("--graph", action="append", required=True,
                   help="edge list file (repeat, at least twice)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge_graph)

    p = sub.add_parser("retrofit", help="pull embeddings toward graph neighbors")
    _add_vectors_flags(p)
    p.add_argument("--graph", required=True, help="edge list file")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--out-format", default="text", choices=FORMATS)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--alpha-mode", default="degree", choices=ALPHA_MODES)
    p.add_argument("--tolerance", type=float, default=None,
                   help="stop when the largest per-word move falls below this")
    p.add_argument("--report-dir", help="write trace/drift CSVs and figures here")
    p.set_defaults(func=_cmd_retrofit)

    p = sub.add_parser("multitask", help="sequential fine-tuning with feature freezing")
    _add_vectors_flags(p)
    p.add_argument("--tasks", action="append", required=True, metavar="NAME=FILE[,FILE...]",
                   help="task datasets in training order (repeat per task)")
    p.add_argument("--model", dest="model_kind", default="average",
                   choices=finetune.MODEL_KINDS)
    p.add_argument("--seed", type=int, default=0, help="batch shuffling seed")
    p.add_argument("--init-seed", type=int, default=0, help="parameter init seed")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--anchor", type=float, default=1e-4,
                   help="L2 pull toward the starting table")
    p.add_argument("--hidden", type=int, default=None, help="fc1 width, default dim")
    p.add_argument("--proj-size", type=int, default=64, help="shared space width")
    p.add_argument("--no-freeze", action="store_true", help="disable feature freezing")
    p.add_argument("--variance-source", default="delta", choices=VARIANCE_SOURCES)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_multitask)

    p = sub.add_parser("eval", help="cohesion, drift, and neighbor reports")
    _add_vectors_flags(p)
    p.add_argument("--graph", help="edge list for cohesion")
    p.add_argument("--baseline", help="earlier embedding file for drift")
    p.add_argument("--baseline-format", default="text", choices=FORMATS)
    p.add_argument("--words", help="comma-separated words to list neighbors for")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("make-task", help="generate a synthetic task file")
    _add_vectors_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--task-id", default=None, help="default: output file stem")
    p.add_argument("--n-samples", type=int, default=64)
    p.add_argument("--visual-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phrase-min", type=int, default=2)
    p.add_argument("--phrase-max", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.05)
    p.set_defaults(func=_cmd_make_task)

    return parser


def _cmd_convert(args) -> int:
    table = load_embeddings(args.input, args.from_fmt)
    save_embeddings(table, args.out, args.to_fmt)
    print(f"wrote {len(table)} vectors of dim {table.dim} to {args.out} ({args.to_fmt})")
    return 0


def _read_corpus(path: str):
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for line in fh:
            yield line


def _cmd_build_graph(args) -> int:
    if not args.corpus and not args.lexicon:
        print("build-graph needs --corpus and/or --lexicon", file=sys.stderr)
        return 1
    table = _load_vectors(args)
    built = []
    if args.lexicon:
        built.append(graph.load_lexicon_graph(args.lexicon, table.vocab))
    if args.corpus:
        stopwords = graph.load_stopwords(args.stopwords) if args.stopwords else frozenset()
        cfg = graph.TokenizerConfig(stopwords=stopwords, lowercase=not args.keep_case)
        stats = graph.accumulate_cooccurrence(_read_corpus(args.corpus), cfg, args.min_count)
        built.append(graph.build_pmi_graph(stats, args.top_k, table.vocab))
    merged = built[0] if len(built) == 1 else graph.merge_graphs(built[0], built[1])
    graph.save_edge_list(merged, table.vocab, args.out)
    print(f"graph: {merged.n} words, {merged.edge_count} edges -> {args.out}")
    return 0


def _cmd_merge_graph(args) -> int:
    if len(args.graph) < 2:
        print("merge-graph needs --graph at least twice", file=sys.stderr)
        return 1
    table = _load_vectors(args)
    merged = graph.load_edge_list(args.graph[0], table.vocab)
    for path in args.graph[1:]:
        merged = graph.merge_graphs(merged, graph.load_edge_list(path, table.vocab))
    graph.save_edge_list(merged, table.vocab, args.out)
    print(f"graph: {merged.n} words, {merged.edge_count} edges -> {args.out}")
    return 0


def _cmd_retrofit(args) -> int:
    table = _load_vectors(args)
    g = graph.load_edge_list(args.graph, table.vocab)
    cfg = RetrofitConfig(
        beta=args.beta, alpha_mode=args.alpha_mode,
        iterations=args.iterations, tolerance=args.tolerance,
    )
    result = retrofit(table, g, cfg)
    save_embeddings(result.embeddings, args.out, args.out_format)
    final = result.objective_trace[-1] if result.objective_trace else float("nan")
    print(f"retrofit: {result.sweeps_run} sweeps, final objective {final:.6g}")
    if args.report_dir:
        os.makedirs(args.report_dir, exist_ok=True)
        join = lambda name: os.path.join(args.report_dir, name)
        reports.write_objective_trace_csv(result.objective_trace, join("objective_trace.csv"))
        reports.plot_objective_trace(result.objective_trace, join("objective_trace.png"))
        drift = evaluation.drift_report(table, result.embeddings)
        reports.write_drift_csv(table.vocab, drift, join("drift.csv"))
        reports.plot_drift_histogram(drift.displacements, join("drift.png"))
        if g.edge_count > 0:
            before = evaluation.neighbor_cohesion(table, g)
            after = evaluation.neighbor_cohesion(result.embeddings, g)
            reports.write_cohesion_csv(before, join("cohesion_before.csv"))
            reports.write_cohesion_csv(after, join("cohesion_after.csv"))
            print(f"cohesion: {before.mean_edge_cosine:.4f} -> {after.mean_edge_cosine:.4f}")
        print(f"reports -> {args.report_dir}")
    return 0


def _parse_task_args(values, vocab) -> list:
    entries = []
    for value in values:
        name, eq, paths = value.partition("=")
        if not eq:
            name, paths = "", value
        files = [p for p in paths.split(",") if p]
        if not files:
            raise ValueError(f"no task files in {value!r}")
        task_id = name or os.path.splitext(os.path.basename(files[0]))[0]
        datasets = [finetune.load_task(f, vocab, task_id) for f in files]
        entries.append(datasets if len(datasets) > 1 else datasets[0])
    return entries


def _cmd_multitask(args) -> int:
    table = _load_vectors(args)
    tasks = _parse_task_args(args.tasks, table.vocab)
    cfg = finetune.TrainConfig(
        model_kind=args.model_kind, margin=args.margin, learning_rate=args.lr,
        epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
        alpha_anchor=args.anchor, hidden_size=args.hidden, proj_size=args.proj_size,
    )
    result = finetune.run_task_sequence(
        table, tasks, cfg, init_seed=args.init_seed,
        freeze_enabled=not args.no_freeze, variance_source=args.variance_source,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    join = lambda name: os.path.join(args.out_dir, name)
    save_embeddings(result.embeddings, join("embeddings.txt"), "text")
    if not args.no_freeze:
        save_freeze_state(result.freeze_state, join("freeze_state.txt"))
        print(f"frozen features: {result.freeze_state.frozen_count} of {result.freeze_state.dim}")
    for label, params in result.params.items():
        safe = label.replace(":", "_")
        finetune.save_params(params, join(f"params_{safe}.txt"))
        reports.write_loss_trace_csv(result.traces[label], join(f"loss_trace_{safe}.csv"))
    reports.plot_loss_traces(result.traces, join("loss_traces.png"))
    drift = evaluation.drift_report(table, result.embeddings)
    reports.write_drift_csv(table.vocab, drift, join("drift.csv"))
    reports.plot_drift_histogram(drift.displacements, join("drift.png"))
    final_table = result.embeddings.vectors
    for entry in tasks:
        datasets = entry if isinstance(entry, list) else [entry]
        tid = datasets[0].task_id
        for d_i, dataset in enumerate(datasets):
            label = tid if len(datasets) == 1 else f"{tid}:{d_i}"
            params = result.params[label]
            ks = tuple(k for k in evaluation.DEFAULT_KS if k <= len(dataset.phrases))
            if not ks:
                continue
            text_vecs = finetune.encode_phrases(dataset.phrases, final_table, params)
            target_vecs = finetune.project_targets(dataset.targets, params)
            recall = evaluation.retrieval_recall(text_vecs, target_vecs, ks)
            safe = label.replace(":", "_")
            reports.write_recall_csv(recall, join(f"recall_{safe}.csv"))
            reports.plot_recall_bars(recall, join(f"recall_{safe}.png"))
            print(f"task {label}: final loss {result.traces[label][-1]:.4f}, "
                  f"mean recall {recall.mean_recall:.4f}")
    print(f"outputs -> {args.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    if not args.graph and not args.baseline and not args.words:
        print("eval needs --graph, --baseline, and/or --words", file=sys.stderr)
        return 1
    table = _load_vectors(args)
    os.makedirs(args.out_dir, exist_ok=True)
    join = lambda name: os.path.join(args.out_dir, name)
    if args.graph:
        g = graph.load_edge_list(args.graph, table.vocab)
        report = evaluation.neighbor_cohesion(table, g)
        reports.write_cohesion_csv(report, join("cohesion.csv"))
        print(f"cohesion: mean {report.mean_edge_cosine:.4f}, "
              f"median {report.median_edge_cosine:.4f}, edges {report.edge_count}")
    if args.baseline:
        base = load_embeddings(args.baseline, args.baseline_format)
        if base.vocab != table.vocab:
            raise ValueError("baseline vocabulary differs from --vectors")
        drift = evaluation.drift_report(base, table)
        reports.write_drift_csv(table.vocab, drift, join("drift.csv"))
        reports.plot_drift_histogram(drift.displacements, join("drift.png"))
        print(f"drift: mean {drift.mean_displacement:.6f}, max {drift.max_displacement:.6f}, "
              f"moved {drift.moved_count}/{len(table)}")
    if args.words:
        with open(join("neighbors.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["word", "rank", "neighbor", "cosine"])
            for word in args.words.split(","):
                for rank, (neighbor, sim) in enumerate(
                    nearest_neighbors(table, word, args.top_k), start=1
                ):
                    writer.writerow([word, rank, neighbor, repr(sim)])
                    print(f"{word} #{rank}: {neighbor} ({sim:.4f})")
    return 0


def _cmd_make_task(args) -> int:
    table = _load_vectors(args)
    task_id = args.task_id or os.path.splitext(os.path.basename(args.out))[0]
    task = finetune.make_synthetic_task(
        task_id, table, args.n_samples, args.visual_dim, args.seed,
        phrase_len=(args.phrase_min, args.phrase_max), noise=args.noise,
    )
    finetune.save_task(task, table.vocab, args.out)
    print(f"task {task_id}: {args.n_samples} samples, visual dim {args.visual_dim} -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    print("run config:")
    for key in sorted(vars(args)):
        if key in ("func",):
            continue
        print(f"  {key} = {getattr(args, key)}")
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
