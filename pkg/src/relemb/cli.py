"""Batch command surface tying the pipeline together.

Every command reads one flat config file (``--config``, or the
RELEMB_CONFIG environment variable), applies ``--set key=value``
overrides, writes its artifacts into ``paths.out_dir`` and drops a
manifest echoing the resolved configuration. With ``workers = 1`` and a
fixed seed a re-run overwrites byte-identical artifacts.

Exit codes: 0 ok, 1 runtime failure, 2 usage, 3 invalid config,
4 missing input file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import classification as qc
from . import expansion as qe
from .config import RunConfig, write_manifest
from .corpus import CorpusIndex, build_index, read_corpus_file
from .errors import ConfigError, OutOfVocabularyQueryError, RelembError
from .inference import load_model, term_distribution, write_term_scores
from .metrics import (
    average_precision,
    ndcg_at_k,
    precision_at_k,
    read_qrels,
    read_trec_run,
    write_metric_file,
)
from .model import KIND_LIKELIHOOD, KIND_POSTERIOR, TrainConfig, save_checkpoint, train
from .pipeline import (
    clean_queries,
    generate_training_set,
    noise_distribution,
    read_noise_table,
    read_training_file,
    write_noise_table,
    write_training_file,
)
from .retrieval import kl_retrieve, ql_retrieve, read_queries, write_trec_run
from .tokenization import load_stopwords, tokenize

logger = logging.getLogger("relemb")

EXIT_RUNTIME = 1
EXIT_CONFIG = 3
EXIT_MISSING_INPUT = 4


def _out(cfg: RunConfig, name: str) -> str:
    out_dir = cfg.get("paths.out_dir")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _stopwords(cfg: RunConfig):
    path = cfg.get("paths.stopwords", default="")
    if path == "":
        return load_stopwords()
    if path.lower() == "none":
        return frozenset()
    if not os.path.exists(path):
        raise FileNotFoundError(f"stopword file not found: {path}")
    return load_stopwords(path)


def _load_index(cfg: RunConfig) -> CorpusIndex:
    return CorpusIndex.load(cfg.get_path("paths.index"))


def cmd_build_index(cfg: RunConfig) -> None:
    corpus_path = cfg.get_path("paths.corpus")
    index = build_index(
        read_corpus_file(corpus_path),
        stopwords=_stopwords(cfg),
        min_cf=cfg.get_int("corpus.min_cf"),
        workers=cfg.get_int("corpus.workers"),
    )
    index.validate()
    index_path = _out(cfg, "index.npz")
    index.save(index_path)
    index.write_vocab_dump(_out(cfg, "vocab.tsv"))
    write_manifest(
        _out(cfg, "build-index.manifest"),
        "build-index",
        cfg,
        {
            "stats.documents": str(index.num_docs),
            "stats.terms": str(index.num_terms),
            "stats.tokens": str(index.vocabulary.total_tokens),
        },
    )
    logger.info("indexed %d documents, %d terms", index.num_docs, index.num_terms)


def cmd_filter_queries(cfg: RunConfig) -> None:
    log_path = cfg.get_path("paths.query_log")
    counts: dict[str, int] = {}
    out_path = _out(cfg, "queries_clean.txt")
    with open(log_path, encoding="utf-8") as f:
        raw = (line.rstrip("\n") for line in f)
        with open(out_path, "w", encoding="utf-8") as out:
            for query in clean_queries(raw, counts):
                out.write(query + "\n")
    write_manifest(
        _out(cfg, "filter-queries.manifest"),
        "filter-queries",
        cfg,
        {f"stats.{k}": str(v) for k, v in counts.items()},
    )
    logger.info("kept %d of %d queries", counts["kept"], counts["total"])


def cmd_gen_train(cfg: RunConfig) -> None:
    index = _load_index(cfg)
    queries_path = cfg.get_path("paths.cleaned_queries")
    with open(queries_path, encoding="utf-8") as f:
        queries = [line.strip() for line in f if line.strip()]
    training = generate_training_set(
        index,
        queries,
        k=cfg.get_int("retrieval.k"),
        mu=cfg.get_float("retrieval.mu"),
        stopwords=_stopwords(cfg),
        max_terms=cfg.get_optional_int("rm.max_terms"),
    )
    training.validate()
    write_training_file(training, index, _out(cfg, "train_pairs.tsv"))
    write_noise_table(noise_distribution(training), index, _out(cfg, "noise.tsv"))
    write_manifest(
        _out(cfg, "gen-train.manifest"),
        "gen-train",
        cfg,
        {
            "stats.pairs": str(len(training)),
            **{f"stats.skipped_{k}": str(v) for k, v in training.skipped.items()},
        },
    )
    logger.info("generated %d training pairs", len(training))


def cmd_train(cfg: RunConfig) -> None:
    index = _load_index(cfg)
    training = read_training_file(cfg.get_path("paths.train_file"), index, _stopwords(cfg))
    objective = cfg.get("train.objective")
    if objective not in (KIND_LIKELIHOOD, KIND_POSTERIOR):
        raise ConfigError(f"train.objective must be likelihood or posterior, got {objective!r}")
    noise = None
    if objective == KIND_POSTERIOR:
        noise = read_noise_table(cfg.get_path("paths.noise_file"), index)
    train_config = TrainConfig(
        learning_rate=cfg.get_float("train.learning_rate"),
        batch_size=cfg.get_int("train.batch_size"),
        epochs=cfg.get_int("train.epochs"),
        eta_pos=cfg.get_int("train.eta_pos"),
        eta_neg_mult=cfg.get_float("train.eta_neg_mult"),
        seed=cfg.get_int("train.seed"),
        workers=cfg.get_int("train.workers"),
        use_bias=cfg.get_bool("train.use_bias"),
        lr_decay=cfg.get_bool("train.lr_decay"),
        target_samples=cfg.get_int("train.target_samples"),
    )
    losses: list[float] = []
    model = train(
        index,
        training,
        kind=objective,
        config=train_config,
        dim=cfg.get_int("train.dim"),
        noise_probs=noise,
        loss_history=losses,
    )
    paths = save_checkpoint(model, _out(cfg, "model"))
    with open(_out(cfg, "train.loss"), "w", encoding="utf-8") as f:
        for epoch, loss in enumerate(losses):
            f.write(f"{epoch}\t{loss:.10g}\n")
    write_manifest(
        _out(cfg, "train.manifest"),
        "train",
        cfg,
        {"stats.queries": str(len(training)), "stats.files": str(len(paths))},
    )
    logger.info("trained %s model over %d queries", objective, len(training))


def cmd_search(cfg: RunConfig) -> None:
    index = _load_index(cfg)
    stopwords = _stopwords(cfg)
    k = cfg.get_int("search.k")
    mu = cfg.get_float("retrieval.mu")
    runs = []
    skipped = 0
    for qid, text in read_queries(cfg.get_path("paths.eval_queries")):
        try:
            runs.append(ql_retrieve(index, tokenize(text, stopwords), k=k, mu=mu, query_id=qid))
        except OutOfVocabularyQueryError:
            skipped += 1
    write_trec_run(runs, _out(cfg, "run_ql.trec"), tag="ql")
    write_manifest(
        _out(cfg, "search.manifest"),
        "search",
        cfg,
        {"stats.queries": str(len(runs)), "stats.skipped": str(skipped)},
    )


def cmd_expand(cfg: RunConfig) -> None:
    index = _load_index(cfg)
    model = load_model(cfg.get("paths.model"))
    stopwords = _stopwords(cfg)
    expansion_cfg = qe.ExpansionConfig(
        alpha=cfg.get_float("expand.alpha"),
        num_terms=cfg.get_int("expand.num_terms"),
        mu=cfg.get_float("retrieval.mu"),
    )
    k = cfg.get_int("search.k")
    runs = []
    term_lists = []
    fallbacks = 0
    skipped = 0
    for qid, text in read_queries(cfg.get_path("paths.eval_queries")):
        tokens = tokenize(text, stopwords)
        try:
            expanded = qe.expand_query(model, index, tokens, expansion_cfg)
        except OutOfVocabularyQueryError:
            skipped += 1
            continue
        if not expanded.used_embedding:
            fallbacks += 1
        runs.append(kl_retrieve(index, expanded.model, k=k, mu=expansion_cfg.mu, query_id=qid))
        model_tids = model.term_ids(tokens)
        if model_tids:
            term_lists.append(
                term_distribution(model, model_tids, expansion_cfg.num_terms, query_id=qid)
            )
    write_trec_run(runs, _out(cfg, "run_expanded.trec"), tag="expanded")
    write_term_scores(term_lists, model, _out(cfg, "expansion_terms.tsv"))
    write_manifest(
        _out(cfg, "expand.manifest"),
        "expand",
        cfg,
        {
            "stats.queries": str(len(runs)),
            "stats.fallbacks": str(fallbacks),
            "stats.skipped": str(skipped),
        },
    )


def cmd_eval(cfg: RunConfig) -> None:
    runs = read_trec_run(cfg.get_path("paths.run"))
    qrels = read_qrels(cfg.get_path("paths.qrels"))
    cutoff = cfg.get_int("eval.cutoff")
    per_query: dict[str, dict[str, float]] = {}
    skipped = 0
    for run in runs:
        judged = qrels.get(run.query_id, {})
        if not any(g > 0 for g in judged.values()):
            skipped += 1
            continue
        per_query[run.query_id] = {
            "map": average_precision(run, qrels, cutoff=cutoff),
            "p20": precision_at_k(run, qrels, k=20),
            "ndcg20": ndcg_at_k(run, qrels, k=20),
        }
    if not per_query:
        raise RelembError("no evaluated query has relevance judgments")
    write_metric_file(_out(cfg, "metrics.tsv"), per_query, ("map", "p20", "ndcg20"))
    write_manifest(
        _out(cfg, "eval.manifest"),
        "eval",
        cfg,
        {"stats.queries": str(len(per_query)), "stats.unjudged": str(skipped)},
    )


def cmd_cv_expansion(cfg: RunConfig) -> None:
    index = _load_index(cfg)
    model = load_model(cfg.get("paths.model"))
    stopwords = _stopwords(cfg)
    queries = {
        qid: tokenize(text, stopwords)
        for qid, text in read_queries(cfg.get_path("paths.eval_queries"))
    }
    dump_dir = _out(cfg, "grid_runs") if cfg.get_bool("expand.dump_runs") else None
    report = qe.cross_validate_expansion(
        model,
        index,
        queries,
        read_qrels(cfg.get_path("paths.qrels")),
        alpha_grid=cfg.get_floats("expand.alpha_grid"),
        m_grid=cfg.get_ints("expand.m_grid"),
        folds=cfg.get_int("expand.folds"),
        k=cfg.get_int("search.k"),
        mu=cfg.get_float("retrieval.mu"),
        dump_dir=dump_dir,
    )
    with open(_out(cfg, "cv_expansion.txt"), "w", encoding="utf-8") as f:
        f.write(report.format_text())
    with open(_out(cfg, "cv_expansion.tsv"), "w", encoding="utf-8") as f:
        f.write("\n".join(report.machine_lines()) + "\n")
    extra = {"stats.queries": str(report.num_queries)}
    for fold, (alpha, m) in enumerate(report.fold_choices):
        extra[f"stats.fold{fold}.alpha"] = f"{alpha:g}"
        extra[f"stats.fold{fold}.num_terms"] = str(m)
    write_manifest(_out(cfg, "cv-expansion.manifest"), "cv-expansion", cfg, extra)
    sys.stdout.write(report.format_text())


def cmd_classify(cfg: RunConfig) -> None:
    model = load_model(cfg.get("paths.model"))
    stopwords = _stopwords(cfg)
    labeled = qc.read_labeled_queries(cfg.get_path("paths.labels"))
    label_order = None
    categories_path = cfg.get("paths.categories", default="")
    if categories_path:
        label_order = qc.read_category_list(categories_path)
        category_set = set(label_order)
        for query in labeled:
            query.validate(category_set)
    centroids = qc.compute_centroids(model, labeled, stopwords, label_order=label_order)
    t = cfg.get_int("classify.top_t")
    predictions = {}
    for qid, text in read_queries(cfg.get_path("paths.eval_queries")):
        predictions[qid] = qc.classify(model, centroids, tokenize(text, stopwords), t)
    qc.write_predictions(predictions, _out(cfg, "predictions.tsv"))
    empty = sum(1 for p in predictions.values() if not p)
    write_manifest(
        _out(cfg, "classify.manifest"),
        "classify",
        cfg,
        {"stats.queries": str(len(predictions)), "stats.empty_predictions": str(empty)},
    )


def cmd_cv_classify(cfg: RunConfig) -> None:
    model = load_model(cfg.get("paths.model"))
    stopwords = _stopwords(cfg)
    labeled = qc.read_labeled_queries(cfg.get_path("paths.labels"))
    label_order = None
    categories_path = cfg.get("paths.categories", default="")
    if categories_path:
        label_order = qc.read_category_list(categories_path)
    report = qc.cross_validate_classification(
        model,
        labeled,
        folds=cfg.get_int("classify.folds"),
        seed=cfg.get_int("classify.seed"),
        stopwords=stopwords,
        macro=cfg.get_bool("classify.macro"),
        label_order=label_order,
    )
    with open(_out(cfg, "cv_classify.txt"), "w", encoding="utf-8") as f:
        f.write(report.format_text())
    with open(_out(cfg, "cv_classify.tsv"), "w", encoding="utf-8") as f:
        f.write("\n".join(report.machine_lines()) + "\n")
    write_manifest(
        _out(cfg, "cv-classify.manifest"),
        "cv-classify",
        cfg,
        {
            "stats.queries": str(len(labeled)),
            "stats.t": ",".join(str(t) for t in report.fold_t),
        },
    )
    sys.stdout.write(report.format_text())


COMMANDS = {
    "build-index": cmd_build_index,
    "filter-queries": cmd_filter_queries,
    "gen-train": cmd_gen_train,
    "train": cmd_train,
    "search": cmd_search,
    "expand": cmd_expand,
    "eval": cmd_eval,
    "cv-expansion": cmd_cv_expansion,
    "classify": cmd_classify,
    "cv-classify": cmd_cv_classify,
}

_COMMAND_HELP = {
    "build-index": "tokenize a corpus and write the index plus vocabulary dump",
    "filter-queries": "clean and deduplicate a raw query log",
    "gen-train": "retrieve feedback and write training pairs plus the noise table",
    "train": "fit embeddings (train.objective = likelihood or posterior)",
    "search": "query-likelihood retrieval to a TREC run file",
    "expand": "expanded-query retrieval with a trained model",
    "eval": "score a TREC run against qrels (MAP, P@20, nDCG@20)",
    "cv-expansion": "2-fold cross-validated expansion parameter sweep",
    "classify": "centroid classification of queries against labeled training data",
    "cv-classify": "cross-validated centroid classification report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relemb",
        description="Relevance-trained word embeddings and the surrounding IR pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=_COMMAND_HELP[name])
        p.add_argument(
            "--config",
            default=None,
            help="flat key = value config file (or set RELEMB_CONFIG)",
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key; repeatable",
        )
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        sys.stderr.write("relemb: no command given (see --help)\n")
        return 2
    config_path = args.config or os.environ.get("RELEMB_CONFIG")
    try:
        cfg = RunConfig.load(config_path, args.overrides)
        args.func(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"relemb {args.command}: invalid config: {exc}\n")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        sys.stderr.write(f"relemb {args.command}: missing input: {exc}\n")
        return EXIT_MISSING_INPUT
    except (RelembError, ValueError, OSError) as exc:
        sys.stderr.write(f"relemb {args.command}: {exc}\n")
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
