"""Command-line pipeline driver.

Every command works over one run directory, writes a manifest (resolved
config plus input digests) and is idempotent: re-running with the same
manifest produces byte-identical artifacts.  Exit codes: 0 ok, 2 missing
upstream artifact, 3 config violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .corpus import Corpus, LabelLog, ingest_file, partition_by_day, sample_uniform, write_posts
from .emoclass import EMOTIONS, evaluate, load_model, save_model, train_emotion_model
from .retrieval import BootstrapRunner, harvest, make_split, token_forms
from .textfeat import KeywordScore, featurize, read_keyword_list, stack_features, tfidf_rank, tokenize, write_keyword_list
from .topics import (
    CurationStore,
    DateLda,
    load_checkpoint,
    normalize_mention,
    read_mentions,
    save_checkpoint,
    subcategory_intensity,
    topic_report,
    write_mentions,
)
from .trends import emotion_intensity, moving_average, topic_intensity, write_series_csv
from .trigger import (
    CrfTagger,
    bio_tags,
    dense_for_tokens,
    featurize_sequence,
    load_crf,
    read_sidecar_features,
    read_trigger_annotations,
    save_crf,
    span_prf,
    spans_from_tags,
    tag_post,
)

EXIT_MISSING_ARTIFACT = 2
EXIT_CONFIG = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class Log:
    def __init__(self, json_logs: bool):
        self.json_logs = json_logs

    def info(self, event: str, **fields):
        if self.json_logs:
            print(json.dumps({"event": event, **fields}, sort_keys=True))
        else:
            extras = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"[affectline] {event} {extras}".rstrip())


class RunDir:
    """Paths inside one run directory, created on demand."""

    def __init__(self, out: str):
        self.out = out

    def path(self, *parts, must_exist: bool = False) -> str:
        p = os.path.join(self.out, *parts)
        if must_exist and not os.path.exists(p):
            raise CliError(f"missing upstream artifact: {p}", EXIT_MISSING_ARTIFACT)
        return p

    def ensure(self, *parts) -> str:
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    # fixed layout
    def posts(self, must_exist=True):
        return self.path("store", "posts.jsonl", must_exist=must_exist)

    def labels(self):
        return self.path("store", "labels.jsonl")

    def rounds_dir(self):
        return self.path("rounds")


class Lock:
    """One command per run directory at a time."""

    def __init__(self, out: str):
        os.makedirs(out, exist_ok=True)
        self.path = os.path.join(out, ".lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(f"run directory is locked by another command: {self.path}", EXIT_CONFIG)
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.path)
        except FileNotFoundError:
            pass


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(run: RunDir, command: str, config: dict, inputs: list[str]) -> None:
    digests = {p: sha256_file(p) for p in sorted(set(inputs)) if os.path.exists(p)}
    payload = {
        "command": command,
        "config": {k: v for k, v in sorted(config.items())},
        "inputs": digests,
        "version": __version__,
    }
    path = run.ensure("manifests", f"{command}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def load_corpus(run: RunDir) -> Corpus:
    corpus, _ = ingest_file(run.posts())
    return corpus


# -- commands -------------------------------------------------------------


def cmd_ingest(args, log: Log) -> int:
    run = RunDir(args.out)
    if not os.path.exists(args.posts):
        raise CliError(f"missing upstream artifact: {args.posts}", EXIT_MISSING_ARTIFACT)
    corpus, rejections = ingest_file(args.posts)
    write_posts(run.ensure("store", "posts.jsonl"), corpus.posts)
    with open(run.ensure("store", "rejections.jsonl"), "w", encoding="utf-8") as fh:
        for r in rejections:
            fh.write(json.dumps({"line": r.line_no, "reason": r.reason, "record": r.record},
                                ensure_ascii=False, sort_keys=True) + "\n")
    write_manifest(run, "ingest", vars(args) | {"func": None}, [args.posts])
    log.info("ingested", posts=len(corpus), rejections=len(rejections))
    return 0


def cmd_seed_keywords(args, log: Log) -> int:
    run = RunDir(args.out)
    if not os.path.exists(args.targets):
        raise CliError(f"missing upstream artifact: {args.targets}", EXIT_MISSING_ARTIFACT)
    corpus = load_corpus(run)
    with open(args.targets, encoding="utf-8") as fh:
        target_docs = [line.strip() for line in fh if line.strip()]
    background = [p.text for p in corpus.posts]
    ranked = tfidf_rank(target_docs, background, top_k=args.top_k)
    write_keyword_list(run.ensure("keywords", "seed.tsv"), ranked)
    write_manifest(run, "seed-keywords", vars(args) | {"func": None}, [args.targets, run.posts()])
    log.info("seed_keywords", count=len(ranked), file=run.path("keywords", "seed.tsv"))
    log.info("note", message="hand-curate keywords/seed.tsv before bootstrapping")
    return 0


def cmd_harvest(args, log: Log) -> int:
    run = RunDir(args.out)
    if not os.path.exists(args.keywords):
        raise CliError(f"missing upstream artifact: {args.keywords}", EXIT_MISSING_ARTIFACT)
    keywords = read_keyword_list(args.keywords)
    corpus = load_corpus(run)
    matched = sorted(harvest(corpus, keywords))
    out_path = run.ensure("harvest", "harvested.txt")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(matched) + ("\n" if matched else ""))
    write_manifest(run, "harvest", vars(args) | {"func": None}, [args.keywords, run.posts()])
    log.info("harvested", matched=len(matched), of=len(corpus))
    return 0


def _runner(args, corpus: Corpus) -> BootstrapRunner:
    return BootstrapRunner(
        corpus, RunDir(args.out).rounds_dir(), sample_size=args.sample,
        top_k=args.top_k, max_n=args.max_n, dim=args.dim, seed=args.seed,
        replace_keywords=args.replace_keywords,
        hyper={"hidden": args.hidden, "epochs": args.epochs, "lr": args.lr,
               "batch_size": args.batch_size, "l2": args.l2},
    )


def cmd_bootstrap(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    runner = _runner(args, corpus)
    if runner.current() is None:
        seed_path = args.keywords or run.path("keywords", "seed.tsv")
        if not os.path.exists(seed_path):
            raise CliError(f"missing upstream artifact: {seed_path}", EXIT_MISSING_ARTIFACT)
        runner.start(read_keyword_list(seed_path))
        log.info("round_opened", round=0)
    label_log = LabelLog(run.labels())
    while True:
        closed = [r for r in runner.rounds() if r.status == "closed"]
        if len(closed) >= args.rounds:
            log.info("bootstrap_complete", rounds=len(closed),
                     f1s=[r.test_f1 for r in closed])
            break
        active = label_log.active("relevance")
        labels = {pid: bool(rec.payload) for pid, rec in active.items()}
        rnd = runner.advance(labels)
        if rnd.status == "awaiting_labels":
            pending = [pid for pid in rnd.sample_ids if pid not in labels]
            if pending:
                log.info("awaiting_labels", round=rnd.index, pending=len(pending),
                         hint="label via `affectline serve` or append to store/labels.jsonl")
                break
        if rnd.status == "closed":
            log.info("round_closed", round=rnd.index, test_f1=rnd.test_f1,
                     harvested=rnd.harvested_count)
    write_manifest(run, "bootstrap", vars(args) | {"func": None},
                   [run.posts(), run.labels()] if os.path.exists(run.labels()) else [run.posts()])
    return 0


def _featurize_posts(corpus: Corpus, ids: list[str], max_n: int, dim: int):
    vecs = [featurize(tokenize(corpus.get(pid).text), max_n=max_n, dim=dim) for pid in ids]
    return stack_features(vecs, dim)


def cmd_train_emotion(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    label_log = LabelLog(run.path("store", "labels.jsonl", must_exist=True))
    active = label_log.active("emotion")
    ids = sorted(pid for pid in active if pid in corpus)
    if len(ids) < 10:
        raise CliError(f"missing upstream artifact: need >= 10 emotion labels in {run.labels()}",
                       EXIT_MISSING_ARTIFACT)
    split = make_split(ids, seed=args.seed)
    parts = {name: [pid for pid in ids if split[pid] == name] for name in ("train", "dev", "test")}
    sets = {pid: set(active[pid].payload) for pid in ids}
    X = {name: _featurize_posts(corpus, parts[name], args.max_n, args.dim) for name in parts}
    model = train_emotion_model(
        X["train"], [sets[pid] for pid in parts["train"]], max_n=args.max_n, dim=args.dim,
        dev=(X["dev"], [sets[pid] for pid in parts["dev"]]), strict=False,
        hidden=args.hidden, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
        l2=args.l2, seed=args.seed,
    )
    save_model(run.ensure("models", "emotion.json"), model)
    pred = [model.predict_labels(featurize(tokenize(corpus.get(pid).text), args.max_n, args.dim))
            for pid in parts["test"]]
    gold = [sets[pid] for pid in parts["test"]]
    metrics = evaluate(pred, gold, labels=list(EMOTIONS))
    write_manifest(run, "train-emotion", vars(args) | {"func": None},
                   [run.posts(), run.labels()])
    log.info("emotion_model_trained", **{k: round(v, 4) for k, v in metrics.items()},
             train=len(parts["train"]), test=len(parts["test"]))
    return 0


def cmd_classify(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    runner_rounds = run.path("rounds", must_exist=True)
    rounds = sorted(f for f in os.listdir(runner_rounds) if f.endswith(".state"))
    if not rounds:
        raise CliError(f"missing upstream artifact: no rounds in {runner_rounds}", EXIT_MISSING_ARTIFACT)
    from .retrieval import read_round

    closed = [read_round(os.path.join(runner_rounds, f)) for f in rounds]
    closed = [r for r in closed if r.status == "closed"]
    if not closed:
        raise CliError("missing upstream artifact: no closed bootstrap round", EXIT_MISSING_ARTIFACT)
    final = closed[-1]
    keywords = final.next_keywords or final.keywords
    relevance_model = load_model(os.path.join(runner_rounds, final.model_id))
    emotion_model = load_model(run.path("models", "emotion.json", must_exist=True))

    forms = token_forms(corpus)
    mentioned = harvest(corpus, keywords.entries, forms=forms)
    ids = sorted(corpus.ids())
    related: dict[str, bool] = {}
    probs: dict[str, float] = {}
    batch = [pid for pid in ids if pid in mentioned]
    if batch:
        X = stack_features([featurize(forms[pid], args.max_n, args.dim) for pid in batch], args.dim)
        p = relevance_model.predict_proba(X)
        for pid, pi in zip(batch, np.atleast_1d(p)):
            probs[pid] = float(pi)
    for pid in ids:
        related[pid] = probs.get(pid, 0.0) >= 0.5

    with open(run.ensure("predictions", "relevance.csv"), "w", encoding="utf-8") as fh:
        fh.write("post_id,related,probability\n")
        for pid in ids:
            fh.write(f"{pid},{int(related[pid])},{probs.get(pid, 0.0)!r}\n")

    with open(run.ensure("predictions", "emotions.csv"), "w", encoding="utf-8") as fh:
        fh.write("post_id," + ",".join("p_" + e for e in EMOTIONS) + "\n")
        rel_ids = [pid for pid in ids if related[pid]]
        for pid in rel_ids:
            vec = featurize(forms[pid], args.max_n, args.dim)
            em = emotion_model.probabilities(vec)
            fh.write(pid + "," + ",".join(repr(em[e]) for e in EMOTIONS) + "\n")
    write_manifest(run, "classify", vars(args) | {"func": None},
                   [run.posts(), run.path("models", "emotion.json")])
    log.info("classified", posts=len(ids), related=sum(related.values()))
    return 0


def _read_predictions(run: RunDir):
    rel_path = run.path("predictions", "relevance.csv", must_exist=True)
    emo_path = run.path("predictions", "emotions.csv", must_exist=True)
    related: dict[str, bool] = {}
    with open(rel_path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            pid, rel, _ = line.strip().split(",")
            related[pid] = rel == "1"
    probabilities: dict[str, dict[str, float]] = {}
    with open(emo_path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        emos = [h[2:] for h in header[1:]]
        for line in fh:
            cells = line.strip().split(",")
            probabilities[cells[0]] = {e: float(v) for e, v in zip(emos, cells[1:])}
    return related, probabilities


def cmd_trends(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    related, probabilities = _read_predictions(run)
    partitions = partition_by_day(corpus)
    topic = topic_intensity(partitions, related)
    write_series_csv(run.ensure("series", "topic.csv"), [topic])
    emo_series = emotion_intensity(partitions, related, probabilities)
    for emo in EMOTIONS:
        write_series_csv(run.ensure("series", f"emotion_{emo}.csv"), [emo_series[emo]])
    if args.smooth:
        for emo in EMOTIONS:
            smoothed = moving_average(emo_series[emo], args.smooth)
            smoothed.subject = f"{emo}#smooth{args.smooth}"
            write_series_csv(run.ensure("series", f"emotion_{emo}_smooth{args.smooth}.csv"), [smoothed])
    write_manifest(run, "trends", vars(args) | {"func": None},
                   [run.posts(), run.path("predictions", "relevance.csv"),
                    run.path("predictions", "emotions.csv")])
    log.info("series_written", days=len(partitions), directory=run.path("series"))
    return 0


def cmd_train_trigger(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    spans_by_post: dict[str, list] = {}
    if args.annotations:
        if not os.path.exists(args.annotations):
            raise CliError(f"missing upstream artifact: {args.annotations}", EXIT_MISSING_ARTIFACT)
        for s in read_trigger_annotations(args.annotations):
            spans_by_post.setdefault(s.post_id, []).append(s)
        inputs = [args.annotations, run.posts()]
    else:
        label_log = LabelLog(run.path("store", "labels.jsonl", must_exist=True))
        for pid, rec in label_log.active("trigger").items():
            for emo, start, end in rec.payload:
                from .trigger import TriggerSpan

                spans_by_post.setdefault(pid, []).append(
                    TriggerSpan(post_id=pid, emotion=emo, token_start=start, token_end=end))
        inputs = [run.posts(), run.labels()]
    sidecar, width = ({}, 0)
    if args.sidecar:
        sidecar, width = read_sidecar_features(args.sidecar)
        inputs.append(args.sidecar)
    X, y = [], []
    for pid in sorted(spans_by_post):
        if pid not in corpus:
            continue
        toks = tokenize(corpus.get(pid).text)
        by_emotion: dict[str, list] = {}
        for s in spans_by_post[pid]:
            by_emotion.setdefault(s.emotion, []).append((s.token_start, s.token_end))
        dense = dense_for_tokens(sidecar.get(pid), len(toks), width)
        for emo, spans in sorted(by_emotion.items()):
            X.append(featurize_sequence(toks, emotion=emo, dense=dense, dim=args.crf_dim))
            y.append(bio_tags(len(toks), spans))
    if not X:
        raise CliError("missing upstream artifact: no trigger annotations found", EXIT_MISSING_ARTIFACT)
    crf = CrfTagger(dim=args.crf_dim, l2=args.l2, lr=args.lr, epochs=args.epochs, seed=args.seed)
    crf.fit(X, y)
    save_crf(run.ensure("models", "crf.json"), crf)
    write_manifest(run, "train-trigger", vars(args) | {"func": None}, inputs)
    log.info("crf_trained", sequences=len(X), final_objective=round(crf.history_[-1], 6))
    return 0


def cmd_tag_triggers(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    crf = load_crf(run.path("models", "crf.json", must_exist=True))
    related, probabilities = _read_predictions(run)
    sidecar, width = ({}, 0)
    if args.sidecar:
        sidecar, width = read_sidecar_features(args.sidecar)
    mentions = []
    dropped = 0
    counter = 0
    for pid in sorted(probabilities):
        if not related.get(pid):
            continue
        post = corpus.get(pid)
        toks = tokenize(post.text)
        dense = dense_for_tokens(sidecar.get(pid), len(toks), width)
        labels = {e for e, p in probabilities[pid].items() if p >= args.threshold}
        for emo in sorted(labels):
            for span in tag_post(crf, pid, toks, emotion=emo, dense=dense):
                m = normalize_mention(f"t{counter}", pid, emo,
                                      toks.forms[span.token_start:span.token_end], post.date)
                counter += 1
                if m is None:
                    dropped += 1
                else:
                    mentions.append(m)
    write_mentions(run.ensure("mentions", "mentions.jsonl"), mentions)
    write_manifest(run, "tag-triggers", vars(args) | {"func": None},
                   [run.posts(), run.path("models", "crf.json")])
    log.info("mentions_extracted", mentions=len(mentions), dropped_empty=dropped)
    return 0


def cmd_fit_topics(args, log: Log) -> int:
    run = RunDir(args.out)
    mentions = read_mentions(run.path("mentions", "mentions.jsonl", must_exist=True))
    emotions = sorted({m.emotion for m in mentions}) if args.emotion == "all" else [args.emotion]
    for emo in emotions:
        subset = [m for m in mentions if m.emotion == emo]
        if not subset:
            log.info("no_mentions", emotion=emo)
            continue
        state = DateLda(n_topics=args.k, iterations=args.iters, alpha=args.alpha,
                        beta=args.beta, gamma=args.gamma, seed=args.seed
                        ).fit(subset, average_sweeps=args.average_sweeps)
        save_checkpoint(run.ensure("topics", emo, "state.json"), state)
        log.info("topics_fitted", emotion=emo, mentions=len(subset), k=args.k, iters=args.iters)
    write_manifest(run, "fit-topics", vars(args) | {"func": None},
                   [run.path("mentions", "mentions.jsonl")])
    return 0


def cmd_topic_report(args, log: Log) -> int:
    run = RunDir(args.out)
    curation = CurationStore(run.ensure("topics", "curation.json"))
    emotions = [args.emotion] if args.emotion != "all" else sorted(
        d for d in os.listdir(run.path("topics", must_exist=True))
        if os.path.isdir(run.path("topics", d)))
    for emo in emotions:
        state = load_checkpoint(run.path("topics", emo, "state.json", must_exist=True))
        report = topic_report(state, emotion=emo, top_m=args.top,
                              curation=curation.status.get(emo, {}))
        path = run.ensure("topics", emo, "report.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# emotion={emo} chain_seed={report.chain_seed}\n")
            fh.write("topic\tstatus\tmentions\ttop_words\ttop_dates\n")
            for t in report.topics:
                fh.write(f"{t.topic}\t{t.status}\t{t.mention_count}\t"
                         f"{' '.join(t.top_words)}\t"
                         f"{' '.join(d.isoformat() for d in t.top_dates[:3])}\n")
        log.info("report_written", emotion=emo, file=path)
    return 0


def cmd_curate_topics(args, log: Log) -> int:
    run = RunDir(args.out)
    state_path = run.path("topics", args.emotion, "state.json", must_exist=True)
    state = load_checkpoint(state_path)
    if not (0 <= args.topic < state.n_topics):
        raise CliError(f"topic {args.topic} out of range for {args.emotion}", EXIT_CONFIG)
    curation = CurationStore(run.ensure("topics", "curation.json"))
    curation.set(args.emotion, args.topic, args.status)
    log.info("curated", emotion=args.emotion, topic=args.topic, status=args.status)
    return 0


def cmd_subcat_trends(args, log: Log) -> int:
    run = RunDir(args.out)
    corpus = load_corpus(run)
    partitions = partition_by_day(corpus)
    curation = CurationStore(run.ensure("topics", "curation.json"))
    topics_dir = run.path("topics", must_exist=True)
    emotions = sorted(d for d in os.listdir(topics_dir) if os.path.isdir(os.path.join(topics_dir, d)))
    if not emotions:
        raise CliError(f"missing upstream artifact: no fitted topics under {topics_dir}",
                       EXIT_MISSING_ARTIFACT)
    for emo in emotions:
        state = load_checkpoint(run.path("topics", emo, "state.json", must_exist=True))
        kept = curation.kept_topics(emo, state.n_topics)
        series = subcategory_intensity(partitions, state, kept_topics=kept)
        write_series_csv(run.ensure("series", f"subcat_{emo}.csv"),
                         [series[k] for k in kept])
        log.info("subcat_series", emotion=emo, kept=len(kept))
    write_manifest(run, "subcat-trends", vars(args) | {"func": None}, [run.posts()])
    return 0


def _read_label_sets(path) -> dict[str, set]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            pid, _, labels = line.partition("\t")
            out[pid] = {l for l in labels.split(",") if l}
    return out


def cmd_eval(args, log: Log) -> int:
    for path in (args.pred, args.gold):
        if not os.path.exists(path):
            raise CliError(f"missing upstream artifact: {path}", EXIT_MISSING_ARTIFACT)
    if args.task == "emotion":
        pred, gold = _read_label_sets(args.pred), _read_label_sets(args.gold)
        ids = sorted(gold)
        metrics = evaluate([pred.get(pid, set()) for pid in ids],
                           [gold[pid] for pid in ids], labels=list(EMOTIONS))
    else:
        metrics = span_prf(read_trigger_annotations(args.pred), read_trigger_annotations(args.gold))
    log.info("eval", task=args.task, **{k: round(v, 6) for k, v in metrics.items()})
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_serve(args, log: Log) -> int:
    import uvicorn

    from .annosvc import build_app

    app = build_app(args.out, token=args.token)
    log.info("serving", host=args.host, port=args.port)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- argument plumbing -----------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", default=None, help="JSON config file with flag defaults")
    p.add_argument("--json-logs", action="store_true", dest="json_logs")
    p.add_argument("--seed", type=int, default=0)


def _add_featurize_flags(p: argparse.ArgumentParser):
    p.add_argument("--max-n", type=int, default=2, dest="max_n")
    p.add_argument("--dim", type=int, default=2 ** 18)


def _add_mlp_flags(p: argparse.ArgumentParser):
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--l2", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affectline", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest a post file into the run directory")
    _add_common(p)
    p.add_argument("--posts", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("seed-keywords", help="rank seed keywords by tf-idf against the corpus")
    _add_common(p)
    p.add_argument("--targets", required=True, help="file with one on-topic document per line")
    p.add_argument("--top-k", type=int, default=100, dest="top_k")
    p.set_defaults(func=cmd_seed_keywords)

    p = sub.add_parser("harvest", help="match posts against a keyword list")
    _add_common(p)
    p.add_argument("--keywords", required=True)
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("bootstrap", help="run keyword bootstrap rounds (pauses for labels)")
    _add_common(p)
    _add_featurize_flags(p)
    _add_mlp_flags(p)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--top-k", type=int, default=100, dest="top_k")
    p.add_argument("--keywords", default=None, help="seed keyword list (default keywords/seed.tsv)")
    p.add_argument("--replace-keywords", action="store_true", dest="replace_keywords",
                   help="replace keyword lists between rounds instead of merging")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("train-emotion", help="train the six one-vs-rest emotion heads")
    _add_common(p)
    _add_featurize_flags(p)
    _add_mlp_flags(p)
    p.set_defaults(func=cmd_train_emotion)

    p = sub.add_parser("classify", help="relevance + emotion probabilities for every post")
    _add_common(p)
    _add_featurize_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("trends", help="daily topic and emotion intensity CSVs")
    _add_common(p)
    p.add_argument("--smooth", type=int, default=0, help="also write N-day trailing means")
    p.set_defaults(func=cmd_trends)

    p = sub.add_parser("train-trigger", help="train the trigger-span CRF")
    _add_common(p)
    p.add_argument("--annotations", default=None, help="span TSV (default: label log)")
    p.add_argument("--sidecar", default=None, help="external per-token feature file")
    p.add_argument("--crf-dim", type=int, default=2 ** 16, dest="crf_dim")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=0.01)
    p.set_defaults(func=cmd_train_trigger)

    p = sub.add_parser("tag-triggers", help="decode trigger spans into mentions")
    _add_common(p)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_tag_triggers)

    p = sub.add_parser("fit-topics", help="fit the date-aware topic model per emotion")
    _add_common(p)
    p.add_argument("--emotion", default="all")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--average-sweeps", type=int, default=0, dest="average_sweeps",
                   help="average mention-topic counts over the last N sweeps")
    p.set_defaults(func=cmd_fit_topics)

    p = sub.add_parser("topic-report", help="write top words/dates per topic")
    _add_common(p)
    p.add_argument("--emotion", default="all")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_topic_report)

    p = sub.add_parser("curate-topics", help="keep or discard one topic")
    _add_common(p)
    p.add_argument("--emotion", required=True)
    p.add_argument("--topic", type=int, required=True)
    p.add_argument("--status", choices=["kept", "discarded"], required=True)
    p.set_defaults(func=cmd_curate_topics)

    p = sub.add_parser("subcat-trends", help="daily subcategory intensity CSVs")
    _add_common(p)
    p.set_defaults(func=cmd_subcat_trends)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    _add_common(p)
    p.add_argument("--task", choices=["emotion", "trigger"], required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the annotation/curation HTTP service")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--token", default=None, help="static annotator token")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # --config supplies defaults; explicit flags still win
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"affectline: bad config file: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for p in parser._subparsers._group_actions[0].choices.values():
            usable = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in config.items() if k in usable})
            for action in p._actions:
                if action.dest in config:
                    action.required = False
    args = parser.parse_args(argv)
    log = Log(bool(getattr(args, "json_logs", False)))
    try:
        with Lock(args.out):
            return args.func(args, log)
    except CliError as exc:
        print(f"affectline: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
