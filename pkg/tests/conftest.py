import json

import pytest

from affectline.corpus import LabelLog, LabelRecord, write_posts
from affectline.datasets import ScriptedAnnotator, make_synthetic_corpus
from affectline.textfeat import KeywordScore, write_keyword_list


@pytest.fixture
def planted_run(tmp_path):
    """A run directory with a small planted corpus already ingested."""
    posts, truth = make_synthetic_corpus(n_days=4, posts_per_day=90, seed=7)
    out = tmp_path / "run"
    (out / "store").mkdir(parents=True)
    write_posts(out / "store" / "posts.jsonl", posts)
    write_keyword_list(out / "seed.tsv", [KeywordScore(t, 1.0) for t in truth.seed_keywords])
    return out, truth


def label_relevance_sample(out, truth, sample_ids, annotator="oracle", round_index=0):
    oracle = ScriptedAnnotator(truth)
    log = LabelLog(out / "store" / "labels.jsonl")
    for pid in sample_ids:
        log.append(LabelRecord(post_id=pid, task="relevance",
                               payload=oracle.relevance(pid),
                               annotator_id=annotator, round=round_index))


def label_emotions(out, truth, ids, annotator="oracle"):
    oracle = ScriptedAnnotator(truth)
    log = LabelLog(out / "store" / "labels.jsonl")
    for pid in ids:
        log.append(LabelRecord(post_id=pid, task="emotion",
                               payload=sorted(oracle.emotions(pid)),
                               annotator_id=annotator))


def label_triggers(out, truth, ids, annotator="oracle"):
    oracle = ScriptedAnnotator(truth)
    log = LabelLog(out / "store" / "labels.jsonl")
    for pid in ids:
        log.append(LabelRecord(post_id=pid, task="trigger",
                               payload=oracle.triggers(pid),
                               annotator_id=annotator))


def read_round_sample(out, index):
    from affectline.retrieval import read_round

    return read_round(out / "rounds" / f"round-{index}.state").sample_ids


BOOT_FLAGS = ["--sample", "60", "--dim", "4096", "--max-n", "1", "--top-k", "10",
              "--hidden", "4", "--epochs", "25", "--seed", "0"]


def run_bootstrap_rounds(out, truth, rounds=2):
    from affectline.cli import main

    rc = main(["bootstrap", "--out", str(out), "--rounds", str(rounds),
               "--keywords", str(out / "seed.tsv")] + BOOT_FLAGS)
    assert rc == 0
    for idx in range(rounds):
        label_relevance_sample(out, truth, read_round_sample(out, idx), round_index=idx)
        rc = main(["bootstrap", "--out", str(out), "--rounds", str(rounds),
                   "--keywords", str(out / "seed.tsv")] + BOOT_FLAGS)
        assert rc == 0


def run_model_stages(out):
    """The deterministic artifact-producing stages after labeling."""
    from affectline.cli import main

    assert main(["train-emotion", "--out", str(out), "--dim", "4096", "--max-n", "1",
                 "--hidden", "4", "--epochs", "25"]) == 0
    assert main(["classify", "--out", str(out), "--dim", "4096", "--max-n", "1"]) == 0
    assert main(["trends", "--out", str(out)]) == 0
    assert main(["train-trigger", "--out", str(out), "--crf-dim", "2048",
                 "--epochs", "60"]) == 0
    assert main(["tag-triggers", "--out", str(out)]) == 0
    assert main(["fit-topics", "--out", str(out), "--emotion", "anger",
                 "--k", "4", "--iters", "20"]) == 0


def run_full_pipeline(out, truth):
    run_bootstrap_rounds(out, truth, rounds=2)
    related_labeled = [pid for pid in truth.related if truth.related[pid]][:120]
    label_emotions(out, truth, related_labeled)
    with_spans = [pid for pid in related_labeled if truth.trigger_spans[pid]][:60]
    label_triggers(out, truth, with_spans)
    run_model_stages(out)
