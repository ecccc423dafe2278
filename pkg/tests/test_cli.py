import json
import os

import pytest

from affectline.cli import main
from conftest import (
    BOOT_FLAGS,
    label_relevance_sample,
    read_round_sample,
    run_bootstrap_rounds,
    run_full_pipeline,
)


class TestPipelineCommands:
    def test_ingest_reports_rejections(self, tmp_path, capsys):
        src = tmp_path / "posts.jsonl"
        src.write_text(
            json.dumps({"id": "a", "timestamp": 1, "text": "hi", "platform": "twitter", "lang": "en"})
            + "\n" + json.dumps({"id": "a", "timestamp": 2, "text": "dup", "platform": "twitter", "lang": "en"})
            + "\n")
        out = tmp_path / "run"
        assert main(["ingest", "--out", str(out), "--posts", str(src), "--json-logs"]) == 0
        events = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert events[-1] == {"event": "ingested", "posts": 1, "rejections": 1}
        assert (out / "store" / "posts.jsonl").exists()
        assert (out / "manifests" / "ingest.json").exists()

    def test_missing_posts_file_exits_2(self, tmp_path):
        assert main(["ingest", "--out", str(tmp_path / "r"), "--posts", str(tmp_path / "nope")]) == 2

    def test_seed_keywords(self, planted_run):
        out, _ = planted_run
        targets = out / "targets.txt"
        targets.write_text("covid pandemic outbreak cases hospital\nquarantine vaccine testing deaths\n")
        assert main(["seed-keywords", "--out", str(out), "--targets", str(targets),
                     "--top-k", "20"]) == 0
        lines = (out / "keywords" / "seed.tsv").read_text().splitlines()
        assert 0 < len(lines) <= 20

    def test_harvest_writes_ids(self, planted_run):
        out, truth = planted_run
        assert main(["harvest", "--out", str(out), "--keywords", str(out / "seed.tsv")]) == 0
        ids = (out / "harvest" / "harvested.txt").read_text().split()
        assert ids and all(pid in truth.related for pid in ids)

    def test_bootstrap_pauses_and_resumes(self, planted_run, capsys):
        out, truth = planted_run
        rc = main(["bootstrap", "--out", str(out), "--rounds", "2", "--json-logs",
                   "--keywords", str(out / "seed.tsv")] + BOOT_FLAGS)
        assert rc == 0
        events = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert any(e["event"] == "awaiting_labels" and e["round"] == 0 for e in events)
        label_relevance_sample(out, truth, read_round_sample(out, 0), round_index=0)
        rc = main(["bootstrap", "--out", str(out), "--rounds", "2", "--json-logs",
                   "--keywords", str(out / "seed.tsv")] + BOOT_FLAGS)
        assert rc == 0
        events = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert any(e["event"] == "round_closed" and e["round"] == 0 for e in events)
        assert any(e["event"] == "awaiting_labels" and e["round"] == 1 for e in events)

    def test_full_pipeline_artifacts(self, planted_run):
        out, truth = planted_run
        run_full_pipeline(out, truth)
        series = os.listdir(out / "series")
        assert "topic.csv" in series
        assert sum(1 for f in series if f.startswith("emotion_")) == 6
        assert (out / "mentions" / "mentions.jsonl").exists()
        assert (out / "topics" / "anger" / "state.json").exists()
        # report + curation + subcat series
        assert main(["topic-report", "--out", str(out), "--emotion", "anger"]) == 0
        assert (out / "topics" / "anger" / "report.tsv").exists()
        assert main(["curate-topics", "--out", str(out), "--emotion", "anger",
                     "--topic", "0", "--status", "discarded"]) == 0
        assert main(["subcat-trends", "--out", str(out)]) == 0
        text = (out / "series" / "subcat_anger.csv").read_text()
        assert ",anger/0," not in text
        assert ",anger/1," in text
        # re-keep restores the topic in the next export
        assert main(["curate-topics", "--out", str(out), "--emotion", "anger",
                     "--topic", "0", "--status", "kept"]) == 0
        assert main(["subcat-trends", "--out", str(out)]) == 0
        assert ",anger/0," in (out / "series" / "subcat_anger.csv").read_text()

    def test_trends_requires_predictions(self, planted_run):
        out, _ = planted_run
        assert main(["trends", "--out", str(out)]) == 2

    def test_curate_topic_out_of_range_exits_3(self, planted_run):
        out, truth = planted_run
        run_full_pipeline(out, truth)
        assert main(["curate-topics", "--out", str(out), "--emotion", "anger",
                     "--topic", "99", "--status", "kept"]) == 3

    def test_eval_emotion_task(self, tmp_path, capsys):
        pred = tmp_path / "pred.tsv"
        gold = tmp_path / "gold.tsv"
        pred.write_text("p1\tanger,fear\np2\tanger\n")
        gold.write_text("p1\tanger\np2\tanger,fear\n")
        out = tmp_path / "run"
        assert main(["eval", "--out", str(out), "--task", "emotion",
                     "--pred", str(pred), "--gold", str(gold)]) == 0
        got = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert got["micro_f1"] == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))

    def test_eval_trigger_task(self, tmp_path, capsys):
        pred = tmp_path / "pred.tsv"
        gold = tmp_path / "gold.tsv"
        pred.write_text("p\tanger\t0\t1\np\tanger\t7\t8\n")
        gold.write_text("p\tanger\t0\t1\np\tanger\t2\t4\np\tanger\t5\t6\n")
        assert main(["eval", "--out", str(tmp_path / "run"), "--task", "trigger",
                     "--pred", str(pred), "--gold", str(gold)]) == 0
        got = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert got == {"precision": 0.5, "recall": pytest.approx(1 / 3), "f1": pytest.approx(0.4)}


class TestCliPlumbing:
    def test_lock_prevents_concurrent_commands(self, planted_run):
        out, _ = planted_run
        os.makedirs(out, exist_ok=True)
        (out / ".lock").write_text("123")
        assert main(["harvest", "--out", str(out), "--keywords", str(out / "seed.tsv")]) == 3
        (out / ".lock").unlink()
        assert main(["harvest", "--out", str(out), "--keywords", str(out / "seed.tsv")]) == 0

    def test_config_file_supplies_defaults(self, planted_run, capsys):
        out, _ = planted_run
        cfg = out / "config.json"
        cfg.write_text(json.dumps({"keywords": str(out / "seed.tsv")}))
        assert main(["harvest", "--out", str(out), "--config", str(cfg)]) == 0

    def test_bad_config_exits_3(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text("{nope")
        assert main(["ingest", "--out", str(tmp_path / "r"), "--posts", "x",
                     "--config", str(cfg)]) == 3

    def test_manifest_contents(self, planted_run):
        out, _ = planted_run
        assert main(["harvest", "--out", str(out), "--keywords", str(out / "seed.tsv")]) == 0
        manifest = json.loads((out / "manifests" / "harvest.json").read_text())
        assert manifest["command"] == "harvest"
        assert manifest["version"]
        assert any(p.endswith("posts.jsonl") for p in manifest["inputs"])
        assert all(len(d) == 64 for d in manifest["inputs"].values())

    def test_commands_do_not_mutate_inputs(self, planted_run):
        out, _ = planted_run
        posts_before = (out / "store" / "posts.jsonl").read_bytes()
        seed_before = (out / "seed.tsv").read_bytes()
        assert main(["harvest", "--out", str(out), "--keywords", str(out / "seed.tsv")]) == 0
        assert (out / "store" / "posts.jsonl").read_bytes() == posts_before
        assert (out / "seed.tsv").read_bytes() == seed_before
