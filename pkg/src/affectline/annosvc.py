"""HTTP service for human annotation and topic curation.

Backs the browser UI: leases batches of unlabeled posts (15-minute
leases, expiry-based recovery), appends submitted labels to the label
log (append-then-ack), advances bootstrap rounds, and persists topic
keep/discard decisions.  Auth is one static annotator token; this is a
desk tool, not a security boundary.
"""

from __future__ import annotations

import json
import os
import time
import uuid

from fastapi import FastAPI, Header, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .corpus import LabelLog, LabelRecord, TASKS, ingest_file
from .retrieval import BootstrapRunner
from .textfeat import tokenize
from .topics import CurationStore, load_checkpoint, topic_report

SCHEMA_VERSION = "affectline-v1"
DEFAULT_LEASE_SECONDS = 15 * 60


class Lease:
    def __init__(self, batch_id: str, task: str, post_ids: list[str],
                 annotator: str, expires_at: float):
        self.batch_id = batch_id
        self.task = task
        self.post_ids = post_ids
        self.annotator = annotator
        self.expires_at = expires_at


class LabelItem(BaseModel):
    post_id: str
    payload: object


class LabelSubmission(BaseModel):
    labels: list[LabelItem]


class StatusBody(BaseModel):
    status: str


class ServiceState:
    """Everything the endpoints share; leases live in memory only."""

    def __init__(self, out_dir: str, token: str | None = None,
                 lease_seconds: int = DEFAULT_LEASE_SECONDS, clock=time.time):
        self.out_dir = out_dir
        self.token = token
        self.lease_seconds = lease_seconds
        self.clock = clock
        self.leases: dict[str, Lease] = {}
        posts_path = os.path.join(out_dir, "store", "posts.jsonl")
        if not os.path.exists(posts_path):
            raise FileNotFoundError(f"no ingested corpus at {posts_path}")
        self.corpus, _ = ingest_file(posts_path)
        self.label_log = LabelLog(os.path.join(out_dir, "store", "labels.jsonl"))
        self.curation = CurationStore(os.path.join(out_dir, "topics", "curation.json"))

    # -- bootstrap state ---------------------------------------------------

    def bootstrap_config(self) -> dict | None:
        path = os.path.join(self.out_dir, "manifests", "bootstrap.json")
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["config"]

    def runner(self) -> BootstrapRunner | None:
        cfg = self.bootstrap_config()
        rounds_dir = os.path.join(self.out_dir, "rounds")
        if cfg is None or not os.path.isdir(rounds_dir):
            return None
        return BootstrapRunner(
            self.corpus, rounds_dir,
            sample_size=cfg.get("sample", 1000), top_k=cfg.get("top_k", 100),
            max_n=cfg.get("max_n", 2), dim=cfg.get("dim", 2 ** 18),
            seed=cfg.get("seed", 0), replace_keywords=cfg.get("replace_keywords", False),
            hyper={k: cfg[k] for k in ("hidden", "epochs", "lr", "batch_size", "l2") if k in cfg},
        )

    # -- leasing -------------------------------------------------------------

    def _active_lease_ids(self, task: str) -> set[str]:
        now = self.clock()
        out: set[str] = set()
        for lease in self.leases.values():
            if lease.task == task and lease.expires_at > now:
                out.update(lease.post_ids)
        return out

    def pending_posts(self, task: str) -> list[str]:
        """Unlabeled posts for a task, in deterministic order."""
        if task == "relevance":
            runner = self.runner()
            rnd = runner.current() if runner else None
            if rnd is None or rnd.status == "closed":
                raise HTTPException(status_code=409, detail="no open bootstrap round")
            pool = list(rnd.sample_ids)
        elif task == "emotion":
            related = {pid for pid, rec in self.label_log.active("relevance").items()
                       if rec.payload is True}
            pool = sorted(related)
        else:  # trigger
            emotional = {pid for pid, rec in self.label_log.active("emotion").items()
                         if rec.payload}
            pool = sorted(emotional)
        done = set(self.label_log.active(task))
        leased = self._active_lease_ids(task)
        return [pid for pid in pool if pid not in done and pid not in leased]

    def lease_batch(self, task: str, size: int, annotator: str) -> Lease:
        pending = self.pending_posts(task)[:size]
        lease = Lease(
            batch_id=uuid.uuid4().hex,
            task=task,
            post_ids=pending,
            annotator=annotator,
            expires_at=self.clock() + self.lease_seconds,
        )
        if pending:
            self.leases[lease.batch_id] = lease
        return lease

    def post_payload(self, pid: str) -> dict:
        post = self.corpus.get(pid)
        toks = tokenize(post.text)
        return {
            "id": post.id,
            "text": post.text,
            "date": post.date.isoformat(),
            "tokens": [{"form": t.form, "surface": t.surface} for t in toks],
        }


def build_app(out_dir: str, token: str | None = None,
              lease_seconds: int = DEFAULT_LEASE_SECONDS, clock=time.time) -> FastAPI:
    state = ServiceState(out_dir, token=token, lease_seconds=lease_seconds, clock=clock)
    app = FastAPI(title="affectline annotation service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    app.state.service = state

    def versioned(payload: dict) -> dict:
        return {"schema_version": SCHEMA_VERSION, **payload}

    def check_auth(request: Request) -> None:
        if state.token is not None:
            if request.headers.get("x-annotator-token") != state.token:
                raise HTTPException(status_code=401, detail="bad annotator token")

    @app.get("/rounds")
    def rounds(request: Request):
        check_auth(request)
        runner = state.runner()
        out = []
        if runner is not None:
            labeled = set(state.label_log.active("relevance"))
            for rnd in runner.rounds():
                out.append({
                    "index": rnd.index,
                    "status": rnd.status,
                    "harvested": rnd.harvested_count,
                    "sample_size": len(rnd.sample_ids),
                    "labeled": sum(1 for pid in rnd.sample_ids if pid in labeled),
                    "test_f1": rnd.test_f1,
                })
        return versioned({"rounds": out})

    @app.post("/rounds/advance")
    def advance(request: Request):
        check_auth(request)
        runner = state.runner()
        if runner is None or runner.current() is None:
            raise HTTPException(status_code=409, detail="bootstrap not started")
        labels = {pid: bool(rec.payload)
                  for pid, rec in state.label_log.active("relevance").items()}
        rnd = runner.advance(labels)
        return versioned({"round": rnd.index, "status": rnd.status, "test_f1": rnd.test_f1})

    @app.get("/batches/next")
    def next_batch(request: Request, task: str = Query(...), size: int = Query(50),
                   x_annotator: str = Header(default="anon")):
        check_auth(request)
        if task not in TASKS:
            raise HTTPException(status_code=422, detail=f"unknown task {task!r}")
        if size < 1:
            raise HTTPException(status_code=422, detail="size must be >= 1")
        lease = state.lease_batch(task, size, x_annotator)
        return versioned({
            "batch_id": lease.batch_id if lease.post_ids else None,
            "task": task,
            "expires_at": lease.expires_at if lease.post_ids else None,
            "posts": [state.post_payload(pid) for pid in lease.post_ids],
        })

    @app.post("/batches/{batch_id}/labels")
    def submit_labels(batch_id: str, body: LabelSubmission, request: Request,
                      x_annotator: str = Header(default="anon")):
        check_auth(request)
        lease = state.leases.get(batch_id)
        if lease is None or lease.expires_at <= state.clock():
            raise HTTPException(status_code=410, detail="lease expired or unknown")
        allowed = set(lease.post_ids)
        runner = state.runner()
        rnd = runner.current() if runner else None
        round_index = rnd.index if rnd is not None else 0
        records = []
        for item in body.labels:
            if item.post_id not in allowed:
                raise HTTPException(status_code=422,
                                    detail=f"post {item.post_id!r} is not in this batch")
            rec = LabelRecord(post_id=item.post_id, task=lease.task, payload=item.payload,
                              annotator_id=x_annotator, round=round_index)
            records.append(rec)
        appended = 0
        try:
            for rec in records:
                state.label_log.append(rec)  # validates, then append-then-ack
                appended += 1
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=f"{exc} (appended {appended})")
        labeled = set(lease.post_ids) & set(state.label_log.active(lease.task))
        if labeled >= set(lease.post_ids):
            del state.leases[batch_id]
        return versioned({"appended": appended})

    @app.get("/topics")
    def topics(request: Request, emotion: str = Query(...)):
        check_auth(request)
        path = os.path.join(out_dir, "topics", emotion, "state.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"no fitted topics for {emotion!r}")
        lda = load_checkpoint(path)
        report = topic_report(lda, emotion=emotion, top_m=10,
                              curation=state.curation.status.get(emotion, {}))
        return versioned({
            "emotion": emotion,
            "topics": [{
                "topic": t.topic,
                "top_words": t.top_words,
                "top_dates": [d.isoformat() for d in t.top_dates[:5]],
                "mention_count": t.mention_count,
                "status": t.status,
            } for t in report.topics],
        })

    @app.post("/topics/{emotion}/{k}/status")
    def set_topic_status(emotion: str, k: int, body: StatusBody, request: Request):
        check_auth(request)
        path = os.path.join(out_dir, "topics", emotion, "state.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"no fitted topics for {emotion!r}")
        lda = load_checkpoint(path)
        if not (0 <= k < lda.n_topics):
            raise HTTPException(status_code=404, detail=f"unknown topic {k}")
        if body.status not in ("kept", "discarded"):
            raise HTTPException(status_code=422, detail="status must be kept or discarded")
        state.curation.set(emotion, k, body.status)
        return versioned({"emotion": emotion, "topic": k, "status": body.status})

    return app
