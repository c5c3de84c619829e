"""HTTP service for collecting human pairwise preferences.

Persistence is an append-only JSONL journal plus an in-memory index rebuilt on
startup: crash-safe, diff-able, no database.  Raters never see augmentation
provenance or target scores.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel

from .datagen import Dataset, PairedSample
from .errors import (
    AlreadyVoted,
    UnknownDataset,
    UnknownPair,
    UnknownSession,
)
from .series import fleiss_kappa
from .errors import ApefError

TASKS = ("GPP", "CO2", "GPP+CO2")


def task_variables(task: str) -> list[str]:
    if task == "GPP+CO2":
        return ["GPP", "CO2"]
    return [task]


@dataclass(frozen=True)
class Preference:
    pair_id: str
    rater_id: str
    task: str
    choice: str
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "rater_id": self.rater_id,
            "task": self.task,
            "choice": self.choice,
            "timestamp": self.timestamp,
        }


@dataclass
class AnnotationSession:
    session_id: str
    task: str
    rater_id: str
    queue: tuple[str, ...]  # pair ids, order fixed at creation

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "task": self.task,
            "rater_id": self.rater_id,
            "queue": list(self.queue),
        }


def _seeded_shuffle(items: list[str], key: str) -> list[str]:
    """Deterministic shuffle keyed on (rater, task); counteracts order bias."""
    digest = hashlib.sha256(key.encode()).digest()
    seed = int.from_bytes(digest[:8], "big")
    import numpy as np

    rng = np.random.default_rng(seed)
    out = list(items)
    return [out[i] for i in rng.permutation(len(out))]


class AnnotationStore:
    """Sessions, votes, and the journal.  Journal appends are serialized
    through one lock; reads work against in-memory snapshots."""

    def __init__(self, dataset: Dataset, journal_path: str):
        self.dataset = dataset
        self.journal_path = journal_path
        self._lock = threading.Lock()
        self.sessions: dict[str, AnnotationSession] = {}
        self.votes: dict[tuple[str, str, str], Preference] = {}  # (rater, task, pair)
        self.pairs = self._build_pairs()
        self._post_journal_hook = None  # test seam for crash injection
        self._replay_journal()

    def _build_pairs(self) -> dict[str, PairedSample]:
        ids = sorted(self.dataset.split.train)
        pairs = {}
        for a, b in itertools.combinations(ids, 2):
            pid = f"annpair-{a}-{b}"
            pairs[pid] = PairedSample(pid, a, b)
        return pairs

    def _replay_journal(self) -> None:
        if not os.path.exists(self.journal_path):
            return
        with open(self.journal_path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                if entry["type"] == "session":
                    s = AnnotationSession(
                        session_id=entry["session_id"],
                        task=entry["task"],
                        rater_id=entry["rater_id"],
                        queue=tuple(entry["queue"]),
                    )
                    self.sessions[s.session_id] = s
                elif entry["type"] == "vote":
                    pref = Preference(
                        pair_id=entry["pair_id"],
                        rater_id=entry["rater_id"],
                        task=entry["task"],
                        choice=entry["choice"],
                        timestamp=entry["timestamp"],
                    )
                    self.votes[(pref.rater_id, pref.task, pref.pair_id)] = pref

    def _append_journal(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True)
        with open(self.journal_path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- sessions ----------------------------------------------------------

    def create_session(self, task: str, rater_id: str) -> AnnotationSession:
        if task not in TASKS:
            raise UnknownDataset(f"unknown task {task!r}")
        for var in task_variables(task):
            if var not in self.dataset.observations:
                raise UnknownDataset(f"dataset lacks variable {var!r}")
        session_id = "sess-" + hashlib.sha256(f"{rater_id}/{task}".encode()).hexdigest()[:12]
        with self._lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
            queue = tuple(_seeded_shuffle(sorted(self.pairs), f"{rater_id}/{task}"))
            session = AnnotationSession(session_id, task, rater_id, queue)
            self._append_journal({"type": "session", **session.to_dict()})
            if self._post_journal_hook:
                self._post_journal_hook()
            self.sessions[session_id] = session
        return session

    def _session(self, session_id: str) -> AnnotationSession:
        if session_id not in self.sessions:
            raise UnknownSession(session_id)
        return self.sessions[session_id]

    def next_pair(self, session_id: str) -> dict | None:
        """Payload for the first unvoted pair, or None when the queue is done.

        The payload carries raw numeric series only; no augmentation
        provenance or target information is exposed.
        """
        session = self._session(session_id)
        done = 0
        for pid in session.queue:
            if (session.rater_id, session.task, pid) in self.votes:
                done += 1
                continue
            pair = self.pairs[pid]
            variables = task_variables(session.task)
            return {
                "pair_id": pid,
                "task": session.task,
                "progress": {"done": done, "total": len(session.queue)},
                "series_a": {
                    var: list(self.dataset.predictions[pair.id_a][var].values)
                    for var in variables
                },
                "series_b": {
                    var: list(self.dataset.predictions[pair.id_b][var].values)
                    for var in variables
                },
                "observation": {
                    var: list(self.dataset.observations[var].values) for var in variables
                },
            }
        return None

    # -- votes -------------------------------------------------------------

    def record_vote(self, session_id: str, pair_id: str, choice: str) -> Preference:
        """Persist one preference: journal append first, index update second.

        Idempotent on duplicate submission with the same choice; a different
        choice raises AlreadyVoted.
        """
        session = self._session(session_id)
        if pair_id not in self.pairs or pair_id not in session.queue:
            raise UnknownPair(pair_id)
        if choice not in ("A", "B"):
            raise ValueError("choice must be A or B")
        key = (session.rater_id, session.task, pair_id)
        with self._lock:
            existing = self.votes.get(key)
            if existing is not None:
                if existing.choice == choice:
                    return existing
                raise AlreadyVoted(pair_id)
            pref = Preference(
                pair_id=pair_id,
                rater_id=session.rater_id,
                task=session.task,
                choice=choice,
                timestamp=time.time(),
            )
            self._append_journal({"type": "vote", **pref.to_dict()})
            if self._post_journal_hook:
                self._post_journal_hook()
            self.votes[key] = pref
        return pref

    # -- export ------------------------------------------------------------

    def export_annotations(self, task: str) -> dict:
        """Preferences plus an agreement report for one task, trainer-ready."""
        if task not in TASKS:
            raise UnknownDataset(f"unknown task {task!r}")
        prefs = sorted(
            (p for p in self.votes.values() if p.task == task),
            key=lambda p: (p.pair_id, p.rater_id),
        )
        by_pair: dict[str, list[str]] = {}
        for p in prefs:
            by_pair.setdefault(p.pair_id, []).append(p.choice)
        counts = [
            [votes.count("A"), votes.count("B")] for _, votes in sorted(by_pair.items())
        ]
        rater_totals = {len(v) for v in by_pair.values()}
        kappa = None
        if counts and len(rater_totals) == 1 and next(iter(rater_totals)) >= 2:
            try:
                kappa = fleiss_kappa(counts)
            except ApefError:
                kappa = None
        return {
            "task": task,
            "preferences": [p.to_dict() for p in prefs],
            "pairs": [
                self.pairs[pid].to_dict() for pid in sorted(by_pair)
            ],
            "report": {
                "pair_count": len(by_pair),
                "vote_count": len(prefs),
                "fleiss_kappa": kappa,
            },
        }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class SessionRequest(BaseModel):
    task: str
    rater_id: str


class VoteRequest(BaseModel):
    pair_id: str
    choice: str


def create_app(store: AnnotationStore, token: str | None = None) -> FastAPI:
    app = FastAPI(title="apef annotation service")

    def check_token(request: Request) -> None:
        if token is not None and request.headers.get("X-Apef-Token") != token:
            raise HTTPException(status_code=401, detail="missing or bad token")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: SessionRequest, request: Request):
        check_token(request)
        try:
            session = store.create_session(body.task, body.rater_id)
        except UnknownDataset as err:
            raise HTTPException(status_code=404, detail=str(err))
        return session.to_dict()

    @app.get("/sessions/{session_id}/next")
    def next_pair(session_id: str, request: Request):
        check_token(request)
        try:
            payload = store.next_pair(session_id)
        except UnknownSession as err:
            raise HTTPException(status_code=404, detail=str(err))
        if payload is None:
            return {"done": True}
        return {"done": False, **payload}

    @app.post("/sessions/{session_id}/votes")
    def record_vote(session_id: str, body: VoteRequest, request: Request):
        check_token(request)
        try:
            pref = store.record_vote(session_id, body.pair_id, body.choice)
        except UnknownSession as err:
            raise HTTPException(status_code=404, detail=str(err))
        except UnknownPair as err:
            raise HTTPException(status_code=404, detail=str(err))
        except AlreadyVoted as err:
            raise HTTPException(status_code=409, detail=str(err))
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return {"recorded": True, "pair_id": pref.pair_id, "choice": pref.choice}

    @app.get("/export")
    def export(task: str, request: Request):
        check_token(request)
        try:
            return store.export_annotations(task)
        except UnknownDataset as err:
            raise HTTPException(status_code=404, detail=str(err))

    return app
