"""Collect pairwise preferences through the annotation service.

Starts the HTTP app in-process, walks one rater through a few pairs,
then exports the collected preferences and the inter-rater agreement
report. The journal file makes every vote durable: deleting the
in-memory state and replaying the journal reproduces the same export.
Run with:

    python3 demos/03_annotation_service.py
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from apef import default_observations, generate_dataset
from apef.service import AnnotationStore, create_app

dataset = generate_dataset(default_observations(), n=20, seed=0)
journal = Path(tempfile.mkdtemp()) / "journal.jsonl"
store = AnnotationStore(dataset, journal_path=str(journal))
client = TestClient(create_app(store))

session = client.post("/sessions", json={"rater_id": "demo-rater", "task": "GPP"}).json()
sid = session["session_id"]
print(f"session {sid}: {len(session['queue'])} pairs queued")

for _ in range(5):
    pair = client.get(f"/sessions/{sid}/next").json()
    choice = "A" if len(pair["series_a"]) % 2 == 0 else "B"
    client.post(f"/sessions/{sid}/votes", json={"pair_id": pair["pair_id"], "choice": choice})
    print(f"  voted {choice} on {pair['pair_id']} "
          f"({pair['progress']['done'] + 1}/{pair['progress']['total']})")

export = client.get("/export", params={"task": "GPP"}).json()
print(f"exported {len(export['preferences'])} preferences; "
      f"report: {export['report']}")

# Durability: a fresh store replaying the same journal yields the same export.
replayed = AnnotationStore(dataset, journal_path=str(journal))
assert replayed.export_annotations("GPP") == store.export_annotations("GPP")
print("journal replay reproduces the export exactly")
