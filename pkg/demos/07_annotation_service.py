"""
Human-evaluation protocol: tasks, judgments, aggregation
========================================================

Builds blinded A/B meaning tasks and per-sentence fluency tasks, serves
them over HTTP, answers them with a scripted client, and aggregates the
judgment log into the bucketed preference and fluency tables.
"""

import json
import urllib.request

from backstyle.evalharness import (
    FLUENCY,
    MEANING,
    JudgmentLog,
    aggregate_fluency,
    aggregate_meaning,
    make_tasks,
    render_fluency_table,
    render_meaning_table,
)
from backstyle.server import AnnotationServer

sources = [[f"w{i}" for i in range(n)] for n in (5, 6, 18, 20)]
outs_a = [s[:-1] + ["alpha"] for s in sources]
outs_b = [s[:-1] + ["beta"] for s in sources]
tasks = make_tasks(sources, outs_a, outs_b, MEANING, seed=1,
                   system_a="model-a", system_b="model-b")
tasks += make_tasks(sources, outs_a, outs_b, FLUENCY, seed=1,
                    system_a="model-a", system_b="model-b")

import tempfile
from pathlib import Path

log_path = Path(tempfile.mkdtemp(prefix="bst_demo_")) / "judgments.jsonl"
server = AnnotationServer(tasks, log_path).start()
print("serving", len(tasks), "tasks at", server.address)


def fetch_next(annotator):
    with urllib.request.urlopen(
            f"{server.address}/api/tasks/next?annotator={annotator}") as resp:
        return json.loads(resp.read()) if resp.status == 200 else None


def submit(annotator, task_id, verdict):
    req = urllib.request.Request(
        server.address + "/api/judgments",
        data=json.dumps({"task_id": task_id, "annotator": annotator,
                         "verdict": verdict}).encode(),
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return resp.status


# a scripted annotator drains the queue; payloads never name the systems
payload = fetch_next("demo-rater")
print("\nfirst served payload (note: candidates are only 'A' and 'B'):")
print(json.dumps(payload, indent=2)[:400])

count = 0
while (payload := fetch_next("demo-rater")) is not None:
    if payload["kind"] == MEANING:
        verdict = "A" if len(payload["source"].split()) <= 15 else "="
    else:
        verdict = 4 if "alpha" in payload["candidates"]["A"] else 2
    assert submit("demo-rater", payload["task_id"], verdict) == 201
    count += 1
print(f"\nsubmitted {count} judgments")

with urllib.request.urlopen(server.address + "/api/progress") as resp:
    print("progress endpoint:", json.loads(resp.read()))
server.close()

log = JudgmentLog(log_path, tasks)
print()
print(render_meaning_table(aggregate_meaning(log.judgments(), tasks)))
print()
print(render_fluency_table(aggregate_fluency(log.judgments(), tasks)))
