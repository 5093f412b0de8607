"""HTTP annotation service tests: endpoints, blinding, concurrency."""

import json
import threading
import urllib.error
import urllib.request

import pytest

from backstyle.evalharness import (
    FLUENCY,
    MEANING,
    aggregate_fluency,
    aggregate_meaning,
    Judgment,
    JudgmentLog,
    make_tasks,
)
from backstyle.server import AnnotationServer


def build_tasks():
    srcs = [[f"w{i}", "w9", "w8"] for i in range(4)]
    outs_a = [s[:2] + ["ra"] for s in srcs]
    outs_b = [s[:2] + ["rb"] for s in srcs]
    tasks = make_tasks(srcs, outs_a, outs_b, MEANING, seed=1,
                       system_a="left", system_b="right")
    tasks += make_tasks(srcs[:2], outs_a[:2], outs_b[:2], FLUENCY, seed=1,
                        system_a="left", system_b="right")
    return tasks


@pytest.fixture()
def server(tmp_path):
    srv = AnnotationServer(build_tasks(), tmp_path / "log.jsonl").start()
    yield srv
    srv.close()


def get(srv, path):
    try:
        with urllib.request.urlopen(srv.address + path) as resp:
            body = resp.read()
            return resp.status, json.loads(body) if body else None
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read() or b"null")


def post(srv, obj, path="/api/judgments"):
    data = obj if isinstance(obj, bytes) else json.dumps(obj).encode("utf-8")
    req = urllib.request.Request(srv.address + path, data=data,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read() or b"null")


class TestTaskEndpoint:
    def test_requires_annotator(self, server):
        code, body = get(server, "/api/tasks/next")
        assert code == 400
        assert "annotator" in body["error"]

    def test_serves_first_unjudged_in_order(self, server):
        code, body = get(server, "/api/tasks/next?annotator=u1")
        assert code == 200
        assert body["task_id"] == server.tasks[0].task_id
        post(server, {"task_id": body["task_id"], "annotator": "u1", "verdict": "A"})
        code, body2 = get(server, "/api/tasks/next?annotator=u1")
        assert code == 200
        assert body2["task_id"] == server.tasks[1].task_id
        # another annotator still starts from the first task
        code, body3 = get(server, "/api/tasks/next?annotator=u2")
        assert body3["task_id"] == server.tasks[0].task_id

    def test_payload_is_blinded(self, server):
        code, body = get(server, "/api/tasks/next?annotator=u1")
        assert set(body) == {"task_id", "kind", "prompt", "source",
                             "candidates", "verdicts"}
        flat = [body["task_id"], body["kind"], body["prompt"], body["source"],
                *body["candidates"].values()]
        assert "left" not in flat and "right" not in flat

    def test_204_when_done(self, server):
        while True:
            code, body = get(server, "/api/tasks/next?annotator=u1")
            if code == 204:
                assert body is None
                break
            verdict = "=" if body["kind"] == MEANING else 2
            code, _ = post(server, {"task_id": body["task_id"],
                                    "annotator": "u1", "verdict": verdict})
            assert code == 201


class TestJudgmentEndpoint:
    def test_accepts_valid_and_rejects_duplicate(self, server):
        task_id = server.tasks[0].task_id
        code, body = post(server, {"task_id": task_id, "annotator": "u1",
                                   "verdict": "B"})
        assert code == 201 and body["accepted"] is True
        code, body = post(server, {"task_id": task_id, "annotator": "u1",
                                   "verdict": "A"})
        assert code == 409
        assert "already judged" in body["error"]

    def test_meaning_verdict_domain(self, server):
        task_id = server.tasks[0].task_id
        code, body = post(server, {"task_id": task_id, "annotator": "u1",
                                   "verdict": "C"})
        assert code == 400
        assert "meaning verdict" in body["error"]

    def test_fluency_rating_domain(self, server):
        fl = next(t for t in server.tasks if t.kind == FLUENCY)
        for bad in (0, 5, "3"):
            code, body = post(server, {"task_id": fl.task_id, "annotator": "u1",
                                       "verdict": bad})
            assert code == 400, bad
        code, _ = post(server, {"task_id": fl.task_id, "annotator": "u1",
                                "verdict": 4})
        assert code == 201

    def test_unknown_task_rejected(self, server):
        code, body = post(server, {"task_id": "nope", "annotator": "u1",
                                   "verdict": "A"})
        assert code == 400
        assert "unknown task" in body["error"]

    def test_malformed_body_rejected(self, server):
        code, body = post(server, b"{not json")
        assert code == 400
        code, body = post(server, {"task_id": server.tasks[0].task_id})
        assert code == 400
        assert "missing" in body["error"]
        code, body = post(server, {"task_id": server.tasks[0].task_id,
                                   "annotator": "  ", "verdict": "A"})
        assert code == 400

    def test_timestamp_filled_server_side(self, server, tmp_path):
        task_id = server.tasks[0].task_id
        post(server, {"task_id": task_id, "annotator": "u9", "verdict": "="})
        stored = server.log.judgments()[-1]
        assert stored.timestamp != ""

    def test_post_elsewhere_404(self, server):
        code, _ = post(server, {"x": 1}, path="/api/other")
        assert code == 404


class TestProgressEndpoint:
    def test_counts(self, server):
        code, body = get(server, "/api/progress")
        assert code == 200
        assert body == {"tasks": len(server.tasks), "judgments": 0, "annotators": {}}
        post(server, {"task_id": server.tasks[0].task_id, "annotator": "u1",
                      "verdict": "A"})
        post(server, {"task_id": server.tasks[1].task_id, "annotator": "u1",
                      "verdict": "B"})
        post(server, {"task_id": server.tasks[0].task_id, "annotator": "u2",
                      "verdict": "="})
        code, body = get(server, "/api/progress")
        assert body["judgments"] == 3
        assert body["annotators"] == {"u1": 2, "u2": 1}


class TestPersistence:
    def test_restart_keeps_rejecting_duplicates(self, tmp_path):
        tasks = build_tasks()
        log_path = tmp_path / "log.jsonl"
        srv = AnnotationServer(tasks, log_path).start()
        try:
            post(srv, {"task_id": tasks[0].task_id, "annotator": "u1",
                       "verdict": "A"})
        finally:
            srv.close()
        srv2 = AnnotationServer(tasks, log_path).start()
        try:
            code, _ = post(srv2, {"task_id": tasks[0].task_id, "annotator": "u1",
                                  "verdict": "B"})
            assert code == 409
            code, body = get(srv2, "/api/progress")
            assert body["judgments"] == 1
        finally:
            srv2.close()


class TestConcurrency:
    def test_parallel_posts_all_recorded_once(self, server, tmp_path):
        n_threads = 8
        barrier = threading.Barrier(n_threads)
        results = []

        def worker(tid):
            barrier.wait()
            for i, task in enumerate(server.tasks):
                verdict = "=" if task.kind == MEANING else 1
                code, _ = post(server, {"task_id": task.task_id,
                                        "annotator": f"u{tid}",
                                        "verdict": verdict})
                results.append(code)

        threads = [threading.Thread(target=worker, args=(t,))
                   for t in range(n_threads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results.count(201) == n_threads * len(server.tasks)
        code, body = get(server, "/api/progress")
        assert body["judgments"] == n_threads * len(server.tasks)


class TestScriptedRoundTrip:
    def test_aggregates_match_script_choices(self, tmp_path):
        """A scripted client answers every task; aggregation over the log
        reproduces the script's known preference counts."""
        tasks = build_tasks()
        log_path = tmp_path / "log.jsonl"
        srv = AnnotationServer(tasks, log_path).start()
        try:
            # always prefer the "left" system on meaning tasks, rate "left"
            # fluency 4 and "right" fluency 2
            for task in tasks:
                if task.kind == MEANING:
                    slot = next(k for k, v in task.hidden.items() if v == "left")
                    verdict = slot
                else:
                    verdict = 4 if task.hidden["A"] == "left" else 2
                code, _ = post(srv, {"task_id": task.task_id, "annotator": "u1",
                                     "verdict": verdict})
                assert code == 201
        finally:
            srv.close()
        log = JudgmentLog(log_path, tasks)
        meaning = aggregate_meaning(log.judgments(), tasks)
        assert meaning.systems == ("left", "right")
        assert meaning.rows["overall"] == (100.0, 0.0, 0.0)
        fluency = aggregate_fluency(log.judgments(), tasks)
        assert fluency.rows["overall"] == (4.0, 2.0)


class TestStaticFiles:
    def test_serves_index_and_assets(self, tmp_path):
        static = tmp_path / "dist"
        static.mkdir()
        (static / "index.html").write_text("<html><body>annotate</body></html>")
        (static / "app.js").write_text("console.log(1)")
        srv = AnnotationServer(build_tasks(), tmp_path / "log.jsonl",
                               static_dir=static).start()
        try:
            with urllib.request.urlopen(srv.address + "/") as resp:
                assert resp.status == 200
                assert b"annotate" in resp.read()
                assert "text/html" in resp.headers["Content-Type"]
            with urllib.request.urlopen(srv.address + "/app.js") as resp:
                assert resp.status == 200
            code, _ = get(srv, "/missing.css")
            assert code == 404
        finally:
            srv.close()

    def test_traversal_blocked(self, tmp_path):
        static = tmp_path / "dist"
        static.mkdir()
        (tmp_path / "secret.txt").write_text("s3cr3t")
        srv = AnnotationServer(build_tasks(), tmp_path / "log.jsonl",
                               static_dir=static).start()
        try:
            req = urllib.request.Request(srv.address + "/%2e%2e/secret.txt")
            with pytest.raises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(req)
            assert err.value.code == 404
        finally:
            srv.close()

    def test_404_without_static_dir(self, server):
        code, body = get(server, "/index.html")
        assert code == 404
