"""HTTP service feeding annotation tasks to a browser UI or scripted client.

Endpoints (all JSON, UTF-8):

* ``GET /api/tasks/next?annotator=ID`` — the first task in file order this
  annotator has not judged, as the blinded payload (no system-identity
  field); 204 when the annotator has judged everything.
* ``POST /api/judgments`` — body {task_id, annotator, verdict[, timestamp]};
  validates the verdict against the task's kind, appends to the JSONL log,
  answers 201. Malformed or out-of-domain input answers 400 with a reason;
  a repeated (task, annotator) pair answers 409.
* ``GET /api/progress`` — task and judgment counts.
* ``GET /…`` — static files from the configured directory (the UI bundle).

The judgment log on disk is the single source of truth; the server keeps
only an index. Appends are serialized by the log's lock, so concurrent
clients are safe; two annotators may receive the same task, which is fine
because judgments are unique per (task, annotator).
"""

from __future__ import annotations

import json
import mimetypes
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .evalharness import AnnotationTask, DuplicateJudgmentError, Judgment, JudgmentLog

__all__ = ["AnnotationServer"]


class AnnotationServer:
    """Serve annotation tasks and collect judgments over HTTP."""

    def __init__(self, tasks: list[AnnotationTask], log_path,
                 static_dir=None, host: str = "127.0.0.1", port: int = 0):
        self.tasks = list(tasks)
        self.log = JudgmentLog(log_path, self.tasks)
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_GET(self):
                server._get(self)

            def do_POST(self):
                server._post(self)

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "AnnotationServer":
        """Serve in a daemon thread (for tests and embedding)."""
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- request handling ---------------------------------------------------

    @staticmethod
    def _send(handler, code: int, payload=None, content_type="application/json"):
        handler.send_response(code)
        if payload is None:
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return
        if isinstance(payload, (dict, list)):
            payload = json.dumps(payload).encode("utf-8")
        handler.send_header("Content-Type", content_type)
        handler.send_header("Content-Length", str(len(payload)))
        handler.end_headers()
        handler.wfile.write(payload)

    def _get(self, handler) -> None:
        url = urlparse(handler.path)
        if url.path == "/api/tasks/next":
            params = parse_qs(url.query)
            annotator = params.get("annotator", [""])[0].strip()
            if not annotator:
                self._send(handler, 400, {"error": "annotator query parameter required"})
                return
            judged = self.log.judged_pairs()
            for task in self.tasks:
                if (task.task_id, annotator) not in judged:
                    self._send(handler, 200, task.payload())
                    return
            self._send(handler, 204)
            return
        if url.path == "/api/progress":
            per_annotator: dict[str, int] = {}
            for task_id, annotator in self.log.judged_pairs():
                per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
            self._send(handler, 200, {
                "tasks": len(self.tasks),
                "judgments": len(self.log),
                "annotators": dict(sorted(per_annotator.items())),
            })
            return
        self._static(handler, url.path)

    def _post(self, handler) -> None:
        url = urlparse(handler.path)
        if url.path != "/api/judgments":
            self._send(handler, 404, {"error": f"no such endpoint {url.path}"})
            return
        try:
            length = int(handler.headers.get("Content-Length", "0"))
            body = handler.rfile.read(length)
            data = json.loads(body.decode("utf-8"))
            if not isinstance(data, dict):
                raise ValueError("judgment body must be a JSON object")
            judgment = Judgment.from_dict(data)
            if not judgment.annotator.strip():
                raise ValueError("annotator must be nonempty")
            if not judgment.timestamp:
                now = datetime.now(timezone.utc).isoformat(timespec="seconds")
                judgment = Judgment(judgment.task_id, judgment.annotator,
                                    judgment.verdict, now)
        except (UnicodeDecodeError, json.JSONDecodeError, ValueError, TypeError) as exc:
            self._send(handler, 400, {"error": str(exc)})
            return
        try:
            self.log.append(judgment)
        except DuplicateJudgmentError as exc:
            self._send(handler, 409, {"error": str(exc)})
            return
        except ValueError as exc:
            self._send(handler, 400, {"error": str(exc)})
            return
        self._send(handler, 201, {"accepted": True, "judgments": len(self.log)})

    def _static(self, handler, path: str) -> None:
        if self.static_dir is None:
            self._send(handler, 404, {"error": "no static directory configured"})
            return
        name = path.lstrip("/") or "index.html"
        target = (self.static_dir / name).resolve()
        if self.static_dir not in target.parents and target != self.static_dir:
            self._send(handler, 404, {"error": "not found"})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send(handler, 404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(handler, 200, target.read_bytes(), content_type=ctype)
