"""Evaluation harness: transfer accuracy, meaning A/B protocol, fluency protocol.

Three evaluation axes for a two-style transfer system:

* automatic transfer accuracy, scored by a held-out style classifier that
  never saw the transfer model's training data;
* pairwise meaning preservation, collected from human annotators who see a
  source sentence and two blinded candidates and pick A, B, or "=" for no
  preference;
* fluency, rated per sentence on an integer scale from 1 (unreadable) to
  4 (perfect).

Annotation tasks carry a hidden system-identity mapping that is recorded
server-side and never serialized into the annotator-facing payload.
Aggregation functions unblind judgments against the task registry and
produce percentage/mean tables as JSON and aligned-column text. The
judgment log is append-only JSONL with serialized writes. Reference
results from the published large-scale experiments this desk-scale build
mirrors are kept as metadata in every report for context.
"""

from __future__ import annotations

import json
import threading
from collections import Counter

import numpy as np
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .lexicon import StyleLexicon

__all__ = [
    "MEANING",
    "FLUENCY",
    "SHORT_MAX_TOKENS",
    "LONG_MAX_TOKENS",
    "LARGE_SCALE_REFERENCE",
    "TransferReport",
    "AnnotationTask",
    "Judgment",
    "DuplicateJudgmentError",
    "JudgmentLog",
    "MeaningTable",
    "FluencyTable",
    "transfer_accuracy",
    "content_retention",
    "mean_content_retention",
    "corpus_stopwords",
    "make_tasks",
    "save_tasks",
    "load_tasks",
    "validate_verdict",
    "aggregate_meaning",
    "aggregate_fluency",
    "render_transfer_report",
    "render_meaning_table",
    "render_fluency_table",
]

MEANING = "meaning-AB"
FLUENCY = "fluency"

SHORT_MAX_TOKENS = 15
LONG_MAX_TOKENS = 30

# published large-scale results for the back-translation system and the
# cross-aligned autoencoder baseline, kept as report metadata for context
LARGE_SCALE_REFERENCE = {
    "transfer_accuracy": {
        "gender": {"cross-aligned-ae": 60.40, "back-translation": 57.04},
        "political": {"cross-aligned-ae": 75.82, "back-translation": 88.01},
        "sentiment": {"cross-aligned-ae": 80.43, "back-translation": 87.22},
    },
    "meaning_preference": {
        "gender": {"cross-aligned-ae": 15.23, "none": 41.36, "back-translation": 43.41},
        "political": {"cross-aligned-ae": 14.55, "none": 45.90, "back-translation": 39.55},
        "sentiment": {"cross-aligned-ae": 35.91, "none": 40.91, "back-translation": 23.18},
    },
    "fluency": {
        "gender": {"cross-aligned-ae": 2.42, "back-translation": 2.81},
        "political": {"cross-aligned-ae": 2.79, "back-translation": 2.87},
        "sentiment": {"cross-aligned-ae": 3.09, "back-translation": 3.18},
        "overall": {"cross-aligned-ae": 2.70, "back-translation": 2.91},
        "overall-short": {"cross-aligned-ae": 3.05, "back-translation": 3.11},
        "overall-long": {"cross-aligned-ae": 2.18, "back-translation": 2.62},
    },
    "classifier_accuracy": {"gender": 82.0, "political": 92.0, "sentiment": 93.23},
}

DEFAULT_PROMPTS = {
    MEANING: ("Which transferred sentence maintains the same semantic intent "
              "of the source sentence?"),
    FLUENCY: "Rate the fluency of the sentence from 1 (unreadable) to 4 (perfect).",
}


# ---------------------------------------------------------------------------
# transfer accuracy


@dataclass(frozen=True)
class TransferReport:
    """Per-direction and aggregate transfer accuracy plus content retention.

    Directions are named by target style: ``to_first`` counts outputs whose
    target is ``styles[0]``. Accuracies are fractions in [0, 1]; the
    aggregate is the count-weighted mean of the two directions. Retention
    is None until filled in by an evaluation stage.
    """

    styles: tuple[str, str]
    accuracy_to_first: float
    accuracy_to_second: float
    count_to_first: int
    count_to_second: int
    aggregate_accuracy: float
    content_retention: float | None = None

    def __post_init__(self):
        for name in ("accuracy_to_first", "accuracy_to_second", "aggregate_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        total = self.count_to_first + self.count_to_second
        if total <= 0:
            raise ValueError("report needs at least one scored output")
        weighted = (self.accuracy_to_first * self.count_to_first
                    + self.accuracy_to_second * self.count_to_second) / total
        if abs(weighted - self.aggregate_accuracy) > 1e-12:
            raise ValueError(
                f"aggregate {self.aggregate_accuracy} is not the weighted mean {weighted}")
        if self.content_retention is not None and not 0.0 <= self.content_retention <= 1.0:
            raise ValueError(f"content_retention must be in [0, 1], got {self.content_retention}")

    def with_retention(self, rate: float) -> "TransferReport":
        return replace(self, content_retention=rate)

    def as_dict(self) -> dict:
        directions = {
            f"{self.styles[1]}->{self.styles[0]}": {
                "accuracy": self.accuracy_to_first, "count": self.count_to_first},
            f"{self.styles[0]}->{self.styles[1]}": {
                "accuracy": self.accuracy_to_second, "count": self.count_to_second},
        }
        return {
            "styles": list(self.styles),
            "directions": directions,
            "aggregate_accuracy": self.aggregate_accuracy,
            "content_retention": self.content_retention,
            "reference": LARGE_SCALE_REFERENCE["transfer_accuracy"],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def transfer_accuracy(outputs: Sequence[Sequence[str]], target_styles: Sequence[str],
                      classifier) -> TransferReport:
    """Score generated sentences against their target styles.

    ``outputs`` are token sequences aligned with ``target_styles``; the
    classifier must be a held-out style classifier exposing ``styles`` and
    ``predict(tokens)``. Accuracy per direction is the fraction of outputs
    the classifier assigns to the target style; the aggregate is the
    count-weighted mean. Target tags outside the classifier's styles raise
    ValueError.
    """
    if len(outputs) != len(target_styles):
        raise ValueError(
            f"{len(outputs)} outputs but {len(target_styles)} target styles")
    if not outputs:
        raise ValueError("no outputs to score")
    styles = tuple(classifier.styles)
    unknown = sorted(set(target_styles) - set(styles))
    if unknown:
        raise ValueError(f"target styles {unknown} not among classifier styles {styles}")
    correct = {s: 0 for s in styles}
    count = {s: 0 for s in styles}
    for tokens, target in zip(outputs, target_styles):
        count[target] += 1
        if classifier.predict(list(tokens)) == target:
            correct[target] += 1

    def rate(style):
        return correct[style] / count[style] if count[style] else 0.0

    total = sum(count.values())
    return TransferReport(
        styles=styles,
        accuracy_to_first=rate(styles[0]),
        accuracy_to_second=rate(styles[1]),
        count_to_first=count[styles[0]],
        count_to_second=count[styles[1]],
        aggregate_accuracy=sum(correct.values()) / total,
    )


# ---------------------------------------------------------------------------
# content retention


def content_retention(source: Sequence[str], generated: Sequence[str],
                      lexicon: StyleLexicon,
                      stopwords: Iterable[str] = ()) -> float:
    """Fraction of the source's content tokens that survive into the output.

    Content tokens are those outside both style word lists and outside the
    stopword list. A source with no content tokens retains everything it
    has to retain, so the rate is 1.0. Both sentences must be nonempty.
    """
    if not source or not generated:
        raise ValueError("source and generated sentences must be nonempty")
    style_words = lexicon.l1_set | lexicon.l2_set
    stop = set(stopwords)

    def content(tokens):
        return {t for t in tokens if t not in style_words and t not in stop}

    src = content(source)
    if not src:
        return 1.0
    return len(src & content(generated)) / len(src)


def mean_content_retention(sources: Sequence[Sequence[str]],
                           outputs: Sequence[Sequence[str]],
                           lexicon: StyleLexicon,
                           stopwords: Iterable[str] = ()) -> float:
    """Mean of per-sentence content retention over aligned corpora."""
    if len(sources) != len(outputs):
        raise ValueError(f"{len(sources)} sources but {len(outputs)} outputs")
    if not sources:
        raise ValueError("no sentence pairs to score")
    stop = set(stopwords)
    rates = [content_retention(s, g, lexicon, stop) for s, g in zip(sources, outputs)]
    return sum(rates) / len(rates)


def corpus_stopwords(sentences: Iterable[Sequence[str]], k: int = 50) -> frozenset:
    """The k most frequent tokens across the corpus, ties broken by token."""
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    counts = Counter()
    for sent in sentences:
        counts.update(sent)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return frozenset(tok for tok, _ in ranked[:k])


# ---------------------------------------------------------------------------
# annotation tasks


@dataclass(frozen=True)
class AnnotationTask:
    """One blinded annotation item.

    ``hidden`` maps the presented slot ("A", and "B" for meaning tasks) to
    the system that produced the candidate; it lives only in server-side
    task files and never enters the annotator payload. ``seed`` records the
    generator seed of the batch that produced this task. The length bucket
    is computed from the source sentence: short is at most 15 tokens, long
    is 16 to 30.
    """

    task_id: str
    kind: str
    prompt: str
    source: str
    candidate_a: str
    candidate_b: str | None
    bucket: str
    hidden: Mapping[str, str] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (MEANING, FLUENCY):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == MEANING and self.candidate_b is None:
            raise ValueError("meaning tasks need two candidates")
        if self.kind == FLUENCY and self.candidate_b is not None:
            raise ValueError("fluency tasks have a single candidate")
        if self.bucket not in ("short", "long"):
            raise ValueError(f"unknown length bucket {self.bucket!r}")

    def verdict_domain(self) -> list:
        return ["A", "=", "B"] if self.kind == MEANING else [1, 2, 3, 4]

    def payload(self) -> dict:
        """Annotator-facing view: no field correlated with system identity."""
        candidates = {"A": self.candidate_a}
        if self.candidate_b is not None:
            candidates["B"] = self.candidate_b
        return {
            "task_id": self.task_id,
            "kind": self.kind,
            "prompt": self.prompt,
            "source": self.source,
            "candidates": candidates,
            "verdicts": self.verdict_domain(),
        }

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind,
            "prompt": self.prompt,
            "source": self.source,
            "candidate_a": self.candidate_a,
            "candidate_b": self.candidate_b,
            "bucket": self.bucket,
            "hidden": dict(self.hidden),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnotationTask":
        return cls(task_id=d["task_id"], kind=d["kind"], prompt=d["prompt"],
                   source=d["source"], candidate_a=d["candidate_a"],
                   candidate_b=d["candidate_b"], bucket=d["bucket"],
                   hidden=dict(d["hidden"]), seed=int(d["seed"]))


def _as_text(sentence) -> str:
    if isinstance(sentence, str):
        return sentence
    return " ".join(sentence)


def _length_bucket(source_text: str) -> str:
    n = len(source_text.split())
    if n <= SHORT_MAX_TOKENS:
        return "short"
    if n <= LONG_MAX_TOKENS:
        return "long"
    raise ValueError(
        f"source has {n} tokens; the protocol buckets only sentences up to "
        f"{LONG_MAX_TOKENS}")


def make_tasks(sources, outputs_a, outputs_b, kind: str, seed: int,
               system_a: str = "system-a", system_b: str = "system-b",
               prompt: str | None = None) -> list[AnnotationTask]:
    """Build blinded annotation tasks from aligned system outputs.

    For meaning tasks there is one task per source; a seeded coin decides
    which system is shown in slot A. For fluency tasks each (source,
    system) pair becomes its own single-candidate task and the combined
    list is shuffled with the same seeded generator. Misaligned lists raise
    ValueError. Sentences may be token sequences or plain strings.
    """
    if kind not in (MEANING, FLUENCY):
        raise ValueError(f"unknown task kind {kind!r}")
    if prompt is None:
        prompt = DEFAULT_PROMPTS[kind]
    src = [_as_text(s) for s in sources]
    out_a = [_as_text(s) for s in outputs_a]
    if len(src) != len(out_a):
        raise ValueError(f"{len(src)} sources but {len(out_a)} outputs for {system_a}")
    if kind == MEANING:
        if outputs_b is None:
            raise ValueError("meaning tasks need outputs from two systems")
        out_b = [_as_text(s) for s in outputs_b]
        if len(src) != len(out_b):
            raise ValueError(f"{len(src)} sources but {len(out_b)} outputs for {system_b}")
    else:
        out_b = [_as_text(s) for s in outputs_b] if outputs_b is not None else None
        if out_b is not None and len(src) != len(out_b):
            raise ValueError(f"{len(src)} sources but {len(out_b)} outputs for {system_b}")

    rng = np.random.default_rng(seed)
    tasks = []
    if kind == MEANING:
        for i, (s, a, b) in enumerate(zip(src, out_a, out_b)):
            a_first = bool(rng.random() < 0.5)
            cand_a, cand_b = (a, b) if a_first else (b, a)
            hidden = ({"A": system_a, "B": system_b} if a_first
                      else {"A": system_b, "B": system_a})
            tasks.append(AnnotationTask(
                task_id=f"ab-{i:04d}", kind=MEANING, prompt=prompt, source=s,
                candidate_a=cand_a, candidate_b=cand_b,
                bucket=_length_bucket(s), hidden=hidden, seed=seed))
    else:
        items = [(s, a, system_a) for s, a in zip(src, out_a)]
        if out_b is not None:
            items += [(s, b, system_b) for s, b in zip(src, out_b)]
        order = rng.permutation(len(items))
        for i, j in enumerate(order):
            s, cand, system = items[int(j)]
            tasks.append(AnnotationTask(
                task_id=f"fl-{i:04d}", kind=FLUENCY, prompt=prompt, source=s,
                candidate_a=cand, candidate_b=None,
                bucket=_length_bucket(s), hidden={"A": system}, seed=seed))
    return tasks


def save_tasks(path, tasks: Sequence[AnnotationTask]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"tasks": [t.to_dict() for t in tasks]}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_tasks(path) -> list[AnnotationTask]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [AnnotationTask.from_dict(d) for d in data["tasks"]]


# ---------------------------------------------------------------------------
# judgments


@dataclass(frozen=True)
class Judgment:
    """One annotator verdict for one task."""

    task_id: str
    annotator: str
    verdict: object
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "annotator": self.annotator,
                "verdict": self.verdict, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Judgment":
        missing = {"task_id", "annotator", "verdict"} - set(d)
        if missing:
            raise ValueError(f"judgment missing fields {sorted(missing)}")
        return cls(task_id=str(d["task_id"]), annotator=str(d["annotator"]),
                   verdict=d["verdict"], timestamp=str(d.get("timestamp", "")))


def validate_verdict(kind: str, verdict) -> object:
    """Check a verdict against its task kind and return the normalized value.

    Meaning verdicts are the strings "A", "B", or "=". Fluency verdicts are
    integers 1 to 4; booleans and out-of-range values are rejected.
    """
    if kind == MEANING:
        if verdict not in ("A", "B", "="):
            raise ValueError(f'meaning verdict must be "A", "B", or "=", got {verdict!r}')
        return verdict
    if kind == FLUENCY:
        if isinstance(verdict, bool) or not isinstance(verdict, int):
            raise ValueError(f"fluency verdict must be an integer, got {verdict!r}")
        if not 1 <= verdict <= 4:
            raise ValueError(f"fluency verdict must be in 1..4, got {verdict}")
        return verdict
    raise ValueError(f"unknown task kind {kind!r}")


class DuplicateJudgmentError(ValueError):
    """A (task, annotator) pair already has a judgment on record."""

    def __init__(self, task_id: str, annotator: str):
        super().__init__(f"annotator {annotator!r} already judged task {task_id!r}")
        self.task_id = task_id
        self.annotator = annotator


class JudgmentLog:
    """Append-only JSONL judgment store with serialized writes.

    When constructed with a task registry, appends validate the task id and
    the verdict domain for the task's kind. Duplicate (task, annotator)
    submissions raise DuplicateJudgmentError. Existing log lines are loaded
    at construction so a restarted service keeps rejecting duplicates.
    """

    def __init__(self, path, tasks: Sequence[AnnotationTask] | None = None):
        self.path = path
        self._lock = threading.Lock()
        self._tasks = {t.task_id: t for t in tasks} if tasks is not None else None
        self._records: list[Judgment] = []
        self._seen: set[tuple[str, str]] = set()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._admit(Judgment.from_dict(json.loads(line)))
        except FileNotFoundError:
            pass

    def _admit(self, judgment: Judgment) -> None:
        key = (judgment.task_id, judgment.annotator)
        if key in self._seen:
            raise DuplicateJudgmentError(*key)
        if self._tasks is not None:
            task = self._tasks.get(judgment.task_id)
            if task is None:
                raise ValueError(f"unknown task id {judgment.task_id!r}")
            validate_verdict(task.kind, judgment.verdict)
        self._records.append(judgment)
        self._seen.add(key)

    def append(self, judgment: Judgment) -> None:
        with self._lock:
            self._admit(judgment)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(judgment.to_dict(), sort_keys=True) + "\n")
                fh.flush()

    def judgments(self) -> list[Judgment]:
        with self._lock:
            return list(self._records)

    def judged_pairs(self) -> set[tuple[str, str]]:
        with self._lock:
            return set(self._seen)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


# ---------------------------------------------------------------------------
# aggregation


def _registry(tasks: Sequence[AnnotationTask]) -> dict[str, AnnotationTask]:
    return {t.task_id: t for t in tasks}


def _check_known(judgments: Sequence[Judgment], registry: Mapping[str, AnnotationTask]):
    for j in judgments:
        if j.task_id not in registry:
            raise ValueError(f"unknown task id {j.task_id!r}")


@dataclass(frozen=True)
class MeaningTable:
    """Preference percentages per system after unblinding.

    Each row maps to (percent preferring the first system, percent with no
    preference, percent preferring the second system); rows are "overall"
    plus any length bucket that received judgments. Percentages in a row
    sum to 100 within floating-point rounding.
    """

    systems: tuple[str, str]
    rows: Mapping[str, tuple[float, float, float]]
    counts: Mapping[str, int]

    def as_dict(self) -> dict:
        return {
            "systems": list(self.systems),
            "rows": {k: list(v) for k, v in self.rows.items()},
            "counts": dict(self.counts),
            "reference": LARGE_SCALE_REFERENCE["meaning_preference"],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def aggregate_meaning(judgments: Sequence[Judgment],
                      tasks: Sequence[AnnotationTask]) -> MeaningTable:
    """Unblind meaning judgments and tabulate preference percentages.

    Judgments on fluency tasks in the same log are ignored; judgments on
    unknown task ids raise ValueError. A verdict of "A" or "B" is credited
    to the system hidden behind that slot; "=" counts as no preference.
    """
    registry = _registry(tasks)
    _check_known(judgments, registry)
    relevant = [j for j in judgments if registry[j.task_id].kind == MEANING]
    if not relevant:
        raise ValueError("no meaning judgments to aggregate")
    systems = sorted({sys for t in tasks if t.kind == MEANING
                      for sys in t.hidden.values()})
    if len(systems) != 2:
        raise ValueError(f"meaning protocol compares exactly two systems, got {systems}")
    counts: dict[str, Counter] = {"overall": Counter()}
    for j in relevant:
        task = registry[j.task_id]
        verdict = validate_verdict(MEANING, j.verdict)
        choice = "none" if verdict == "=" else task.hidden[verdict]
        counts["overall"][choice] += 1
        counts.setdefault(task.bucket, Counter())[choice] += 1

    rows = {}
    row_counts = {}
    for name in ["overall"] + sorted(k for k in counts if k != "overall"):
        c = counts[name]
        total = sum(c.values())
        rows[name] = tuple(100.0 * c[key] / total
                           for key in (systems[0], "none", systems[1]))
        row_counts[name] = total
    return MeaningTable(systems=(systems[0], systems[1]), rows=rows, counts=row_counts)


@dataclass(frozen=True)
class FluencyTable:
    """Mean fluency ratings per system, overall and per length bucket."""

    systems: tuple[str, ...]
    rows: Mapping[str, tuple[float, ...]]
    counts: Mapping[str, tuple[int, ...]]

    def as_dict(self) -> dict:
        return {
            "systems": list(self.systems),
            "rows": {k: list(v) for k, v in self.rows.items()},
            "counts": {k: list(v) for k, v in self.counts.items()},
            "reference": LARGE_SCALE_REFERENCE["fluency"],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def aggregate_fluency(judgments: Sequence[Judgment],
                      tasks: Sequence[AnnotationTask]) -> FluencyTable:
    """Average fluency ratings per system after unblinding.

    Judgments on meaning tasks in the same log are ignored; unknown task
    ids and out-of-domain ratings raise ValueError. Rows are "overall"
    plus any length bucket that received judgments; a system with no
    ratings in a bucket reports the mean as nan for that cell.
    """
    registry = _registry(tasks)
    _check_known(judgments, registry)
    relevant = [j for j in judgments if registry[j.task_id].kind == FLUENCY]
    if not relevant:
        raise ValueError("no fluency judgments to aggregate")
    systems = tuple(sorted({t.hidden["A"] for t in tasks if t.kind == FLUENCY}))
    sums: dict[str, dict[str, list]] = {"overall": {s: [0.0, 0] for s in systems}}
    for j in relevant:
        task = registry[j.task_id]
        rating = validate_verdict(FLUENCY, j.verdict)
        system = task.hidden["A"]
        for name in ("overall", task.bucket):
            cell = sums.setdefault(name, {s: [0.0, 0] for s in systems})[system]
            cell[0] += rating
            cell[1] += 1

    rows = {}
    counts = {}
    for name in ["overall"] + sorted(k for k in sums if k != "overall"):
        cells = sums[name]
        rows[name] = tuple(cells[s][0] / cells[s][1] if cells[s][1] else float("nan")
                           for s in systems)
        counts[name] = tuple(cells[s][1] for s in systems)
    return FluencyTable(systems=systems, rows=rows, counts=counts)


# ---------------------------------------------------------------------------
# report rendering


def _render_columns(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    table = [list(headers)] + [list(r) for r in rows]
    widths = [max(len(row[c]) for row in table) for c in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        cells = [row[0].ljust(widths[0])]
        cells += [row[c].rjust(widths[c]) for c in range(1, len(row))]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_transfer_report(report: TransferReport) -> str:
    """Aligned-column text: one row per direction plus the aggregate."""
    s1, s2 = report.styles
    rows = [
        [f"{s2}->{s1}", f"{100.0 * report.accuracy_to_first:.2f}",
         str(report.count_to_first)],
        [f"{s1}->{s2}", f"{100.0 * report.accuracy_to_second:.2f}",
         str(report.count_to_second)],
        ["aggregate", f"{100.0 * report.aggregate_accuracy:.2f}",
         str(report.count_to_first + report.count_to_second)],
    ]
    text = "Accuracy of the style transfer in generated sentences\n"
    text += _render_columns(["direction", "accuracy", "count"], rows)
    if report.content_retention is not None:
        text += f"\ncontent retention  {100.0 * report.content_retention:.2f}"
    return text


def render_meaning_table(table: MeaningTable) -> str:
    """Aligned-column text: rows per bucket, columns per preference."""
    headers = ["bucket", table.systems[0], "no-pref", table.systems[1], "count"]
    rows = [[name, f"{row[0]:.2f}", f"{row[1]:.2f}", f"{row[2]:.2f}",
             str(table.counts[name])]
            for name, row in table.rows.items()]
    return ("Human preference for meaning preservation in percentages\n"
            + _render_columns(headers, rows))


def render_fluency_table(table: FluencyTable) -> str:
    """Aligned-column text: rows per bucket, one mean column per system."""
    headers = ["bucket"] + list(table.systems)
    rows = [[name] + [f"{v:.2f}" for v in vals] for name, vals in table.rows.items()]
    return "Fluency of the generated sentences\n" + _render_columns(headers, rows)
