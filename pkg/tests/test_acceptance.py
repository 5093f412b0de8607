"""Acceptance gate: one test per numbered product guarantee.

Run with ``pytest tests/test_acceptance.py -v`` for one pass/fail line per
guarantee. Guarantees 4-6 share a single synthetic-profile pipeline run
(session fixture, a few minutes on one core); everything else is
self-contained and fast.
"""

import json
import math
import time
import urllib.request

import numpy as np
import pytest

from gradcheck import check_gradients
from backstyle import kernel
from backstyle.config import PipelineConfig
from backstyle.corpus import ParallelCorpus, StyledCorpus, UNK_TOKEN, Vocabulary
from backstyle.evalharness import (
    FLUENCY,
    MEANING,
    aggregate_fluency,
    aggregate_meaning,
    corpus_stopwords,
    make_tasks,
    mean_content_retention,
    render_fluency_table,
    render_meaning_table,
    render_transfer_report,
    transfer_accuracy,
    JudgmentLog,
    TransferReport,
)
from backstyle.lexicon import CountTable, LogOddsConfig, StyleLexicon, log_odds_delta
from backstyle.pipeline import STAGES, load_transfer_outputs, run_all
from backstyle.seq2seq import (
    MTModel,
    corpus_bleu,
    encode,
    greedy_decode_ids,
    token_accuracy,
)
from backstyle.server import AnnotationServer
from backstyle.styletransfer import SoftSequence, StyleClassifier, copy_unk
from backstyle.kernel import Tensor

DESK_SEED = 100


# ---------------------------------------------------------------------------
# shared synthetic-profile pipeline run (guarantees 4, 5, 6)

@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk_run")
    config = PipelineConfig.desk(seed=DESK_SEED)
    times = {}
    for name, stage in STAGES.items():
        start = time.perf_counter()
        stage(config, root)
        times[name] = time.perf_counter() - start
    return {"root": root, "config": config.resolve(), "times": times,
            "total": sum(times.values())}


# ---------------------------------------------------------------------------
# guarantee 1: every differentiable kernel op passes finite-difference checks

def _weighted(out, w):
    return kernel.sum_all(kernel.mul(out, kernel.constant(w)))


def _unary(rng, op):
    a = rng.standard_normal((3, 4))
    w = rng.standard_normal((3, 4))
    return lambda ts: _weighted(op(ts[0]), w), [a]


def _binary(rng, op):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    w = rng.standard_normal((3, 4))
    return lambda ts: _weighted(op(ts[0], ts[1]), w), [a, b]


def _relu_case(rng):
    # inputs bounded away from the kink at zero
    a = rng.uniform(0.2, 1.5, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))
    w = rng.standard_normal((3, 4))
    return lambda ts: _weighted(kernel.relu(ts[0]), w), [a]


def _scale_case(rng):
    a = rng.standard_normal((3, 4))
    s = float(rng.uniform(0.5, 2.0))
    w = rng.standard_normal((3, 4))
    return lambda ts: _weighted(kernel.scale(ts[0], s), w), [a]


def _matmul_case(rng):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
    w = rng.standard_normal((3, 2))
    return lambda ts: _weighted(kernel.matmul(ts[0], ts[1]), w), [a, b]


def _concat_case(rng):
    arrays = [rng.standard_normal((2, 3)) for _ in range(3)]
    axis = int(rng.integers(0, 2))
    shape = (6, 3) if axis == 0 else (2, 9)
    w = rng.standard_normal(shape)
    return lambda ts: _weighted(kernel.concat(list(ts), axis=axis), w), arrays


def _stack_case(rng):
    arrays = [rng.standard_normal((2, 3)) for _ in range(4)]
    w = rng.standard_normal((2, 4, 3))
    return lambda ts: _weighted(kernel.stack_steps(list(ts), axis=1), w), arrays


def _reshape_case(rng):
    a = rng.standard_normal((3, 4))
    w = rng.standard_normal((2, 6))
    return lambda ts: _weighted(kernel.reshape(ts[0], (2, 6)), w), [a]


def _softmax_case(rng):
    a = rng.standard_normal((3, 5))
    tau = float(rng.uniform(0.5, 2.0))
    w = rng.standard_normal((3, 5))
    return lambda ts: _weighted(kernel.softmax_tau(ts[0], tau), w), [a]


def _xent_case(rng):
    logits = rng.standard_normal((4, 6))
    targets = rng.integers(0, 6, 4)
    reduction = "mean" if rng.random() < 0.5 else "sum"
    return (lambda ts: kernel.cross_entropy_logits(ts[0], targets, reduction),
            [logits])


def _embedding_case(rng):
    table = rng.standard_normal((7, 5))
    ids = rng.integers(0, 7, (2, 3))
    w = rng.standard_normal((2, 3, 5))
    return lambda ts: _weighted(kernel.embedding(ts[0], ids), w), [table]


def _lstm_case(rng):
    arrays = [rng.standard_normal(s) for s in
              ((2, 3), (2, 4), (2, 4), (3, 16), (4, 16), (16,))]
    wh_, wc_ = rng.standard_normal((2, 4)), rng.standard_normal((2, 4))

    def loss(ts):
        h, c = kernel.lstm_cell(*ts)
        return kernel.add(_weighted(h, wh_), _weighted(c, wc_))

    return loss, arrays


def _conv_case(rng):
    seq = rng.standard_normal((6, 4))
    weights = rng.standard_normal((3, 2, 4))
    bias = rng.standard_normal(3)
    w = rng.standard_normal(3)
    return (lambda ts: _weighted(kernel.conv1d_maxpool(ts[0], ts[1], ts[2]), w),
            [seq, weights, bias])


def _attn_scores_case(rng):
    q, states = rng.standard_normal((2, 4)), rng.standard_normal((2, 5, 4))
    w = rng.standard_normal((2, 5))
    return lambda ts: _weighted(kernel.attn_scores(ts[0], ts[1]), w), [q, states]


def _attn_context_case(rng):
    weights, states = rng.standard_normal((2, 5)), rng.standard_normal((2, 5, 4))
    w = rng.standard_normal((2, 4))
    return lambda ts: _weighted(kernel.attn_context(ts[0], ts[1]), w), [weights, states]


DIFFERENTIABLE_OPS = {
    "add": lambda rng: _binary(rng, kernel.add),
    "sub": lambda rng: _binary(rng, kernel.sub),
    "mul": lambda rng: _binary(rng, kernel.mul),
    "neg": lambda rng: _unary(rng, kernel.neg),
    "scale": _scale_case,
    "matmul": _matmul_case,
    "tanh": lambda rng: _unary(rng, kernel.tanh),
    "sigmoid": lambda rng: _unary(rng, kernel.sigmoid),
    "relu": _relu_case,
    "concat": _concat_case,
    "stack_steps": _stack_case,
    "reshape": _reshape_case,
    "sum_all": lambda rng: (lambda ts: kernel.sum_all(ts[0]),
                            [rng.standard_normal((3, 4))]),
    "mean_all": lambda rng: (lambda ts: kernel.mean_all(ts[0]),
                             [rng.standard_normal((3, 4))]),
    "softmax_tau": _softmax_case,
    "cross_entropy_logits": _xent_case,
    "embedding": _embedding_case,
    "lstm_cell": _lstm_case,
    "conv1d_maxpool": _conv_case,
    "attn_scores": _attn_scores_case,
    "attn_context": _attn_context_case,
}


def test_guarantee_01_gradient_suite_every_op():
    from backstyle.kernel import autodiff
    exported_ops = [n for n in autodiff.__all__
                    if n not in {"Tensor", "Graph", "NonFiniteError", "ShapeError",
                                 "no_grad", "constant", "backward"}]
    assert sorted(DIFFERENTIABLE_OPS) == sorted(exported_ops)

    start = time.perf_counter()
    worst = 0.0
    for k, (name, builder) in enumerate(sorted(DIFFERENTIABLE_OPS.items())):
        for i in range(20):
            rng = np.random.default_rng([41, k, i])
            build_loss, arrays = builder(rng)
            err = check_gradients(build_loss, arrays, eps=1e-5, tol=1e-4)
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    assert worst < 1e-4
    assert elapsed < 120.0, f"gradient suite took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# guarantee 2: log-odds scores equal a direct evaluation of the formula

def _brute_force_delta(ci, cj, bg):
    a0 = sum(bg.values())
    ni, nj = sum(ci.values()), sum(cj.values())
    out = {}
    for w in set(ci) | set(cj):
        aw = max(bg.get(w, 0), 1)
        yi, yj = ci.get(w, 0), cj.get(w, 0)
        out[w] = (math.log((yi + aw) / (ni + a0 - yi - aw))
                  - math.log((yj + aw) / (nj + a0 - yj - aw)))
    return out


def test_guarantee_02_log_odds_matches_brute_force():
    rng = np.random.default_rng(7)
    words = [f"word{i}" for i in range(12)]
    for trial in range(100):
        ci = {w: int(rng.integers(0, 30)) for w in rng.choice(words, 8, replace=False)}
        cj = {w: int(rng.integers(0, 30)) for w in rng.choice(words, 8, replace=False)}
        bg = {w: int(rng.integers(5, 60)) for w in words}
        ti, tj = CountTable(ci), CountTable(cj)
        config = LogOddsConfig(background=CountTable(bg))
        got = log_odds_delta(ti, tj, config)
        want = _brute_force_delta(ci, cj, bg)
        assert set(got) == set(want)
        for w in want:
            assert abs(got[w] - want[w]) <= 1e-12, (trial, w)
        flipped = log_odds_delta(tj, ti, config)
        for w in got:
            assert flipped[w] == -got[w], (trial, w)  # antisymmetry, exact


# ---------------------------------------------------------------------------
# guarantee 3: low-temperature softmax concentrates; hard/soft paths agree

def test_guarantee_03_relaxation_limit_and_classifier_consistency():
    rng = np.random.default_rng(13)
    for _ in range(50):
        logits = rng.standard_normal(20) * 2.0
        top = int(rng.integers(0, 20))
        logits[top] = logits.max() + 1.0  # gap >= 1 by construction
        probs = np.asarray(kernel.softmax_tau(Tensor(logits.reshape(1, -1)), 1e-3).data)[0]
        assert probs[top] > 0.999

    vocab = Vocabulary(["<pad>", "<bos>", "<eos>", "<unk>"]
                       + [f"t{i}" for i in range(12)])
    lex = StyleLexicon(("t0", "t1"), ("t2", "t3"),
                       {"t0": 2.0, "t1": 1.5, "t2": -2.0, "t3": -1.5})
    clf = StyleClassifier(vocab, lex, ("s1", "s2"), embed=10, filters=6,
                          width=3, seed=5)
    for trial in range(20):
        trial_rng = np.random.default_rng([17, trial])
        tokens = [f"t{int(i)}" for i in trial_rng.integers(0, 12, 6)]
        hard = clf.classify(tokens)
        ids = vocab.encode(tokens)
        rows = []
        for tok_id in ids:
            onehot = np.zeros(len(vocab))
            onehot[tok_id] = 1.0
            rows.append(kernel.constant(onehot))
        soft = clf.classify(SoftSequence(probs=rows, logits=rows, attention=[]))
        np.testing.assert_allclose(soft, hard, rtol=0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# guarantee 4: pivot MT quality on the bijection+reversal task

def _mt_heldout_scores(model, pairs):
    correct = total = 0
    hyp, ref = [], []
    for src, tgt in pairs:
        z = encode(src, model)
        c, t = token_accuracy(model.store, "dec", model.dims, z,
                              np.array([model.tgt_vocab.encode(tgt)]))
        correct += c
        total += t
        ids, _ = greedy_decode_ids(model.store, "dec", model.dims, z,
                                   model.dims.max_len)[0]
        hyp.append(model.tgt_vocab.decode(ids))
        ref.append(tgt)
    return correct / total, corpus_bleu(hyp, ref)


def test_guarantee_04_synthetic_mt_quality(desk_run):
    config = desk_run["config"]
    root = desk_run["root"]
    spec = config.synthetic
    assert spec.content_vocab_size + 2 * spec.markers_per_style + 4 <= 200
    assert spec.template_len[1] + spec.marker_count[1] <= 12
    assert spec.parallel_pairs == 5000
    assert config.mt.dims.hidden == 64

    heldout = ParallelCorpus.load_jsonl(root / "data" / "mt_heldout.jsonl")
    assert len(heldout) == config.mt_heldout_pairs
    for name, pairs in (("mt_ef", heldout.pairs),
                        ("mt_fe", heldout.reversed().pairs)):
        model = MTModel.load(root / "artifacts" / f"{name}.ckpt")
        acc, bleu = _mt_heldout_scores(model, pairs)
        assert acc >= 0.98, f"{name} held-out token accuracy {acc:.4f}"
        assert bleu >= 90.0, f"{name} held-out BLEU {bleu:.2f}"
    assert desk_run["times"]["train-mt"] <= 900.0


# ---------------------------------------------------------------------------
# guarantee 5: end-to-end style transfer quality

def test_guarantee_05_style_transfer_end_to_end(desk_run):
    config = desk_run["config"]
    root = desk_run["root"]
    heldout = StyleClassifier.load(root / "artifacts" / "classifier_heldout.ckpt")
    for split in ("dev", "test"):
        part = StyledCorpus.load_jsonl(root / "data" / f"{split}.jsonl")
        hits = sum(heldout.predict(s) == y
                   for s, y in zip(part.sentences, part.styles))
        acc = hits / len(part)
        assert acc >= 0.99, f"held-out classifier {split} accuracy {acc:.4f}"

    assert config.transfer.lambda_c == 15.0
    assert config.transfer.tau0 == 1.0 and config.transfer.tau_min == 1e-3

    rows = load_transfer_outputs(root / "reports" / "transfer_outputs.jsonl")
    outputs = [r["out"].split() for r in rows]
    targets = [r["target_style"] for r in rows]
    report = transfer_accuracy(outputs, targets, heldout)
    assert report.aggregate_accuracy >= 0.80, (
        f"aggregate transfer accuracy {report.aggregate_accuracy:.4f}")

    written = json.loads((root / "reports" / "transfer_report.json").read_text())
    assert written["aggregate_accuracy"] == report.aggregate_accuracy

    lex = StyleLexicon.load_jsonl(root / "artifacts" / "lexicon.jsonl")
    train_part = StyledCorpus.load_jsonl(root / "data" / "train.jsonl")
    stop = corpus_stopwords(train_part.sentences, k=config.stopword_k)
    sources = [r["src"].split() for r in rows]
    retention = mean_content_retention(sources, outputs, lex, stop)
    assert retention >= 0.70, f"mean content retention {retention:.4f}"
    assert written["content_retention"] == retention

    assert desk_run["total"] <= 1800.0, f"pipeline took {desk_run['total']:.0f}s"


# ---------------------------------------------------------------------------
# guarantee 6: L_gen decomposition is exact; the guidance classifier is frozen

def test_guarantee_06_loss_identity_and_frozen_classifier(desk_run):
    config = desk_run["config"]
    root = desk_run["root"]
    from backstyle.styletransfer import load_stats_jsonl
    records = load_stats_jsonl(root / "artifacts" / "style_stats.jsonl")
    assert len(records) >= 500
    lam = config.transfer.lambda_c
    gaps = [abs(r.l_gen - (r.l_recon + lam * r.l_class)) for r in records]
    assert max(gaps) == 0.0

    before = (root / "artifacts" / "classifier.ckpt").read_bytes()
    after = (root / "artifacts" / "classifier_post_style.ckpt").read_bytes()
    assert before == after


# ---------------------------------------------------------------------------
# guarantee 7: UNK copy replacement on constructed attention peaks

def test_guarantee_07_copy_mechanism_constructed_cases():
    rng = np.random.default_rng(23)
    checked = 0
    for case in range(50):
        src_len = 3 + case % 6
        source = [f"src{j}" for j in range(src_len)]
        out_len = 2 + case % 5
        unk_positions = {p for p in range(out_len) if (case + p) % 2 == 0}
        output = [UNK_TOKEN if t in unk_positions else f"gen{t}"
                  for t in range(out_len)]
        attention, expected = [], []
        for t in range(out_len):
            row = rng.uniform(0.0, 0.4, src_len)
            peak = (case * 7 + t) % src_len
            if case % 5 == 0 and src_len >= 2:
                # exact two-way tie; the smaller index must win
                other = (peak + 1) % src_len
                row[peak] = row[other] = 1.0
                want = source[min(peak, other)]
            else:
                row[peak] = 1.0
                want = source[peak]
            attention.append(row)
            expected.append(want if t in unk_positions else f"gen{t}")
        got = copy_unk(output, attention, source)
        assert got == expected, f"case {case}"
        for t in range(out_len):
            if t not in unk_positions:
                assert got[t] == output[t]
        checked += 1
    assert checked == 50


# ---------------------------------------------------------------------------
# guarantee 8: same-seed pipeline runs are byte-identical

def test_guarantee_08_reproducibility(tmp_path):
    config = PipelineConfig.micro(seed=21)
    roots = [tmp_path / "a", tmp_path / "b"]
    for root in roots:
        run_all(config, root)
    first = sorted(p.relative_to(roots[0])
                   for p in roots[0].rglob("*") if p.is_file())
    second = sorted(p.relative_to(roots[1])
                    for p in roots[1].rglob("*") if p.is_file())
    assert first == second and first
    for rel in first:
        assert (roots[0] / rel).read_bytes() == (roots[1] / rel).read_bytes(), rel


# ---------------------------------------------------------------------------
# guarantee 9: aggregation reproduces hand-computed tables from served logs

def _post_judgment(address, payload):
    req = urllib.request.Request(
        address + "/api/judgments", data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return resp.status


def _run_session(tasks, log_path, script):
    """POST every (annotator, task, verdict) triple to a live server."""
    srv = AnnotationServer(tasks, log_path).start()
    try:
        for annotator, task, verdict in script:
            status = _post_judgment(srv.address, {
                "task_id": task.task_id, "annotator": annotator,
                "verdict": verdict})
            assert status == 201
    finally:
        srv.close()
    return JudgmentLog(log_path, tasks).judgments()


def _slot_for(task, system):
    return next(k for k, v in task.hidden.items() if v == system)


def test_guarantee_09_protocol_aggregation_over_served_logs(tmp_path):
    short_src = [f"a{i}" for i in range(5)]
    long_src = [f"b{i}" for i in range(20)]

    # fixture log 1: meaning preferences, two annotators, known counts
    sources = [short_src] * 3 + [long_src] * 3
    outs_a = [s[:-1] + ["pa"] for s in sources]
    outs_b = [s[:-1] + ["pb"] for s in sources]
    tasks1 = make_tasks(sources, outs_a, outs_b, MEANING, seed=3,
                        system_a="sysa", system_b="sysb")
    votes = {  # by system name; "=" stays as-is
        "ann1": ["sysa", "sysa", "sysa", "=", "sysb", "sysb"],
        "ann2": ["sysa", "=", "=", "sysb", "sysb", "sysa"],
    }
    script = []
    for annotator, picks in votes.items():
        for task, pick in zip(tasks1, picks):
            verdict = pick if pick == "=" else _slot_for(task, pick)
            script.append((annotator, task, verdict))
    judgments = _run_session(tasks1, tmp_path / "log1.jsonl", script)
    table = aggregate_meaning(judgments, tasks1)
    assert table.systems == ("sysa", "sysb")
    # hand count: sysa 5/12, none 3/12, sysb 4/12; short 4/2/0 of 6;
    # long 1/1/4 of 6
    assert table.rows["overall"] == (100 * 5 / 12, 100 * 3 / 12, 100 * 4 / 12)
    assert table.rows["short"] == (100 * 4 / 6, 100 * 2 / 6, 0.0)
    assert table.rows["long"] == (100 * 1 / 6, 100 * 1 / 6, 100 * 4 / 6)
    assert table.counts == {"overall": 12, "short": 6, "long": 6}

    # fixture log 2: fluency ratings, two annotators, known means
    sources2 = [short_src, long_src]
    tasks2 = make_tasks(sources2, [s + ["p"] for s in sources2],
                        [s + ["q"] for s in sources2], FLUENCY, seed=4,
                        system_a="sysp", system_b="sysq")
    ratings = {("sysp", "short"): [4, 3], ("sysp", "long"): [3, 2],
               ("sysq", "short"): [2, 2], ("sysq", "long"): [1, 2]}
    script2 = []
    for task in tasks2:
        for idx, annotator in enumerate(("r1", "r2")):
            score = ratings[(task.hidden["A"], task.bucket)][idx]
            script2.append((annotator, task, score))
    judgments2 = _run_session(tasks2, tmp_path / "log2.jsonl", script2)
    fluency = aggregate_fluency(judgments2, tasks2)
    assert fluency.systems == ("sysp", "sysq")
    assert fluency.rows["overall"] == (12 / 4, 7 / 4)
    assert fluency.rows["short"] == (7 / 2, 4 / 2)
    assert fluency.rows["long"] == (5 / 2, 3 / 2)

    # fixture log 3: mixed kinds in one log; each aggregator filters its own
    tasks3m = make_tasks(sources2, [s + ["pa"] for s in sources2],
                         [s + ["pb"] for s in sources2], MEANING, seed=5,
                         system_a="sysp", system_b="sysq")
    tasks3f = make_tasks(sources2, [s + ["pa"] for s in sources2],
                         [s + ["pb"] for s in sources2], FLUENCY, seed=5,
                         system_a="sysp", system_b="sysq")
    tasks3 = tasks3m + tasks3f
    flu_scores = {("sysp", "short"): 4, ("sysp", "long"): 2,
                  ("sysq", "short"): 1, ("sysq", "long"): 3}
    script3 = [("solo", tasks3m[0], "="),
               ("solo", tasks3m[1], _slot_for(tasks3m[1], "sysq"))]
    script3 += [("solo", t, flu_scores[(t.hidden["A"], t.bucket)])
                for t in tasks3f]
    judgments3 = _run_session(tasks3, tmp_path / "log3.jsonl", script3)
    meaning3 = aggregate_meaning(judgments3, tasks3)
    assert meaning3.rows["overall"] == (0.0, 50.0, 50.0)
    assert meaning3.rows["short"] == (0.0, 100.0, 0.0)
    assert meaning3.rows["long"] == (0.0, 0.0, 100.0)
    fluency3 = aggregate_fluency(judgments3, tasks3)
    assert fluency3.rows["overall"] == (3.0, 2.0)
    assert fluency3.rows["short"] == (4.0, 1.0)
    assert fluency3.rows["long"] == (2.0, 3.0)

    # rendered layouts: caption, dashed header rule, one row per bucket
    meaning_text = render_meaning_table(table)
    lines = meaning_text.splitlines()
    assert lines[0] == "Human preference for meaning preservation in percentages"
    assert lines[1].split() == ["bucket", "sysa", "no-pref", "sysb", "count"]
    assert set(lines[2]) <= {"-", " "}
    assert [ln.split()[0] for ln in lines[3:]] == ["overall", "long", "short"]
    assert lines[3].split() == ["overall", "41.67", "25.00", "33.33", "12"]

    fluency_text = render_fluency_table(fluency)
    flines = fluency_text.splitlines()
    assert flines[0] == "Fluency of the generated sentences"
    assert flines[1].split() == ["bucket", "sysp", "sysq"]
    assert [ln.split()[0] for ln in flines[3:]] == ["overall", "long", "short"]
    assert flines[3].split() == ["overall", "3.00", "1.75"]

    report = TransferReport(styles=("s1", "s2"), accuracy_to_first=0.925,
                            accuracy_to_second=0.85, count_to_first=40,
                            count_to_second=40,
                            aggregate_accuracy=(0.925 * 40 + 0.85 * 40) / 80)
    rlines = render_transfer_report(report).splitlines()
    assert rlines[0] == "Accuracy of the style transfer in generated sentences"
    assert rlines[1].split() == ["direction", "accuracy", "count"]
    assert [ln.split()[0] for ln in rlines[3:]] == ["s2->s1", "s1->s2", "aggregate"]
    assert rlines[5].split() == ["aggregate", "88.75", "80"]
