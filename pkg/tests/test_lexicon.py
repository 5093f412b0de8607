"""Log-odds scores against a brute-force oracle, lexicon construction, indicators."""

import math

import numpy as np
import pytest

from backstyle.corpus import SyntheticSpec, gen_synthetic
from backstyle.lexicon import (
    CountTable,
    LogOddsConfig,
    NumericalDomainError,
    StyleLexicon,
    build_style_lexicon,
    extract_lexicon,
    indicator_features,
    indicator_matrix,
    log_odds_delta,
)


def oracle_delta(yi, ni, yj, nj, aw, a0):
    """Independently coded evaluation: separate logs per numerator/denominator."""
    ti = math.log(yi + aw) - math.log(ni + a0 - yi - aw)
    tj = math.log(yj + aw) - math.log(nj + a0 - yj - aw)
    return ti - tj


def random_tables(rng, n_words=12, max_count=40):
    words = [f"w{i}" for i in range(n_words)]
    ci = {w: int(rng.integers(0, max_count)) for w in words}
    cj = {w: int(rng.integers(0, max_count)) for w in words}
    # give the background everything plus a little noise
    bg = {w: ci[w] + cj[w] + int(rng.integers(0, 5)) for w in words}
    return CountTable(ci), CountTable(cj), CountTable(bg)


class TestLogOddsDelta:
    def test_frozen_paper_style_example(self):
        ci = CountTable({"good": 5, "bad": 1})
        cj = CountTable({"good": 1, "bad": 5})
        bg = CountTable({"good": 6, "bad": 6})
        deltas = log_odds_delta(ci, cj, LogOddsConfig(bg))
        want = 2 * math.log(11.0 / 7.0)
        assert deltas["good"] == pytest.approx(want, abs=1e-12)
        assert deltas["bad"] == pytest.approx(-want, abs=1e-12)
        assert deltas["good"] == pytest.approx(0.90397, abs=1e-5)

    def test_equal_counts_give_zero(self):
        c = CountTable({"a": 3, "b": 7})
        deltas = log_odds_delta(c, c, LogOddsConfig(CountTable({"a": 6, "b": 14})))
        for d in deltas.values():
            assert d == 0.0

    def test_bruteforce_oracle_100_random_tables(self):
        rng = np.random.default_rng(200)
        for _ in range(100):
            ci, cj, bg = random_tables(rng)
            cfg = LogOddsConfig(bg)
            deltas = log_odds_delta(ci, cj, cfg)
            a0 = bg.total
            for w, d in deltas.items():
                aw = max(bg.get(w), 1.0)
                want = oracle_delta(ci.get(w), ci.total, cj.get(w), cj.total, aw, a0)
                assert d == pytest.approx(want, abs=1e-12)

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(201)
        for _ in range(100):
            ci, cj, bg = random_tables(rng)
            cfg = LogOddsConfig(bg)
            fwd = log_odds_delta(ci, cj, cfg)
            rev = log_odds_delta(cj, ci, cfg)
            for w in fwd:
                assert fwd[w] == -rev[w]  # bitwise exact

    def test_alpha_floored_for_background_absent_words(self):
        ci = CountTable({"rare": 2, "x": 10})
        cj = CountTable({"x": 5, "y": 5})
        bg = CountTable({"x": 8})  # "rare" absent: alpha floors to 1
        deltas = log_odds_delta(ci, cj, LogOddsConfig(bg))
        want = oracle_delta(2, 12, 0, 10, 1.0, 8)
        assert deltas["rare"] == pytest.approx(want, abs=1e-12)

    def test_monotone_in_own_count(self):
        rng = np.random.default_rng(202)
        for _ in range(25):
            ci, cj, bg = random_tables(rng, n_words=6)
            cfg = LogOddsConfig(bg)
            base = log_odds_delta(ci, cj, cfg)
            w = sorted(ci.counts)[0]
            bumped = dict(ci.counts)
            bumped[w] += 1
            after = log_odds_delta(CountTable(bumped), cj, cfg)
            assert after[w] > base[w]

    def test_degenerate_denominator_names_word(self):
        # y + alpha exceeds n + alpha_0 for the only word
        ci = CountTable({"solo": 10})
        cj = CountTable({"solo": 1})
        bg = CountTable({"solo": 2, "other": 1})
        # n_i + a0 - (y + aw) = 10 + 3 - (10 + 2) = 1 > 0: fine; shrink a0
        bad_bg = CountTable({"solo": 12})
        with pytest.raises(NumericalDomainError, match="solo"):
            log_odds_delta(ci, cj, LogOddsConfig(bad_bg))
        del bg

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            CountTable({"a": -1})


class TestBuildStyleLexicon:
    def test_simple_topk(self):
        lex = build_style_lexicon({"a": 2.0, "b": 1.0, "c": -1.0, "d": -2.0}, k=1)
        assert lex.l1 == ("a",) and lex.l2 == ("d",)

    def test_tie_breaks_lexicographic(self):
        lex = build_style_lexicon({"y": 2.0, "x": 2.0, "c": -1.0, "d": -2.0}, k=1)
        assert lex.l1 == ("x",)

    def test_zero_delta_excluded_when_enough_nonzero(self):
        deltas = {"a": 1.0, "b": 0.5, "c": -0.5, "d": -1.0, "z1": 0.0, "z2": 0.0}
        lex = build_style_lexicon(deltas, k=2)
        assert "z1" not in lex.l1 + lex.l2 and "z2" not in lex.l1 + lex.l2

    def test_zero_delta_allowed_when_needed_and_disjoint(self):
        deltas = {"a": 1.0, "b": -1.0, "z1": 0.0, "z2": 0.0}
        lex = build_style_lexicon(deltas, k=2)
        assert set(lex.l1) & set(lex.l2) == set()
        assert len(lex.l1) == len(lex.l2) == 2

    def test_too_few_words(self):
        with pytest.raises(ValueError, match="at least"):
            build_style_lexicon({"a": 1.0, "b": -1.0}, k=2)

    def test_disjoint_enforced_in_type(self):
        with pytest.raises(ValueError, match="disjoint"):
            StyleLexicon(("a",), ("a",))

    def test_synthetic_markers_dominate(self):
        spec = SyntheticSpec(parallel_pairs=10, styled_sentences=600, template_count=50)
        _, styled = gen_synthetic(spec, seed=21)
        s1 = styled.by_style("s1")
        s2 = styled.by_style("s2")
        k = spec.markers_per_style
        lex = extract_lexicon(s1, s2, k)
        assert set(lex.l1) == set(spec.markers(0))
        assert set(lex.l2) == set(spec.markers(1))


class TestIndicators:
    LEX = StyleLexicon(("alpha", "beta"), ("gamma",))

    def test_hard_indicators(self):
        np.testing.assert_array_equal(indicator_features("alpha", self.LEX), [1.0, 0.0])
        np.testing.assert_array_equal(indicator_features("gamma", self.LEX), [0.0, 1.0])
        np.testing.assert_array_equal(indicator_features("other", self.LEX), [0.0, 0.0])

    def test_matrix_rows_match_scalar(self):
        toks = ["alpha", "other", "gamma", "beta"]
        m = indicator_matrix(toks, self.LEX)
        for i, t in enumerate(toks):
            np.testing.assert_array_equal(m[i], indicator_features(t, self.LEX))

    def test_soft_expectation_by_hand(self):
        vocab = ["alpha", "plain", "gamma"]
        m = indicator_matrix(vocab, self.LEX)
        p = np.array([0.5, 0.5, 0.0])
        np.testing.assert_allclose(p @ m, [0.5, 0.0], atol=1e-15)

    def test_one_hot_soft_equals_hard(self):
        vocab = ["alpha", "plain", "gamma"]
        m = indicator_matrix(vocab, self.LEX)
        for i, t in enumerate(vocab):
            p = np.zeros(3)
            p[i] = 1.0
            np.testing.assert_array_equal(p @ m, indicator_features(t, self.LEX))


class TestLexiconIO:
    def test_roundtrip(self, tmp_path):
        lex = StyleLexicon(("hot", "warm"), ("cold",), {"hot": 2.0, "warm": 1.0, "cold": -3.0})
        path = tmp_path / "lex.jsonl"
        lex.save_jsonl(path)
        back = StyleLexicon.load_jsonl(path)
        assert back.l1 == lex.l1 and back.l2 == lex.l2
        assert back.deltas == lex.deltas

    def test_sorted_by_abs_delta(self, tmp_path):
        lex = StyleLexicon(("hot", "warm"), ("cold",), {"hot": 2.0, "warm": 1.0, "cold": -3.0})
        path = tmp_path / "lex.jsonl"
        lex.save_jsonl(path)
        import json

        rows = [json.loads(l) for l in path.read_text().splitlines()]
        mags = [abs(r["delta"]) for r in rows]
        assert mags == sorted(mags, reverse=True)

    def test_bad_side_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"word": "x", "delta": 1.0, "side": "s3"}\n')
        with pytest.raises(ValueError, match="side"):
            StyleLexicon.load_jsonl(path)
