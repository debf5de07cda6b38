from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from convgec import metrics
from convgec.errors import ContractError, ParseError
from convgec.metrics import (EditAnnotation, extract_system_edits, f_beta, gleu,
                             levenshtein_ops, m2_score, parse_m2, sentence_edit_counts)

FIXTURES = Path(__file__).parent / "fixtures"


def edit_distance_oracle(src: tuple, hyp: tuple) -> int:
    """Independent recursive minimal edit distance."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j - 1) + (src[i - 1] != hyp[j - 1]),
                   d(i - 1, j) + 1, d(i, j - 1) + 1)

    return d(len(src), len(hyp))


def apply_edits(src: list[str], edits: list[EditAnnotation]) -> list[str]:
    out, pos = [], 0
    for e in sorted(edits, key=lambda e: (e.start, e.end)):
        out += src[pos:e.start]
        if e.replacement:
            out += e.replacement.split()
        pos = e.end
    return out + src[pos:]


class TestFBeta:
    # published precision/recall/F0.5 triples, percentages
    CASES = [(57.94, 16.48, 38.54), (58.38, 18.83, 41.11),
             (60.90, 23.74, 46.38), (65.49, 33.14, 54.79)]

    def test_reference_triples(self):
        for p, r, f in self.CASES:
            assert abs(100 * f_beta(p / 100, r / 100) - f) <= 0.01

    def test_symmetric_point(self):
        for x in (0.0, 0.25, 0.7, 1.0):
            assert f_beta(x, x) == pytest.approx(x)

    def test_monotone_in_each_argument(self):
        grid = np.linspace(0, 1, 21)
        for p in grid:
            vals = [f_beta(p, r) for r in grid]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        for r in grid:
            vals = [f_beta(p, r) for p in grid]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestEditExtraction:
    def test_identical_sequences(self):
        assert extract_system_edits("a b c".split(), "a b c".split()) == []

    def test_single_substitution(self):
        edits = extract_system_edits("He go to school .".split(), "He goes to school .".split())
        assert [e.key() for e in edits] == [(1, 2, "goes")]

    def test_single_append(self):
        edits = extract_system_edits("a b".split(), "a b c".split())
        assert [e.key() for e in edits] == [(2, 2, "c")]

    def test_adjacent_sub_and_insert_merge(self):
        edits = extract_system_edits("I am go school".split(), "I am going to school".split())
        assert [e.key() for e in edits] == [(2, 3, "going to")]

    def test_ops_cost_matches_oracle_and_edits_reconstruct(self):
        rng = np.random.default_rng(11)
        alphabet = list("abcde")
        for _ in range(200):
            src = [alphabet[i] for i in rng.integers(0, 5, rng.integers(0, 9))]
            hyp = [alphabet[i] for i in rng.integers(0, 5, rng.integers(0, 9))]
            ops = levenshtein_ops(src, hyp)
            cost = sum(op != "match" for op in ops)
            assert cost == edit_distance_oracle(tuple(src), tuple(hyp))
            assert apply_edits(src, extract_system_edits(src, hyp)) == hyp

    def test_swap_symmetry_of_counts(self):
        rng = np.random.default_rng(12)
        alphabet = list("abc")
        for _ in range(200):
            src = [alphabet[i] for i in rng.integers(0, 3, rng.integers(0, 8))]
            hyp = [alphabet[i] for i in rng.integers(0, 3, rng.integers(0, 8))]
            fwd = levenshtein_ops(src, hyp)
            rev = levenshtein_ops(hyp, src)
            assert fwd.count("sub") == rev.count("sub")
            assert fwd.count("del") == rev.count("ins")
            assert fwd.count("ins") == rev.count("del")


class TestM2Score:
    def test_perfect_single_edit(self):
        rep = m2_score([["He", "go", "."]], [["He", "goes", "."]],
                       [{0: [EditAnnotation(1, 2, "goes")]}])
        assert (rep.tp, rep.fp, rep.fn) == (1, 0, 0)
        assert rep.f05 == pytest.approx(1.0)

    def test_unchanged_hypothesis_zero_recall(self):
        gold = {0: [EditAnnotation(1, 2, "likes"), EditAnnotation(2, 3, "apples")]}
        rep = m2_score([["She", "like", "apple", "."]], [["She", "like", "apple", "."]], [gold])
        assert (rep.tp, rep.fp, rep.fn) == (0, 0, 2)
        assert rep.precision == 1.0 and rep.recall == 0.0 and rep.f05 == 0.0

    def test_handcrafted_suite_matches_hand_counts(self):
        entries = parse_m2((FIXTURES / "suite.m2").read_text())
        assert len(entries) == 10
        hyps = [
            "He goes to school .",
            "She like apple .",
            "I had a cat .",
            "This was fine .",
            "They were happy .",
            "A dog barks .",
            "I went to school .",
            "the cat sat .",
            "I am going to school .",
            "a x c e",
        ]
        rep = m2_score([e.source for e in entries], [h.split() for h in hyps],
                       [e.edits for e in entries])
        # hand-derived per sentence: TP (1,0,0,0,1,0,1,1,1,1), FP (0,0,1,1,0,0,0,0,0,1),
        # FN (0,2,1,0,0,0,0,0,0,1)
        assert (rep.tp, rep.fp, rep.fn) == (6, 3, 4)
        assert rep.precision == pytest.approx(6 / 9)
        assert rep.recall == pytest.approx(6 / 10)
        assert rep.f05 == pytest.approx(0.5 / (1 / 6 + 0.6))

    def test_order_invariance(self):
        entries = parse_m2((FIXTURES / "suite.m2").read_text())
        hyps = ["He goes to school .", "She like apple .", "I had a cat .", "This was fine .",
                "They were happy .", "A dog barks .", "I went to school .", "the cat sat .",
                "I am going to school .", "a x c e"]
        rng = np.random.default_rng(13)
        base = m2_score([e.source for e in entries], [h.split() for h in hyps],
                        [e.edits for e in entries])
        for _ in range(5):
            perm = rng.permutation(len(entries))
            rep = m2_score([entries[i].source for i in perm], [hyps[i].split() for i in perm],
                           [entries[i].edits for i in perm])
            assert (rep.tp, rep.fp, rep.fn) == (base.tp, base.fp, base.fn)

    def test_exact_gold_reproduction_scores_one(self):
        src = "The the cat sat .".split()
        gold_edits = [EditAnnotation(0, 1, "")]
        hyp = apply_edits(src, gold_edits)
        rep = m2_score([src], [hyp], [{0: gold_edits}])
        assert rep.precision == rep.recall == rep.f05 == 1.0

    def test_parse_errors_carry_line_numbers(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_m2("S a b\nA zero 1|||T|||x|||REQUIRED|||-NONE-|||0\n")
        with pytest.raises(ParseError, match="line 1"):
            parse_m2("A 0 1|||T|||x|||REQUIRED|||-NONE-|||0\n")

    def test_sentence_counts_with_duplicate_edits(self):
        sys = [EditAnnotation(0, 1, "x"), EditAnnotation(0, 1, "x")]
        gold = [EditAnnotation(0, 1, "x")]
        assert sentence_edit_counts(sys, gold) == (1, 1, 0)


class TestGleu:
    def test_all_identical_is_one(self):
        sents = [["the", "cat", "sat", "down"], ["a", "b", "c", "d", "e"]]
        assert gleu(sents, sents, [[s] for s in sents]) == pytest.approx(1.0)

    def test_hypothesis_equals_reference_single_change(self):
        src = [["the", "cat", "sat", "down"]]
        ref = [["a", "cat", "sat", "down"]]
        assert gleu(src, ref, [[ref[0]]]) == pytest.approx(1.0)

    def test_hand_counted_two_sentence_corpus(self):
        srcs = [["he", "go", "to", "school", "every", "day"], ["it", "rain", "today"]]
        refs = [[["he", "goes", "to", "school", "every", "day"]], [["it", "rains", "today"]]]
        hyps = [["he", "goes", "to", "school", "every", "night"], ["it", "rain", "today"]]
        # hand counts: p1=(5+1)/(6+3), p2=(4-2)/(5+2), p3=(3-1)/(4+1), p4=2/3, BP=1
        expected = (6 / 9 * 2 / 7 * 2 / 5 * 2 / 3) ** 0.25
        assert gleu(srcs, hyps, refs) == pytest.approx(expected, abs=1e-12)

    def test_empty_hypothesis_scores_zero(self):
        assert gleu([["a", "b", "c", "d"]], [[]], [[["a", "b", "c", "d"]]]) == 0.0

    def test_reference_beats_source_when_they_differ(self):
        srcs = [["he", "go", "to", "school", "every", "day"], ["it", "rain", "today"]]
        refs = [[["he", "goes", "to", "school", "every", "day"]], [["it", "rains", "today"]]]
        assert gleu(srcs, [r[0] for r in refs], refs) >= gleu(srcs, srcs, refs)

    def test_missing_references_rejected(self):
        with pytest.raises(ContractError):
            gleu([["a"]], [["a"]], [[]])
