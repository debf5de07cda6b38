"""Evaluation for correction systems: span-edit F0.5 against gold
annotations (M2 convention) and corpus GLEU for fluency.

System edits come from a deterministic minimal Levenshtein alignment with a
fixed backtrace preference (match > substitution > deletion > insertion),
with adjacent non-match operations merged into single span edits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError, ParseError


@dataclass(frozen=True)
class EditAnnotation:
    """One (span, replacement) edit over a tokenized source sentence.

    ``start == end`` marks an insertion. ``replacement`` is a space-joined
    token string, empty for deletions.
    """

    start: int
    end: int
    replacement: str
    type: str = "UNK"
    annotator: int = 0

    def key(self) -> tuple[int, int, str]:
        # Matching ignores the type label and annotator id.
        return (self.start, self.end, self.replacement)


@dataclass
class ScoreReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f05: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, beta: float = 0.5) -> "ScoreReport":
        p = tp / (tp + fp) if tp + fp > 0 else 1.0
        r = tp / (tp + fn) if tp + fn > 0 else 1.0
        return cls(tp, fp, fn, p, r, f_beta(p, r, beta))


def f_beta(p: float, r: float, beta: float = 0.5) -> float:
    """(1+β²)PR / (β²P + R), defined as 0 when both P and R are 0."""
    denom = beta * beta * p + r
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * p * r / denom


# ---------------------------------------------------------------------------
# Levenshtein alignment and edit extraction
# ---------------------------------------------------------------------------

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


def levenshtein_ops(source: list[str], hypothesis: list[str]) -> list[str]:
    """Minimal unit-cost alignment as an op sequence.

    Backtrace ties resolve as match > sub > del > ins, so the alignment is
    deterministic.
    """
    s, h = len(source), len(hypothesis)
    cost = [[0] * (h + 1) for _ in range(s + 1)]
    for i in range(1, s + 1):
        cost[i][0] = i
    for j in range(1, h + 1):
        cost[0][j] = j
    for i in range(1, s + 1):
        row, prev = cost[i], cost[i - 1]
        for j in range(1, h + 1):
            diag = prev[j - 1] + (0 if source[i - 1] == hypothesis[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    ops: list[str] = []
    i, j = s, h
    while i > 0 or j > 0:
        c = cost[i][j]
        if i > 0 and j > 0 and source[i - 1] == hypothesis[j - 1] and cost[i - 1][j - 1] == c:
            ops.append(MATCH)
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cost[i - 1][j - 1] + 1 == c:
            ops.append(SUB)
            i, j = i - 1, j - 1
        elif i > 0 and cost[i - 1][j] + 1 == c:
            ops.append(DEL)
            i -= 1
        else:
            ops.append(INS)
            j -= 1
    ops.reverse()
    return ops


def extract_system_edits(source: list[str], hypothesis: list[str]) -> list[EditAnnotation]:
    """Edits implied by the minimal alignment, adjacent non-matches merged."""
    edits: list[EditAnnotation] = []
    i = j = 0
    span_start = None
    repl: list[str] = []

    def flush(end: int) -> None:
        nonlocal span_start, repl
        if span_start is not None:
            edits.append(EditAnnotation(span_start, end, " ".join(repl)))
            span_start, repl = None, []

    for op in levenshtein_ops(source, hypothesis):
        if op == MATCH:
            flush(i)
            i += 1
            j += 1
        else:
            if span_start is None:
                span_start = i
            if op == SUB:
                repl.append(hypothesis[j])
                i += 1
                j += 1
            elif op == DEL:
                i += 1
            else:  # INS
                repl.append(hypothesis[j])
                j += 1
    flush(i)
    return edits


# ---------------------------------------------------------------------------
# M2 parsing and scoring
# ---------------------------------------------------------------------------


@dataclass
class M2Entry:
    source: list[str]
    # annotator id -> gold edits; an annotator with only a noop line has [].
    edits: dict[int, list[EditAnnotation]] = field(default_factory=dict)


def parse_m2(text: str) -> list[M2Entry]:
    """Parse M2 gold annotation text (S/A line blocks)."""
    entries: list[M2Entry] = []
    current: M2Entry | None = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip()
        if not line:
            current = None
            continue
        if line.startswith("S "):
            current = M2Entry(source=line[2:].split())
            entries.append(current)
        elif line.startswith("A "):
            if current is None:
                raise ParseError(f"line {lineno}: annotation before any source line")
            parts = line[2:].split("|||")
            if len(parts) < 6:
                raise ParseError(f"line {lineno}: expected 6 annotation fields, got {len(parts)}")
            try:
                start, end = (int(x) for x in parts[0].split())
                annotator = int(parts[5])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad span or annotator field") from exc
            etype = parts[1]
            replacement = "" if parts[2] == "-NONE-" else parts[2].strip()
            bucket = current.edits.setdefault(annotator, [])
            if etype.lower() == "noop" or (start, end) == (-1, -1):
                continue  # annotator registered with no edits
            if not (0 <= start <= end <= len(current.source)):
                raise ParseError(f"line {lineno}: span {start} {end} outside source of "
                                 f"{len(current.source)} tokens")
            bucket.append(EditAnnotation(start, end, replacement, etype, annotator))
        else:
            raise ParseError(f"line {lineno}: unrecognized M2 line {line[:20]!r}")
    return entries


def sentence_edit_counts(system: list[EditAnnotation],
                         gold: list[EditAnnotation]) -> tuple[int, int, int]:
    """(TP, FP, FN) by exact (start, end, replacement) matching."""
    sys_keys = Counter(e.key() for e in system)
    gold_keys = Counter(e.key() for e in gold)
    tp = sum(min(c, gold_keys[k]) for k, c in sys_keys.items())
    return tp, sum(sys_keys.values()) - tp, sum(gold_keys.values()) - tp


def m2_score(sources: list[list[str]], hypotheses: list[list[str]],
             gold: list[dict[int, list[EditAnnotation]]], beta: float = 0.5) -> ScoreReport:
    """Corpus P/R/F0.5 of hypotheses against per-annotator gold edits.

    Per sentence, the annotator whose gold set maximizes that sentence's own
    F-score is selected (ties: more TP, then fewer FN, then fewer FP, then
    lowest annotator id), and the chosen counts are summed corpus-level, so
    totals do not depend on sentence order.
    """
    if not (len(sources) == len(hypotheses) == len(gold)):
        raise ContractError(f"m2_score: got {len(sources)} sources, {len(hypotheses)} hypotheses, "
                            f"{len(gold)} gold entries")
    tp = fp = fn = 0
    for src, hyp, annots in zip(sources, hypotheses, gold):
        system = extract_system_edits(src, hyp)
        if not annots:
            annots = {0: []}
        best = None
        for aid in sorted(annots):
            s_tp, s_fp, s_fn = sentence_edit_counts(system, annots[aid])
            rep = ScoreReport.from_counts(s_tp, s_fp, s_fn, beta)
            key = (rep.f05, s_tp, -s_fn, -s_fp, -aid)
            if best is None or key > best[0]:
                best = (key, (s_tp, s_fp, s_fn))
        tp += best[1][0]
        fp += best[1][1]
        fn += best[1][2]
    return ScoreReport.from_counts(tp, fp, fn, beta)


# ---------------------------------------------------------------------------
# GLEU
# ---------------------------------------------------------------------------


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def gleu(sources: list[list[str]], hypotheses: list[list[str]],
         references: list[list[list[str]]], n_max: int = 4) -> float:
    """Corpus fluency score: modified n-gram precision where hypothesis
    n-grams matching the source but not the reference are subtracted, with a
    brevity penalty; single-pass corpus form, clamped to [0, 1].
    """
    if not (len(sources) == len(hypotheses) == len(references)):
        raise ContractError(f"gleu: got {len(sources)} sources, {len(hypotheses)} hypotheses, "
                            f"{len(references)} reference sets")
    if any(not refs for refs in references):
        raise ContractError("gleu: every sentence needs at least one reference")

    num = [0.0] * (n_max + 1)
    den = [0.0] * (n_max + 1)
    hyp_len = 0
    ref_len = 0
    for src, hyp, refs in zip(sources, hypotheses, references):
        hyp_len += len(hyp)
        ref_len += min((len(r) for r in refs), key=lambda L: (abs(L - len(hyp)), L))
        for n in range(1, n_max + 1):
            c_hyp = _ngrams(hyp, n)
            c_src = _ngrams(src, n)
            c_ref: Counter = Counter()
            for r in refs:
                for g, c in _ngrams(r, n).items():
                    c_ref[g] = max(c_ref[g], c)
            for g, c in c_hyp.items():
                ref_match = min(c, c_ref[g])
                src_match = min(c, c_src[g])
                num[n] += ref_match - max(0, src_match - ref_match)
            den[n] += sum(c_hyp.values())

    log_sum = 0.0
    orders = 0
    for n in range(1, n_max + 1):
        if den[n] == 0:
            continue  # corpus too short for this order
        p = max(num[n], 0.0) / den[n]
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
        orders += 1
    if orders == 0 or hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return min(1.0, max(0.0, bp * math.exp(log_sum / orders)))
