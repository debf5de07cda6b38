"""Interpolated modified Kneser-Ney n-gram language model.

Counting conventions:
  * sentences are padded with (order-1) BOS tokens and one EOS;
  * n-grams ending in BOS are never stored (BOS is context-only);
  * the highest order uses raw counts; lower orders use continuation counts
    (number of distinct preceding words), except that BOS-initial n-grams
    keep raw counts since nothing can precede them;
  * per-order discounts D1/D2/D3+ come from the count-of-counts of the
    counts actually used at that order, with clamped fallbacks when the
    count-of-counts are degenerate.

Interpolation bottoms out in a uniform distribution over the closed
vocabulary plus the unknown and end-of-sentence tokens, so conditional
distributions sum to one for every context and unseen words keep mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusError, ParseError

BOS_WORD, EOS_WORD, UNK_WORD = "<s>", "</s>", "<unk>"


@dataclass
class NGramModel:
    order: int
    vocab: set
    vsize: int                                # |vocab ∪ {EOS, UNK}|
    used: list                                # per order k: {gram: count used at k}
    ctx_total: list                           # per order k: {context: Σ used}
    ctx_types: list                           # per order k: {context: (N1, N2, N3+)}
    discounts: list                           # per order k: (D1, D2, D3+)

    def _map(self, word: str) -> str:
        if word == BOS_WORD or word in self.vocab:
            return word
        return UNK_WORD

    def _p(self, k: int, ctx: tuple, word: str) -> float:
        d1, d2, d3 = self.discounts[k]
        if k == 1:
            denom = self.ctx_total[1][()]
            c = self.used[1].get((word,), 0)
            disc = 0.0 if c == 0 else (d1 if c == 1 else (d2 if c == 2 else d3))
            n1, n2, n3 = self.ctx_types[1][()]
            gamma = (d1 * n1 + d2 * n2 + d3 * n3) / denom
            return max(c - disc, 0.0) / denom + gamma / self.vsize
        total = self.ctx_total[k].get(ctx, 0)
        if total == 0:
            return self._p(k - 1, ctx[1:], word)
        c = self.used[k].get(ctx + (word,), 0)
        disc = 0.0 if c == 0 else (d1 if c == 1 else (d2 if c == 2 else d3))
        n1, n2, n3 = self.ctx_types[k][ctx]
        gamma = (d1 * n1 + d2 * n2 + d3 * n3) / total
        return max(c - disc, 0.0) / total + gamma * self._p(k - 1, ctx[1:], word)

    def prob(self, word: str, context: Sequence[str]) -> float:
        """p(word | context); context shorter than order-1 is BOS-padded."""
        w = self._map(word)
        ctx = tuple(self._map(t) for t in context)[-(self.order - 1):] if self.order > 1 else ()
        if self.order > 1 and len(ctx) < self.order - 1:
            ctx = (BOS_WORD,) * (self.order - 1 - len(ctx)) + ctx
        return self._p(self.order, ctx, w)

    def logprob(self, word: str, context: Sequence[str]) -> float:
        return math.log(self.prob(word, context))


def _estimate_discounts(counts: Iterable[int]) -> tuple[float, float, float]:
    n = [0, 0, 0, 0, 0]
    for c in counts:
        if 1 <= c <= 4:
            n[c] += 1
    n1, n2, n3, n4 = n[1], n[2], n[3], n[4]
    if n1 > 0 and n2 > 0:
        y = n1 / (n1 + 2 * n2)
        d1 = 1.0 - 2.0 * y * n2 / n1
        d2 = 2.0 - 3.0 * y * n3 / n2 if n2 > 0 else 1.0
        d3 = 3.0 - 4.0 * y * n4 / n3 if n3 > 0 else 1.5
    else:
        d1, d2, d3 = 0.5, 1.0, 1.5
    return (min(max(d1, 0.0), 1.0), min(max(d2, 0.0), 2.0), min(max(d3, 0.0), 3.0))


def train_lm(corpus: Sequence[Sequence[str]], order: int = 5) -> NGramModel:
    """Count all orders over BOS/EOS-padded sentences and estimate discounts."""
    total_words = sum(len(s) for s in corpus)
    if total_words < order:
        raise CorpusError(f"corpus of {total_words} tokens is smaller than order {order}")
    vocab = {w for s in corpus for w in s}

    raw = [None] + [dict() for _ in range(order)]
    for sentence in corpus:
        seq = [BOS_WORD] * (order - 1) + list(sentence) + [EOS_WORD]
        for k in range(1, order + 1):
            table = raw[k]
            for i in range(len(seq) - k + 1):
                gram = tuple(seq[i:i + k])
                if gram[-1] == BOS_WORD:
                    continue
                table[gram] = table.get(gram, 0) + 1

    used = [None] + [dict() for _ in range(order)]
    used[order] = raw[order]
    for k in range(1, order):
        cont = {}
        for gram in raw[k + 1]:
            suffix = gram[1:]
            cont[suffix] = cont.get(suffix, 0) + 1
        table = used[k]
        for gram, c in raw[k].items():
            table[gram] = c if gram[0] == BOS_WORD else cont.get(gram, 0)

    ctx_total = [None] + [dict() for _ in range(order)]
    ctx_types = [None] + [dict() for _ in range(order)]
    for k in range(1, order + 1):
        totals, types = ctx_total[k], ctx_types[k]
        for gram, c in used[k].items():
            ctx = gram[:-1]
            totals[ctx] = totals.get(ctx, 0) + c
            bucket = types.setdefault(ctx, [0, 0, 0])
            if c == 1:
                bucket[0] += 1
            elif c == 2:
                bucket[1] += 1
            elif c >= 3:
                bucket[2] += 1
        ctx_types[k] = {ctx: tuple(b) for ctx, b in types.items()}

    discounts = [None] + [_estimate_discounts(used[k].values()) for k in range(1, order + 1)]
    vsize = len(vocab | {EOS_WORD, UNK_WORD})
    return NGramModel(order, vocab, vsize, used, ctx_total, ctx_types, discounts)


def lm_feature(model: NGramModel, words: Sequence[str]) -> tuple[float, int]:
    """(Σ natural-log p(w_i | previous order-1 words), word count)."""
    context = [BOS_WORD] * (model.order - 1)
    total = 0.0
    for w in words:
        total += model.logprob(w, context)
        context = (context + [w])[-(model.order - 1):] if model.order > 1 else []
    return total, len(words)


def perplexity(model: NGramModel, corpus: Sequence[Sequence[str]]) -> float:
    """exp of mean negative log-prob over word and EOS events."""
    total, events = 0.0, 0
    for sentence in corpus:
        context = [BOS_WORD] * (model.order - 1)
        for w in list(sentence) + [EOS_WORD]:
            total += model.logprob(w, context)
            context = (context + [w])[-(model.order - 1):] if model.order > 1 else []
            events += 1
    return math.exp(-total / events) if events else float("inf")


# ---------------------------------------------------------------------------
# Textual interchange format (header with per-order counts, then
# "log10prob n-gram log10backoff" lines)
# ---------------------------------------------------------------------------


def save_arpa(model: NGramModel, path: str | Path) -> None:
    grams_at = [None] + [sorted(model.used[k]) for k in range(1, model.order + 1)]
    if (UNK_WORD,) not in model.used[1]:
        grams_at[1] = sorted(grams_at[1] + [(UNK_WORD,)])  # unseen-word mass
    lines = ["\\data\\"]
    for k in range(1, model.order + 1):
        lines.append(f"ngram {k}={len(grams_at[k])}")
    for k in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for gram in grams_at[k]:
            lp = math.log10(model._p(k, gram[:-1], gram[-1]))
            text = " ".join(gram)
            if k < model.order and model.ctx_total[k + 1].get(gram, 0) > 0:
                d1, d2, d3 = model.discounts[k + 1]
                n1, n2, n3 = model.ctx_types[k + 1][gram]
                bow = (d1 * n1 + d2 * n2 + d3 * n3) / model.ctx_total[k + 1][gram]
                lines.append(f"{lp:.17g}\t{text}\t{math.log10(bow):.17g}")
            else:
                lines.append(f"{lp:.17g}\t{text}")
    lines += ["", "\\end\\", ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")


class ArpaModel:
    """Backoff scorer over a saved model file (log10 storage, natural-log API)."""

    def __init__(self, order: int, probs: list, backoffs: list):
        self.order = order
        self.probs = probs        # per order k: {gram: log10 p}
        self.backoffs = backoffs  # per order k: {gram: log10 bow}

    def logprob(self, word: str, context: Sequence[str]) -> float:
        w = word if (word,) in self.probs[1] or word == BOS_WORD else UNK_WORD
        ctx = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        if self.order > 1 and len(ctx) < self.order - 1:
            ctx = (BOS_WORD,) * (self.order - 1 - len(ctx)) + ctx
        return self._score(ctx + (w,)) * math.log(10.0)

    def _score(self, gram: tuple) -> float:
        k = len(gram)
        hit = self.probs[k].get(gram)
        if hit is not None:
            return hit
        if k == 1:
            raise ParseError(f"word {gram[0]!r} missing from the unigram table")
        bow = self.backoffs[k - 1].get(gram[:-1], 0.0)
        return bow + self._score(gram[1:])


def load_arpa(path: str | Path) -> ArpaModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    order = 0
    probs = [None, {}]
    backoffs = [None, {}]
    section = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line in ("\\data\\", "\\end\\"):
            continue
        if line.startswith("ngram "):
            order += 1
            continue
        if line.endswith("-grams:"):
            section = int(line[1:line.index("-")])
            while len(probs) <= section:
                probs.append({})
                backoffs.append({})
            continue
        parts = line.split("\t")
        if section == 0 or len(parts) not in (2, 3):
            raise ParseError(f"{path}: line {lineno}: malformed n-gram entry")
        gram = tuple(parts[1].split(" "))
        if len(gram) != section:
            raise ParseError(f"{path}: line {lineno}: {len(gram)}-gram in {section}-gram section")
        probs[section][gram] = float(parts[0])
        if len(parts) == 3:
            backoffs[section][gram] = float(parts[2])
    if order == 0:
        raise ParseError(f"{path}: no ngram count declarations found")
    return ArpaModel(order, probs, backoffs)
