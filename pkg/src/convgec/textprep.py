"""Parallel-corpus ingestion, BPE subword segmentation, and vocabularies.

BPE merges operate on plain character symbols; at segmentation time every
non-final subword of a word gets the ``@@`` continuation suffix, so joining
segmented text back ("@@ " removal) reproduces the original words. Input
words must not themselves end in the joiner string.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, CorpusError, ParseError

RESERVED = ("<pad>", "<s>", "</s>", "<unk>")
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
JOINER = "@@"

MERGE_FILE_HEADER = "#convgec-bpe v1 joiner=@@"


@dataclass
class ParallelCorpus:
    """Aligned (source tokens, target tokens) pairs, identity pairs removed."""

    pairs: list[tuple[list[str], list[str]]]
    read_count: int = 0
    kept_count: int = 0

    def __len__(self) -> int:
        return len(self.pairs)


def load_parallel(source_path: str | Path, target_path: str | Path) -> ParallelCorpus:
    """Read line-aligned files, whitespace-tokenize, drop unchanged pairs."""
    src_lines = Path(source_path).read_text(encoding="utf-8").splitlines()
    tgt_lines = Path(target_path).read_text(encoding="utf-8").splitlines()
    if len(src_lines) != len(tgt_lines):
        raise CorpusError(f"line-count mismatch: {len(src_lines)} source lines vs "
                          f"{len(tgt_lines)} target lines")
    pairs = []
    for s, t in zip(src_lines, tgt_lines):
        st, tt = s.split(), t.split()
        if st != tt:
            pairs.append((st, tt))
    return ParallelCorpus(pairs, read_count=len(src_lines), kept_count=len(pairs))


# ---------------------------------------------------------------------------
# BPE
# ---------------------------------------------------------------------------


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    joiner: str = JOINER
    _cache: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False)

    def segment_word(self, word: str) -> tuple[str, ...]:
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        symbols = list(word)
        for a, b in self.merges:
            if len(symbols) < 2:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        out = tuple(s + self.joiner for s in symbols[:-1]) + (symbols[-1],) if symbols else ()
        self._cache[word] = out
        return out


def learn_bpe(corpus: Iterable[Sequence[str]], num_merges: int) -> BpeModel:
    """Greedy most-frequent-pair merging; ties go to the lexicographically
    smaller pair, so the learned merge list is deterministic."""
    word_freq = Counter()
    for sentence in corpus:
        word_freq.update(sentence)
    if not word_freq:
        raise CorpusError("cannot learn BPE merges from an empty corpus")

    words = [list(w) for w in word_freq]
    freqs = list(word_freq.values())
    pair_counts: Counter = Counter()
    occurs: dict[tuple[str, str], set[int]] = {}
    for wid, syms in enumerate(words):
        f = freqs[wid]
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] += f
            occurs.setdefault(pair, set()).add(wid)

    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        best = None
        best_count = 0
        for pair, count in pair_counts.items():
            if count > best_count or (count == best_count and best is not None and pair < best):
                best, best_count = pair, count
        if best is None or best_count < 1:
            break
        merges.append(best)
        a, b = best
        for wid in sorted(occurs.get(best, ())):
            syms = words[wid]
            if not any(syms[i] == a and syms[i + 1] == b for i in range(len(syms) - 1)):
                continue  # stale index entry
            f = freqs[wid]
            for pair in zip(syms, syms[1:]):
                pair_counts[pair] -= f
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
            merged = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(syms[i])
                    i += 1
            words[wid] = merged
            for pair in zip(merged, merged[1:]):
                pair_counts[pair] += f
                occurs.setdefault(pair, set()).add(wid)
    return BpeModel(merges)


def apply_bpe(model: BpeModel, sentence: Sequence[str]) -> list[str]:
    """Segment each word by replaying merges in learned order."""
    out: list[str] = []
    for word in sentence:
        out.extend(model.segment_word(word))
    return out


def desegment(tokens: Sequence[str], joiner: str = JOINER) -> list[str]:
    """Undo apply_bpe: glue every joiner-suffixed token to its successor."""
    words: list[str] = []
    buffer = ""
    for tok in tokens:
        if len(tok) > len(joiner) and tok.endswith(joiner):
            buffer += tok[:-len(joiner)]
        else:
            words.append(buffer + tok)
            buffer = ""
    if buffer:
        words.append(buffer)
    return words


def save_merges(model: BpeModel, path: str | Path) -> None:
    lines = [MERGE_FILE_HEADER] + [f"{a} {b}" for a, b in model.merges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_merges(path: str | Path) -> BpeModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#convgec-bpe"):
        raise ParseError(f"{path}: missing BPE merge file header")
    merges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 'left right'")
        merges.append((parts[0], parts[1]))
    return BpeModel(merges)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


class Vocabulary:
    """Bidirectional token/index map with fixed reserved entries."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:len(RESERVED)]) != RESERVED:
            raise ConfigError(f"vocabulary must start with reserved entries {RESERVED}")
        self.tokens = list(tokens)
        self.lookup = {t: i for i, t in enumerate(self.tokens)}
        if len(self.lookup) != len(self.tokens):
            raise ConfigError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.lookup

    def index(self, token: str) -> int:
        return self.lookup.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


def build_vocab(corpus: Iterable[Sequence[str]], cap: int) -> Vocabulary:
    """Reserved entries, then tokens by descending frequency (ties
    lexicographic), truncated to cap."""
    if cap < len(RESERVED):
        raise ConfigError(f"vocabulary cap {cap} is below the {len(RESERVED)} reserved entries")
    freq = Counter()
    for sentence in corpus:
        freq.update(sentence)
    for r in RESERVED:
        freq.pop(r, None)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = list(RESERVED) + [t for t, _ in ranked[:cap - len(RESERVED)]]
    return Vocabulary(tokens)
