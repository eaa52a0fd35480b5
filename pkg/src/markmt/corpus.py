"""Text ingestion: tokenization, subword merges, vocabularies, batching.

The pipeline is plain-text -> whitespace/punctuation tokens -> subword
units (learned greedy pair merges with an end-of-word marker) -> integer
ids against a fixed vocabulary.  Everything here is deterministic and
purely functional; files are newline-delimited JSON.
"""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")

# end-of-word marker appended to the last character symbol of each token
EOW = "</w>"

POSITIONS = ("beginning", "middle", "end")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Split on whitespace, detaching leading/trailing punctuation.

    "Ich bin ein Künstler." -> [Ich, bin, ein, Künstler, .].  Word-internal
    punctuation (hyphens, apostrophes) stays attached.  Empty text gives an
    empty sequence.
    """
    tokens: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        trail: list[str] = []
        while chunk and _is_punct(chunk[0]):
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and _is_punct(chunk[-1]):
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


@dataclass(frozen=True)
class MergeTable:
    """Ordered subword merge operations; order is significant."""

    merges: tuple[tuple[str, str], ...] = ()

    @property
    def size(self) -> int:
        return len(self.merges)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#merges:{self.size}\n")
            for left, right in self.merges:
                f.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path: str | Path) -> "MergeTable":
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip()
            if not header.startswith("#merges:"):
                raise ValueError(f"bad merge table header: {header!r}")
            n = int(header.split(":", 1)[1])
            merges = []
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                left, right = line.split(" ")
                merges.append((left, right))
        if len(merges) != n:
            raise ValueError(f"merge table header says {n}, found {len(merges)}")
        return cls(merges=tuple(merges))


def word_to_symbols(word: str) -> tuple[str, ...]:
    """Character symbols of a word, the last one carrying the EOW marker."""
    if not word:
        return ()
    chars = list(word)
    chars[-1] = chars[-1] + EOW
    return tuple(chars)


def learn_bpe(corpus: Iterable[Sequence[str]], n_merges: int) -> MergeTable:
    """Learn greedy most-frequent-pair merges over within-token characters.

    Ties between equally frequent pairs are broken lexicographically
    (smallest pair wins) so two runs over the same corpus agree exactly.
    An empty corpus or n_merges=0 gives an empty table.
    """
    if n_merges < 0:
        raise ValueError("n_merges must be >= 0")
    word_freq: Counter[tuple[str, ...]] = Counter()
    for sent in corpus:
        for tok in sent:
            syms = word_to_symbols(tok)
            if syms:
                word_freq[syms] += 1

    merges: list[tuple[str, str]] = []
    words = dict(word_freq)
    for _ in range(n_merges):
        pair_freq: Counter[tuple[str, str]] = Counter()
        for syms, freq in words.items():
            for a, b in zip(syms, syms[1:]):
                pair_freq[(a, b)] += freq
        if not pair_freq:
            break
        best = min(pair_freq, key=lambda p: (-pair_freq[p], p))
        merges.append(best)
        words = {_merge_symbols(syms, best): f for syms, f in words.items()}
    return MergeTable(merges=tuple(merges))


def _merge_symbols(syms: Sequence[str], pair: tuple[str, str]) -> tuple[str, ...]:
    """Apply one merge left-to-right wherever the pair occurs."""
    a, b = pair
    out: list[str] = []
    i = 0
    while i < len(syms):
        if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return tuple(out)


def apply_bpe(table: MergeTable, tokens: Sequence[str]) -> list[str]:
    """Split tokens into subword units by replaying the merge table in order."""
    out: list[str] = []
    for tok in tokens:
        syms = word_to_symbols(tok)
        for pair in table.merges:
            if len(syms) < 2:
                break
            syms = _merge_symbols(syms, pair)
        out.extend(syms)
    return out


def un_bpe(subwords: Sequence[str]) -> list[str]:
    """Invert apply_bpe: glue subword units back into surface tokens."""
    tokens: list[str] = []
    current = ""
    for sym in subwords:
        if sym.endswith(EOW):
            tokens.append(current + sym[: -len(EOW)])
            current = ""
        else:
            current += sym
    if current:
        tokens.append(current)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Token <-> id mapping with the four special symbols at indices 0..3."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def specials(self) -> tuple[int, int, int, int]:
        return (PAD, UNK, BOS, EOS)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        """Map tokens to ids; unknown tokens become UNK."""
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.id_to_token:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            toks = [line.rstrip("\n") for line in f]
        while toks and toks[-1] == "":
            toks.pop()
        return cls.from_tokens(toks[len(SPECIAL_TOKENS):])

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        """Build a vocabulary from non-special tokens in the given order."""
        id_to_token = tuple(SPECIAL_TOKENS) + tuple(tokens)
        token_to_id = {t: i for i, t in enumerate(id_to_token)}
        if len(token_to_id) != len(id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        return cls(id_to_token=id_to_token, token_to_id=token_to_id)


def build_vocab(corpus: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """Keep the most frequent tokens, ties broken lexicographically.

    max_size counts the four specials, so it must exceed 4.
    """
    if max_size <= 4:
        raise ValueError("max_size must be > 4 to leave room for specials")
    freq: Counter[str] = Counter()
    for sent in corpus:
        freq.update(sent)
    kept = sorted(freq, key=lambda t: (-freq[t], t))[: max_size - 4]
    return Vocabulary.from_tokens(kept)


@dataclass(frozen=True)
class ParallelSentence:
    """One corpus unit: source ids, optional reference ids, provenance."""

    id: str
    source: tuple[int, ...]
    reference: tuple[int, ...] | None
    talk_id: str = ""
    position: str = "middle"
    topic: str = ""

    def __post_init__(self) -> None:
        if not self.source:
            raise ValueError(f"sentence {self.id}: empty source")
        if self.reference is not None and not self.reference:
            raise ValueError(f"sentence {self.id}: empty reference")
        if self.position not in POSITIONS:
            raise ValueError(f"sentence {self.id}: bad position {self.position!r}")

    def validate_against(self, src_vocab: Vocabulary, trg_vocab: Vocabulary) -> None:
        if any(i < 0 or i >= len(src_vocab) for i in self.source):
            raise ValueError(f"sentence {self.id}: source id out of vocabulary")
        if self.reference is not None and any(
            i < 0 or i >= len(trg_vocab) for i in self.reference
        ):
            raise ValueError(f"sentence {self.id}: reference id out of vocabulary")


def read_corpus_file(path: str | Path) -> list[dict]:
    """Read raw corpus records {id, src, trg?, talk_id, position, topic}."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "id" not in rec or "src" not in rec:
                raise ValueError(f"{path}:{lineno}: record needs 'id' and 'src'")
            records.append(rec)
    return records


def write_corpus_file(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def encode_corpus(
    records: Iterable[dict],
    merges: MergeTable,
    src_vocab: Vocabulary,
    trg_vocab: Vocabulary,
) -> list[ParallelSentence]:
    """Tokenize, subword-split and id-encode raw corpus records."""
    sentences = []
    for rec in records:
        src_ids = src_vocab.encode(apply_bpe(merges, tokenize(rec["src"])))
        trg = rec.get("trg")
        trg_ids = (
            tuple(trg_vocab.encode(apply_bpe(merges, tokenize(trg))))
            if trg is not None
            else None
        )
        sentences.append(
            ParallelSentence(
                id=str(rec["id"]),
                source=tuple(src_ids),
                reference=trg_ids,
                talk_id=rec.get("talk_id", ""),
                position=rec.get("position", "middle"),
                topic=rec.get("topic", ""),
            )
        )
    return sentences


def batch_iterator(
    items: Sequence, batch_size: int, seed: int | None = None
) -> Iterator[list]:
    """Yield batches; with a seed, order is a seeded shuffle, else as given."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(items))
    if seed is not None:
        np.random.default_rng(seed).shuffle(order)
    for start in range(0, len(items), batch_size):
        yield [items[int(i)] for i in order[start : start + batch_size]]
