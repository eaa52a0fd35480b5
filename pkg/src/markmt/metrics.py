"""Translation quality and effort metrics.

BLEU and TER work on token sequences (evaluation is tokenized throughout).
TER follows the classic recipe: token-level edit distance plus a greedy
search over block shifts, each shift costing one edit.  KSMR normalizes
interaction effort by reference length.  ``approx_randomization`` provides
paired significance testing for any corpus-level metric.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

BLEU_MAX_ORDER = 4
# Standard limits for the TER shift search.
MAX_SHIFT_DISTANCE = 50
MAX_SHIFT_BLOCK = 10


@dataclass(frozen=True)
class EffortRecord:
    """Interaction effort spent on one sentence, with KSMR inputs."""

    sentence_id: str
    keystrokes: int
    mouse_actions: int
    duration_ms: float
    reference_chars: int

    def __post_init__(self) -> None:
        if min(self.keystrokes, self.mouse_actions, self.reference_chars) < 0:
            raise ValueError("effort counts must be non-negative")
        if self.duration_ms < 0:
            raise ValueError("duration must be non-negative")


# ---------------------------------------------------------------------------
# BLEU


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def bleu(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]
) -> float:
    """Corpus-level 4-gram BLEU in [0, 100] with brevity penalty.

    Smoothing: for orders n >= 2 with a zero clipped-match count, one is
    added to both numerator and denominator (so an order with no n-grams at
    all contributes a factor of 1).  A zero unigram precision or an empty
    hypothesis corpus scores 0.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    if any(len(r) == 0 for r in references):
        raise ValueError("references must be non-empty")
    matches = np.zeros(BLEU_MAX_ORDER, dtype=np.int64)
    totals = np.zeros(BLEU_MAX_ORDER, dtype=np.int64)
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, BLEU_MAX_ORDER + 1):
            hyp_counts = _ngram_counts(hyp, n)
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(
                min(c, ref_counts[g]) for g, c in hyp_counts.items()
            )
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_precision = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        m, t = int(matches[n - 1]), int(totals[n - 1])
        if n >= 2 and m == 0:
            m, t = m + 1, t + 1
        log_precision += np.log(m / t) / BLEU_MAX_ORDER
    brevity = min(0.0, 1.0 - ref_len / hyp_len)
    return float(100.0 * np.exp(brevity + log_precision))


# ---------------------------------------------------------------------------
# TER


def _edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    n, m = len(a), len(b)
    prev = np.arange(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return int(prev[m])


def _ref_blocks(ref: Sequence[str]) -> set[tuple[str, ...]]:
    blocks = set()
    for length in range(1, min(MAX_SHIFT_BLOCK, len(ref)) + 1):
        for start in range(len(ref) - length + 1):
            blocks.add(tuple(ref[start : start + length]))
    return blocks


def _best_shift(
    hyp: list[str], ref: Sequence[str], blocks: set[tuple[str, ...]], base: int
) -> tuple[int, list[str]] | None:
    """The single block shift most reducing edit distance, or None.

    Ties resolve to the shortest block, then leftmost source position, then
    leftmost destination; a block must match some reference block exactly
    and may move at most MAX_SHIFT_DISTANCE positions.
    """
    best: tuple[int, list[str]] | None = None
    for length in range(1, min(MAX_SHIFT_BLOCK, len(hyp)) + 1):
        for src in range(len(hyp) - length + 1):
            block = tuple(hyp[src : src + length])
            if block not in blocks:
                continue
            rest = hyp[:src] + hyp[src + length :]
            for dst in range(len(rest) + 1):
                if dst == src or abs(dst - src) > MAX_SHIFT_DISTANCE:
                    continue
                candidate = rest[:dst] + list(block) + rest[dst:]
                dist = _edit_distance(candidate, ref)
                if dist < base and (best is None or dist < best[0]):
                    best = (dist, candidate)
    return best


def ter_cost(
    hypothesis: Sequence[str], reference: Sequence[str], use_shifts: bool = True
) -> int:
    """Total TER edit cost: Levenshtein edits plus one per accepted shift."""
    if len(reference) == 0:
        raise ValueError("reference must be non-empty")
    current = list(hypothesis)
    edits = _edit_distance(current, reference)
    shifts = 0
    if use_shifts:
        blocks = _ref_blocks(reference)
        while edits > 0:
            found = _best_shift(current, reference, blocks, edits)
            if found is None:
                break
            edits, current = found
            shifts += 1
    return edits + shifts


def ter(
    hypothesis: Sequence[str], reference: Sequence[str], use_shifts: bool = True
) -> float:
    """Translation edit rate: (edits + shifts) / reference length."""
    return ter_cost(hypothesis, reference, use_shifts) / len(reference)


def corpus_ter(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]
) -> float:
    """Pooled TER: total edit cost over total reference length."""
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    costs = sum(ter_cost(h, r) for h, r in zip(hypotheses, references))
    return costs / sum(len(r) for r in references)


# ---------------------------------------------------------------------------
# KSMR


def ksmr(record: EffortRecord) -> float:
    """Keystroke-and-mouse actions per reference character."""
    if record.reference_chars == 0:
        raise ValueError("reference length must be positive")
    return (record.keystrokes + record.mouse_actions) / record.reference_chars


def merge_effort(records: Sequence[EffortRecord], sentence_id: str = "pooled") -> EffortRecord:
    """Pool effort records by summing all counts and durations."""
    if not records:
        raise ValueError("nothing to merge")
    merged = records[0]
    for rec in records[1:]:
        merged = replace(
            merged,
            keystrokes=merged.keystrokes + rec.keystrokes,
            mouse_actions=merged.mouse_actions + rec.mouse_actions,
            duration_ms=merged.duration_ms + rec.duration_ms,
            reference_chars=merged.reference_chars + rec.reference_chars,
        )
    return replace(merged, sentence_id=sentence_id)


def corpus_ksmr(records: Sequence[EffortRecord]) -> float:
    """Pooled KSMR: all actions over all reference characters."""
    return ksmr(merge_effort(records))


# ---------------------------------------------------------------------------
# Significance


def approx_randomization(
    scores_a: Sequence,
    scores_b: Sequence,
    metric: Callable[[Sequence], float] | None = None,
    n_shuffles: int = 1000,
    seed: int = 0,
) -> float:
    """Paired approximate-randomization p-value for metric(A) - metric(B).

    Each shuffle swaps every aligned pair with probability one half; the
    p-value is (1 + #{|delta_shuffled| >= |delta_observed|}) / (1 + n).
    ``metric`` reduces one system's per-segment entries to a corpus score
    (default: mean of floats), so pooled statistics like corpus TER can be
    tested by passing tuples plus a ratio-of-sums metric.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError("systems must be scored on the same segments")
    if n_shuffles < 1:
        raise ValueError("n_shuffles must be >= 1")
    if metric is None:
        metric = lambda xs: float(np.mean(xs))
    a = list(scores_a)
    b = list(scores_b)
    observed = abs(metric(a) - metric(b))
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_shuffles):
        swap = rng.random(len(a)) < 0.5
        sa = [y if s else x for x, y, s in zip(a, b, swap)]
        sb = [x if s else y for x, y, s in zip(a, b, swap)]
        if abs(metric(sa) - metric(sb)) >= observed:
            hits += 1
    return (1 + hits) / (1 + n_shuffles)
