"""Feedback signals over translation hypotheses.

Covers the three ways a per-token error signal comes into existence:
simulated markings (matching a hypothesis against a reference), random
markings (a noise baseline), and token diffs of human post-edits.  A flag
value of True always means "this hypothesis token is wrong".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ORIGINS = ("human", "simulated", "random")


@dataclass(frozen=True)
class Marking:
    """Per-token incorrectness flags for one hypothesis."""

    hypothesis_id: str
    flags: tuple[bool, ...]
    origin: str = "human"

    def __post_init__(self) -> None:
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown marking origin {self.origin!r}")


@dataclass(frozen=True)
class PostEdit:
    """A corrected hypothesis plus the derived per-token edit flags."""

    hypothesis_id: str
    edited_text: tuple[str, ...]
    edit_flags: tuple[bool, ...]

    @classmethod
    def from_tokens(
        cls, hypothesis_id: str, hyp: Sequence[str], edited: Sequence[str]
    ) -> "PostEdit":
        return cls(
            hypothesis_id=hypothesis_id,
            edited_text=tuple(edited),
            edit_flags=tuple(postedit_diff(hyp, edited)),
        )


@dataclass(frozen=True)
class ChoiceAnnotation:
    """One sentence annotated in the annotator's preferred mode."""

    hypothesis_id: str
    chosen_mode: str  # "marking" or "postedit"
    annotation: "Marking | PostEdit"

    def __post_init__(self) -> None:
        if self.chosen_mode not in ("marking", "postedit"):
            raise ValueError(f"unknown chosen mode {self.chosen_mode!r}")
        expected = Marking if self.chosen_mode == "marking" else PostEdit
        if not isinstance(self.annotation, expected):
            raise ValueError("annotation type does not match the chosen mode")


def _lcs_table(a: Sequence, b: Sequence) -> np.ndarray:
    """lcs[i, j] = LCS length of a[i:], b[j:]."""
    n, m = len(a), len(b)
    lcs = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                lcs[i, j] = lcs[i + 1, j + 1] + 1
            else:
                lcs[i, j] = max(lcs[i + 1, j], lcs[i, j + 1])
    return lcs


def simulate_markings(
    hyp: Sequence[str], ref: Sequence[str], hypothesis_id: str = ""
) -> Marking:
    """Mark every hypothesis token outside a longest common subsequence.

    Among multiple maximal alignments the choice is deterministic: at each
    tie the walk gives up the current hypothesis token first.  This
    convention keeps the flags stable when hypothesis and reference share a
    common suffix.
    """
    if not hyp or not ref:
        raise ValueError("hypothesis and reference must be non-empty")
    lcs = _lcs_table(hyp, ref)
    flags = [True] * len(hyp)
    i = j = 0
    while i < len(hyp) and j < len(ref):
        if lcs[i + 1, j] == lcs[i, j]:
            i += 1  # dispensable: some maximal alignment skips this token
        elif hyp[i] == ref[j]:
            flags[i] = False
            i += 1
            j += 1
        else:
            j += 1
    return Marking(hypothesis_id=hypothesis_id, flags=tuple(flags), origin="simulated")


def random_markings(
    hyp: Sequence[str], p_mark: float = 0.5, seed: int = 0, hypothesis_id: str = ""
) -> Marking:
    """Independent Bernoulli(p_mark) flags per token, seeded."""
    if not 0.0 <= p_mark <= 1.0:
        raise ValueError("p_mark must be in [0, 1]")
    rng = np.random.default_rng(seed)
    flags = rng.random(len(hyp)) < p_mark
    return Marking(hypothesis_id=hypothesis_id, flags=tuple(bool(f) for f in flags), origin="random")


def postedit_diff(hyp: Sequence[str], edited: Sequence[str]) -> list[bool]:
    """Which hypothesis tokens did a post-edit fail to preserve?

    Token-level Levenshtein alignment with unit costs; hypothesis tokens
    aligned as matches stay unflagged, substituted or deleted tokens are
    flagged, and insertions flag nothing.  Cost ties resolve preferring
    matches, then substitutions, then deletions, then insertions.
    """
    n, m = len(hyp), len(edited)
    # dist[i, j] = edit distance between hyp[i:] and edited[j:]
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, m] = np.arange(n, -1, -1)
    dist[n, :] = np.arange(m, -1, -1)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            sub = dist[i + 1, j + 1] + (0 if hyp[i] == edited[j] else 1)
            dist[i, j] = min(sub, dist[i + 1, j] + 1, dist[i, j + 1] + 1)
    flags = [True] * n
    i = j = 0
    while i < n or j < m:
        if i < n and j < m and hyp[i] == edited[j] and dist[i, j] == dist[i + 1, j + 1]:
            flags[i] = False
            i += 1
            j += 1
        elif i < n and j < m and dist[i, j] == dist[i + 1, j + 1] + 1:
            i += 1
            j += 1
        elif i < n and dist[i, j] == dist[i + 1, j] + 1:
            i += 1
        else:
            j += 1
    return flags


def correction_rate(feedback: Marking | PostEdit | Sequence[bool]) -> float:
    """Fraction of hypothesis tokens flagged incorrect or edited."""
    if isinstance(feedback, Marking):
        flags: Sequence[bool] = feedback.flags
    elif isinstance(feedback, PostEdit):
        flags = feedback.edit_flags
    else:
        flags = feedback
    if len(flags) == 0:
        raise ValueError("zero-length hypothesis has no correction rate")
    return float(sum(bool(f) for f in flags)) / len(flags)
