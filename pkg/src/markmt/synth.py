"""Synthetic tasks for end-to-end exercises at desk scale.

``make_two_domain_task`` builds a word-by-word translation problem with a
domain shift: a subset of source words is ambiguous, translating one way in
the general pretraining data (dominant sense) and another way in the
in-domain data.  A model pretrained on the general mix prefers the dominant
sense, so in-domain feedback — corrections, or markings that flag the
dominant-sense outputs — must move it to the in-domain sense.  This gives a
small task on which the relative merits of the feedback objectives are
measurable.

``simulate_effort_table`` produces effort measurements with known fixed
effects and per-group intercepts, for validating mixed-model fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary


@dataclass(frozen=True)
class TwoDomainTask:
    """Token-level corpora plus the vocabularies that encode them."""

    pretrain: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    train: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    dev: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    test: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    src_vocab: Vocabulary
    trg_vocab: Vocabulary

    def encode_pairs(
        self, pairs: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    ) -> list[tuple[list[int], list[int]]]:
        return [
            (self.src_vocab.encode(src), self.trg_vocab.encode(trg))
            for src, trg in pairs
        ]


def make_two_domain_task(
    seed: int = 0,
    n_words: int = 12,
    n_ambiguous: int = 4,
    n_pretrain: int = 2000,
    n_train: int = 500,
    n_dev: int = 100,
    n_test: int = 150,
    dominant_share: float = 0.85,
    min_len: int = 3,
    max_len: int = 6,
) -> TwoDomainTask:
    """Build the two-domain lexical-shift task.

    Source word ``s<i>`` translates to ``t<i>``; the first ``n_ambiguous``
    words instead translate to ``u<i>`` in the in-domain corpora, while the
    pretraining corpus shows ``t<i>`` with probability ``dominant_share``
    and ``u<i>`` otherwise (so the in-domain sense is reachable but
    dispreferred).
    """
    if not 0 < n_ambiguous <= n_words:
        raise ValueError("need 0 < n_ambiguous <= n_words")
    if not 0.5 < dominant_share < 1.0:
        raise ValueError("dominant_share must leave the general sense dominant")
    rng = np.random.default_rng(seed)

    def sentence() -> np.ndarray:
        length = int(rng.integers(min_len, max_len + 1))
        return rng.integers(0, n_words, size=length)

    def pretrain_pair() -> tuple[tuple[str, ...], tuple[str, ...]]:
        words = sentence()
        trg = []
        for w in words:
            if w < n_ambiguous and rng.random() >= dominant_share:
                trg.append(f"u{w}")
            else:
                trg.append(f"t{w}")
        return tuple(f"s{w}" for w in words), tuple(trg)

    def indomain_pair() -> tuple[tuple[str, ...], tuple[str, ...]]:
        words = sentence()
        trg = tuple(f"u{w}" if w < n_ambiguous else f"t{w}" for w in words)
        return tuple(f"s{w}" for w in words), trg

    pretrain = tuple(pretrain_pair() for _ in range(n_pretrain))
    train = tuple(indomain_pair() for _ in range(n_train))
    dev = tuple(indomain_pair() for _ in range(n_dev))
    test = tuple(indomain_pair() for _ in range(n_test))

    src_tokens = tuple(f"s{i}" for i in range(n_words))
    trg_tokens = tuple(f"t{i}" for i in range(n_words)) + tuple(
        f"u{i}" for i in range(n_ambiguous)
    )
    return TwoDomainTask(
        pretrain=pretrain,
        train=train,
        dev=dev,
        test=test,
        src_vocab=Vocabulary.from_tokens(src_tokens),
        trg_vocab=Vocabulary.from_tokens(trg_tokens),
    )


def simulate_effort_table(
    seed: int = 0,
    n_users: int = 10,
    n_talks: int = 30,
    sentences_per_cell: int = 3,
    mode_effect: float = 3.76,
    user_sd: float = 0.83,
    talk_sd: float = 0.73,
    residual_sd: float = 1.0,
    baseline: float = 10.0,
) -> list[dict]:
    """Effort rows with a known mode effect and random intercepts.

    Every (user, talk) cell contributes ``sentences_per_cell`` rows per
    mode, with response = baseline + effect[mode] + user offset +
    talk offset + noise.  The default effect raises the second mode by
    ``mode_effect`` over the first.
    """
    rng = np.random.default_rng(seed)
    user_offsets = rng.normal(0.0, user_sd, size=n_users)
    talk_offsets = rng.normal(0.0, talk_sd, size=n_talks)
    rows = []
    for u in range(n_users):
        for t in range(n_talks):
            for mode_index, mode in enumerate(("marking", "postedit")):
                for s in range(sentences_per_cell):
                    response = (
                        baseline
                        + mode_effect * mode_index
                        + user_offsets[u]
                        + talk_offsets[t]
                        + rng.normal(0.0, residual_sd)
                    )
                    rows.append(
                        {
                            "response": float(response),
                            "mode": mode,
                            "user_id": f"user{u}",
                            "talk_id": f"talk{t}",
                            "sentence": f"u{u}_t{t}_{mode}_{s}",
                        }
                    )
    return rows


def make_task_sentences(
    talk_ids, sentences_per_part: int = 3, seed: int = 0
):
    """A small annotation corpus covering every part of the given talks.

    Each sentence gets a word-by-word source, a hypothesis with one or two
    plausible token errors, and a reference, so effort normalization and
    marking simulation both have something to chew on.
    """
    from .planner import PARTS
    from .service import TaskSentence

    rng = np.random.default_rng(seed)
    nouns = ["talk", "slide", "speaker", "idea", "robot", "ocean", "laser", "cell"]
    sentences = []
    for talk_id in talk_ids:
        for part in PARTS:
            for index in range(sentences_per_part):
                length = int(rng.integers(4, 8))
                words = [nouns[int(rng.integers(len(nouns)))] for _ in range(length)]
                source = " ".join(f"src-{w}" for w in words)
                reference = " ".join(words)
                hyp_words = list(words)
                n_errors = int(rng.integers(0, 3))
                for _ in range(n_errors):
                    pos = int(rng.integers(length))
                    hyp_words[pos] = nouns[int(rng.integers(len(nouns)))]
                sentences.append(
                    TaskSentence(
                        sentence_id=f"{talk_id}_{part}_{index}",
                        talk_id=str(talk_id),
                        part=part,
                        source_text=source,
                        hypothesis_text=" ".join(hyp_words),
                        reference_text=reference,
                    )
                )
    return sentences
