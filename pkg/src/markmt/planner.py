"""Assignment of talk parts to annotators and modes.

Every talk splits into three parts (beginning, middle, end) that must each
be annotated exactly once, in three distinct modes.  Every annotator works
nine parts: three per mode, three per position, spread over as many
distinct talks as the instance allows (at most ceil(9 / n_talks) parts per
talk, which is the strict no-repeat rule whenever there are at least nine
talks).  Across the whole plan no single mode may cover more than half of
any position, which rules out degenerate patterns such as post-editing
every beginning.

Plans are found by seeded randomized backtracking with count-based
propagation: the same seed always yields the same plan, and shuffled value
orders keep the solutions varied across seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

PARTS = ("beginning", "middle", "end")
MODES = ("postedit", "marking", "choice")
MODE_ORDER = ("postedit", "marking", "choice")
PARTS_PER_ANNOTATOR = 9
PER_MODE = 3
PER_POSITION = 3


class InfeasibleError(ValueError):
    """No assignment satisfies the constraints for this instance."""


@dataclass(frozen=True)
class PlanEntry:
    talk_id: str
    part: str
    annotator_id: str
    mode: str


@dataclass(frozen=True)
class AssignmentPlan:
    entries: tuple[PlanEntry, ...]

    def annotators(self) -> list[str]:
        return sorted({entry.annotator_id for entry in self.entries})

    def talks(self) -> list[str]:
        return sorted({entry.talk_id for entry in self.entries})

    def for_annotator(self, annotator_id: str) -> list[PlanEntry]:
        return [e for e in self.entries if e.annotator_id == annotator_id]


@dataclass(frozen=True)
class QueueBlock:
    """One block of an annotator's work queue."""

    kind: str  # "work" or "agreement"
    mode: str  # the annotation mode (for agreement: the mode it follows)
    pass_label: str  # "main" or "repeat_1" / "repeat_2" / "repeat_3"
    items: tuple


def talk_repeat_cap(n_talks: int) -> int:
    """How many parts of one talk a single annotator may take.

    1 (no talk twice) whenever there are at least nine talks; toy instances
    with fewer talks than parts-per-annotator force repeats.
    """
    return max(1, math.ceil(PARTS_PER_ANNOTATOR / n_talks))


def assign(
    talk_ids: Sequence[str],
    annotator_ids: Sequence[str],
    seed: int = 0,
    max_steps: int = 200_000,
    max_restarts: int = 25,
) -> AssignmentPlan:
    """Find a valid plan by seeded randomized backtracking."""
    talks = [str(t) for t in talk_ids]
    annotators = [str(a) for a in annotator_ids]
    if not talks or not annotators:
        raise InfeasibleError("need at least one talk and one annotator")
    if len(set(talks)) != len(talks):
        raise ValueError("duplicate talk ids")
    if len(set(annotators)) != len(annotators):
        raise ValueError("duplicate annotator ids")
    n_parts = 3 * len(talks)
    n_slots = PARTS_PER_ANNOTATOR * len(annotators)
    if n_parts != n_slots:
        raise InfeasibleError(
            f"exact cover impossible: {len(talks)} talks provide {n_parts} parts "
            f"but {len(annotators)} annotators need {n_slots}"
        )

    rng = np.random.default_rng(seed)
    for _ in range(max_restarts):
        entries = _search(talks, annotators, rng, max_steps)
        if entries is not None:
            ordered = sorted(entries, key=lambda e: (e.talk_id, PARTS.index(e.part)))
            return AssignmentPlan(entries=tuple(ordered))
    raise InfeasibleError(
        f"no valid plan found for {len(talks)} talks x {len(annotators)} annotators "
        f"after {max_restarts} restarts of {max_steps} steps"
    )


def _search(talks, annotators, rng, max_steps):
    n_talks, n_annotators = len(talks), len(annotators)
    cap = talk_repeat_cap(n_talks)
    guard = n_talks / 2.0
    all_perms = list(permutations(range(3)))

    talk_order = [int(i) for i in rng.permutation(n_talks)]
    perm_orders = [[all_perms[int(i)] for i in rng.permutation(6)] for _ in talks]
    annotator_orders = [
        [int(i) for i in rng.permutation(n_annotators)] for _ in talks
    ]

    total = [0] * n_annotators
    mode_count = [[0] * 3 for _ in range(n_annotators)]
    pos_count = [[0] * 3 for _ in range(n_annotators)]
    talk_count = [[0] * n_talks for _ in range(n_annotators)]
    mp_count = [[0] * 3 for _ in range(3)]  # mp_count[mode][position]
    assignment: dict[tuple[int, int], tuple[int, int]] = {}  # (talk, pos) -> (annot, mode)
    steps = 0

    def counts_admit(done: int) -> bool:
        remaining = n_talks - done
        for m in range(3):
            if sum(PER_MODE - mode_count[a][m] for a in range(n_annotators)) < remaining:
                return False
        for p in range(3):
            if sum(PER_POSITION - pos_count[a][p] for a in range(n_annotators)) < remaining:
                return False
        return all(
            PARTS_PER_ANNOTATOR - total[a] <= remaining * cap
            for a in range(n_annotators)
        )

    def place_part(ti: int, perm, pos: int) -> bool:
        nonlocal steps
        if pos == 3:
            return place_talk(ti + 1)
        talk = talk_order[ti]
        mode = perm[pos]
        for a in annotator_orders[talk]:
            steps += 1
            if steps > max_steps:
                return False
            if (
                total[a] < PARTS_PER_ANNOTATOR
                and talk_count[a][talk] < cap
                and mode_count[a][mode] < PER_MODE
                and pos_count[a][pos] < PER_POSITION
            ):
                total[a] += 1
                mode_count[a][mode] += 1
                pos_count[a][pos] += 1
                talk_count[a][talk] += 1
                assignment[talk, pos] = (a, mode)
                if place_part(ti, perm, pos + 1):
                    return True
                total[a] -= 1
                mode_count[a][mode] -= 1
                pos_count[a][pos] -= 1
                talk_count[a][talk] -= 1
                del assignment[talk, pos]
            if steps > max_steps:
                return False
        return False

    def place_talk(ti: int) -> bool:
        if ti == n_talks:
            return True
        if not counts_admit(ti):
            return False
        talk = talk_order[ti]
        for perm in perm_orders[talk]:
            if any(mp_count[perm[p]][p] + 1 > guard for p in range(3)):
                continue
            for p in range(3):
                mp_count[perm[p]][p] += 1
            if place_part(ti, perm, 0):
                return True
            for p in range(3):
                mp_count[perm[p]][p] -= 1
            if steps > max_steps:
                return False
        return False

    if not place_talk(0):
        return None
    return [
        PlanEntry(
            talk_id=talks[talk],
            part=PARTS[pos],
            annotator_id=annotators[annot],
            mode=MODES[mode],
        )
        for (talk, pos), (annot, mode) in assignment.items()
    ]


def verify_assignment(plan: AssignmentPlan) -> list[str]:
    """All constraint violations in the plan; an empty list means valid."""
    violations: list[str] = []
    entries = plan.entries
    for entry in entries:
        if entry.part not in PARTS:
            violations.append(f"unknown-part: {entry.part!r} in talk {entry.talk_id}")
        if entry.mode not in MODES:
            violations.append(f"unknown-mode: {entry.mode!r} in talk {entry.talk_id}")

    talks = plan.talks()
    seen: dict[tuple[str, str], int] = {}
    for entry in entries:
        seen[entry.talk_id, entry.part] = seen.get((entry.talk_id, entry.part), 0) + 1
    for (talk, part), count in sorted(seen.items()):
        if count != 1:
            violations.append(f"exact-cover: (talk, part) ({talk!r}, {part!r}) appears {count} times")
    for talk in talks:
        parts_present = {part for (t, part) in seen if t == talk}
        for part in PARTS:
            if part not in parts_present:
                violations.append(f"exact-cover: (talk, part) ({talk!r}, {part!r}) missing")

    cap = talk_repeat_cap(len(talks)) if talks else 1
    for annotator in plan.annotators():
        own = plan.for_annotator(annotator)
        if len(own) != PARTS_PER_ANNOTATOR:
            violations.append(
                f"load: annotator {annotator!r} has {len(own)} parts, expected {PARTS_PER_ANNOTATOR}"
            )
        per_talk: dict[str, int] = {}
        for entry in own:
            per_talk[entry.talk_id] = per_talk.get(entry.talk_id, 0) + 1
        for talk, count in sorted(per_talk.items()):
            if count > cap:
                violations.append(
                    f"talk-repeat: annotator {annotator!r} has {count} parts of talk {talk!r} (cap {cap})"
                )
        for mode in MODES:
            count = sum(1 for entry in own if entry.mode == mode)
            if count != PER_MODE:
                violations.append(
                    f"mode-balance: annotator {annotator!r} has {count} {mode!r} parts, expected {PER_MODE}"
                )
        for part in PARTS:
            count = sum(1 for entry in own if entry.part == part)
            if count != PER_POSITION:
                violations.append(
                    f"position-balance: annotator {annotator!r} has {count} {part!r} parts, expected {PER_POSITION}"
                )

    for talk in talks:
        modes = [entry.mode for entry in entries if entry.talk_id == talk]
        if len(set(modes)) != len(modes):
            violations.append(f"talk-modes: talk {talk!r} repeats a mode across its parts")

    n_talks = len(talks)
    for part in PARTS:
        at_position = [entry for entry in entries if entry.part == part]
        for mode in MODES:
            count = sum(1 for entry in at_position if entry.mode == mode)
            if n_talks and count > n_talks / 2.0:
                violations.append(
                    f"position-mode-guard: mode {mode!r} covers {count}/{n_talks} of position {part!r}"
                )
    return violations


def presentation_order(
    plan: AssignmentPlan,
    annotator_id: str,
    agreement_sentences: Sequence[str] = (),
) -> list[QueueBlock]:
    """One annotator's queue: mode blocks in the fixed presentation order,
    each followed by the repeated agreement block."""
    own = plan.for_annotator(annotator_id)
    if not own:
        raise ValueError(f"unknown annotator {annotator_id!r}")
    blocks: list[QueueBlock] = []
    for index, mode in enumerate(MODE_ORDER, start=1):
        work = sorted(
            (entry for entry in own if entry.mode == mode),
            key=lambda e: (e.talk_id, PARTS.index(e.part)),
        )
        blocks.append(QueueBlock(kind="work", mode=mode, pass_label="main", items=tuple(work)))
        blocks.append(
            QueueBlock(
                kind="agreement",
                mode=mode,
                pass_label=f"repeat_{index}",
                items=tuple(agreement_sentences),
            )
        )
    return blocks


def write_plan(plan: AssignmentPlan, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in plan.entries:
            fh.write(
                json.dumps(
                    {
                        "talk_id": entry.talk_id,
                        "part": entry.part,
                        "annotator_id": entry.annotator_id,
                        "mode": entry.mode,
                    }
                )
                + "\n"
            )


def read_plan(path: str | Path) -> AssignmentPlan:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                entries.append(
                    PlanEntry(
                        talk_id=record["talk_id"],
                        part=record["part"],
                        annotator_id=record["annotator_id"],
                        mode=record["mode"],
                    )
                )
    return AssignmentPlan(entries=tuple(entries))
