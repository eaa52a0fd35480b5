"""
Planning an annotation campaign and serving it
==============================================

Assign talks to annotators under the campaign's fairness constraints,
then run a few turns of the resulting annotation session in process:
fetch the next item, submit a marking or a post-edit, and export the
collected records.

The same objects back the HTTP service (`markmt serve`); this script
talks to them directly so everything is visible in one place.
"""

import tempfile
from pathlib import Path

from markmt.planner import assign, verify_assignment
from markmt.service import AnnotationService
from markmt.synth import make_task_sentences

# --- plan ---------------------------------------------------------------
# Ten annotators, thirty talks; every talk is annotated once in each of
# its three parts, annotators see balanced mode mixes, and no annotator
# reads the same talk twice.
talk_ids = [f"talk_{i:02d}" for i in range(30)]
annotator_ids = [f"annotator_{i}" for i in range(10)]
plan = assign(talk_ids, annotator_ids, seed=4)
violations = verify_assignment(plan)
print(f"plan: {len(plan.entries)} (talk, part) assignments, "
      f"{len(violations)} constraint violations")

per_annotator = {}
for entry in plan.entries:
    per_annotator.setdefault(entry.annotator_id, []).append(entry.mode)
sample = annotator_ids[0]
print(f"{sample} works {len(per_annotator[sample])} parts, modes:",
      sorted(per_annotator[sample]))

# --- serve --------------------------------------------------------------
# A smaller campaign so a few turns cover interesting ground. Two of the
# sentences are designated agreement checks: every annotator sees those
# once per mode, on top of their assigned parts.
small_plan = assign([f"t{i}" for i in range(9)], ["ana", "ben", "cara"], seed=1)
sentences = make_task_sentences([f"t{i}" for i in range(9)],
                                sentences_per_part=2, seed=9)
agreement_ids = [sentences[0].sentence_id, sentences[5].sentence_id]

with tempfile.TemporaryDirectory() as tmp:
    service = AnnotationService(
        small_plan, sentences, agreement_ids, log_path=Path(tmp) / "events.jsonl"
    )
    state = service.state("ana")
    print(f"\nana's queue: {state.total} items")

    # Turn 1: a marking -- flag tokens believed wrong, one flag per token.
    item = service.next_item("ana")
    tokens = item["hypothesis_text"].split()
    print(f"first item: mode {item['instruction_mode']!r}, pass {item['pass']!r}, "
          f"{len(tokens)} tokens")
    flags = [i % 3 == 0 for i in range(len(tokens))]
    receipt = service.submit("ana", {
        "sentence_id": item["sentence_id"],
        "pass": item["pass"],
        "nonce": "demo-1",
        "mode": item["instruction_mode"],
        "flags": flags,
        "duration_ms": 4200,
        "keystrokes": 0,
        "mouse_actions": int(sum(flags)),
        "pause_count": 0,
    } if item["instruction_mode"] == "marking" else {
        "sentence_id": item["sentence_id"],
        "pass": item["pass"],
        "nonce": "demo-1",
        "mode": item["instruction_mode"],
        "edited_text": item["hypothesis_text"],
        "duration_ms": 4200,
        "keystrokes": 12,
        "mouse_actions": 3,
        "pause_count": 1,
    })
    print("submit ->", receipt["status"])

    # Submitting the same nonce again is a no-op: the service already has it.
    again = service.submit("ana", {**{
        "sentence_id": item["sentence_id"], "pass": item["pass"],
        "nonce": "demo-1", "mode": item["instruction_mode"], "duration_ms": 4200,
        "keystrokes": 0, "mouse_actions": 0, "pause_count": 0,
    }, **({"flags": flags} if item["instruction_mode"] == "marking" else
          {"edited_text": item["hypothesis_text"]})})
    print("same nonce again ->", again["status"], f"(duplicate={again.get('duplicate', False)})")

    state = service.state("ana")
    print(f"ana's progress: {state.completed} of {state.total}")

    jsonl, csv = service.export()
    print(f"\nexport: {len(jsonl.splitlines())} records; csv header:")
    print(" ", csv.splitlines()[0])
