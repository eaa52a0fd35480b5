"""Annotation session backend.

Serves each annotator's work queue in presentation order, records
annotations with server-side timing (wall clock per item minus pauses),
and persists every state change to an append-only JSONL event log that is
flushed and fsynced before any acknowledgement.  Restarting a service on
an existing log replays it to the exact same session state — cursor,
pause state, nonce registry, and export bytes — tolerating a torn final
line from a crash mid-write (such a write was never acknowledged).

Submissions are idempotent per (annotator, nonce): a duplicate delivery
is acknowledged without a second store.  Cursor movement is monotone;
there is no way to return to or re-edit an earlier sentence.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .planner import MODES, AssignmentPlan, presentation_order

PASS_LABELS = ("main", "repeat_1", "repeat_2", "repeat_3")
CHOICE_MODES = ("postedit", "marking")
SURVEY_SPEED_OPTIONS = ("postedit", "marking", "unsure")

EFFORT_COLUMNS = (
    "sentence_id",
    "annotator_id",
    "talk_id",
    "part",
    "mode",
    "chosen_mode",
    "pass",
    "duration_ms",
    "keystrokes",
    "mouse_actions",
    "pause_count",
    "reference_chars",
)


class SessionError(Exception):
    """A session-level failure with a machine-readable code."""

    def __init__(self, code: str, reason: str) -> None:
        super().__init__(reason)
        self.code = code
        self.reason = reason


@dataclass(frozen=True)
class TaskSentence:
    sentence_id: str
    talk_id: str
    part: str
    source_text: str
    hypothesis_text: str
    reference_text: str = ""

    @property
    def reference_chars(self) -> int:
        return len(self.reference_text) if self.reference_text else len(self.hypothesis_text)


@dataclass(frozen=True)
class QueueItem:
    sentence_id: str
    mode: str
    pass_label: str
    talk_id: str
    part: str


@dataclass(frozen=True)
class Annotation:
    sentence_id: str
    annotator_id: str
    mode: str
    pass_label: str
    chosen_mode: str | None
    flags: tuple[bool, ...] | None
    edited_text: str | None
    duration_ms: int
    keystrokes: int
    mouse_actions: int
    pause_count: int
    submitted_at: float

    def effective_mode(self) -> str:
        return self.chosen_mode if self.mode == "choice" else self.mode

    def to_record(self) -> dict:
        record = {
            "sentence_id": self.sentence_id,
            "annotator_id": self.annotator_id,
            "mode": self.mode,
            "pass": self.pass_label,
            "duration_ms": self.duration_ms,
            "keystrokes": self.keystrokes,
            "mouse_actions": self.mouse_actions,
            "pause_count": self.pause_count,
            "submitted_at": self.submitted_at,
        }
        if self.chosen_mode is not None:
            record["chosen_mode"] = self.chosen_mode
        if self.flags is not None:
            record["flags"] = list(self.flags)
        if self.edited_text is not None:
            record["edited_text"] = self.edited_text
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Annotation":
        return cls(
            sentence_id=record["sentence_id"],
            annotator_id=record["annotator_id"],
            mode=record["mode"],
            pass_label=record["pass"],
            chosen_mode=record.get("chosen_mode"),
            flags=tuple(bool(f) for f in record["flags"]) if "flags" in record else None,
            edited_text=record.get("edited_text"),
            duration_ms=record["duration_ms"],
            keystrokes=record["keystrokes"],
            mouse_actions=record["mouse_actions"],
            pause_count=record["pause_count"],
            submitted_at=record["submitted_at"],
        )


@dataclass
class _Session:
    annotator_id: str
    queue: list[QueueItem]
    cursor: int = 0
    paused: bool = False
    pause_started_at: float | None = None
    item_started_at: float | None = None
    item_pause_total: float = 0.0
    item_pause_count: int = 0
    nonces: set = field(default_factory=set)
    survey: dict | None = None

    @property
    def completed(self) -> int:
        return self.cursor

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.queue)

    def current(self) -> QueueItem | None:
        return None if self.done else self.queue[self.cursor]


@dataclass(frozen=True)
class SessionState:
    annotator_id: str
    cursor: int
    paused: bool
    completed: int
    total: int

    @property
    def done(self) -> bool:
        return self.cursor >= self.total


@dataclass(frozen=True)
class ExportSelector:
    modes: tuple[str, ...] | None = None
    passes: tuple[str, ...] | None = None
    annotators: tuple[str, ...] | None = None

    def admits(self, annotation: Annotation) -> bool:
        if self.modes is not None and annotation.mode not in self.modes:
            return False
        if self.passes is not None and annotation.pass_label not in self.passes:
            return False
        if self.annotators is not None and annotation.annotator_id not in self.annotators:
            return False
        return True


def read_events(path: str | Path) -> tuple[list[dict], int]:
    """Events from a log, with the byte length of the valid prefix.

    A torn final line (crash mid-write) is excluded; its write was never
    acknowledged, so dropping it is safe.
    """
    path = Path(path)
    if not path.exists():
        return [], 0
    raw = path.read_bytes()
    events: list[dict] = []
    valid = 0
    start = 0
    while start < len(raw):
        end = raw.find(b"\n", start)
        if end == -1:
            break  # no newline: torn tail
        line = raw[start:end]
        if line.strip():
            try:
                events.append(json.loads(line.decode("utf-8")))
            except (ValueError, UnicodeDecodeError):
                break  # torn or corrupt: stop at the valid prefix
        valid = end + 1
        start = end + 1
    return events, valid


def load_documents(path: str | Path) -> list[TaskSentence]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                sentences.append(
                    TaskSentence(
                        sentence_id=record["sentence_id"],
                        talk_id=record["talk_id"],
                        part=record["part"],
                        source_text=record["source_text"],
                        hypothesis_text=record["hypothesis_text"],
                        reference_text=record.get("reference_text", ""),
                    )
                )
    return sentences


def write_documents(sentences: Sequence[TaskSentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": s.sentence_id,
                        "talk_id": s.talk_id,
                        "part": s.part,
                        "source_text": s.source_text,
                        "hypothesis_text": s.hypothesis_text,
                        "reference_text": s.reference_text,
                    }
                )
                + "\n"
            )


class AnnotationService:
    """Single-writer session backend over an append-only event log."""

    def __init__(
        self,
        plan: AssignmentPlan,
        sentences: Sequence[TaskSentence],
        agreement_ids: Sequence[str],
        log_path: str | Path,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._clock = clock
        self._log_path = Path(log_path)
        self._sentences: dict[str, TaskSentence] = {}
        self._part_sentences: dict[tuple[str, str], list[TaskSentence]] = {}
        for sentence in sentences:
            if sentence.sentence_id in self._sentences:
                raise ValueError(f"duplicate sentence id {sentence.sentence_id!r}")
            self._sentences[sentence.sentence_id] = sentence
            self._part_sentences.setdefault(
                (sentence.talk_id, sentence.part), []
            ).append(sentence)
        for sid in agreement_ids:
            if sid not in self._sentences:
                raise ValueError(f"agreement sentence {sid!r} not in corpus")

        self._sessions: dict[str, _Session] = {}
        for annotator_id in plan.annotators():
            queue: list[QueueItem] = []
            for block in presentation_order(plan, annotator_id, agreement_ids):
                if block.kind == "work":
                    for entry in block.items:
                        key = (entry.talk_id, entry.part)
                        if key not in self._part_sentences:
                            raise ValueError(
                                f"no sentences for talk part {key!r} in corpus"
                            )
                        for sentence in self._part_sentences[key]:
                            queue.append(
                                QueueItem(
                                    sentence_id=sentence.sentence_id,
                                    mode=block.mode,
                                    pass_label="main",
                                    talk_id=entry.talk_id,
                                    part=entry.part,
                                )
                            )
                else:
                    for sid in block.items:
                        sentence = self._sentences[sid]
                        queue.append(
                            QueueItem(
                                sentence_id=sid,
                                mode=block.mode,
                                pass_label=block.pass_label,
                                talk_id=sentence.talk_id,
                                part=sentence.part,
                            )
                        )
            self._sessions[annotator_id] = _Session(annotator_id=annotator_id, queue=queue)

        self._annotations: list[Annotation] = []
        events, valid_bytes = read_events(self._log_path)
        if self._log_path.exists() and valid_bytes < self._log_path.stat().st_size:
            with open(self._log_path, "r+b") as fh:
                fh.truncate(valid_bytes)
        for event in events:
            self._apply(event, replay=True)
        self._log_fh = open(self._log_path, "a", encoding="utf-8")

    def close(self) -> None:
        self._log_fh.close()

    # -- internal event machinery ------------------------------------------

    def _append(self, event: dict) -> None:
        self._log_fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def _session(self, annotator_id: str) -> _Session:
        try:
            return self._sessions[annotator_id]
        except KeyError:
            raise SessionError(
                "unknown_session", f"no session for annotator {annotator_id!r}"
            ) from None

    def _apply(self, event: dict, replay: bool) -> None:
        kind = event["type"]
        session = self._session(event["annotator_id"])
        if kind == "served":
            session.item_started_at = event["at"]
            session.item_pause_total = 0.0
            session.item_pause_count = 0
        elif kind == "pause":
            session.paused = True
            session.pause_started_at = event["at"]
            session.item_pause_count += 1
        elif kind == "resume":
            session.paused = False
            if session.pause_started_at is not None:
                session.item_pause_total += event["at"] - session.pause_started_at
            session.pause_started_at = None
        elif kind == "submit":
            annotation = Annotation.from_record(event["annotation"])
            session.nonces.add(event["nonce"])
            self._annotations.append(annotation)
            session.cursor += 1
            session.item_started_at = None
            session.item_pause_total = 0.0
            session.item_pause_count = 0
        elif kind == "survey":
            session.survey = event["answers"]
        else:
            raise ValueError(f"unknown event type {kind!r}")

    # -- operations --------------------------------------------------------

    def state(self, annotator_id: str) -> SessionState:
        session = self._session(annotator_id)
        return SessionState(
            annotator_id=annotator_id,
            cursor=session.cursor,
            paused=session.paused,
            completed=session.completed,
            total=len(session.queue),
        )

    def next_item(self, annotator_id: str) -> dict | None:
        """The current work item, or None when the queue is exhausted.

        Serving is repeatable: an unsubmitted item is served again (work in
        progress is never recoverable), and the item's clock starts at its
        first serve.
        """
        session = self._session(annotator_id)
        item = session.current()
        if item is None:
            return None
        if session.item_started_at is None:
            event = {
                "type": "served",
                "annotator_id": annotator_id,
                "queue_index": session.cursor,
                "sentence_id": item.sentence_id,
                "at": self._clock(),
            }
            self._apply(event, replay=False)
            self._append(event)
        sentence = self._sentences[item.sentence_id]
        return {
            "sentence_id": item.sentence_id,
            "source_text": sentence.source_text,
            "hypothesis_text": sentence.hypothesis_text,
            "instruction_mode": item.mode,
            "pass": item.pass_label,
            "talk_id": item.talk_id,
            "part": item.part,
            "position": session.cursor,
            "total": len(session.queue),
        }

    def submit(self, annotator_id: str, payload: dict) -> dict:
        """Validate and persist one annotation; idempotent per nonce."""
        session = self._session(annotator_id)
        nonce = payload.get("nonce")
        if not isinstance(nonce, str) or not nonce:
            raise SessionError("malformed", "submission requires a client nonce")
        if nonce in session.nonces:
            return {"status": "accepted", "duplicate": True, "completed": session.completed}
        if session.paused:
            raise SessionError("paused", "resume the session before submitting")
        item = session.current()
        if item is None:
            raise SessionError("done", "session already complete")
        if payload.get("sentence_id") != item.sentence_id:
            raise SessionError(
                "stale_item",
                f"expected sentence {item.sentence_id!r}, got {payload.get('sentence_id')!r}",
            )
        if payload.get("mode") != item.mode:
            raise SessionError(
                "mode_mismatch",
                f"item is {item.mode!r}, submission is {payload.get('mode')!r}",
            )
        if session.item_started_at is None:
            raise SessionError("stale_item", "item was never served")

        chosen_mode = payload.get("chosen_mode")
        if item.mode == "choice":
            if chosen_mode not in CHOICE_MODES:
                raise SessionError(
                    "malformed", f"choice submission needs chosen_mode in {CHOICE_MODES}"
                )
            effective = chosen_mode
        else:
            if chosen_mode is not None:
                raise SessionError("malformed", "chosen_mode only applies to choice items")
            effective = item.mode

        sentence = self._sentences[item.sentence_id]
        flags: tuple[bool, ...] | None = None
        edited_text: str | None = None
        if effective == "marking":
            if "edited_text" in payload:
                raise SessionError("malformed", "marking submissions carry flags only")
            raw_flags = payload.get("flags")
            n_tokens = len(sentence.hypothesis_text.split())
            if (
                not isinstance(raw_flags, (list, tuple))
                or len(raw_flags) != n_tokens
                or not all(isinstance(f, bool) for f in raw_flags)
            ):
                raise SessionError(
                    "malformed",
                    f"flags must be {n_tokens} booleans for sentence {item.sentence_id!r}",
                )
            flags = tuple(raw_flags)
        else:
            if "flags" in payload:
                raise SessionError("malformed", "post-edit submissions carry edited_text only")
            edited_text = payload.get("edited_text")
            if not isinstance(edited_text, str):
                raise SessionError("malformed", "edited_text must be a string")

        keystrokes = payload.get("keystrokes", 0)
        mouse_actions = payload.get("mouse_actions", 0)
        if not isinstance(keystrokes, int) or keystrokes < 0:
            raise SessionError("malformed", "keystrokes must be a non-negative integer")
        if not isinstance(mouse_actions, int) or mouse_actions < 0:
            raise SessionError("malformed", "mouse_actions must be a non-negative integer")

        now = self._clock()
        duration_s = now - session.item_started_at - session.item_pause_total
        annotation = Annotation(
            sentence_id=item.sentence_id,
            annotator_id=annotator_id,
            mode=item.mode,
            pass_label=item.pass_label,
            chosen_mode=chosen_mode,
            flags=flags,
            edited_text=edited_text,
            duration_ms=max(0, round(duration_s * 1000)),
            keystrokes=keystrokes,
            mouse_actions=mouse_actions,
            pause_count=session.item_pause_count,
            submitted_at=now,
        )
        event = {
            "type": "submit",
            "annotator_id": annotator_id,
            "queue_index": session.cursor,
            "nonce": nonce,
            "annotation": annotation.to_record(),
            "at": now,
        }
        self._apply(event, replay=False)
        self._append(event)
        return {
            "status": "accepted",
            "duplicate": False,
            "completed": session.completed,
            "duration_ms": annotation.duration_ms,
            "pass": annotation.pass_label,
        }

    def pause(self, annotator_id: str) -> SessionState:
        session = self._session(annotator_id)
        if session.paused:
            raise SessionError("invalid_state", "session is already paused")
        if session.done:
            raise SessionError("done", "session already complete")
        if session.item_started_at is None:
            raise SessionError("invalid_state", "no served item to pause")
        event = {"type": "pause", "annotator_id": annotator_id, "at": self._clock()}
        self._apply(event, replay=False)
        self._append(event)
        return self.state(annotator_id)

    def resume(self, annotator_id: str) -> SessionState:
        session = self._session(annotator_id)
        if not session.paused:
            raise SessionError("invalid_state", "session is not paused")
        event = {"type": "resume", "annotator_id": annotator_id, "at": self._clock()}
        self._apply(event, replay=False)
        self._append(event)
        return self.state(annotator_id)

    def submit_survey(self, annotator_id: str, answers: dict) -> dict:
        session = self._session(annotator_id)
        if not session.done:
            raise SessionError(
                "incomplete",
                f"survey requires a complete session ({session.completed}/{len(session.queue)})",
            )
        preferred = answers.get("preferred_mode")
        if preferred not in MODES:
            raise SessionError("malformed", f"preferred_mode must be one of {MODES}")
        faster = answers.get("perceived_faster")
        if faster not in SURVEY_SPEED_OPTIONS:
            raise SessionError(
                "malformed", f"perceived_faster must be one of {SURVEY_SPEED_OPTIONS}"
            )
        clean = {
            "preferred_mode": preferred,
            "perceived_faster": faster,
            "policies": str(answers.get("policies", "")),
            "suggestions": str(answers.get("suggestions", "")),
        }
        event = {
            "type": "survey",
            "annotator_id": annotator_id,
            "answers": clean,
            "at": self._clock(),
        }
        self._apply(event, replay=False)
        self._append(event)
        return {"status": "accepted"}

    def survey_answers(self, annotator_id: str) -> dict | None:
        return self._session(annotator_id).survey

    # -- export ------------------------------------------------------------

    def annotations(self, selector: ExportSelector | None = None) -> list[Annotation]:
        selector = selector or ExportSelector()
        return [a for a in self._annotations if selector.admits(a)]

    def export(self, selector: ExportSelector | None = None) -> tuple[str, str]:
        """(annotated-dataset JSONL, effort CSV) — byte-stable for a fixed log."""
        chosen = self.annotations(selector)
        lines = []
        for annotation in chosen:
            sentence = self._sentences[annotation.sentence_id]
            record = annotation.to_record()
            record["source_text"] = sentence.source_text
            record["hypothesis_text"] = sentence.hypothesis_text
            lines.append(json.dumps(record, sort_keys=True))
        dataset = "\n".join(lines) + ("\n" if lines else "")

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(EFFORT_COLUMNS)
        for annotation in chosen:
            sentence = self._sentences[annotation.sentence_id]
            writer.writerow(
                [
                    annotation.sentence_id,
                    annotation.annotator_id,
                    sentence.talk_id,
                    sentence.part,
                    annotation.mode,
                    annotation.chosen_mode or "",
                    annotation.pass_label,
                    annotation.duration_ms,
                    annotation.keystrokes,
                    annotation.mouse_actions,
                    annotation.pause_count,
                    sentence.reference_chars,
                ]
            )
        return dataset, buffer.getvalue()
