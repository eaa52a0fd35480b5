"""Session backend: queue order, validation, timing, persistence, export."""

import json

import pytest

from markmt import synth
from markmt.planner import assign
from markmt.service import (
    AnnotationService,
    ExportSelector,
    SessionError,
    read_events,
)


class FakeClock:
    def __init__(self, start=1000.0):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


TALKS = ["t0", "t1", "t2"]
AGREEMENT_IDS = ["t0_beginning_0", "t1_middle_0", "t2_end_0"]


def build_service(tmp_path, clock=None, log_name="events.jsonl"):
    plan = assign(TALKS, ["solo"], seed=0)
    sentences = synth.make_task_sentences(TALKS, sentences_per_part=2, seed=1)
    clock = clock or FakeClock()
    service = AnnotationService(
        plan,
        sentences,
        AGREEMENT_IDS,
        tmp_path / log_name,
        clock=clock,
    )
    return service, clock, plan, sentences


def answer_for(service, item):
    """A minimal valid submission payload for the served item."""
    n_tokens = len(item["hypothesis_text"].split())
    payload = {
        "sentence_id": item["sentence_id"],
        "mode": item["instruction_mode"],
        "keystrokes": 3,
        "mouse_actions": 1,
    }
    mode = item["instruction_mode"]
    if mode == "choice":
        payload["chosen_mode"] = "marking"
        payload["flags"] = [False] * n_tokens
    elif mode == "marking":
        payload["flags"] = [False] * n_tokens
    else:
        payload["edited_text"] = item["hypothesis_text"]
    return payload


def drive(service, annotator, n_items, clock, nonce_prefix="n"):
    for index in range(n_items):
        item = service.next_item(annotator)
        assert item is not None
        clock.advance(5.0)
        payload = answer_for(service, item)
        payload["nonce"] = f"{nonce_prefix}{index}"
        result = service.submit(annotator, payload)
        assert result["status"] == "accepted"


class TestQueue:
    def test_fresh_session_serves_first_postedit_item(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        assert item["instruction_mode"] == "postedit"
        assert item["pass"] == "main"
        assert item["position"] == 0

    def test_queue_total_counts_work_and_repeats(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        # 9 parts x 2 sentences of work plus 3 repeat blocks of 3 sentences.
        assert item["total"] == 18 + 9

    def test_unsubmitted_item_is_served_again(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        first = service.next_item("solo")
        again = service.next_item("solo")
        assert first["sentence_id"] == again["sentence_id"]

    def test_consecutive_order_within_part(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        first = service.next_item("solo")
        payload = answer_for(service, first)
        payload["nonce"] = "a"
        service.submit("solo", payload)
        second = service.next_item("solo")
        # Same talk part continues in sentence order before moving on.
        assert second["talk_id"] == first["talk_id"]
        assert second["part"] == first["part"]
        assert first["sentence_id"].endswith("_0")
        assert second["sentence_id"].endswith("_1")

    def test_exhausted_queue_returns_none(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 27, clock)
        assert service.next_item("solo") is None

    def test_unknown_annotator_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        with pytest.raises(SessionError) as err:
            service.next_item("stranger")
        assert err.value.code == "unknown_session"

    def test_pass_labels_follow_block_structure(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        seen = []
        for index in range(27):
            item = service.next_item("solo")
            seen.append((item["instruction_mode"], item["pass"]))
            payload = answer_for(service, item)
            payload["nonce"] = f"x{index}"
            service.submit("solo", payload)
        assert seen[:6] == [("postedit", "main")] * 6
        assert seen[6:9] == [("postedit", "repeat_1")] * 3
        assert seen[9:15] == [("marking", "main")] * 6
        assert seen[15:18] == [("marking", "repeat_2")] * 3
        assert seen[18:24] == [("choice", "main")] * 6
        assert seen[24:27] == [("choice", "repeat_3")] * 3


class TestSubmit:
    def test_valid_marking_stored_verbatim(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        # Advance past the postedit block to the first marking item.
        drive(service, "solo", 9, clock)
        item = service.next_item("solo")
        assert item["instruction_mode"] == "marking"
        n_tokens = len(item["hypothesis_text"].split())
        flags = [i < 2 for i in range(n_tokens)]
        result = service.submit(
            "solo",
            {
                "sentence_id": item["sentence_id"],
                "mode": "marking",
                "flags": flags,
                "keystrokes": 0,
                "mouse_actions": 2,
                "nonce": "mark1",
            },
        )
        assert result["status"] == "accepted"
        stored = service.annotations()[-1]
        assert stored.flags == tuple(flags)
        assert stored.mode == "marking"

    def test_mode_mismatch_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        assert item["instruction_mode"] == "postedit"
        with pytest.raises(SessionError) as err:
            service.submit(
                "solo",
                {
                    "sentence_id": item["sentence_id"],
                    "mode": "marking",
                    "flags": [False] * len(item["hypothesis_text"].split()),
                    "nonce": "bad",
                },
            )
        assert err.value.code == "mode_mismatch"

    def test_stale_item_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        service.next_item("solo")
        with pytest.raises(SessionError) as err:
            service.submit(
                "solo",
                {
                    "sentence_id": "not_the_current_one",
                    "mode": "postedit",
                    "edited_text": "x",
                    "nonce": "bad",
                },
            )
        assert err.value.code == "stale_item"

    def test_malformed_flags_rejected(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 9, clock)
        item = service.next_item("solo")
        with pytest.raises(SessionError) as err:
            service.submit(
                "solo",
                {
                    "sentence_id": item["sentence_id"],
                    "mode": "marking",
                    "flags": [False],  # wrong length
                    "nonce": "bad",
                },
            )
        assert err.value.code == "malformed"

    def test_choice_requires_chosen_mode(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 18, clock)
        item = service.next_item("solo")
        assert item["instruction_mode"] == "choice"
        with pytest.raises(SessionError) as err:
            service.submit(
                "solo",
                {
                    "sentence_id": item["sentence_id"],
                    "mode": "choice",
                    "edited_text": "x",
                    "nonce": "bad",
                },
            )
        assert err.value.code == "malformed"
        result = service.submit(
            "solo",
            {
                "sentence_id": item["sentence_id"],
                "mode": "choice",
                "chosen_mode": "postedit",
                "edited_text": "fixed text",
                "nonce": "good",
            },
        )
        assert result["status"] == "accepted"
        assert service.annotations()[-1].chosen_mode == "postedit"

    def test_duplicate_nonce_not_stored_twice(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        payload = answer_for(service, item)
        payload["nonce"] = "dup"
        first = service.submit("solo", payload)
        second = service.submit("solo", payload)
        assert first["duplicate"] is False
        assert second["duplicate"] is True
        assert len(service.annotations()) == 1
        assert service.state("solo").completed == 1

    def test_negative_counts_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        payload = answer_for(service, item)
        payload["nonce"] = "neg"
        payload["keystrokes"] = -1
        with pytest.raises(SessionError) as err:
            service.submit("solo", payload)
        assert err.value.code == "malformed"


class TestTiming:
    def test_duration_excludes_pause(self, tmp_path):
        clock = FakeClock()
        service, clock, _, _ = build_service(tmp_path, clock=clock)
        item = service.next_item("solo")
        clock.advance(10.0)
        service.pause("solo")
        clock.advance(10.0)
        service.resume("solo")
        clock.advance(10.0)
        payload = answer_for(service, item)
        payload["nonce"] = "timed"
        result = service.submit("solo", payload)
        assert result["duration_ms"] == 20000
        assert service.annotations()[-1].pause_count == 1

    def test_double_pause_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        service.next_item("solo")
        service.pause("solo")
        with pytest.raises(SessionError) as err:
            service.pause("solo")
        assert err.value.code == "invalid_state"

    def test_resume_without_pause_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        service.next_item("solo")
        with pytest.raises(SessionError) as err:
            service.resume("solo")
        assert err.value.code == "invalid_state"

    def test_submit_while_paused_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        item = service.next_item("solo")
        service.pause("solo")
        payload = answer_for(service, item)
        payload["nonce"] = "paused"
        with pytest.raises(SessionError) as err:
            service.submit("solo", payload)
        assert err.value.code == "paused"

    def test_pause_needs_served_item(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        with pytest.raises(SessionError):
            service.pause("solo")

    def test_timer_starts_at_first_serve(self, tmp_path):
        clock = FakeClock()
        service, clock, _, _ = build_service(tmp_path, clock=clock)
        item = service.next_item("solo")
        clock.advance(7.0)
        service.next_item("solo")  # re-serve does not reset the clock
        clock.advance(3.0)
        payload = answer_for(service, item)
        payload["nonce"] = "t"
        result = service.submit("solo", payload)
        assert result["duration_ms"] == 10000


class TestSurvey:
    ANSWERS = {
        "preferred_mode": "marking",
        "perceived_faster": "marking",
        "policies": "flagged anything unclear",
        "suggestions": "bigger font",
    }

    def test_incomplete_session_rejected(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        with pytest.raises(SessionError) as err:
            service.submit_survey("solo", self.ANSWERS)
        assert err.value.code == "incomplete"

    def test_complete_session_accepted(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 27, clock)
        assert service.submit_survey("solo", self.ANSWERS) == {"status": "accepted"}
        assert service.survey_answers("solo")["preferred_mode"] == "marking"

    def test_bad_enum_rejected(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 27, clock)
        with pytest.raises(SessionError) as err:
            service.submit_survey("solo", dict(self.ANSWERS, preferred_mode="typing"))
        assert err.value.code == "malformed"


class TestExport:
    def test_empty_store_emits_headers_only(self, tmp_path):
        service, _, _, _ = build_service(tmp_path)
        dataset, effort = service.export()
        assert dataset == ""
        assert effort.splitlines()[0].startswith("sentence_id,annotator_id")
        assert len(effort.splitlines()) == 1

    def test_single_marking_round_trips(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 9, clock)
        item = service.next_item("solo")
        n_tokens = len(item["hypothesis_text"].split())
        service.submit(
            "solo",
            {
                "sentence_id": item["sentence_id"],
                "mode": "marking",
                "flags": [True] + [False] * (n_tokens - 1),
                "nonce": "m",
            },
        )
        dataset, effort = service.export(ExportSelector(modes=("marking",)))
        records = [json.loads(line) for line in dataset.splitlines()]
        assert len(records) == 1
        assert records[0]["flags"][0] is True
        assert records[0]["mode"] == "marking"
        assert len(effort.splitlines()) == 2

    def test_export_twice_identical_bytes(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 12, clock)
        assert service.export() == service.export()

    def test_effort_rows_support_ksmr(self, tmp_path):
        service, clock, _, _ = build_service(tmp_path)
        drive(service, "solo", 5, clock)
        _, effort = service.export()
        rows = effort.splitlines()[1:]
        for row in rows:
            reference_chars = int(row.rsplit(",", 1)[1])
            assert reference_chars > 0


class TestPersistence:
    def test_replay_reconstructs_state_and_bytes(self, tmp_path):
        clock = FakeClock()
        service, clock, plan, sentences = build_service(tmp_path, clock=clock)
        drive(service, "solo", 7, clock)
        item = service.next_item("solo")
        clock.advance(2.0)
        service.pause("solo")
        state_before = service.state("solo")
        export_before = service.export()
        service.close()

        revived = AnnotationService(
            plan, sentences, AGREEMENT_IDS, tmp_path / "events.jsonl", clock=clock
        )
        assert revived.state("solo") == state_before
        assert revived.export() == export_before
        # The in-flight pause survives the restart.
        clock.advance(5.0)
        revived.resume("solo")
        clock.advance(1.0)
        payload = answer_for(revived, item)
        payload["nonce"] = "after-restart"
        result = revived.submit("solo", payload)
        # 2s before pause + 1s after resume; the 5s pause is excluded.
        assert result["duration_ms"] == 3000

    def test_duplicate_nonce_survives_replay(self, tmp_path):
        clock = FakeClock()
        service, clock, plan, sentences = build_service(tmp_path, clock=clock)
        item = service.next_item("solo")
        payload = answer_for(service, item)
        payload["nonce"] = "once"
        service.submit("solo", payload)
        service.close()

        revived = AnnotationService(
            plan, sentences, AGREEMENT_IDS, tmp_path / "events.jsonl", clock=clock
        )
        again = revived.submit("solo", payload)
        assert again["duplicate"] is True
        assert len(revived.annotations()) == 1

    def test_torn_final_line_is_truncated(self, tmp_path):
        clock = FakeClock()
        service, clock, plan, sentences = build_service(tmp_path, clock=clock)
        drive(service, "solo", 3, clock)
        state_before = service.state("solo")
        service.close()

        log = tmp_path / "events.jsonl"
        with open(log, "ab") as fh:
            fh.write(b'{"type": "submit", "annotator_id": "solo", "trunc')
        revived = AnnotationService(plan, sentences, AGREEMENT_IDS, log, clock=clock)
        assert revived.state("solo") == state_before
        events, _ = read_events(log)
        assert all("trunc" not in json.dumps(e) for e in events)

    def test_log_is_append_only_across_operations(self, tmp_path):
        clock = FakeClock()
        service, clock, _, _ = build_service(tmp_path, clock=clock)
        log = tmp_path / "events.jsonl"
        sizes = []
        for index in range(4):
            item = service.next_item("solo")
            payload = answer_for(service, item)
            payload["nonce"] = f"a{index}"
            service.submit("solo", payload)
            sizes.append(log.stat().st_size)
        assert sizes == sorted(sizes)
        assert sizes[0] > 0
