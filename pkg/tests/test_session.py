import json
from pathlib import Path

import pytest

from keyreconf.app_profiles import shuffled_password_profile
from keyreconf.layout import default_shuffle_group
from keyreconf.mapping_engine import KeyEvent
from keyreconf.session import (LogWriter, ReplayError, SessionLog, SessionRunner,
                               replay, run_session)
from keyreconf.shuffle import RegionShuffle, decode_press, shuffle

GOLDEN = Path(__file__).parent / "golden"


def taps(*specs):
    events = []
    for t, key in specs:
        events.append(KeyEvent(t, key, "down"))
        events.append(KeyEvent(t + 30, key, "up"))
    return sorted(events, key=lambda e: e.t_ms)


def test_empty_source_yields_meta_and_initial_render(registry):
    log = run_session(registry["word-macros"], [])
    kinds = [type(r).__name__ for r in log.records]
    assert kinds[0] == "MetaRecord"
    assert "RenderRecord" in kinds
    assert not log.actions()
    assert kinds[-1] == "MetaRecord"


def test_log_timestamps_non_decreasing(registry):
    log = run_session(registry["emojis"],
                      taps((0, "ControlLeft"), (100, "Digit1"), (200, "KeyA")))
    times = [r.t_ms for r in log.records]
    assert times == sorted(times)


def test_render_versions_strictly_increase_in_log(registry):
    log = run_session(registry["languages"],
                      taps((0, "AltLeft"), (100, "PageDown"), (200, "AltLeft")))
    versions = [r.version for r in log.renders()]
    assert versions == sorted(set(versions))


def test_shuffled_session_types_what_it_shows(iso, registry):
    shuffled = shuffle(iso, default_shuffle_group(), RegionShuffle(6), 7)
    profile = shuffled_password_profile(registry["password-entry"], shuffled)
    inverse = {src: phys for phys, src in shuffled.perm.items()}
    source_of = {k.default_legend: k.id for k in iso.keys if k.id in shuffled.group}
    events = taps(*((100 * i, inverse[source_of[c]])
                    for i, c in enumerate("password")))
    log = run_session(profile, events, shuffled=shuffled)
    typed = "".join(r.action["text"] for r in log.actions()
                    if r.action["kind"] == "emit_text")
    assert typed == "password"
    # every emitted char equals what the pressed key displayed
    for record in log.actions():
        if record.action["kind"] == "emit_text":
            assert record.action["text"] == decode_press(shuffled, record.source)


def test_replay_reconstructs_identical_permutation(iso, registry):
    shuffled = shuffle(iso, default_shuffle_group(), RegionShuffle(6), 7)
    profile = shuffled_password_profile(registry["password-entry"], shuffled)
    log = run_session(profile, taps((0, "KeyQ")), shuffled=shuffled)
    again = replay(log, registry)
    assert again.header["shuffle"] == log.header["shuffle"]


def test_touchbar_chord_lands_in_log(registry):
    events = [KeyEvent(0, "Digit1", "down"), KeyEvent(20, "Digit2", "down"),
              KeyEvent(100, "Digit1", "up"), KeyEvent(110, "Digit2", "up")]
    log = run_session(registry["touchbar"], events)
    seeks = [r.action["seconds"] for r in log.actions()
             if r.action["kind"] == "seek_to"]
    assert seeks == [15.0]


def test_solo_resolution_between_events(registry):
    events = [KeyEvent(0, "Digit1", "down"), KeyEvent(500, "Digit1", "up"),
              KeyEvent(600, "Digit5", "down"), KeyEvent(700, "Digit5", "up")]
    log = run_session(registry["touchbar"], events)
    seeks = [(r.t_ms, r.action["seconds"]) for r in log.actions()]
    assert seeks == [(50, 10.0), (650, 50.0)]


def test_malformed_event_dropped_with_meta(registry):
    events = [KeyEvent(0, "NoSuchKey", "down"), KeyEvent(10, "Digit1", "down"),
              KeyEvent(40, "Digit1", "up")]
    log = run_session(registry["touchbar"], events)
    metas = [r.text for r in log.records if type(r).__name__ == "MetaRecord"]
    assert any("dropped event" in m for m in metas)
    assert [r.action["seconds"] for r in log.actions()] == [10.0]


def test_replay_zero_divergence_roundtrip(registry):
    log = run_session(registry["emojis"],
                      taps((0, "ControlLeft"), (50, "Digit1"), (400, "KeyA")))
    replay(log, registry)  # no exception


def test_replay_detects_tampered_action(registry):
    log = run_session(registry["emojis"], taps((0, "ControlLeft"), (50, "Digit1")))
    lines = log.to_jsonl().strip().split("\n")
    for i, line in enumerate(lines):
        doc = json.loads(line)
        if doc.get("kind") == "action":
            doc["action"]["text"] = "TAMPERED"
            lines[i] = json.dumps(doc, sort_keys=True, ensure_ascii=False)
            tampered_index = i - 1  # records index: header is line 0
            break
    tampered = SessionLog.from_jsonl("\n".join(lines) + "\n")
    with pytest.raises(ReplayError) as err:
        replay(tampered, registry)
    assert err.value.record_index == tampered_index


def test_replay_detects_timestamp_tamper(registry):
    log = run_session(registry["touchbar"],
                      [KeyEvent(0, "Digit1", "down"), KeyEvent(200, "Digit1", "up")])
    lines = log.to_jsonl().strip().split("\n")
    for i, line in enumerate(lines):
        doc = json.loads(line)
        if doc.get("kind") == "action":
            doc["t_ms"] += 1
            lines[i] = json.dumps(doc, sort_keys=True, ensure_ascii=False)
            break
    tampered = SessionLog.from_jsonl("\n".join(lines) + "\n")
    with pytest.raises(ReplayError):
        replay(tampered, registry)


def test_truncated_trailing_record_dropped(registry, tmp_path):
    log = run_session(registry["word-macros"], taps((0, "ControlLeft")))
    text = log.to_jsonl()
    torn = text[: text.rstrip().rfind("\n") + 12]
    loaded = SessionLog.from_jsonl(torn)
    assert len(loaded.records) == len(log.records) - 1
    # a torn line mid-file is corruption, not crash recovery
    lines = text.strip().split("\n")
    lines[2] = lines[2][:10]
    with pytest.raises(ValueError):
        SessionLog.from_jsonl("\n".join(lines) + "\n")


def test_log_writer_flushes_per_record(registry, tmp_path):
    path = tmp_path / "session.jsonl"
    writer = LogWriter(path)
    runner = SessionRunner(registry["word-macros"], session_id="w1", writer=writer)
    runner.feed(KeyEvent(0, "ControlLeft", "down"))
    # file already contains everything logged so far, before finish/close
    on_disk = SessionLog.from_jsonl(path.read_text(encoding="utf-8"))
    assert len(on_disk.records) == len(runner.log.records)
    runner.finish()
    final = SessionLog.from_jsonl(path.read_text(encoding="utf-8"))
    assert final.to_jsonl() == runner.log.to_jsonl()


def test_jsonl_roundtrip_byte_identical(registry):
    log = run_session(registry["photo-browser"], taps((0, "KeyQ"), (100, "KeyG")))
    text = log.to_jsonl()
    assert SessionLog.from_jsonl(text).to_jsonl() == text


def test_unknown_profile_rejected(registry):
    log = run_session(registry["emojis"], [])
    log.header["profile"] = "mystery"
    with pytest.raises(ValueError, match="unknown profile"):
        replay(log, registry)


def test_profile_hash_mismatch_rejected(registry):
    log = run_session(registry["emojis"], [])
    log.header["profile_hash"] = "0" * 16
    with pytest.raises(ValueError, match="hash mismatch"):
        replay(log, registry)


def test_golden_corpus_covers_all_profiles(registry):
    names = {p.stem for p in GOLDEN.glob("*.jsonl")}
    assert names == set(registry)


def test_golden_corpus_replays(registry):
    for path in sorted(GOLDEN.glob("*.jsonl")):
        replay(path, registry)


def test_sinks_receive_records_in_order(registry):
    received = []
    log = run_session(registry["touchbar"],
                      [KeyEvent(0, "Digit1", "down"), KeyEvent(100, "Digit1", "up")],
                      sinks=[received.append])
    assert received == log.records
