#!/usr/bin/env python3
"""Record the golden session-log corpus: one scripted session per bundled
profile, written to tests/golden/.  Replay determinism is asserted against
these files, so regenerate them only when the engine's observable behavior
intentionally changes."""
from __future__ import annotations

import sys
from pathlib import Path

from keyreconf.app_profiles import build_registry, shuffled_password_profile
from keyreconf.layout import default_shuffle_group, load_bundled_layout
from keyreconf.mapping_engine import KeyEvent, MappingEngine
from keyreconf.session import run_session
from keyreconf.shuffle import RegionShuffle, shuffle

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"


def taps(*specs):
    """specs: (t, key) pairs; emits down at t and up at t+30."""
    events = []
    for t, key in specs:
        events.append(KeyEvent(t, key, "down"))
        events.append(KeyEvent(t + 30, key, "up"))
    return sorted(events, key=lambda e: (e.t_ms, e.edge == "down"))


def hold(t_down, t_up, key):
    return [KeyEvent(t_down, key, "down"), KeyEvent(t_up, key, "up")]


def script_emojis():
    return (
        hold(0, 400, "ControlLeft")
        + taps((50, "Digit1"), (150, "PageDown"), (250, "Digit2"))
        + taps((500, "KeyA"))
    )


def script_languages(profile):
    events = (
        hold(0, 300, "AltLeft")
        + taps((50, "PageDown"), (150, "PageDown"))
        + taps((400, "KeyL"))
    )
    # variant flow: replay the engine to find the green key for 'ä'
    engine = MappingEngine(profile)
    engine.start()
    for event in sorted(events, key=lambda e: e.t_ms):
        engine.apply_event(event)
    engine.apply_event(KeyEvent(500, "AltLeft", "down"))
    out = engine.apply_event(KeyEvent(550, "KeyA", "down"))
    pick = next(k for k, r in out.render.per_key.items()
                if r.highlight == "green" and r.glyph == "ä")
    events += [KeyEvent(500, "AltLeft", "down"), KeyEvent(550, "KeyA", "down"),
               KeyEvent(600, pick, "down"), KeyEvent(640, pick, "up"),
               KeyEvent(650, "KeyA", "up"), KeyEvent(660, "AltLeft", "up")]
    return sorted(events, key=lambda e: e.t_ms)


def script_browser_shortcuts():
    return (
        hold(0, 400, "ControlLeft")
        + taps((50, "Digit1"), (150, "ArrowLeft"), (250, "KeyR"))
        + taps((500, "KeyH"))
    )


def script_word_macros():
    return hold(0, 300, "ControlLeft") + taps((50, "KeyS"), (150, "KeyI"))


def script_window_manager():
    return taps((0, "KeyA"), (200, "KeyK"), (400, "Numpad5"))


def script_photo_browser():
    return taps((0, "KeyQ"), (150, "KeyG"), (300, "Numpad8"), (450, "Space"))


def script_whack_a_mole():
    keys = ["KeyQ", "KeyJ", "KeyZ", "KeyP", "KeyF", "KeyM", "KeyT", "KeyC"]
    return taps(*((400 * i, k) for i, k in enumerate(keys)))


def script_touchbar():
    events = hold(0, 200, "Digit1")                      # solo after the window
    events += [KeyEvent(400, "Digit1", "down"), KeyEvent(420, "Digit2", "down"),
               KeyEvent(500, "Digit1", "up"), KeyEvent(510, "Digit2", "up")]
    events += hold(700, 730, "Digit5")                   # resolved at finish
    return events


def script_password(profile, shuffled):
    inverse = {src: phys for phys, src in shuffled.perm.items()}
    layout = profile.base_layout
    events = []
    t = 0
    for ch in "password1":
        source = next(k.id for k in layout.keys
                      if k.default_legend == ch and k.id in shuffled.group)
        events += hold(t, t + 30, inverse[source])
        t += 100
    events += hold(t, t + 30, "Enter")
    return events


def main() -> int:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    layout = load_bundled_layout("iso105")
    registry = build_registry(layout)

    shuffled = shuffle(layout, default_shuffle_group(), RegionShuffle(6), 7)
    password_profile = shuffled_password_profile(registry["password-entry"], shuffled)

    sessions = {
        "emojis": (registry["emojis"], script_emojis(), None),
        "languages": (registry["languages"], script_languages(registry["languages"]), None),
        "browser-shortcuts": (registry["browser-shortcuts"], script_browser_shortcuts(), None),
        "word-macros": (registry["word-macros"], script_word_macros(), None),
        "window-manager": (registry["window-manager"], script_window_manager(), None),
        "photo-browser": (registry["photo-browser"], script_photo_browser(), None),
        "whack-a-mole": (registry["whack-a-mole"], script_whack_a_mole(), None),
        "password-entry": (password_profile, script_password(password_profile, shuffled), shuffled),
        "touchbar": (registry["touchbar"], script_touchbar(), None),
    }
    for name, (profile, events, shuffled_arg) in sorted(sessions.items()):
        log = run_session(profile, events, session_id=f"golden-{name}",
                          shuffled=shuffled_arg)
        path = GOLDEN_DIR / f"{name}.jsonl"
        path.write_text(log.to_jsonl(), encoding="utf-8")
        actions = len(log.actions())
        print(f"{path.name}: {len(log.records)} records, {actions} actions")
    return 0


if __name__ == "__main__":
    sys.exit(main())
