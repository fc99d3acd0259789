import math

import pytest

from keyreconf import app_profiles as apps
from keyreconf.mapping_engine import (Command, Coordinate, EmitText, KeyEvent,
                                      MappingEngine, SeekTo, SelectItem,
                                      build_image_map, validate_profile)
from keyreconf.layout import letter_keys


def down(t, key):
    return KeyEvent(t, key, "down")


def up(t, key):
    return KeyEvent(t, key, "up")


# ---------------------------------------------------------------------------
# Touch bar


def test_touchbar_solo_targets_arithmetic(iso):
    profile = apps.build_touchbar(apps.TouchBarProfileCfg(), iso)
    layer = profile.layers[0]
    targets = [layer.bindings[f"Digit{d}"].seconds for d in "1234567890"]
    assert targets == [10.0 * i for i in range(1, 11)]
    steps = [b - a for a, b in zip(targets, targets[1:])]
    assert all(s == pytest.approx(10.0) for s in steps)
    assert targets[0] == 10.0  # key 1 jumps to second 10 in a 100 s film
    assert targets[-1] == 100.0  # last key lands on the media end


def test_touchbar_chords_are_midpoints(iso):
    profile = apps.build_touchbar(apps.TouchBarProfileCfg(), iso)
    layer = profile.layers[0]
    for rule in profile.chord_rules:
        a, b = sorted(rule.members, key=lambda k: profile.key_order.index(k))
        engine = MappingEngine(profile)
        engine.start()
        engine.apply_event(down(0, a))
        out = engine.apply_event(down(10, b))
        expect = (layer.bindings[a].seconds + layer.bindings[b].seconds) / 2
        assert out.actions == [SeekTo(expect)]


def test_touchbar_variant_render_hints(iso):
    full = apps.build_touchbar(apps.TouchBarProfileCfg(variant="VTHighlight"), iso)
    one_row = apps.build_touchbar(apps.TouchBarProfileCfg(variant="VTOneRow"), iso)
    invisible = apps.build_touchbar(apps.TouchBarProfileCfg(variant="VTInvisible"), iso)

    render = MappingEngine(full).start()
    assert render.geometry == "full_keyboard"
    assert render.per_key["Digit1"].highlight is not None
    assert render.per_key["KeyQ"].visible

    render = MappingEngine(one_row).start()
    assert render.geometry == "one_row_with_bounds"
    assert render.per_key["Digit1"].visible
    assert not render.per_key["KeyQ"].visible
    assert any(o.kind == "bounds" for o in render.overlays)

    render = MappingEngine(invisible).start()
    assert render.geometry == "geometry_only"
    assert not any(r.visible for r in render.per_key.values())
    assert any(o.kind == "slider" for o in render.overlays)


def test_touchbar_cfg_validation(iso):
    with pytest.raises(apps.ConfigError):
        apps.TouchBarProfileCfg(num_keys=1)
    with pytest.raises(apps.ConfigError):
        apps.TouchBarProfileCfg(media_length_s=0)
    with pytest.raises(apps.ConfigError):
        apps.TouchBarProfileCfg(variant="VTNope")


def test_touchbar_smaller_bar(iso):
    profile = apps.build_touchbar(
        apps.TouchBarProfileCfg(num_keys=5, media_length_s=50), iso)
    layer = profile.layers[0]
    assert layer.bindings["Digit5"].seconds == 50.0
    assert len(profile.chord_rules) == 4


# ---------------------------------------------------------------------------
# Paged sets


def test_photo_browser_24_on_full_board(iso):
    profile = apps.build_photo_browser(iso, photos=24)
    assert len(profile.shared_groups) == 24
    assert all(len(g.members) >= 2 for g in profile.shared_groups)
    # every item reachable exactly once
    items = sorted(g.action.item for g in profile.shared_groups)
    assert items == sorted(f"photo-{i:03d}" for i in range(1, 25))
    # groups pairwise disjoint
    seen = set()
    for group in profile.shared_groups:
        assert not (seen & group.members)
        seen |= group.members
    assert validate_profile(profile) == []


def test_photo_browser_104_single_key_bindings(ansi):
    profile = apps.build_paged_profile(
        "photo", apps.PagedSetCfg(tuple(f"p{i}" for i in range(104))), ansi)
    assert profile.shared_groups == ()
    layer = profile.layers[0]
    select = [a for a in layer.bindings.values() if isinstance(a, SelectItem)]
    assert len(select) == 104


def test_photo_footprint_diagnostic(iso):
    # 40 items on 105 keys: footprint 2, below the 4-key usability floor
    plan = apps.paging_plan("photo", [f"p{i}" for i in range(40)], iso)
    assert plan.group_size == 2
    assert plan.diagnostics and plan.diagnostics[0].code == "small-footprint"
    # 24 items leave room for 4-key blocks: clean
    assert apps.paging_plan("photo", [f"p{i}" for i in range(24)], iso).diagnostics == ()


def test_emoji_pages_and_clamping(iso):
    items = tuple(f"e{i}" for i in range(250))
    plan = apps.paging_plan("emoji", items, iso)
    assert plan.page_size == 40
    assert plan.pages == math.ceil(250 / 40) == 7
    profile = apps.build_paged_profile("emoji", apps.PagedSetCfg(items), iso)
    engine = MappingEngine(profile)
    engine.start()
    engine.apply_event(down(0, "ControlLeft"))
    # page down past the last page clamps
    t = 10
    for _ in range(10):
        engine.apply_event(down(t, "PageDown"))
        engine.apply_event(up(t + 1, "PageDown"))
        t += 10
    out = engine.apply_event(down(t, "Digit1"))
    # last page starts at item 240; Digit1 is the first page key
    assert out.actions == [EmitText("e240")]
    engine.apply_event(up(t + 1, "Digit1"))
    # page up clamps at the first page
    for _ in range(10):
        engine.apply_event(down(t + 10, "PageUp"))
        engine.apply_event(up(t + 11, "PageUp"))
        t += 10
    out = engine.apply_event(down(t + 20, "Digit1"))
    assert out.actions == [EmitText("e0")]


def test_emoji_every_item_reachable(iso):
    items = tuple(f"e{i}" for i in range(100))
    profile = apps.build_paged_profile("emoji", apps.PagedSetCfg(items), iso)
    bound = []
    for layer in profile.layers:
        if layer.name.startswith("page-"):
            bound.extend(a.text for a in layer.bindings.values()
                         if isinstance(a, EmitText))
    assert sorted(bound) == sorted(items)
    assert len(set(bound)) == len(items)


def test_window_manager_three_slabs(iso):
    profile = apps.build_window_manager(iso, windows=3)
    assert len(profile.shared_groups) == 3
    sizes = [len(g.members) for g in profile.shared_groups]
    assert sum(sizes) > 60  # most of the board is covered
    assert validate_profile(profile) == []
    engine = MappingEngine(profile)
    engine.start()
    out = engine.apply_event(down(0, "KeyA"))
    assert len(out.actions) == 1
    assert isinstance(out.actions[0], SelectItem)


def test_paged_cfg_validation():
    with pytest.raises(apps.ConfigError):
        apps.PagedSetCfg(())
    with pytest.raises(apps.ConfigError):
        apps.PagedSetCfg(("a",), current_page=-1)


def test_paged_profile_starts_on_requested_page(iso):
    items = tuple(f"e{i}" for i in range(100))
    profile = apps.build_paged_profile("emoji", apps.PagedSetCfg(items, current_page=2), iso)
    engine = MappingEngine(profile)
    engine.start()
    engine.apply_event(down(0, "ControlLeft"))
    out = engine.apply_event(down(10, "Digit1"))
    assert out.actions == [EmitText("e80")]
    with pytest.raises(apps.ConfigError, match="out of range"):
        apps.build_paged_profile("emoji", apps.PagedSetCfg(items, current_page=9), iso)


# ---------------------------------------------------------------------------
# Languages


def test_language_cycle_wraps(iso):
    profile = apps.build_language_profile(iso)
    engine = MappingEngine(profile)
    engine.start()
    t = 0
    # cycle through all six languages and wrap back to latin
    engine.apply_event(down(t, "AltLeft"))
    for _ in range(len(apps.LANGUAGES)):
        t += 10
        engine.apply_event(down(t, "PageDown"))
        engine.apply_event(up(t + 1, "PageDown"))
    engine.apply_event(up(t + 2, "AltLeft"))
    out = engine.apply_event(down(t + 10, "KeyL"))
    assert out.actions == [EmitText("l")]  # wrapped to latin


def test_language_cyrillic_emits_glyph(iso):
    profile = apps.build_language_profile(iso)
    engine = MappingEngine(profile)
    engine.start()
    engine.apply_event(down(0, "AltLeft"))
    engine.apply_event(down(10, "PageDown")); engine.apply_event(up(11, "PageDown"))
    engine.apply_event(down(20, "PageDown")); engine.apply_event(up(21, "PageDown"))
    engine.apply_event(up(30, "AltLeft"))
    out = engine.apply_event(down(40, "KeyL"))
    assert out.actions == [EmitText("д")]


def test_language_variant_flow(iso):
    profile = apps.build_language_profile(iso)
    engine = MappingEngine(profile)
    engine.start()
    engine.apply_event(down(0, "AltLeft"))
    out = engine.apply_event(down(10, "KeyA"))
    greens = {k: r.glyph for k, r in out.render.per_key.items()
              if r.highlight == "green"}
    pick = next(k for k, g in greens.items() if g == "ä")
    out = engine.apply_event(down(20, pick))
    assert out.actions == [EmitText("ä")]


def test_language_missing_table_rejected(iso):
    with pytest.raises(apps.ConfigError):
        apps.build_language_profile(iso, languages=("klingon",))


# ---------------------------------------------------------------------------
# Whack-a-mole


@pytest.fixture
def mole_cfg(iso):
    grid = build_image_map(letter_keys(), iso)
    return apps.MoleGameCfg(grid=grid, seed=42)


def test_mole_spawns_and_expires(mole_cfg):
    state = apps.mole_tick(apps.GameState(), mole_cfg, 0)
    assert state.active  # schedule point at t=0
    later = apps.mole_tick(state, mole_cfg, mole_cfg.mole_lifetime_ms + 1)
    assert all(m.expiry_t > later.clock for m in later.active)


def test_mole_hit_scores(mole_cfg):
    state = apps.mole_tick(apps.GameState(), mole_cfg, 0)
    mole = state.active[0]
    rows, cols = mole_cfg.grid.grid
    hit = Coordinate((mole.cell[1] + 0.5) / cols, (mole.cell[0] + 0.5) / rows)
    state2 = apps.mole_tick(state, mole_cfg, 100, [hit])
    assert state2.score == state.score + 1
    assert state2.reactions_ms[-1] == 100 - mole.spawned_t
    assert all(m.cell != mole.cell for m in state2.active)


def test_mole_miss_logged(mole_cfg):
    state = apps.mole_tick(apps.GameState(), mole_cfg, 0)
    occupied = {m.cell for m in state.active}
    rows, cols = mole_cfg.grid.grid
    empty = next((r, c) for r in range(rows) for c in range(cols)
                 if (r, c) not in occupied)
    hit = Coordinate((empty[1] + 0.5) / cols, (empty[0] + 0.5) / rows)
    state2 = apps.mole_tick(state, mole_cfg, 50, [hit])
    assert state2.score == state.score
    assert state2.misses == state.misses + 1


def test_mole_clock_monotone(mole_cfg):
    state = apps.mole_tick(apps.GameState(), mole_cfg, 100)
    with pytest.raises(apps.ConfigError):
        apps.mole_tick(state, mole_cfg, 50)


def test_mole_scripted_run_reproducible(mole_cfg):
    def play():
        state = apps.GameState()
        rows, cols = mole_cfg.grid.grid
        for step in range(1, 30):
            t = step * 333
            hits = []
            if state.active:
                mole = state.active[0]
                hits.append(Coordinate((mole.cell[1] + 0.5) / cols,
                                       (mole.cell[0] + 0.5) / rows))
            state = apps.mole_tick(state, mole_cfg, t, hits)
        return state

    assert play() == play()
    assert play().score > 0


# ---------------------------------------------------------------------------
# Registry and session config


def test_registry_has_all_nine(registry):
    assert sorted(registry) == sorted([
        "emojis", "languages", "browser-shortcuts", "word-macros",
        "window-manager", "photo-browser", "whack-a-mole", "password-entry",
        "touchbar",
    ])
    for profile in registry.values():
        assert validate_profile(profile) == []


def test_browser_shortcuts_commands(registry):
    engine = MappingEngine(registry["browser-shortcuts"])
    engine.start()
    engine.apply_event(down(0, "ControlLeft"))
    out = engine.apply_event(down(10, "Digit1"))
    assert out.actions == [Command("open-bookmark", ("bm-1",))]
    out = engine.apply_event(down(20, "ArrowLeft"))
    assert out.actions == [Command("navigate-back")]


def test_word_macros_commands(registry):
    engine = MappingEngine(registry["word-macros"])
    engine.start()
    engine.apply_event(down(0, "ControlLeft"))
    out = engine.apply_event(down(10, "KeyS"))
    assert out.actions == [Command("insert-signature")]


def test_apply_session_config_mole_seed(registry):
    profile = apps.apply_session_config(registry["whack-a-mole"], {"mole_seed": 9})
    assert profile.overlay_payload["seed"] == 9
    # untouched without config
    assert apps.apply_session_config(registry["whack-a-mole"], {}) \
        is registry["whack-a-mole"]


def test_apply_session_config_touchbar_variant(registry):
    profile = apps.apply_session_config(
        registry["touchbar"], {"touchbar": {"variant": "VTInvisible"}})
    assert profile.render_hint == "geometry_only"


def test_shuffled_password_profile_binds_displayed_glyphs(iso, registry):
    from keyreconf.layout import default_shuffle_group
    from keyreconf.shuffle import RegionShuffle, decode_press, shuffle
    shuffled = shuffle(iso, default_shuffle_group(), RegionShuffle(6), 7)
    profile = apps.shuffled_password_profile(registry["password-entry"], shuffled)
    layer = profile.layers[profile.active_layer]
    for key_id in shuffled.group:
        assert layer.bindings[key_id] == EmitText(decode_press(shuffled, key_id))
        assert layer.legends[key_id] == decode_press(shuffled, key_id)
