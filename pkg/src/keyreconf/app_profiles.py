"""Factories for the bundled applications as mapping profiles.

Nine applications ship: emojis, languages, browser shortcuts, word macros,
window manager, photo browser, whack-a-mole, secure password entry and the
virtual touch bar.  Each is expressed purely as profile configuration; the
only app logic beyond mappings lives here too (mole game loop, paging
plans).
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .layout import (KeyboardLayout, KeyId, assets_dir, default_shuffle_group,
                     digit_keys, letter_keys, load_bundled_layout)
from .mapping_engine import (Action, ChordRule, Command, Coordinate, Diagnostic,
                             EmitText, ImageMap, Layer, LayerGroup, MappingProfile,
                             RenderHint, SeekTo, SelectItem, SharedActionGroup,
                             build_image_map)
from .shuffle import ShuffledLayout, derive_seed


class ConfigError(ValueError):
    pass


# Groups smaller than this render items too small to be usable, so the
# allocator prefers it whenever the item count permits.
MIN_GROUP_FOOTPRINT = 4

# 40 bindable keys per page: letters, digits and four punctuation keys.
PAGE_KEY_GROUP: tuple[KeyId, ...] = tuple(
    digit_keys() + letter_keys() + ["Comma", "Period", "Semicolon", "Slash"]
)

LANGUAGES = ("latin", "arabic", "cyrillic", "greek", "hindi", "japanese")


def _load_asset(relative: str) -> dict:
    path = assets_dir() / relative
    if not path.exists():
        raise ConfigError(f"missing asset {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _typing_bindings(layout: KeyboardLayout) -> dict[KeyId, Action]:
    """Plain text entry: every single-character legend emits itself."""
    out: dict[KeyId, Action] = {}
    for key in layout.keys:
        if len(key.default_legend) == 1:
            out[key.id] = EmitText(key.default_legend)
    out["Enter"] = Command("submit")
    out["Backspace"] = Command("backspace")
    return out


# ---------------------------------------------------------------------------
# Virtual touch bar


@dataclass(frozen=True)
class TouchBarProfileCfg:
    num_keys: int = 10
    media_length_s: float = 100.0
    variant: str = "VTHighlight"  # VTHighlight | VTOneRow | VTInvisible
    chord_window_ms: int = 50

    def __post_init__(self):
        if self.num_keys < 2:
            raise ConfigError("touch bar needs at least two keys")
        if self.media_length_s <= 0:
            raise ConfigError("media length must be positive")
        if self.variant not in ("VTHighlight", "VTOneRow", "VTInvisible"):
            raise ConfigError(f"unknown touch bar variant {self.variant!r}")


_VARIANT_HINTS = {
    "VTHighlight": RenderHint.FULL_KEYBOARD,
    "VTOneRow": RenderHint.ONE_ROW_WITH_BOUNDS,
    "VTInvisible": RenderHint.GEOMETRY_ONLY,
}


def build_touchbar(cfg: TouchBarProfileCfg, layout: KeyboardLayout) -> MappingProfile:
    """Digit row as a seek bar: key i jumps to media_length * i / num_keys;
    two adjacent keys select the midpoint."""
    keys = [f"Digit{d}" for d in "1234567890"][: cfg.num_keys]
    missing = [k for k in keys if k not in layout]
    if missing:
        raise ConfigError(f"layout lacks digit keys {missing}")
    bindings: dict[KeyId, Action] = {}
    legends: dict[KeyId, str] = {}
    for i, key_id in enumerate(keys, start=1):
        target = cfg.media_length_s * i / cfg.num_keys
        bindings[key_id] = SeekTo(target)
        legends[key_id] = f"{target:g}s"
    chords = tuple(
        ChordRule(members=frozenset({keys[i], keys[i + 1]}),
                  combine="midpoint", window_ms=cfg.chord_window_ms)
        for i in range(len(keys) - 1)
    )
    return MappingProfile(
        name="touchbar",
        base_layout=layout,
        layers=(Layer("seek", bindings, legends),),
        chord_rules=chords,
        render_hint=_VARIANT_HINTS[cfg.variant],
        key_order=tuple(keys),
        highlight_bound=cfg.variant == "VTHighlight",
        overlay_payload={"media_length_s": cfg.media_length_s, "variant": cfg.variant},
    )


# ---------------------------------------------------------------------------
# Paged item sets (emojis, bookmarks, photos, windows)


@dataclass(frozen=True)
class PagedSetCfg:
    items: tuple[str, ...]
    current_page: int = 0

    def __post_init__(self):
        if not self.items:
            raise ConfigError("paged set needs at least one item")
        if self.current_page < 0:
            raise ConfigError("current_page must be >= 0")


@dataclass(frozen=True)
class PagingPlan:
    pages: int
    page_size: int
    group_size: int  # 1 means per-key bindings
    diagnostics: tuple[Diagnostic, ...] = ()


PAGE_NAV_BINDINGS: dict[KeyId, Action] = {
    "PageUp": Command("page.prev"),
    "PageDown": Command("page.next"),
}
PAGE_NAV_LEGENDS = {"PageUp": "◀ page", "PageDown": "page ▶"}


def paging_plan(kind: str, items: Sequence[str], layout: KeyboardLayout) -> PagingPlan:
    if kind in ("emoji", "bookmark"):
        page_size = len(PAGE_KEY_GROUP)
        return PagingPlan(pages=math.ceil(len(items) / page_size),
                          page_size=page_size, group_size=1)
    if kind not in ("photo", "window"):
        raise ConfigError(f"unknown paged set kind {kind!r}")
    total = len(layout)
    group_size = max(1, total // len(items))
    diagnostics: tuple[Diagnostic, ...] = ()
    if 1 < group_size < MIN_GROUP_FOOTPRINT:
        diagnostics = (Diagnostic(
            "small-footprint",
            f"{kind} thumbnails span {group_size} keys; below {MIN_GROUP_FOOTPRINT} "
            "keys they render too small to use comfortably"),)
    if group_size > 1:
        # blocks: everything fits one page by construction
        return PagingPlan(pages=1, page_size=len(items), group_size=group_size,
                          diagnostics=diagnostics)
    page_size = total if len(items) <= total else total - len(PAGE_NAV_BINDINGS)
    return PagingPlan(pages=math.ceil(len(items) / page_size),
                      page_size=page_size, group_size=1,
                      diagnostics=diagnostics)


def _tile_blocks(layout: KeyboardLayout, count: int,
                 exclude: frozenset[KeyId] = frozenset()) -> list[list[KeyId]]:
    """Split the keyboard into ``count`` rectangular key blocks.

    Keys are binned into an r x c tile grid over the board bounds; among
    grids with at least ``count`` non-empty tiles the one maximizing the
    smallest block wins.  Blocks come back in row-major tile order.
    """
    keys = [k for k in layout.keys if k.id not in exclude]
    if not keys:
        raise ConfigError("no keys left to allocate")
    x0 = min(k.rect[0] for k in keys)
    y0 = min(k.rect[1] for k in keys)
    x1 = max(k.rect[0] + k.rect[2] for k in keys)
    y1 = max(k.rect[1] + k.rect[3] for k in keys)
    width, height = x1 - x0, y1 - y0
    row_count = len({k.row for k in keys})

    best: tuple[tuple[int, int, int], list[list[KeyId]]] | None = None
    for r_t in range(1, row_count + 1):
        c_t = math.ceil(count / r_t)
        tiles: dict[tuple[int, int], list[KeyId]] = {}
        for key in keys:
            cx, cy = key.center
            ci = min(int((cx - x0) / width * c_t), c_t - 1)
            ri = min(int((cy - y0) / height * r_t), r_t - 1)
            tiles.setdefault((ri, ci), []).append(key.id)
        blocks = [sorted(tiles[t], key=layout.sort_key) for t in sorted(tiles)]
        if len(blocks) < count:
            continue
        chosen = blocks[:count]
        rank = (min(len(b) for b in chosen), -(r_t * c_t), -r_t)
        if best is None or rank > best[0]:
            best = (rank, chosen)
    if best is None:
        raise ConfigError(f"cannot split layout into {count} blocks")
    return best[1]


def build_paged_profile(kind: str, cfg: PagedSetCfg, layout: KeyboardLayout,
                        *, name: str | None = None,
                        modifier: KeyId | None = None) -> MappingProfile:
    """Items over key pages.

    emoji/bookmark: one item per key on a modifier-activated page layer.
    photo/window: shared key blocks on base pages; any key in a block
    selects the item.  Page navigation clamps at the ends.
    """
    plan = paging_plan(kind, cfg.items, layout)
    if cfg.current_page >= plan.pages:
        raise ConfigError(
            f"current_page {cfg.current_page} out of range for {plan.pages} pages")
    profile_name = name or f"{kind}-browser"

    if kind in ("emoji", "bookmark"):
        page_layers = []
        for page in range(plan.pages):
            chunk = cfg.items[page * plan.page_size:(page + 1) * plan.page_size]
            bindings: dict[KeyId, Action] = dict(PAGE_NAV_BINDINGS)
            legends: dict[KeyId, str] = dict(PAGE_NAV_LEGENDS)
            for key_id, item in zip(PAGE_KEY_GROUP, chunk):
                if kind == "emoji":
                    bindings[key_id] = EmitText(item)
                else:
                    bindings[key_id] = Command("open-bookmark", (item,))
                legends[key_id] = item
            page_layers.append(Layer(f"page-{page}", bindings, legends))
        base = Layer("base", _typing_bindings(layout), {})
        return MappingProfile(
            name=profile_name,
            base_layout=layout,
            layers=(base, *page_layers),
            modifier_rules={modifier or "ControlLeft": "pages"},
            layer_groups={"pages": LayerGroup(tuple(l.name for l in page_layers),
                                              "clamp", cfg.current_page)},
        )

    # photo / window: shared key blocks (or per-key selection at footprint 1)
    reserve = frozenset(PAGE_NAV_BINDINGS) if plan.pages > 1 else frozenset()
    layers = []
    shared: list[SharedActionGroup] = []
    for page in range(plan.pages):
        chunk = cfg.items[page * plan.page_size:(page + 1) * plan.page_size]
        bindings: dict[KeyId, Action] = dict(PAGE_NAV_BINDINGS) if plan.pages > 1 else {}
        legends = dict(PAGE_NAV_LEGENDS) if plan.pages > 1 else {}
        layer_name = f"page-{page}"
        if plan.group_size == 1:
            usable = [k.id for k in sorted(layout.keys, key=lambda k: (k.row, k.col))
                      if k.id not in reserve]
            for key_id, item in zip(usable, chunk):
                bindings[key_id] = SelectItem(item)
                legends[key_id] = item
        else:
            for block, item in zip(_tile_blocks(layout, len(chunk), reserve), chunk):
                if len(block) == 1:
                    bindings[block[0]] = SelectItem(item)
                    legends[block[0]] = item
                    continue
                shared.append(SharedActionGroup(
                    members=frozenset(block),
                    action=SelectItem(item),
                    overlay={"kind": kind, "item": item},
                    layer=layer_name,
                ))
        layers.append(Layer(layer_name, bindings, legends))
    return MappingProfile(
        name=profile_name,
        base_layout=layout,
        layers=tuple(layers),
        shared_groups=tuple(shared),
        layer_groups={"pages": LayerGroup(tuple(l.name for l in layers),
                                          "clamp", cfg.current_page)},
        base_target="pages",
    )


# ---------------------------------------------------------------------------
# Languages and special characters


def load_language_table(lang: str) -> dict[KeyId, str]:
    doc = _load_asset(f"languages/{lang}.json")
    return dict(doc["keys"])


def build_language_profile(layout: KeyboardLayout,
                           languages: Sequence[str] = LANGUAGES) -> MappingProfile:
    """Language layers cycled with modifier + page up/down; ALT + base letter
    temporarily shows accent variants on neighboring keys."""
    for lang in languages:
        if not (assets_dir() / "languages" / f"{lang}.json").exists():
            raise ConfigError(f"no bundled mapping table for language {lang!r}")
    layers = []
    for lang in languages:
        table = load_language_table(lang)
        bindings = _typing_bindings(layout)
        legends: dict[KeyId, str] = {}
        for key_id, glyph in table.items():
            if key_id in layout:
                bindings[key_id] = EmitText(glyph)
                legends[key_id] = glyph
        layers.append(Layer(lang, bindings, legends))
    nav = Layer("lang-nav", dict(PAGE_NAV_BINDINGS), dict(PAGE_NAV_LEGENDS))
    variants_doc = _load_asset("data/variants_german.json")
    return MappingProfile(
        name="languages",
        base_layout=layout,
        layers=(*layers, nav),
        modifier_rules={"AltLeft": "lang-nav"},
        layer_groups={"languages": LayerGroup(tuple(l.name for l in layers), "wrap")},
        base_target="languages",
        variants={k: tuple(v) for k, v in variants_doc["variants"].items()},
        variant_modifier=variants_doc["modifier"],
    )


# ---------------------------------------------------------------------------
# Shortcuts and macros


def build_browser_shortcuts(layout: KeyboardLayout) -> MappingProfile:
    doc = _load_asset("data/bookmarks.json")
    bindings: dict[KeyId, Action] = {
        "ArrowLeft": Command("navigate-back"),
        "ArrowRight": Command("navigate-forward"),
        "KeyH": Command("navigate-home"),
        "KeyR": Command("refresh"),
        "Escape": Command("cancel"),
    }
    legends = {
        "ArrowLeft": "◀ back", "ArrowRight": "forward ▶", "KeyH": "home",
        "KeyR": "refresh", "Escape": "cancel",
    }
    for i, bookmark in enumerate(doc["bookmarks"], start=1):
        key_id = f"Digit{i % 10}"
        bindings[key_id] = Command("open-bookmark", (bookmark["id"],))
        legends[key_id] = bookmark["title"]
    base = Layer("base", _typing_bindings(layout), {})
    return MappingProfile(
        name="browser-shortcuts",
        base_layout=layout,
        layers=(base, Layer("shortcuts", bindings, legends)),
        modifier_rules={"ControlLeft": "shortcuts"},
    )


def build_word_macros(layout: KeyboardLayout) -> MappingProfile:
    bindings: dict[KeyId, Action] = {
        "KeyS": Command("insert-signature"),
        "KeyA": Command("insert-sender-address"),
        "KeyI": Command("insert-image"),
    }
    legends = {"KeyS": "signature", "KeyA": "address", "KeyI": "image"}
    base = Layer("base", _typing_bindings(layout), {})
    return MappingProfile(
        name="word-macros",
        base_layout=layout,
        layers=(base, Layer("macros", bindings, legends)),
        modifier_rules={"ControlLeft": "macros"},
    )


# ---------------------------------------------------------------------------
# Whack-a-mole


@dataclass(frozen=True)
class MoleGameCfg:
    grid: ImageMap
    spawn_interval_ms: int = 1200
    mole_lifetime_ms: int = 1500
    seed: int = 0

    def __post_init__(self):
        if self.spawn_interval_ms <= 0 or self.mole_lifetime_ms <= 0:
            raise ConfigError("mole intervals must be positive")


@dataclass(frozen=True)
class Mole:
    cell: tuple[int, int]
    spawned_t: int
    expiry_t: int


@dataclass(frozen=True)
class GameState:
    clock: int = 0
    score: int = 0
    spawned: int = 0
    next_spawn_t: int = 0
    active: tuple[Mole, ...] = ()
    reactions_ms: tuple[int, ...] = ()
    misses: int = 0


def _spawn_interval(cfg: MoleGameCfg, index: int) -> int:
    u = random.Random(derive_seed(cfg.seed, "interval", index)).random()
    return max(1, int(-cfg.spawn_interval_ms * math.log(1.0 - u)))


def _spawn_cell(cfg: MoleGameCfg, index: int, free: Sequence[tuple[int, int]]) -> tuple[int, int]:
    rng = random.Random(derive_seed(cfg.seed, "cell", index))
    return free[rng.randrange(len(free))]


def _cell_for_coordinate(grid: ImageMap, u: float, v: float) -> tuple[int, int]:
    rows, cols = grid.grid
    return (min(int(v * rows), rows - 1), min(int(u * cols), cols - 1))


def mole_tick(state: GameState, cfg: MoleGameCfg, now: int,
              hits: Sequence[Coordinate] = ()) -> GameState:
    """Advance the game to ``now`` and apply any hammer hits landing then."""
    if now < state.clock:
        raise ConfigError("game clock cannot run backwards")
    rows, cols = cfg.grid.grid
    all_cells = [(r, c) for r in range(rows) for c in range(cols)]
    active = list(state.active)
    spawned = state.spawned
    next_spawn = state.next_spawn_t

    while next_spawn <= now:
        active = [m for m in active if m.expiry_t > next_spawn]
        occupied = {m.cell for m in active}
        free = [c for c in all_cells if c not in occupied]
        if free:
            cell = _spawn_cell(cfg, spawned, free)
            active.append(Mole(cell, next_spawn, next_spawn + cfg.mole_lifetime_ms))
        spawned += 1
        next_spawn += _spawn_interval(cfg, spawned)

    active = [m for m in active if m.expiry_t > now]

    score = state.score
    misses = state.misses
    reactions = list(state.reactions_ms)
    for hit in hits:
        cell = _cell_for_coordinate(cfg.grid, hit.u, hit.v)
        match = next((m for m in active if m.cell == cell), None)
        if match is None:
            misses += 1
            continue
        active.remove(match)
        score += 1
        reactions.append(now - match.spawned_t)

    return GameState(clock=now, score=score, spawned=spawned,
                     next_spawn_t=next_spawn, active=tuple(active),
                     reactions_ms=tuple(reactions), misses=misses)


def mole_overlay(state: GameState, cfg: MoleGameCfg) -> dict:
    return {
        "game": "whack-a-mole",
        "score": state.score,
        "misses": state.misses,
        "moles": sorted(list(m.cell) for m in state.active),
    }


def build_whack_a_mole(layout: KeyboardLayout, cfg: MoleGameCfg | None = None) -> MappingProfile:
    image_map = build_image_map(letter_keys(), layout)
    return MappingProfile(
        name="whack-a-mole",
        base_layout=layout,
        layers=(Layer("playfield", {}, {}),),
        image_maps=(image_map,),
        overlay_payload={
            "game": "whack-a-mole",
            "spawn_interval_ms": (cfg or MoleGameCfg(image_map)).spawn_interval_ms,
            "mole_lifetime_ms": (cfg or MoleGameCfg(image_map)).mole_lifetime_ms,
        },
    )


# ---------------------------------------------------------------------------
# Secure password entry and emojis


def build_password_profile(layout: KeyboardLayout) -> MappingProfile:
    group = default_shuffle_group()
    bindings: dict[KeyId, Action] = {}
    for key_id in sorted(group, key=layout.sort_key):
        bindings[key_id] = EmitText(layout.key(key_id).default_legend)
    bindings["Space"] = EmitText(" ")
    bindings["Enter"] = Command("submit")
    bindings["Backspace"] = Command("backspace")
    return MappingProfile(
        name="password-entry",
        base_layout=layout,
        layers=(Layer("entry", bindings, {}),),
    )


def shuffled_password_profile(profile: MappingProfile,
                              shuffled: ShuffledLayout) -> MappingProfile:
    """Rebind the entry layer so each physical key emits the legend shown on
    it, per the active permutation."""
    layer = profile.layers[profile.active_layer]
    bindings = dict(layer.bindings)
    legends = dict(layer.legends)
    layout = profile.base_layout
    for physical in shuffled.group:
        source = shuffled.perm.get(physical, physical)
        glyph = layout.key(source).default_legend
        bindings[physical] = EmitText(glyph)
        legends[physical] = glyph
    layers = tuple(
        Layer(l.name, bindings, legends) if l.name == layer.name else l
        for l in profile.layers
    )
    return replace(profile, layers=layers)


def build_emojis(layout: KeyboardLayout) -> MappingProfile:
    doc = _load_asset("data/emoji_default.json")
    return build_paged_profile(
        "emoji", PagedSetCfg(tuple(doc["emojis"])), layout, name="emojis")


def build_photo_browser(layout: KeyboardLayout, photos: int = 24) -> MappingProfile:
    items = tuple(f"photo-{i:03d}" for i in range(1, photos + 1))
    return build_paged_profile("photo", PagedSetCfg(items), layout, name="photo-browser")


def build_window_manager(layout: KeyboardLayout, windows: int = 3) -> MappingProfile:
    items = tuple(f"window-{i}" for i in range(1, windows + 1))
    return build_paged_profile("window", PagedSetCfg(items), layout, name="window-manager")


# ---------------------------------------------------------------------------
# Registry


PROFILE_DESCRIPTIONS = {
    "emojis": "emoji set on a modifier layer, paged with page up/down",
    "languages": "Arabic/Cyrillic/Greek/Hindi/Japanese layers plus accent variants",
    "browser-shortcuts": "navigation, refresh, cancel and ten bookmarks",
    "word-macros": "document macros on a modifier layer",
    "window-manager": "open windows on key blocks, press below to switch",
    "photo-browser": "photos on key blocks, any key in a block selects",
    "whack-a-mole": "keyboard as a mole field, keys address grid cells",
    "password-entry": "shuffled legends for shoulder-surfing-resistant entry",
    "touchbar": "digit row as a video seek bar with chorded midpoints",
}


def apply_session_config(profile: MappingProfile, config: Mapping | None) -> MappingProfile:
    """Session-scoped deterministic profile tweaks.

    The same config recorded in a session log must rebuild the same profile,
    so only whitelisted, order-stable transformations are allowed here.
    """
    if not config:
        return profile
    out = profile
    if profile.name == "whack-a-mole" and "mole_seed" in config:
        payload = dict(out.overlay_payload or {})
        payload["seed"] = int(config["mole_seed"])
        out = replace(out, overlay_payload=payload)
    if profile.name == "touchbar" and "touchbar" in config:
        cfg = TouchBarProfileCfg(
            num_keys=int(config["touchbar"].get("num_keys", 10)),
            media_length_s=float(config["touchbar"].get("media_length_s", 100.0)),
            variant=config["touchbar"].get("variant", "VTHighlight"),
            chord_window_ms=int(config["touchbar"].get("chord_window_ms", 50)),
        )
        out = build_touchbar(cfg, profile.base_layout)
    return out


def build_registry(layout: KeyboardLayout | None = None) -> dict[str, MappingProfile]:
    """All nine bundled application profiles keyed by name."""
    layout = layout or load_bundled_layout("iso105")
    profiles = [
        build_emojis(layout),
        build_language_profile(layout),
        build_browser_shortcuts(layout),
        build_word_macros(layout),
        build_window_manager(layout),
        build_photo_browser(layout),
        build_whack_a_mole(layout),
        build_password_profile(layout),
        build_touchbar(TouchBarProfileCfg(), layout),
    ]
    return {p.name: p for p in profiles}
