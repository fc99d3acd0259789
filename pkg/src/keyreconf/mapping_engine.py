"""Layered key-to-action mapping with chords, shared groups and image maps.

The engine consumes a stream of key edge events and emits actions plus
render states.  It is deterministic: folding the same event stream over the
same profile always yields the same actions and the same final render
state, which is what makes session logs replayable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, Union

from .layout import KeyboardLayout, KeyId, load_bundled_layout

PROFILE_SCHEMA = 1

# Highlight clears if no variant is picked within this long (the flow is
# "temporary" but no duration is given anywhere authoritative).
VARIANT_TIMEOUT_MS = 3000
DEFAULT_CHORD_WINDOW_MS = 50

VARIANT_HIGHLIGHT = "green"
BOUND_HIGHLIGHT = "#ffd54f"


class EventError(ValueError):
    """Event refers to a key the profile's layout does not have."""


class ProfileError(ValueError):
    """Profile failed validation."""


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class EmitText:
    text: str


@dataclass(frozen=True)
class Command:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Coordinate:
    u: float
    v: float

    def __post_init__(self):
        if not (0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ValueError("coordinate components must lie in [0, 1]")


@dataclass(frozen=True)
class SeekTo:
    seconds: float

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("seek target must be >= 0")


@dataclass(frozen=True)
class SelectItem:
    item: str


@dataclass(frozen=True)
class Noop:
    pass


Action = Union[EmitText, Command, Coordinate, SeekTo, SelectItem, Noop]

_ACTION_KINDS = {
    EmitText: "emit_text", Command: "command", Coordinate: "coordinate",
    SeekTo: "seek_to", SelectItem: "select_item", Noop: "noop",
}


def action_to_dict(action: Action) -> dict:
    kind = _ACTION_KINDS[type(action)]
    if isinstance(action, EmitText):
        return {"kind": kind, "text": action.text}
    if isinstance(action, Command):
        return {"kind": kind, "name": action.name, "args": list(action.args)}
    if isinstance(action, Coordinate):
        return {"kind": kind, "u": action.u, "v": action.v}
    if isinstance(action, SeekTo):
        return {"kind": kind, "seconds": action.seconds}
    if isinstance(action, SelectItem):
        return {"kind": kind, "item": action.item}
    return {"kind": kind}


def action_from_dict(doc: Mapping) -> Action:
    kind = doc.get("kind")
    if kind == "emit_text":
        return EmitText(doc["text"])
    if kind == "command":
        return Command(doc["name"], tuple(doc.get("args", ())))
    if kind == "coordinate":
        return Coordinate(doc["u"], doc["v"])
    if kind == "seek_to":
        return SeekTo(doc["seconds"])
    if kind == "select_item":
        return SelectItem(doc["item"])
    if kind == "noop":
        return Noop()
    raise ProfileError(f"unknown action kind {kind!r}")


# ---------------------------------------------------------------------------
# Profile structure


@dataclass(frozen=True)
class Layer:
    name: str
    bindings: Mapping[KeyId, Action] = field(default_factory=dict)
    legends: Mapping[KeyId, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LayerGroup:
    """Ordered page set; navigation wraps (cyclic sets) or clamps (spatial)."""
    layers: tuple[str, ...]
    mode: str = "clamp"  # "clamp" | "wrap"
    start: int = 0  # page shown before any navigation


@dataclass(frozen=True)
class SharedActionGroup:
    members: frozenset[KeyId]
    action: Action
    overlay: Mapping | None = None
    layer: str | None = None  # active only while this layer is active


@dataclass(frozen=True)
class ImageMap:
    group: frozenset[KeyId]
    grid: tuple[int, int]  # (rows, cols)
    cell_of: Mapping[KeyId, tuple[int, int]]


@dataclass(frozen=True)
class ChordRule:
    members: frozenset[KeyId]  # exactly two, adjacent in key_order
    combine: str = "midpoint"
    window_ms: int = DEFAULT_CHORD_WINDOW_MS


class RenderHint:
    FULL_KEYBOARD = "full_keyboard"
    ONE_ROW_WITH_BOUNDS = "one_row_with_bounds"
    GEOMETRY_ONLY = "geometry_only"
    ALL = (FULL_KEYBOARD, ONE_ROW_WITH_BOUNDS, GEOMETRY_ONLY)


@dataclass(frozen=True)
class MappingProfile:
    name: str
    base_layout: KeyboardLayout
    layers: tuple[Layer, ...]
    active_layer: int = 0
    modifier_rules: Mapping[KeyId, str] = field(default_factory=dict)
    layer_groups: Mapping[str, LayerGroup] = field(default_factory=dict)
    shared_groups: tuple[SharedActionGroup, ...] = ()
    image_maps: tuple[ImageMap, ...] = ()
    chord_rules: tuple[ChordRule, ...] = ()
    render_hint: str = RenderHint.FULL_KEYBOARD
    key_order: tuple[KeyId, ...] = ()
    variants: Mapping[KeyId, tuple[str, ...]] = field(default_factory=dict)
    variant_modifier: KeyId | None = None
    latch: bool = False
    highlight_bound: bool = False
    overlay_payload: Mapping | None = None  # passed through to renders
    base_target: str | None = None  # layer group paged at the base level

    def layer_named(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ProfileError(f"profile {self.name!r} has no layer {name!r}")

    def ordered_keys(self) -> tuple[KeyId, ...]:
        if self.key_order:
            return self.key_order
        return tuple(k.id for k in sorted(self.base_layout.keys,
                                          key=lambda k: (k.row, k.col)))


@dataclass(frozen=True)
class KeyEvent:
    t_ms: int
    key: KeyId
    edge: str  # "down" | "up"

    def __post_init__(self):
        if self.edge not in ("down", "up"):
            raise ValueError(f"bad edge {self.edge!r}")


@dataclass(frozen=True)
class KeyRender:
    glyph: str
    highlight: str | None
    visible: bool


@dataclass(frozen=True)
class Overlay:
    kind: str  # "bounds" | "slider" | "item" | "image_map" | custom
    rect: tuple[float, float, float, float]
    payload: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class RenderState:
    version: int
    per_key: Mapping[KeyId, KeyRender]
    overlays: tuple[Overlay, ...]
    geometry: str

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "geometry": self.geometry,
            "per_key": {
                k: {"glyph": r.glyph, "highlight": r.highlight, "visible": r.visible}
                for k, r in sorted(self.per_key.items())
            },
            "overlays": [
                {"kind": o.kind, "rect": list(o.rect), "payload": dict(o.payload)}
                for o in self.overlays
            ],
        }


@dataclass(frozen=True)
class Emission:
    t_ms: int
    action: Action
    source: KeyId | None = None


@dataclass
class EngineOutput:
    emissions: list[Emission] = field(default_factory=list)
    render: RenderState | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def actions(self) -> list[Action]:
        return [e.action for e in self.emissions]


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    key: KeyId | None = None
    layer: str | None = None

    def __str__(self):
        where = "".join(
            f" [{label}={value}]"
            for label, value in (("layer", self.layer), ("key", self.key))
            if value
        )
        return f"{self.code}: {self.message}{where}"


def validate_profile(profile: MappingProfile) -> list[Diagnostic]:
    """Check every profile invariant; empty result means the profile is sound."""
    out: list[Diagnostic] = []
    layout = profile.base_layout
    layer_names = [layer.name for layer in profile.layers]

    if not profile.layers:
        out.append(Diagnostic("no-layers", "profile has no layers, so no active layer"))
    elif not 0 <= profile.active_layer < len(profile.layers):
        out.append(Diagnostic("bad-active-layer",
                              f"active_layer {profile.active_layer} out of range"))
    if len(set(layer_names)) != len(layer_names):
        out.append(Diagnostic("duplicate-layer", "layer names must be unique"))

    for layer in profile.layers:
        for key_id in list(layer.bindings) + list(layer.legends):
            if key_id not in layout:
                out.append(Diagnostic("unknown-key", "binding for key not in layout",
                                      key=key_id, layer=layer.name))

    for modifier, target in profile.modifier_rules.items():
        if modifier not in layout:
            out.append(Diagnostic("unknown-key", "modifier not in layout", key=modifier))
        if target not in layer_names and target not in profile.layer_groups:
            out.append(Diagnostic("unknown-layer",
                                  f"modifier maps to unknown layer or group {target!r}",
                                  key=modifier))

    for group_name, group in profile.layer_groups.items():
        if group.mode not in ("clamp", "wrap"):
            out.append(Diagnostic("bad-group-mode", f"group {group_name!r} mode {group.mode!r}"))
        if not 0 <= group.start < len(group.layers):
            out.append(Diagnostic("bad-group-start",
                                  f"group {group_name!r} start page {group.start} out of range"))
        for name in group.layers:
            if name not in layer_names:
                out.append(Diagnostic("unknown-layer",
                                      f"group {group_name!r} references layer {name!r}"))

    owned: dict[KeyId, str] = {}
    for shared in profile.shared_groups:
        if len(shared.members) < 2:
            out.append(Diagnostic("small-group", "shared group needs >= 2 members"))
        for key_id in shared.members:
            if key_id not in layout:
                out.append(Diagnostic("unknown-key", "shared group key not in layout", key=key_id))
            tag = f"group:{shared.layer or '*'}"
            prior = owned.get(key_id)
            if prior is not None:
                out.append(Diagnostic("ownership", "key claimed by two shared groups",
                                      key=key_id))
            owned[key_id] = tag

    for image_map in profile.image_maps:
        cells = list(image_map.cell_of.values())
        if len(set(cells)) != len(cells):
            out.append(Diagnostic("imagemap-cells", "cell_of must be injective"))
        if set(image_map.cell_of) != set(image_map.group):
            out.append(Diagnostic("imagemap-cells", "cell_of must cover the group exactly"))
        rows, cols = image_map.grid
        for key_id, (r, c) in image_map.cell_of.items():
            if not (0 <= r < rows and 0 <= c < cols):
                out.append(Diagnostic("imagemap-cells", "cell outside grid", key=key_id))
        for key_id in image_map.group:
            if key_id not in layout:
                out.append(Diagnostic("unknown-key", "image map key not in layout", key=key_id))
            if key_id in owned:
                out.append(Diagnostic("ownership", "key in both image map and shared group",
                                      key=key_id))
            owned[key_id] = "imagemap"

    # Ownership: keys held by a shared group or image map active in a layer
    # must not also be bound in that layer.
    for layer in profile.layers:
        for shared in profile.shared_groups:
            if shared.layer is not None and shared.layer != layer.name:
                continue
            for key_id in shared.members & set(layer.bindings):
                out.append(Diagnostic("ownership",
                                      "key bound in layer and claimed by shared group",
                                      key=key_id, layer=layer.name))
        for image_map in profile.image_maps:
            for key_id in image_map.group & set(layer.bindings):
                out.append(Diagnostic("ownership",
                                      "key bound in layer and claimed by image map",
                                      key=key_id, layer=layer.name))

    order = profile.ordered_keys()
    index = {key_id: i for i, key_id in enumerate(order)}
    for rule in profile.chord_rules:
        if len(rule.members) != 2:
            out.append(Diagnostic("chord-members", "chord rule needs exactly two keys"))
            continue
        a, b = sorted(rule.members, key=lambda k: index.get(k, -1))
        if a not in index or b not in index or abs(index[a] - index[b]) != 1:
            out.append(Diagnostic("chord-adjacency",
                                  f"chord keys {a!r},{b!r} not adjacent in key order"))
        if rule.window_ms <= 0:
            out.append(Diagnostic("chord-window", "chord window must be positive"))
        if rule.combine == "midpoint":
            active = profile.layers[profile.active_layer] if profile.layers else None
            for key_id in rule.members:
                bound = active.bindings.get(key_id) if active else None
                if bound is not None and not isinstance(bound, SeekTo):
                    out.append(Diagnostic("chord-combine",
                                          "midpoint combine needs SeekTo solo actions",
                                          key=key_id))

    if profile.render_hint not in RenderHint.ALL:
        out.append(Diagnostic("bad-render-hint", f"unknown render hint {profile.render_hint!r}"))
    if profile.variant_modifier is not None and profile.variant_modifier not in layout:
        out.append(Diagnostic("unknown-key", "variant modifier not in layout",
                              key=profile.variant_modifier))
    if profile.base_target is not None and profile.base_target not in layer_names \
            and profile.base_target not in profile.layer_groups:
        out.append(Diagnostic("unknown-layer",
                              f"base_target {profile.base_target!r} is neither layer nor group"))
    for key_id in profile.variants:
        if key_id not in layout:
            out.append(Diagnostic("unknown-key", "variant base key not in layout", key=key_id))
    return out


# ---------------------------------------------------------------------------
# Image map construction


def build_image_map(group: Iterable[KeyId], layout: KeyboardLayout) -> ImageMap:
    """Assign each key its (row, col) ordinal within the group, row-major."""
    members = sorted(set(group), key=layout.sort_key)
    if not members:
        raise ProfileError("image map group is empty")
    rows: dict[int, list[KeyId]] = {}
    for key_id in members:
        rows.setdefault(layout.row_of(key_id), []).append(key_id)
    row_ids = sorted(rows)
    cell_of: dict[KeyId, tuple[int, int]] = {}
    for r, row in enumerate(row_ids):
        for c, key_id in enumerate(rows[row]):
            cell_of[key_id] = (r, c)
    grid = (len(row_ids), max(len(v) for v in rows.values()))
    return ImageMap(group=frozenset(members), grid=grid, cell_of=cell_of)


def coordinate_for_cell(image_map: ImageMap, key_id: KeyId) -> Coordinate:
    r, c = image_map.cell_of[key_id]
    rows, cols = image_map.grid
    return Coordinate(u=(c + 0.5) / cols, v=(r + 0.5) / rows)


# ---------------------------------------------------------------------------
# Engine


@dataclass
class _Pending:
    down_t: int
    deadline: int


class MappingEngine:
    """Sequential event interpreter for one session.

    State is single-owner; callers feed events in non-decreasing t_ms order
    and call :meth:`resolve_chords` when time passes without events.
    """

    def __init__(self, profile: MappingProfile, *, strict: bool = True):
        if strict:
            problems = validate_profile(profile)
            if problems:
                raise ProfileError("; ".join(str(p) for p in problems))
        self.profile = profile
        layout = profile.base_layout
        self._held: set[KeyId] = set()
        self._base_layer: str = profile.base_target or profile.layers[profile.active_layer].name
        self._modifier_stack: list[tuple[KeyId, str]] = []  # (modifier, layer/group target)
        self._latched: str | None = None
        self._keys_during_modifier = 0
        self._page_index: dict[str, int] = {
            name: group.start for name, group in profile.layer_groups.items()}
        self._pending: dict[KeyId, _Pending] = {}
        self._variant_base: KeyId | None = None
        self._variant_keys: dict[KeyId, str] = {}
        self._variant_started: int = 0
        self._version = 0
        self._order_index = {k: i for i, k in enumerate(profile.ordered_keys())}
        self._chord_partners: dict[KeyId, list[ChordRule]] = {}
        for rule in profile.chord_rules:
            for key_id in rule.members:
                self._chord_partners.setdefault(key_id, []).append(rule)
        self._layout = layout

    # -- layer resolution -------------------------------------------------

    def _resolve_target(self, target: str) -> str:
        group = self.profile.layer_groups.get(target)
        if group is None:
            return target
        return group.layers[self._page_index[target]]

    def active_layer_name(self) -> str:
        if self._modifier_stack:
            return self._resolve_target(self._modifier_stack[-1][1])
        if self._latched is not None:
            return self._resolve_target(self._latched)
        return self._resolve_target(self._base_layer)

    def active_layer(self) -> Layer:
        return self.profile.layer_named(self.active_layer_name())

    def _group_of_active(self) -> str | None:
        if self._modifier_stack:
            target = self._modifier_stack[-1][1]
        elif self._latched is not None:
            target = self._latched
        else:
            target = self._base_layer
        return target if target in self.profile.layer_groups else None

    # -- rendering ---------------------------------------------------------

    def render_snapshot(self, extra_overlays: Sequence[Overlay] = (), *,
                        bump: bool = True) -> RenderState:
        profile = self.profile
        layout = self._layout
        layer = self.active_layer()
        hint = profile.render_hint

        bound_keys = set(layer.bindings)
        for shared in profile.shared_groups:
            if shared.layer in (None, layer.name):
                bound_keys |= shared.members
        for image_map in profile.image_maps:
            bound_keys |= image_map.group

        visible_rows: set[int] | None = None
        if hint == RenderHint.ONE_ROW_WITH_BOUNDS:
            visible_rows = {layout.row_of(k) for k in bound_keys if k in layout}

        per_key: dict[KeyId, KeyRender] = {}
        for key in layout.keys:
            glyph = layer.legends.get(key.id, key.default_legend)
            highlight = None
            if key.id in self._variant_keys:
                glyph = self._variant_keys[key.id]
                highlight = VARIANT_HIGHLIGHT
            elif profile.highlight_bound and key.id in bound_keys:
                highlight = BOUND_HIGHLIGHT
            if hint == RenderHint.GEOMETRY_ONLY:
                visible = False
            elif visible_rows is not None:
                visible = key.row in visible_rows
            else:
                visible = True
            per_key[key.id] = KeyRender(glyph=glyph, highlight=highlight, visible=visible)

        overlays: list[Overlay] = []
        if hint == RenderHint.ONE_ROW_WITH_BOUNDS:
            overlays.append(Overlay("bounds", layout.bounds(), {"color": "red"}))
        if hint == RenderHint.GEOMETRY_ONLY and bound_keys:
            payload = dict(profile.overlay_payload or {})
            overlays.append(Overlay("slider", self._rect_around(bound_keys), payload))
        for shared in profile.shared_groups:
            if shared.layer not in (None, layer.name) or not shared.overlay:
                continue
            overlays.append(Overlay("item", self._rect_around(shared.members),
                                    dict(shared.overlay)))
        for image_map in profile.image_maps:
            overlays.append(Overlay("image_map", self._rect_around(image_map.group),
                                    {"rows": image_map.grid[0], "cols": image_map.grid[1]}))
        overlays.extend(extra_overlays)

        if bump:
            self._version += 1
        return RenderState(version=self._version, per_key=per_key,
                           overlays=tuple(overlays), geometry=hint)

    def _rect_around(self, keys: Iterable[KeyId]) -> tuple[float, float, float, float]:
        rects = [self._layout.key(k).rect for k in keys if k in self._layout]
        x0 = min(r[0] for r in rects)
        y0 = min(r[1] for r in rects)
        x1 = max(r[0] + r[2] for r in rects)
        y1 = max(r[1] + r[3] for r in rects)
        return (x0, y0, x1 - x0, y1 - y0)

    def start(self) -> RenderState:
        """Initial render for a fresh session."""
        return self.render_snapshot()

    # -- chord machinery ----------------------------------------------------

    def _solo_action(self, key_id: KeyId) -> Action | None:
        return self.active_layer().bindings.get(key_id)

    def _expire_pending(self, now_ms: int) -> list[Emission]:
        due = [(p.deadline, self._order_index.get(k, 1 << 30), k)
               for k, p in self._pending.items() if p.deadline <= now_ms]
        emissions = []
        for deadline, _, key_id in sorted(due):
            del self._pending[key_id]
            action = self._solo_action(key_id)
            if action is not None:
                emissions.append(Emission(deadline, action, key_id))
        return emissions

    def resolve_chords(self, now_ms: int) -> EngineOutput:
        """Emit solo actions for deferred keys whose window elapsed by now."""
        return EngineOutput(emissions=self._expire_pending(now_ms))

    def next_deadline(self) -> int | None:
        """Earliest pending chord deadline, if any keys are deferred."""
        deadlines = [p.deadline for p in self._pending.values()]
        return min(deadlines) if deadlines else None

    def flush(self, now_ms: int | None = None) -> EngineOutput:
        """Resolve everything still pending (end of stream)."""
        if now_ms is None:
            now_ms = max((p.deadline for p in self._pending.values()), default=0)
        return self.resolve_chords(now_ms)

    def _chord_rule_for(self, a: KeyId, b: KeyId) -> ChordRule | None:
        for rule in self._chord_partners.get(a, ()):
            if b in rule.members:
                return rule
        return None

    def _combine(self, rule: ChordRule, a: KeyId, b: KeyId) -> Action | None:
        act_a = self._solo_action(a)
        act_b = self._solo_action(b)
        if rule.combine == "midpoint" and isinstance(act_a, SeekTo) and isinstance(act_b, SeekTo):
            return SeekTo((act_a.seconds + act_b.seconds) / 2.0)
        return None

    # -- event application ---------------------------------------------------

    def apply_event(self, event: KeyEvent) -> EngineOutput:
        """Feed one key edge; returns emitted actions and any new render."""
        if event.key not in self._layout:
            raise EventError(f"event names unknown key {event.key!r}")
        out = EngineOutput()
        out.emissions.extend(self._expire_pending(event.t_ms))

        if self._variant_base is not None and \
                event.t_ms - self._variant_started >= VARIANT_TIMEOUT_MS:
            self._clear_variants()
            out.render = self.render_snapshot()

        if event.edge == "down":
            self._on_down(event, out)
        else:
            self._on_up(event, out)
        return out

    def _on_down(self, event: KeyEvent, out: EngineOutput) -> None:
        key_id = event.key
        if key_id in self._held:
            out.warnings.append(f"repeat down for {key_id} ignored")
            return
        self._held.add(key_id)
        profile = self.profile

        if key_id in profile.modifier_rules:
            target = profile.modifier_rules[key_id]
            if self._latched == target:
                # tapping the latched modifier again releases the latch on up
                self._keys_during_modifier = 0
            self._modifier_stack.append((key_id, target))
            self._keys_during_modifier = 0
            out.render = self.render_snapshot()
            return

        if self._modifier_stack:
            self._keys_during_modifier += 1

        # variant pick beats everything else while highlights are up
        if self._variant_keys:
            text = self._variant_keys.get(key_id)
            self._clear_variants()
            if text is not None:
                out.emissions.append(Emission(event.t_ms, EmitText(text), key_id))
            out.render = self.render_snapshot()
            if text is not None:
                return
            # fall through: the press that dismissed highlights still acts

        if self._variant_modifier_held() and key_id in profile.variants:
            self._arm_variants(key_id, event.t_ms)
            out.render = self.render_snapshot()
            return

        layer = self.active_layer()
        for shared in profile.shared_groups:
            if shared.layer in (None, layer.name) and key_id in shared.members:
                out.emissions.append(Emission(event.t_ms, shared.action, key_id))
                return
        for image_map in profile.image_maps:
            if key_id in image_map.group:
                out.emissions.append(
                    Emission(event.t_ms, coordinate_for_cell(image_map, key_id), key_id))
                return

        if key_id in self._chord_partners:
            partner = self._find_live_partner(key_id, event.t_ms)
            if partner is not None:
                rule = self._chord_rule_for(key_id, partner)
                combined = self._combine(rule, partner, key_id)
                del self._pending[partner]
                if combined is not None:
                    out.emissions.append(Emission(event.t_ms, combined, key_id))
                return
            window = max(r.window_ms for r in self._chord_partners[key_id])
            self._pending[key_id] = _Pending(event.t_ms, event.t_ms + window)
            return

        action = layer.bindings.get(key_id)
        if action is None:
            return
        if isinstance(action, Command) and action.name in ("page.next", "page.prev"):
            out.emissions.append(Emission(event.t_ms, action, key_id))
            if self._turn_page(+1 if action.name == "page.next" else -1):
                out.render = self.render_snapshot()
            return
        out.emissions.append(Emission(event.t_ms, action, key_id))

    def _on_up(self, event: KeyEvent, out: EngineOutput) -> None:
        key_id = event.key
        if key_id not in self._held:
            out.warnings.append(f"up without down for {key_id} ignored")
            return
        self._held.discard(key_id)

        for i in range(len(self._modifier_stack) - 1, -1, -1):
            modifier, target = self._modifier_stack[i]
            if modifier == key_id:
                self._modifier_stack.pop(i)
                if self.profile.latch and self._keys_during_modifier == 0:
                    self._latched = None if self._latched == target else target
                out.render = self.render_snapshot()
                return

    def _find_live_partner(self, key_id: KeyId, now_ms: int) -> KeyId | None:
        for rule in self._chord_partners.get(key_id, ()):
            (other,) = rule.members - {key_id}
            pending = self._pending.get(other)
            if pending is not None and now_ms - pending.down_t < rule.window_ms:
                return other
        return None

    def _variant_modifier_held(self) -> bool:
        vm = self.profile.variant_modifier
        return vm is not None and vm in self._held

    def _arm_variants(self, base: KeyId, t_ms: int) -> None:
        self._variant_base = base
        self._variant_started = t_ms
        neighbors = sorted(self._layout.adjacency[base], key=self._layout.sort_key)
        self._variant_keys = dict(zip(neighbors, self.profile.variants[base]))

    def _clear_variants(self) -> None:
        self._variant_base = None
        self._variant_keys = {}

    def _turn_page(self, step: int) -> bool:
        # Page commands steer the base page group when there is one (so a
        # modifier-held nav layer can flip the base pages), otherwise the
        # group the modifier activated.
        if self._base_layer in self.profile.layer_groups:
            group_name: str | None = self._base_layer
        else:
            group_name = self._group_of_active()
        if group_name is None:
            return False
        group = self.profile.layer_groups[group_name]
        index = self._page_index[group_name]
        if group.mode == "wrap":
            new = (index + step) % len(group.layers)
        else:
            new = min(max(index + step, 0), len(group.layers) - 1)
        if new == index:
            return False
        self._page_index[group_name] = new
        return True


# Functional facades matching the operation contracts; the engine object is
# the state they thread through.

def apply_event(engine: MappingEngine, event: KeyEvent) -> tuple[MappingEngine, list[Action], RenderState | None]:
    out = engine.apply_event(event)
    return engine, out.actions, out.render


def resolve_chords(engine: MappingEngine, now_ms: int) -> tuple[MappingEngine, list[Action]]:
    out = engine.resolve_chords(now_ms)
    return engine, out.actions


# ---------------------------------------------------------------------------
# Profile documents (versioned JSON)


def profile_to_dict(profile: MappingProfile) -> dict:
    return {
        "schema": PROFILE_SCHEMA,
        "name": profile.name,
        "layout": profile.base_layout.name,
        "active_layer": profile.active_layer,
        "render_hint": profile.render_hint,
        "latch": profile.latch,
        "highlight_bound": profile.highlight_bound,
        "key_order": list(profile.key_order),
        "layers": [
            {
                "name": layer.name,
                "bindings": {k: action_to_dict(a) for k, a in sorted(layer.bindings.items())},
                "legends": dict(sorted(layer.legends.items())),
            }
            for layer in profile.layers
        ],
        "modifier_rules": dict(sorted(profile.modifier_rules.items())),
        "layer_groups": {
            name: {"layers": list(g.layers), "mode": g.mode, "start": g.start}
            for name, g in sorted(profile.layer_groups.items())
        },
        "shared_groups": [
            {
                "members": sorted(g.members),
                "action": action_to_dict(g.action),
                "overlay": dict(g.overlay) if g.overlay else None,
                "layer": g.layer,
            }
            for g in profile.shared_groups
        ],
        "image_maps": [
            {
                "group": sorted(m.group),
                "grid": list(m.grid),
                "cells": {k: list(v) for k, v in sorted(m.cell_of.items())},
            }
            for m in profile.image_maps
        ],
        "chord_rules": [
            {"members": sorted(r.members), "combine": r.combine, "window_ms": r.window_ms}
            for r in profile.chord_rules
        ],
        "variants": {k: list(v) for k, v in sorted(profile.variants.items())},
        "variant_modifier": profile.variant_modifier,
        "overlay_payload": dict(profile.overlay_payload) if profile.overlay_payload else None,
        "base_target": profile.base_target,
    }


def profile_to_json(profile: MappingProfile) -> str:
    return json.dumps(profile_to_dict(profile), sort_keys=True, ensure_ascii=False)


def profile_from_dict(doc: Mapping, layout: KeyboardLayout | None = None) -> MappingProfile:
    if doc.get("schema") != PROFILE_SCHEMA:
        raise ProfileError(f"unsupported profile schema {doc.get('schema')!r}")
    if layout is None:
        layout = load_bundled_layout(doc["layout"])
    elif layout.name != doc["layout"]:
        raise ProfileError(f"profile wants layout {doc['layout']!r}, got {layout.name!r}")
    layers = tuple(
        Layer(
            name=entry["name"],
            bindings={k: action_from_dict(a) for k, a in entry.get("bindings", {}).items()},
            legends=dict(entry.get("legends", {})),
        )
        for entry in doc.get("layers", [])
    )
    return MappingProfile(
        name=doc["name"],
        base_layout=layout,
        layers=layers,
        active_layer=doc.get("active_layer", 0),
        modifier_rules=dict(doc.get("modifier_rules", {})),
        layer_groups={
            name: LayerGroup(tuple(g["layers"]), g.get("mode", "clamp"),
                             g.get("start", 0))
            for name, g in doc.get("layer_groups", {}).items()
        },
        shared_groups=tuple(
            SharedActionGroup(
                members=frozenset(g["members"]),
                action=action_from_dict(g["action"]),
                overlay=g.get("overlay"),
                layer=g.get("layer"),
            )
            for g in doc.get("shared_groups", [])
        ),
        image_maps=tuple(
            ImageMap(
                group=frozenset(m["group"]),
                grid=tuple(m["grid"]),
                cell_of={k: tuple(v) for k, v in m.get("cells", {}).items()},
            )
            for m in doc.get("image_maps", [])
        ),
        chord_rules=tuple(
            ChordRule(
                members=frozenset(r["members"]),
                combine=r.get("combine", "midpoint"),
                window_ms=r.get("window_ms", DEFAULT_CHORD_WINDOW_MS),
            )
            for r in doc.get("chord_rules", [])
        ),
        render_hint=doc.get("render_hint", RenderHint.FULL_KEYBOARD),
        key_order=tuple(doc.get("key_order", ())),
        variants={k: tuple(v) for k, v in doc.get("variants", {}).items()},
        variant_modifier=doc.get("variant_modifier"),
        latch=doc.get("latch", False),
        highlight_bound=doc.get("highlight_bound", False),
        overlay_payload=doc.get("overlay_payload"),
        base_target=doc.get("base_target"),
    )


def profile_from_json(text: str, layout: KeyboardLayout | None = None) -> MappingProfile:
    return profile_from_dict(json.loads(text), layout)


def with_layer_bindings(profile: MappingProfile, layer_name: str,
                        bindings: Mapping[KeyId, Action],
                        legends: Mapping[KeyId, str]) -> MappingProfile:
    """Copy of ``profile`` with one layer's bindings and legends replaced."""
    layers = tuple(
        Layer(layer.name, dict(bindings), dict(legends)) if layer.name == layer_name else layer
        for layer in profile.layers
    )
    return replace(profile, layers=layers)
