"""Physical keyboard model: key identities, millimeter geometry, adjacency, regions.

A layout is built from a small text format (one line per physical key row,
entries ``KeyId`` or ``KeyId:width``, spacers ``~width``) and is immutable
afterwards.  Key ids follow the W3C ``KeyboardEvent.code`` naming ("KeyQ",
"Digit1", "ShiftLeft", ...) so they name physical positions, never legends.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

KeyId = str

KEY_PITCH_MM = 19.05
DEFAULT_GAP_MM = 1.0
# Centers within 1.5 key pitches count as neighbors: captures the
# 8-neighborhood on a staggered grid without bridging row gaps.
ADJACENCY_PITCH_FACTOR = 1.5

LAYOUT_SCHEMA = 1


class LayoutError(ValueError):
    """Malformed layout spec: duplicate ids, overlaps, bad entries."""


class ParameterError(ValueError):
    """Operation parameters violate a documented precondition."""


@dataclass(frozen=True)
class Key:
    id: KeyId
    row: int
    col: int
    rect: tuple[float, float, float, float]  # (x, y, w, h) in mm, half-open
    default_legend: str

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.rect
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class Region:
    members: frozenset[KeyId]
    anchor: KeyId


class KeyboardLayout:
    """Immutable keyboard geometry plus the derived adjacency graph."""

    def __init__(self, name: str, keys: Sequence[Key], *, pitch_mm: float = KEY_PITCH_MM):
        self.name = name
        self.keys: tuple[Key, ...] = tuple(keys)
        self.pitch_mm = pitch_mm
        self._by_id: dict[KeyId, Key] = {}
        for key in self.keys:
            if key.id in self._by_id:
                raise LayoutError(f"duplicate key id {key.id!r}")
            self._by_id[key.id] = key
        _check_no_overlap(self.keys)
        self.adjacency: dict[KeyId, frozenset[KeyId]] = _adjacency(self.keys, pitch_mm)

    def __contains__(self, key_id: KeyId) -> bool:
        return key_id in self._by_id

    def __len__(self) -> int:
        return len(self.keys)

    def key(self, key_id: KeyId) -> Key:
        try:
            return self._by_id[key_id]
        except KeyError:
            raise KeyError(f"no key {key_id!r} in layout {self.name!r}") from None

    def ids(self) -> list[KeyId]:
        return [k.id for k in self.keys]

    def row_of(self, key_id: KeyId) -> int:
        return self.key(key_id).row

    def rows(self) -> dict[int, list[Key]]:
        out: dict[int, list[Key]] = {}
        for key in self.keys:
            out.setdefault(key.row, []).append(key)
        return out

    def bounds(self) -> tuple[float, float, float, float]:
        x0 = min(k.rect[0] for k in self.keys)
        y0 = min(k.rect[1] for k in self.keys)
        x1 = max(k.rect[0] + k.rect[2] for k in self.keys)
        y1 = max(k.rect[1] + k.rect[3] for k in self.keys)
        return (x0, y0, x1 - x0, y1 - y0)

    def sort_key(self, key_id: KeyId):
        key = self.key(key_id)
        return (key.row, key.col, key.id)

    def to_json(self) -> str:
        doc = {
            "schema": LAYOUT_SCHEMA,
            "name": self.name,
            "pitch_mm": self.pitch_mm,
            "keys": [
                {
                    "id": k.id,
                    "row": k.row,
                    "col": k.col,
                    "rect": list(k.rect),
                    "legend": k.default_legend,
                }
                for k in self.keys
            ],
            "adjacency": {k: sorted(v) for k, v in sorted(self.adjacency.items())},
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "KeyboardLayout":
        doc = json.loads(text)
        if doc.get("schema") != LAYOUT_SCHEMA:
            raise LayoutError(f"unsupported layout schema {doc.get('schema')!r}")
        keys = [
            Key(
                id=entry["id"],
                row=entry["row"],
                col=entry["col"],
                rect=tuple(entry["rect"]),
                default_legend=entry["legend"],
            )
            for entry in doc["keys"]
        ]
        return cls(doc["name"], keys, pitch_mm=doc.get("pitch_mm", KEY_PITCH_MM))


def _check_no_overlap(keys: Sequence[Key]) -> None:
    # Rects are half-open so touching edges are fine; sweep by x to stay
    # near-linear for real keyboards.
    ordered = sorted(keys, key=lambda k: k.rect[0])
    for i, a in enumerate(ordered):
        ax, ay, aw, ah = a.rect
        if aw <= 0 or ah <= 0:
            raise LayoutError(f"key {a.id!r} has non-positive size")
        for b in ordered[i + 1 :]:
            bx, by, bw, bh = b.rect
            if bx >= ax + aw:
                break
            if ay < by + bh and by < ay + ah:
                raise LayoutError(f"keys {a.id!r} and {b.id!r} overlap")


def _adjacency(keys: Sequence[Key], pitch_mm: float) -> dict[KeyId, frozenset[KeyId]]:
    limit = ADJACENCY_PITCH_FACTOR * pitch_mm
    out: dict[KeyId, set[KeyId]] = {k.id: set() for k in keys}
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            if math.dist(a.center, b.center) < limit:
                out[a.id].add(b.id)
                out[b.id].add(a.id)
    return {k: frozenset(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# Layout spec text format


def parse_layout_spec(text: str, *, name: str, gap_mm: float = DEFAULT_GAP_MM,
                      pitch_mm: float = KEY_PITCH_MM) -> KeyboardLayout:
    """Build a layout from the row-per-line spec format.

    Entries: ``KeyId`` or ``KeyId:width`` (width in key pitches), ``~w`` for a
    horizontal spacer.  A line containing only spacers inserts vertical space.
    Keys pack left to right; rects are inset by ``gap_mm`` inside their pitch
    cell and are half-open for hit-testing.
    """
    keys: list[Key] = []
    seen: set[KeyId] = set()
    y = 0.0
    row = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        entries = line.split()
        parsed: list[tuple[str | None, float]] = []
        for entry in entries:
            if entry.startswith("~"):
                try:
                    parsed.append((None, float(entry[1:])))
                except ValueError:
                    raise LayoutError(f"line {lineno}: bad spacer {entry!r}") from None
                continue
            key_id, _, width_s = entry.partition(":")
            if not key_id:
                raise LayoutError(f"line {lineno}: empty key id in {entry!r}")
            width = 1.0
            if width_s:
                try:
                    width = float(width_s)
                except ValueError:
                    raise LayoutError(f"line {lineno}: bad width in {entry!r}") from None
                if width <= 0:
                    raise LayoutError(f"line {lineno}: width must be > 0 in {entry!r}")
            parsed.append((key_id, width))
        if all(key_id is None for key_id, _ in parsed):
            # vertical spacer line
            y += max(w for _, w in parsed) * pitch_mm
            continue
        x = 0.0
        col = 0
        for key_id, width in parsed:
            span = width * pitch_mm
            if key_id is not None:
                if key_id in seen:
                    raise LayoutError(f"line {lineno}: duplicate key id {key_id!r}")
                seen.add(key_id)
                rect = (x + gap_mm / 2.0, y + gap_mm / 2.0, span - gap_mm, pitch_mm - gap_mm)
                keys.append(Key(key_id, row, col, rect, default_legend_for(key_id)))
                col += 1
            x += span
        row += 1
        y += pitch_mm
    if not keys:
        raise LayoutError("layout spec contains no keys")
    return KeyboardLayout(name, keys, pitch_mm=pitch_mm)


def build_layout(spec_text: str, *, name: str = "custom", gap_mm: float = DEFAULT_GAP_MM,
                 pitch_mm: float = KEY_PITCH_MM) -> KeyboardLayout:
    return parse_layout_spec(spec_text, name=name, gap_mm=gap_mm, pitch_mm=pitch_mm)


_PUNCT_LEGENDS = {
    "Backquote": "`", "Minus": "-", "Equal": "=", "BracketLeft": "[",
    "BracketRight": "]", "Backslash": "\\", "Semicolon": ";", "Quote": "'",
    "Comma": ",", "Period": ".", "Slash": "/", "Space": " ",
    "IntlBackslash": "<", "NumpadDivide": "/", "NumpadMultiply": "*",
    "NumpadSubtract": "-", "NumpadAdd": "+", "NumpadDecimal": ".",
}


def default_legend_for(key_id: KeyId) -> str:
    """Unshifted legend produced by a physical key; falls back to the id."""
    if key_id.startswith("Key") and len(key_id) == 4:
        return key_id[3].lower()
    if key_id.startswith("Digit") and len(key_id) == 6:
        return key_id[5]
    if key_id.startswith("Numpad") and len(key_id) == 7 and key_id[6].isdigit():
        return key_id[6]
    return _PUNCT_LEGENDS.get(key_id, key_id)


# ---------------------------------------------------------------------------
# Bundled layouts

def assets_dir() -> Path:
    override = os.environ.get("KEYRECONF_ASSETS")
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "assets"


def load_bundled_layout(name: str) -> KeyboardLayout:
    path = assets_dir() / "layouts" / f"{name}.kbd"
    if not path.exists():
        raise LayoutError(f"no bundled layout {name!r} at {path}")
    return parse_layout_spec(path.read_text(encoding="utf-8"), name=name)


def bundled_layout_names() -> list[str]:
    return sorted(p.stem for p in (assets_dir() / "layouts").glob("*.kbd"))


# ---------------------------------------------------------------------------
# Region partitioning for local shuffles


def partition_regions(layout: KeyboardLayout, group: Iterable[KeyId], region_size: int) -> list[Region]:
    """Partition ``group`` into connected regions of size ``region_size``.

    Greedy breadth-first clustering seeded at the top-left-most unassigned
    key; leftover keys merge into the nearest adjacent region.  Resulting
    sizes land in [k, 2k-1] for connected groups.  Deterministic.
    """
    k = region_size
    members = set(group)
    if k < 1:
        raise ParameterError("region_size must be >= 1")
    if k > len(members):
        raise ParameterError(f"region_size {k} exceeds group size {len(members)}")
    for key_id in members:
        if key_id not in layout:
            raise ParameterError(f"group key {key_id!r} not in layout {layout.name!r}")
    if k == 1:
        return [Region(frozenset({m}), m) for m in sorted(members, key=layout.sort_key)]
    for key_id in members:
        if not (layout.adjacency[key_id] & members):
            raise ParameterError(f"group key {key_id!r} has no neighbor inside the group")

    unassigned = set(members)
    regions: list[set[KeyId]] = []
    anchors: list[KeyId] = []
    leftovers: list[KeyId] = []
    while unassigned:
        seed = min(unassigned, key=layout.sort_key)
        collected: list[KeyId] = []
        frontier = [seed]
        seen = {seed}
        while frontier and len(collected) < k:
            current = frontier.pop(0)
            collected.append(current)
            for nb in sorted(layout.adjacency[current] & unassigned, key=layout.sort_key):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        unassigned -= set(collected)
        if len(collected) == k or not regions:
            regions.append(set(collected))
            anchors.append(seed)
        else:
            leftovers.extend(collected)

    _merge_leftovers(layout, regions, leftovers, cap=2 * k - 1)
    order = sorted(range(len(regions)), key=lambda i: layout.sort_key(anchors[i]))
    return [Region(frozenset(regions[i]), anchors[i]) for i in order]


def _merge_leftovers(layout: KeyboardLayout, regions: list[set[KeyId]],
                     leftovers: list[KeyId], *, cap: int) -> None:
    pending = sorted(leftovers, key=layout.sort_key)
    while pending:
        progressed = False
        for key_id in list(pending):
            adjacent = [
                i for i, region in enumerate(regions)
                if layout.adjacency[key_id] & region
            ]
            candidates = [i for i in adjacent if len(regions[i]) < cap] or adjacent
            if not candidates:
                continue
            best = min(candidates, key=lambda i: (_region_distance(layout, key_id, regions[i]), i))
            regions[best].add(key_id)
            pending.remove(key_id)
            progressed = True
        if not progressed:
            # Disconnected leftovers: fall back to nearest region by distance.
            key_id = pending.pop(0)
            best = min(range(len(regions)),
                       key=lambda i: (_region_distance(layout, key_id, regions[i]), i))
            regions[best].add(key_id)


def _region_distance(layout: KeyboardLayout, key_id: KeyId, region: set[KeyId]) -> float:
    center = layout.key(key_id).center
    return min(math.dist(center, layout.key(m).center) for m in region)


# ---------------------------------------------------------------------------
# Hit testing


def key_at(layout: KeyboardLayout, point: tuple[float, float]) -> KeyId | None:
    """Key whose half-open rect contains ``point`` (mm), if any."""
    px, py = point
    for key in layout.keys:
        x, y, w, h = key.rect
        if x <= px < x + w and y <= py < y + h:
            return key.id
    return None


# ---------------------------------------------------------------------------
# Common key groups

def letter_keys() -> list[KeyId]:
    return [f"Key{c}" for c in "QWERTYUIOPASDFGHJKLZXCVBNM"]


def digit_keys() -> list[KeyId]:
    return [f"Digit{d}" for d in "1234567890"]


def default_shuffle_group() -> frozenset[KeyId]:
    """Letters plus digits: modifiers, space, enter, backspace stay fixed so
    the user can always submit and correct."""
    return frozenset(letter_keys()) | frozenset(digit_keys())
