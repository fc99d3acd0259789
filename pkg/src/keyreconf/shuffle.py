"""Key randomization for shoulder-surfing-resistant password entry.

Three strategies permute the legends of a shuffle group: within local
regions, within each row, or across the whole group.  Permutations are
reproducible: a Fisher-Yates pass per orbit driven by a Mersenne Twister
stream (``random.Random``) with explicit rejection sampling, so the same
seed yields the same permutation on every platform.  Child seeds derive
from SHA-256 over (seed, labels).
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .layout import KeyboardLayout, KeyId, ParameterError, partition_regions

Seed = int

SHUFFLE_SCHEMA = 1


@dataclass(frozen=True)
class RegionShuffle:
    region_size: int

    def __post_init__(self):
        if self.region_size < 2:
            raise ParameterError("RegionShuffle needs region_size >= 2")

    label = "region"


@dataclass(frozen=True)
class RowShuffle:
    label = "row"


@dataclass(frozen=True)
class FullShuffle:
    label = "full"


ShuffleStrategy = Union[RegionShuffle, RowShuffle, FullShuffle]


def strategy_to_dict(strategy: ShuffleStrategy) -> dict:
    doc: dict = {"kind": strategy.label}
    if isinstance(strategy, RegionShuffle):
        doc["region_size"] = strategy.region_size
    return doc


def strategy_from_dict(doc: Mapping) -> ShuffleStrategy:
    kind = doc.get("kind")
    if kind == "region":
        return RegionShuffle(int(doc["region_size"]))
    if kind == "row":
        return RowShuffle()
    if kind == "full":
        return FullShuffle()
    raise ParameterError(f"unknown shuffle strategy {kind!r}")


@dataclass(frozen=True)
class ShuffledLayout:
    base: KeyboardLayout
    group: frozenset[KeyId]
    perm: Mapping[KeyId, KeyId]  # physical position -> legend-source key
    strategy: ShuffleStrategy
    seed: Seed
    orbits: tuple[frozenset[KeyId], ...]

    def orbit_of(self, key_id: KeyId) -> frozenset[KeyId]:
        for orbit in self.orbits:
            if key_id in orbit:
                return orbit
        return frozenset({key_id})

    def to_json(self) -> str:
        doc = {
            "schema": SHUFFLE_SCHEMA,
            "layout": self.base.name,
            "seed": self.seed,
            "strategy": strategy_to_dict(self.strategy),
            "group": sorted(self.group),
            "perm": sorted((p, s) for p, s in self.perm.items()),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, layout: KeyboardLayout) -> "ShuffledLayout":
        doc = json.loads(text)
        if doc.get("schema") != SHUFFLE_SCHEMA:
            raise ParameterError(f"unsupported shuffle schema {doc.get('schema')!r}")
        if doc["layout"] != layout.name:
            raise ParameterError(
                f"shuffle document is for layout {doc['layout']!r}, got {layout.name!r}")
        rebuilt = shuffle(layout, frozenset(doc["group"]),
                          strategy_from_dict(doc["strategy"]), doc["seed"])
        recorded = {p: s for p, s in doc["perm"]}
        if dict(rebuilt.perm) != recorded:
            raise ParameterError("recorded permutation does not match its seed")
        return rebuilt


def derive_seed(seed: Seed, *labels: object) -> Seed:
    """Stable 64-bit child seed for (seed, labels); SHA-256 based."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def _randbelow(rng: random.Random, n: int) -> int:
    # Rejection sampling over getrandbits keeps the draw unbiased and the
    # stream reproducible independent of random.shuffle internals.
    if n <= 0:
        raise ValueError("n must be positive")
    bits = n.bit_length()
    r = rng.getrandbits(bits)
    while r >= n:
        r = rng.getrandbits(bits)
    return r


def fisher_yates(items: list, rng: random.Random) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = _randbelow(rng, i + 1)
        items[i], items[j] = items[j], items[i]


def _orbits(layout: KeyboardLayout, group: frozenset[KeyId],
            strategy: ShuffleStrategy) -> list[list[KeyId]]:
    ordered = sorted(group, key=layout.sort_key)
    if isinstance(strategy, FullShuffle):
        return [ordered]
    if isinstance(strategy, RowShuffle):
        rows: dict[int, list[KeyId]] = {}
        for key_id in ordered:
            rows.setdefault(layout.row_of(key_id), []).append(key_id)
        return [rows[r] for r in sorted(rows)]
    regions = partition_regions(layout, group, strategy.region_size)
    return [sorted(r.members, key=layout.sort_key) for r in regions]


def shuffle(layout: KeyboardLayout, group: Iterable[KeyId],
            strategy: ShuffleStrategy, seed: Seed) -> ShuffledLayout:
    """Draw a uniformly random permutation of ``group`` under ``strategy``.

    The permutation is the product of independent uniform permutations of
    each orbit (regions, rows, or the whole group); keys outside the group
    map to themselves.
    """
    members = frozenset(group)
    if not members:
        raise ParameterError("shuffle group is empty")
    for key_id in members:
        if key_id not in layout:
            raise ParameterError(f"group key {key_id!r} not in layout {layout.name!r}")
    if isinstance(strategy, RegionShuffle) and strategy.region_size > len(members):
        raise ParameterError("region_size exceeds group size")
    orbits = _orbits(layout, members, strategy)
    rng = random.Random(int(seed) & (2**64 - 1))
    perm: dict[KeyId, KeyId] = {}
    for orbit in orbits:
        images = list(orbit)
        fisher_yates(images, rng)
        perm.update(zip(orbit, images))
    return ShuffledLayout(
        base=layout,
        group=members,
        perm=perm,
        strategy=strategy,
        seed=int(seed),
        orbits=tuple(frozenset(o) for o in orbits),
    )


def decode_press(shuffled: ShuffledLayout, physical: KeyId) -> str:
    """Character produced by pressing ``physical``: the legend shown there."""
    if physical not in shuffled.base:
        raise ParameterError(f"key {physical!r} not in layout {shuffled.base.name!r}")
    source = shuffled.perm.get(physical, physical)
    return shuffled.base.key(source).default_legend


def legend_render(shuffled: ShuffledLayout) -> dict[KeyId, str]:
    """Per-key glyphs after shuffling; keys outside the group are unchanged."""
    out: dict[KeyId, str] = {}
    for key in shuffled.base.keys:
        source = shuffled.perm.get(key.id, key.id)
        out[key.id] = shuffled.base.key(source).default_legend
    return out
