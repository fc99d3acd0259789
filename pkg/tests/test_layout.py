import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keyreconf.layout import (KeyboardLayout, Key, LayoutError, ParameterError,
                              build_layout, default_shuffle_group, key_at,
                              letter_keys, load_bundled_layout, partition_regions)

GRID3 = "\n".join(["A1 A2 A3", "B1 B2 B3", "C1 C2 C3"])


def test_bundled_layout_sizes(ansi, iso):
    assert len(ansi) == 104
    assert len(iso) == 105


def test_single_key_layout():
    layout = build_layout("Solo")
    assert len(layout) == 1
    assert layout.adjacency["Solo"] == frozenset()


def test_grid_center_has_eight_neighbors():
    # pairwise center distances on a uniform 3x3 grid: 1 or sqrt(2) pitches,
    # both under the 1.5 pitch threshold, so the center sees all 8 keys
    layout = build_layout(GRID3)
    assert len(layout.adjacency["B2"]) == 8
    assert len(layout.adjacency["A1"]) == 3


def test_duplicate_key_id_rejected():
    with pytest.raises(LayoutError, match="duplicate"):
        build_layout("A A")


def test_overlapping_rects_rejected():
    keys = [
        Key("A", 0, 0, (0.0, 0.0, 20.0, 18.0), "a"),
        Key("B", 0, 1, (10.0, 0.0, 20.0, 18.0), "b"),
    ]
    with pytest.raises(LayoutError, match="overlap"):
        KeyboardLayout("bad", keys)


def test_width_multipliers_and_spacers():
    layout = build_layout("A:2 ~1 B")
    a, b = layout.key("A"), layout.key("B")
    assert a.rect[2] > b.rect[2]
    assert b.rect[0] > a.rect[0] + a.rect[2]


def test_vertical_spacer_breaks_adjacency():
    near = build_layout("A\nB")
    far = build_layout("A\n~0.65\nB")
    assert "B" in near.adjacency["A"]
    assert "B" not in far.adjacency["A"]


def test_adjacency_symmetric_irreflexive(iso):
    for key_id, neighbors in iso.adjacency.items():
        assert key_id not in neighbors
        for other in neighbors:
            assert key_id in iso.adjacency[other]


def test_assets_env_var_override(tmp_path, monkeypatch):
    custom = tmp_path / "layouts"
    custom.mkdir()
    (custom / "tiny.kbd").write_text("A B\nC D\n", encoding="utf-8")
    monkeypatch.setenv("KEYRECONF_ASSETS", str(tmp_path))
    layout = load_bundled_layout("tiny")
    assert len(layout) == 4


def test_serialization_roundtrip_byte_identical(iso):
    doc = iso.to_json()
    again = KeyboardLayout.from_json(doc)
    assert again.to_json() == doc
    rebuilt = load_bundled_layout("iso105")
    assert rebuilt.to_json() == doc


@settings(max_examples=60)
@given(st.lists(st.lists(st.sampled_from([1.0, 1.25, 1.5, 2.0]), min_size=1, max_size=8),
                min_size=1, max_size=5))
def test_random_specs_never_overlap(widths):
    lines = []
    n = 0
    for row in widths:
        entries = []
        for w in row:
            entries.append(f"K{n}:{w}")
            n += 1
        lines.append(" ".join(entries))
    layout = build_layout("\n".join(lines))
    # overlap is checked at construction; also verify the area inequality
    x, y, w, h = layout.bounds()
    total = sum(k.rect[2] * k.rect[3] for k in layout.keys)
    assert total <= w * h + 1e-9


# ---------------------------------------------------------------------------
# Hit testing


def test_key_at_center(iso):
    q = iso.key("KeyQ")
    assert key_at(iso, q.center) == "KeyQ"


def test_key_at_gap(iso):
    q = iso.key("KeyQ")
    x, y, w, h = q.rect
    assert key_at(iso, (x + w + 0.01, y + h / 2)) is None


def test_key_at_half_open_boundary():
    layout = build_layout("A B", gap_mm=0.0)
    a = layout.key("A")
    boundary_x = a.rect[0] + a.rect[2]
    assert key_at(layout, (boundary_x, a.rect[1] + 1.0)) == "B"
    assert key_at(layout, (a.rect[0], a.rect[1])) == "A"


# ---------------------------------------------------------------------------
# Regions


def test_letter_regions_k6(iso):
    group = set(letter_keys())
    regions = partition_regions(iso, group, 6)
    assert len(regions) == 4
    sizes = [len(r.members) for r in regions]
    assert sum(sizes) == 26
    assert all(6 <= s <= 11 for s in sizes)
    # disjoint cover
    union = set()
    for region in regions:
        assert not (union & region.members)
        union |= region.members
    assert union == group
    # connectivity, checked with a test-local BFS
    for region in regions:
        seen = {region.anchor}
        frontier = [region.anchor]
        while frontier:
            current = frontier.pop()
            for nb in iso.adjacency[current] & region.members:
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        assert seen == set(region.members)


def test_regions_k1_singletons(iso):
    group = set(letter_keys())
    regions = partition_regions(iso, group, 1)
    assert len(regions) == 26
    assert all(len(r.members) == 1 for r in regions)


def test_regions_forced_single_cover(iso):
    group = set(letter_keys())
    regions = partition_regions(iso, group, 26)
    assert len(regions) == 1
    assert regions[0].members == frozenset(group)


def test_regions_k_exceeds_group(iso):
    with pytest.raises(ParameterError):
        partition_regions(iso, set(letter_keys()), 27)


def test_regions_deterministic(iso):
    group = default_shuffle_group()
    first = partition_regions(iso, group, 6)
    second = partition_regions(iso, group, 6)
    assert first == second


@settings(max_examples=30)
@given(st.integers(min_value=2, max_value=12))
def test_regions_partition_property(k):
    iso = load_bundled_layout("iso105")
    group = default_shuffle_group()
    regions = partition_regions(iso, group, k)
    union = set()
    for region in regions:
        assert len(region.members) >= k
        assert len(region.members) <= 2 * k - 1
        assert region.anchor in region.members
        assert not (union & region.members)
        union |= region.members
    assert union == set(group)
