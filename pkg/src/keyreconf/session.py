"""Event-sourced session runtime.

A session folds key events through the mapping engine (plus any app logic,
currently the mole game) and appends everything to an ordered log: events
in, actions and render versions out.  Logs serialize as JSONL, one record
per line under a header line, flushed per record; re-running the recorded
events must reproduce the recorded outputs byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .app_profiles import (GameState, MoleGameCfg, apply_session_config,
                           mole_overlay, mole_tick, shuffled_password_profile)
from .layout import KeyId
from .mapping_engine import (Action, Coordinate, EventError, KeyEvent,
                             MappingEngine, MappingProfile, Overlay, RenderState,
                             action_to_dict, profile_to_json)
from .shuffle import (ShuffledLayout, shuffle, strategy_from_dict,
                      strategy_to_dict)

LOG_SCHEMA = 1


class ReplayError(RuntimeError):
    def __init__(self, message: str, record_index: int):
        super().__init__(f"record {record_index}: {message}")
        self.record_index = record_index


@dataclass(frozen=True)
class EventRecord:
    t_ms: int
    key: KeyId
    edge: str


@dataclass(frozen=True)
class ActionRecord:
    t_ms: int
    action: Mapping
    source: KeyId | None


@dataclass(frozen=True)
class RenderRecord:
    t_ms: int
    version: int
    digest: str


@dataclass(frozen=True)
class MetaRecord:
    t_ms: int
    text: str


LogRecord = EventRecord | ActionRecord | RenderRecord | MetaRecord


def record_to_dict(record: LogRecord) -> dict:
    if isinstance(record, EventRecord):
        return {"kind": "event", "t_ms": record.t_ms, "key": record.key,
                "edge": record.edge}
    if isinstance(record, ActionRecord):
        return {"kind": "action", "t_ms": record.t_ms, "action": dict(record.action),
                "source": record.source}
    if isinstance(record, RenderRecord):
        return {"kind": "render", "t_ms": record.t_ms, "version": record.version,
                "digest": record.digest}
    return {"kind": "meta", "t_ms": record.t_ms, "text": record.text}


def record_from_dict(doc: Mapping) -> LogRecord:
    kind = doc.get("kind")
    if kind == "event":
        return EventRecord(doc["t_ms"], doc["key"], doc["edge"])
    if kind == "action":
        return ActionRecord(doc["t_ms"], doc["action"], doc.get("source"))
    if kind == "render":
        return RenderRecord(doc["t_ms"], doc["version"], doc["digest"])
    if kind == "meta":
        return MetaRecord(doc["t_ms"], doc["text"])
    raise ValueError(f"unknown log record kind {kind!r}")


def render_digest(render: RenderState) -> str:
    payload = json.dumps(render.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def profile_hash(profile: MappingProfile) -> str:
    return hashlib.sha256(profile_to_json(profile).encode("utf-8")).hexdigest()[:16]


@dataclass
class SessionLog:
    header: dict
    records: list[LogRecord] = field(default_factory=list)

    def actions(self) -> list[ActionRecord]:
        return [r for r in self.records if isinstance(r, ActionRecord)]

    def renders(self) -> list[RenderRecord]:
        return [r for r in self.records if isinstance(r, RenderRecord)]

    def events(self) -> list[EventRecord]:
        return [r for r in self.records if isinstance(r, EventRecord)]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "header", **self.header},
                            sort_keys=True, ensure_ascii=False)]
        lines.extend(json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False)
                     for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SessionLog":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty session log")
        header = json.loads(lines[0])
        if header.get("kind") != "header":
            raise ValueError("session log must start with a header line")
        if header.get("schema") != LOG_SCHEMA:
            raise ValueError(f"unsupported log schema {header.get('schema')!r}")
        header.pop("kind")
        records: list[LogRecord] = []
        body = [line.strip() for line in lines[1:] if line.strip()]
        for i, line in enumerate(body):
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError):
                # A truncated trailing record (crash mid-write) is dropped;
                # a torn line anywhere else is corruption.
                if i == len(body) - 1:
                    break
                raise
        return cls(header=header, records=records)


class LogWriter:
    """Per-record flushed JSONL writer; safe against torn trailing lines."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")

    def _write(self, line: str) -> None:
        self._fh.write(line + "\n")
        self._fh.flush()

    def write_header(self, header: dict) -> None:
        self._write(json.dumps({"kind": "header", **header},
                               sort_keys=True, ensure_ascii=False))

    def append(self, record: LogRecord) -> None:
        self._write(json.dumps(record_to_dict(record), sort_keys=True, ensure_ascii=False))

    def close(self) -> None:
        self._fh.close()


# ---------------------------------------------------------------------------
# Session runner


class MoleApp:
    """Server-side whack-a-mole scoring driven by event time."""

    def __init__(self, cfg: MoleGameCfg):
        self.cfg = cfg
        self.state = GameState()

    def on_event(self, t_ms: int, actions: Sequence[Action]) -> list[Overlay]:
        hits = [a for a in actions if isinstance(a, Coordinate)]
        self.state = mole_tick(self.state, self.cfg, max(t_ms, self.state.clock), hits)
        return [Overlay("game", (0.0, 0.0, 0.0, 0.0), mole_overlay(self.state, self.cfg))]


@dataclass
class SessionFrame:
    """One step's outputs, in causal order."""
    emissions: list = field(default_factory=list)
    render: RenderState | None = None


class SessionRunner:
    """Feeds one session's events through the engine and keeps the log."""

    def __init__(self, profile: MappingProfile, *, session_id: str = "local",
                 shuffled: ShuffledLayout | None = None,
                 writer: LogWriter | None = None,
                 extra_header: Mapping | None = None):
        self.profile = profile
        self.shuffled = shuffled
        self.engine = MappingEngine(profile)
        self.app = self._build_app(profile)
        header = {
            "schema": LOG_SCHEMA,
            "session": session_id,
            "profile": profile.name,
            "profile_hash": profile_hash(profile),
            "layout": profile.base_layout.name,
            "shuffle": None,
            **(dict(extra_header) if extra_header else {}),
        }
        if shuffled is not None:
            header["shuffle"] = {
                "seed": shuffled.seed,
                "strategy": strategy_to_dict(shuffled.strategy),
                "group": sorted(shuffled.group),
            }
        self.log = SessionLog(header=header)
        self.writer = writer
        if self.writer is not None:
            self.writer.write_header(header)
        self.last_render: RenderState | None = None
        self._closed = False
        self._record(MetaRecord(0, f"session start profile={profile.name}"))
        self._emit_render(0, self.engine.start())

    @staticmethod
    def _build_app(profile: MappingProfile):
        payload = profile.overlay_payload or {}
        if payload.get("game") == "whack-a-mole" and profile.image_maps:
            cfg = MoleGameCfg(
                grid=profile.image_maps[0],
                spawn_interval_ms=payload.get("spawn_interval_ms", 1200),
                mole_lifetime_ms=payload.get("mole_lifetime_ms", 1500),
                seed=payload.get("seed", 0),
            )
            return MoleApp(cfg)
        return None

    def _record(self, record: LogRecord) -> None:
        self.log.records.append(record)
        if self.writer is not None:
            self.writer.append(record)

    def _emit_render(self, t_ms: int, render: RenderState) -> RenderState:
        if self.app is not None:
            overlays = self.app.on_event(t_ms, [])
            render = RenderState(render.version, render.per_key,
                                 render.overlays + tuple(overlays), render.geometry)
        self.last_render = render
        self._record(RenderRecord(t_ms, render.version, render_digest(render)))
        return render

    def feed(self, event: KeyEvent) -> SessionFrame:
        """Apply one event; logs it plus everything it caused."""
        frame = SessionFrame()
        self._record(EventRecord(event.t_ms, event.key, event.edge))
        try:
            out = self.engine.apply_event(event)
        except EventError as exc:
            self._record(MetaRecord(event.t_ms, f"dropped event: {exc}"))
            raise
        for warning in out.warnings:
            self._record(MetaRecord(event.t_ms, warning))
        for emission in out.emissions:
            self._record(ActionRecord(emission.t_ms, action_to_dict(emission.action),
                                      emission.source))
            frame.emissions.append(emission)
        render = out.render
        if self.app is not None:
            overlays = self.app.on_event(event.t_ms, [e.action for e in out.emissions])
            base = render or self.engine.render_snapshot()
            render = RenderState(base.version, base.per_key,
                                 tuple(o for o in base.overlays if o.kind != "game")
                                 + tuple(overlays),
                                 base.geometry)
        if render is not None:
            self.last_render = render
            self._record(RenderRecord(event.t_ms, render.version, render_digest(render)))
            frame.render = render
        return frame

    def resolve(self, now_ms: int) -> SessionFrame:
        """Resolve chord windows that elapsed with no partner press."""
        frame = SessionFrame()
        out = self.engine.resolve_chords(now_ms)
        for emission in out.emissions:
            self._record(ActionRecord(emission.t_ms, action_to_dict(emission.action),
                                      emission.source))
            frame.emissions.append(emission)
        return frame

    def pending_deadline(self) -> int | None:
        return self.engine.next_deadline()

    def finish(self) -> SessionLog:
        if not self._closed:
            out = self.engine.flush()
            for emission in out.emissions:
                self._record(ActionRecord(emission.t_ms, action_to_dict(emission.action),
                                          emission.source))
            self._record(MetaRecord(self._last_t(), "session end"))
            if self.writer is not None:
                self.writer.close()
            self._closed = True
        return self.log

    def _last_t(self) -> int:
        for record in reversed(self.log.records):
            return record.t_ms
        return 0


def run_session(profile: MappingProfile, events: Iterable[KeyEvent], *,
                session_id: str = "local", shuffled: ShuffledLayout | None = None,
                sinks: Sequence[Callable[[LogRecord], None]] = (),
                writer: LogWriter | None = None) -> SessionLog:
    """Fold an event stream through a session; returns the complete log.

    Before each event, chord windows that elapsed strictly earlier are
    resolved, so deferred actions keep their t_ms order relative to later
    events.  Malformed events become meta warnings and are dropped.
    """
    runner = SessionRunner(profile, session_id=session_id, shuffled=shuffled,
                           writer=writer)
    watermark = 0

    def pump() -> None:
        nonlocal watermark
        for record in runner.log.records[watermark:]:
            for sink in sinks:
                sink(record)
        watermark = len(runner.log.records)

    pump()
    for event in events:
        try:
            runner.feed(event)
        except EventError:
            pass
        pump()
    log = runner.finish()
    pump()
    return log


# ---------------------------------------------------------------------------
# Replay


def rebuild_session(header: Mapping, registry: Mapping[str, MappingProfile]) -> tuple[MappingProfile, ShuffledLayout | None]:
    name = header.get("profile")
    profile = registry.get(name)
    if profile is None:
        raise ValueError(f"log references unknown profile {name!r}")
    profile = apply_session_config(profile, header.get("config"))
    shuffled = None
    shuffle_doc = header.get("shuffle")
    if shuffle_doc:
        shuffled = shuffle(profile.base_layout, frozenset(shuffle_doc["group"]),
                           strategy_from_dict(shuffle_doc["strategy"]),
                           shuffle_doc["seed"])
        profile = shuffled_password_profile(profile, shuffled)
    recorded_hash = header.get("profile_hash")
    if recorded_hash and recorded_hash != profile_hash(profile):
        raise ValueError(f"profile {name!r} hash mismatch: registry has a different build")
    return profile, shuffled


def replay(source: str | Path | SessionLog,
           registry: Mapping[str, MappingProfile]) -> SessionLog:
    """Re-execute a log's events; raises ReplayError on the first divergence."""
    if isinstance(source, SessionLog):
        original = source
    else:
        original = SessionLog.from_jsonl(Path(source).read_text(encoding="utf-8"))
    profile, shuffled = rebuild_session(original.header, registry)
    rerun = run_session(
        profile,
        [KeyEvent(r.t_ms, r.key, r.edge) for r in original.events()],
        session_id=original.header.get("session", "replay"),
        shuffled=shuffled,
    )

    def comparable(log: SessionLog) -> list[tuple[int, str]]:
        out = []
        for i, record in enumerate(log.records):
            if isinstance(record, (ActionRecord, RenderRecord)):
                out.append((i, json.dumps(record_to_dict(record), sort_keys=True,
                                          ensure_ascii=False)))
        return out

    original_rows = comparable(original)
    rerun_rows = comparable(rerun)
    for (orig_index, orig_line), (_, rerun_line) in zip(original_rows, rerun_rows):
        if orig_line != rerun_line:
            raise ReplayError(
                f"recorded {orig_line} but replay produced {rerun_line}", orig_index)
    if len(original_rows) != len(rerun_rows):
        longer = original_rows if len(original_rows) > len(rerun_rows) else rerun_rows
        index = longer[min(len(original_rows), len(rerun_rows))][0]
        raise ReplayError("record counts differ between recording and replay", index)
    return rerun


def now_wallclock_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
