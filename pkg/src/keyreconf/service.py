"""Network service: JSON frames over WebSocket per session, plus a small
request/response API for profiles, sessions, trade-off tables and logs.

Frame types on the session socket:

    inbound   {"type": "key_event", "t_ms": int, "key": KeyId, "edge": "down"|"up"}
    outbound  {"type": "render_state", "version", "per_key", "overlays", "geometry"}
              {"type": "action", "kind", "payload", "t_ms", "source"}
              {"type": "error", "code", "detail"}

Chord windows are timed against event timestamps; a wall-clock assist only
schedules when the resolution is *sent*, never what the log records, so
replays are exact.
"""
from __future__ import annotations

import asyncio
import os
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from . import security_model as sm
from .app_profiles import (PROFILE_DESCRIPTIONS, apply_session_config,
                           build_registry, shuffled_password_profile)
from .layout import LayoutError, default_shuffle_group, load_bundled_layout
from .mapping_engine import (Emission, KeyEvent, MappingProfile, RenderState,
                             action_to_dict)
from .session import LogWriter, SessionRunner, now_wallclock_iso
from .shuffle import ParameterError, legend_render, shuffle, strategy_from_dict

DEFAULT_CAPACITY = 64


def render_frame(render: RenderState) -> dict:
    return {"type": "render_state", **render.to_dict()}


def action_frame(emission: Emission) -> dict:
    doc = action_to_dict(emission.action)
    return {
        "type": "action",
        "kind": doc.pop("kind"),
        "payload": doc,
        "t_ms": emission.t_ms,
        "source": emission.source,
    }


def error_frame(code: str, detail: str) -> dict:
    return {"type": "error", "code": code, "detail": detail}


@dataclass
class LiveSession:
    id: str
    runner: SessionRunner
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    socket: WebSocket | None = None
    wall_at_last_event: float = field(default_factory=time.monotonic)
    t_last_event: int = 0
    timer: asyncio.Task | None = None

    async def send(self, frame: dict) -> None:
        if self.socket is None:
            return
        try:
            await self.socket.send_json(frame)
        except Exception:
            self.socket = None


def create_app(registry: Mapping[str, MappingProfile] | None = None, *,
               layout_name: str = "iso105", capacity: int = DEFAULT_CAPACITY,
               log_dir: str | os.PathLike | None = None,
               frontend_dir: str | os.PathLike | None = None) -> FastAPI:
    layout = load_bundled_layout(layout_name)
    registry = dict(registry) if registry is not None else build_registry(layout)
    app = FastAPI(title="keyreconf", version="0.1.0")
    sessions: dict[str, LiveSession] = {}

    # ---- request/response API ------------------------------------------

    @app.get("/api/profiles")
    def list_profiles():
        return {
            "profiles": [
                {
                    "name": p.name,
                    "description": PROFILE_DESCRIPTIONS.get(p.name, ""),
                    "render_hint": p.render_hint,
                    "layout": p.base_layout.name,
                }
                for _, p in sorted(registry.items())
            ]
        }

    @app.get("/api/layouts/{name}")
    def get_layout(name: str):
        try:
            doc = load_bundled_layout(name).to_json()
        except LayoutError:
            return JSONResponse(error_frame("not-found", f"no layout {name!r}"),
                                status_code=404)
        return Response(doc, media_type="application/json")

    @app.post("/api/sessions", status_code=201)
    async def create_session(body: dict):
        profile_name = body.get("profile")
        profile = registry.get(profile_name)
        if profile is None:
            return JSONResponse(error_frame("not-found", f"no profile {profile_name!r}"),
                                status_code=404)
        if len(sessions) >= capacity:
            return JSONResponse(error_frame("busy", "session capacity reached"),
                                status_code=503)
        config = body.get("config") or {}
        try:
            profile = apply_session_config(profile, config)
            shuffled = None
            if body.get("strategy"):
                strategy = strategy_from_dict(body["strategy"])
                seed = int(body["seed"]) if body.get("seed") is not None \
                    else secrets.randbits(63)
                group = frozenset(body.get("group") or default_shuffle_group())
                shuffled = shuffle(profile.base_layout, group, strategy, seed)
                profile = shuffled_password_profile(profile, shuffled)
        except (ParameterError, ValueError) as exc:
            return JSONResponse(error_frame("bad-request", str(exc)), status_code=400)

        session_id = secrets.token_hex(8)
        writer = None
        if log_dir is not None:
            writer = LogWriter(Path(log_dir) / f"{session_id}.jsonl")
        runner = SessionRunner(
            profile,
            session_id=session_id,
            shuffled=shuffled,
            writer=writer,
            extra_header={"config": config, "created": now_wallclock_iso()},
        )
        live = LiveSession(id=session_id, runner=runner)
        sessions[session_id] = live
        response = {
            "session_id": session_id,
            "profile": profile_name,
            "layout": profile.base_layout.name,
            "render_state": render_frame(runner.last_render),
        }
        if shuffled is not None:
            response["shuffle"] = {
                "seed": shuffled.seed,
                "strategy": body["strategy"],
                "legends": legend_render(shuffled),
            }
        return response

    @app.get("/api/sessions/{session_id}/log")
    def get_log(session_id: str):
        live = sessions.get(session_id)
        if live is None:
            return JSONResponse(error_frame("not-found", "no such session"),
                                status_code=404)
        return PlainTextResponse(live.runner.log.to_jsonl(),
                                 media_type="application/x-ndjson")

    @app.delete("/api/sessions/{session_id}")
    async def close_session(session_id: str):
        live = sessions.pop(session_id, None)
        if live is None:
            return JSONResponse(error_frame("not-found", "no such session"),
                                status_code=404)
        if live.timer is not None:
            live.timer.cancel()
        async with live.lock:
            live.runner.finish()
        return {"closed": session_id}

    @app.get("/api/tradeoff")
    def get_tradeoff(n: int = 8, k_min: int = 2, k_max: int = 10,
                     alpha: str = "0,1", kt: float = sm.DEFAULT_KT_S,
                     dt: float = sm.DEFAULT_DT_S, format: str = "json"):
        try:
            alphas = [float(a) for a in alpha.split(",") if a.strip() != ""]
            rows = sm.tradeoff_table(
                [n], range(k_min, k_max + 1), alphas,
                sm.TimingParams(kt_s=kt, dt_s=dt))
        except (sm.ParameterError, ValueError) as exc:
            return JSONResponse(error_frame("bad-request", str(exc)), status_code=400)
        if format == "csv":
            return PlainTextResponse(sm.table_to_csv(rows), media_type="text/csv")
        return Response(sm.table_to_json(rows), media_type="application/json")

    # ---- session socket ---------------------------------------------------

    async def _send_pending(live: LiveSession, frame_emissions) -> None:
        for emission in frame_emissions:
            await live.send(action_frame(emission))

    def _schedule_timer(live: LiveSession) -> None:
        if live.timer is not None:
            live.timer.cancel()
            live.timer = None
        deadline = live.runner.pending_deadline()
        if deadline is None:
            return
        delay = max(0.0, (deadline - live.t_last_event) / 1000.0
                    - (time.monotonic() - live.wall_at_last_event))

        async def fire():
            await asyncio.sleep(delay)
            async with live.lock:
                current = live.runner.pending_deadline()
                if current is None or current > deadline:
                    return
                frame = live.runner.resolve(deadline)
            await _send_pending(live, frame.emissions)
            _schedule_timer(live)

        live.timer = asyncio.create_task(fire())

    @app.websocket("/ws/sessions/{session_id}")
    async def session_socket(socket: WebSocket, session_id: str):
        await socket.accept()
        live = sessions.get(session_id)
        if live is None:
            await socket.send_json(error_frame("not-found", "no such session"))
            await socket.close()
            return
        live.socket = socket
        if live.runner.last_render is not None:
            await live.send(render_frame(live.runner.last_render))
        try:
            while True:
                try:
                    message = await socket.receive_json()
                except (ValueError, KeyError):
                    await live.send(error_frame("protocol", "frames must be JSON objects"))
                    continue
                if not isinstance(message, dict) or message.get("type") != "key_event":
                    await live.send(error_frame("protocol", "expected a key_event frame"))
                    continue
                try:
                    event = KeyEvent(int(message["t_ms"]), str(message["key"]),
                                     str(message["edge"]))
                except (KeyError, TypeError, ValueError) as exc:
                    await live.send(error_frame("protocol", f"malformed key_event: {exc}"))
                    continue
                async with live.lock:
                    live.wall_at_last_event = time.monotonic()
                    live.t_last_event = event.t_ms
                    try:
                        frame = live.runner.feed(event)
                    except Exception as exc:  # unknown key and friends
                        await live.send(error_frame("event", str(exc)))
                        continue
                await _send_pending(live, frame.emissions)
                if frame.render is not None:
                    await live.send(render_frame(frame.render))
                _schedule_timer(live)
        except WebSocketDisconnect:
            pass
        finally:
            if live.socket is socket:
                live.socket = None

    # ---- static frontend ----------------------------------------------------

    if frontend_dir is not None and Path(frontend_dir).exists():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")

    app.state.sessions = sessions
    app.state.registry = registry
    return app
