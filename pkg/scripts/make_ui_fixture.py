#!/usr/bin/env python3
"""Capture a real service exchange as a frontend test fixture.

Creates a RegionShuffle password session, types an 8-character password by
physical key over the WebSocket, and records the create response, the layout
document, and every frame exchanged.  The frontend's end-to-end test drives
its reducer with this recording.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from keyreconf.layout import default_shuffle_group, load_bundled_layout
from keyreconf.service import create_app
from keyreconf.shuffle import RegionShuffle, shuffle

FIXTURE = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "password_session.json"
PASSWORD = "p4ssw0rd"
SEED = 20260810


def main() -> int:
    app = create_app()
    client = TestClient(app)
    created = client.post("/api/sessions", json={
        "profile": "password-entry",
        "strategy": {"kind": "region", "region_size": 6},
        "seed": SEED,
    }).json()
    layout_doc = client.get("/api/layouts/iso105").json()

    iso = load_bundled_layout("iso105")
    shuffled = shuffle(iso, default_shuffle_group(), RegionShuffle(6), SEED)
    inverse = {src: phys for phys, src in shuffled.perm.items()}
    source_of = {k.default_legend: k.id for k in iso.keys if k.id in shuffled.group}
    presses = [inverse[source_of[c]] for c in PASSWORD]

    exchanges = []
    with client.websocket_connect(f"/ws/sessions/{created['session_id']}") as ws:
        snapshot = ws.receive_json()
        t = 0
        for phys in presses:
            sent_down = {"type": "key_event", "t_ms": t, "key": phys, "edge": "down"}
            ws.send_json(sent_down)
            received = [ws.receive_json()]  # the action frame
            sent_up = {"type": "key_event", "t_ms": t + 40, "key": phys, "edge": "up"}
            ws.send_json(sent_up)
            exchanges.append({"send": sent_down, "recv": received})
            exchanges.append({"send": sent_up, "recv": []})
            t += 100

    log_text = client.get(f"/api/sessions/{created['session_id']}/log").text
    fixture = {
        "password": PASSWORD,
        "presses": presses,
        "created": created,
        "layout": layout_doc,
        "snapshot": snapshot,
        "exchanges": exchanges,
        "log_jsonl": log_text,
    }
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_text(json.dumps(fixture, indent=1, ensure_ascii=False),
                       encoding="utf-8")
    print(f"wrote {FIXTURE} ({len(exchanges)} exchanges)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
