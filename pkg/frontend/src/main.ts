// App wiring: session setup panel, live keyboard view, transcript and demo
// panels (seek bar, photo selection, mole score), diagnostics and latency.

import { InputCapture } from "./keymap.js";
import type { LayoutDoc, ProfileInfo, SessionCreated } from "./protocol.js";
import { renderKeyboard } from "./render.js";
import { SessionSocket } from "./ws.js";
import { applyFrame, initialViewModel, withConnection, ViewModel } from "./viewmodel.js";

const $ = (id: string) => document.getElementById(id) as HTMLElement;

let vm: ViewModel = initialViewModel();
let layout: LayoutDoc | null = null;
let socket: SessionSocket | null = null;
let capture = new InputCapture();
let mediaLength = 100;
const latencies: number[] = [];
const unmapped = new Set<string>();

function update(next: ViewModel): void {
  vm = next;
  if (layout !== null) {
    renderKeyboard($("keyboard"), layout, vm.render);
  }
  $("transcript").textContent = vm.transcript || " ";
  $("status").textContent = vm.connection;
  $("status").className = `status ${vm.connection}`;
  $("commands").textContent = vm.commands.slice(-6).join("  ");
  $("selected").textContent = vm.selectedItem ?? "";
  if (vm.seekSeconds !== null) {
    const ratio = Math.min(1, vm.seekSeconds / mediaLength);
    ($("seek-fill") as HTMLElement).style.width = `${(ratio * 100).toFixed(1)}%`;
    $("seek-label").textContent =
      `${vm.seekSeconds.toFixed(1)} s / ${mediaLength.toFixed(0)} s  (frame ${Math.round(vm.seekSeconds * 24)})`;
  }
  if (vm.game !== null) {
    $("game").textContent = `score ${vm.game.score}  misses ${vm.game.misses}`;
  }
  const notes = [...vm.diagnostics.slice(-4)];
  if (unmapped.size > 0) {
    notes.push(`unmapped codes: ${[...unmapped].join(", ")}`);
  }
  $("diagnostics").textContent = notes.join("\n");
  if (latencies.length > 0) {
    const avg = latencies.reduce((a, b) => a + b, 0) / latencies.length;
    $("latency").textContent = `rtt ~${avg.toFixed(0)} ms`;
  }
}

async function loadProfiles(): Promise<void> {
  const response = await fetch("/api/profiles");
  const doc = (await response.json()) as { profiles: ProfileInfo[] };
  const select = $("profile") as HTMLSelectElement;
  select.innerHTML = "";
  for (const profile of doc.profiles) {
    const option = document.createElement("option");
    option.value = profile.name;
    option.textContent = `${profile.name} — ${profile.description}`;
    select.appendChild(option);
  }
  (select.querySelector('option[value="password-entry"]') as HTMLOptionElement | null)
    ?.setAttribute("selected", "selected");
}

async function createSession(): Promise<void> {
  const profile = ($("profile") as HTMLSelectElement).value;
  const strategy = ($("strategy") as HTMLSelectElement).value;
  const seedText = ($("seed") as HTMLInputElement).value.trim();
  const body: Record<string, unknown> = { profile };
  if (strategy !== "none") {
    body.strategy = strategy === "region"
      ? { kind: "region", region_size: 6 }
      : { kind: strategy };
    if (seedText !== "") body.seed = Number(seedText);
  }
  const response = await fetch("/api/sessions", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    const err = await response.json();
    update({ ...vm, diagnostics: [...vm.diagnostics, `${err.code}: ${err.detail}`] });
    return;
  }
  const created = (await response.json()) as SessionCreated;
  const layoutResponse = await fetch(`/api/layouts/${created.layout}`);
  layout = (await layoutResponse.json()) as LayoutDoc;

  const slider = created.render_state.overlays.find((o) => o.kind === "slider");
  mediaLength = Number(slider?.payload.media_length_s ?? 100);

  capture = new InputCapture();
  latencies.length = 0;
  unmapped.clear();
  socket?.close();
  update({ ...initialViewModel(), render: created.render_state });

  const proto = location.protocol === "https:" ? "wss" : "ws";
  socket = new SessionSocket(
    `${proto}://${location.host}/ws/sessions/${created.session_id}`,
    {
      onFrame: (frame) => update(applyFrame(vm, frame)),
      onStatus: (status) => update(withConnection(vm, status)),
      onLatency: (rtt) => {
        latencies.push(rtt);
        if (latencies.length > 20) latencies.shift();
      },
    });
  socket.connect();
  $("session-id").textContent = created.session_id;
}

function bindKeyboard(): void {
  window.addEventListener("keydown", (event) => {
    if ((event.target as HTMLElement)?.tagName === "INPUT") return;
    const result = capture.keydown(event.code, event.repeat, performance.now());
    if (result.unmapped) {
      unmapped.add(result.unmapped);
      update(vm);
    }
    if (result.frame !== null && socket !== null) {
      event.preventDefault();
      socket.send(result.frame);
    }
  });
  window.addEventListener("keyup", (event) => {
    if ((event.target as HTMLElement)?.tagName === "INPUT") return;
    const result = capture.keyup(event.code, performance.now());
    if (result.frame !== null && socket !== null) {
      event.preventDefault();
      socket.send(result.frame);
    }
  });
}

export function start(): void {
  void loadProfiles();
  $("create").addEventListener("click", () => void createSession());
  bindKeyboard();
  update(vm);
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
