// Pure state reducer for the session view. Frames fold into a new view
// model; render versions never go backwards (stale frames are counted and
// dropped), and the transcript mirrors exactly what the service emitted.

import type { ActionFrame, RenderStateFrame, ServerFrame } from "./protocol.js";

export type Connection = "disconnected" | "connecting" | "connected";

export interface GameScore {
  score: number;
  misses: number;
  moles: [number, number][];
}

export interface ViewModel {
  connection: Connection;
  render: RenderStateFrame | null;
  droppedFrames: number;
  transcript: string;
  commands: string[];
  seekSeconds: number | null;
  selectedItem: string | null;
  lastCoordinate: [number, number] | null;
  game: GameScore | null;
  diagnostics: string[];
  actionCount: number;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "disconnected",
    render: null,
    droppedFrames: 0,
    transcript: "",
    commands: [],
    seekSeconds: null,
    selectedItem: null,
    lastCoordinate: null,
    game: null,
    diagnostics: [],
    actionCount: 0,
  };
}

export function withConnection(vm: ViewModel, connection: Connection): ViewModel {
  return { ...vm, connection };
}

function applyAction(vm: ViewModel, frame: ActionFrame): ViewModel {
  const next = { ...vm, actionCount: vm.actionCount + 1 };
  switch (frame.kind) {
    case "emit_text":
      return { ...next, transcript: vm.transcript + String(frame.payload.text ?? "") };
    case "command": {
      const name = String(frame.payload.name ?? "");
      if (name === "backspace") {
        return { ...next, transcript: vm.transcript.slice(0, -1),
                 commands: [...vm.commands, name] };
      }
      return { ...next, commands: [...vm.commands, name] };
    }
    case "seek_to":
      return { ...next, seekSeconds: Number(frame.payload.seconds) };
    case "select_item":
      return { ...next, selectedItem: String(frame.payload.item) };
    case "coordinate":
      return { ...next, lastCoordinate: [Number(frame.payload.u), Number(frame.payload.v)] };
    default:
      return next;
  }
}

function gameOverlay(render: RenderStateFrame): GameScore | null {
  for (const overlay of render.overlays) {
    if (overlay.kind === "game") {
      const payload = overlay.payload as {
        score?: number; misses?: number; moles?: [number, number][];
      };
      return {
        score: payload.score ?? 0,
        misses: payload.misses ?? 0,
        moles: payload.moles ?? [],
      };
    }
  }
  return null;
}

export function applyFrame(vm: ViewModel, frame: ServerFrame): ViewModel {
  switch (frame.type) {
    case "render_state": {
      if (vm.render !== null && frame.version <= vm.render.version) {
        return { ...vm, droppedFrames: vm.droppedFrames + 1 };
      }
      return { ...vm, render: frame, game: gameOverlay(frame) ?? vm.game };
    }
    case "action":
      return applyAction(vm, frame);
    case "error":
      return { ...vm, diagnostics: [...vm.diagnostics, `${frame.code}: ${frame.detail}`] };
    default:
      return vm;
  }
}
