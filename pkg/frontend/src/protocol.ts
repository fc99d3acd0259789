// JSON frame protocol spoken with the session service, plus the REST
// document shapes the UI consumes.

export type KeyId = string;

export interface KeyRenderState {
  glyph: string;
  highlight: string | null;
  visible: boolean;
}

export interface OverlayState {
  kind: string;
  rect: [number, number, number, number];
  payload: Record<string, unknown>;
}

export interface RenderStateFrame {
  type: "render_state";
  version: number;
  geometry: string;
  per_key: Record<KeyId, KeyRenderState>;
  overlays: OverlayState[];
}

export interface ActionFrame {
  type: "action";
  kind: string;
  payload: Record<string, unknown>;
  t_ms: number;
  source: KeyId | null;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  detail: string;
}

export type ServerFrame = RenderStateFrame | ActionFrame | ErrorFrame;

export interface KeyEventFrame {
  type: "key_event";
  t_ms: number;
  key: KeyId;
  edge: "down" | "up";
}

export interface LayoutKeyDoc {
  id: KeyId;
  row: number;
  col: number;
  rect: [number, number, number, number];
  legend: string;
}

export interface LayoutDoc {
  name: string;
  pitch_mm: number;
  keys: LayoutKeyDoc[];
}

export interface ProfileInfo {
  name: string;
  description: string;
  render_hint: string;
  layout: string;
}

export interface SessionCreated {
  session_id: string;
  profile: string;
  layout: string;
  render_state: RenderStateFrame;
  shuffle?: {
    seed: number;
    strategy: Record<string, unknown>;
    legends: Record<KeyId, string>;
  };
}

export function parseServerFrame(data: unknown): ServerFrame | null {
  if (typeof data !== "object" || data === null) return null;
  const frame = data as Record<string, unknown>;
  switch (frame.type) {
    case "render_state":
      if (typeof frame.version === "number" && typeof frame.per_key === "object") {
        return frame as unknown as RenderStateFrame;
      }
      return null;
    case "action":
      if (typeof frame.kind === "string") return frame as unknown as ActionFrame;
      return null;
    case "error":
      if (typeof frame.code === "string") return frame as unknown as ErrorFrame;
      return null;
    default:
      return null;
  }
}
