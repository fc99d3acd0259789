// Physical key capture: browser KeyboardEvent.code values are the same
// W3C names the service uses for key ids, so the mapping is an identity
// over the known set. Auto-repeat and duplicate edges are filtered here so
// only genuine down/up transitions reach the wire.

import type { KeyEventFrame, KeyId } from "./protocol.js";

export const KNOWN_CODES: readonly string[] = [
  "Escape", "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10",
  "F11", "F12", "PrintScreen", "ScrollLock", "Pause",
  "Backquote", "Digit1", "Digit2", "Digit3", "Digit4", "Digit5", "Digit6",
  "Digit7", "Digit8", "Digit9", "Digit0", "Minus", "Equal", "Backspace",
  "Insert", "Home", "PageUp", "NumLock", "NumpadDivide", "NumpadMultiply",
  "NumpadSubtract",
  "Tab", "KeyQ", "KeyW", "KeyE", "KeyR", "KeyT", "KeyY", "KeyU", "KeyI",
  "KeyO", "KeyP", "BracketLeft", "BracketRight", "Backslash", "Delete",
  "End", "PageDown", "Numpad7", "Numpad8", "Numpad9", "NumpadAdd",
  "CapsLock", "KeyA", "KeyS", "KeyD", "KeyF", "KeyG", "KeyH", "KeyJ",
  "KeyK", "KeyL", "Semicolon", "Quote", "Enter", "Numpad4", "Numpad5",
  "Numpad6",
  "ShiftLeft", "IntlBackslash", "KeyZ", "KeyX", "KeyC", "KeyV", "KeyB",
  "KeyN", "KeyM", "Comma", "Period", "Slash", "ShiftRight", "ArrowUp",
  "Numpad1", "Numpad2", "Numpad3", "NumpadEnter",
  "ControlLeft", "MetaLeft", "AltLeft", "Space", "AltRight", "MetaRight",
  "ContextMenu", "ControlRight", "ArrowLeft", "ArrowDown", "ArrowRight",
  "Numpad0", "NumpadDecimal",
];

export interface CaptureResult {
  frame: KeyEventFrame | null;
  unmapped?: string;
}

export class InputCapture {
  private readonly known: ReadonlySet<string>;
  private held = new Set<KeyId>();
  private originMs: number | null = null;

  constructor(codes: Iterable<string> = KNOWN_CODES) {
    this.known = new Set(codes);
  }

  covers(code: string): boolean {
    return this.known.has(code);
  }

  private sessionTime(nowMs: number): number {
    if (this.originMs === null) this.originMs = nowMs;
    return Math.max(0, Math.round(nowMs - this.originMs));
  }

  keydown(code: string, repeat: boolean, nowMs: number): CaptureResult {
    if (!this.known.has(code)) return { frame: null, unmapped: code };
    if (repeat || this.held.has(code)) return { frame: null };
    this.held.add(code);
    return {
      frame: { type: "key_event", t_ms: this.sessionTime(nowMs), key: code, edge: "down" },
    };
  }

  keyup(code: string, nowMs: number): CaptureResult {
    if (!this.known.has(code)) return { frame: null, unmapped: code };
    if (!this.held.has(code)) return { frame: null };
    this.held.delete(code);
    return {
      frame: { type: "key_event", t_ms: this.sessionTime(nowMs), key: code, edge: "up" },
    };
  }

  reset(): void {
    this.held.clear();
    this.originMs = null;
  }
}
