// Keyboard renderer. The HTML for a frame is produced by a pure function of
// (layout, frame), so the same state renders to the identical DOM; the thin
// wrapper below just assigns it.

import type { LayoutDoc, RenderStateFrame } from "./protocol.js";

const SCALE = 2.4; // px per mm

const KNOWN_GEOMETRIES = new Set(["full_keyboard", "one_row_with_bounds", "geometry_only"]);

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  })[c] as string);
}

function px(mm: number): string {
  return (mm * SCALE).toFixed(1);
}

export function keyboardHtml(layout: LayoutDoc, frame: RenderStateFrame | null): string {
  const parts: string[] = [];
  let geometry = frame?.geometry ?? "full_keyboard";
  let warning = "";
  if (!KNOWN_GEOMETRIES.has(geometry)) {
    warning = `<div class="badge warn">unknown geometry "${escapeHtml(geometry)}", showing full keyboard</div>`;
    geometry = "full_keyboard";
  }

  let maxX = 0;
  let maxY = 0;
  for (const key of layout.keys) {
    maxX = Math.max(maxX, key.rect[0] + key.rect[2]);
    maxY = Math.max(maxY, key.rect[1] + key.rect[3]);
  }
  parts.push(`<div class="board" style="width:${px(maxX)}px;height:${px(maxY)}px">`);
  if (warning) parts.push(warning);

  if (geometry !== "geometry_only") {
    for (const key of layout.keys) {
      const state = frame?.per_key[key.id];
      const visible = state?.visible ?? true;
      if (!visible) continue;
      const [x, y, w, h] = key.rect;
      const glyph = state?.glyph ?? key.legend;
      const highlight = state?.highlight ?? null;
      const style = [
        `left:${px(x)}px`, `top:${px(y)}px`,
        `width:${px(w)}px`, `height:${px(h)}px`,
        highlight ? `--hl:${escapeHtml(highlight)}` : "",
      ].filter(Boolean).join(";");
      const cls = highlight ? "key highlighted" : "key";
      parts.push(
        `<div class="${cls}" data-key="${escapeHtml(key.id)}" style="${style}">` +
        `${escapeHtml(glyph)}</div>`);
    }
  }

  for (const overlay of frame?.overlays ?? []) {
    const [x, y, w, h] = overlay.rect;
    const style = `left:${px(x)}px;top:${px(y)}px;width:${px(w)}px;height:${px(h)}px`;
    if (overlay.kind === "bounds") {
      parts.push(`<div class="overlay bounds" style="${style}"></div>`);
    } else if (overlay.kind === "slider") {
      parts.push(`<div class="overlay slider" style="${style}"><div class="track"></div></div>`);
    } else if (overlay.kind === "item") {
      const item = escapeHtml(String(overlay.payload.item ?? ""));
      parts.push(`<div class="overlay item" style="${style}">${item}</div>`);
    } else if (overlay.kind === "image_map") {
      parts.push(`<div class="overlay map" style="${style}"></div>`);
    }
  }
  parts.push("</div>");
  return parts.join("");
}

export function renderKeyboard(root: HTMLElement, layout: LayoutDoc,
                               frame: RenderStateFrame | null): void {
  root.innerHTML = keyboardHtml(layout, frame);
}
