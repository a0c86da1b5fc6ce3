/**
 * String-returning HTML renderers for the mixer views. Kept free of DOM
 * state so they can be unit-tested without a browser.
 */

import { ArchetypeCard, Decomposition } from "./api.js";
import { Snapshot } from "./session.js";

const DISPLAY_THRESHOLD = 0.01;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function pct(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

/** One horizontal bar of a decomposition chart. */
export function weightBarRow(index: number, weight: number): string {
  const width = Math.round(Math.min(1, Math.max(0, weight)) * 100);
  return [
    `<div class="weight-row" data-index="${index}">`,
    `<span class="weight-label">archetype ${index}</span>`,
    `<span class="weight-bar"><span class="weight-fill" style="width:${width}%"></span></span>`,
    `<span class="weight-value">${pct(weight)}</span>`,
    `</div>`,
  ].join("");
}

/** Decomposition panel: bars above threshold, residual hint, load button. */
export function decompositionPanel(result: Decomposition): string {
  const rows = result.pairs
    .filter((p) => p.weight >= DISPLAY_THRESHOLD)
    .map((p) => weightBarRow(p.index, p.weight))
    .join("");
  const hint =
    result.residual > 0.5
      ? `<p class="residual-hint">High residual: this image sits far from the learned styles.</p>`
      : "";
  return [
    `<div class="decomposition">`,
    rows,
    `<p class="residual">residual ${result.residual.toFixed(4)}</p>`,
    hint,
    `<button type="button" data-action="load-weights">Load into sliders</button>`,
    `</div>`,
  ].join("");
}

/** Gallery card: texture tile plus the strongest corpus loadings. */
export function archetypeCard(card: ArchetypeCard, textureUrl: string): string {
  const labels = card.loadings
    .map(
      (l) =>
        `<li><span class="loading-id">${escapeHtml(l.image_id)}</span>` +
        `<span class="loading-weight">${pct(l.weight)}</span></li>`,
    )
    .join("");
  return [
    `<figure class="archetype-card" data-index="${card.index}">`,
    `<img src="${escapeHtml(textureUrl)}" alt="texture for archetype ${card.index}" loading="lazy">`,
    `<figcaption>archetype ${card.index}</figcaption>`,
    `<ul class="loadings">${labels}</ul>`,
    `</figure>`,
  ].join("");
}

/** Shown when a texture tile fails to load. */
export function retryBanner(message: string): string {
  return [
    `<div class="retry-banner" role="alert">`,
    `<span>${escapeHtml(message)}</span>`,
    `<button type="button" data-action="retry">Retry</button>`,
    `</div>`,
  ].join("");
}

/** Inline validation error under a form control. */
export function fieldError(field: string, message: string): string {
  return `<p class="field-error" data-field="${escapeHtml(field)}">${escapeHtml(message)}</p>`;
}

/** One history strip entry; the thumbnail object URL is supplied by the caller. */
export function historyEntry(snapshot: Snapshot, thumbnailUrl: string, position: number): string {
  const summary = snapshot.weights
    .map((w, i) => ({ i, w }))
    .filter((p) => p.w >= DISPLAY_THRESHOLD)
    .sort((a, b) => b.w - a.w)
    .slice(0, 3)
    .map((p) => `${p.i}:${pct(p.w)}`)
    .join(" ");
  return [
    `<button type="button" class="history-entry" data-position="${position}">`,
    `<img src="${escapeHtml(thumbnailUrl)}" alt="history entry ${position}">`,
    `<span class="history-params">${escapeHtml(summary)} g=${snapshot.gamma.toFixed(2)} d=${snapshot.delta.toFixed(2)}</span>`,
    `</button>`,
  ].join("");
}
