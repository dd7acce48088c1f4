/**
 * Pure HTML rendering of the session state.
 *
 * Every panel is a deterministic function of the state, so a replayed
 * generation (same seed, same inputs) renders the byte-identical markup.
 * The upper section is the editable input timeline, the lower section holds
 * the sampled futures, the next-event distribution and the risk panel.
 */

import type { SessionState } from "./state.js";
import { canGenerate } from "./state.js";
import type { TrajectoryDoc, VocabToken } from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function fmtAge(age: number): string {
  return age.toFixed(2);
}

function fmtPct(p: number): string {
  return (100 * p).toFixed(1) + "%";
}

function kindOf(vocab: VocabToken[], code: string): string {
  const token = vocab.find((t) => t.code === code);
  return token ? token.kind : "event";
}

export function renderTimeline(state: SessionState): string {
  const rows = state.inputEvents
    .map((ev, i) => {
      const cls = kindOf(state.vocab, ev.code) === "static" ? "chip static" : "chip";
      return (
        `<li class="timeline-row" data-index="${i}">` +
        `<span class="${cls}">${escapeHtml(ev.code)}</span>` +
        `<span class="age">@ ${fmtAge(ev.age_years)}y</span>` +
        `<button data-action="remove" data-index="${i}">remove</button>` +
        `</li>`
      );
    })
    .join("");
  const fieldError = state.fieldError
    ? `<p class="field-error">${escapeHtml(state.fieldError)}</p>`
    : "";
  return (
    `<section id="timeline"><h2>Input timeline</h2>` +
    `<ul>${rows}</ul>` +
    `<form id="add-event">` +
    `<input name="code" list="vocab-options" placeholder="ICD-10 code" />` +
    `<input name="age" type="number" min="0" step="0.1" placeholder="age (years)" />` +
    `<button data-action="add">add event</button>` +
    `</form>${fieldError}</section>`
  );
}

export function renderControls(state: SessionState): string {
  const seed = state.params.seed === null ? "" : String(state.params.seed);
  const disabled = canGenerate(state) ? "" : " disabled";
  return (
    `<section id="controls">` +
    `<label>seed <input id="seed" value="${seed}" readonly /></label>` +
    `<label>samples <input id="n-samples" type="number" value="${state.params.n_samples}" min="1" /></label>` +
    `<label>max age <input id="max-age" type="number" value="${state.params.max_age_years}" min="1" /></label>` +
    `<button data-action="generate"${disabled}>generate</button>` +
    `<button data-action="replay"${disabled || (seed === "" ? " disabled" : "")}>replay seed</button>` +
    `<button data-action="reroll"${disabled}>re-roll</button>` +
    `</section>`
  );
}

function renderSample(doc: TrajectoryDoc): string {
  // per-sample seeds are 64-bit and exceed JS number precision; the master
  // seed in the controls is the replay handle, so they are not displayed
  const chips = doc.events
    .map((ev) => {
      const classes = ["chip"];
      if (ev.generated) {
        classes.push("generated");
      }
      if (ev.code === "DEATH") {
        classes.push("terminal");
      }
      return (
        `<span class="${classes.join(" ")}">` +
        `${escapeHtml(ev.code)}@${fmtAge(ev.age_years)}` +
        `</span>`
      );
    })
    .join("");
  return `<li class="sample">${chips}</li>`;
}

export function renderResults(state: SessionState): string {
  if (state.status === "loading") {
    return `<section id="results"><p class="loading">generating…</p></section>`;
  }
  if (!state.results) {
    return `<section id="results"><p class="placeholder">no results; add events and generate</p></section>`;
  }
  const { generate, distribution } = state.results;
  const samples = generate.samples.map(renderSample).join("");
  const bars = distribution.entries
    .map(
      (e) =>
        `<li><span class="dist-code">${escapeHtml(e.code)}</span>` +
        `<span class="bar" style="width:${Math.round(400 * e.probability)}px"></span>` +
        `<span class="dist-prob">${fmtPct(e.probability)}</span>` +
        ` <span class="dist-label">${escapeHtml(e.label)}</span></li>`,
    )
    .join("");
  return (
    `<section id="results">` +
    `<h2>Sampled futures (seed ${generate.seed}, n=${generate.n_samples})</h2>` +
    `<ul id="samples">${samples}</ul>` +
    `<h2>Next event</h2><ul id="distribution">${bars}</ul>` +
    `</section>`
  );
}

export function renderRisk(state: SessionState): string {
  if (!state.risk) {
    return (
      `<section id="risk"><h2>Risk by horizon</h2>` +
      `<form id="risk-form">` +
      `<input name="targets" placeholder="target codes, e.g. E11,I10" />` +
      `<input name="horizon" type="number" placeholder="horizon age" />` +
      `<button data-action="risk"${canGenerate(state) ? "" : " disabled"}>estimate</button>` +
      `</form><p class="placeholder">no risk estimates yet</p></section>`
    );
  }
  const risk = state.risk;
  const rows = risk.estimates
    .map(
      (e) =>
        `<li><span class="risk-code">${escapeHtml(e.code)}</span>` +
        `<span class="bar" style="width:${Math.round(400 * e.probability)}px"></span>` +
        `<span class="risk-prob">${fmtPct(e.probability)} ± ${fmtPct(e.std_error)}</span></li>`,
    )
    .join("");
  return (
    `<section id="risk"><h2>Risk by horizon (age ${risk.horizon_age_years}, n=${risk.n_samples})</h2>` +
    `<form id="risk-form">` +
    `<input name="targets" placeholder="target codes, e.g. E11,I10" />` +
    `<input name="horizon" type="number" placeholder="horizon age" />` +
    `<button data-action="risk">estimate</button>` +
    `</form><ul>${rows}</ul></section>`
  );
}

export function renderBanner(state: SessionState): string {
  if (state.status !== "error" || !state.error) {
    return "";
  }
  return (
    `<div id="banner" class="error-banner">${escapeHtml(state.error)}` +
    `<button data-action="dismiss">dismiss</button></div>`
  );
}

export function renderVocabOptions(state: SessionState): string {
  const options = state.vocab
    .filter((t) => t.kind === "event" || t.kind === "static")
    .map((t) => `<option value="${escapeHtml(t.code)}">${escapeHtml(t.label)}</option>`)
    .join("");
  return `<datalist id="vocab-options">${options}</datalist>`;
}

export function renderApp(state: SessionState): string {
  return (
    renderBanner(state) +
    renderVocabOptions(state) +
    renderTimeline(state) +
    renderControls(state) +
    renderResults(state) +
    renderRisk(state)
  );
}
