/**
 * Orchestrates the session: validates edits against the vocabulary, talks to
 * the service through the single ApiClient, and enforces one in-flight
 * generation at a time (a newer submission supersedes the older one; stale
 * responses are dropped, never rendered).
 */

import { ApiClient, ApiError, type FetchLike } from "./api.js";
import { renderApp } from "./render.js";
import {
  addEvent,
  applyGeneration,
  applyRisk,
  beginLoading,
  canGenerate,
  dismissError,
  fail,
  initialState,
  lastInputAge,
  modifyEvent,
  removeEvent,
  setFieldError,
  setParams,
  withVocab,
  type SessionState,
} from "./state.js";
import type { TrajectoryDoc, VocabToken } from "./types.js";

export interface ControllerOptions {
  origin: string;
  fetchImpl?: FetchLike;
  /** Source of fresh seeds for the re-roll control. */
  seedSource?: () => number;
  /** Called after every state change with the freshly rendered markup. */
  onRender?: (html: string, state: SessionState) => void;
}

function defaultSeedSource(): number {
  return Math.floor(Math.random() * Number.MAX_SAFE_INTEGER);
}

/** Display contract for anything we put on screen. */
export function checkDisplayContract(doc: TrajectoryDoc, vocab: VocabToken[]): void {
  const terminalCodes = new Set(
    vocab.filter((t) => t.kind === "terminal").map((t) => t.code),
  );
  let prev = -Infinity;
  doc.events.forEach((ev, i) => {
    if (ev.age_years < prev) {
      throw new Error(`sample ages decrease at position ${i}`);
    }
    prev = ev.age_years;
    if (terminalCodes.has(ev.code) && i !== doc.events.length - 1) {
      throw new Error(`terminal event before the end at position ${i}`);
    }
  });
}

export class AppController {
  readonly api: ApiClient;
  state: SessionState;
  private readonly seedSource: () => number;
  private readonly onRender: (html: string, state: SessionState) => void;
  private generationTicket = 0;

  constructor(options: ControllerOptions) {
    this.api = new ApiClient(options.origin, options.fetchImpl);
    this.seedSource = options.seedSource ?? defaultSeedSource;
    this.onRender = options.onRender ?? (() => {});
    this.state = initialState();
  }

  get html(): string {
    return renderApp(this.state);
  }

  private commit(state: SessionState): void {
    this.state = state;
    this.onRender(renderApp(state), state);
  }

  async init(): Promise<void> {
    try {
      const vocab = await this.api.vocab();
      this.commit(withVocab(this.state, vocab.tokens));
    } catch (err) {
      this.commit(fail(this.state, String(err instanceof Error ? err.message : err)));
    }
  }

  /** Typeahead backing: substring search over codes and labels. */
  async typeahead(query: string): Promise<VocabToken[]> {
    const res = await this.api.vocab(query);
    return res.tokens;
  }

  private validateEvent(code: string, age: number): string | null {
    const known = this.state.vocab.some(
      (t) => t.code === code && t.kind !== "padding" && t.kind !== "terminal",
    );
    if (!known) {
      return `unknown code ${code}`;
    }
    if (!Number.isFinite(age) || age < 0) {
      return `age must be a non-negative number`;
    }
    return null;
  }

  addEvent(rawCode: string, age: number): void {
    const code = rawCode.trim().toUpperCase();
    const problem = this.validateEvent(code, age);
    if (problem) {
      this.commit(setFieldError(this.state, problem));
      return;
    }
    this.commit(addEvent(this.state, code, age));
  }

  removeEvent(index: number): void {
    this.commit(removeEvent(this.state, index));
  }

  modifyEvent(index: number, rawCode: string, age: number): void {
    const code = rawCode.trim().toUpperCase();
    const problem = this.validateEvent(code, age);
    if (problem) {
      this.commit(setFieldError(this.state, problem));
      return;
    }
    this.commit(modifyEvent(this.state, index, code, age));
  }

  setSamples(n: number): void {
    if (Number.isInteger(n) && n >= 1) {
      this.commit(setParams(this.state, { n_samples: n }));
    }
  }

  setMaxAge(age: number): void {
    if (Number.isFinite(age) && age > 0) {
      this.commit(setParams(this.state, { max_age_years: age }));
    }
  }

  dismissBanner(): void {
    this.commit(dismissError(this.state));
  }

  /** Run generation with the current seed (or let the service pick one).
   *
   * A submission while another is in flight supersedes it: the older
   * response is dropped on arrival, so stale results never render.
   */
  async generate(): Promise<void> {
    if (this.state.inputEvents.length === 0) {
      return;
    }
    const ticket = ++this.generationTicket;
    this.commit(beginLoading(this.state));
    const events = this.state.inputEvents.map((e) => ({
      code: e.code,
      age_years: e.age_years,
    }));
    const params: { seed?: number; max_age_years: number } = {
      max_age_years: this.state.params.max_age_years,
    };
    if (this.state.params.seed !== null) {
      params.seed = this.state.params.seed;
    }
    try {
      const generated = await this.api.generate({
        events,
        params,
        n_samples: this.state.params.n_samples,
      });
      const distribution = await this.api.distribution(events, 10);
      if (ticket !== this.generationTicket) {
        return; // superseded by a newer submission
      }
      for (const sample of generated.samples) {
        checkDisplayContract(sample, this.state.vocab);
      }
      this.commit(applyGeneration(this.state, generated, distribution));
    } catch (err) {
      if (ticket !== this.generationTicket) {
        return;
      }
      const message = err instanceof ApiError || err instanceof Error ? err.message : String(err);
      this.commit(fail(this.state, message));
    }
  }

  /** Same seed, same inputs: reproduces the displayed result exactly. */
  async replay(): Promise<void> {
    await this.generate();
  }

  /** Fresh seed, then generate. */
  async reroll(): Promise<void> {
    this.commit(setParams(this.state, { seed: this.seedSource() }));
    await this.generate();
  }

  async exploreRisk(rawTargets: string[], horizon: number): Promise<void> {
    const targets = rawTargets.map((t) => t.trim().toUpperCase()).filter(Boolean);
    if (targets.length === 0 || !canGenerate(this.state)) {
      return;
    }
    const last = lastInputAge(this.state);
    if (last === null || !(horizon > last)) {
      this.commit(setFieldError(this.state, "horizon must exceed the last input age"));
      return;
    }
    const events = this.state.inputEvents.map((e) => ({
      code: e.code,
      age_years: e.age_years,
    }));
    const params: { seed?: number; max_age_years: number } = {
      max_age_years: this.state.params.max_age_years,
    };
    if (this.state.params.seed !== null) {
      params.seed = this.state.params.seed;
    }
    try {
      const risk = await this.api.risk({
        events,
        targets,
        horizon_age_years: horizon,
        params,
        n_samples: this.state.params.n_samples,
      });
      this.commit(applyRisk(this.state, risk));
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.commit(fail(this.state, message));
    }
  }
}
