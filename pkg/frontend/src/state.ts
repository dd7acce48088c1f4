/**
 * Session state and its pure transitions.
 *
 * Two invariants rule everything here: the input timeline is kept age-sorted
 * on every edit, and derived results are cleared the moment the inputs or
 * parameters they were computed from change. Transitions never mutate, they
 * return fresh state, which keeps them trivially testable.
 */

import type {
  DistributionResponse,
  GenerateResponse,
  RiskResponse,
  VocabToken,
} from "./types.js";

export type Status = "idle" | "loading" | "error";

export interface InputEvent {
  code: string;
  age_years: number;
}

export interface Params {
  seed: number | null; // null until the service echoes one
  max_age_years: number;
  n_samples: number;
}

export interface Results {
  generate: GenerateResponse;
  distribution: DistributionResponse;
}

export interface SessionState {
  vocab: VocabToken[];
  inputEvents: InputEvent[];
  params: Params;
  results: Results | null;
  risk: RiskResponse | null;
  status: Status;
  error: string | null;
  fieldError: string | null;
}

export function initialState(): SessionState {
  return {
    vocab: [],
    inputEvents: [],
    params: { seed: null, max_age_years: 85.0, n_samples: 20 },
    results: null,
    risk: null,
    status: "idle",
    error: null,
    fieldError: null,
  };
}

function sortedByAge(events: InputEvent[]): InputEvent[] {
  // stable: equal ages keep their insertion order
  return [...events].sort((a, b) => a.age_years - b.age_years);
}

/** Any timeline or parameter edit invalidates every derived panel. */
function invalidated(state: SessionState): SessionState {
  return { ...state, results: null, risk: null, error: null, fieldError: null };
}

export function withVocab(state: SessionState, vocab: VocabToken[]): SessionState {
  return { ...state, vocab };
}

export function addEvent(
  state: SessionState,
  code: string,
  ageYears: number,
): SessionState {
  const next = invalidated(state);
  next.inputEvents = sortedByAge([
    ...state.inputEvents,
    { code, age_years: ageYears },
  ]);
  return next;
}

export function removeEvent(state: SessionState, index: number): SessionState {
  const next = invalidated(state);
  next.inputEvents = state.inputEvents.filter((_, i) => i !== index);
  return next;
}

export function modifyEvent(
  state: SessionState,
  index: number,
  code: string,
  ageYears: number,
): SessionState {
  const events = state.inputEvents.map((ev, i) =>
    i === index ? { code, age_years: ageYears } : ev,
  );
  const next = invalidated(state);
  next.inputEvents = sortedByAge(events);
  return next;
}

export function setFieldError(state: SessionState, message: string): SessionState {
  // an invalid edit leaves everything else untouched
  return { ...state, fieldError: message };
}

export function setParams(
  state: SessionState,
  patch: Partial<Params>,
): SessionState {
  const next = invalidated(state);
  next.params = { ...state.params, ...patch };
  return next;
}

export function beginLoading(state: SessionState): SessionState {
  return { ...state, status: "loading", error: null, fieldError: null };
}

export function applyGeneration(
  state: SessionState,
  generate: GenerateResponse,
  distribution: DistributionResponse,
): SessionState {
  return {
    ...state,
    status: "idle",
    error: null,
    // adopt the echoed seed so replay reproduces exactly this result
    params: { ...state.params, seed: generate.seed },
    results: { generate, distribution },
  };
}

export function applyRisk(state: SessionState, risk: RiskResponse): SessionState {
  return { ...state, status: "idle", error: null, risk };
}

export function fail(state: SessionState, message: string): SessionState {
  // inputs and any still-valid results survive a failed request
  return { ...state, status: "error", error: message };
}

export function dismissError(state: SessionState): SessionState {
  return { ...state, status: "idle", error: null };
}

export function canGenerate(state: SessionState): boolean {
  return state.inputEvents.length > 0 && state.status !== "loading";
}

export function lastInputAge(state: SessionState): number | null {
  if (state.inputEvents.length === 0) {
    return null;
  }
  return state.inputEvents[state.inputEvents.length - 1].age_years;
}
