/** Wire types of the local trajectory service. */

export interface EventDoc {
  code: string;
  age_years: number;
  generated?: boolean;
}

export interface TrajectoryDoc {
  seed?: number;
  events: EventDoc[];
}

export interface GenerateResponse {
  seed: number;
  n_samples: number;
  samples: TrajectoryDoc[];
}

export interface RiskEstimateDoc {
  code: string;
  label: string;
  probability: number;
  std_error: number;
}

export interface RiskResponse {
  seed: number;
  horizon_age_years: number;
  n_samples: number;
  estimates: RiskEstimateDoc[];
}

export interface DistributionEntry {
  code: string;
  label: string;
  probability: number;
}

export interface DistributionResponse {
  entries: DistributionEntry[];
}

export interface VocabToken {
  id: number;
  code: string;
  label: string;
  kind: "event" | "terminal" | "padding" | "static";
}

export interface VocabResponse {
  vocab_size: number;
  tokens: VocabToken[];
}

export interface HealthResponse {
  status: string;
  model: {
    n_layer: number;
    n_head: number;
    n_embd: number;
    max_seq: number;
    age_scale: number;
  };
  vocab_size: number;
}

export interface GenerateRequest {
  events: { code: string; age_years: number }[];
  params: { seed?: number; max_age_years: number };
  n_samples: number;
}

export interface RiskRequest {
  events: { code: string; age_years: number }[];
  targets: string[];
  horizon_age_years: number;
  params: { seed?: number; max_age_years: number };
  n_samples: number;
}
