// Payload shapes of the /v1 campaign API. The console renders these verbatim;
// it never derives optimization state on its own.

export type Direction = 'maximize' | 'minimize';

export interface ParameterDoc {
  name: string;
  kind: 'continuous' | 'discrete-ordinal' | 'categorical';
  bounds?: [number, number] | null;
  choices?: string[] | null;
  unit?: string | null;
}

export interface CompassDoc {
  title: string;
  description: string;
  objective: { name: string; direction: Direction };
  parameters: ParameterDoc[];
  constraints?: string | null;
  budget: { rounds: number; candidates_per_round: number; bo_pool_size: number };
}

export type PointDoc = Record<string, string | number>;

export interface TrialView {
  id: string;
  round: number;
  origin: string;
  point: PointDoc;
  value: number | null;
}

export interface BestView {
  trial_id: string;
  point: PointDoc;
  value: number;
}

export interface CampaignState {
  id: string;
  title: string;
  compass: CompassDoc;
  objective: string;
  direction: Direction;
  status: string;
  seed: number;
  budget: number;
  proposed: number;
  n_observed: number;
  open: string[];
  trials: TrialView[];
  best: BestView | null;
  insight_rounds: number;
}

export interface Suggestion {
  trial_id: string;
  point: PointDoc;
  origin: string;
}

export interface SuggestResponse {
  round: number;
  suggestions: Suggestion[];
  new?: boolean;
  status: string;
}

export interface ObserveResponse {
  trial_id: string;
  value: number;
  remaining_open: number;
  round_complete: boolean;
}

export interface HypothesisView {
  id: string;
  statement: string;
  confidence: number;
  status: string;
}

export interface InsightsRound {
  round: number;
  insights: {
    comments: string;
    keywords: string[];
    hypotheses: HypothesisView[];
    candidates: PointDoc[];
  } | null;
}

export interface InsightsResponse {
  insights: InsightsRound[];
  confidence_table: string;
}

export interface TrajectoryEntry {
  trial_id: string;
  round: number;
  value: number;
  best_so_far: number;
}

export interface ReportResponse {
  id: string;
  objective: string;
  direction: Direction;
  status: string;
  n_observations: number;
  best: BestView | null;
  trajectory: TrajectoryEntry[];
}

export interface FinalizeResponse {
  summary: string;
  confidence_table: string;
  conclusion: string;
  best_value: number | null;
}
