/** Wire types mirroring the service's JSON formats. */

export interface TradeoffPoint {
  epsilon: number;
  analytic_mae: number;
  empirical_mae: number | null;
}

export interface KAnonReport {
  k: number;
  satisfied: boolean;
  min_class_size: number;
  histogram: Record<string, number>;
  suppressed_rows: number;
  chosen_node?: number[];
}

export interface DpResultEntry {
  kind: string;
  noisy: number | number[];
  epsilon_spent: number;
  scale_b: number;
  seed: number;
  bins?: (string | number)[];
}

export interface RunReport {
  run_id: string;
  path: "kanon" | "dp";
  k_report?: KAnonReport;
  dp_results?: DpResultEntry[];
  timings_ms: Record<string, number>;
}

export interface RunStatus {
  run_id: string;
  status: "queued" | "running" | "done" | "failed";
  report?: RunReport;
  error?: { error: string; message: string };
}

export interface TranscriptStep {
  step: number;
  from: string;
  to: string;
  type: string;
  sha256: string;
}

export interface SessionTranscript {
  session_id: string;
  steps: TranscriptStep[];
  outcome:
    | { status: "success" }
    | { status: "rejected"; step: number; reason: string };
}

export type ColumnRole = "direct" | "quasi" | "sensitive" | "insensitive";
export type ColumnKind = "categorical" | "numeric";
export type QueryKind = "count" | "sum" | "mean" | "histogram";

export interface SchemaColumnJson {
  name: string;
  role: ColumnRole;
  kind: ColumnKind;
  user_id?: boolean;
}

export interface DpQueryJson {
  kind: QueryKind;
  epsilon: number;
  value_column?: string;
  clamp?: [number, number];
  predicate?: { column: string; equals: string | number };
  group_by?: string;
  unit: { kind: "item" } | { kind: "user"; user_column: string; cap: number };
}

export interface PipelineConfigJson {
  schema: { columns: SchemaColumnJson[] };
  classical: {
    suppress: string[];
    pseudonymize: { columns: string[]; salt: string | null };
    generalize: { column: string; hierarchy: string; level: number }[];
  };
  hierarchies: Record<string, string>;
  release: { kanon: { k: number; suppression_limit: number } } | { dp: DpQueryJson[] };
  batch_size: number | null;
  seed: number | null;
  encryption: { provider_public_key: string };
}
