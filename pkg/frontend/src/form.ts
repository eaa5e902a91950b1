/** Run-form state and its projection to the service's pipeline config. */

import type {
  ColumnKind,
  ColumnRole,
  DpQueryJson,
  PipelineConfigJson,
  QueryKind,
} from "./types.js";

export interface ColumnForm {
  name: string;
  role: ColumnRole;
  kind: ColumnKind;
  userId: boolean;
}

export interface GeneralizeForm {
  column: string;
  hierarchy: string;
  level: number;
}

export interface DpQueryForm {
  kind: QueryKind;
  epsilon: number;
  valueColumn: string | null;
  clampLo: number | null;
  clampHi: number | null;
  predicateColumn: string | null;
  predicateValue: string | null;
  groupBy: string | null;
  userLevel: boolean;
  userColumn: string | null;
  contributionCap: number | null;
}

export interface RunFormState {
  columns: ColumnForm[];
  suppress: string[];
  pseudonymize: string[];
  pseudonymizeSalt: string | null;
  generalize: GeneralizeForm[];
  hierarchies: Record<string, string>;
  kanonEnabled: boolean;
  dpEnabled: boolean;
  k: number;
  suppressionLimit: number;
  query: DpQueryForm;
  batchSize: number | null;
  seed: number | null;
  providerPublicKeyB64: string;
  inputB64: string;
}

export function defaultQueryForm(): DpQueryForm {
  return {
    kind: "count",
    epsilon: 1.0,
    valueColumn: null,
    clampLo: null,
    clampHi: null,
    predicateColumn: null,
    predicateValue: null,
    groupBy: null,
    userLevel: false,
    userColumn: null,
    contributionCap: null,
  };
}

export function defaultForm(): RunFormState {
  return {
    columns: [],
    suppress: [],
    pseudonymize: [],
    pseudonymizeSalt: null,
    generalize: [],
    hierarchies: {},
    kanonEnabled: true,
    dpEnabled: false,
    k: 2,
    suppressionLimit: 0,
    query: defaultQueryForm(),
    batchSize: null,
    seed: null,
    providerPublicKeyB64: "",
    inputB64: "",
  };
}

export function buildQueryJson(query: DpQueryForm): DpQueryJson {
  const out: DpQueryJson = {
    kind: query.kind,
    epsilon: query.epsilon,
    unit: query.userLevel
      ? { kind: "user", user_column: query.userColumn ?? "", cap: query.contributionCap ?? 0 }
      : { kind: "item" },
  };
  if (query.kind === "sum" || query.kind === "mean") {
    out.value_column = query.valueColumn ?? undefined;
    if (query.clampLo !== null && query.clampHi !== null) {
      out.clamp = [query.clampLo, query.clampHi];
    }
  }
  if (query.kind === "count" && query.predicateColumn) {
    out.predicate = { column: query.predicateColumn, equals: query.predicateValue ?? "" };
  }
  if (query.kind === "histogram") {
    out.group_by = query.groupBy ?? undefined;
  }
  return out;
}

/** Project a validated form onto the service config; call only when valid. */
export function buildPipelineConfig(form: RunFormState): PipelineConfigJson {
  const release = form.kanonEnabled
    ? { kanon: { k: form.k, suppression_limit: form.suppressionLimit } }
    : { dp: [buildQueryJson(form.query)] };
  return {
    schema: {
      columns: form.columns.map((c) => ({
        name: c.name,
        role: c.role,
        kind: c.kind,
        user_id: c.userId,
      })),
    },
    classical: {
      suppress: [...form.suppress],
      pseudonymize: { columns: [...form.pseudonymize], salt: form.pseudonymizeSalt },
      generalize: form.generalize.map((g) => ({ ...g })),
    },
    hierarchies: { ...form.hierarchies },
    release,
    batch_size: form.batchSize,
    seed: form.seed,
    encryption: { provider_public_key: form.providerPublicKeyB64 },
  };
}
