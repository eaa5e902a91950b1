/** Client-side mirror of the service's config invariants.
 *
 * Mirrors, never replaces: the server re-validates everything.  Submit stays
 * disabled until this list is empty.
 */

import type { RunFormState } from "./form.js";

export function validateRunForm(form: RunFormState): string[] {
  const errors: string[] = [];

  if (form.columns.length === 0) {
    errors.push("schema needs at least one column");
  }
  const names = form.columns.map((c) => c.name);
  if (names.some((n) => n.trim() === "")) {
    errors.push("column names must be non-empty");
  }
  if (new Set(names).size !== names.length) {
    errors.push("column names must be unique");
  }
  if (form.columns.filter((c) => c.userId).length > 1) {
    errors.push("at most one column may be the user id");
  }

  if (form.kanonEnabled === form.dpEnabled) {
    errors.push("choose exactly one release path: k-anonymised dataset or DP queries");
  }

  if (form.kanonEnabled && !form.dpEnabled) {
    if (!Number.isInteger(form.k) || form.k < 1) {
      errors.push("k must be an integer >= 1");
    }
    if (!(form.suppressionLimit >= 0 && form.suppressionLimit <= 1)) {
      errors.push("suppression limit must lie in [0, 1]");
    }
    for (const column of form.columns.filter((c) => c.role === "quasi")) {
      if (!(column.name in form.hierarchies)) {
        errors.push(`quasi-identifier "${column.name}" needs a generalization hierarchy`);
      }
    }
  }

  if (form.dpEnabled && !form.kanonEnabled) {
    errors.push(...validateQuery(form));
  }

  for (const step of form.generalize) {
    if (!(step.hierarchy in form.hierarchies)) {
      errors.push(`generalize step for "${step.column}" references unknown hierarchy "${step.hierarchy}"`);
    }
    if (!Number.isInteger(step.level) || step.level < 0) {
      errors.push(`generalize level for "${step.column}" must be an integer >= 0`);
    }
  }

  if (form.batchSize !== null && (!Number.isInteger(form.batchSize) || form.batchSize < 1)) {
    errors.push("batch size must be an integer >= 1");
  }
  if (form.providerPublicKeyB64.trim() === "") {
    errors.push("provider public key is required to seal the output");
  }
  if (form.inputB64.trim() === "") {
    errors.push("a sealed input envelope is required");
  }
  return errors;
}

function validateQuery(form: RunFormState): string[] {
  const errors: string[] = [];
  const query = form.query;
  const names = new Set(form.columns.map((c) => c.name));

  if (!(query.epsilon > 0)) {
    errors.push("epsilon must be > 0");
  }
  if (query.kind === "sum" || query.kind === "mean") {
    if (!query.valueColumn || !names.has(query.valueColumn)) {
      errors.push(`${query.kind} query needs a value column from the schema`);
    }
    if (query.clampLo === null || query.clampHi === null) {
      errors.push(`${query.kind} query needs clamp bounds`);
    } else if (!Number.isFinite(query.clampLo) || !Number.isFinite(query.clampHi)) {
      errors.push("clamp bounds must be finite");
    } else if (!(query.clampLo < query.clampHi)) {
      errors.push("clamp lower bound must be below the upper bound");
    }
  }
  if (query.kind === "histogram" && (!query.groupBy || !names.has(query.groupBy))) {
    errors.push("histogram query needs a group-by column from the schema");
  }
  if (query.kind === "count" && query.predicateColumn && !names.has(query.predicateColumn)) {
    errors.push("predicate column must come from the schema");
  }
  if (query.userLevel) {
    const userColumn = form.columns.find((c) => c.name === query.userColumn);
    if (!userColumn || !userColumn.userId) {
      errors.push("user-level privacy needs the schema's user id column");
    }
    if (query.contributionCap === null || !Number.isInteger(query.contributionCap)
        || query.contributionCap < 1) {
      errors.push("user-level privacy needs a contribution cap >= 1");
    }
  }
  return errors;
}

export function isSubmitEnabled(form: RunFormState): boolean {
  return validateRunForm(form).length === 0;
}
