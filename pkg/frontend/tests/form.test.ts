import { describe, expect, it } from "vitest";

import { buildPipelineConfig, buildQueryJson } from "../src/form.js";
import { validDpForm, validKanonForm } from "./helpers.js";

describe("pipeline config projection", () => {
  it("emits exactly one release path (kanon)", () => {
    const config = buildPipelineConfig(validKanonForm());
    expect(config.release).toEqual({ kanon: { k: 2, suppression_limit: 0 } });
    expect("dp" in config.release).toBe(false);
  });

  it("emits exactly one release path (dp)", () => {
    const config = buildPipelineConfig(validDpForm());
    expect("kanon" in config.release).toBe(false);
    const release = config.release as { dp: unknown[] };
    expect(release.dp).toHaveLength(1);
  });

  it("mirrors schema columns with roles and user flag", () => {
    const form = validKanonForm();
    form.columns[0].userId = true;
    const config = buildPipelineConfig(form);
    expect(config.schema.columns[0]).toEqual({
      name: "name", role: "direct", kind: "categorical", user_id: true,
    });
  });

  it("carries classical selections and hierarchies", () => {
    const config = buildPipelineConfig(validKanonForm());
    expect(config.classical.suppress).toEqual(["name"]);
    expect(Object.keys(config.hierarchies).sort()).toEqual(["age", "city"]);
    expect(config.encryption.provider_public_key).toBe("cHVibGljLWtleQ==");
  });

  it("builds sum query json with clamp", () => {
    const form = validDpForm();
    expect(buildQueryJson(form.query)).toEqual({
      kind: "sum",
      epsilon: 0.5,
      value_column: "age",
      clamp: [0, 100],
      unit: { kind: "item" },
    });
  });

  it("builds count query with predicate and user unit", () => {
    const form = validDpForm();
    form.query.kind = "count";
    form.query.predicateColumn = "city";
    form.query.predicateValue = "pune";
    form.query.userLevel = true;
    form.query.userColumn = "name";
    form.query.contributionCap = 3;
    expect(buildQueryJson(form.query)).toEqual({
      kind: "count",
      epsilon: 0.5,
      predicate: { column: "city", equals: "pune" },
      unit: { kind: "user", user_column: "name", cap: 3 },
    });
  });

  it("keeps batch size and seed nullable", () => {
    const form = validKanonForm();
    form.batchSize = 128;
    form.seed = 42;
    const config = buildPipelineConfig(form);
    expect(config.batch_size).toBe(128);
    expect(config.seed).toBe(42);
    form.batchSize = null;
    expect(buildPipelineConfig(form).batch_size).toBeNull();
  });
});
