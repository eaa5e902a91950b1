import { describe, expect, it } from "vitest";

import { kReportView } from "../src/kreport.js";

describe("k-anonymity report view", () => {
  it("turns the histogram into sorted bars at/right of the threshold", () => {
    const view = kReportView({
      k: 2, satisfied: true, min_class_size: 2,
      histogram: { "3": 1, "2": 5 }, suppressed_rows: 0,
    });
    expect(view.bars).toEqual([
      { size: 2, count: 5, meetsK: true },
      { size: 3, count: 1, meetsK: true },
    ]);
    expect(view.suppressedBadge).toBeNull();
    expect(view.empty).toBe(false);
  });

  it("labels suppressed rows", () => {
    const one = kReportView({
      k: 2, satisfied: true, min_class_size: 2,
      histogram: { "2": 1 }, suppressed_rows: 1,
    });
    expect(one.suppressedBadge).toBe("1 row suppressed");
    const many = kReportView({
      k: 2, satisfied: true, min_class_size: 2,
      histogram: { "2": 1 }, suppressed_rows: 4,
    });
    expect(many.suppressedBadge).toBe("4 rows suppressed");
  });

  it("reports the empty state when nothing was released", () => {
    const view = kReportView({
      k: 3, satisfied: true, min_class_size: 0,
      histogram: {}, suppressed_rows: 2,
    });
    expect(view.empty).toBe(true);
    expect(view.bars).toEqual([]);
  });

  it("marks undersized classes from plain verification reports", () => {
    const view = kReportView({
      k: 3, satisfied: false, min_class_size: 1,
      histogram: { "1": 2, "4": 1 }, suppressed_rows: 0,
    });
    expect(view.bars.map((b) => b.meetsK)).toEqual([false, true]);
    expect(view.satisfied).toBe(false);
  });

  it("passes the chosen lattice node through", () => {
    const view = kReportView({
      k: 2, satisfied: true, min_class_size: 3,
      histogram: { "3": 2 }, suppressed_rows: 0, chosen_node: [2, 0],
    });
    expect(view.chosenNode).toEqual([2, 0]);
  });
});
