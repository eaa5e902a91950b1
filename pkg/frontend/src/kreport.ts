/** View model for the k-anonymity verification histogram. */

import type { KAnonReport } from "./types.js";

export interface HistogramBar {
  size: number;
  count: number;
  meetsK: boolean;
}

export interface KReportView {
  k: number;
  satisfied: boolean;
  minClassSize: number;
  bars: HistogramBar[];
  suppressedBadge: string | null;
  chosenNode: number[] | null;
  empty: boolean;
}

export function kReportView(report: KAnonReport): KReportView {
  const bars = Object.entries(report.histogram)
    .map(([size, count]) => ({
      size: Number(size),
      count,
      meetsK: Number(size) >= report.k,
    }))
    .sort((a, b) => a.size - b.size);
  return {
    k: report.k,
    satisfied: report.satisfied,
    minClassSize: report.min_class_size,
    bars,
    suppressedBadge:
      report.suppressed_rows > 0
        ? `${report.suppressed_rows} row${report.suppressed_rows === 1 ? "" : "s"} suppressed`
        : null,
    chosenNode: report.chosen_node ?? null,
    empty: bars.length === 0,
  };
}
