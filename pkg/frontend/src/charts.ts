/** SVG chart builders.
 *
 * Each chart is split into a pure model (data + pixel coordinates, easy to
 * assert on) and a string renderer, so tests can check that what gets drawn
 * is exactly what the service returned.
 */

import type { KReportView } from "./kreport.js";
import type { TradeoffPoint } from "./types.js";
import { formatNumber } from "./tradeoff.js";

export interface TradeoffMarker {
  epsilon: number;
  analytic_mae: number;
  empirical_mae: number | null;
  cx: number;
  cyAnalytic: number;
  cyEmpirical: number | null;
}

export interface TradeoffChartModel {
  width: number;
  height: number;
  markers: TradeoffMarker[];
  analyticPath: string;
  empiricalPath: string;
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
}

const PAD = { left: 56, right: 16, top: 12, bottom: 36 };

function logScale(domain: [number, number], range: [number, number]) {
  const [d0, d1] = [Math.log(domain[0]), Math.log(domain[1])];
  const [r0, r1] = range;
  return (value: number) =>
    d1 === d0 ? (r0 + r1) / 2 : r0 + ((Math.log(value) - d0) / (d1 - d0)) * (r1 - r0);
}

export function tradeoffChartModel(
  points: TradeoffPoint[],
  width = 560,
  height = 300,
): TradeoffChartModel {
  const sorted = [...points].sort((a, b) => a.epsilon - b.epsilon);
  const maes = sorted.flatMap((p) =>
    p.empirical_mae === null ? [p.analytic_mae] : [p.analytic_mae, p.empirical_mae],
  );
  const x = logScale(
    [sorted[0].epsilon, sorted[sorted.length - 1].epsilon],
    [PAD.left, width - PAD.right],
  );
  const y = logScale(
    [Math.min(...maes), Math.max(...maes)],
    [height - PAD.bottom, PAD.top],
  );
  const markers = sorted.map((p) => ({
    epsilon: p.epsilon,
    analytic_mae: p.analytic_mae,
    empirical_mae: p.empirical_mae,
    cx: x(p.epsilon),
    cyAnalytic: y(p.analytic_mae),
    cyEmpirical: p.empirical_mae === null ? null : y(p.empirical_mae),
  }));
  const path = (ys: (m: TradeoffMarker) => number | null) =>
    markers
      .filter((m) => ys(m) !== null)
      .map((m, i) => `${i === 0 ? "M" : "L"}${m.cx.toFixed(1)},${(ys(m) as number).toFixed(1)}`)
      .join(" ");
  return {
    width,
    height,
    markers,
    analyticPath: path((m) => m.cyAnalytic),
    empiricalPath: path((m) => m.cyEmpirical),
    xTicks: markers.map((m) => ({ x: m.cx, label: formatNumber(m.epsilon) })),
    yTicks: markers.map((m) => ({ y: m.cyAnalytic, label: formatNumber(m.analytic_mae) })),
  };
}

export function renderTradeoffSVG(model: TradeoffChartModel, selectedEpsilon?: number): string {
  const parts: string[] = [
    `<svg viewBox="0 0 ${model.width} ${model.height}" class="tradeoff-chart" role="img">`,
    `<path d="${model.analyticPath}" fill="none" stroke="#2563eb" stroke-width="2"/>`,
  ];
  if (model.empiricalPath) {
    parts.push(
      `<path d="${model.empiricalPath}" fill="none" stroke="#f59e0b" stroke-width="2" stroke-dasharray="5 3"/>`,
    );
  }
  for (const marker of model.markers) {
    const selected = selectedEpsilon !== undefined && marker.epsilon === selectedEpsilon;
    parts.push(
      `<circle cx="${marker.cx.toFixed(1)}" cy="${marker.cyAnalytic.toFixed(1)}" r="${selected ? 6 : 4}"`
      + ` fill="#2563eb" data-epsilon="${marker.epsilon}" data-analytic="${marker.analytic_mae}"/>`,
    );
    if (marker.cyEmpirical !== null) {
      parts.push(
        `<circle cx="${marker.cx.toFixed(1)}" cy="${marker.cyEmpirical.toFixed(1)}" r="3"`
        + ` fill="#f59e0b" data-epsilon="${marker.epsilon}" data-empirical="${marker.empirical_mae}"/>`,
      );
    }
  }
  for (const tick of model.xTicks) {
    parts.push(
      `<text x="${tick.x.toFixed(1)}" y="${model.height - 12}" text-anchor="middle" class="tick">${tick.label}</text>`,
    );
  }
  for (const tick of model.yTicks) {
    parts.push(
      `<text x="${PAD.left - 8}" y="${tick.y.toFixed(1)}" text-anchor="end" class="tick">${tick.label}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

export interface HistogramChartModel {
  width: number;
  height: number;
  bars: { x: number; y: number; w: number; h: number; size: number; count: number; meetsK: boolean }[];
  thresholdX: number | null;
  emptyMessage: string | null;
}

export function histogramChartModel(view: KReportView, width = 560, height = 240): HistogramChartModel {
  if (view.empty) {
    return { width, height, bars: [], thresholdX: null, emptyMessage: "no rows released" };
  }
  const inner = { w: width - PAD.left - PAD.right, h: height - PAD.top - PAD.bottom };
  const maxCount = Math.max(...view.bars.map((b) => b.count));
  const slot = inner.w / view.bars.length;
  const bars = view.bars.map((bar, i) => {
    const h = (bar.count / maxCount) * inner.h;
    return {
      x: PAD.left + i * slot + slot * 0.125,
      y: PAD.top + inner.h - h,
      w: slot * 0.75,
      h,
      size: bar.size,
      count: bar.count,
      meetsK: bar.meetsK,
    };
  });
  // Threshold line sits left of the first bar whose class size reaches k.
  const firstOk = bars.findIndex((b) => b.meetsK);
  const thresholdX = firstOk === -1 ? null : bars[firstOk].x - slot * 0.125;
  return { width, height, bars, thresholdX, emptyMessage: null };
}

export function renderHistogramSVG(model: HistogramChartModel, view: KReportView): string {
  const parts = [
    `<svg viewBox="0 0 ${model.width} ${model.height}" class="k-histogram" role="img">`,
  ];
  if (model.emptyMessage !== null) {
    parts.push(
      `<text x="${model.width / 2}" y="${model.height / 2}" text-anchor="middle" class="empty">${model.emptyMessage}</text>`,
      "</svg>",
    );
    return parts.join("");
  }
  for (const bar of model.bars) {
    parts.push(
      `<rect x="${bar.x.toFixed(1)}" y="${bar.y.toFixed(1)}" width="${bar.w.toFixed(1)}"`
      + ` height="${bar.h.toFixed(1)}" fill="${bar.meetsK ? "#16a34a" : "#dc2626"}"`
      + ` data-size="${bar.size}" data-count="${bar.count}"/>`,
    );
    parts.push(
      `<text x="${(bar.x + bar.w / 2).toFixed(1)}" y="${model.height - 12}" text-anchor="middle" class="tick">${bar.size}</text>`,
    );
    parts.push(
      `<text x="${(bar.x + bar.w / 2).toFixed(1)}" y="${(bar.y - 4).toFixed(1)}" text-anchor="middle" class="count">${bar.count}</text>`,
    );
  }
  if (model.thresholdX !== null) {
    parts.push(
      `<line x1="${model.thresholdX.toFixed(1)}" y1="${PAD.top}" x2="${model.thresholdX.toFixed(1)}"`
      + ` y2="${model.height - PAD.bottom}" stroke="#111" stroke-dasharray="4 3" data-k="${view.k}"/>`,
    );
    parts.push(
      `<text x="${(model.thresholdX + 4).toFixed(1)}" y="${PAD.top + 12}" class="tick">k = ${view.k}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
