/** Tradeoff exploration state: epsilon grid, MAE series, slider selection.
 *
 * The view shows service-returned numbers only.  The slider snaps to grid
 * members, so the readout always equals a TradeoffPoint the service sent;
 * `interpolateAt` additionally offers a log-log estimate between neighboring
 * grid points for the live drag preview.
 */

import type { TradeoffPoint } from "./types.js";

export class TradeoffView {
  points: TradeoffPoint[] = [];
  selectedIndex = 0;

  get hasPoints(): boolean {
    return this.points.length > 0;
  }

  get selected(): TradeoffPoint {
    if (!this.hasPoints) {
      throw new Error("no tradeoff points loaded");
    }
    return this.points[this.selectedIndex];
  }

  setPoints(points: TradeoffPoint[]): void {
    this.points = [...points].sort((a, b) => a.epsilon - b.epsilon);
    this.selectedIndex = Math.min(this.selectedIndex, Math.max(0, this.points.length - 1));
  }

  /** Snap to the grid member nearest in log-epsilon; returns it. */
  selectNearest(epsilon: number): TradeoffPoint {
    if (!this.hasPoints) {
      throw new Error("no tradeoff points loaded");
    }
    const target = Math.log(Math.max(epsilon, Number.MIN_VALUE));
    let best = 0;
    for (let i = 1; i < this.points.length; i++) {
      const closer =
        Math.abs(Math.log(this.points[i].epsilon) - target)
        < Math.abs(Math.log(this.points[best].epsilon) - target);
      if (closer) {
        best = i;
      }
    }
    this.selectedIndex = best;
    return this.selected;
  }

  /** Slider position in [0, 1] for an epsilon (log scale). */
  positionFor(epsilon: number): number {
    const lo = Math.log(this.points[0].epsilon);
    const hi = Math.log(this.points[this.points.length - 1].epsilon);
    if (hi === lo) {
      return 0;
    }
    const t = (Math.log(epsilon) - lo) / (hi - lo);
    return Math.min(1, Math.max(0, t));
  }

  /** Inverse of positionFor. */
  epsilonAt(position: number): number {
    const lo = Math.log(this.points[0].epsilon);
    const hi = Math.log(this.points[this.points.length - 1].epsilon);
    return Math.exp(lo + Math.min(1, Math.max(0, position)) * (hi - lo));
  }

  /** Log-log interpolation between the neighboring grid points, clamped to
   * the grid range.  On a grid member the result is that exact point. */
  interpolateAt(epsilon: number): TradeoffPoint {
    if (!this.hasPoints) {
      throw new Error("no tradeoff points loaded");
    }
    const points = this.points;
    if (epsilon <= points[0].epsilon) {
      return points[0];
    }
    if (epsilon >= points[points.length - 1].epsilon) {
      return points[points.length - 1];
    }
    let upper = 1;
    while (points[upper].epsilon < epsilon) {
      upper++;
    }
    const a = points[upper - 1];
    const b = points[upper];
    if (a.epsilon === epsilon) {
      return a;
    }
    if (b.epsilon === epsilon) {
      return b;
    }
    const t = (Math.log(epsilon) - Math.log(a.epsilon))
      / (Math.log(b.epsilon) - Math.log(a.epsilon));
    const mix = (x: number, y: number) => Math.exp(Math.log(x) + t * (Math.log(y) - Math.log(x)));
    return {
      epsilon,
      analytic_mae: mix(a.analytic_mae, b.analytic_mae),
      empirical_mae:
        a.empirical_mae !== null && b.empirical_mae !== null
          ? mix(a.empirical_mae, b.empirical_mae)
          : null,
    };
  }
}

/** Display rounding used everywhere a MAE number is shown. */
export function formatNumber(value: number, significantDigits = 4): string {
  if (!Number.isFinite(value)) {
    return String(value);
  }
  if (value === 0) {
    return "0";
  }
  const rounded = Number(value.toPrecision(significantDigits));
  return String(rounded);
}

export function readoutText(point: TradeoffPoint): string {
  const empirical = point.empirical_mae === null
    ? ""
    : ` (measured ${formatNumber(point.empirical_mae)})`;
  return `expected MAE ${formatNumber(point.analytic_mae)} at ε = ${formatNumber(point.epsilon)}${empirical}`;
}
