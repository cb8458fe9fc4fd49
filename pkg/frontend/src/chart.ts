/**
 * Chart geometry helpers, kept free of DOM so they unit-test in node.
 *
 * Points are never sorted or deduplicated here: the store guarantees
 * strictly increasing steps, and the difficulty trace must reproduce the
 * event log exactly, so rendering is a pure mapping of what arrived.
 */

import { EventMessage } from "./protocol.js";
import { SeriesPoint } from "./store.js";

/**
 * Difficulty as a step function of the global step.
 *
 * The trace starts at (0, initial level) and gains one knot per resolved
 * decision: (event.global_step, event.new_level). The initial level is
 * the first event's old_level (0 until the first event arrives, matching
 * every difficulty source's starting level).
 */
export function difficultySteps(events: EventMessage[], finalStep?: number): SeriesPoint[] {
  const first = events[0];
  const points: SeriesPoint[] = [{ step: 0, value: first === undefined ? 0 : first.old_level }];
  for (const ev of events) {
    points.push({ step: ev.global_step, value: ev.new_level });
  }
  const last = points[points.length - 1];
  if (finalStep !== undefined && last !== undefined && finalStep > last.step) {
    points.push({ step: finalStep, value: last.value });
  }
  return points;
}

export interface Scale {
  domainMin: number;
  domainMax: number;
  rangeMin: number;
  rangeMax: number;
}

export function scale(s: Scale, x: number): number {
  const span = s.domainMax - s.domainMin;
  if (span === 0) return (s.rangeMin + s.rangeMax) / 2;
  return s.rangeMin + ((x - s.domainMin) / span) * (s.rangeMax - s.rangeMin);
}

export function domainOf(series: SeriesPoint[][], pick: (p: SeriesPoint) => number): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s) {
      const v = pick(p);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

/** SVG path through the points in arrival order (a plain polyline). */
export function linePath(points: SeriesPoint[], sx: Scale, sy: Scale): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${scale(sx, p.step).toFixed(1)},${scale(sy, p.value).toFixed(1)}`)
    .join(" ");
}

/**
 * SVG path rendering the points as a right-continuous step function:
 * horizontal to each knot's step, then vertical to its value.
 */
export function stepPath(points: SeriesPoint[], sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  let prevY: number | null = null;
  for (const p of points) {
    const x = scale(sx, p.step).toFixed(1);
    const y = scale(sy, p.value).toFixed(1);
    if (prevY === null) {
      parts.push(`M${x},${y}`);
    } else {
      parts.push(`H${x}`, `V${y}`);
    }
    prevY = scale(sy, p.value);
  }
  return parts.join(" ");
}
