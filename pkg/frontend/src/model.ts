// View models for query cards. Values pass through from the service;
// the only arithmetic here is display rounding.

import type { Query, Neighbor } from "./api.js";

export interface Card {
  id: string;
  entropy: number;
  marginal: number[];
  /** integer percentages that sum to exactly 100 */
  percentages: number[];
  argmax: number;
  neighbors: Neighbor[];
}

export const MAX_NEIGHBORS = 3;

/**
 * Largest-remainder rounding: floor every share, then hand the missing
 * percentage points to the largest fractional remainders. The rendered
 * bars therefore always total 100 even for awkward distributions.
 */
export function displayPercentages(pmf: number[]): number[] {
  const scaled = pmf.map((p) => p * 100);
  const floors = scaled.map(Math.floor);
  let missing = 100 - floors.reduce((a, b) => a + b, 0);
  const order = scaled
    .map((value, index) => ({ index, frac: value - Math.floor(value) }))
    .sort((a, b) => b.frac - a.frac || a.index - b.index);
  for (const { index } of order) {
    if (missing <= 0) break;
    floors[index] = (floors[index] ?? 0) + 1;
    missing -= 1;
  }
  return floors;
}

export function argmaxIndex(pmf: number[]): number {
  let best = 0;
  for (let i = 1; i < pmf.length; i++) {
    if ((pmf[i] ?? -Infinity) > (pmf[best] ?? -Infinity)) best = i;
  }
  return best;
}

/** Preserves the server's entropy-descending order. */
export function buildCards(queries: Query[]): Card[] {
  return queries.map((q) => {
    if (q.marginal.length === 0) {
      throw new Error(`query ${q.id} carries an empty marginal`);
    }
    return {
      id: q.id,
      entropy: Math.max(0, q.entropy),
      marginal: q.marginal,
      percentages: displayPercentages(q.marginal),
      argmax: argmaxIndex(q.marginal),
      neighbors: q.neighbors.slice(0, MAX_NEIGHBORS),
    };
  });
}

export function formatEntropy(h: number): string {
  return Math.max(0, h).toFixed(3);
}

export function formatMi(mi: number): string {
  return mi >= 0.1 ? mi.toFixed(2) : mi.toFixed(3);
}
