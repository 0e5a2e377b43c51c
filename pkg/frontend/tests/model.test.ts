import { describe, expect, it } from "vitest";

import {
  buildCards,
  displayPercentages,
  formatEntropy,
  MAX_NEIGHBORS,
} from "../src/model.js";
import type { Query } from "../src/api.js";

describe("displayPercentages", () => {
  it("splits a three-way tie as 34/33/33", () => {
    expect(displayPercentages([1 / 3, 1 / 3, 1 / 3])).toEqual([34, 33, 33]);
  });

  it("keeps tiny masses visible as zero, not negative", () => {
    const out = displayPercentages([0.999, 0.001, 0.0]);
    expect(out).toEqual([100, 0, 0]);
  });

  it("always sums to exactly 100 and stays within 1 of the true share", () => {
    // deterministic LCG so failures reproduce
    let state = 12345;
    const rand = () => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let trial = 0; trial < 200; trial++) {
      const raw = Array.from({ length: 8 }, () => -Math.log(rand() + 1e-12));
      const total = raw.reduce((a, b) => a + b, 0);
      const pmf = raw.map((v) => v / total);
      const pct = displayPercentages(pmf);
      expect(pct.reduce((a, b) => a + b, 0)).toBe(100);
      pct.forEach((p, i) => {
        expect(Math.abs(p - 100 * (pmf[i] ?? 0))).toBeLessThanOrEqual(1);
      });
    }
  });
});

function query(over: Partial<Query> = {}): Query {
  return {
    id: "ev000001",
    entropy: 1.2,
    marginal: [0.5, 0.25, 0.25],
    neighbors: [],
    ...over,
  };
}

describe("buildCards", () => {
  it("preserves the server's ordering", () => {
    const cards = buildCards([
      query({ id: "ev9", entropy: 0.2 }),
      query({ id: "ev1", entropy: 2.0 }),
    ]);
    expect(cards.map((c) => c.id)).toEqual(["ev9", "ev1"]);
  });

  it("marks the argmax class and renders a full pmf", () => {
    const [card] = buildCards([query({ marginal: [0.1, 0.7, 0.2] })]);
    expect(card?.argmax).toBe(1);
    expect(card?.percentages.reduce((a, b) => a + b, 0)).toBe(100);
  });

  it("clamps the negative zero the service emits for labeled nodes", () => {
    const [card] = buildCards([query({ entropy: -0.0 })]);
    expect(Object.is(card?.entropy, -0)).toBe(false);
    expect(card?.entropy).toBe(0);
  });

  it("keeps only the strongest neighbors", () => {
    const neighbors = [
      { id: "a", mi: 0.9 },
      { id: "b", mi: 0.5 },
      { id: "c", mi: 0.3 },
      { id: "d", mi: 0.1 },
    ];
    const [card] = buildCards([query({ neighbors })]);
    expect(card?.neighbors).toHaveLength(MAX_NEIGHBORS);
    expect(card?.neighbors[0]?.id).toBe("a");
  });

  it("rejects an empty marginal", () => {
    expect(() => buildCards([query({ marginal: [] })])).toThrow(/marginal/);
  });
});

describe("formatEntropy", () => {
  it("renders zero without a sign", () => {
    expect(formatEntropy(-0.0)).toBe("0.000");
    expect(formatEntropy(1.60944)).toBe("1.609");
  });
});
