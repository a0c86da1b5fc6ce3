import { describe, expect, it } from "vitest";

import {
  SUM_TOLERANCE,
  enhanceWeights,
  isOnSimplex,
  normalizeWeights,
  setSliderWeight,
  uniformWeights,
  unitWeights,
} from "../src/simplex.js";
import { mulberry32, randInt } from "./prng.js";

function sum(values: readonly number[]): number {
  return values.reduce((a, b) => a + b, 0);
}

describe("uniformWeights", () => {
  it("spreads mass evenly and sums to one", () => {
    const w = uniformWeights(7);
    expect(w).toHaveLength(7);
    for (const v of w) expect(v).toBeCloseTo(1 / 7, 12);
    expect(isOnSimplex(w)).toBe(true);
  });

  it("rejects nonpositive counts", () => {
    expect(() => uniformWeights(0)).toThrow(/invalid/);
    expect(() => uniformWeights(2.5)).toThrow(/invalid/);
  });
});

describe("unitWeights", () => {
  it("puts all mass on one archetype", () => {
    const w = unitWeights(5, 3);
    expect(w[3]).toBe(1);
    expect(sum(w)).toBe(1);
  });

  it("rejects out-of-range indices", () => {
    expect(() => unitWeights(5, 5)).toThrow(/out of range/);
    expect(() => unitWeights(5, -1)).toThrow(/out of range/);
  });
});

describe("isOnSimplex", () => {
  it("accepts valid vectors", () => {
    expect(isOnSimplex([0.25, 0.75])).toBe(true);
    expect(isOnSimplex([1])).toBe(true);
  });

  it("rejects negatives, bad sums, empties, and non-finite entries", () => {
    expect(isOnSimplex([-0.1, 1.1])).toBe(false);
    expect(isOnSimplex([0.3, 0.3])).toBe(false);
    expect(isOnSimplex([])).toBe(false);
    expect(isOnSimplex([Number.NaN, 1])).toBe(false);
  });
});

describe("normalizeWeights", () => {
  it("rescales to unit sum", () => {
    const w = normalizeWeights([2, 1, 1]);
    expect(w).toEqual([0.5, 0.25, 0.25]);
  });

  it("clamps round-off negatives but rejects real ones", () => {
    const w = normalizeWeights([-1e-9, 0.5, 0.5]);
    expect(w[0]).toBe(0);
    expect(isOnSimplex(w)).toBe(true);
    expect(() => normalizeWeights([-0.2, 0.6, 0.6])).toThrow(/invalid weight/);
  });

  it("falls back to uniform when everything is zero", () => {
    expect(normalizeWeights([0, 0])).toEqual([0.5, 0.5]);
  });
});

describe("setSliderWeight", () => {
  it("keeps untouched sliders in proportion", () => {
    // moving slider 0 to 0.4 leaves 0.6 split 2:1 between the others
    const w = setSliderWeight([0.1, 0.6, 0.3], 0, 0.4);
    expect(w[0]).toBeCloseTo(0.4, 12);
    expect(w[1]).toBeCloseTo(0.4, 12);
    expect(w[2]).toBeCloseTo(0.2, 12);
  });

  it("splits slack evenly when the rest was all zero", () => {
    const w = setSliderWeight([1, 0, 0], 0, 0.7);
    expect(w[0]).toBeCloseTo(0.7, 12);
    expect(w[1]).toBeCloseTo(0.15, 12);
    expect(w[2]).toBeCloseTo(0.15, 12);
  });

  it("clamps the dragged value into [0, 1]", () => {
    expect(setSliderWeight([0.5, 0.5], 0, 1.4)[0]).toBe(1);
    expect(setSliderWeight([0.5, 0.5], 0, -3)[0]).toBe(0);
    expect(setSliderWeight([0.5, 0.5], 0, Number.NaN)[0]).toBe(0);
  });

  it("pins a lone slider at one", () => {
    expect(setSliderWeight([1], 0, 0.2)).toEqual([1]);
  });
});

describe("enhanceWeights", () => {
  it("interpolates toward the target vertex", () => {
    const w = enhanceWeights([0.5, 0.3, 0.2], 1, 0.5);
    expect(w[0]).toBeCloseTo(0.25, 12);
    expect(w[1]).toBeCloseTo(0.65, 12);
    expect(w[2]).toBeCloseTo(0.1, 12);
  });

  it("is the identity at strength zero and a vertex at strength one", () => {
    const base = [0.2, 0.8];
    expect(enhanceWeights(base, 0, 0)).toEqual(base);
    expect(enhanceWeights(base, 0, 1)).toEqual([1, 0]);
  });

  it("rejects bad targets and strengths", () => {
    expect(() => enhanceWeights([1, 0], 2, 0.5)).toThrow(/out of range/);
    expect(() => enhanceWeights([1, 0], 0, 1.5)).toThrow(/strength/);
  });
});

describe("simplex invariant under fuzzed edits", () => {
  it("holds across 1000 random slider traces", () => {
    const rand = mulberry32(0xa11ce);
    for (let trace = 0; trace < 1000; trace++) {
      const k = 1 + randInt(rand, 12);
      let w = rand() < 0.5 ? uniformWeights(k) : unitWeights(k, randInt(rand, k));
      const steps = 1 + randInt(rand, 30);
      for (let step = 0; step < steps; step++) {
        const roll = rand();
        if (roll < 0.7) {
          // drags, including deliberately out-of-range values
          w = setSliderWeight(w, randInt(rand, k), rand() * 2.4 - 0.7);
        } else if (roll < 0.85) {
          w = enhanceWeights(w, randInt(rand, k), rand());
        } else {
          w = normalizeWeights(w.map((v) => v * (0.5 + rand())));
        }
        expect(isOnSimplex(w)).toBe(true);
        expect(Math.abs(sum(w) - 1)).toBeLessThanOrEqual(SUM_TOLERANCE);
        for (const v of w) expect(v).toBeGreaterThanOrEqual(0);
      }
    }
  });
});
