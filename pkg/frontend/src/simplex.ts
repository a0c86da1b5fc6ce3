/**
 * Weight-vector helpers for the mixer. Every function returns a fresh array
 * that lies on the unit simplex: entries nonnegative, summing to 1 within
 * SUM_TOLERANCE. The UI never sends a request whose weights violate this.
 */

export const SUM_TOLERANCE = 1e-9;

export function uniformWeights(k: number): number[] {
  if (!Number.isInteger(k) || k < 1) throw new Error(`invalid slider count ${k}`);
  return new Array(k).fill(1 / k);
}

export function unitWeights(k: number, index: number): number[] {
  const w = new Array(k).fill(0);
  if (index < 0 || index >= k) throw new Error(`archetype ${index} out of range`);
  w[index] = 1;
  return w;
}

export function isOnSimplex(weights: readonly number[]): boolean {
  if (weights.length === 0) return false;
  let sum = 0;
  for (const w of weights) {
    if (!Number.isFinite(w) || w < 0) return false;
    sum += w;
  }
  return Math.abs(sum - 1) <= SUM_TOLERANCE;
}

/**
 * Normalize a server-supplied decomposition. Tiny negative round-off is
 * clamped; anything meaningfully negative or non-finite is a caller bug.
 */
export function normalizeWeights(weights: readonly number[]): number[] {
  if (weights.length === 0) throw new Error("empty weight vector");
  const clamped = weights.map((w) => {
    if (!Number.isFinite(w) || w < -1e-6) throw new Error(`invalid weight ${w}`);
    return Math.max(w, 0);
  });
  const sum = clamped.reduce((a, b) => a + b, 0);
  if (sum <= 0) return uniformWeights(weights.length);
  return clamped.map((w) => w / sum);
}

/**
 * Move one slider and proportionally rescale the rest so the vector stays on
 * the simplex — untouched sliders keep their relative proportions. Degenerate
 * cases (remainder previously all zero, or everything dragged to zero) fall
 * back to spreading the slack evenly.
 */
export function setSliderWeight(
  weights: readonly number[],
  index: number,
  rawValue: number,
): number[] {
  const k = weights.length;
  if (index < 0 || index >= k) throw new Error(`slider ${index} out of range`);
  const value = Math.min(1, Math.max(0, Number.isFinite(rawValue) ? rawValue : 0));
  if (k === 1) return [1];

  const rest = weights.reduce((acc, w, i) => (i === index ? acc : acc + Math.max(w, 0)), 0);
  const out = new Array<number>(k);
  const slack = 1 - value;
  for (let i = 0; i < k; i++) {
    if (i === index) {
      out[i] = value;
    } else if (rest > SUM_TOLERANCE) {
      out[i] = (Math.max(weights[i] ?? 0, 0) / rest) * slack;
    } else {
      out[i] = slack / (k - 1);
    }
  }
  const sum = out.reduce((a, b) => a + b, 0);
  return out.map((w) => w / sum);
}

/**
 * Pull a decomposition toward one archetype: (1 - s) * w + s * e_target.
 * Mirrors the server's enhancement semantics exactly.
 */
export function enhanceWeights(
  weights: readonly number[],
  target: number,
  strength: number,
): number[] {
  if (target < 0 || target >= weights.length) {
    throw new Error(`archetype ${target} out of range`);
  }
  if (!Number.isFinite(strength) || strength < 0 || strength > 1) {
    throw new Error(`strength must be in [0, 1], got ${strength}`);
  }
  const out = weights.map((w) => Math.max(w, 0) * (1 - strength));
  out[target] = (out[target] ?? 0) + strength;
  const sum = out.reduce((a, b) => a + b, 0);
  return out.map((w) => w / sum);
}
