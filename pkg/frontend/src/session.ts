/**
 * Client-side mixer state. Holds the uploaded content's identity, the slider
 * vector, stylization strength, and an append-only history of rendered
 * previews. History entries record the exact parameters that produced each
 * preview so any entry can be replayed bit-for-bit through the CLI.
 */

import { isOnSimplex, setSliderWeight, uniformWeights } from "./simplex.js";

export interface Snapshot {
  readonly weights: readonly number[];
  readonly gamma: number;
  readonly delta: number;
  readonly baseline: boolean;
  readonly contentHash: string | null;
  readonly thumbnail: Blob;
}

export class SessionState {
  private sliderWeights: number[];
  private gammaValue = 0.6;
  private deltaValue = 0.6;
  private expert = false;
  private baselineView = false;
  private hash: string | null = null;
  private readonly snapshots: Snapshot[] = [];

  constructor(readonly k: number) {
    this.sliderWeights = uniformWeights(k);
  }

  get weights(): readonly number[] {
    return this.sliderWeights;
  }

  get gamma(): number {
    return this.gammaValue;
  }

  get delta(): number {
    return this.deltaValue;
  }

  get expertMode(): boolean {
    return this.expert;
  }

  get baseline(): boolean {
    return this.baselineView;
  }

  get contentHash(): string | null {
    return this.hash;
  }

  get history(): readonly Snapshot[] {
    return this.snapshots;
  }

  setContentHash(hash: string | null): void {
    this.hash = hash;
  }

  /** Drag one slider; the rest rescale proportionally. */
  moveSlider(index: number, value: number): void {
    this.sliderWeights = setSliderWeight(this.sliderWeights, index, value);
  }

  /** Replace the whole vector, e.g. loading a decomposition into the sliders. */
  setWeights(weights: readonly number[]): void {
    if (weights.length !== this.k) {
      throw new Error(`expected ${this.k} weights, got ${weights.length}`);
    }
    if (!isOnSimplex(weights)) throw new Error("weights are off the simplex");
    this.sliderWeights = Array.from(weights);
  }

  /**
   * Single strength control: gamma and delta move together unless expert
   * mode has split them.
   */
  setStrength(value: number): void {
    const v = clamp01(value);
    this.gammaValue = v;
    if (!this.expert) this.deltaValue = v;
  }

  setExpertMode(on: boolean): void {
    this.expert = on;
    if (!on) this.deltaValue = this.gammaValue;
  }

  /** Expert-only: decouple the fresh/chained blend from overall strength. */
  setDelta(value: number): void {
    if (!this.expert) throw new Error("delta is tied to strength outside expert mode");
    this.deltaValue = clamp01(value);
  }

  setBaseline(on: boolean): void {
    this.baselineView = on;
  }

  /** Append an immutable record of a rendered preview. */
  recordSnapshot(thumbnail: Blob, params?: {
    weights?: readonly number[];
    gamma?: number;
    delta?: number;
    baseline?: boolean;
  }): Snapshot {
    const snapshot: Snapshot = Object.freeze({
      weights: Object.freeze(Array.from(params?.weights ?? this.sliderWeights)),
      gamma: params?.gamma ?? this.gammaValue,
      delta: params?.delta ?? this.deltaValue,
      baseline: params?.baseline ?? this.baselineView,
      contentHash: this.hash,
      thumbnail,
    });
    this.snapshots.push(snapshot);
    return snapshot;
  }

  /** Restore sliders and strength from a history entry. */
  loadSnapshot(snapshot: Snapshot): void {
    this.sliderWeights = Array.from(snapshot.weights);
    this.expert = snapshot.gamma !== snapshot.delta;
    this.gammaValue = snapshot.gamma;
    this.deltaValue = snapshot.delta;
    this.baselineView = snapshot.baseline;
  }
}

function clamp01(value: number): number {
  if (!Number.isFinite(value)) throw new Error(`invalid strength ${value}`);
  return Math.min(1, Math.max(0, value));
}
