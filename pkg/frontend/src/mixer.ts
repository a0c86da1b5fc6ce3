/**
 * Live mixer orchestration: wires slider/strength changes through the
 * debounced scheduler to the stylize endpoint, keeps the session history,
 * and drives the enhancement sweep and the blended-vs-chained compare view.
 */

import { ApiClient, StylizeResult } from "./api.js";
import { LastWriteScheduler } from "./scheduler.js";
import { SessionState, Snapshot } from "./session.js";
import { enhanceWeights, isOnSimplex } from "./simplex.js";

export const DEBOUNCE_MS = 250;
export const SWEEP_STRENGTHS = [0.5, 0.65, 0.8, 0.95] as const;

export interface PreviewPair {
  blended: Blob;
  chained: Blob | null;
}

export interface MixerCallbacks {
  /** A preview render landed (and was recorded in history). */
  onPreview: (pair: PreviewPair, snapshot: Snapshot) => void;
  /** Strength is zero: show the untouched upload, no request made. */
  onOriginal: () => void;
  onError?: (error: unknown) => void;
}

interface RenderParams {
  weights: readonly number[];
  gamma: number;
  delta: number;
  compare: boolean;
}

export class Mixer {
  private readonly api: ApiClient;
  readonly session: SessionState;
  private readonly callbacks: MixerCallbacks;
  private readonly scheduler: LastWriteScheduler<{ pair: PreviewPair; params: RenderParams }>;
  private content: Blob | null = null;

  constructor(api: ApiClient, session: SessionState, callbacks: MixerCallbacks) {
    this.api = api;
    this.session = session;
    this.callbacks = callbacks;
    this.scheduler = new LastWriteScheduler(DEBOUNCE_MS, {
      onResult: ({ pair, params }) => {
        const snapshot = this.session.recordSnapshot(pair.blended, {
          weights: params.weights,
          gamma: params.gamma,
          delta: params.delta,
          baseline: params.compare,
        });
        this.callbacks.onPreview(pair, snapshot);
      },
      onError: (error) => this.callbacks.onError?.(error),
    });
  }

  setContent(image: Blob, contentHash: string | null = null): void {
    this.content = image;
    this.session.setContentHash(contentHash);
  }

  /** Continuous slider drag: update state and queue a debounced render. */
  moveSlider(index: number, value: number): void {
    this.session.moveSlider(index, value);
    this.queueRender();
  }

  /** Slider release renders immediately rather than waiting out the debounce. */
  releaseSlider(): void {
    this.scheduler.flush();
  }

  setStrength(value: number): void {
    this.session.setStrength(value);
    this.queueRender();
  }

  setDelta(value: number): void {
    this.session.setDelta(value);
    this.queueRender();
  }

  setBaselineCompare(on: boolean): void {
    this.session.setBaseline(on);
    this.queueRender();
  }

  loadWeights(weights: readonly number[]): void {
    this.session.setWeights(weights);
    this.queueRender();
  }

  queueRender(): void {
    if (this.content === null) return;
    if (this.session.gamma === 0) {
      // strength zero reproduces the upload exactly; skip the round trip
      this.scheduler.cancel();
      this.callbacks.onOriginal();
      return;
    }
    const params: RenderParams = {
      weights: Array.from(this.session.weights),
      gamma: this.session.gamma,
      delta: this.session.delta,
      compare: this.session.baseline,
    };
    if (!isOnSimplex(params.weights)) {
      throw new Error("refusing to request with weights off the simplex");
    }
    this.scheduler.request((signal) => this.render(params, signal));
  }

  private async render(
    params: RenderParams,
    signal: AbortSignal,
  ): Promise<{ pair: PreviewPair; params: RenderParams }> {
    const content = this.content;
    if (content === null) throw new Error("no content image loaded");
    const requests: Promise<StylizeResult>[] = [
      this.api.stylize(content, {
        weights: params.weights,
        gamma: params.gamma,
        delta: params.delta,
        signal,
      }),
    ];
    if (params.compare) {
      requests.push(
        this.api.stylize(content, {
          weights: params.weights,
          gamma: params.gamma,
          delta: params.delta,
          baseline: true,
          signal,
        }),
      );
    }
    const results = await Promise.all(requests);
    const blended = results[0];
    if (blended === undefined) throw new Error("stylize returned no result");
    this.session.setContentHash(blended.contentHash);
    return {
      pair: { blended: blended.blob, chained: results[1]?.blob ?? null },
      params,
    };
  }

  /**
   * Enhancement sweep: pull the current mix toward one archetype at each
   * sweep strength, co-varying stylization strength with the pull. Returns
   * the frames in order; does not touch the live preview or history.
   */
  async runEnhanceSweep(target: number, signal?: AbortSignal): Promise<Blob[]> {
    const content = this.content;
    if (content === null) throw new Error("no content image loaded");
    const base = Array.from(this.session.weights);
    const frames: Blob[] = [];
    for (const strength of SWEEP_STRENGTHS) {
      const weights = enhanceWeights(base, target, strength);
      const result = await this.api.stylize(content, {
        weights,
        gamma: strength,
        delta: strength,
        signal,
      });
      frames.push(result.blob);
    }
    return frames;
  }

  dispose(): void {
    this.scheduler.dispose();
  }
}
