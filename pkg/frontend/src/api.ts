/**
 * Thin typed client for the style service. All calls go through an
 * injectable fetch so tests can fake the transport.
 */

export interface ArchetypeCard {
  index: number;
  loadings: { image_id: string; weight: number }[];
}

export interface ModelCard {
  k: number;
  n: number;
  schema: {
    channel_counts: number[];
    codec: string;
    resize_policy: string;
    schema_hash: string;
  };
  explained_variance: number;
  telemetry: { iterations: number; converged: boolean; final_objective: number };
  archetypes: ArchetypeCard[];
}

export interface Decomposition {
  weights: number[];
  pairs: { index: number; weight: number }[];
  residual: number;
}

export interface StylizeParams {
  weights: readonly number[];
  gamma: number;
  delta: number;
  baseline?: boolean;
  signal?: AbortSignal;
}

export interface StylizeResult {
  blob: Blob;
  contentHash: string | null;
}

export class ApiError extends Error {
  readonly status: number;
  readonly field: string | null;

  constructor(status: number, message: string, field: string | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.field = field;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let message = `request failed with status ${response.status}`;
  let field: string | null = null;
  try {
    const body = await response.json();
    const detail = body?.detail;
    if (typeof detail === "string") {
      message = detail;
    } else if (detail && typeof detail.message === "string") {
      message = detail.message;
      field = typeof detail.field === "string" ? detail.field : null;
    }
  } catch {
    // non-JSON body; keep the generic message
  }
  throw new ApiError(response.status, message, field);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (input, init) => fetch(input, init)) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  async getModel(): Promise<ModelCard> {
    const response = await this.fetchFn(`${this.base}/api/model`);
    await raiseForStatus(response);
    return (await response.json()) as ModelCard;
  }

  /** URL for an archetype texture tile; the <img> element does the fetch. */
  textureUrl(index: number, seed = 0, size = 256, iterations = 3): string {
    const query = new URLSearchParams({
      seed: String(seed),
      size: String(size),
      iterations: String(iterations),
    });
    return `${this.base}/api/archetypes/${index}/texture?${query}`;
  }

  async fetchTexture(index: number, seed = 0, size = 256, iterations = 3): Promise<Blob> {
    const response = await this.fetchFn(this.textureUrl(index, seed, size, iterations));
    await raiseForStatus(response);
    return await response.blob();
  }

  async decompose(image: Blob, signal?: AbortSignal): Promise<Decomposition> {
    const form = new FormData();
    form.append("image", image, "upload.png");
    const response = await this.fetchFn(`${this.base}/api/decompose`, {
      method: "POST",
      body: form,
      signal,
    });
    await raiseForStatus(response);
    return (await response.json()) as Decomposition;
  }

  async stylize(image: Blob, params: StylizeParams): Promise<StylizeResult> {
    const form = new FormData();
    form.append("image", image, "upload.png");
    form.append("weights", JSON.stringify(Array.from(params.weights)));
    form.append("gamma", String(params.gamma));
    form.append("delta", String(params.delta));
    if (params.baseline) form.append("baseline", "true");
    const response = await this.fetchFn(`${this.base}/api/stylize`, {
      method: "POST",
      body: form,
      signal: params.signal,
    });
    await raiseForStatus(response);
    return {
      blob: await response.blob(),
      contentHash: response.headers.get("X-Content-Hash"),
    };
  }
}
