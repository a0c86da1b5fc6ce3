/**
 * Debounced last-write-wins scheduler for preview requests.
 *
 * Slider drags can fire far faster than the service renders, so requests are
 * coalesced behind a trailing debounce, each dispatch gets a monotonically
 * increasing id, the in-flight request is aborted when a newer one dispatches,
 * and any response that is not the newest id is discarded.
 */

export interface ScheduledTask<T> {
  (signal: AbortSignal): Promise<T>;
}

export interface SchedulerCallbacks<T> {
  onResult: (value: T, id: number) => void;
  onError?: (error: unknown, id: number) => void;
}

function isAbort(error: unknown): boolean {
  return error instanceof DOMException
    ? error.name === "AbortError"
    : error instanceof Error && error.name === "AbortError";
}

export class LastWriteScheduler<T> {
  private readonly delayMs: number;
  private readonly callbacks: SchedulerCallbacks<T>;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: ScheduledTask<T> | null = null;
  private controller: AbortController | null = null;
  private nextId = 0;
  private latestDispatched = -1;
  private disposed = false;

  constructor(delayMs: number, callbacks: SchedulerCallbacks<T>) {
    this.delayMs = delayMs;
    this.callbacks = callbacks;
  }

  /** Queue a task, replacing any not-yet-dispatched one. */
  request(task: ScheduledTask<T>): void {
    if (this.disposed) return;
    this.pending = task;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.flush(), this.delayMs);
  }

  /** Dispatch the pending task immediately instead of waiting out the delay. */
  flush(): void {
    if (this.disposed || this.pending === null) return;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const task = this.pending;
    this.pending = null;

    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const id = this.nextId++;
    this.latestDispatched = id;

    task(controller.signal).then(
      (value) => {
        if (this.disposed || id !== this.latestDispatched) return;
        this.callbacks.onResult(value, id);
      },
      (error) => {
        if (this.disposed || id !== this.latestDispatched || isAbort(error)) return;
        this.callbacks.onError?.(error, id);
      },
    );
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }

  /** Drop the queued task and abort the in-flight one, keeping the scheduler usable. */
  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
    this.controller?.abort();
    this.controller = null;
    this.latestDispatched = this.nextId; // orphan any response still in flight
    this.nextId++;
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
    this.controller?.abort();
    this.controller = null;
  }
}
