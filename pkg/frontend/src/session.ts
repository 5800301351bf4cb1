/**
 * Annotation session state machine, DOM-free.
 *
 * Drives the rater flow: fetch the next clip, gate submission on the audio
 * being playable, POST exactly one label per clip, advance, keep progress
 * in sync with the server. When the backend is unreachable the label goes
 * to the offline queue and a retry loop re-sends it; no label is lost.
 */

import { ApiClient, BackendUnreachable, RejectedLabel } from "./api.js";
import { OfflineQueue } from "./queue.js";
import type { LabelValue } from "./types.js";

export interface SessionState {
  raterId: string | null;
  clipId: string | null;
  audioReady: boolean;
  submitting: boolean;
  done: number;
  totalClips: number;
  offline: boolean;
  queued: number;
  finished: boolean;
  lastError: string | null;
}

export interface SessionOptions {
  /** Called after every state change. */
  onChange?: (state: SessionState) => void;
  /** Schedules a retry; return a cancel function. Default: 3 s setTimeout. */
  scheduleRetry?: (fn: () => void) => () => void;
}

const RETRY_MS = 3000;

export class AnnotationSession {
  private state: SessionState = {
    raterId: null,
    clipId: null,
    audioReady: false,
    submitting: false,
    done: 0,
    totalClips: 0,
    offline: false,
    queued: 0,
    finished: false,
    lastError: null,
  };

  private cancelRetry: (() => void) | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly queue: OfflineQueue,
    private readonly opts: SessionOptions = {},
  ) {
    this.state.queued = queue.size();
  }

  getState(): SessionState {
    return { ...this.state };
  }

  audioUrl(): string | null {
    return this.state.clipId ? this.api.audioUrl(this.state.clipId) : null;
  }

  /** Begin a session; submissions are impossible until this succeeds. */
  async start(raterId: string): Promise<void> {
    if (!raterId.trim()) {
      throw new Error("rater id must not be empty");
    }
    this.patch({ raterId: raterId.trim() });
    await this.flushQueued();
    await this.refreshProgress();
    await this.advance();
  }

  /** The audio element reports the clip can actually be heard. */
  markAudioReady(): void {
    if (this.state.clipId) this.patch({ audioReady: true });
  }

  canSubmit(): boolean {
    return Boolean(
      this.state.raterId &&
      this.state.clipId &&
      this.state.audioReady &&
      !this.state.submitting,
    );
  }

  /**
   * Submit the current clip's label and advance. With the backend down the
   * label is queued locally (still counts as this clip's one action) and a
   * retry is scheduled.
   */
  async submit(value: LabelValue): Promise<void> {
    if (!this.canSubmit()) return;
    const label = {
      clip_id: this.state.clipId as string,
      rater_id: this.state.raterId as string,
      value,
    };
    this.patch({ submitting: true, lastError: null });
    try {
      await this.api.submitLabel(label);
      this.patch({ submitting: false, offline: false });
      await this.refreshProgress();
      await this.advance();
    } catch (err) {
      if (err instanceof BackendUnreachable) {
        this.queue.enqueue(label);
        this.patch({
          submitting: false,
          offline: true,
          queued: this.queue.size(),
          clipId: null,
          audioReady: false,
        });
        this.scheduleRetry();
        return;
      }
      const message = err instanceof RejectedLabel ? err.message : String(err);
      this.patch({ submitting: false, lastError: message });
    }
  }

  /** Re-send queued labels and resume; invoked by the retry timer, a manual
   * button, or the browser's online event. */
  async retryNow(): Promise<void> {
    this.cancelRetry?.();
    this.cancelRetry = null;
    await this.flushQueued();
    if (this.state.offline) {
      this.scheduleRetry();
      return;
    }
    await this.refreshProgress();
    if (!this.state.clipId && !this.state.finished) {
      await this.advance();
    }
  }

  private async flushQueued(): Promise<void> {
    if (this.queue.size() === 0) {
      this.patch({ offline: false });
      return;
    }
    try {
      await this.queue.flush(
        (label) => this.api.submitLabel(label),
        (_label, err) => this.patch({ lastError: String((err as Error).message) }),
      );
    } catch {
      // flush never throws by contract, but stay safe
    }
    const remaining = this.queue.size();
    this.patch({ queued: remaining, offline: remaining > 0 });
  }

  private async refreshProgress(): Promise<void> {
    if (!this.state.raterId) return;
    try {
      const progress = await this.api.progress();
      this.patch({
        done: progress.per_rater[this.state.raterId] ?? 0,
        totalClips: progress.total_clips,
        offline: false,
      });
    } catch (err) {
      if (err instanceof BackendUnreachable) {
        this.patch({ offline: true });
        this.scheduleRetry();
      }
    }
  }

  private async advance(): Promise<void> {
    if (!this.state.raterId) return;
    try {
      const next = await this.api.nextClip(this.state.raterId);
      this.patch({
        clipId: next.clip_id,
        audioReady: false,
        finished: next.done,
        offline: false,
      });
    } catch (err) {
      if (err instanceof BackendUnreachable) {
        this.patch({ offline: true, clipId: null, audioReady: false });
        this.scheduleRetry();
      }
    }
  }

  private scheduleRetry(): void {
    if (this.cancelRetry) return;
    const schedule =
      this.opts.scheduleRetry ??
      ((fn: () => void) => {
        const id = setTimeout(fn, RETRY_MS);
        return () => clearTimeout(id);
      });
    this.cancelRetry = schedule(() => {
      this.cancelRetry = null;
      void this.retryNow();
    });
  }

  private patch(partial: Partial<SessionState>): void {
    this.state = { ...this.state, ...partial };
    this.opts.onChange?.(this.getState());
  }
}
