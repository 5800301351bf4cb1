/**
 * Offline label queue: submissions that could not reach the backend are
 * persisted and re-sent in order on the next flush. Nothing is dropped
 * until the server has acknowledged it with a 201.
 *
 * Storage is injectable; the browser build uses localStorage, tests and
 * non-DOM environments fall back to an in-memory map.
 */

import { RejectedLabel } from "./api.js";
import type { LabelSubmission } from "./types.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "speechconf_label_queue_v1";

export function memoryStore(): KeyValueStore {
  const data = new Map<string, string>();
  return {
    getItem: (k) => data.get(k) ?? null,
    setItem: (k, v) => void data.set(k, v),
  };
}

function defaultStore(): KeyValueStore {
  try {
    if (typeof localStorage !== "undefined") return localStorage;
  } catch {
    // storage disabled (private mode etc.)
  }
  return memoryStore();
}

export type SubmitFn = (label: LabelSubmission) => Promise<void>;

export class OfflineQueue {
  private readonly store: KeyValueStore;

  constructor(store?: KeyValueStore) {
    this.store = store ?? defaultStore();
  }

  pending(): LabelSubmission[] {
    try {
      return JSON.parse(this.store.getItem(STORAGE_KEY) ?? "[]") as LabelSubmission[];
    } catch {
      return [];
    }
  }

  size(): number {
    return this.pending().length;
  }

  enqueue(label: LabelSubmission): void {
    const list = this.pending();
    list.push(label);
    this.save(list);
  }

  /**
   * Try to deliver every queued label in order. A submission rejected by
   * the server (4xx) is dropped with its error reported via onRejected,
   * since retrying it would fail forever; a transport failure stops the flush
   * and keeps it and everything behind it queued.
   *
   * Returns the number of labels delivered.
   */
  async flush(
    submit: SubmitFn,
    onRejected?: (label: LabelSubmission, err: unknown) => void,
  ): Promise<number> {
    const list = this.pending();
    let delivered = 0;
    while (list.length > 0) {
      const head = list[0];
      try {
        await submit(head);
        delivered += 1;
        list.shift();
        this.save(list);
      } catch (err) {
        if (err instanceof RejectedLabel) {
          onRejected?.(head, err);
          list.shift();
          this.save(list);
          continue;
        }
        break; // still offline: keep the rest for the next flush
      }
    }
    return delivered;
  }

  private save(list: LabelSubmission[]): void {
    this.store.setItem(STORAGE_KEY, JSON.stringify(list));
  }
}
