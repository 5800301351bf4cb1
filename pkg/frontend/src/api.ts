/**
 * Thin client over the annotation HTTP contract.
 *
 * fetch is injected so tests (and the offline queue) can swap transports.
 * Server-side validation failures (400) surface their message verbatim;
 * network-level failures throw BackendUnreachable so callers can queue.
 */

import type {
  FetchLike,
  LabelSubmission,
  NextClipResponse,
  ProgressResponse,
} from "./types.js";

export class BackendUnreachable extends Error {}

export class RejectedLabel extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  audioUrl(clipId: string): string {
    return `${this.baseUrl}/api/clips/${encodeURIComponent(clipId)}/audio`;
  }

  async nextClip(raterId: string): Promise<NextClipResponse> {
    const res = await this.get(`/api/next?rater=${encodeURIComponent(raterId)}`);
    return res as NextClipResponse;
  }

  async progress(): Promise<ProgressResponse> {
    return (await this.get("/api/progress")) as ProgressResponse;
  }

  /**
   * POST one label. Resolves on 201. Throws RejectedLabel for 4xx responses
   * (invalid value, unknown clip, malformed body) and BackendUnreachable
   * when the request never reached the server.
   */
  async submitLabel(label: LabelSubmission): Promise<void> {
    let status: number;
    let body: string;
    try {
      const res = await this.fetchImpl(`${this.baseUrl}/api/labels`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(label),
      });
      status = res.status;
      body = status === 201 ? "" : await res.text();
    } catch (err) {
      throw new BackendUnreachable(String(err));
    }
    if (status !== 201) {
      let message = body;
      try {
        const parsed = JSON.parse(body) as { error?: string };
        if (parsed.error) message = parsed.error;
      } catch {
        // non-JSON error body: surface as-is
      }
      throw new RejectedLabel(status, message);
    }
  }

  private async get(path: string): Promise<unknown> {
    let res;
    try {
      res = await this.fetchImpl(`${this.baseUrl}${path}`);
    } catch (err) {
      throw new BackendUnreachable(String(err));
    }
    if (res.status !== 200) {
      throw new RejectedLabel(res.status, await res.text());
    }
    return res.json();
  }
}
