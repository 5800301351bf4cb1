/** Shared contract types for the labelling API. */

/** The only label strings the server accepts. Nothing else is ever POSTed. */
export const LABEL_VALUES = ["low", "medium", "high", "not_clear"] as const;

export type LabelValue = (typeof LABEL_VALUES)[number];

export interface LabelSubmission {
  clip_id: string;
  rater_id: string;
  value: LabelValue;
}

export interface NextClipResponse {
  clip_id: string | null;
  done: boolean;
}

export interface ProgressResponse {
  total_clips: number;
  per_rater: Record<string, number>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;
