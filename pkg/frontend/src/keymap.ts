/** Keyboard-first labelling: 1 = low, 2 = medium, 3 = high, 0 = not clear. */

import type { LabelValue } from "./types.js";

const KEY_TO_LABEL: Record<string, LabelValue> = {
  "1": "low",
  "2": "medium",
  "3": "high",
  "0": "not_clear",
};

/** Map a keyboard key to its label value, or null for any other key. */
export function labelForKey(key: string): LabelValue | null {
  return KEY_TO_LABEL[key] ?? null;
}
