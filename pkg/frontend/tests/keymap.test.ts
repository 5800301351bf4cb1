import { describe, expect, it } from "vitest";

import { labelForKey } from "../src/keymap.js";

describe("labelForKey", () => {
  it("maps 1/2/3 to the ordinal scale", () => {
    expect(labelForKey("1")).toBe("low");
    expect(labelForKey("2")).toBe("medium");
    expect(labelForKey("3")).toBe("high");
  });

  it("maps 0 to not_clear", () => {
    expect(labelForKey("0")).toBe("not_clear");
  });

  it("ignores everything else", () => {
    for (const key of ["4", "a", "Enter", " ", "Escape"]) {
      expect(labelForKey(key)).toBeNull();
    }
  });
});
