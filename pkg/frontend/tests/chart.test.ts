import { describe, expect, it } from "vitest";

import { sharedExtent, toPixelY } from "../src/chart.js";

describe("sharedExtent", () => {
  it("spans every series so both panels share one axis", () => {
    const e = sharedExtent([[0, 1], [5, 10], [-2, 3]]);
    expect(e.min).toBeLessThanOrEqual(-2);
    expect(e.max).toBeGreaterThanOrEqual(10);
  });

  it("handles constant and empty inputs", () => {
    expect(sharedExtent([[4, 4, 4]])).toEqual({ min: 3.5, max: 4.5 });
    expect(sharedExtent([])).toEqual({ min: 0, max: 1 });
  });
});

describe("toPixelY", () => {
  it("maps min to the bottom and max to the top of the canvas", () => {
    const extent = { min: 0, max: 10 };
    expect(toPixelY(0, extent, 200)).toBe(200);
    expect(toPixelY(10, extent, 200)).toBe(0);
    expect(toPixelY(5, extent, 200)).toBe(100);
  });
});
