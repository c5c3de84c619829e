/** Randomized left/right placement of the two candidates.
 *
 * The service always labels candidates A and B. To counteract position bias
 * the UI flips a coin per pair view: when flipped, candidate B is drawn on
 * the left. The mapping is kept client-side and used to translate the
 * clicked side back to the canonical A/B choice before submission.
 */

export type Side = "left" | "right";
export type Choice = "A" | "B";

export interface Placement {
  /** Candidate shown on the left. */
  left: Choice;
  /** Candidate shown on the right. */
  right: Choice;
}

export type Rng = () => number;

/** Draw a placement; `rng` defaults to Math.random and must return [0, 1). */
export function randomPlacement(rng: Rng = Math.random): Placement {
  return rng() < 0.5 ? { left: "A", right: "B" } : { left: "B", right: "A" };
}

/** Translate the clicked side back to the canonical A/B choice. */
export function unmapChoice(placement: Placement, side: Side): Choice {
  return side === "left" ? placement.left : placement.right;
}

/** Mulberry32: tiny seeded PRNG for reproducible tests and demos. */
export function seededRng(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
