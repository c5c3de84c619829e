/** Session controller: drives one rater through their pair queue.
 *
 * DOM-free so it can be unit-tested in Node. One request in flight at a
 * time; votes are confirmed by the server before the view advances, and
 * duplicate submissions while a vote is pending are dropped client-side
 * (the server is idempotent as a second line of defense).
 */

import { ApiClient, ApiError, PairPayload } from "./api.js";
import { Placement, Rng, Side, randomPlacement, unmapChoice } from "./placement.js";

export interface PairView {
  pairId: string;
  task: string;
  progress: { done: number; total: number };
  /** Per-variable series for the left and right panels and the observation. */
  left: Record<string, number[]>;
  right: Record<string, number[]>;
  observation: Record<string, number[]>;
  placement: Placement;
}

export type ControllerState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "pair"; view: PairView }
  | { kind: "submitting"; view: PairView }
  | { kind: "done"; task: string }
  | { kind: "error"; message: string; retry: () => Promise<void> };

export interface SubmittedVote {
  pairId: string;
  side: Side;
  choice: "A" | "B";
}

export class SessionController {
  private sessionId: string | null = null;
  private task: string;
  state: ControllerState = { kind: "idle" };
  /** Every vote the server confirmed, in submission order. */
  readonly submitted: SubmittedVote[] = [];
  onChange: (state: ControllerState) => void = () => {};

  constructor(
    private api: ApiClient,
    private raterId: string,
    task: string,
    private rng: Rng = Math.random,
  ) {
    this.task = task;
  }

  private setState(state: ControllerState): void {
    this.state = state;
    this.onChange(state);
  }

  async start(): Promise<void> {
    this.setState({ kind: "loading" });
    try {
      const session = await this.api.createSession(this.raterId, this.task);
      this.sessionId = session.session_id;
      await this.advance();
    } catch (err) {
      this.fail(err, () => this.start());
    }
  }

  private toView(pair: PairPayload): PairView {
    const placement = randomPlacement(this.rng);
    return {
      pairId: pair.pair_id,
      task: pair.task,
      progress: pair.progress,
      left: placement.left === "A" ? pair.series_a : pair.series_b,
      right: placement.right === "A" ? pair.series_a : pair.series_b,
      observation: pair.observation,
      placement,
    };
  }

  private async advance(): Promise<void> {
    if (!this.sessionId) throw new Error("session not started");
    this.setState({ kind: "loading" });
    try {
      const pair = await this.api.nextPair(this.sessionId);
      if (pair === null) {
        this.setState({ kind: "done", task: this.task });
      } else {
        this.setState({ kind: "pair", view: this.toView(pair) });
      }
    } catch (err) {
      this.fail(err, () => this.advance());
    }
  }

  /** Submit the clicked side. Ignored unless a pair is currently shown,
   * so rapid duplicate clicks collapse into one request. */
  async choose(side: Side): Promise<void> {
    if (this.state.kind !== "pair" || !this.sessionId) return;
    const view = this.state.view;
    const choice = unmapChoice(view.placement, side);
    this.setState({ kind: "submitting", view });
    try {
      await this.api.submitVote(this.sessionId, view.pairId, choice);
      this.submitted.push({ pairId: view.pairId, side, choice });
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Already voted differently (e.g. in another tab): skip forward.
        await this.advance();
        return;
      }
      this.fail(err, () => {
        this.setState({ kind: "pair", view });
        return this.choose(side);
      });
    }
  }

  private fail(err: unknown, retry: () => Promise<void>): void {
    const message = err instanceof Error ? err.message : String(err);
    this.setState({ kind: "error", message, retry });
  }
}
