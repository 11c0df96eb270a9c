/** Guided review session: next-item queue, marks, coverage and budget state.
 *
 * Optimistic UI is forbidden: every piece of state shown after a mark comes
 * from the service response, and elapsed time is a clock reading this client
 * supplies with each mark.
 */

import { ApiError } from "./api.js";
import type { NextItemDoc, SessionDoc, SessionItemDoc } from "./types.js";

/** The slice of the service the session flow needs (ApiClient satisfies it). */
export interface SessionApi {
  createSession(strategy: string, budgetMinutes: number): Promise<SessionDoc>;
  nextItem(id: string): Promise<NextItemDoc>;
  markItem(
    sessionId: string,
    itemId: number,
    state: "CHECKED" | "SUSPECT",
    note: string,
    elapsedMinutes: number,
  ): Promise<SessionDoc>;
}

export function canSubmitMark(state: "CHECKED" | "SUSPECT", note: string): boolean {
  return state === "CHECKED" || note.trim().length > 0;
}

export interface SessionState {
  session: SessionDoc | null;
  current: SessionItemDoc | null;
  done: boolean;
  error: string | null;
}

export class SessionFlow {
  state: SessionState = { session: null, current: null, done: false, error: null };
  private startedAt: number | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get coverage(): number {
    return this.state.session?.coverage ?? 0;
  }

  get overBudget(): boolean {
    return this.state.session?.status === "over budget";
  }

  elapsedMinutes(): number {
    if (this.startedAt === null) return 0;
    return (this.now() - this.startedAt) / 60_000;
  }

  async start(strategy: string, budgetMinutes: number): Promise<void> {
    this.state = { session: null, current: null, done: false, error: null };
    try {
      this.state.session = await this.api.createSession(strategy, budgetMinutes);
      this.startedAt = this.now();
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
  }

  async next(): Promise<SessionItemDoc | null> {
    const session = this.state.session;
    if (!session) return null;
    try {
      const response = await this.api.nextItem(session.id);
      this.state.current = response.next;
      this.state.done = response.next === null;
      this.state.error = null;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
    return this.state.current;
  }

  async mark(state: "CHECKED" | "SUSPECT", note = ""): Promise<boolean> {
    const session = this.state.session;
    const item = this.state.current;
    if (!session || !item) return false;
    if (!canSubmitMark(state, note)) {
      this.state.error = "a SUSPECT mark needs a note";
      return false;
    }
    try {
      this.state.session = await this.api.markItem(
        session.id,
        item.id,
        state,
        note,
        this.elapsedMinutes(),
      );
      this.state.error = null;
      await this.next();
      return true;
    } catch (err) {
      // 409s (illegal transitions) surface inline and leave state untouched
      this.state.error = err instanceof ApiError ? err.message : String(err);
      return false;
    }
  }
}
