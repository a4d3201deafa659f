/** Session controller: owns the screen model and all transitions.
 *
 * Concurrency contract: at most one request in flight; stale completions
 * are discarded by sequence number; answering is guarded so rapid double
 * clicks submit exactly once.  A 409 (stale/duplicate submission) never
 * errors the screen: the app resynchronizes from the report endpoint.
 */

import { ApiError, SessionApi } from "./api.js";
import type { NextPayload, Report, TracePoint } from "./api.js";
import type { Screen, SessionView } from "./state.js";
import { render, type Handlers } from "./view.js";

export class SessionApp {
  private screen: Screen = { kind: "loading", message: "Loading banks..." };
  private session: SessionView | null = null;
  private seq = 0;
  private inFlight = false;
  private lastAction: (() => void) | null = null;

  constructor(
    private root: HTMLElement,
    private api: SessionApi,
    private budget?: number,
  ) {}

  start(): void {
    this.loadBanks();
  }

  get currentScreen(): Screen {
    return this.screen;
  }

  private setScreen(screen: Screen): void {
    this.screen = screen;
    const handlers: Handlers = {
      onSelectBank: (bankId) => this.startSession(bankId),
      onAnswer: (option) => this.answer(option),
      onRetry: () => this.retry(),
      onRestart: () => this.loadBanks(),
    };
    render(this.root, screen, handlers);
  }

  /** Wraps a request so stale completions (superseded by a newer action)
   * are dropped instead of clobbering the screen -- rejections included. */
  private async guarded<T>(work: () => Promise<T>): Promise<T | undefined> {
    const ticket = ++this.seq;
    this.inFlight = true;
    try {
      const result = await work();
      if (ticket !== this.seq) return undefined;
      return result;
    } catch (error) {
      if (ticket !== this.seq) return undefined;
      throw error;
    } finally {
      if (ticket === this.seq) this.inFlight = false;
    }
  }

  private fail(error: unknown, retry: (() => void) | null): void {
    const message = error instanceof Error ? error.message : String(error);
    this.lastAction = retry;
    this.setScreen({ kind: "error", message, canRetry: retry !== null });
  }

  private retry(): void {
    const action = this.lastAction;
    if (action) action();
  }

  loadBanks(): void {
    this.session = null;
    this.setScreen({ kind: "loading", message: "Loading banks..." });
    void this.guarded(() => this.api.listBanks())
      .then((listing) => {
        if (!listing) return;
        if (listing.banks.length === 0) {
          this.setScreen({ kind: "no-banks" });
        } else {
          this.setScreen({ kind: "banks", banks: listing.banks });
        }
      })
      .catch((error) => this.fail(error, () => this.loadBanks()));
  }

  startSession(bankId: string): void {
    this.setScreen({ kind: "loading", message: `Starting session on ${bankId}...` });
    void this.guarded(async () => {
      const created = await this.api.createSession(bankId, this.budget);
      const view: SessionView = {
        sessionId: created.session_id,
        askedCount: created.asked_count,
        budget: created.budget,
        trace: [{ mean: created.ability_mean, variance: created.ability_variance }],
        estimate: null,
      };
      this.session = view;
      return this.api.next(created.session_id);
    })
      .then((next) => {
        if (next) this.applyNext(next);
      })
      .catch((error) => this.fail(error, () => this.startSession(bankId)));
  }

  private applyNext(next: NextPayload): void {
    const session = this.session;
    if (!session) return;
    if (next.done) {
      void this.loadReport();
      return;
    }
    session.askedCount = next.asked_count;
    session.budget = next.budget;
    this.setScreen({
      kind: "question",
      session,
      question: next.question,
      expectedReduction: next.expected_entropy_reduction,
      submitting: false,
    });
  }

  answer(option: number): void {
    const screen = this.screen;
    if (screen.kind !== "question" || screen.submitting || this.inFlight) {
      return; // double-click guard: the first submission is already running
    }
    const session = screen.session;
    const questionId = screen.question.question_id;
    this.setScreen({ ...screen, submitting: true });
    void this.guarded(async () => {
      const result = await this.api.submit(session.sessionId, questionId, option);
      session.askedCount = result.asked_count;
      session.trace = [
        ...session.trace,
        { mean: result.ability_mean, variance: result.ability_variance },
      ];
      session.estimate = result.estimated_raw_score;
      if (result.done) return null;
      return this.api.next(session.sessionId);
    })
      .then((next) => {
        if (next === undefined) return;
        if (next === null) {
          void this.loadReport();
        } else {
          this.applyNext(next);
        }
      })
      .catch((error) => {
        if (error instanceof ApiError && error.status === 409) {
          // stale or duplicate submission: the log is authoritative
          void this.resync();
        } else {
          this.fail(error, () => this.answer(option));
        }
      });
  }

  /** Rebuild the screen from the server's report after a conflict. */
  private async resync(): Promise<void> {
    const session = this.session;
    if (!session) return;
    try {
      const report = await this.api.report(session.sessionId);
      this.adoptReport(report);
      if (report.done) {
        this.setScreen({ kind: "report", session, report });
      } else {
        const next = await this.api.next(session.sessionId);
        this.applyNext(next);
      }
    } catch (error) {
      this.fail(error, () => void this.resync());
    }
  }

  private adoptReport(report: Report): void {
    const session = this.session;
    if (!session) return;
    session.askedCount = report.asked_count;
    session.budget = report.budget;
    session.trace = report.trace.map((p: TracePoint) => ({ ...p }));
    session.estimate = report.estimated_raw_score;
  }

  private async loadReport(): Promise<void> {
    const session = this.session;
    if (!session) return;
    try {
      const report = await this.api.report(session.sessionId);
      this.adoptReport(report);
      this.setScreen({ kind: "report", session, report });
    } catch (error) {
      this.fail(error, () => void this.loadReport());
    }
  }
}
