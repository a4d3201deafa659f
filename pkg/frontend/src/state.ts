/** Screen model for the session runner. Pure data: the controller owns
 * transitions, the view renders whatever screen it is handed. */

import type { BankInfo, Question, Report, TracePoint } from "./api.js";

export interface SessionView {
  sessionId: string;
  askedCount: number;
  budget: number;
  trace: TracePoint[];
  estimate: number | null;
}

export type Screen =
  | { kind: "loading"; message: string }
  | { kind: "banks"; banks: BankInfo[] }
  | { kind: "no-banks" }
  | {
      kind: "question";
      session: SessionView;
      question: Question;
      expectedReduction: number;
      submitting: boolean;
    }
  | { kind: "report"; session: SessionView; report: Report }
  | { kind: "error"; message: string; canRetry: boolean };

export function optionLabels(question: Question): string[] {
  if (question.options && question.options.length === question.num_options) {
    return question.options;
  }
  return Array.from({ length: question.num_options }, (_, k) => `Option ${k}`);
}

/** Mean +- one standard deviation per step, exactly as reported. */
export function traceBands(trace: TracePoint[]): { mean: number; lo: number; hi: number }[] {
  return trace.map((point) => {
    const sd = Math.sqrt(point.variance);
    return { mean: point.mean, lo: point.mean - sd, hi: point.mean + sd };
  });
}
