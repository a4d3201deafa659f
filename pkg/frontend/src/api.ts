/** Typed client for the session service. The UI never computes anything
 * itself: every number rendered comes from one of these responses. */

export interface BankInfo {
  bank_id: string;
  questions: number;
  responses: number;
}

export interface Question {
  question_id: string;
  num_options: number;
  display_text: string | null;
  options: string[] | null;
}

export interface SessionCreated {
  session_id: string;
  budget: number;
  asked_count: number;
  ability_mean: number;
  ability_variance: number;
}

export type NextPayload =
  | { done: true; asked_count: number; budget: number }
  | {
      done: false;
      question: Question;
      expected_entropy_reduction: number;
      asked_count: number;
      budget: number;
    };

export interface SubmitResult {
  ability_mean: number;
  ability_variance: number;
  asked_count: number;
  budget: number;
  estimated_raw_score: number;
  done: boolean;
}

export interface TracePoint {
  mean: number;
  variance: number;
}

export interface AskedEntry {
  question_id: string;
  response: number;
  correct: boolean;
}

export interface Report {
  session_id: string;
  participant_id: string;
  asked: AskedEntry[];
  asked_count: number;
  budget: number;
  trace: TracePoint[];
  estimated_raw_score: number;
  done: boolean;
}

export class ApiError extends Error {
  status: number;
  body: unknown;

  constructor(status: number, body: unknown) {
    const detail =
      body && typeof body === "object" && "error" in (body as Record<string, unknown>)
        ? String((body as Record<string, unknown>).error)
        : JSON.stringify(body);
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.body = body;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json", ...init?.headers },
    ...init,
  });
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    body = null;
  }
  if (!response.ok) {
    throw new ApiError(response.status, body);
  }
  return body as T;
}

/** All paths are relative so the bundle works wherever the service mounts
 * it; `base` exists for tests that talk to a live server. */
export class SessionApi {
  constructor(private base: string = "") {}

  listBanks(): Promise<{ banks: BankInfo[] }> {
    return request(`${this.base}/api/v1/banks`);
  }

  createSession(bankId: string, budget?: number): Promise<SessionCreated> {
    return request(`${this.base}/api/v1/sessions`, {
      method: "POST",
      body: JSON.stringify(budget ? { bank_id: bankId, budget } : { bank_id: bankId }),
    });
  }

  next(sessionId: string): Promise<NextPayload> {
    return request(`${this.base}/api/v1/sessions/${sessionId}/next`);
  }

  submit(sessionId: string, questionId: string, response: number): Promise<SubmitResult> {
    return request(`${this.base}/api/v1/sessions/${sessionId}/responses`, {
      method: "POST",
      body: JSON.stringify({ question_id: questionId, response }),
    });
  }

  report(sessionId: string): Promise<Report> {
    return request(`${this.base}/api/v1/sessions/${sessionId}/report`);
  }
}
