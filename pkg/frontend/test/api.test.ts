/** Contract tests: the typed client against recorded service payloads. */

import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, SessionApi } from "../src/api.js";
import { loadFixtures, scriptFetch } from "./helpers.js";

const fixtures = loadFixtures();

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("SessionApi", () => {
  it("lists banks as recorded", async () => {
    scriptFetch([{ method: "GET", path: "/api/v1/banks", exchange: fixtures.banks }]);
    const listing = await new SessionApi().listBanks();
    expect(listing.banks.length).toBeGreaterThan(0);
    expect(listing.banks[0]).toHaveProperty("bank_id");
    expect(listing.banks[0]).toHaveProperty("questions");
  });

  it("creates sessions and parses the prior posterior", async () => {
    const { calls } = scriptFetch([
      { method: "POST", path: "/api/v1/sessions", exchange: fixtures.create_session },
    ]);
    const created = await new SessionApi().createSession("demo", 5);
    expect(created.session_id).toBeTypeOf("string");
    expect(created.ability_variance).toBeGreaterThan(0);
    expect(calls[0]?.body).toEqual({ bank_id: "demo", budget: 5 });
  });

  it("parses next-question payloads exactly as served", async () => {
    const first = fixtures.flow[0]!;
    scriptFetch([
      { method: "GET", path: "/next", exchange: first.next },
    ]);
    const next = await new SessionApi().next("sid");
    if (next.done) throw new Error("fixture should not be terminal");
    const recorded = first.next.body as {
      question: { question_id: string; num_options: number };
      expected_entropy_reduction: number;
    };
    expect(next.question.question_id).toBe(recorded.question.question_id);
    expect(next.question.num_options).toBe(recorded.question.num_options);
    expect(next.expected_entropy_reduction).toBe(recorded.expected_entropy_reduction);
  });

  it("submits responses with the exact wire format", async () => {
    const first = fixtures.flow[0]!;
    const { calls } = scriptFetch([
      { method: "POST", path: "/responses", exchange: first.submit },
    ]);
    const result = await new SessionApi().submit("sid", "q2", first.response);
    expect(calls[0]?.body).toEqual({ question_id: "q2", response: first.response });
    const recorded = first.submit.body as { ability_mean: number };
    expect(result.ability_mean).toBe(recorded.ability_mean);
  });

  it("raises ApiError with the server's message on 4xx", async () => {
    scriptFetch([
      { method: "GET", path: "/next", exchange: fixtures.error_404 },
    ]);
    await expect(new SessionApi().next("nope")).rejects.toThrowError(ApiError);
  });

  it("exposes status codes for conflict handling", async () => {
    scriptFetch([
      { method: "POST", path: "/responses", exchange: fixtures.error_409 },
    ]);
    try {
      await new SessionApi().submit("sid", "q0", 0);
      throw new Error("should have thrown");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(409);
    }
  });
});
