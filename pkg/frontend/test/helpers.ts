/** Shared test scaffolding: recorded service fixtures and a scripted fetch. */

import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { vi } from "vitest";

const here = dirname(fileURLToPath(import.meta.url));

export interface RecordedExchange {
  status: number;
  body: unknown;
}

export interface Fixtures {
  banks: RecordedExchange;
  create_session: RecordedExchange;
  flow: { next: RecordedExchange; submit: RecordedExchange; response: number }[];
  terminal_next: RecordedExchange;
  report: RecordedExchange;
  error_409: RecordedExchange;
  error_404: RecordedExchange;
  bank_doc: unknown;
  put_bank: RecordedExchange;
}

export function loadFixtures(): Fixtures {
  return JSON.parse(
    readFileSync(join(here, "..", "fixtures", "session-flow.json"), "utf-8"),
  ) as Fixtures;
}

export interface ScriptedCall {
  method: string;
  path: string;
  exchange: RecordedExchange;
}

/** Replaces global fetch with a strict script of expected calls; records
 * what actually happened for assertions. */
export function scriptFetch(script: ScriptedCall[]) {
  const calls: { method: string; path: string; body: unknown }[] = [];
  let cursor = 0;
  const mock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const path = String(input);
    const method = (init?.method ?? "GET").toUpperCase();
    calls.push({
      method,
      path,
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    const expected = script[cursor];
    if (!expected) {
      throw new Error(`unexpected request #${calls.length}: ${method} ${path}`);
    }
    if (expected.method !== method || !path.endsWith(expected.path)) {
      throw new Error(
        `request #${calls.length} was ${method} ${path}, ` +
          `script expected ${expected.method} ${expected.path}`,
      );
    }
    cursor += 1;
    return new Response(JSON.stringify(expected.exchange.body), {
      status: expected.exchange.status,
      headers: { "Content-Type": "application/json" },
    });
  });
  vi.stubGlobal("fetch", mock);
  return { calls, remaining: () => script.length - cursor };
}

export function mount(): HTMLElement {
  document.body.innerHTML = '<main id="app"></main>';
  return document.getElementById("app") as HTMLElement;
}

export async function flushAsync(rounds = 6): Promise<void> {
  for (let i = 0; i < rounds; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
