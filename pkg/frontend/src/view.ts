/** DOM rendering. No state lives here: render() rebuilds the screen from
 * the model, wiring the passed handlers onto fresh elements. */

import type { Screen } from "./state.js";
import { optionLabels, traceBands } from "./state.js";
import type { TracePoint } from "./api.js";

export interface Handlers {
  onSelectBank(bankId: string): void;
  onAnswer(option: number): void;
  onRetry(): void;
  onRestart(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

const SVG_NS = "http://www.w3.org/2000/svg";

/** Ability trace as an inline SVG: one point per step (x = step index),
 * a shaded band of +- one standard deviation around the mean line. */
export function traceChart(trace: TracePoint[]): SVGSVGElement {
  const width = 320;
  const height = 120;
  const pad = 12;
  const bands = traceBands(trace);
  const lo = Math.min(...bands.map((b) => b.lo), -1);
  const hi = Math.max(...bands.map((b) => b.hi), 1);
  const n = bands.length;
  const x = (i: number) => pad + (n === 1 ? 0 : (i * (width - 2 * pad)) / (n - 1));
  const y = (v: number) => height - pad - ((v - lo) * (height - 2 * pad)) / (hi - lo);

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "trace-chart");
  svg.setAttribute("data-steps", String(n));

  const area = document.createElementNS(SVG_NS, "path");
  const upper = bands.map((b, i) => `${x(i)},${y(b.hi)}`);
  const lower = bands.map((b, i) => `${x(i)},${y(b.lo)}`).reverse();
  area.setAttribute("d", `M ${upper.join(" L ")} L ${lower.join(" L ")} Z`);
  area.setAttribute("class", "trace-band");
  svg.appendChild(area);

  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute("points", bands.map((b, i) => `${x(i)},${y(b.mean)}`).join(" "));
  line.setAttribute("class", "trace-mean");
  svg.appendChild(line);

  bands.forEach((b, i) => {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(x(i)));
    dot.setAttribute("cy", String(y(b.mean)));
    dot.setAttribute("r", "2.5");
    dot.setAttribute("class", "trace-dot");
    dot.setAttribute("data-mean", String(b.mean));
    svg.appendChild(dot);
  });
  return svg;
}

export function render(root: HTMLElement, screen: Screen, handlers: Handlers): void {
  root.replaceChildren();

  if (screen.kind === "loading") {
    root.appendChild(el("p", "loading", screen.message));
    return;
  }

  if (screen.kind === "no-banks") {
    const box = el("div", "guidance");
    box.appendChild(el("h2", undefined, "No question banks yet"));
    box.appendChild(
      el(
        "p",
        undefined,
        "Upload one with: PUT /api/v1/banks/{id} " +
          "(questions, gold answers, and optional calibration responses), then reload.",
      ),
    );
    root.appendChild(box);
    return;
  }

  if (screen.kind === "banks") {
    const box = el("div", "bank-list");
    box.appendChild(el("h2", undefined, "Choose a question bank"));
    for (const bank of screen.banks) {
      const button = el(
        "button",
        "bank-button",
        `${bank.bank_id} (${bank.questions} questions)`,
      );
      button.dataset.bankId = bank.bank_id;
      button.addEventListener("click", () => handlers.onSelectBank(bank.bank_id));
      box.appendChild(button);
    }
    root.appendChild(box);
    return;
  }

  if (screen.kind === "error") {
    const box = el("div", "error-banner");
    box.appendChild(el("h2", undefined, "Service error"));
    box.appendChild(el("p", "error-message", screen.message));
    if (screen.canRetry) {
      const retry = el("button", "retry-button", "Retry");
      retry.addEventListener("click", () => handlers.onRetry());
      box.appendChild(retry);
    }
    root.appendChild(box);
    return;
  }

  if (screen.kind === "question") {
    const { session, question, submitting } = screen;
    const box = el("div", "question-screen");
    box.appendChild(
      el("p", "progress", `Question ${session.askedCount + 1} of ${session.budget}`),
    );
    box.appendChild(
      el("h2", "question-text", question.display_text ?? question.question_id),
    );
    const list = el("div", "options");
    optionLabels(question).forEach((label, k) => {
      const button = el("button", "option-button", label);
      button.dataset.option = String(k);
      button.disabled = submitting;
      button.addEventListener("click", () => handlers.onAnswer(k));
      list.appendChild(button);
    });
    box.appendChild(list);
    box.appendChild(el("h3", undefined, "Ability estimate"));
    box.appendChild(traceChart(session.trace));
    if (session.estimate !== null) {
      box.appendChild(
        el("p", "estimate", `Estimated raw score: ${session.estimate.toFixed(2)}`),
      );
    }
    root.appendChild(box);
    return;
  }

  // report screen
  const { report } = screen;
  const box = el("div", "report-screen");
  box.appendChild(el("h2", undefined, "Session complete"));
  box.appendChild(
    el(
      "p",
      "estimate",
      `Final estimated raw score: ${report.estimated_raw_score.toFixed(2)}`,
    ),
  );
  box.appendChild(traceChart(report.trace));
  const table = el("table", "asked-table");
  const head = el("tr");
  for (const title of ["Question", "Response", "Correct"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const entry of report.asked) {
    const row = el("tr");
    row.appendChild(el("td", undefined, entry.question_id));
    row.appendChild(el("td", undefined, String(entry.response)));
    row.appendChild(el("td", entry.correct ? "correct" : "incorrect",
      entry.correct ? "yes" : "no"));
    table.appendChild(row);
  }
  box.appendChild(table);
  const again = el("button", "restart-button", "Start another session");
  again.addEventListener("click", () => handlers.onRestart());
  box.appendChild(again);
  root.appendChild(box);
}
