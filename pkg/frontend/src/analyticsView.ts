// Analytics view: renders the server-computed ticket report verbatim.
// No client-side aggregation — the numbers shown are the numbers returned.

import { AnalyticsReport } from "./api";

export function renderReport(report: AnalyticsReport): string {
  const pct = (report.rate_of_incomplete_answers * 100).toFixed(1);
  const byState = Object.entries(report.counts_by_state)
    .filter(([, n]) => n > 0)
    .map(([state, n]) => `<li>${state}: ${n}</li>`)
    .join("");
  return [
    `<section class="analytics">`,
    `<dl>`,
    `<dt>Total tickets</dt><dd>${report.total_tickets}</dd>`,
    `<dt>Insufficient</dt><dd>${report.counts_by_flag.insufficient}</dd>`,
    `<dt>Extend</dt><dd>${report.counts_by_flag.extend}</dd>`,
    `<dt>Assistant turns</dt><dd>${report.assistant_turns}</dd>`,
    `<dt>Incomplete-answer rate</dt><dd>${pct}%</dd>`,
    `</dl>`,
    `<ul class="by-state">${byState}</ul>`,
    `</section>`,
  ].join("\n");
}
