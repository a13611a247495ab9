/** View state for the results-overview screen.
 *
 * Totals are copied verbatim from the agent's session response (string
 * conversion only, no arithmetic), so what the card shows is exactly
 * what GET /sessions/{id} returned.
 */

import type { AnalysisResponse, SessionInfo } from "./api.js";

export interface ResultsModel {
  state: string;
  stopReason: string | null;
  /** field -> verbatim string of the API value */
  totals: Record<string, string>;
  ecdf: [number, number][];
  throughputBps: [number, number][];
  meanDelayMs: [number, number][];
  rsrpDbm: [number, number][];
  empty: boolean;
}

export function verbatim(value: unknown): string {
  if (value === null || value === undefined) return "";
  return String(value);
}

export function buildResultsModel(
  info: SessionInfo,
  analysis: AnalysisResponse,
): ResultsModel {
  const summary = info.summary;
  const totals: Record<string, string> = {};
  if (summary) {
    for (const key of [
      "record_count",
      "total_bytes",
      "mean_bps",
      "min_bps",
      "max_bps",
      "mean_delay_ms",
      "handover_count",
    ] as const) {
      totals[key] = verbatim(summary[key]);
    }
  }
  return {
    state: info.state,
    stopReason: info.stop_reason,
    totals,
    ecdf: analysis.rsrp_ecdf,
    throughputBps: analysis.throughput_bps,
    meanDelayMs: analysis.mean_delay_ms,
    rsrpDbm: analysis.rsrp_dbm,
    empty: info.record_count === 0,
  };
}
