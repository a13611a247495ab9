/** Results view: totals are the agent's numbers verbatim. */

import { describe, expect, it } from "vitest";

import type { AnalysisResponse, SessionInfo } from "../src/api.js";
import { buildResultsModel, verbatim } from "../src/results.js";

const info: SessionInfo = {
  id: 4,
  state: "finished",
  config: { direction: "downlink", transport: "tcp", server_host: "10.0.0.1" },
  record_count: 60,
  summary: {
    record_count: 60,
    total_bytes: 74_868_224,
    mean_bps: 9_982_429.866666667,
    min_bps: 9_437_184.0,
    max_bps: 10_485_760.0,
    mean_delay_ms: null,
    handover_count: 2,
  },
  error: null,
  stop_reason: "duration",
};

const analysis: AnalysisResponse = {
  summary: info.summary,
  rsrp_ecdf: [
    [-120.0, 0.25],
    [-110.0, 0.5],
    [-100.0, 1.0],
  ],
  throughput_bps: [
    [1000, 9_437_184.0],
    [2000, 10_485_760.0],
  ],
  mean_delay_ms: [],
  rsrp_dbm: [
    [1000, -120.0],
    [2000, -100.0],
  ],
};

describe("results model", () => {
  it("copies every summary total byte-for-byte", () => {
    const model = buildResultsModel(info, analysis);
    const summary = info.summary!;
    expect(model.totals).toEqual({
      record_count: String(summary.record_count),
      total_bytes: String(summary.total_bytes),
      mean_bps: String(summary.mean_bps),
      min_bps: String(summary.min_bps),
      max_bps: String(summary.max_bps),
      mean_delay_ms: "",
      handover_count: String(summary.handover_count),
    });
    // spot-check the exact rendering of an awkward float
    expect(model.totals.mean_bps).toBe("9982429.866666667");
    expect(model.totals.total_bytes).toBe("74868224");
  });

  it("passes agent-computed chart data through untouched", () => {
    const model = buildResultsModel(info, analysis);
    expect(model.ecdf).toEqual(analysis.rsrp_ecdf);
    expect(model.throughputBps).toEqual(analysis.throughput_bps);
    expect(model.rsrpDbm).toEqual(analysis.rsrp_dbm);
  });

  it("marks empty sessions", () => {
    const empty = buildResultsModel(
      { ...info, record_count: 0, summary: null },
      { summary: null, rsrp_ecdf: [], throughput_bps: [], mean_delay_ms: [], rsrp_dbm: [] },
    );
    expect(empty.empty).toBe(true);
    expect(empty.totals).toEqual({});
  });

  it("verbatim never invents characters", () => {
    expect(verbatim(null)).toBe("");
    expect(verbatim(0)).toBe("0");
    expect(verbatim(10.5)).toBe("10.5");
  });
});
