/** Live view behavior: one chart point per WS record, handover flashes,
 * ring-buffer capacity, and reconnect gap markers. */

import { describe, expect, it } from "vitest";

import type { RecordRow } from "../src/api.js";
import { LIVE_CAPACITY, LiveViewModel } from "../src/viewmodel.js";
import { LiveSocket, type SocketLike } from "../src/ws.js";

function row(i: number, overrides: Partial<RecordRow> = {}): RecordRow {
  return {
    timestamp_ms: String(1_700_000_000_000 + i * 1000),
    direction: "downlink",
    transport: "tcp",
    bytes: "2500000",
    bits_per_second: "20000000.0",
    rate_origin: "client_measured",
    mean_delay_ms: "",
    min_delay_ms: "",
    max_delay_ms: "",
    packet_count: "",
    rsrp_dbm: "-100.0",
    rsrq_db: "-10.0",
    rssnr_db: "5.0",
    csq: "2",
    serving_pci: "263",
    cqi: "",
    earfcn: "1300",
    neighbors: "",
    lat_deg: "",
    lon_deg: "",
    alt_m: "",
    satellites: "",
    speed_mps: "",
    accel_mps2: "",
    distance_m: "",
    ...overrides,
  };
}

describe("live view model", () => {
  it("gains exactly one chart point per record in a scripted 10 s session", () => {
    const model = new LiveViewModel();
    for (let second = 0; second < 10; second++) {
      model.onRecord(row(second));
      expect(model.recordCount).toBe(second + 1);
      expect(model.throughputMbps.length).toBe(second + 1);
      expect(model.delayMs.length).toBe(second + 1);
      expect(model.rsrpDbm.length).toBe(second + 1);
    }
    const series = model.series(model.throughputMbps);
    expect(series).toHaveLength(10);
    expect(series[0][1]).toBeCloseTo(20);
  });

  it("plots gaps (null) where a record has no sample", () => {
    const model = new LiveViewModel();
    model.onRecord(row(0, { bits_per_second: "", direction: "" }));
    expect(model.series(model.throughputMbps)).toEqual([
      [1_700_000_000_000, null],
    ]);
  });

  it("raises a handover flash when the serving PCI changes", () => {
    const model = new LiveViewModel();
    model.onRecord(row(0, { serving_pci: "263" }));
    expect(model.handoverCount).toBe(0);
    model.onRecord(row(1, { serving_pci: "56" }));
    expect(model.handoverCount).toBe(1);
    expect(model.lastHandover).toMatchObject({ fromPci: 263, toPci: 56 });
    model.onRecord(row(2, { serving_pci: "56" }));
    expect(model.handoverCount).toBe(1);
  });

  it("never exceeds the ring capacity", () => {
    const model = new LiveViewModel();
    for (let i = 0; i < LIVE_CAPACITY + 50; i++) model.onRecord(row(i));
    expect(model.throughputMbps.length).toBe(LIVE_CAPACITY);
    const series = model.series(model.throughputMbps);
    expect(series[0][0]).toBe(1_700_000_000_000 + 50 * 1000);
  });

  it("delay points only exist when packets were measured", () => {
    const model = new LiveViewModel();
    model.onRecord(row(0, {
      packet_count: "120", mean_delay_ms: "51.5",
      min_delay_ms: "50.0", max_delay_ms: "55.0",
    }));
    model.onRecord(row(1, { packet_count: "0", mean_delay_ms: "0.0" }));
    expect(model.series(model.delayMs)).toEqual([
      [1_700_000_000_000, 51.5],
      [1_700_000_001_000, null],
    ]);
  });
});

class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  closed = false;
  close(): void {
    this.closed = true;
  }
}

describe("live socket", () => {
  it("delivers messages and marks gaps on reconnect", () => {
    const sockets: FakeSocket[] = [];
    const pending: Array<() => void> = [];
    const messages: string[] = [];
    let gaps = 0;
    new LiveSocket(
      "ws://agent/sessions/1/live",
      {
        onMessage: (text) => messages.push(text),
        onGap: () => {
          gaps += 1;
        },
      },
      () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
      (fn) => pending.push(fn),
    );
    sockets[0].onopen?.();
    sockets[0].onmessage?.({ data: "r1" });
    expect(messages).toEqual(["r1"]);
    expect(gaps).toBe(0);

    sockets[0].onclose?.(); // connection drops
    expect(pending).toHaveLength(1);
    pending.shift()!(); // scheduled reconnect fires
    expect(sockets).toHaveLength(2);
    sockets[1].onopen?.();
    expect(gaps).toBe(1); // records may be missing: gap marker
    sockets[1].onmessage?.({ data: "r2" });
    expect(messages).toEqual(["r1", "r2"]);
  });

  it("stays closed once closed", () => {
    const sockets: FakeSocket[] = [];
    const socket = new LiveSocket(
      "ws://agent/sessions/1/live",
      { onMessage: () => undefined },
      () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      },
      () => {
        throw new Error("no reconnect after close()");
      },
    );
    socket.close();
    sockets[0].onclose?.();
    expect(sockets).toHaveLength(1);
  });
});
