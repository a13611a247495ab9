/** View state for the running-experiment screen.
 *
 * One WS record appends exactly one point to every live series (value
 * null where the record carries no sample, drawn as a gap). Numbers are
 * parsed from the record's CSV strings for plotting only; nothing is
 * recomputed.
 */

import type { RecordRow } from "./api.js";
import { RingBuffer } from "./ringbuffer.js";

export const LIVE_CAPACITY = 300;

export interface LivePoint {
  t: number;
  v: number | null;
}

export interface HandoverFlash {
  fromPci: number;
  toPci: number;
  atMs: number;
}

function numeric(row: RecordRow, key: string): number | null {
  const raw = row[key];
  if (raw === undefined || raw === "") return null;
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}

export class LiveViewModel {
  readonly throughputMbps = new RingBuffer<LivePoint>(LIVE_CAPACITY);
  readonly delayMs = new RingBuffer<LivePoint>(LIVE_CAPACITY);
  readonly rsrpDbm = new RingBuffer<LivePoint>(LIVE_CAPACITY);
  recordCount = 0;
  gapCount = 0;
  currentPci: number | null = null;
  lastHandover: HandoverFlash | null = null;
  handoverCount = 0;
  lastRow: RecordRow | null = null;

  onRecord(row: RecordRow): void {
    this.recordCount += 1;
    this.lastRow = row;
    const t = numeric(row, "timestamp_ms") ?? this.recordCount * 1000;
    const bps = numeric(row, "bits_per_second");
    this.throughputMbps.push({ t, v: bps === null ? null : bps / 1e6 });
    const packets = numeric(row, "packet_count");
    const delay = packets ? numeric(row, "mean_delay_ms") : null;
    this.delayMs.push({ t, v: delay });
    this.rsrpDbm.push({ t, v: numeric(row, "rsrp_dbm") });
    const pci = numeric(row, "serving_pci");
    if (pci !== null) {
      if (this.currentPci !== null && pci !== this.currentPci) {
        this.lastHandover = { fromPci: this.currentPci, toPci: pci, atMs: t };
        this.handoverCount += 1;
      }
      this.currentPci = pci;
    }
  }

  onGap(): void {
    this.gapCount += 1;
    const t = this.throughputMbps.last()?.t ?? 0;
    for (const series of [this.throughputMbps, this.delayMs, this.rsrpDbm]) {
      series.push({ t, v: null });
    }
  }

  series(buffer: RingBuffer<LivePoint>): [number, number | null][] {
    return buffer.toArray().map((p) => [p.t, p.v]);
  }
}
