// View model: the single source for everything the panels render.
// Live values enter only through update/read_ack/write_ack messages.

import { ChannelMeta, DirectoryDoc, Severity, UpdateMsg } from "./protocol.js";

export const TREND_CAPACITY = 600;
export const STALE_SCAN_PERIODS = 5;
const NS_PER_S = 1e9;

export interface LiveValue {
  val: number;
  raw: number;
  ts: number; // virtual-time ns from the source message
  sev: Severity;
}

export interface TrendPoint {
  ts: number;
  val: number;
}

export interface PendingWrite {
  entered: number;
  state: "pending" | "applied" | "error";
  applied?: number;
  error?: string;
}

export class ViewModel {
  directory: DirectoryDoc | null = null;
  selectedDb: string | null = null;
  meta = new Map<string, ChannelMeta>(); // "db:name" -> metadata
  live = new Map<string, LiveValue>();
  trends = new Map<string, TrendPoint[]>();
  pendingWrites = new Map<string, PendingWrite>();
  latestTs = 0; // freshest virtual time seen on any message

  private listeners = new Set<() => void>();

  onChange(cb: () => void): void {
    this.listeners.add(cb);
  }

  notify(): void {
    for (const cb of this.listeners) cb();
  }

  setDirectory(doc: DirectoryDoc): void {
    this.directory = doc;
    this.notify();
  }

  setChannels(db: string, metas: ChannelMeta[]): void {
    for (const key of [...this.meta.keys()]) {
      if (key.startsWith(db + ":")) this.meta.delete(key);
    }
    for (const m of metas) this.meta.set(`${db}:${m.name}`, m);
    this.notify();
  }

  channelsOf(db: string): string[] {
    return [...this.meta.keys()].filter((k) => k.startsWith(db + ":")).sort();
  }

  applyReading(ch: string, r: { val: number; raw: number; ts: number; sev: Severity }): void {
    this.live.set(ch, { val: r.val, raw: r.raw, ts: r.ts, sev: r.sev });
    if (r.ts > this.latestTs) this.latestTs = r.ts;
    const trend = this.trends.get(ch);
    if (trend !== undefined) {
      trend.push({ ts: r.ts, val: r.val });
      if (trend.length > TREND_CAPACITY) {
        trend.splice(0, trend.length - TREND_CAPACITY);
      }
    }
    this.notify();
  }

  applyUpdate(u: UpdateMsg): void {
    this.applyReading(u.ch, u);
  }

  trackTrend(ch: string): void {
    if (!this.trends.has(ch)) this.trends.set(ch, []);
  }

  dropTrend(ch: string): void {
    this.trends.delete(ch);
  }

  // Stale: no fresh sample within 5 scan periods of the newest virtual time
  // seen anywhere. On-demand channels (no scan period) never go stale.
  isStale(ch: string): boolean {
    const meta = this.meta.get(ch);
    const live = this.live.get(ch);
    if (!meta || !live || meta.scan_period == null) return false;
    return this.latestTs - live.ts > STALE_SCAN_PERIODS * meta.scan_period * NS_PER_S;
  }

  beginWrite(ch: string, entered: number): void {
    this.pendingWrites.set(ch, { entered, state: "pending" });
    this.notify();
  }

  finishWrite(ch: string, applied: number): void {
    const p = this.pendingWrites.get(ch);
    this.pendingWrites.set(ch, {
      entered: p?.entered ?? applied, state: "applied", applied,
    });
    this.notify();
  }

  failWrite(ch: string, error: string): void {
    const p = this.pendingWrites.get(ch);
    this.pendingWrites.set(ch, {
      entered: p?.entered ?? 0, state: "error", error,
    });
    this.notify();
  }
}

export function formatValue(val: number, units: string): string {
  const magnitude = Math.abs(val);
  let text: string;
  if (magnitude !== 0 && (magnitude < 0.001 || magnitude >= 1e7)) {
    text = val.toExponential(4);
  } else {
    text = val.toFixed(4).replace(/\.?0+$/, "");
    if (text === "" || text === "-") text = "0";
  }
  return units ? `${text} ${units}` : text;
}

export function formatVirtualTime(tsNs: number): string {
  return tsNs === 0 ? "never" : `${(tsNs / NS_PER_S).toFixed(3)} s`;
}
