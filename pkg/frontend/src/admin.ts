// Thin HTTP client for the gateway's admin endpoints.

import { DirectoryDoc } from "./protocol.js";

export interface TuneInfo {
  name: string;
  created: string;
}

export interface RestoreRow {
  channel: string;
  requested: number;
  applied: number | null;
  status: string;
}

export interface MigrationEvent {
  step?: number;
  name?: string;
  status?: string;
  done?: boolean;
  report?: Record<string, unknown>;
  error?: { code: string; msg: string };
}

export class AdminApi {
  constructor(private base: string = "") {}

  async directory(): Promise<DirectoryDoc> {
    const resp = await fetch(`${this.base}/api/v1/directory`);
    if (!resp.ok) throw new Error(`directory fetch failed: ${resp.status}`);
    return (await resp.json()) as DirectoryDoc;
  }

  async listTunes(): Promise<TuneInfo[]> {
    const resp = await fetch(`${this.base}/api/v1/tunes`);
    if (!resp.ok) throw new Error(`tune list failed: ${resp.status}`);
    return (await resp.json()) as TuneInfo[];
  }

  async saveTune(name: string): Promise<Record<string, unknown>> {
    const resp = await fetch(`${this.base}/api/v1/tunes`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name }),
    });
    const body = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) throw new Error(`${body["code"]}: ${body["msg"]}`);
    return body;
  }

  async restoreTune(name: string): Promise<RestoreRow[]> {
    const resp = await fetch(`${this.base}/api/v1/tunes/${encodeURIComponent(name)}/restore`, {
      method: "POST",
    });
    const body = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) throw new Error(`${body["code"]}: ${body["msg"]}`);
    return body["report"] as RestoreRow[];
  }

  // POST the plan and surface each ND-JSON progress line as it streams in.
  async runMigration(
    plan: Record<string, unknown>,
    onEvent: (e: MigrationEvent) => void,
  ): Promise<void> {
    const resp = await fetch(`${this.base}/api/v1/migrations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(plan),
    });
    if (!resp.ok || resp.body === null) {
      throw new Error(`migration request failed: ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let nl;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        if (line) onEvent(JSON.parse(line) as MigrationEvent);
      }
    }
    if (buffer.trim()) onEvent(JSON.parse(buffer) as MigrationEvent);
  }
}
