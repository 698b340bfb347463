// Wire protocol types shared with the gateway. One JSON object per
// WebSocket text frame; requests carry an integer id echoed by exactly one
// ack or err reply, pushed updates carry none.

export const PROTOCOL_VERSION = 1;

export type Severity = "NONE" | "MINOR" | "MAJOR";

export interface UpdateMsg {
  t: "update";
  ch: string;
  val: number;
  raw: number;
  ts: number;
  sev: Severity;
  ovf?: boolean;
}

export interface ErrMsg {
  t: "err";
  id?: number;
  code: string;
  msg?: string;
}

export interface ChannelMeta {
  name: string;
  direction: "readback" | "setpoint";
  units: string;
  gain: number;
  offset: number;
  scan_period: number | null;
  limits?: { lolo: number; low: number; high: number; hihi: number } | null;
  binding?: Record<string, unknown>;
  val?: number;
  raw?: number;
  ts?: number;
  sev?: Severity;
}

export type ServerMsg = Record<string, unknown> & { t: string };

export interface DirectoryDoc {
  version: number;
  databases: Record<string, { node: string; host: string; port: number }>;
  nodes: Record<string, { host: string; port: number; gateway_port?: number | null }>;
  topology: {
    highway?: { node: string; crates: number[]; clock_hz?: number };
    local_crates?: Record<string, number[]>;
  };
}

// ---- outbound schema guard -------------------------------------------------
// The console must never emit anything outside the protocol schema; every
// outgoing message funnels through validateOutbound, and the test suite
// re-validates recorded sessions.

const isUint = (v: unknown): v is number =>
  typeof v === "number" && Number.isInteger(v) && v >= 0;

const isFinite_ = (v: unknown): v is number =>
  typeof v === "number" && Number.isFinite(v);

const isName = (v: unknown): v is string => typeof v === "string" && v.length > 0;

const isChannelAddr = (v: unknown): v is string =>
  typeof v === "string" && /^[^:]+:.+$/.test(v);

type FieldSpec = Record<string, (v: unknown) => boolean>;

const OUTBOUND_SCHEMA: Record<string, { required: FieldSpec; optional?: FieldSpec }> = {
  hello: { required: { id: isUint, ver: (v) => v === PROTOCOL_VERSION } },
  list: { required: { id: isUint, db: isName } },
  read: { required: { id: isUint, ch: isChannelAddr } },
  write: { required: { id: isUint, ch: isChannelAddr, val: isFinite_ } },
  sub: { required: { id: isUint, ch: isChannelAddr } },
  unsub: { required: { id: isUint, ch: isChannelAddr } },
  camac: {
    required: {
      id: isUint,
      crate: (v) => isUint(v) && (v as number) >= 1 && (v as number) <= 62,
      station: (v) => isUint(v) && (v as number) >= 1 && (v as number) <= 23,
      sub: (v) => isUint(v) && (v as number) <= 15,
      fn: (v) => isUint(v) && (v as number) <= 31,
    },
    optional: { data: (v) => isUint(v) && (v as number) < 2 ** 24 },
  },
};

export function validateOutbound(msg: Record<string, unknown>): void {
  const t = msg["t"];
  if (typeof t !== "string" || !(t in OUTBOUND_SCHEMA)) {
    throw new Error(`console must not send message type ${JSON.stringify(t)}`);
  }
  const spec = OUTBOUND_SCHEMA[t];
  for (const [key, check] of Object.entries(spec.required)) {
    if (!(key in msg)) throw new Error(`${t}: missing required key '${key}'`);
    if (!check(msg[key])) throw new Error(`${t}: invalid value for '${key}'`);
  }
  for (const key of Object.keys(msg)) {
    if (key === "t" || key in spec.required) continue;
    const opt = spec.optional?.[key];
    if (opt === undefined) throw new Error(`${t}: key '${key}' not in schema`);
    if (!opt(msg[key])) throw new Error(`${t}: invalid value for '${key}'`);
  }
}

export function parseServerMsg(raw: string): ServerMsg {
  const msg = JSON.parse(raw);
  if (typeof msg !== "object" || msg === null || typeof msg.t !== "string") {
    throw new Error("malformed server message");
  }
  return msg as ServerMsg;
}

export function isUpdate(msg: ServerMsg): msg is UpdateMsg & ServerMsg {
  return msg.t === "update";
}
