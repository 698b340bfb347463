// Gateway connection: request/reply correlation over one WebSocket, with
// automatic reconnect and resubscription. All traffic to the plant flows
// through here (and through the schema guard).

import {
  PROTOCOL_VERSION,
  ServerMsg,
  UpdateMsg,
  isUpdate,
  parseServerMsg,
  validateOutbound,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnState = "connecting" | "up" | "down";

interface Pending {
  resolve: (msg: ServerMsg) => void;
  reject: (err: Error) => void;
}

export class ProtocolErr extends Error {
  constructor(public code: string, msg: string) {
    super(msg ? `${code}: ${msg}` : code);
  }
}

export class GatewayClient {
  private sock: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private subs = new Set<string>();
  private updateListeners = new Set<(u: UpdateMsg) => void>();
  private stateListeners = new Set<(s: ConnState) => void>();
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;
  state: ConnState = "down";

  constructor(
    private url: string,
    private makeSocket: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
    private reconnectDelayMs = 1000,
  ) {}

  connect(): void {
    this.closed = false;
    this.setState("connecting");
    const sock = this.makeSocket(this.url);
    this.sock = sock;
    sock.onopen = () => {
      void this.handshake();
    };
    sock.onmessage = (ev) => this.dispatch(ev.data);
    sock.onclose = () => this.dropped();
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer) clearTimeout(this.reconnectTimer);
    this.sock?.close();
    this.setState("down");
  }

  onUpdate(cb: (u: UpdateMsg) => void): void {
    this.updateListeners.add(cb);
  }

  onState(cb: (s: ConnState) => void): void {
    this.stateListeners.add(cb);
  }

  private setState(s: ConnState): void {
    this.state = s;
    for (const cb of this.stateListeners) cb(s);
  }

  private async handshake(): Promise<void> {
    try {
      await this.request({ t: "hello", ver: PROTOCOL_VERSION });
      this.setState("up");
      // re-establish every live subscription after a reconnect
      for (const ch of this.subs) {
        this.request({ t: "sub", ch }).catch(() => undefined);
      }
    } catch {
      this.sock?.close();
    }
  }

  private dropped(): void {
    for (const p of this.pending.values()) {
      p.reject(new ProtocolErr("DISCONNECTED", "gateway connection lost"));
    }
    this.pending.clear();
    this.setState("down");
    if (!this.closed) {
      this.reconnectTimer = setTimeout(() => this.connect(), this.reconnectDelayMs);
    }
  }

  private dispatch(raw: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMsg(raw);
    } catch {
      return; // not ours to crash on; the gateway validates its side
    }
    if (isUpdate(msg)) {
      for (const cb of this.updateListeners) cb(msg as UpdateMsg);
      return;
    }
    const id = msg["id"];
    if (typeof id === "number" && this.pending.has(id)) {
      const p = this.pending.get(id)!;
      this.pending.delete(id);
      if (msg.t === "err") {
        p.reject(new ProtocolErr(String(msg["code"] ?? "ERR"), String(msg["msg"] ?? "")));
      } else {
        p.resolve(msg);
      }
    }
  }

  request(body: Record<string, unknown>): Promise<ServerMsg> {
    const id = this.nextId++;
    const msg = { ...body, id };
    validateOutbound(msg);
    return new Promise((resolve, reject) => {
      if (!this.sock) {
        reject(new ProtocolErr("DISCONNECTED", "not connected"));
        return;
      }
      this.pending.set(id, { resolve, reject });
      try {
        this.sock.send(JSON.stringify(msg));
      } catch (err) {
        this.pending.delete(id);
        reject(err as Error);
      }
    });
  }

  async subscribe(ch: string): Promise<void> {
    this.subs.add(ch);
    await this.request({ t: "sub", ch });
  }

  async unsubscribe(ch: string): Promise<void> {
    this.subs.delete(ch);
    await this.request({ t: "unsub", ch });
  }

  listChannels(db: string): Promise<ServerMsg> {
    return this.request({ t: "list", db });
  }

  write(ch: string, val: number): Promise<ServerMsg> {
    return this.request({ t: "write", ch, val });
  }

  read(ch: string): Promise<ServerMsg> {
    return this.request({ t: "read", ch });
  }
}
