import { describe, expect, it } from "vitest";

import { GatewayClient, ProtocolErr } from "../src/client.js";
import { validateOutbound } from "../src/protocol.js";
import { FakeGateway, flushMicrotasks } from "./fake_gateway.js";

function makeClient(gw: FakeGateway): GatewayClient {
  return new GatewayClient("ws://test/api/v1/ws", gw.connect, 1);
}

describe("gateway client", () => {
  it("handshakes and reports the connection up", async () => {
    const gw = new FakeGateway();
    const client = makeClient(gw);
    const states: string[] = [];
    client.onState((s) => states.push(s));
    client.connect();
    await flushMicrotasks();
    expect(client.state).toBe("up");
    expect(states).toContain("connecting");
    expect(gw.sockets[0].sent[0]).toMatchObject({ t: "hello", ver: 1 });
  });

  it("correlates replies by id", async () => {
    const gw = new FakeGateway();
    gw.channels.set("cryo:temp1", { val: 4.5, raw: 450000, ts: 7, sev: "NONE" });
    const client = makeClient(gw);
    client.connect();
    await flushMicrotasks();
    const [a, b] = await Promise.all([
      client.read("cryo:temp1"),
      client.read("cryo:temp1"),
    ]);
    expect(a["val"]).toBe(4.5);
    expect(b["val"]).toBe(4.5);
    expect(a["id"]).not.toBe(b["id"]);
  });

  it("rejects err replies with their code", async () => {
    const gw = new FakeGateway();
    const client = makeClient(gw);
    client.connect();
    await flushMicrotasks();
    await expect(client.read("cryo:ghost")).rejects.toThrowError(/NO_SUCH_CHANNEL/);
    await expect(client.read("cryo:ghost")).rejects.toBeInstanceOf(ProtocolErr);
  });

  it("dispatches updates to listeners", async () => {
    const gw = new FakeGateway();
    const client = makeClient(gw);
    const seen: number[] = [];
    client.onUpdate((u) => seen.push(u.val));
    client.connect();
    await flushMicrotasks();
    gw.pushUpdate("cryo:temp1", 4.75, 1e9);
    expect(seen).toEqual([4.75]);
  });

  it("reconnects and resubscribes after a drop", async () => {
    const gw = new FakeGateway();
    gw.channels.set("cryo:temp1", { val: 4.5, raw: 450000, ts: 7, sev: "NONE" });
    const client = makeClient(gw);
    client.connect();
    await flushMicrotasks();
    await client.subscribe("cryo:temp1");

    gw.sockets[0].dropFromServer();
    expect(client.state).toBe("down");
    await new Promise((r) => setTimeout(r, 5)); // reconnect timer (1 ms)
    await flushMicrotasks();
    expect(client.state).toBe("up");
    const resubs = gw.sockets[1].sent.filter((m) => m["t"] === "sub");
    expect(resubs).toHaveLength(1);
    expect(resubs[0]["ch"]).toBe("cryo:temp1");
  });

  it("fails pending requests when the connection drops", async () => {
    const gw = new FakeGateway();
    gw.overrides.set("read", () => undefined); // swallow: never reply
    const client = makeClient(gw);
    client.connect();
    await flushMicrotasks();
    const promise = client.read("cryo:temp1");
    gw.sockets[0].dropFromServer();
    await expect(promise).rejects.toThrowError(/DISCONNECTED/);
    client.close();
  });

  it("emits only schema-valid messages over a whole session", async () => {
    const gw = new FakeGateway();
    gw.metas.set("cryo", [
      { name: "temp1", direction: "readback", units: "K", gain: 1e-5,
        offset: 0, scan_period: 1.0 },
      { name: "heater1", direction: "setpoint", units: "%", gain: 1e-4,
        offset: 0, scan_period: null },
    ]);
    gw.channels.set("cryo:heater1", { val: 0, raw: 0, ts: 1, sev: "NONE" });
    const client = makeClient(gw);
    client.connect();
    await flushMicrotasks();
    await client.listChannels("cryo");
    await client.subscribe("cryo:temp1");
    await client.write("cryo:heater1", 12.5);
    await client.read("cryo:heater1");
    await client.unsubscribe("cryo:temp1");
    const recorded = gw.sockets.flatMap((s) => s.sent);
    expect(recorded.length).toBeGreaterThanOrEqual(6);
    for (const msg of recorded) {
      expect(() => validateOutbound(msg)).not.toThrow();
    }
  });
});
