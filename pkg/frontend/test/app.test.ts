// Operator-flow tests: setpoint round trip, live table updates, and the
// topology view following a migration, all against a scripted fake gateway.

import { beforeEach, describe, expect, it } from "vitest";

import { AdminApi } from "../src/admin.js";
import { App } from "../src/app.js";
import { GatewayClient } from "../src/client.js";
import { DirectoryDoc } from "../src/protocol.js";
import { FakeGateway, flushMicrotasks } from "./fake_gateway.js";

const SKELETON = `
  <div id="conn-banner"></div>
  <nav>
    <button data-tab="channels"></button>
    <button data-tab="tunes"></button>
    <button data-tab="migration"></button>
    <button data-tab="topology-panel"></button>
    <select id="db-select"></select>
  </nav>
  <section id="channels" class="panel">
    <div id="channel-table"></div>
    <div id="trend-label"></div>
    <canvas id="trend-canvas" width="100" height="50"></canvas>
  </section>
  <section id="tunes" class="panel"></section>
  <section id="migration" class="panel"></section>
  <section id="topology-panel" class="panel"><div id="topology"></div></section>
`;

function directoryDoc(cryoHome: string, version: number): DirectoryDoc {
  return {
    version,
    databases: {
      cryo: { node: cryoHome, host: "127.0.0.1", port: cryoHome === "central" ? 5730 : 5731 },
    },
    nodes: {
      central: { host: "127.0.0.1", port: 5730, gateway_port: 8080 },
      edge: { host: "127.0.0.1", port: 5731, gateway_port: null },
    },
    topology: {
      highway: { node: "central", crates: [1, 2, 3] },
      local_crates: { edge: [19] },
    },
  };
}

class FakeAdmin extends AdminApi {
  doc = directoryDoc("central", 1);

  constructor() {
    super("");
  }

  override directory(): Promise<DirectoryDoc> {
    return Promise.resolve(this.doc);
  }

  override listTunes() {
    return Promise.resolve([]);
  }
}

function renderTick(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 30));
}

let gw: FakeGateway;
let admin: FakeAdmin;
let app: App;

beforeEach(async () => {
  document.body.innerHTML = SKELETON;
  gw = new FakeGateway();
  gw.metas.set("cryo", [
    { name: "temp1", direction: "readback", units: "K", gain: 1e-5,
      offset: 0, scan_period: 1.0 },
    { name: "heater1", direction: "setpoint", units: "%", gain: 1e-4,
      offset: 0, scan_period: null },
  ]);
  gw.writeGain = 1e-4;
  gw.channels.set("cryo:temp1", { val: 4.5, raw: 450000, ts: 1e9, sev: "NONE" });
  gw.channels.set("cryo:heater1", { val: 0, raw: 0, ts: 1e9, sev: "NONE" });
  admin = new FakeAdmin();
  app = new App(new GatewayClient("ws://test", gw.connect, 1), admin);
  app.client.connect();
  await flushMicrotasks();
  await app.refreshDirectory();
  await flushMicrotasks();
  await renderTick();
});

function cellTextFor(ch: string): string {
  const row = document.querySelector(`tr[data-ch="${ch}"]`);
  return row?.querySelector(".ch-value")?.textContent ?? "";
}

describe("channel table", () => {
  it("renders one row per channel with live values", () => {
    expect(document.querySelectorAll("#channel-table tbody tr")).toHaveLength(2);
    expect(cellTextFor("cryo:temp1")).toBe("4.5 K");
  });

  it("shows a plant change as soon as its update arrives", async () => {
    gw.pushUpdate("cryo:temp1", 4.75, 2e9);
    await renderTick();
    expect(cellTextFor("cryo:temp1")).toBe("4.75 K");
  });

  it("marks MAJOR severity rows", async () => {
    gw.pushUpdate("cryo:temp1", 9.0, 2e9, "MAJOR");
    await renderTick();
    const row = document.querySelector('tr[data-ch="cryo:temp1"]')!;
    expect(row.className).toContain("sev-major");
    expect(row.querySelector(".badge-major")).not.toBeNull();
  });
});

describe("setpoint entry", () => {
  it("renders the acknowledged applied value, not the raw entry", async () => {
    await app.table.submit("cryo:heater1", "2.4999");
    await renderTick();
    const note = document.querySelector('tr[data-ch="cryo:heater1"] .write-note')!;
    // 2.4999 quantized on the 1e-4 grid
    expect(note.textContent).toMatch(/^applied 2\.4999/);
    expect(cellTextFor("cryo:heater1")).toMatch(/^2\.4999/);
  });

  it("rejects non-numeric entries client-side without sending", async () => {
    const sentBefore = gw.sockets[0].sent.length;
    await app.table.submit("cryo:heater1", "abc");
    await renderTick();
    expect(gw.sockets[0].sent.length).toBe(sentBefore);
    const note = document.querySelector('tr[data-ch="cryo:heater1"] .write-note')!;
    expect(note.textContent).toBe("not a number");
  });

  it("surfaces protocol errors inline", async () => {
    gw.overrides.set("write", (sock, msg) => {
      sock.push({ t: "err", id: msg["id"], code: "READ_ONLY", msg: "nope" });
    });
    await app.table.submit("cryo:heater1", "5");
    await renderTick();
    const note = document.querySelector('tr[data-ch="cryo:heater1"] .write-note')!;
    expect(note.textContent).toBe("READ_ONLY");
  });
});

describe("trend", () => {
  it("buffers updates for the selected channel only", async () => {
    app.trend.show("cryo:temp1");
    gw.pushUpdate("cryo:temp1", 4.6, 2e9);
    gw.pushUpdate("cryo:temp1", 4.7, 3e9);
    await renderTick();
    expect(app.vm.trends.get("cryo:temp1")).toHaveLength(2);
    expect(app.vm.trends.has("cryo:heater1")).toBe(false);
  });
});

describe("topology view", () => {
  it("moves the database icon when the directory version changes", async () => {
    expect(document.querySelector('g[data-node="central"] rect[data-db="cryo"]'))
      .not.toBeNull();
    expect(document.querySelector('g[data-node="edge"] rect[data-db="cryo"]'))
      .toBeNull();

    admin.doc = directoryDoc("edge", 2);  // a migration committed
    await app.refreshDirectory();
    await renderTick();

    expect(document.querySelector('g[data-node="edge"] rect[data-db="cryo"]'))
      .not.toBeNull();
    expect(document.querySelector('g[data-node="central"] rect[data-db="cryo"]'))
      .toBeNull();
  });

  it("shows the highway crates on the central node", () => {
    const crates = document.querySelectorAll("#topology .crate-box");
    expect(crates.length).toBe(4); // 3 highway + 1 local
  });
});

describe("session schema discipline", () => {
  it("every frame the console sent is schema-valid", async () => {
    await app.table.submit("cryo:heater1", "7.5");
    const { validateOutbound } = await import("../src/protocol.js");
    const recorded = gw.sockets.flatMap((s) => s.sent);
    expect(recorded.length).toBeGreaterThan(3);
    for (const msg of recorded) {
      expect(() => validateOutbound(msg)).not.toThrow();
    }
  });
});
