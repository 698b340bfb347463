// Console bootstrap: one gateway WebSocket, a directory poller, and four
// panels (channels, tunes, migration, topology) over a shared view model.

import { AdminApi } from "./admin.js";
import { GatewayClient } from "./client.js";
import { ChannelMeta, ServerMsg } from "./protocol.js";
import { ViewModel } from "./state.js";
import { ChannelTable } from "./table.js";
import { TopologyView } from "./topology.js";
import { TrendChart } from "./trend.js";
import { MigrationPanel, TunePanel } from "./panels.js";

const DIRECTORY_POLL_MS = 2000;

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/api/v1/ws`;
}

export class App {
  vm = new ViewModel();
  client: GatewayClient;
  api: AdminApi;
  table: ChannelTable;
  trend: TrendChart;
  topology: TopologyView;
  tunes: TunePanel;
  migration: MigrationPanel;
  private renderQueued = false;

  constructor(client?: GatewayClient, api?: AdminApi) {
    this.client = client ?? new GatewayClient(wsUrl());
    this.api = api ?? new AdminApi("");
    this.table = new ChannelTable(byId("channel-table"), this.vm, this.client);
    this.trend = new TrendChart(
      byId("trend-canvas") as HTMLCanvasElement, byId("trend-label"), this.vm);
    this.topology = new TopologyView(byId("topology"));
    this.tunes = new TunePanel(byId("tunes"), this.api);
    this.migration = new MigrationPanel(byId("migration"), this.api);

    this.table.onSelect = (ch) => {
      this.trend.show(this.trend.channel === ch ? null : ch);
    };
    this.vm.onChange(() => this.queueRender());
    this.client.onUpdate((u) => this.vm.applyUpdate(u));
    this.client.onState((s) => {
      const banner = byId("conn-banner");
      banner.dataset.state = s;
      banner.textContent = s === "up" ? "gateway connected"
        : s === "connecting" ? "connecting to gateway..."
        : "gateway unreachable - retrying";
      if (s === "up") void this.refreshDirectory();
    });
  }

  start(): void {
    this.client.connect();
    this.wireTabs();
    void this.refreshDirectory();
    setInterval(() => void this.pollDirectory(), DIRECTORY_POLL_MS);
  }

  private wireTabs(): void {
    for (const button of document.querySelectorAll<HTMLButtonElement>("[data-tab]")) {
      button.onclick = () => {
        for (const panel of document.querySelectorAll<HTMLElement>(".panel")) {
          panel.hidden = panel.id !== button.dataset.tab;
        }
        for (const other of document.querySelectorAll("[data-tab]")) {
          other.classList.toggle("active", other === button);
        }
        if (button.dataset.tab === "tunes") void this.tunes.render();
        if (button.dataset.tab === "migration") this.migration.render();
      };
    }
  }

  async refreshDirectory(): Promise<void> {
    try {
      const doc = await this.api.directory();
      const changed = this.vm.directory?.version !== doc.version;
      this.vm.setDirectory(doc);
      if (changed) {
        this.topology.render(doc);
        this.renderDbSelector();
        if (this.vm.selectedDb === null) {
          const first = Object.keys(doc.databases).sort()[0];
          if (first) await this.selectDb(first);
        }
      }
    } catch {
      // gateway down; the banner already says so
    }
  }

  private async pollDirectory(): Promise<void> {
    await this.refreshDirectory();
  }

  private renderDbSelector(): void {
    const select = byId("db-select") as HTMLSelectElement;
    const current = this.vm.selectedDb;
    select.textContent = "";
    for (const db of Object.keys(this.vm.directory?.databases ?? {}).sort()) {
      const option = document.createElement("option");
      option.value = db;
      option.textContent = db;
      option.selected = db === current;
      select.appendChild(option);
    }
    select.onchange = () => void this.selectDb(select.value);
  }

  async selectDb(db: string): Promise<void> {
    const previous = this.vm.selectedDb;
    if (previous && previous !== db) {
      for (const ch of this.vm.channelsOf(previous)) {
        this.client.unsubscribe(ch).catch(() => undefined);
      }
    }
    this.vm.selectedDb = db;
    const ack = (await this.client.listChannels(db)) as ServerMsg;
    const metas = ack["channels"] as unknown as ChannelMeta[];
    this.vm.setChannels(db, metas);
    for (const m of metas) {
      this.client.subscribe(`${db}:${m.name}`).catch(() => undefined);
    }
    this.queueRender();
  }

  private queueRender(): void {
    if (this.renderQueued) return;
    this.renderQueued = true;
    const schedule = typeof requestAnimationFrame === "function"
      ? requestAnimationFrame
      : (fn: () => void) => setTimeout(fn, 0);
    schedule(() => {
      this.renderQueued = false;
      this.table.render();
      this.trend.render();
    });
  }
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

if (typeof window !== "undefined" && document.getElementById("channel-table")) {
  new App().start();
}
