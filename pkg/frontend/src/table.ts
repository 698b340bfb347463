// Live channel table: one row per channel of the selected database, with
// severity colors, staleness flags, and setpoint entry showing the applied
// (quantized) value from the write_ack.

import { GatewayClient, ProtocolErr } from "./client.js";
import { formatValue, formatVirtualTime, ViewModel } from "./state.js";

export class ChannelTable {
  onSelect: ((ch: string) => void) | null = null;

  constructor(
    private root: HTMLElement,
    private vm: ViewModel,
    private client: GatewayClient,
  ) {}

  render(): void {
    const db = this.vm.selectedDb;
    this.root.textContent = "";
    if (!db) return;
    const table = document.createElement("table");
    table.className = "channel-table";
    table.innerHTML =
      "<thead><tr><th>channel</th><th>value</th><th>severity</th>" +
      "<th>timestamp</th><th>setpoint</th></tr></thead>";
    const body = document.createElement("tbody");
    for (const ch of this.vm.channelsOf(db)) {
      body.appendChild(this.row(ch));
    }
    table.appendChild(body);
    this.root.appendChild(table);
  }

  private row(ch: string): HTMLTableRowElement {
    const meta = this.vm.meta.get(ch)!;
    const live = this.vm.live.get(ch);
    const tr = document.createElement("tr");
    tr.dataset.ch = ch;
    const sev = live?.sev ?? "NONE";
    tr.className = `sev-${sev.toLowerCase()}`;
    if (this.vm.isStale(ch)) tr.classList.add("stale");

    const name = document.createElement("td");
    name.textContent = meta.name;
    name.className = "ch-name";
    name.onclick = () => this.onSelect?.(ch);

    const value = document.createElement("td");
    value.className = "ch-value";
    value.textContent = live ? formatValue(live.val, meta.units) : "-";
    if (this.vm.isStale(ch)) value.textContent += " (stale)";

    const sevCell = document.createElement("td");
    sevCell.innerHTML = `<span class="badge badge-${sev.toLowerCase()}">${sev}</span>`;

    const ts = document.createElement("td");
    ts.className = "ch-ts";
    ts.textContent = live ? formatVirtualTime(live.ts) : "-";

    const setpoint = document.createElement("td");
    if (meta.direction === "setpoint") {
      setpoint.appendChild(this.setpointControls(ch));
    } else {
      setpoint.textContent = "";
    }

    tr.append(name, value, sevCell, ts, setpoint);
    return tr;
  }

  private setpointControls(ch: string): HTMLElement {
    const wrap = document.createElement("span");
    wrap.className = "setpoint";
    const input = document.createElement("input");
    input.type = "text";
    input.size = 8;
    input.dataset.ch = ch;
    const pending = this.vm.pendingWrites.get(ch);
    if (pending?.state === "pending") input.value = String(pending.entered);
    if (pending?.state === "error") input.value = String(pending.entered);
    const button = document.createElement("button");
    button.textContent = pending?.state === "pending" ? "..." : "apply";
    button.disabled = pending?.state === "pending";
    const note = document.createElement("span");
    note.className = "write-note";
    if (pending?.state === "applied") {
      note.textContent = `applied ${pending.applied}`;
    } else if (pending?.state === "error") {
      note.textContent = pending.error ?? "error";
      note.classList.add("error");
    }
    button.onclick = () => void this.submit(ch, input.value);
    input.onkeydown = (ev) => {
      if ((ev as KeyboardEvent).key === "Enter") void this.submit(ch, input.value);
    };
    wrap.append(input, button, note);
    return wrap;
  }

  // Client-side validation: a non-numeric entry never reaches the wire.
  async submit(ch: string, text: string): Promise<void> {
    const value = Number(text);
    if (text.trim() === "" || !Number.isFinite(value)) {
      this.vm.failWrite(ch, "not a number");
      return;
    }
    this.vm.beginWrite(ch, value);
    try {
      const ack = await this.client.write(ch, value);
      this.vm.finishWrite(ch, ack["val"] as number);
    } catch (err) {
      const code = err instanceof ProtocolErr ? err.code : String(err);
      this.vm.failWrite(ch, code);
    }
  }
}
