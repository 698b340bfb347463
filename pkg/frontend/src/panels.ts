// Tune and migration panels: thin forms over the gateway's admin endpoints.

import { AdminApi, MigrationEvent } from "./admin.js";

export class TunePanel {
  constructor(private root: HTMLElement, private api: AdminApi) {}

  async render(): Promise<void> {
    this.root.textContent = "";
    const form = document.createElement("div");
    form.className = "tune-form";
    const input = document.createElement("input");
    input.placeholder = "tune name";
    input.id = "tune-name";
    const save = document.createElement("button");
    save.textContent = "save current setpoints";
    const status = document.createElement("div");
    status.className = "panel-status";
    save.onclick = async () => {
      status.textContent = "saving...";
      try {
        const snap = await this.api.saveTune(input.value.trim());
        const n = (snap["entries"] as unknown[]).length;
        status.textContent = `saved '${snap["tune_name"]}' (${n} setpoints)`;
        await this.renderList(list);
      } catch (err) {
        status.textContent = String(err);
        status.classList.add("error");
      }
    };
    form.append(input, save, status);

    const list = document.createElement("div");
    list.className = "tune-list";
    this.root.append(form, list);
    await this.renderList(list);
  }

  private async renderList(list: HTMLElement): Promise<void> {
    list.textContent = "";
    let tunes;
    try {
      tunes = await this.api.listTunes();
    } catch (err) {
      list.textContent = String(err);
      return;
    }
    if (tunes.length === 0) {
      list.textContent = "no tunes saved yet";
      return;
    }
    for (const tune of tunes) {
      const row = document.createElement("div");
      row.className = "tune-row";
      const label = document.createElement("span");
      label.textContent = `${tune.name} (${tune.created})`;
      const restore = document.createElement("button");
      restore.textContent = "restore";
      const report = document.createElement("div");
      report.className = "restore-report";
      restore.onclick = async () => {
        report.textContent = "restoring...";
        try {
          const rows = await this.api.restoreTune(tune.name);
          report.textContent = "";
          for (const r of rows) {
            const line = document.createElement("div");
            const badge = r.status === "APPLIED" ? "ok"
              : r.status === "SKIPPED" ? "skip" : "err";
            line.innerHTML =
              `<span class="badge badge-${badge}">${r.status}</span> ` +
              `${r.channel} -> ${r.applied ?? "-"}`;
            report.appendChild(line);
          }
        } catch (err) {
          report.textContent = String(err);
        }
      };
      row.append(label, restore, report);
      list.appendChild(row);
    }
  }
}

export class MigrationPanel {
  constructor(private root: HTMLElement, private api: AdminApi) {}

  render(): void {
    this.root.textContent = "";
    const hint = document.createElement("p");
    hint.textContent =
      "Paste a migration plan (database, to_node, interface, mapping) and run it. " +
      "Steps stream below; the topology view follows the directory commit.";
    const plan = document.createElement("textarea");
    plan.id = "migration-plan";
    plan.rows = 12;
    plan.cols = 70;
    plan.placeholder = '{"database": "cryo", "to_node": "edge", "interface": "pci0", ...}';
    const run = document.createElement("button");
    run.textContent = "run migration";
    const progress = document.createElement("ol");
    progress.className = "migration-progress";
    run.onclick = async () => {
      progress.textContent = "";
      let doc: Record<string, unknown>;
      try {
        doc = JSON.parse(plan.value);
      } catch {
        this.addLine(progress, "plan is not valid JSON", "err");
        return;
      }
      run.disabled = true;
      try {
        await this.api.runMigration(doc, (e) => this.onEvent(progress, e));
      } catch (err) {
        this.addLine(progress, String(err), "err");
      } finally {
        run.disabled = false;
      }
    };
    this.root.append(hint, plan, run, progress);
  }

  private onEvent(progress: HTMLElement, e: MigrationEvent): void {
    if (e.step !== undefined) {
      this.addLine(progress, `step ${e.step} ${e.name}: ${e.status}`,
        e.status === "ok" ? "ok" : "err");
    } else if (e.done && e.report) {
      const verify = e.report["verify"] as Record<string, unknown> | undefined;
      const ok = verify ? (verify["all_pass"] as boolean) : false;
      this.addLine(progress,
        `done: directory v${e.report["directory_version"]}, verify ` +
        (ok ? "all channels pass" : "FAILURES"), ok ? "ok" : "err");
    } else if (e.done && e.error) {
      this.addLine(progress, `${e.error.code}: ${e.error.msg}`, "err");
    }
  }

  private addLine(progress: HTMLElement, text: string, kind: "ok" | "err"): void {
    const li = document.createElement("li");
    li.className = `mig-${kind}`;
    li.textContent = text;
    progress.appendChild(li);
  }
}
