// Strip chart for one selected channel, drawn straight onto a canvas from
// the view model's bounded trend buffer.

import { formatValue, ViewModel } from "./state.js";

export class TrendChart {
  channel: string | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private label: HTMLElement,
    private vm: ViewModel,
  ) {}

  show(ch: string | null): void {
    if (this.channel !== null && this.channel !== ch) {
      this.vm.dropTrend(this.channel);
    }
    this.channel = ch;
    if (ch !== null) this.vm.trackTrend(ch);
    this.render();
  }

  render(): void {
    let ctx: CanvasRenderingContext2D | null = null;
    try {
      ctx = this.canvas.getContext("2d");
    } catch {
      ctx = null; // headless test DOM without canvas support
    }
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (this.channel === null) {
      this.label.textContent = "click a channel name to trend it";
      return;
    }
    const points = this.vm.trends.get(this.channel) ?? [];
    const meta = this.vm.meta.get(this.channel);
    const latest = points.length > 0 ? points[points.length - 1] : null;
    this.label.textContent = latest
      ? `${this.channel}: ${formatValue(latest.val, meta?.units ?? "")} (${points.length} pts)`
      : `${this.channel}: waiting for updates`;
    if (points.length < 2) return;

    let lo = Infinity;
    let hi = -Infinity;
    for (const p of points) {
      if (p.val < lo) lo = p.val;
      if (p.val > hi) hi = p.val;
    }
    if (hi - lo < 1e-12) {
      const pad = Math.abs(hi) * 0.001 + 1e-6;
      lo -= pad;
      hi += pad;
    }
    const t0 = points[0].ts;
    const t1 = points[points.length - 1].ts;
    const span = Math.max(t1 - t0, 1);

    ctx.strokeStyle = "#4eb3ff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    points.forEach((p, i) => {
      const x = ((p.ts - t0) / span) * (width - 8) + 4;
      const y = height - 6 - ((p.val - lo) / (hi - lo)) * (height - 12);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();

    ctx.fillStyle = "#8aa0b4";
    ctx.font = "10px monospace";
    ctx.fillText(hi.toPrecision(6), 4, 10);
    ctx.fillText(lo.toPrecision(6), 4, height - 2);
  }
}
