/**
 * Scrolling five-channel strip chart with label-band overlay and drag
 * selection. Pixel<->time mapping is exposed for tests; painting is
 * skipped when no 2D context exists (jsdom).
 */

import { STATE_COLORS, TelemetryMsg } from "./protocol.js";
import { VisualBand } from "./state.js";

export const CHANNELS: Array<keyof Omit<TelemetryMsg, "type" | "t">> = [
  "p_bu",
  "v_veh",
  "u_js",
  "p_cc",
  "p_bo",
];

export interface Selection {
  t0: number;
  t1: number;
}

export class StripChart {
  readonly canvas: HTMLCanvasElement;
  windowSeconds = 60;
  selection: Selection | null = null;
  onSelection: ((sel: Selection) => void) | null = null;
  private dragStartX: number | null = null;
  private lastData: TelemetryMsg[] = [];
  private lastBands: VisualBand[] = [];

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    canvas.addEventListener("pointerdown", (ev) => {
      this.dragStartX = this.eventX(ev);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (this.dragStartX !== null) {
        this.updateSelection(this.dragStartX, this.eventX(ev));
      }
    });
    canvas.addEventListener("pointerup", (ev) => {
      if (this.dragStartX !== null) {
        this.updateSelection(this.dragStartX, this.eventX(ev));
        this.dragStartX = null;
        if (this.selection && this.onSelection) this.onSelection(this.selection);
      }
    });
  }

  private eventX(ev: PointerEvent): number {
    const rect = this.canvas.getBoundingClientRect();
    return ev.clientX - rect.left;
  }

  private updateSelection(x0: number, x1: number): void {
    const a = this.xToTime(Math.min(x0, x1));
    const b = this.xToTime(Math.max(x0, x1));
    if (b > a) {
      this.selection = { t0: a, t1: b };
      this.render(this.lastData, this.lastBands);
    }
  }

  timeSpan(data: TelemetryMsg[]): [number, number] {
    const tEnd = data.length ? data[data.length - 1].t : this.windowSeconds;
    return [Math.max(0, tEnd - this.windowSeconds), Math.max(tEnd, this.windowSeconds)];
  }

  timeToX(t: number): number {
    const [lo, hi] = this.timeSpan(this.lastData);
    return ((t - lo) / (hi - lo)) * this.canvas.width;
  }

  xToTime(x: number): number {
    const [lo, hi] = this.timeSpan(this.lastData);
    return lo + (x / this.canvas.width) * (hi - lo);
  }

  render(data: TelemetryMsg[], bands: VisualBand[]): void {
    this.lastData = data;
    this.lastBands = bands;
    const ctx = this.canvas.getContext && this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#171a21";
    ctx.fillRect(0, 0, width, height);

    for (const band of bands) {
      const x0 = this.timeToX(band.t0);
      const x1 = this.timeToX(band.t1);
      if (x1 < 0 || x0 > width) continue;
      ctx.fillStyle = STATE_COLORS[band.state] + "55";
      ctx.fillRect(x0, 0, x1 - x0, height);
    }

    const [lo, hi] = this.timeSpan(data);
    const visible = data.filter((d) => d.t >= lo && d.t <= hi);
    const laneH = height / CHANNELS.length;
    CHANNELS.forEach((channel, lane) => {
      const values = visible.map((d) => d[channel] as number);
      if (values.length < 2) return;
      let vMin = Math.min(...values);
      let vMax = Math.max(...values);
      if (vMax - vMin < 1e-9) {
        vMin -= 1;
        vMax += 1;
      }
      ctx.strokeStyle = "#9fd0ff";
      ctx.lineWidth = 1;
      ctx.beginPath();
      visible.forEach((d, i) => {
        const x = this.timeToX(d.t);
        const frac = ((d[channel] as number) - vMin) / (vMax - vMin);
        const y = laneH * lane + laneH * (0.9 - 0.8 * frac);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
      ctx.fillStyle = "#79839b";
      ctx.font = "10px sans-serif";
      ctx.fillText(channel, 4, laneH * lane + 11);
    });

    if (this.selection) {
      const x0 = this.timeToX(this.selection.t0);
      const x1 = this.timeToX(this.selection.t1);
      ctx.fillStyle = "#ffffff2e";
      ctx.fillRect(x0, 0, x1 - x0, height);
      ctx.strokeStyle = "#ffffffaa";
      ctx.strokeRect(x0, 0, x1 - x0, height);
    }
  }
}
