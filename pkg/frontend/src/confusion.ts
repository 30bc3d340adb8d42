/**
 * Test Accuracy widgets: confusion-matrix heatmap, micro-F1 readout and
 * the loading/unloading guard badge. Values come verbatim from the
 * result payload; nothing is recomputed except cell shading.
 */

import { ResultMsg, STATE_NAMES, WorkState } from "./protocol.js";

const LABELS = ["e0 traveling", "e1 loading", "e2 unloading"];

export function renderAccuracy(container: HTMLElement, result: ResultMsg | null): void {
  container.innerHTML = "";
  if (!result) {
    const hint = document.createElement("p");
    hint.className = "hint";
    hint.textContent = "No completed training job yet. Label data and start training first.";
    container.appendChild(hint);
    return;
  }

  const f1 = document.createElement("div");
  f1.className = "metric-f1";
  f1.dataset.value = String(result.micro_f1);
  f1.textContent = `micro F1 ${(result.micro_f1 * 100).toFixed(2)} %`;
  container.appendChild(f1);

  const badge = document.createElement("span");
  badge.className = result.guard_ok ? "guard-badge ok" : "guard-badge violated";
  badge.textContent = result.guard_ok
    ? "guard ok: never confuses loading and unloading"
    : "guard violated: loading/unloading confusion present";
  container.appendChild(badge);

  const table = document.createElement("table");
  table.className = "confusion";
  const head = table.insertRow();
  head.insertCell().textContent = "truth \\ prediction";
  for (const name of LABELS) {
    const cell = head.insertCell();
    cell.textContent = name;
  }
  const rowTotals = result.confusion.map((row) => row.reduce((a, b) => a + b, 0));
  result.confusion.forEach((row, i) => {
    const tr = table.insertRow();
    tr.insertCell().textContent = LABELS[i];
    row.forEach((count, j) => {
      const cell = tr.insertCell();
      cell.textContent = String(count);
      cell.dataset.row = String(i);
      cell.dataset.col = String(j);
      const frac = rowTotals[i] > 0 ? count / rowTotals[i] : 0;
      const tone = i === j ? "42, 120, 66" : "150, 53, 53";
      cell.style.backgroundColor = `rgba(${tone}, ${(0.15 + 0.85 * frac).toFixed(3)})`;
    });
  });
  container.appendChild(table);

  const details = document.createElement("dl");
  details.className = "result-details";
  const items: Array<[string, string]> = [
    ["trainable parameters", String(result.trainable_params)],
    ["training wall time", `${result.wall_time_s.toFixed(1)} s`],
    ["job", result.job_id],
  ];
  if (result.model_version !== undefined) {
    items.push(["registry version", String(result.model_version)]);
  }
  for (const [k, v] of items) {
    const dt = document.createElement("dt");
    dt.textContent = k;
    const dd = document.createElement("dd");
    dd.textContent = v;
    details.append(dt, dd);
  }
  container.appendChild(details);
}

export function renderCostCurves(canvas: HTMLCanvasElement, points: Array<{ epoch: number; train_cost: number; val_cost: number }>): void {
  const ctx = canvas.getContext && canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#171a21";
  ctx.fillRect(0, 0, width, height);
  if (points.length < 2) return;
  const costs = points.flatMap((p) => [p.train_cost, p.val_cost]);
  const lo = Math.min(...costs);
  const hi = Math.max(...costs);
  const sx = (i: number) => (i / (points.length - 1)) * (width - 10) + 5;
  const sy = (c: number) => height - 5 - ((c - lo) / Math.max(hi - lo, 1e-9)) * (height - 10);
  for (const [key, color] of [
    ["train_cost", "#9fd0ff"],
    ["val_cost", "#f2a65a"],
  ] as const) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    points.forEach((p, i) => {
      if (i === 0) ctx.moveTo(sx(i), sy(p[key]));
      else ctx.lineTo(sx(i), sy(p[key]));
    });
    ctx.stroke();
  }
}

export function stateName(state: WorkState): string {
  return STATE_NAMES[state];
}
