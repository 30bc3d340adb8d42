/**
 * The "Smart working Site" operator app, four perspectives in four tabs:
 * Connect machines, Label the Data, Advanced Settings, Test Accuracy.
 */

import { StripChart } from "./chart.js";
import { renderAccuracy, renderCostCurves } from "./confusion.js";
import {
  STATE_COLORS,
  STATE_NAMES,
  TrainOverrides,
  Transport,
  WorkState,
  hello,
  jobStart,
  jobStatus,
  label,
  parseServerMsg,
  streamStart,
} from "./protocol.js";
import { SessionStore } from "./state.js";

export const TABS = [
  "Connect machines",
  "Label the Data",
  "Advanced Settings",
  "Test Accuracy",
] as const;

const DEFAULTS = {
  epochs: 60,
  weights: [1.0, 1.0, 1.0] as [number, number, number],
  regime: "FTF",
  lr0: 1e-4,
};

type TransportFactory = (url: string) => Transport;

export class LabelerApp {
  readonly store = new SessionStore();
  transport: Transport | null = null;
  chart!: StripChart;
  private root: HTMLElement;
  private makeTransport: TransportFactory;
  private panels: Record<string, HTMLElement> = {};
  private statusLine!: HTMLElement;
  private labelStatus!: HTMLElement;
  private jobFeed!: HTMLElement;
  private accuracyPane!: HTMLElement;
  private costCanvas!: HTMLCanvasElement;
  private lastJobId: string | null = null;

  constructor(root: HTMLElement, makeTransport: TransportFactory) {
    this.root = root;
    this.makeTransport = makeTransport;
    this.buildDom();
    this.store.subscribe(() => this.renderDynamic());
  }

  // -- DOM scaffolding ----------------------------------------------------

  private buildDom(): void {
    this.root.innerHTML = "";
    const nav = document.createElement("nav");
    nav.className = "tabs";
    const body = document.createElement("main");
    for (const name of TABS) {
      const btn = document.createElement("button");
      btn.textContent = name;
      btn.dataset.tab = name;
      btn.addEventListener("click", () => this.showTab(name));
      nav.appendChild(btn);
      const panel = document.createElement("section");
      panel.dataset.panel = name;
      panel.hidden = name !== TABS[0];
      body.appendChild(panel);
      this.panels[name] = panel;
    }
    this.root.append(nav, body);
    this.buildConnectTab();
    this.buildLabelTab();
    this.buildSettingsTab();
    this.buildAccuracyTab();
  }

  showTab(name: string): void {
    for (const [tab, panel] of Object.entries(this.panels)) {
      panel.hidden = tab !== name;
    }
  }

  private buildConnectTab(): void {
    const panel = this.panels[TABS[0]];
    panel.innerHTML = `
      <h2>Connect machines</h2>
      <p>Enter the machine's on-board service address (replaces Bluetooth pairing).</p>
      <label>address <input id="address" value="ws://127.0.0.1:8471" size="30"></label>
      <button id="connect">Connect</button>
      <label>replay source <input id="source" value="" placeholder="service default" size="24"></label>
      <label>rate <input id="rate" value="25" size="5"></label>
      <button id="stream" disabled>Start telemetry stream</button>
      <p id="status" class="status">disconnected</p>
    `;
    this.statusLine = panel.querySelector("#status")!;
    panel.querySelector("#connect")!.addEventListener("click", () => {
      const address = (panel.querySelector("#address") as HTMLInputElement).value;
      this.connect(address);
    });
    panel.querySelector("#stream")!.addEventListener("click", () => {
      const source = (panel.querySelector("#source") as HTMLInputElement).value.trim();
      const parsed = Number((panel.querySelector("#rate") as HTMLInputElement).value);
      const rate = Number.isFinite(parsed) ? parsed : 1; // 0 = unpaced replay
      this.transport?.send(streamStart(source.length ? source : null, rate));
    });
  }

  private buildLabelTab(): void {
    const panel = this.panels[TABS[1]];
    panel.innerHTML = `
      <h2>Label the Data</h2>
      <p>Drag over the chart to select an interval, then press the state it belongs to.</p>
      <canvas id="chart" width="900" height="300"></canvas>
      <div class="label-buttons"></div>
      <p id="label-status" class="status">not streaming</p>
    `;
    const buttons = panel.querySelector(".label-buttons")!;
    ([0, 1, 2] as WorkState[]).forEach((state) => {
      const btn = document.createElement("button");
      btn.dataset.state = String(state);
      btn.textContent = STATE_NAMES[state];
      btn.style.borderColor = STATE_COLORS[state];
      btn.disabled = true;
      btn.addEventListener("click", () => this.commitSelection(state));
      buttons.appendChild(btn);
    });
    this.labelStatus = panel.querySelector("#label-status")!;
    this.chart = new StripChart(panel.querySelector("#chart") as HTMLCanvasElement);
    this.chart.onSelection = () => this.renderDynamic();
  }

  private buildSettingsTab(): void {
    const panel = this.panels[TABS[2]];
    panel.innerHTML = `
      <h2>Advanced Settings</h2>
      <p>The defaults fit most machines; change them only if you are confident.</p>
      <label>training regime
        <select id="regime">
          <option value="FTF" selected>FTF: retrain the dense layers (fast)</option>
          <option value="OTF">OTF: retrain everything, gentle backbone</option>
          <option value="FS">FS: from scratch on the labeled data</option>
        </select>
      </label>
      <label>epochs <input id="epochs" type="number" value="${DEFAULTS.epochs}"></label>
      <label>state weights
        <input id="w0" type="number" step="0.1" value="1.0">
        <input id="w1" type="number" step="0.1" value="1.0">
        <input id="w2" type="number" step="0.1" value="1.0">
      </label>
      <label>learning rate <input id="lr0" type="number" step="0.00001" value="0.0001"></label>
      <button id="start-training" disabled>Start training</button>
      <p id="job-feed" class="status"></p>
    `;
    this.jobFeed = panel.querySelector("#job-feed")!;
    panel.querySelector("#start-training")!.addEventListener("click", () => this.startTraining());
  }

  private buildAccuracyTab(): void {
    const panel = this.panels[TABS[3]];
    panel.innerHTML = `
      <h2>Test Accuracy</h2>
      <canvas id="costs" width="500" height="160"></canvas>
      <div id="accuracy"></div>
    `;
    this.costCanvas = panel.querySelector("#costs") as HTMLCanvasElement;
    this.accuracyPane = panel.querySelector("#accuracy")!;
    renderAccuracy(this.accuracyPane, null);
  }

  // -- actions ----------------------------------------------------------------

  connect(address: string): void {
    this.store.reset();
    this.store.connection = "connecting";
    this.renderDynamic();
    try {
      this.transport = this.makeTransport(address);
    } catch (err) {
      this.store.connection = "disconnected";
      this.statusLine.textContent = `connection failed: ${String(err)} (check address, retry)`;
      return;
    }
    this.transport.onOpen(() => {
      this.transport!.send(hello("labeler-ui"));
      if (this.lastJobId) this.transport!.send(jobStatus(this.lastJobId));
    });
    this.transport.onMessage((text) => {
      const msg = parseServerMsg(text);
      if (msg) this.store.apply(msg);
    });
    this.transport.onClose((reason) => {
      this.store.connection = "disconnected";
      this.statusLine.textContent = `disconnected (${reason}); press Connect to retry`;
    });
  }

  commitSelection(state: WorkState): void {
    const sel = this.chart.selection;
    if (!sel || !this.transport) return;
    const ref = this.store.stageLabel(sel.t0, sel.t1, state);
    this.transport.send(label(ref, sel.t0, sel.t1, state));
    this.chart.selection = null;
    this.renderDynamic();
  }

  startTraining(): void {
    if (!this.transport) return;
    const panel = this.panels[TABS[2]];
    const num = (id: string) => Number((panel.querySelector("#" + id) as HTMLInputElement).value);
    const regime = (panel.querySelector("#regime") as HTMLSelectElement).value;
    const overrides: TrainOverrides = {};
    if (num("epochs") !== DEFAULTS.epochs) overrides.epochs = num("epochs");
    const weights: [number, number, number] = [num("w0"), num("w1"), num("w2")];
    if (weights.some((w, i) => w !== DEFAULTS.weights[i])) overrides.weights = weights;
    if (num("lr0") !== DEFAULTS.lr0) overrides.lr0 = num("lr0");
    this.transport.send(jobStart(regime, overrides));
  }

  // -- rendering ----------------------------------------------------------------

  private renderDynamic(): void {
    const s = this.store;
    this.statusLine.textContent =
      s.connection === "connected"
        ? `connected (session ${s.sessionId ?? "?"}), ${s.telemetry.length} samples buffered`
        : s.connection;
    const connected = s.connection === "connected";
    (this.panels[TABS[0]].querySelector("#stream") as HTMLButtonElement).disabled = !connected;

    const streaming = connected && s.telemetry.length > 0;
    this.panels[TABS[1]]
      .querySelectorAll<HTMLButtonElement>(".label-buttons button")
      .forEach((b) => (b.disabled = !(streaming && this.chart.selection)));
    if (s.lastError) {
      this.labelStatus.textContent = `service error [${s.lastError.code}] ${s.lastError.msg}`;
    } else if (this.chart.selection) {
      const { t0, t1 } = this.chart.selection;
      this.labelStatus.textContent = `selected ${t0.toFixed(1)} - ${t1.toFixed(1)} s; pick a state`;
    } else {
      this.labelStatus.textContent = streaming
        ? `${s.committedBands().length} committed label intervals`
        : "not streaming";
    }
    this.chart.render(s.telemetry, s.visualBands());

    (this.panels[TABS[2]].querySelector("#start-training") as HTMLButtonElement).disabled =
      !streaming;
    if (s.jobId) this.lastJobId = s.jobId;
    const last = s.progress[s.progress.length - 1];
    this.jobFeed.textContent = s.metrics
      ? `job ${s.metrics.job_id} finished`
      : last
        ? `job ${last.job_id} epoch ${last.epoch}: train ${last.train_cost.toFixed(4)} val ${last.val_cost.toFixed(4)}`
        : "";

    renderCostCurves(this.costCanvas, s.progress);
    renderAccuracy(this.accuracyPane, s.metrics);
  }
}
