// @vitest-environment jsdom
/**
 * Scripted operator run against the real app DOM: connect, stream,
 * label one cycle, start training with defaults, and check the Test
 * Accuracy view against the result payload field-for-field.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { LabelerApp, TABS } from "../src/app.js";
import { FakeService } from "./fake_service.js";

function mount(): { app: LabelerApp; service: FakeService } {
  document.body.innerHTML = '<div id="app"></div>';
  const service = new FakeService();
  const app = new LabelerApp(document.getElementById("app")!, () => service);
  return { app, service };
}

function connectAndStream(app: LabelerApp, service: FakeService): void {
  (document.querySelector("#address") as HTMLInputElement).value = "ws://x:1";
  (document.querySelector("#connect") as HTMLButtonElement).click();
  service.open();
  (document.querySelector("#stream") as HTMLButtonElement).click();
}

describe("four perspectives", () => {
  it("renders all tabs and switches panels", () => {
    mount();
    const buttons = [...document.querySelectorAll("nav.tabs button")].map(
      (b) => b.textContent
    );
    expect(buttons).toEqual([...TABS]);
    (document.querySelector('[data-tab="Test Accuracy"]') as HTMLButtonElement).click();
    expect(
      (document.querySelector('[data-panel="Test Accuracy"]') as HTMLElement).hidden
    ).toBe(false);
    expect(
      (document.querySelector('[data-panel="Connect machines"]') as HTMLElement).hidden
    ).toBe(true);
  });
});

describe("connect", () => {
  it("shows connected status with the session id", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    expect(document.querySelector("#status")!.textContent).toContain("connected");
    expect(document.querySelector("#status")!.textContent).toContain("sess-feed");
    expect(app.store.telemetry.length).toBe(40);
  });

  it("suffers a dropped connection without crashing and supports retry", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    service.close();
    expect(document.querySelector("#status")!.textContent).toContain("disconnected");
    expect(document.querySelector("#status")!.textContent).toContain("retry");
    expect(app.store.connection).toBe("disconnected");
  });

  it("asks for job status after reconnect", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    labelWholeStream(app, service);
    (document.querySelector("#start-training") as HTMLButtonElement).click();
    service.close();
    // reconnect: the app replays job_status for the last known job
    (document.querySelector("#connect") as HTMLButtonElement).click();
    service.open();
    const statusMsgs = service.sent.filter((m) => m.type === "job_status");
    expect(statusMsgs.length).toBe(1);
    expect(statusMsgs[0].job_id).toBe("job-0001");
    expect(app.store.metrics?.job_id).toBe("job-0001");
  });
});

function labelWholeStream(app: LabelerApp, service: FakeService): void {
  app.chart.selection = { t0: 0, t1: 40 * 0.2 };
  app.commitSelection(0);
}

describe("labeling", () => {
  it("label buttons disabled before any stream", () => {
    mount();
    const btns = [...document.querySelectorAll(".label-buttons button")] as HTMLButtonElement[];
    expect(btns.every((b) => b.disabled)).toBe(true);
  });

  it("drag + state button sends a label and colors the band after ack", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    app.chart.selection = { t0: 1.0, t1: 3.0 };
    app.store.subscribe(() => undefined);
    (document.querySelector('[data-state="1"]') as HTMLButtonElement).disabled = false;
    app.commitSelection(1);
    const sentLabels = service.sent.filter((m) => m.type === "label");
    expect(sentLabels).toHaveLength(1);
    expect(sentLabels[0]).toMatchObject({ t_start: 1.0, t_end: 3.0, state: 1 });
    expect(app.store.visualBands()).toEqual([{ t0: 1.0, t1: 3.0, state: 1 }]);
  });

  it("overlapping re-label: newer color wins, like the service overwrite rule", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    app.chart.selection = { t0: 0, t1: 6 };
    app.commitSelection(0);
    app.chart.selection = { t0: 2, t1: 4 };
    app.commitSelection(2);
    expect(app.store.visualBands()).toEqual([
      { t0: 0, t1: 2, state: 0 },
      { t0: 2, t1: 4, state: 2 },
      { t0: 4, t1: 6, state: 0 },
    ]);
  });

  it("out-of-range labels are rolled back and surfaced inline", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    service.failLabels = true;
    app.chart.selection = { t0: 0, t1: 2 };
    app.commitSelection(1);
    expect(app.store.bands).toHaveLength(0);
    expect(document.querySelector("#label-status")!.textContent).toContain("out_of_range");
  });
});

describe("training and Test Accuracy", () => {
  it("default settings send job_start without overrides", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    labelWholeStream(app, service);
    (document.querySelector("#start-training") as HTMLButtonElement).click();
    const starts = service.sent.filter((m) => m.type === "job_start");
    expect(starts).toHaveLength(1);
    expect(starts[0].regime).toBe("FTF");
    expect(starts[0].overrides).toBeUndefined();
  });

  it("changed settings travel as overrides", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    labelWholeStream(app, service);
    (document.querySelector("#epochs") as HTMLInputElement).value = "25";
    (document.querySelector("#w1") as HTMLInputElement).value = "2.5";
    (document.querySelector("#regime") as HTMLSelectElement).value = "OTF";
    (document.querySelector("#start-training") as HTMLButtonElement).click();
    const start = service.sent.filter((m) => m.type === "job_start")[0];
    expect(start.regime).toBe("OTF");
    expect(start.overrides).toMatchObject({ epochs: 25, weights: [1.0, 2.5, 1.0] });
  });

  it("renders the accuracy view equal to the result payload", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    labelWholeStream(app, service);
    (document.querySelector("#start-training") as HTMLButtonElement).click();

    const result = service.result!;
    const f1 = document.querySelector(".metric-f1") as HTMLElement;
    expect(Number(f1.dataset.value)).toBe(result.micro_f1);
    expect(f1.textContent).toContain("95.67");
    const cells = document.querySelectorAll("table.confusion td[data-row]");
    expect(cells.length).toBe(9);
    const confusion = result.confusion as number[][];
    cells.forEach((cell) => {
      const el = cell as HTMLElement;
      const i = Number(el.dataset.row);
      const j = Number(el.dataset.col);
      expect(el.textContent).toBe(String(confusion[i][j]));
    });
    const badge = document.querySelector(".guard-badge") as HTMLElement;
    expect(badge.classList.contains("ok")).toBe(true);
    expect(document.querySelector(".result-details")!.textContent).toContain("2211");
    // progress curve fed by monotone epochs
    expect(app.store.progress.map((p) => p.epoch)).toEqual([1, 2, 3]);
  });

  it("guard badge flips on guard_ok=false", () => {
    const { app, service } = mount();
    connectAndStream(app, service);
    app.store.apply({
      type: "result",
      job_id: "j2",
      micro_f1: 0.8,
      confusion: [
        [10, 0, 0],
        [0, 9, 1],
        [0, 0, 10],
      ],
      guard_ok: false,
      trainable_params: 16295,
      wall_time_s: 1.0,
    });
    const badge = document.querySelector(".guard-badge") as HTMLElement;
    expect(badge.classList.contains("violated")).toBe(true);
    expect(badge.textContent).toContain("violated");
  });

  it("never fabricates metrics: empty until a result arrives", () => {
    mount();
    expect(document.querySelector(".metric-f1")).toBeNull();
    expect(document.querySelector("#accuracy")!.textContent).toContain("No completed training job");
  });
});
