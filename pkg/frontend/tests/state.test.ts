import { describe, expect, it } from "vitest";

import { parseServerMsg } from "../src/protocol.js";
import { SessionStore } from "../src/state.js";
import type { ServerMsg } from "../src/protocol.js";

function telemetry(t: number): ServerMsg {
  return { type: "telemetry", t, p_bu: 1, v_veh: 2, u_js: 0.5, p_cc: 3, p_bo: 4 };
}

describe("parseServerMsg", () => {
  it("accepts known types and rejects junk", () => {
    expect(parseServerMsg('{"type":"ack","ref":"hello"}')).toMatchObject({ type: "ack" });
    expect(parseServerMsg("not json")).toBeNull();
    expect(parseServerMsg('{"kind":"ack"}')).toBeNull();
    expect(parseServerMsg('{"type":"mystery"}')).toBeNull();
  });
});

describe("SessionStore labeling", () => {
  it("commits bands only on ack", () => {
    const s = new SessionStore();
    const ref = s.stageLabel(0, 5, 0);
    expect(s.committedBands()).toHaveLength(0);
    s.apply({ type: "ack", ref });
    expect(s.committedBands()).toHaveLength(1);
  });

  it("rolls back the pending band on a correlated error", () => {
    const s = new SessionStore();
    const ref = s.stageLabel(0, 5, 1);
    s.apply({ type: "error", code: "out_of_range", msg: "no", ref });
    expect(s.bands).toHaveLength(0);
    expect(s.lastError?.code).toBe("out_of_range");
  });

  it("newest committed band wins on overlap (half-open semantics)", () => {
    const s = new SessionStore();
    const a = s.stageLabel(0, 10, 0);
    const b = s.stageLabel(4, 6, 1);
    s.apply({ type: "ack", ref: a });
    s.apply({ type: "ack", ref: b });
    expect(s.visualBands()).toEqual([
      { t0: 0, t1: 4, state: 0 },
      { t0: 4, t1: 6, state: 1 },
      { t0: 6, t1: 10, state: 0 },
    ]);
  });

  it("adjacent intervals leave no gap and no overlap", () => {
    const s = new SessionStore();
    const a = s.stageLabel(0, 5, 0);
    const b = s.stageLabel(5, 10, 1);
    s.apply({ type: "ack", ref: a });
    s.apply({ type: "ack", ref: b });
    expect(s.visualBands()).toEqual([
      { t0: 0, t1: 5, state: 0 },
      { t0: 5, t1: 10, state: 1 },
    ]);
  });

  it("replaying the message log reconstructs the band set exactly", () => {
    const build = (order: Array<[string, number, number, number]>) => {
      const s = new SessionStore();
      for (const [ref, t0, t1, state] of order) {
        const staged = s.stageLabel(t0, t1, state as 0 | 1 | 2);
        expect(staged).toBe(ref);
        s.apply({ type: "ack", ref });
      }
      return s.visualBands();
    };
    const script: Array<[string, number, number, number]> = [
      ["label:1", 0, 8, 0],
      ["label:2", 3, 5, 2],
      ["label:3", 5, 9, 1],
    ];
    const once = build(script);
    const again = build(script);
    expect(again).toEqual(once);
    expect(once.map((b) => b.state)).toEqual([0, 2, 1]);
  });
});

describe("SessionStore job feed", () => {
  it("keeps progress epochs strictly increasing", () => {
    const s = new SessionStore();
    const p = (epoch: number): ServerMsg => ({
      type: "progress",
      job_id: "j",
      epoch,
      train_cost: 1,
      val_cost: 1,
    });
    s.apply(p(1));
    s.apply(p(2));
    s.apply(p(2));
    s.apply(p(3));
    expect(s.progress.map((x) => x.epoch)).toEqual([1, 2, 3]);
  });

  it("stores the result payload verbatim", () => {
    const s = new SessionStore();
    const result: ServerMsg = {
      type: "result",
      job_id: "j",
      micro_f1: 0.5,
      confusion: [
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
      ],
      guard_ok: false,
      trainable_params: 2211,
      wall_time_s: 3.5,
    };
    s.apply(result);
    expect(s.metrics).toEqual(result);
  });

  it("caps the telemetry buffer", () => {
    const s = new SessionStore();
    for (let i = 0; i < 3500; i++) s.apply(telemetry(i * 0.2));
    expect(s.telemetry.length).toBe(3000);
    expect(s.telemetry[0].t).toBeCloseTo(500 * 0.2);
  });
});
