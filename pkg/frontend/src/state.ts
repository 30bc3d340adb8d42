/**
 * Client-side session state: a pure reducer over server messages plus
 * optimistic label edits. Committed label bands mirror service acks
 * only; every displayed metric is the verbatim result payload.
 */

import {
  AckMsg,
  ErrorMsg,
  ProgressMsg,
  ResultMsg,
  ServerMsg,
  TelemetryMsg,
  WorkState,
} from "./protocol.js";

export type Connection = "disconnected" | "connecting" | "connected";

export interface LabelBand {
  ref: string;
  t0: number;
  t1: number;
  state: WorkState;
  status: "pending" | "committed";
  seq: number; // commit order; later bands win on overlap
}

export interface VisualBand {
  t0: number;
  t1: number;
  state: WorkState;
}

const TELEMETRY_KEEP = 3000; // rolling buffer length (10 min at 5 Hz)

export class SessionStore {
  connection: Connection = "disconnected";
  sessionId: string | null = null;
  telemetry: TelemetryMsg[] = [];
  bands: LabelBand[] = [];
  progress: ProgressMsg[] = [];
  jobId: string | null = null;
  metrics: ResultMsg | null = null;
  lastError: ErrorMsg | null = null;
  streamEnded = false;
  registry: AckMsg | null = null;
  private nextRef = 1;
  private nextSeq = 1;
  private listeners: Array<() => void> = [];

  subscribe(cb: () => void): void {
    this.listeners.push(cb);
  }

  private emit(): void {
    for (const cb of this.listeners) cb();
  }

  /** Register an optimistic label interval; returns the ref to send. */
  stageLabel(t0: number, t1: number, state: WorkState): string {
    const ref = `label:${this.nextRef++}`;
    this.bands.push({ ref, t0, t1, state, status: "pending", seq: 0 });
    this.emit();
    return ref;
  }

  apply(msg: ServerMsg): void {
    switch (msg.type) {
      case "telemetry": {
        this.telemetry.push(msg);
        if (this.telemetry.length > TELEMETRY_KEEP) {
          this.telemetry.splice(0, this.telemetry.length - TELEMETRY_KEEP);
        }
        break;
      }
      case "ack": {
        this.applyAck(msg);
        break;
      }
      case "progress": {
        // epochs per job only move forward; drop stale reordered frames
        const last = this.progress[this.progress.length - 1];
        if (!last || msg.job_id !== last.job_id || msg.epoch > last.epoch) {
          this.progress.push(msg);
          this.jobId = msg.job_id;
        }
        break;
      }
      case "result": {
        this.metrics = msg;
        this.jobId = msg.job_id;
        break;
      }
      case "error": {
        this.lastError = msg;
        if (msg.ref) {
          // optimistic edit rejected: roll it back
          this.bands = this.bands.filter(
            (b) => !(b.status === "pending" && b.ref === msg.ref)
          );
        }
        break;
      }
    }
    this.emit();
  }

  private applyAck(msg: AckMsg): void {
    if (msg.ref === "hello" && typeof msg.session_id === "string") {
      this.connection = "connected";
      this.sessionId = msg.session_id;
      return;
    }
    if (msg.ref === "stream_end") {
      this.streamEnded = true;
      return;
    }
    if (msg.ref === "registry_list") {
      this.registry = msg;
      return;
    }
    if (msg.ref.startsWith("label:")) {
      for (const band of this.bands) {
        if (band.ref === msg.ref && band.status === "pending") {
          band.status = "committed";
          band.seq = this.nextSeq++;
        }
      }
      return;
    }
    if (msg.ref === "job_start" && typeof msg.job_id === "string") {
      this.jobId = msg.job_id;
      this.progress = [];
      this.metrics = null;
      return;
    }
  }

  committedBands(): LabelBand[] {
    return this.bands.filter((b) => b.status === "committed");
  }

  /**
   * The chart's band set: committed intervals resolved with
   * newest-commit-wins overlap semantics (half-open [t0, t1)).
   */
  visualBands(): VisualBand[] {
    const committed = [...this.committedBands()].sort((a, b) => a.seq - b.seq);
    const edges = new Set<number>();
    for (const b of committed) {
      edges.add(b.t0);
      edges.add(b.t1);
    }
    const sorted = [...edges].sort((x, y) => x - y);
    const out: VisualBand[] = [];
    for (let i = 0; i + 1 < sorted.length; i++) {
      const t0 = sorted[i];
      const t1 = sorted[i + 1];
      let state: WorkState | null = null;
      for (const b of committed) {
        if (b.t0 <= t0 && t1 <= b.t1) state = b.state; // later seq overrides
      }
      if (state !== null) {
        const prev = out[out.length - 1];
        if (prev && prev.t1 === t0 && prev.state === state) {
          prev.t1 = t1;
        } else {
          out.push({ t0, t1, state });
        }
      }
    }
    return out;
  }

  reset(): void {
    this.connection = "disconnected";
    this.sessionId = null;
    this.telemetry = [];
    this.bands = [];
    this.progress = [];
    this.jobId = null;
    this.metrics = null;
    this.streamEnded = false;
    this.emit();
  }
}
