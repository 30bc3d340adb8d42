/**
 * Wire protocol of the ECU service: one JSON message per WebSocket text
 * frame. Field names are fixed by the service; extra fields are allowed.
 */

export type WorkState = 0 | 1 | 2;

export const STATE_NAMES: Record<WorkState, string> = {
  0: "traveling",
  1: "loading",
  2: "unloading",
};

export const STATE_COLORS: Record<WorkState, string> = {
  0: "#4e88c7",
  1: "#d9833b",
  2: "#5aa469",
};

export interface TelemetryMsg {
  type: "telemetry";
  t: number;
  p_bu: number;
  v_veh: number;
  u_js: number;
  p_cc: number;
  p_bo: number;
}

export interface AckMsg {
  type: "ack";
  ref: string;
  session_id?: string;
  job_id?: string;
  samples?: number;
  models?: RegistryModel[];
  [key: string]: unknown;
}

export interface RegistryModel {
  version: number;
  file: string;
  sha256: string;
  active: boolean;
}

export interface ProgressMsg {
  type: "progress";
  job_id: string;
  epoch: number;
  train_cost: number;
  val_cost: number;
}

export interface ResultMsg {
  type: "result";
  job_id: string;
  micro_f1: number;
  confusion: number[][];
  guard_ok: boolean;
  trainable_params: number;
  wall_time_s: number;
  best_epoch?: number;
  stop_epoch?: number;
  model_version?: number;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  msg: string;
  ref?: string;
  job_id?: string;
}

export type ServerMsg = TelemetryMsg | AckMsg | ProgressMsg | ResultMsg | ErrorMsg;

export function parseServerMsg(text: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (
    type === "telemetry" ||
    type === "ack" ||
    type === "progress" ||
    type === "result" ||
    type === "error"
  ) {
    return obj as ServerMsg;
  }
  return null;
}

export interface TrainOverrides {
  epochs?: number;
  weights?: [number, number, number];
  patience?: number;
  batch_size?: number;
  lr0?: number;
  seed?: number;
}

export const hello = (client: string) =>
  JSON.stringify({ type: "hello", client, proto: 1 });

export const streamStart = (source: string | null, rateFactor: number) =>
  JSON.stringify({
    type: "stream_start",
    source: source ?? undefined,
    rate_factor: rateFactor,
  });

export const label = (ref: string, t_start: number, t_end: number, state: WorkState) =>
  JSON.stringify({ type: "label", ref, t_start, t_end, state });

export const jobStart = (regime: string, overrides: TrainOverrides) =>
  JSON.stringify(
    Object.keys(overrides).length > 0
      ? { type: "job_start", regime, overrides }
      : { type: "job_start", regime }
  );

export const jobStatus = (job_id: string) =>
  JSON.stringify({ type: "job_status", job_id });

export const registryList = () => JSON.stringify({ type: "registry_list" });

export const promote = (version: number) =>
  JSON.stringify({ type: "promote", version });

/** Socket abstraction so tests can script the service side. */
export interface Transport {
  send(text: string): void;
  close(): void;
  onOpen(cb: () => void): void;
  onMessage(cb: (text: string) => void): void;
  onClose(cb: (reason: string) => void): void;
}

export function webSocketTransport(url: string): Transport {
  const sock = new WebSocket(url);
  return {
    send: (text) => sock.send(text),
    close: () => sock.close(),
    onOpen: (cb) => sock.addEventListener("open", cb),
    onMessage: (cb) =>
      sock.addEventListener("message", (ev) => cb(String((ev as MessageEvent).data))),
    onClose: (cb) => {
      sock.addEventListener("close", () => cb("closed"));
      sock.addEventListener("error", () => cb("error"));
    },
  };
}
