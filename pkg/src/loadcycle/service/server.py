"""ECU-emulating network service.

Streams telemetry to clients, ingests live label intervals, runs
training/fine-tuning jobs in the background and persists model versions
in the registry. One port speaks both protocols: plain newline-delimited
JSON over TCP, and the same messages as WebSocket text frames after an
HTTP upgrade (for the browser labeling UI). Message types:

  client->server: hello, stream_start, label, job_start, job_status,
                  registry_list, promote
  server->client: telemetry, ack, progress, result, error
"""

from __future__ import annotations

import asyncio
import itertools
import json
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import DT, CHANNELS, LabeledSequence, Origin, WindowConfig, segment_all, WindowSet
from ..errors import (
    BindFailure,
    InsufficientData,
    InvalidInterval,
    JobAlreadyRunning,
    LoadcycleError,
    MissingBaseModel,
    OutOfRange,
    UnknownJob,
    UnknownVersion,
)
from ..nn import Model, ModelSpec, build_model
from ..seqio import load_dataset, load_sequence
from ..synth import generate_preset
from ..train import TrainConfig, apply_mode, train
from .registry import ModelRegistry
from . import ws as wsproto

PROTO_VERSION = 1

_ERROR_CODES = {
    OutOfRange: "out_of_range",
    InvalidInterval: "invalid_interval",
    InsufficientData: "insufficient_data",
    MissingBaseModel: "missing_base_model",
    JobAlreadyRunning: "job_already_running",
    UnknownVersion: "unknown_version",
    UnknownJob: "unknown_job",
}


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8471
    registry_dir: str = "registry"
    replay_source: str = "synth:target:n=2"
    rate_factor: float = 50.0  # stream speed multiplier; <= 0 means no pacing
    ws: int = 15
    seed: int = 0
    job_defaults: dict = field(default_factory=dict)


@dataclass
class Job:
    job_id: str
    session_id: str
    regime: str
    epoch: int = 0
    train_cost: float = float("nan")
    val_cost: float = float("nan")
    phase: str = "running"  # running | stopped_early | done | failed
    result: dict | None = None
    error: str | None = None


class Session:
    """One connected client: streamed buffer, ingested labels, at most one job."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.client = ""
        self.state = "idle"  # idle | streaming | labeling | training
        self.t: list[float] = []
        self.values: list[tuple] = []  # per-frame channel tuples
        self.labels: list[int | None] = []
        self.cycle_bounds: list[tuple[int, int]] = []
        self.job_id: str | None = None
        self.queue: asyncio.Queue = asyncio.Queue()
        self.stream_task: asyncio.Task | None = None

    # -- labeling --------------------------------------------------------------

    def ingest_label(self, t_start: float, t_end: float, state: int) -> int:
        """Label all buffered samples in [t_start, t_end); overwrite on overlap."""
        if not np.isfinite(t_start) or not np.isfinite(t_end) or t_start >= t_end:
            raise InvalidInterval(f"need t_start < t_end, got [{t_start}, {t_end})")
        if state not in (0, 1, 2):
            raise InvalidInterval(f"state must be 0, 1 or 2, got {state}")
        if not self.t:
            raise OutOfRange("nothing streamed yet")
        eps = 1e-9
        if t_start < self.t[0] - eps or t_end > self.t[-1] + DT + eps:
            raise OutOfRange(
                f"[{t_start}, {t_end}) outside streamed range [{self.t[0]}, {self.t[-1] + DT})"
            )
        ts = np.asarray(self.t)
        lo = int(np.searchsorted(ts, t_start - eps, side="left"))
        hi = int(np.searchsorted(ts, t_end - eps, side="left"))
        for i in range(lo, hi):
            self.labels[i] = state
        return hi - lo

    def labeled_cycles(self) -> list[LabeledSequence]:
        """Cycles whose every sample carries a label."""
        out = []
        for k, (lo, hi) in enumerate(self.cycle_bounds):
            lab = self.labels[lo:hi]
            if lab and all(l is not None for l in lab):
                out.append(
                    LabeledSequence(
                        t=np.asarray(self.t[lo:hi]),
                        channels=np.asarray(self.values[lo:hi]).T,
                        labels=np.asarray(lab, dtype=np.int64),
                        origin=Origin.TARGET,
                        cycle_id=f"{self.session_id[:8]}-{k:03d}",
                    )
                )
        return out


def load_replay_source(source: str, seed: int) -> list[LabeledSequence]:
    """'synth:source|target[:n=N][:seed=S]' or 'file:<path>' (file or directory)."""
    kind, _, rest = source.partition(":")
    if kind == "synth":
        parts = rest.split(":")
        preset = parts[0]
        opts = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
        return generate_preset(
            preset,
            seed=int(opts.get("seed", seed)),
            n_cycles=int(opts["n"]) if "n" in opts else None,
        )
    if kind == "file":
        path = Path(rest)
        if path.is_dir():
            return load_dataset(path, origin=Origin.TARGET)
        return [load_sequence(path, origin=Origin.TARGET)]
    raise ValueError(f"unknown replay source {source!r}")


# -- transports -----------------------------------------------------------------

class LineTransport:
    def __init__(self, reader, writer, first_line: bytes):
        self.reader, self.writer = reader, writer
        self._first = first_line

    async def recv(self) -> str | None:
        if self._first is not None:
            line, self._first = self._first, None
            return line.decode("utf-8", "replace")
        line = await self.reader.readline()
        if not line:
            return None
        return line.decode("utf-8", "replace")

    async def send(self, text: str) -> None:
        self.writer.write(text.encode("utf-8") + b"\n")
        await self.writer.drain()


class WebSocketTransport:
    def __init__(self, reader, writer):
        self.reader, self.writer = reader, writer

    async def handshake(self, first_line: bytes) -> None:
        headers: dict[str, str] = {}
        while True:
            line = await self.reader.readline()
            if line in (b"\r\n", b"\n", b""):
                break
            name, _, value = line.decode("latin-1").partition(":")
            headers[name.strip().lower()] = value.strip()
        self.writer.write(wsproto.handshake_response(headers))
        await self.writer.drain()

    async def recv(self) -> str | None:
        while True:
            try:
                opcode, payload = await wsproto.read_frame(self.reader)
            except (asyncio.IncompleteReadError, ConnectionError):
                return None
            if opcode == wsproto.OP_TEXT:
                return payload.decode("utf-8", "replace")
            if opcode == wsproto.OP_PING:
                self.writer.write(wsproto.encode_frame(payload, wsproto.OP_PONG))
                await self.writer.drain()
            elif opcode == wsproto.OP_CLOSE:
                self.writer.write(wsproto.encode_frame(b"", wsproto.OP_CLOSE))
                await self.writer.drain()
                return None

    async def send(self, text: str) -> None:
        self.writer.write(wsproto.encode_frame(text.encode("utf-8")))
        await self.writer.drain()


# -- the service -------------------------------------------------------------------

class EcuService:
    def __init__(self, config: ServeConfig):
        self.config = config
        self.registry = ModelRegistry(config.registry_dir)
        self.jobs: dict[str, Job] = {}
        self.sessions: dict[str, Session] = {}
        self.executor = ThreadPoolExecutor(max_workers=4)
        self._job_counter = itertools.count(1)
        self._server: asyncio.Server | None = None

    # -- lifecycle ----------------------------------------------------------------

    async def start(self) -> None:
        try:
            self._server = await asyncio.start_server(
                self._handle_connection, self.config.host, self.config.port
            )
        except OSError as e:
            raise BindFailure(f"cannot bind {self.config.host}:{self.config.port}: {e}") from e

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        self.executor.shutdown(wait=False, cancel_futures=True)

    # -- connection handling ---------------------------------------------------------

    async def _handle_connection(self, reader, writer):
        session = Session(uuid.uuid4().hex)
        self.sessions[session.session_id] = session
        transport = None
        sender = None
        try:
            first = await reader.readline()
            if not first:
                return
            if first.startswith(b"GET "):
                transport = WebSocketTransport(reader, writer)
                await transport.handshake(first)
            else:
                transport = LineTransport(reader, writer, first)
            sender = asyncio.ensure_future(self._sender_loop(session, transport))
            while True:
                text = await transport.recv()
                if text is None:
                    break
                if not text.strip():
                    continue
                await self._dispatch(session, text)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            if session.stream_task is not None:
                session.stream_task.cancel()
            if sender is not None:
                sender.cancel()
            self.sessions.pop(session.session_id, None)
            writer.close()

    async def _sender_loop(self, session: Session, transport) -> None:
        while True:
            msg = await session.queue.get()
            try:
                await transport.send(json.dumps(msg))
            except (ConnectionError, RuntimeError):
                return

    def _push(self, session_id: str, msg: dict) -> None:
        session = self.sessions.get(session_id)
        if session is not None:
            session.queue.put_nowait(msg)

    # -- message dispatch ----------------------------------------------------------

    async def _dispatch(self, session: Session, text: str) -> None:
        try:
            msg = json.loads(text)
            if not isinstance(msg, dict) or "type" not in msg:
                raise ValueError("message must be an object with a 'type'")
        except ValueError as e:
            self._push(session.session_id, {"type": "error", "code": "bad_message", "msg": str(e)})
            return
        handler = getattr(self, f"_on_{msg['type']}", None)
        if handler is None:
            self._push(
                session.session_id,
                {"type": "error", "code": "bad_message", "msg": f"unknown type {msg['type']!r}"},
            )
            return
        ref = {"ref": msg["ref"]} if isinstance(msg.get("ref"), str) else {}
        try:
            await handler(session, msg)
        except LoadcycleError as e:
            code = _ERROR_CODES.get(type(e), "bad_message")
            self._push(session.session_id, {"type": "error", "code": code, "msg": str(e), **ref})
        except (KeyError, TypeError, ValueError) as e:
            self._push(
                session.session_id,
                {"type": "error", "code": "bad_message", "msg": str(e), **ref},
            )

    def _ack(self, session: Session, msg: dict, **extra) -> None:
        self._push(session.session_id, {"type": "ack", "ref": msg.get("ref", msg["type"]), **extra})

    async def _on_hello(self, session: Session, msg: dict) -> None:
        if int(msg.get("proto", 0)) != PROTO_VERSION:
            raise ValueError(f"unsupported protocol version {msg.get('proto')!r}")
        session.client = str(msg.get("client", ""))
        self._ack(session, msg, session_id=session.session_id)

    async def _on_stream_start(self, session: Session, msg: dict) -> None:
        if session.stream_task is not None and not session.stream_task.done():
            raise ValueError("stream already running")
        source = str(msg.get("source") or self.config.replay_source)
        rate = float(msg.get("rate_factor", self.config.rate_factor))
        cycles = load_replay_source(source, self.config.seed)
        session.state = "streaming"
        session.stream_task = asyncio.ensure_future(self._stream(session, cycles, rate))
        self._ack(session, msg, cycles=len(cycles))

    async def _stream(self, session: Session, cycles, rate: float) -> None:
        delay = DT / rate if rate > 0 else 0.0
        t0 = session.t[-1] + DT if session.t else 0.0
        for seq in cycles:
            lo = len(session.t)
            for i in range(len(seq)):
                t = t0 + seq.t[i]
                vals = tuple(float(seq.channels[c, i]) for c in range(len(CHANNELS)))
                session.t.append(t)
                session.values.append(vals)
                session.labels.append(None)
                self._push(
                    session.session_id,
                    {"type": "telemetry", "t": round(t, 6), **dict(zip(CHANNELS, vals))},
                )
                if delay:
                    await asyncio.sleep(delay)
            session.cycle_bounds.append((lo, len(session.t)))
            t0 = session.t[-1] + DT
        session.state = "labeling"
        self._push(session.session_id, {"type": "ack", "ref": "stream_end"})

    async def _on_label(self, session: Session, msg: dict) -> None:
        n = session.ingest_label(float(msg["t_start"]), float(msg["t_end"]), int(msg["state"]))
        session.state = "labeling"
        self._ack(session, msg, samples=n)

    async def _on_job_start(self, session: Session, msg: dict) -> None:
        if session.job_id is not None and self.jobs[session.job_id].phase == "running":
            raise JobAlreadyRunning(f"job {session.job_id} still running on this session")
        regime = str(msg.get("regime", "FTF")).upper()
        if regime not in ("FS", "FTF", "OTF"):
            raise ValueError(f"regime must be FS, FTF or OTF, got {regime!r}")
        cycles = session.labeled_cycles()
        if not cycles:
            raise InsufficientData("no fully labeled cycle in this session")
        if len(cycles) < 2:
            raise InsufficientData(
                "need at least two fully labeled cycles for the validation split"
            )
        overrides = dict(msg.get("overrides") or {})
        windows = segment_all(cycles, WindowConfig(ws=self.config.ws))
        if regime in ("FTF", "OTF"):
            if len(self.registry) == 0:
                raise MissingBaseModel("registry holds no base model")
            model = self.registry.load()
        else:
            model = build_model(ModelSpec("crdnn_2lstm", ws=self.config.ws), seed=self.config.seed)
        apply_mode(model, regime)
        cfg = self._job_config(regime, overrides)
        job = Job(job_id=f"job-{next(self._job_counter):04d}", session_id=session.session_id, regime=regime)
        self.jobs[job.job_id] = job
        session.job_id = job.job_id
        session.state = "training"
        self._ack(session, msg, job_id=job.job_id)
        asyncio.ensure_future(self._run_job(job, model, windows, cfg))

    def _job_config(self, regime: str, overrides: dict) -> TrainConfig:
        base = dict(
            mode=regime,
            patience=50,
            epochs_max=60,
            batch_size=128,
            lr0=1e-4,
            seed=self.config.seed,
        )
        base.update(self.config.job_defaults)
        if "epochs" in overrides:
            base["epochs_max"] = int(overrides.pop("epochs"))
        if "weights" in overrides:
            base["class_weights"] = tuple(float(w) for w in overrides.pop("weights"))
        for key in ("patience", "batch_size", "lr0", "l2_lambda", "seed", "val_fraction"):
            if key in overrides:
                cast = int if key in ("patience", "batch_size", "seed") else float
                base[key] = cast(overrides.pop(key))
        if overrides:
            raise ValueError(f"unknown overrides: {sorted(overrides)}")
        return TrainConfig(**base)

    async def _run_job(self, job: Job, model: Model, windows: WindowSet, cfg: TrainConfig) -> None:
        loop = asyncio.get_running_loop()

        def on_progress(epoch: int, train_cost: float, val_cost: float) -> None:
            loop.call_soon_threadsafe(self._job_progress, job, epoch, train_cost, val_cost)

        def blocking_train():
            t0 = time.perf_counter()
            report = train(model, windows, cfg, progress=on_progress)
            return report, time.perf_counter() - t0

        try:
            report, _ = await loop.run_in_executor(self.executor, blocking_train)
        except Exception as e:  # noqa: BLE001 - job failures are reported, not raised
            job.phase = "failed"
            job.error = str(e)
            self._push(job.session_id, {"type": "error", "code": "job_failed",
                                        "msg": str(e), "job_id": job.job_id})
            return
        version = self.registry.add(model)
        job.phase = "stopped_early" if report.stop_epoch < cfg.epochs_max else "done"
        m = report.metrics_val
        job.result = {
            "type": "result",
            "job_id": job.job_id,
            "micro_f1": m.micro_f1,
            "confusion": m.cm.counts.tolist(),
            "guard_ok": m.guard_ok,
            "trainable_params": report.trainable_params,
            "wall_time_s": report.wall_time_s,
            "best_epoch": report.best_epoch,
            "stop_epoch": report.stop_epoch,
            "model_version": version,
        }
        self._push(job.session_id, job.result)
        session = self.sessions.get(job.session_id)
        if session is not None:
            session.state = "labeling"

    def _job_progress(self, job: Job, epoch: int, train_cost: float, val_cost: float) -> None:
        job.epoch, job.train_cost, job.val_cost = epoch, train_cost, val_cost
        self._push(
            job.session_id,
            {
                "type": "progress",
                "job_id": job.job_id,
                "epoch": epoch,
                "train_cost": train_cost,
                "val_cost": val_cost,
            },
        )

    async def _on_job_status(self, session: Session, msg: dict) -> None:
        job = self.jobs.get(str(msg["job_id"]))
        if job is None:
            raise UnknownJob(f"no job {msg.get('job_id')!r}")
        if job.result is not None:
            self._push(session.session_id, job.result)
        elif job.phase == "failed":
            self._push(session.session_id, {"type": "error", "code": "job_failed",
                                            "msg": job.error or "", "job_id": job.job_id})
        else:
            self._push(
                session.session_id,
                {
                    "type": "progress",
                    "job_id": job.job_id,
                    "epoch": job.epoch,
                    "train_cost": job.train_cost,
                    "val_cost": job.val_cost,
                },
            )

    async def _on_registry_list(self, session: Session, msg: dict) -> None:
        models = [
            {"version": e.version, "file": e.file, "sha256": e.sha256, "active": e.active}
            for e in self.registry.list_models()
        ]
        self._ack(session, msg, models=models)

    async def _on_promote(self, session: Session, msg: dict) -> None:
        self.registry.promote(int(msg["version"]))
        self._ack(session, msg, active=self.registry.active_version())


def seed_registry_with_base(registry_dir: str, spec_ws: int = 15, seed: int = 0,
                            base_model: Model | None = None) -> int:
    """Put a base model into an empty registry (fresh build unless one is given)."""
    reg = ModelRegistry(registry_dir)
    if len(reg):
        return reg.active_version()
    model = base_model or build_model(ModelSpec("crdnn_2lstm", ws=spec_ws), seed=seed)
    return reg.add(model, activate=True)
