"""Scripted operator session against the ECU service.

Starts the service in-process, streams two synthetic cycles at high
speed, labels them from ground truth, launches a dense-head fine-tune
job with custom epochs/weights, and prints the live progress plus the
final accuracy report the app would render.
"""

import asyncio
import json

import numpy as np

from loadcycle.service import EcuService, ServeConfig, seed_registry_with_base
from loadcycle.service.server import load_replay_source


async def main():
    seed_registry_with_base("demo_registry", spec_ws=15, seed=0)
    service = EcuService(ServeConfig(port=0, registry_dir="demo_registry"))
    await service.start()
    print(f"service on port {service.port}")

    reader, writer = await asyncio.open_connection("127.0.0.1", service.port)

    async def send(**msg):
        writer.write((json.dumps(msg) + "\n").encode())
        await writer.drain()

    async def recv():
        return json.loads(await reader.readline())

    await send(type="hello", client="demo", proto=1)
    print("hello ->", await recv())

    source = "synth:target:n=2:seed=42"
    await send(type="stream_start", source=source, rate_factor=0)
    frames = 0
    while True:
        msg = await recv()
        if msg["type"] == "telemetry":
            frames += 1
        elif msg.get("ref") == "stream_end":
            break
    print(f"streamed {frames} telemetry frames")

    # label from ground truth, one interval per state segment
    t0 = 0.0
    for seq in load_replay_source(source, 0):
        lab = seq.labels
        starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
        ends = np.r_[starts[1:], len(lab)]
        for s, e in zip(starts, ends):
            await send(
                type="label",
                t_start=t0 + seq.t[s],
                t_end=t0 + seq.t[e - 1] + 0.2,
                state=int(lab[s]),
            )
            await recv()
        t0 += seq.t[-1] + 0.2
    print("labeled both cycles")

    await send(
        type="job_start",
        regime="FTF",
        overrides={"epochs": 6, "patience": 5, "weights": [1.0, 1.5, 1.5]},
    )
    print("job ->", await recv())
    while True:
        msg = await recv()
        if msg["type"] == "progress":
            print(f"  epoch {msg['epoch']}  train {msg['train_cost']:.4f}  val {msg['val_cost']:.4f}")
        elif msg["type"] == "result":
            print("\nTest Accuracy view payload:")
            print(f"  micro F1          {msg['micro_f1']:.4f}")
            print(f"  confusion         {msg['confusion']}")
            print(f"  guard ok          {msg['guard_ok']}")
            print(f"  trainable params  {msg['trainable_params']}")
            print(f"  model version     {msg['model_version']}")
            break

    writer.close()
    await service.stop()


if __name__ == "__main__":
    asyncio.run(main())
