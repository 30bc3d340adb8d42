"""Sequence file format: one labeled telemetry recording per file.

Line-oriented text: a header ``# loadcycle-v1 rate=5`` followed by one
record per sample, comma-separated
``t,p_bu,v_veh,u_js,p_cc,p_bo,label`` with values as 64-bit decimal text
(shortest round-trip repr).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import Origin, LabeledSequence, N_CHANNELS

HEADER = "# loadcycle-v1 rate=5"


def save_sequence(seq: LabeledSequence, path: str | os.PathLike) -> None:
    path = Path(path)
    lines = [HEADER]
    for i in range(len(seq)):
        vals = [repr(float(seq.t[i]))]
        vals += [repr(float(seq.channels[c, i])) for c in range(N_CHANNELS)]
        vals.append(str(int(seq.labels[i])))
        lines.append(",".join(vals))
    path.write_text("\n".join(lines) + "\n")


def load_sequence(
    path: str | os.PathLike, origin: Origin = Origin.SOURCE, cycle_id: str | None = None
) -> LabeledSequence:
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or not text[0].startswith("# loadcycle-v1"):
        raise ValueError(f"{path}: missing loadcycle-v1 header")
    rows = [line for line in text[1:] if line and not line.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.array([[float(f) for f in line.split(",")] for line in rows])
    if data.shape[1] != 2 + N_CHANNELS:
        raise ValueError(f"{path}: expected {2 + N_CHANNELS} fields per record")
    channels = data[:, 1 : 1 + N_CHANNELS].T.copy()
    np.clip(channels[2], -1.0, 1.0, out=channels[2])  # ingestion clamp of u_js
    return LabeledSequence(
        t=data[:, 0],
        channels=channels,
        labels=data[:, -1].astype(np.int64),
        origin=origin,
        cycle_id=cycle_id if cycle_id is not None else path.stem,
    )


def save_dataset(seqs: Iterable[LabeledSequence], directory: str | os.PathLike) -> list[Path]:
    """One file per sequence, named after its cycle_id."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, seq in enumerate(seqs):
        name = seq.cycle_id or f"cycle-{i:04d}"
        p = directory / f"{name}.csv"
        save_sequence(seq, p)
        paths.append(p)
    return paths


def load_dataset(
    directory: str | os.PathLike, origin: Origin = Origin.SOURCE
) -> list[LabeledSequence]:
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no .csv sequence files under {directory}")
    return [load_sequence(p, origin=origin) for p in files]
