"""Deterministic synthetic Y-cycle telemetry with controllable domain shift.

A cycle walks the state chain traveling -> loading -> traveling ->
unloading -> traveling at 5 Hz. Signal shapes are piecewise-smooth
canonical templates plus seeded noise: the joystick commands direction
reversals, velocity follows the joystick with lag, bucket/boom pressures
rise while loading, stay high while carrying and spike at the dump, and
the closed-circuit pressure tracks velocity demand. Fidelity target is
qualitative (correct correlations and label semantics), not waveform
realism.

The target-domain preset differs from the source preset in driver
(joystick ramp steepness), implement control (stepped vs smooth bucket
fill), shovel size (pressure amplitude) and labeling convention (samples
with a still-fluctuating bucket-pressure derivative near transitions are
labeled traveling).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DT, LabeledSequence, Origin, WorkState

PRESET_SOURCE_CYCLES = 119
PRESET_TARGET_CYCLES = 24

#: Samples (per side, capped at a third of the segment) a relabeling pass
#: may eat into a loading/unloading segment.
TRANSITION_NEIGHBORHOOD = 4


@dataclass(frozen=True)
class DomainParams:
    joystick_style: float = 1.0
    shovel_scale: float = 1.0
    implement_profile: str = "smooth"  # or "stepped"
    label_convention: str = "standard"  # or "dpbu_fluctuation"
    noise_std: tuple[float, float, float, float, float] = (0.8, 0.06, 0.02, 0.5, 0.7)
    dur_traveling: tuple[float, float] = (4.0, 8.0)
    dur_loading: tuple[float, float] = (3.0, 6.0)
    dur_unloading: tuple[float, float] = (2.0, 4.0)

    def __post_init__(self):
        if self.joystick_style <= 0 or self.shovel_scale <= 0:
            raise ValueError("joystick_style and shovel_scale must be positive")
        if self.implement_profile not in ("smooth", "stepped"):
            raise ValueError(f"unknown implement_profile {self.implement_profile!r}")
        if self.label_convention not in ("standard", "dpbu_fluctuation"):
            raise ValueError(f"unknown label_convention {self.label_convention!r}")
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise_std entries must be non-negative")
        for lo, hi in (self.dur_traveling, self.dur_loading, self.dur_unloading):
            if lo < 1.0 or hi < lo:
                raise ValueError("duration ranges must be non-empty with min >= 1 s")


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _stepped(u: np.ndarray, steps: int = 3) -> np.ndarray:
    # staircase fill: quick bursts with plateaus, crowd-back style
    u = np.clip(u, 0.0, 1.0 - 1e-9)
    k = np.floor(u * steps)
    frac = u * steps - k
    burst = np.clip(frac / 0.35, 0.0, 1.0)
    return (k + _smoothstep(burst)) / steps


def _first_order(target: np.ndarray, rate: float, start: float = 0.0) -> np.ndarray:
    out = np.empty_like(target)
    prev = start
    for i, tgt in enumerate(target):
        prev = prev + rate * (tgt - prev)
        out[i] = prev
    return out


def generate_cycle(
    params: DomainParams,
    seed,
    cycle_id: str = "",
    origin: Origin = Origin.SOURCE,
) -> LabeledSequence:
    """One Y-cycle; identical (params, seed) pairs give bit-identical output."""
    rng = np.random.default_rng(seed)

    durs = [
        rng.uniform(*params.dur_traveling),
        rng.uniform(*params.dur_loading),
        rng.uniform(*params.dur_traveling),
        rng.uniform(*params.dur_unloading),
        rng.uniform(*params.dur_traveling),
    ]
    lengths = [max(5, int(round(d / DT))) for d in durs]
    chain = [WorkState.TRAVELING, WorkState.LOADING, WorkState.TRAVELING,
             WorkState.UNLOADING, WorkState.TRAVELING]
    n = sum(lengths)
    bounds = np.cumsum([0] + lengths)
    labels = np.concatenate([np.full(m, int(s)) for s, m in zip(chain, lengths)])

    seg_pos = np.empty(n)  # progress in [0,1) inside each segment
    for s, e in zip(bounds[:-1], bounds[1:]):
        seg_pos[s:e] = np.arange(e - s) / (e - s)

    # joystick: +1 to the pile, -1 reversing to the truck, +1 leaving; idle while working
    js_target = np.concatenate([
        np.full(lengths[0], 1.0),
        np.full(lengths[1], 0.0),
        np.full(lengths[2], -1.0),
        np.full(lengths[3], 0.0),
        np.full(lengths[4], 1.0),
    ])
    js_rate = min(0.9, 0.15 * params.joystick_style)
    u_js = _first_order(js_target, js_rate)

    v_max = rng.uniform(1.6, 2.4)
    v_veh = _first_order(u_js * v_max, 0.25)

    # bucket pressure: fill while loading, carry high, spike and drop at the dump
    base_bu = rng.uniform(16.0, 20.0)
    peak_bu = rng.uniform(60.0, 75.0) * params.shovel_scale
    fill = _stepped(seg_pos) if params.implement_profile == "stepped" else _smoothstep(seg_pos)
    p_bu = np.full(n, base_bu)
    s1, e1 = bounds[1], bounds[2]
    p_bu[s1:e1] = base_bu + (peak_bu - base_bu) * fill[s1:e1]
    s2, e2 = bounds[2], bounds[3]
    p_bu[s2:e2] = peak_bu * (1.0 - 0.04 * seg_pos[s2:e2])
    s3, e3 = bounds[3], bounds[4]
    u3 = seg_pos[s3:e3]
    carry = peak_bu * 0.96
    # steep spike then a fast fall to a flat base: keeps the pressure
    # derivative decisively above/below the fluctuation threshold, never
    # hovering at it
    rise = 0.14 * peak_bu * np.clip(u3 / 0.15, 0.0, 1.0)
    fall = (carry + 0.14 * peak_bu - base_bu) * _smoothstep((u3 - 0.2) / 0.35)
    p_bu[s3:e3] = np.maximum(carry + rise - fall, base_bu * 0.9)

    # boom pressure: lifts late in loading, carries, peaks at the dump
    base_bo = rng.uniform(10.0, 14.0)
    high_bo = rng.uniform(42.0, 55.0) * params.shovel_scale
    p_bo = np.full(n, base_bo)
    p_bo[s1:e1] = base_bo + (high_bo - base_bo) * _smoothstep((seg_pos[s1:e1] - 0.4) / 0.6)
    p_bo[s2:e2] = high_bo
    p_bo[s3:e3] = high_bo + 0.2 * high_bo * _smoothstep(seg_pos[s3:e3] / 0.4) \
        - (1.2 * high_bo - base_bo) * _smoothstep((seg_pos[s3:e3] - 0.4) / 0.55)
    p_bo[s3:e3] = np.maximum(p_bo[s3:e3], base_bo * 0.9)

    # closed-circuit drivetrain pressure follows velocity demand
    dv = np.abs(np.diff(v_veh, prepend=v_veh[0]))
    p_cc = 8.0 + 12.0 * np.abs(v_veh) / v_max + 30.0 * dv

    noise = params.noise_std
    p_bu = p_bu + rng.normal(0.0, noise[0], n)
    v_veh = v_veh + rng.normal(0.0, noise[1], n)
    u_js = np.clip(u_js + rng.normal(0.0, noise[2], n), -1.0, 1.0)
    p_cc = p_cc + rng.normal(0.0, noise[3], n)
    p_bo = p_bo + rng.normal(0.0, noise[4], n)

    if params.label_convention == "dpbu_fluctuation":
        labels = _relabel_fluctuating(labels, p_bu)

    t = np.arange(n) * DT
    channels = np.stack([p_bu, v_veh, u_js, p_cc, p_bo])
    return LabeledSequence(
        t=t, channels=channels, labels=labels, origin=origin, cycle_id=cycle_id
    )


def dp_bu(p_bu: np.ndarray) -> np.ndarray:
    """Bucket-pressure derivative: first difference (first sample repeats)."""
    return np.diff(p_bu, prepend=p_bu[0])


def _relabel_fluctuating(labels: np.ndarray, p_bu: np.ndarray) -> np.ndarray:
    # Target-domain convention: around state transitions, samples whose
    # bucket pressure is still fluctuating count as traveling. Threshold is
    # 2x the per-cycle median |dp_bu|; a 3-sample centered mean smooths the
    # statistic so single-sample sensor noise cannot flip the decision; the
    # pass never eats more than a third of a loading/unloading segment from
    # either side.
    out = labels.copy()
    d = np.abs(dp_bu(p_bu))
    d = np.convolve(d, np.ones(3) / 3.0, mode="same")
    thr = 2.0 * np.median(d)
    runs = _runs(labels)
    for state, s, e in runs:
        if state == int(WorkState.TRAVELING):
            continue
        nb = min(TRANSITION_NEIGHBORHOOD, (e - s) // 3)
        for idx in list(range(s, s + nb)) + list(range(e - nb, e)):
            if d[idx] > thr:
                out[idx] = int(WorkState.TRAVELING)
    return out


def _runs(labels: np.ndarray) -> list[tuple[int, int, int]]:
    starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
    ends = np.r_[starts[1:], len(labels)]
    return [(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def generate_dataset(
    n_cycles: int,
    params: DomainParams,
    seed: int,
    origin: Origin = Origin.SOURCE,
    id_prefix: str = "cycle",
) -> list[LabeledSequence]:
    """n independent cycles, each from a sub-seed derived from `seed`."""
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_cycles)
    return [
        generate_cycle(params, child, cycle_id=f"{id_prefix}-{i:03d}", origin=origin)
        for i, child in enumerate(children)
    ]


def source_params() -> DomainParams:
    return DomainParams()


def target_params() -> DomainParams:
    return DomainParams(
        joystick_style=2.6,
        shovel_scale=1.6,
        implement_profile="stepped",
        label_convention="dpbu_fluctuation",
        noise_std=(1.0, 0.07, 0.025, 0.6, 0.9),
        dur_traveling=(3.0, 6.5),
        dur_loading=(2.5, 5.0),
        dur_unloading=(1.5, 3.5),
    )


PRESETS = {
    "source": (source_params, PRESET_SOURCE_CYCLES, Origin.SOURCE),
    "target": (target_params, PRESET_TARGET_CYCLES, Origin.TARGET),
}


def generate_preset(
    name: str, seed: int, n_cycles: int | None = None
) -> list[LabeledSequence]:
    """The source preset (119 cycles) or the target preset (24 cycles)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    make_params, default_n, origin = PRESETS[name]
    return generate_dataset(
        n_cycles if n_cycles is not None else default_n,
        make_params(),
        seed=seed,
        origin=origin,
        id_prefix=name,
    )
