"""Train a small base classifier on synthetic source-domain cycles.

Desk-scale version of pre-training the recognizer on the big fleet
dataset: 20 cycles instead of 119 and a tight epoch cap so it finishes
in about a minute. See demos/04 for the full transfer story.
"""

from loadcycle.core import WindowConfig, segment_all
from loadcycle.nn import ModelSpec, build_model, save_model
from loadcycle.synth import generate_preset
from loadcycle.train import TrainConfig, train

cycles = generate_preset("source", seed=11, n_cycles=20)
windows = segment_all(cycles, WindowConfig(ws=15))
print(f"{len(cycles)} cycles -> {len(windows)} windows of [5 x 15]")

model = build_model(ModelSpec("crdnn_2lstm", ws=15), seed=0)
cfg = TrainConfig(epochs_max=40, patience=40, seed=0)
report = train(
    model,
    windows,
    cfg,
    progress=lambda e, tc, vc: print(f"  epoch {e:3d}  train {tc:.4f}  val {vc:.4f}")
    if e % 5 == 0
    else None,
)

m = report.metrics_val
print(f"\nstopped at epoch {report.stop_epoch} (best {report.best_epoch})")
print(f"validation micro F1 {m.micro_f1:.4f}, guard ok: {m.guard_ok}")
print(f"forward latency {m.avg_test_ms_per_window:.3f} ms/window")
print("confusion (rows = truth):")
print(m.cm.counts)

save_model(model, "demo_base.lcm")
print("saved -> demo_base.lcm")
