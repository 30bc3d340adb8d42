"""The on-site adaptation story at miniature scale.

A base model trained on the source preset degrades on the target preset
(different driver, implement control, shovel size and labeling
convention); fine-tuning only the dense head (FTF) is the fastest fix,
fine-tuning everything with a reduced backbone learning rate (OTF)
recovers more, from-scratch on all data is the slow benchmark.
"""

from loadcycle.core import WindowConfig, segment_all
from loadcycle.nn import ModelSpec, build_model
from loadcycle.synth import generate_preset
from loadcycle.train import TrainConfig, evaluate, run_experiment, train

wc = WindowConfig(ws=15)
w_src = segment_all(generate_preset("source", seed=11, n_cycles=20), wc)
w_tgt = segment_all(generate_preset("target", seed=12, n_cycles=8), wc)
w_tgt_test = segment_all(generate_preset("target", seed=13, n_cycles=8), wc)

print("pre-training on the source domain...")
base = build_model(ModelSpec("crdnn_2lstm", ws=15), seed=0)
train(base, w_src, TrainConfig(epochs_max=40, patience=40, seed=0))
print(f"  base on target windows: micro F1 {evaluate(base, w_tgt_test).micro_f1:.4f} (degraded)\n")

cfg = TrainConfig(patience=25, epochs_max=50, seed=1)
print(f"{'regime':10s} {'F1 target':>9s} {'params':>7s} {'samples/ep':>10s} {'time':>7s}")
for regime in ("ND+FTF", "ND+OTF", "ND+FS", "ND+PD+FS"):
    rep = run_experiment(
        regime, w_src, w_tgt, cfg, base_model=base, eval_target=w_tgt_test
    )
    print(
        f"{regime:10s} {rep.f1_nd:9.4f} {rep.trainable_params:7d} "
        f"{rep.samples_per_epoch:10d} {rep.training_time_s:6.1f}s"
    )
