"""Command-line front door for scripted, reproducible experiments.

Subcommands: gen, train, transfer, eval, bench, serve, gradcheck.
Every run writes a manifest of its resolved options into the output
directory. Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import WindowConfig, segment_all
from .errors import LoadcycleError
from .nn import ModelSpec, VARIANTS, build_model, load_model, save_model
from .seqio import load_dataset, save_dataset
from .synth import PRESETS, generate_preset
from .train import TrainConfig, apply_mode, evaluate, grad_check, train


def _write_manifest(out_dir: Path, args: argparse.Namespace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    (out_dir / "manifest.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")


def _train_config(args: argparse.Namespace, mode: str = "FS") -> TrainConfig:
    cfg = TrainConfig(mode=mode, seed=args.seed)
    fields = {}
    for name in ("batch_size", "lr0", "patience", "epochs_max", "l2_lambda", "val_fraction"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    if getattr(args, "class_weights", None):
        fields["class_weights"] = tuple(args.class_weights)
    return replace(cfg, **fields) if fields else cfg


def _metrics_record(metrics) -> dict:
    return {
        "micro_f1": metrics.micro_f1,
        "confusion": metrics.cm.counts.tolist(),
        "guard_ok": metrics.guard_ok,
        "precision": list(np.round(metrics.precision, 6)),
        "recall": list(np.round(metrics.recall, 6)),
        "avg_test_ms_per_window": metrics.avg_test_ms_per_window,
    }


# -- subcommands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    out = Path(args.out)
    seqs = generate_preset(args.preset, seed=args.seed, n_cycles=args.cycles)
    paths = save_dataset(seqs, out / args.preset)
    _write_manifest(out, args)
    print(f"wrote {len(paths)} cycles to {out / args.preset}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    _write_manifest(out, args)
    seqs = load_dataset(args.data)
    windows = segment_all(seqs, WindowConfig(ws=args.ws, label_mode=args.label_mode,
                                             tail_k=args.tail_k))
    model = build_model(ModelSpec(args.variant, ws=args.ws), seed=args.seed)
    cfg = _train_config(args)
    report = train(model, windows, cfg, progress=_progress_printer(args))
    save_model(model, out / "model.lcm")
    record = {
        "variant": args.variant,
        "ws": args.ws,
        "windows": len(windows),
        "trainable_params": report.trainable_params,
        "best_epoch": report.best_epoch,
        "stop_epoch": report.stop_epoch,
        "wall_time_s": report.wall_time_s,
        "val": _metrics_record(report.metrics_val),
    }
    (out / "train_report.json").write_text(json.dumps(record, indent=2) + "\n")
    print(f"model -> {out / 'model.lcm'}  val micro F1 {report.metrics_val.micro_f1:.4f}")
    return 0


def cmd_transfer(args) -> int:
    out = Path(args.out)
    _write_manifest(out, args)
    base = load_model(args.base)
    seqs = load_dataset(args.data)
    windows = segment_all(seqs, WindowConfig(ws=base.spec.ws))
    model = base.clone()
    apply_mode(model, args.mode.upper(), args.backbone_lr_multiplier)
    cfg = _train_config(args, mode=args.mode.upper())
    report = train(model, windows, cfg, progress=_progress_printer(args))
    save_model(model, out / "model.lcm")
    record = {
        "mode": args.mode.upper(),
        "base": str(args.base),
        "trainable_params": report.trainable_params,
        "best_epoch": report.best_epoch,
        "stop_epoch": report.stop_epoch,
        "wall_time_s": report.wall_time_s,
        "val": _metrics_record(report.metrics_val),
    }
    (out / "transfer_report.json").write_text(json.dumps(record, indent=2) + "\n")
    print(f"model -> {out / 'model.lcm'}  val micro F1 {report.metrics_val.micro_f1:.4f}")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    _write_manifest(out, args)
    model = load_model(args.model)
    seqs = load_dataset(args.data)
    windows = segment_all(seqs, WindowConfig(ws=model.spec.ws))
    metrics = evaluate(model, windows, timed_windows=args.timed_windows)
    record = _metrics_record(metrics)
    (out / "metrics.json").write_text(json.dumps(record, indent=2) + "\n")
    print(json.dumps(record, indent=2))
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out)
    _write_manifest(out, args)
    if args.data:
        seqs = load_dataset(args.data)
    else:
        seqs = generate_preset("source", seed=args.seed, n_cycles=args.cycles)
    rows = []
    for variant in args.variants:
        for ws in args.ws:
            windows = segment_all(seqs, WindowConfig(ws=ws))
            model = build_model(ModelSpec(variant, ws=ws), seed=args.seed)
            cfg = _train_config(args)
            report = train(model, windows, cfg)
            m = report.metrics_val
            row = {
                "variant": variant,
                "ws": ws,
                "training_time_s": round(report.wall_time_s, 2),
                "micro_f1_pct": round(100 * m.micro_f1, 2),
                "avg_test_ms": round(m.avg_test_ms_per_window, 4),
                "guard": "Yes" if m.guard_ok else "No",
                "trainable_params": report.trainable_params,
            }
            rows.append(row)
            print(
                f"{variant:16s} ws={ws:2d}  {row['training_time_s']:8.2f}s  "
                f"F1 {row['micro_f1_pct']:6.2f}%  {row['avg_test_ms']:.4f} ms  "
                f"guard {row['guard']:3s}  params {row['trainable_params']}",
                flush=True,
            )
    (out / "bench.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    worst = 0.0
    for variant in args.variants:
        for ws in args.ws:
            for seed in args.seeds:
                err = grad_check(ModelSpec(variant), ws=ws, seed=seed, eps=args.eps)
                worst = max(worst, err)
                status = "ok" if err < args.tol else "FAIL"
                print(f"{variant:16s} ws={ws:2d} seed={seed}  max rel err {err:.3e}  {status}")
    if args.out:
        _write_manifest(Path(args.out), args)
    print(f"worst {worst:.3e} (tolerance {args.tol:g})")
    return 0 if worst < args.tol else 1


def cmd_serve(args) -> int:
    from .service import EcuService, ServeConfig, seed_registry_with_base

    if args.base:
        base = load_model(args.base)
        seed_registry_with_base(args.registry, base_model=base)
    elif args.seed_registry:
        seed_registry_with_base(args.registry, spec_ws=args.ws, seed=args.seed)
    config = ServeConfig(
        host=args.host,
        port=args.port,
        registry_dir=args.registry,
        replay_source=args.replay,
        rate_factor=args.rate_factor,
        ws=args.ws,
        seed=args.seed,
    )
    if args.out:
        _write_manifest(Path(args.out), args)
    service = EcuService(config)

    async def main():
        await service.start()
        print(f"listening on {config.host}:{service.port} (TCP lines + WebSocket)", flush=True)
        await service.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def _progress_printer(args):
    if not getattr(args, "verbose", False):
        return None
    return lambda e, tc, vc: print(f"epoch {e}: train {tc:.4f} val {vc:.4f}", flush=True)


# -- parser ---------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _variant_list(text: str) -> list[str]:
    out = [v for v in text.split(",") if v]
    for v in out:
        if v not in VARIANTS:
            raise argparse.ArgumentTypeError(f"unknown variant {v!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadcycle", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out" if out_required else None)
        sp.add_argument("--verbose", action="store_true")

    def train_opts(sp):
        sp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        sp.add_argument("--lr0", type=float, default=None)
        sp.add_argument("--patience", type=int, default=None)
        sp.add_argument("--epochs-max", dest="epochs_max", type=int, default=None)
        sp.add_argument("--l2-lambda", dest="l2_lambda", type=float, default=None)
        sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
        sp.add_argument("--class-weights", dest="class_weights", type=float, nargs=3, default=None)

    sp = sub.add_parser("gen", help="write synthetic preset datasets to files")
    sp.add_argument("--preset", choices=sorted(PRESETS), required=True)
    sp.add_argument("--cycles", type=int, default=None, help="override the preset cycle count")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="train a base model from scratch")
    sp.add_argument("--data", required=True, help="directory of sequence files")
    sp.add_argument("--variant", choices=VARIANTS, default="crdnn_2lstm")
    sp.add_argument("--ws", type=int, default=15)
    sp.add_argument("--label-mode", dest="label_mode", choices=("majority", "tail"), default="majority")
    sp.add_argument("--tail-k", dest="tail_k", type=int, default=3)
    train_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("transfer", help="fine-tune a base model (FTF/OTF)")
    sp.add_argument("--mode", choices=("ftf", "otf", "fs"), required=True)
    sp.add_argument("--base", required=True, help="base model file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--backbone-lr-multiplier", type=float, default=0.1)
    train_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("eval", help="evaluate a model on a dataset")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--timed-windows", dest="timed_windows", type=int, default=1000)
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="architecture x window-size comparison grid")
    sp.add_argument("--data", default=None, help="sequence dir; default: synthetic source preset")
    sp.add_argument("--cycles", type=int, default=40, help="synthetic cycles when no --data")
    sp.add_argument("--variants", type=_variant_list, default=list(VARIANTS))
    sp.add_argument("--ws", type=_int_list, default=[5, 9, 15, 25])
    train_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient oracle sweep")
    sp.add_argument("--variants", type=_variant_list, default=list(VARIANTS))
    sp.add_argument("--ws", type=_int_list, default=[5, 15])
    sp.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--tol", type=float, default=1e-4)
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("serve", help="run the ECU-emulating service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8471)
    sp.add_argument("--registry", default="registry")
    sp.add_argument("--replay", default="synth:target:n=2", help="default stream source")
    sp.add_argument("--rate-factor", dest="rate_factor", type=float, default=50.0)
    sp.add_argument("--ws", type=int, default=15)
    sp.add_argument("--base", default=None, help="model file to seed an empty registry")
    sp.add_argument("--seed-registry", dest="seed_registry", action="store_true",
                    help="seed an empty registry with a freshly built model")
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_serve)

    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LoadcycleError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
