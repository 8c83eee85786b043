"""Command-line front end.

Subcommands: train, prune-run, cost, reproduce-tables, export-colormap.
Exit codes: 0 success, 1 internal or numeric failure, 2 config/IO error.

DENSIPRUNE_THREADS caps BLAS worker threads; it must take effect before
numpy loads, which is why the cap runs at the very top of this module.
"""

import os


def _cap_threads():
    cap = os.environ.get("DENSIPRUNE_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_cap_threads()

import argparse
import json
import sys
import time
from pathlib import Path

from densiprune import __version__
from densiprune.arch import builtin_arch, load_arch
from densiprune.checkpoint import CheckpointError, restore_model, save_checkpoint
from densiprune.config import ConfigError, RunConfig
from densiprune.colormap import export_colormaps
from densiprune.costs import (network_cost, ops_reduction, params_reduction,
                              training_complexity)
from densiprune.density import write_history_csv
from densiprune.engine import TrainingDiverged, run_pruning_in_training, train_network
from densiprune.network import instantiate
from densiprune.published import (MEMORY_COMPLEXITY_CELLS, SCENARIOS,
                                  TRAINING_COMPLEXITY_CELLS, complexity_chain)
from densiprune.seeding import derive_seed

BUILTIN_ARCHES = ("vgg19", "resnet18", "vgg-lite", "resnet-lite")


def _load_run_config(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "output_dir", None) is not None:
        overrides["output_dir"] = args.output_dir
    return RunConfig.from_file(args.config, overrides=overrides)


def _open_log(out_dir):
    # Timestamps live here and only here; data files stay byte-deterministic.
    return open(Path(out_dir) / "run.log", "w")


def _log(fh, message):
    fh.write(f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] {message}\n")
    fh.flush()


def _setup_run(args):
    cfg = _load_run_config(args)
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(out_dir)
    train_data, eval_data = cfg.load_datasets()
    arch = cfg.resolve_arch(tuple(train_data.images.shape[1:]),
                            train_data.num_classes)
    return cfg, out_dir, train_data, eval_data, arch


def cmd_train(args):
    cfg, out_dir, train_data, eval_data, arch = _setup_run(args)
    log = _open_log(out_dir)
    _log(log, f"train: arch={arch.name} samples={train_data.count} "
              f"epochs={cfg.epochs_budget} seed={cfg.seed}")
    model = instantiate(arch, derive_seed(cfg.seed, "init", 0))
    history = train_network(
        model, train_data, eval_data, cfg.optimizer(), cfg.batch_size,
        cfg.epochs_budget, cfg.seed, ("train",),
        progress=lambda tag, s: _log(
            log, f"epoch {s.epoch}: acc={s.accuracy:.4f} total_ae={s.total_ae:.4f}"))
    write_history_csv(history, out_dir / "ae_history.csv")
    save_checkpoint(model, out_dir / "model.ckpt")
    report = network_cost(arch)
    metrics = {
        "arch": arch.name,
        "epochs": len(history),
        "final_accuracy": history.last().accuracy,
        "final_total_ae": history.last().total_ae,
        "total_params": report.total_params,
        "total_macs": report.total_macs,
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _log(log, "train: done")
    log.close()
    print(f"trained {arch.name} for {len(history)} epochs; "
          f"accuracy {history.last().accuracy:.4f}; outputs in {out_dir}")
    return 0


def cmd_prune_run(args):
    cfg, out_dir, train_data, eval_data, arch = _setup_run(args)
    criteria = cfg.criteria()
    log = _open_log(out_dir)
    _log(log, f"prune-run: arch={arch.name} samples={train_data.count} "
              f"budget={cfg.epochs_budget} max_rounds={criteria.max_rounds} "
              f"seed={cfg.seed}")
    baseline_report = network_cost(arch)
    events_fh = open(out_dir / "events.jsonl", "w")

    def emit(obj):
        events_fh.write(json.dumps(obj, sort_keys=True) + "\n")
        events_fh.flush()

    def on_stage(stage):
        write_history_csv(stage.history,
                          out_dir / f"ae_history_net{stage.network_index}.csv")
        report = network_cost(stage.arch)
        p_red = params_reduction(baseline_report, report)
        o_red = ops_reduction(baseline_report, report)
        emit({"type": "stage", "index": stage.network_index,
              "epochs_to_rho": stage.epochs_trained,
              "final_accuracy": stage.final_accuracy,
              "profile": stage.profile,
              "prunable_sizes": list(stage.arch.prunable_sizes()),
              "total_params": report.total_params,
              "total_macs": report.total_macs,
              "params_reduction": p_red, "ops_reduction": o_red})
        print(f"net{stage.network_index}: {stage.epochs_trained} epochs to rho, "
              f"params reduction {p_red:.1f}x, ops reduction {o_red:.1f}x, "
              f"profile {stage.profile}")
        _log(log, f"stage net{stage.network_index} complete")

    def on_event(event):
        emit({"type": "prune", "from_index": event.from_index,
              "epoch": event.epoch, "ae_used": list(event.ae_used),
              "old_sizes": list(event.old_sizes),
              "new_sizes": list(event.new_sizes)})
        _log(log, f"pruned net{event.from_index} -> net{event.from_index + 1}")

    result = run_pruning_in_training(
        arch, train_data, eval_data, cfg.optimizer(), criteria, cfg.seed,
        cfg.batch_size, cfg.epochs_budget, on_stage=on_stage, on_event=on_event,
        progress=lambda tag, s: _log(
            log, f"{tag} epoch {s.epoch}: acc={s.accuracy:.4f} "
                 f"total_ae={s.total_ae:.4f}"))

    final_report = network_cost(result.final_arch)
    if len(result.final_history):
        write_history_csv(result.final_history, out_dir / "ae_history_final.csv")
    save_checkpoint(result.final_model, out_dir / "final_model.ckpt")
    final_accuracy = (result.final_history.last().accuracy
                      if len(result.final_history) else None)
    emit({"type": "final", "arch": result.final_arch.name,
          "prunable_sizes": list(result.final_arch.prunable_sizes()),
          "epochs": len(result.final_history),
          "final_accuracy": final_accuracy,
          "total_params": final_report.total_params,
          "total_macs": final_report.total_macs,
          "params_reduction": params_reduction(baseline_report, final_report),
          "ops_reduction": ops_reduction(baseline_report, final_report)})
    events_fh.close()
    cost_payload = {
        "baseline": baseline_report.as_dict(),
        "final": final_report.as_dict(),
        "ops_reduction": ops_reduction(baseline_report, final_report),
        "params_reduction": params_reduction(baseline_report, final_report),
    }
    (out_dir / "cost_report.json").write_text(
        json.dumps(cost_payload, indent=2, sort_keys=True) + "\n")
    _log(log, "prune-run: done")
    log.close()
    print(f"final network: params reduction "
          f"{cost_payload['params_reduction']:.1f}x, ops reduction "
          f"{cost_payload['ops_reduction']:.1f}x, "
          f"{len(result.events)} prune event(s); outputs in {out_dir}")
    return 0


def _resolve_arch_arg(text, input_shape, num_classes):
    path = Path(text)
    if path.is_file():
        return load_arch(path)
    if text in BUILTIN_ARCHES:
        return builtin_arch(text, input_shape, num_classes)
    try:
        from importlib import resources
        bundled = resources.files("densiprune.configs") / f"{text}.arch"
        if bundled.is_file():
            from densiprune.arch import parse_arch
            return parse_arch(bundled.read_text(), default_name=text)
    except (ImportError, FileNotFoundError):
        pass
    raise ConfigError(
        f"cannot resolve architecture {text!r}: not a file, not one of "
        f"{BUILTIN_ARCHES}, and no bundled config of that name")


def cmd_cost(args):
    channels, height, width = (int(v) for v in args.input_shape.split("x"))
    shape = (channels, height, width)
    arch_a = _resolve_arch_arg(args.arch_a, shape, args.classes)
    arch_b = _resolve_arch_arg(args.arch_b, shape, args.classes)
    report_a = network_cost(arch_a)
    report_b = network_cost(arch_b)
    ops = ops_reduction(report_a, report_b)
    params = params_reduction(report_a, report_b)
    if args.json:
        print(json.dumps({"baseline": report_a.as_dict(),
                          "pruned": report_b.as_dict(),
                          "ops_reduction": ops,
                          "params_reduction": params}, sort_keys=True))
    else:
        for label, report in (("baseline", report_a), ("pruned", report_b)):
            print(f"{label} ({report.arch_name}): "
                  f"macs={report.total_macs:,} params={report.total_params:,}")
        print(f"ops reduction    {ops:.3f}x")
        print(f"params reduction {params:.3f}x")
    return 0


def _complexity_rows(cells):
    rows = []
    for cell in cells:
        scenario = SCENARIOS[(cell.network, cell.dataset)]
        if cell.terminal_index is None:
            rows.append({"network": cell.network, "dataset": cell.dataset,
                         "row": cell.row, "reported": cell.reported,
                         "recomputed": None, "status": "constant",
                         "note": cell.note})
            continue
        value = training_complexity(
            complexity_chain(scenario, cell.terminal_index, cell.kind))
        status = "pass" if abs(value - cell.reported) <= 0.15 else "FAIL"
        rows.append({"network": cell.network, "dataset": cell.dataset,
                     "row": cell.row, "reported": cell.reported,
                     "recomputed": round(value, 3), "status": status,
                     "note": cell.note})
    return rows


def cmd_reproduce_tables(args):
    sections = (("training complexity", _complexity_rows(TRAINING_COMPLEXITY_CELLS)),
                ("training memory complexity", _complexity_rows(MEMORY_COMPLEXITY_CELLS)))
    failed = False
    if args.json:
        print(json.dumps({name: rows for name, rows in sections}, sort_keys=True))
    for name, rows in sections:
        if not args.json:
            print(f"-- {name} --")
        for row in rows:
            if row["status"] == "FAIL":
                failed = True
            if args.json:
                continue
            label = f"{row['network']}/{row['dataset']} {row['row']}"
            if row["recomputed"] is None:
                print(f"  {label:34s} reported {row['reported']:>8} "
                      f"[reported constant, not derivable]"
                      + (f" ({row['note']})" if row["note"] else ""))
            else:
                print(f"  {label:34s} recomputed {row['recomputed']:8.3f} "
                      f"vs reported {row['reported']:>6} [{row['status']}]"
                      + (f" ({row['note']})" if row["note"] else ""))
    return 1 if failed else 0


def cmd_export_colormap(args):
    try:
        model = restore_model(args.checkpoint)
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {args.checkpoint}") from None
    cfg = _load_run_config(args)
    train_data, eval_data = cfg.load_datasets()
    dataset = eval_data if args.split == "test" else train_data
    if not 0 <= args.image_index < dataset.count:
        raise ConfigError(f"image index {args.image_index} out of range "
                          f"(dataset has {dataset.count} images)")
    layers = [int(v) for v in args.layers.split(",") if v.strip()]
    out_dir = Path(args.output_dir or cfg.output_dir)
    image = dataset.images[args.image_index]
    try:
        written = export_colormaps(model, image, layers, out_dir,
                                   image_index=args.image_index)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for stem in written:
        print(f"wrote {stem}.pgm and {stem}.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="densiprune",
        description="Activation-density driven pruning during CNN training")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", required=True, help="run config file")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--output-dir", default=None, help="override output_dir")

    p_train = sub.add_parser("train", help="plain training with density logging")
    add_run_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_prune = sub.add_parser("prune-run", help="full prune-in-training run")
    add_run_flags(p_prune)
    p_prune.set_defaults(func=cmd_prune_run)

    p_cost = sub.add_parser("cost", help="MAC/parameter comparison of two architectures")
    p_cost.add_argument("arch_a", help="file, builtin name, or bundled config")
    p_cost.add_argument("arch_b")
    p_cost.add_argument("--input-shape", default="3x32x32", help="CxHxW")
    p_cost.add_argument("--classes", type=int, default=10)
    p_cost.add_argument("--json", action="store_true")
    p_cost.set_defaults(func=cmd_cost)

    p_tables = sub.add_parser("reproduce-tables",
                              help="recompute reported complexity figures")
    p_tables.add_argument("--json", action="store_true")
    p_tables.set_defaults(func=cmd_reproduce_tables)

    p_cmap = sub.add_parser("export-colormap",
                            help="channel-mean activation maps as PGM + CSV")
    p_cmap.add_argument("--checkpoint", required=True)
    p_cmap.add_argument("--config", required=True)
    p_cmap.add_argument("--layers", required=True,
                        help="comma-separated architecture layer indices")
    p_cmap.add_argument("--image-index", type=int, default=0)
    p_cmap.add_argument("--split", choices=("train", "test"), default="test")
    p_cmap.add_argument("--seed", type=int, default=None)
    p_cmap.add_argument("--output-dir", default=None)
    p_cmap.set_defaults(func=cmd_export_colormap)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, ValueError, RuntimeError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
