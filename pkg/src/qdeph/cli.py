"""Command-line interface: ``qdeph gen|train|eval|curves|experiment``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import nn
from .datagen import DatasetFormatError, default_grid, read_dataset
from .pipeline import evaluate, fit, generate, read_splits, run_experiment, write_splits
from .presets import ConfigError, group_members, list_presets, load_preset, resolve
from .qchannel import LambdaCache, QuadratureError

EXIT_OK, EXIT_INVALID, EXIT_TOLERANCE = 0, 2, 3

log = logging.getLogger("qdeph")


class UsageError(Exception):
    pass


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed (u64)")
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default: ./qdeph-out)")
    p.add_argument("--paper-scale", action="store_true", default=argparse.SUPPRESS, dest="full_scale",
                   help="full-size datasets (15.3e5 train / 3.6e5 val / 3.6e5 test over 16 classes)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for dataset generation")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="qdeph", description=__doc__, parents=[flags])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[flags], help="generate train/val/test dataset files")
    g.add_argument("config", help="preset name or path to a flat JSON config")

    t = sub.add_parser("train", parents=[flags], help="train a classifier on a generated dataset")
    t.add_argument("dataset", type=Path, help="directory holding train.dphc and val.dphc")
    t.add_argument("--arch", choices=sorted(nn.ARCHITECTURES), required=True)
    t.add_argument("--config", help="JSON file with training fields (batch_size, learning_rate, ...)")

    e = sub.add_parser("eval", parents=[flags], help="score a trained model on a dataset file")
    e.add_argument("model", type=Path)
    e.add_argument("dataset", type=Path, help="a .dphc file, or a directory (its test.dphc is used)")

    c = sub.add_parser("curves", parents=[flags], help="tabulate dephasing coefficients over time")
    c.add_argument("kind", choices=["classical", "quantum"])
    c.add_argument("--values", type=float, nargs="+", help="class values (default: the 16-class grid)")
    c.add_argument("--t-min", type=float)
    c.add_argument("--t-max", type=float)
    c.add_argument("--n-points", type=int, default=200)
    c.add_argument("--gamma1", type=float, default=1e-4)
    c.add_argument("--gamma2", type=float, default=1e4)
    c.add_argument("--omega-c", type=float, default=1.0)
    c.add_argument("--svg", action="store_true", help="also write a line plot")

    x = sub.add_parser("experiment", parents=[flags], help="run a preset (or preset group) end to end")
    x.add_argument("name", nargs="?", help="experiment preset, group name, or JSON path")
    x.add_argument("--list", action="store_true", help="list shipped presets and exit")
    return parser


def _opt(args, name, default=None):
    return getattr(args, name, default)


def cmd_gen(args) -> int:
    preset = load_preset(args.config, seed=_opt(args, "seed"), full_scale=_opt(args, "full_scale", False))
    out = _opt(args, "out", Path("qdeph-out")) / preset.name
    splits = generate(preset, _opt(args, "threads", 1)) if preset.is_experiment else _gen_plain(preset, args)
    paths = write_splits(splits, out)
    vals = splits.train.class_values
    print(f"{preset.name}: kind={splits.train.kind} window=[{preset.gen.window.t_min}, {preset.gen.window.t_max}] "
          f"sigma={preset.gen.noise_sigma} purity={preset.gen.purity}")
    print("class  value      train    val   test")
    counts = [d.class_counts() for d in splits]
    for j, v in enumerate(vals):
        print(f"{j:5d}  {v:<9.4g} {counts[0][j]:6d} {counts[1][j]:6d} {counts[2][j]:6d}")
    for name, p in paths.items():
        print(f"wrote {p}")
    return EXIT_OK


def _gen_plain(preset, args):
    from .datagen import build_dataset, region_split

    if preset.gen.region_filter is not None:
        return region_split(preset.gen, _opt(args, "threads", 1))
    return build_dataset(preset.gen, threads=_opt(args, "threads", 1))


def cmd_train(args) -> int:
    splits = read_splits(args.dataset)
    fields = {}
    if args.config:
        d, origin = resolve(args.config)
        fields = {k: v for k, v in d.items() if k in ("batch_size", "max_epochs", "patience", "learning_rate",
                                                      "l1_coeff", "optimizer", "train_seed")}
    seed = _opt(args, "seed", fields.pop("train_seed", 0))
    try:
        cfg = nn.TrainConfig(
            batch_size=fields.get("batch_size", 300),
            max_epochs=fields.get("max_epochs", 100),
            early_stop_patience=fields.get("patience", 1),
            learning_rate=fields.get("learning_rate", 1e-3),
            l1_coeff=fields.get("l1_coeff", 0.0),
            optimizer=fields.get("optimizer", "adam"),
            seed=seed,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"training config: {exc}") from exc
    model, report = fit(args.arch, splits.train, splits.val, cfg)
    out = _opt(args, "out", Path(args.dataset))
    out.mkdir(parents=True, exist_ok=True)
    mpath = nn.save_model(model, out / f"model-{args.arch}.dphm", config=cfg,
                          extra={"class_values": list(splits.train.class_values), "arch": args.arch})
    rep = report.to_json()
    (out / f"report-{args.arch}.json").write_text(json.dumps(rep, indent=2) + "\n")
    print(f"epochs run: {report.stopped_epoch}, best epoch: {report.best_epoch}")
    b = report.best_epoch - 1
    print(f"best val loss {report.val_loss[b]:.5f}, val accuracy {report.val_accuracy[b]:.4f}")
    print(f"wrote {mpath}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, header = nn.load_model(args.model)
    path = args.dataset / "test.dphc" if args.dataset.is_dir() else args.dataset
    ds = read_dataset(path)
    if model.n_classes != ds.m:
        raise UsageError(f"model has {model.n_classes} outputs but dataset has {ds.m} classes")
    out = _opt(args, "out", args.model.parent / f"eval-{path.stem}")
    s, _ = evaluate(model, ds, out)
    print(f"accuracy {s.accuracy:.4f}  macro-F1 {s.macro_f1:.4f}  ({len(ds)} samples)")
    print(f"wrote {out}/scores.json, confusion.csv, confusion.svg")
    return EXIT_OK


def curves_table(kind, values, t_min, t_max, n_points, gamma1=1e-4, gamma2=1e4, omega_c=1.0):
    """Rows of (t, lam(t, v1), lam(t, v2), ...)."""
    if n_points < 1:
        raise UsageError("--n-points must be >= 1")
    times = np.array([t_min]) if n_points == 1 else np.linspace(t_min, t_max, n_points)
    cache = LambdaCache(gamma1, gamma2, omega_c)
    return times, cache.table(kind, values, times).T


def _curves_svg(times, table, values, kind) -> str:
    w, h, pad = 640, 400, 50
    tmin, tmax = float(times[0]), float(times[-1]) if len(times) > 1 else float(times[0]) + 1
    lo, hi = min(0.0, float(table.min())), 1.0

    def xy(t, v):
        return pad + (t - tmin) / (tmax - tmin) * (w - 2 * pad), h - pad - (v - lo) / (hi - lo) * (h - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">',
           f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" fill="none" stroke="black"/>']
    n = len(values)
    for j in range(n):
        r, b = int(40 + 200 * j / max(n - 1, 1)), int(240 - 200 * j / max(n - 1, 1))
        pts = " ".join("{:.2f},{:.2f}".format(*xy(t, v)) for t, v in zip(times, table[:, j]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="rgb({r},60,{b})" stroke-width="1.2"/>')
    out.append(f'<text x="{w // 2}" y="{h - 12}" text-anchor="middle">t</text>')
    out.append(f'<text x="12" y="{h // 2}">{"alpha" if kind == "classical" else "s"}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_curves(args) -> int:
    values = args.values or default_grid(args.kind)
    default_window = (0.2, 3.14) if args.kind == "classical" else (0.2, 7.0)
    t_min = default_window[0] if args.t_min is None else args.t_min
    t_max = default_window[1] if args.t_max is None else args.t_max
    if args.n_points > 1 and not t_min < t_max:
        raise UsageError("need t-min < t-max")
    times, table = curves_table(args.kind, values, t_min, t_max, args.n_points, args.gamma1, args.gamma2, args.omega_c)
    out = _opt(args, "out", Path("qdeph-out"))
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"curves-{args.kind}.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", *[repr(float(v)) for v in values]])
        for t, row in zip(times, table):
            wr.writerow([repr(float(t)), *[repr(float(v)) for v in row]])
    print(f"wrote {path} ({len(times)} rows x {len(values)} curves)")
    if args.svg:
        svg = path.with_suffix(".svg")
        svg.write_text(_curves_svg(times, table, values, args.kind))
        print(f"wrote {svg}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.list or not args.name:
        for n in list_presets():
            print(n)
        return EXIT_OK
    names = [args.name] if args.name.endswith(".json") else group_members(args.name)
    if not names:
        raise ConfigError(f"no experiment preset or group named {args.name!r}")
    out = _opt(args, "out", Path("qdeph-out"))
    failed = 0
    for name in names:
        preset = load_preset(name, seed=_opt(args, "seed"), full_scale=_opt(args, "full_scale", False))
        if not preset.is_experiment:
            raise ConfigError(f"{name} is a dataset config; use `qdeph gen`")
        res = run_experiment(preset, out, _opt(args, "threads", 1))
        print(res.summary(), flush=True)
        failed += not res.passed
    print(f"{len(names) - failed}/{len(names)} passed")
    return EXIT_TOLERANCE if failed else EXIT_OK


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "curves": cmd_curves, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if _opt(args, "verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, DatasetFormatError, nn.ModelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (QuadratureError, nn.DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
