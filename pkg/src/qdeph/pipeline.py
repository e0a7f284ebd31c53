"""End-to-end runs: generate, persist, train, evaluate, compare to expectations."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .datagen import Dataset, SplitDatasets, build_dataset, read_dataset, region_split, two_class, write_dataset
from .metrics import (
    ConfusionMatrix,
    Scores,
    confusion,
    confusion_svg,
    scores,
    write_confusion_csv,
    write_scores_json,
)
from .presets import Preset

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class ExperimentResult:
    name: str
    scores: Scores
    confusion: ConfusionMatrix
    report: nn.TrainReport
    checks: dict[str, tuple[float, tuple[float, float]]]
    out_dir: Path

    @property
    def passed(self) -> bool:
        return all(lo <= v <= hi for v, (lo, hi) in self.checks.values())

    def summary(self) -> str:
        parts = [f"{k}={v:.4f} in [{lo:g}, {hi:g}]" for k, (v, (lo, hi)) in self.checks.items()]
        if not parts:
            parts = [f"accuracy={self.scores.accuracy:.4f}", f"macro_f1={self.scores.macro_f1:.4f}"]
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: " + ", ".join(parts)


def generate(preset: Preset, threads: int = 1) -> SplitDatasets:
    """Datasets for ``preset`` according to its mode."""
    gen = preset.gen
    if preset.mode == "region":
        return region_split(gen, threads)
    splits = build_dataset(gen, threads=threads)
    if preset.mode == "transfer":
        mixed = build_dataset(replace(gen, purity=preset.test_purity), threads=threads)
        return SplitDatasets(splits.train, splits.val, mixed.test)
    if preset.mode == "two-class":
        return SplitDatasets(*(two_class(d) for d in splits))
    return splits


def write_splits(splits: SplitDatasets, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    return {name: write_dataset(ds, out_dir / f"{name}.dphc") for name, ds in zip(SPLITS, splits)}


def read_splits(data_dir) -> SplitDatasets:
    data_dir = Path(data_dir)
    return SplitDatasets(*(read_dataset(data_dir / f"{name}.dphc") for name in SPLITS))


def fit(arch: str, train: Dataset, val: Dataset, cfg: nn.TrainConfig):
    if train.m != val.m:
        raise ValueError(f"train has {train.m} classes but val has {val.m}")
    sizes = nn.layer_sizes_for(arch, train.m)
    model = nn.init_mlp(sizes, np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x1417])))
    return nn.train(model, train.x, train.y, val.x, val.y, cfg)


def evaluate(model: nn.MlpModel, ds: Dataset, out_dir=None) -> tuple[Scores, ConfusionMatrix]:
    """Score ``model`` on ``ds``; optionally write scores.json and the confusion CSV/SVG."""
    if model.n_classes != ds.m:
        raise ValueError(f"model predicts {model.n_classes} classes but dataset has {ds.m}")
    c = confusion(nn.predict(model, ds.x), ds.y, ds.m)
    s = scores(c)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_scores_json(s, out_dir / "scores.json", {"class_values": list(ds.class_values), "split": ds.split})
        write_confusion_csv(c, ds.class_values, out_dir / "confusion.csv")
        (out_dir / "confusion.svg").write_text(confusion_svg(c, ds.class_values))
    return s, c


def run_experiment(preset: Preset, out_dir, threads: int = 1) -> ExperimentResult:
    if not preset.is_experiment:
        raise ValueError(f"{preset.name} is a dataset config, not an experiment")
    out_dir = Path(out_dir) / preset.name
    log.info("%s: generating (%s, %d per class)", preset.name, preset.mode, preset.gen.samples_per_class)
    write_splits(generate(preset, threads), out_dir / "data")
    splits = read_splits(out_dir / "data")
    log.info("%s: training %s", preset.name, preset.arch)
    model, report = fit(preset.arch, splits.train, splits.val, preset.train)
    nn.save_model(model, out_dir / "model.dphm", config=preset.train, extra={"class_values": list(splits.train.class_values)})
    (out_dir / "report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
    s, c = evaluate(model, splits.test, out_dir)
    checks = {}
    if preset.expect_accuracy:
        checks["accuracy"] = (s.accuracy, preset.expect_accuracy)
    if preset.expect_macro_f1:
        checks["macro_f1"] = (s.macro_f1, preset.expect_macro_f1)
    return ExperimentResult(preset.name, s, c, report, checks, out_dir)
