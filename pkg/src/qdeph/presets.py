"""Run configurations: flat JSON files, shipped presets and their validation.

A dataset config holds generation keys only. An experiment config adds a
model/training section and an expected-score record, and names its dataset
config under ``"dataset"``; any generation key it sets overrides the
referenced dataset config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .datagen import ClassGrid, GenSpec, TimeWindow, default_grid
from .nn import ARCHITECTURES, TrainConfig

FULL_SCALE = {"samples_per_class": 140625, "split_fractions": [0.68, 0.16, 0.16]}

GEN_KEYS = {
    "kind", "values", "window", "n_states", "n_times", "n_pairs", "purity", "noise_sigma",
    "samples_per_class", "split_fractions", "seed", "region_filter", "gamma1", "gamma2", "omega_c",
}  # fmt: skip
TRAIN_KEYS = {
    "batch_size", "max_epochs", "patience", "learning_rate", "l1_coeff", "optimizer", "train_seed",
}  # fmt: skip
RUN_KEYS = {"arch", "mode", "test_purity", "expect_accuracy", "expect_macro_f1", "group", "dataset"}
MODES = ("standard", "transfer", "region", "two-class")


class ConfigError(ValueError):
    pass


@dataclass
class Preset:
    name: str
    raw: dict
    gen: GenSpec
    train: TrainConfig | None = None
    arch: str | None = None
    mode: str = "standard"
    group: str | None = None
    test_purity: float | None = None
    expect_accuracy: tuple[float, float] | None = None
    expect_macro_f1: tuple[float, float] | None = None

    @property
    def is_experiment(self) -> bool:
        return self.arch is not None


def preset_dir():
    return resources.files("qdeph") / "presets"


def list_presets() -> list[str]:
    return sorted(p.name[:-5] for p in preset_dir().iterdir() if p.name.endswith(".json"))


def _parse(text: str, origin: str) -> dict:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{origin}: top level must be a JSON object")
    for k, v in d.items():
        if isinstance(v, dict):
            raise ConfigError(f"{origin}: field '{k}': nested objects are not allowed (flat key-value config)")
    return d


def _read(name_or_path: str) -> tuple[dict, str]:
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise ConfigError(f"{path}: no such config file")
        return _parse(path.read_text(), str(path)), str(path)
    res = preset_dir() / f"{name_or_path}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name_or_path!r}; available: {', '.join(list_presets())}")
    return _parse(res.read_text(), f"preset {name_or_path}"), f"preset {name_or_path}"


def resolve(name_or_path: str) -> tuple[dict, str]:
    """Load a config and merge in the dataset config it references."""
    d, origin = _read(name_or_path)
    if "dataset" in d:
        base, _ = _read(d["dataset"])
        merged = {k: v for k, v in base.items() if k != "name"}
        merged.update(d)
        d = merged
    return d, origin


def _band(d, key, origin):
    v = d.get(key)
    if v is None:
        return None
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v) and v[0] <= v[1]):
        raise ConfigError(f"{origin}: field '{key}': expected [low, high], got {v!r}")
    return float(v[0]), float(v[1])


def build_preset(d: dict, origin: str = "config", *, seed: int | None = None, full_scale: bool = False) -> Preset:
    unknown = set(d) - GEN_KEYS - TRAIN_KEYS - RUN_KEYS - {"name"}
    if unknown:
        raise ConfigError(f"{origin}: unknown field(s): {', '.join(sorted(unknown))}")
    for key in ("kind", "window"):
        if key not in d:
            raise ConfigError(f"{origin}: missing required field '{key}'")
    g = {k: d[k] for k in GEN_KEYS if k in d}
    if full_scale:
        g.update(FULL_SCALE)
    if seed is not None:
        g["seed"] = seed
    field = "?"
    try:
        field = "kind"
        values = g.pop("values", None) or default_grid(g["kind"])
        grid = ClassGrid(g.pop("kind"), tuple(values))
        field = "window"
        window = TimeWindow(*g.pop("window"))
        field = "region_filter"
        if g.get("region_filter") is not None:
            g["region_filter"] = tuple(g["region_filter"])
        field = "split_fractions"
        if "split_fractions" in g:
            g["split_fractions"] = tuple(g["split_fractions"])
        field = "generation"
        gen = GenSpec(grid=grid, window=window, **g)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{origin}: field '{field}': {exc}") from exc

    p = Preset(name=d.get("name", Path(origin).stem), raw=d, gen=gen, group=d.get("group"))
    if "arch" not in d:
        return p
    if d["arch"] not in ARCHITECTURES:
        raise ConfigError(f"{origin}: field 'arch': must be one of {sorted(ARCHITECTURES)}, got {d['arch']!r}")
    p.arch = d["arch"]
    p.mode = d.get("mode", "standard")
    if p.mode not in MODES:
        raise ConfigError(f"{origin}: field 'mode': must be one of {MODES}, got {p.mode!r}")
    if p.mode == "region" and gen.region_filter is None:
        raise ConfigError(f"{origin}: field 'region_filter': required for mode 'region'")
    if p.mode == "transfer":
        tp = d.get("test_purity")
        if not isinstance(tp, (int, float)) or not 0.5 < tp <= 1:
            raise ConfigError(f"{origin}: field 'test_purity': must lie in (1/2, 1] for mode 'transfer'")
        p.test_purity = float(tp)
    p.expect_accuracy = _band(d, "expect_accuracy", origin)
    p.expect_macro_f1 = _band(d, "expect_macro_f1", origin)
    try:
        p.train = TrainConfig(
            batch_size=d.get("batch_size", 300),
            max_epochs=d.get("max_epochs", 100),
            early_stop_patience=d.get("patience", 1),
            learning_rate=d.get("learning_rate", 1e-3),
            l1_coeff=d.get("l1_coeff", 0.0),
            optimizer=d.get("optimizer", "adam"),
            seed=d.get("train_seed", gen.seed),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{origin}: training fields: {exc}") from exc
    return p


def load_preset(name_or_path: str, *, seed: int | None = None, full_scale: bool = False) -> Preset:
    d, origin = resolve(name_or_path)
    return build_preset(d, origin, seed=seed, full_scale=full_scale)


def group_members(name: str) -> list[str]:
    """Experiment presets whose name or group equals ``name``."""
    out = []
    for n in list_presets():
        d, _ = _read(n)
        if "arch" in d and (n == name or d.get("group") == name):
            out.append(n)
    return out
