"""Labelled datasets of two-time SIC-POVM features for dephasing classification."""

from __future__ import annotations

import json
import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .qchannel import DensityMatrix, LambdaCache
from .tomo import SicPovm, encode_bloch

__all__ = [
    "ClassGrid",
    "TimeWindow",
    "GenSpec",
    "Dataset",
    "SplitDatasets",
    "DatasetFormatError",
    "MalformedHeaderError",
    "TruncatedFileError",
    "ChecksumMismatchError",
    "default_grid",
    "haar_qubit",
    "haar_bloch",
    "depolarize",
    "sample_times",
    "make_pairs",
    "build_dataset",
    "region_split",
    "two_class",
    "write_dataset",
    "read_dataset",
]

MAGIC = b"DPHC"
VERSION = 1
FEATURE_DIM = 8
_RECORD = np.dtype([("x", "<f4", (FEATURE_DIM,)), ("y", "<u2")])
MAX_REJECTION_DRAWS = 10**6

# substream tags
_TAG_TIMES, _TAG_PAIRS, _TAG_STATES, _TAG_CLASS, _TAG_SHUFFLE = range(1, 6)


class DatasetFormatError(ValueError):
    pass


class MalformedHeaderError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class ChecksumMismatchError(DatasetFormatError):
    pass


def default_grid(kind: str) -> list[float]:
    if kind == "classical":
        return [round(0.5 + 0.1 * i, 10) for i in range(16)]
    if kind == "quantum":
        return [round(float(v), 12) for v in np.linspace(0.1, 3.0, 16)]
    raise ValueError(f"unknown noise kind {kind!r}")


@dataclass(frozen=True)
class ClassGrid:
    kind: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("classical", "quantum"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("need at least two classes")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("class values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TimeWindow:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not 0 <= self.t_min < self.t_max:
            raise ValueError(f"invalid time window [{self.t_min}, {self.t_max}]")


@dataclass(frozen=True)
class GenSpec:
    """Everything needed to regenerate a dataset bit for bit."""

    grid: ClassGrid
    window: TimeWindow
    n_states: int = 2500
    n_times: int = 110
    n_pairs: int = 1000
    purity: float = 1.0
    noise_sigma: float = 0.0
    samples_per_class: int = 2500
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    region_filter: tuple[float, float] | None = None
    gamma1: float = 1e-4
    gamma2: float = 1e4
    omega_c: float = 1.0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.split_fractions)
        if len(fr) != 3 or min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")
        object.__setattr__(self, "split_fractions", fr)
        if not 0.5 < self.purity <= 1.0:
            raise ValueError("purity must lie in (1/2, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_states < 1 or self.n_times < 2 or self.n_pairs < 1:
            raise ValueError("n_states >= 1, n_times >= 2 and n_pairs >= 1 required")
        if self.n_pairs > self.n_times * (self.n_times - 1) // 2:
            raise ValueError("n_pairs exceeds the number of distinct time pairs")
        if self.samples_per_class > self.n_states * self.n_pairs:
            raise ValueError("samples_per_class exceeds n_states * n_pairs")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.region_filter is not None:
            lo, hi = (float(v) for v in self.region_filter)
            if not 0 <= lo < hi <= 1:
                raise ValueError("region filter needs 0 <= lo < hi <= 1")
            object.__setattr__(self, "region_filter", (lo, hi))

    def split_counts(self) -> tuple[int, int, int]:
        n = self.samples_per_class
        n_train = int(round(self.split_fractions[0] * n))
        n_val = int(round(self.split_fractions[1] * n))
        return n_train, n_val, n - n_train - n_val

    def to_json(self) -> dict:
        d = asdict(self)
        d["grid"] = {"kind": self.grid.kind, "values": list(self.grid.values)}
        d["window"] = [self.window.t_min, self.window.t_max]
        d["split_fractions"] = list(self.split_fractions)
        d["region_filter"] = list(self.region_filter) if self.region_filter else None
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GenSpec":
        d = dict(d)
        d["grid"] = ClassGrid(d["grid"]["kind"], tuple(d["grid"]["values"]))
        d["window"] = TimeWindow(*d["window"])
        d["split_fractions"] = tuple(d["split_fractions"])
        if d.get("region_filter") is not None:
            d["region_filter"] = tuple(d["region_filter"])
        return cls(**d)


@dataclass
class Dataset:
    """Feature matrix ``x`` (n, 8) with integer labels ``y``.

    ``provenance`` rows hold (state index, t1, t2) and live in memory only;
    they are not part of the file format.
    """

    x: np.ndarray
    y: np.ndarray
    class_values: tuple[float, ...]
    kind: str
    split: str = "all"
    meta: dict = field(default_factory=dict)
    provenance: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.x.shape[1] != FEATURE_DIM:
            raise ValueError(f"features must have shape (n, {FEATURE_DIM})")
        if len(self.x) != len(self.y):
            raise ValueError("feature/label length mismatch")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.m):
            raise ValueError("label out of range")

    def __len__(self):
        return len(self.y)

    @property
    def m(self) -> int:
        return len(self.class_values)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.m)


@dataclass
class SplitDatasets:
    train: Dataset
    val: Dataset
    test: Dataset

    def __iter__(self):
        return iter((self.train, self.val, self.test))


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def haar_bloch(n: int, rng: np.random.Generator) -> np.ndarray:
    """Bloch vectors of ``n`` Haar-random pure qubit states, shape (n, 3)."""
    psi = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    b1, b2 = psi[:, 0], psi[:, 1]
    coh = b1 * b2.conj()
    return np.stack([2 * coh.real, -2 * coh.imag, np.abs(b1) ** 2 - np.abs(b2) ** 2], axis=1)


def haar_qubit(rng: np.random.Generator) -> DensityMatrix:
    psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    psi /= np.linalg.norm(psi)
    a00 = abs(psi[0]) ** 2
    return DensityMatrix(a00, 1.0 - a00, complex(psi[0] * psi[1].conjugate()))


def depolarize(rho: DensityMatrix, purity_target: float) -> DensityMatrix:
    """Mix a pure state with I/2 so that Tr[rho^2] equals ``purity_target``."""
    if not 0.5 < purity_target <= 1.0:
        raise ValueError("purity_target must lie in (1/2, 1]")
    lam = math.sqrt(2.0 * purity_target - 1.0)
    a00 = lam * rho.a00 + 0.5 * (1.0 - lam)
    return DensityMatrix(a00, 1.0 - a00, lam * rho.a01)


def sample_times(window: TimeWindow, n_times: int, rng: np.random.Generator) -> np.ndarray:
    """``n_times`` distinct uniform draws in the window, ascending."""
    if n_times < 2:
        raise ValueError("n_times must be >= 2")
    times = np.sort(rng.uniform(window.t_min, window.t_max, n_times))
    while True:
        keep = np.concatenate([[True], np.diff(times) > 1e-12])
        if keep.all():
            return times
        times = times[keep]
        extra = rng.uniform(window.t_min, window.t_max, n_times - len(times))
        times = np.sort(np.concatenate([times, extra]))


def _pair_indices(n_times: int, n_pairs: int, rng: np.random.Generator) -> np.ndarray:
    total = n_times * (n_times - 1) // 2
    if n_pairs > total:
        raise ValueError(f"{n_pairs} pairs requested but only {total} exist")
    iu, ju = np.triu_indices(n_times, k=1)
    pick = rng.choice(total, size=n_pairs, replace=False)
    return np.stack([iu[pick], ju[pick]], axis=1)


def make_pairs(times: Sequence[float], n_pairs: int, rng: np.random.Generator) -> list[tuple[float, float]]:
    """Distinct time-ordered pairs drawn uniformly without replacement."""
    times = np.sort(np.asarray(times, dtype=float))
    idx = _pair_indices(len(times), n_pairs, rng)
    return [(float(times[i]), float(times[j])) for i, j in idx]


def _draw_states(spec: GenSpec, zband: tuple[float, float] | None, tag: int) -> np.ndarray:
    rng = _stream(spec.seed, _TAG_STATES, tag)
    if zband is None:
        return haar_bloch(spec.n_states, rng)
    lo, hi = zband
    accepted: list[np.ndarray] = []
    have, drawn = 0, 0
    while have < spec.n_states:
        if drawn >= MAX_REJECTION_DRAWS:
            raise RuntimeError(
                f"rejection sampling reached only {have}/{spec.n_states} states "
                f"with {lo} < |z| < {hi} after {drawn} draws"
            )
        batch = min(max(4 * (spec.n_states - have), 1024), MAX_REJECTION_DRAWS - drawn)
        b = haar_bloch(batch, rng)
        drawn += batch
        z = np.abs(b[:, 2])
        ok = b[(z > lo) & (z < hi)]
        accepted.append(ok)
        have += len(ok)
    return np.concatenate(accepted)[: spec.n_states]


def _evolve_features(bloch0, lam1, lam2):
    scale = np.stack([lam1, lam1, np.ones_like(lam1)], axis=1)
    b1 = bloch0 * scale
    scale[:, 0] = scale[:, 1] = lam2
    b2 = bloch0 * scale
    return np.concatenate([encode_bloch(b1), encode_bloch(b2)], axis=1)


def build_dataset(
    spec: GenSpec,
    lam_eval: Callable[[float, float], float] | None = None,
    *,
    zband: tuple[float, float] | None = None,
    state_tag: int = 0,
    threads: int = 1,
) -> SplitDatasets:
    """Generate the train/val/test splits described by ``spec``.

    Args:
        spec: generation parameters.
        lam_eval: ``(t, class_value) -> coefficient``; defaults to a memoised
            evaluator for ``spec.grid.kind``.
        zband: keep only initial states with ``lo < |<sigma_z>| < hi``.
        state_tag: selects an independent stream of initial states.
        threads: worker threads for the coefficient tables; output is
            identical for any value.
    """
    if lam_eval is None:
        cache = LambdaCache(spec.gamma1, spec.gamma2, spec.omega_c)
        kind = spec.grid.kind

        def lam_eval(t, v):
            return cache(kind, v, t)

    times = sample_times(spec.window, spec.n_times, _stream(spec.seed, _TAG_TIMES))
    pairs = _pair_indices(spec.n_times, spec.n_pairs, _stream(spec.seed, _TAG_PAIRS))
    bloch = _draw_states(spec, zband, state_tag)
    if spec.purity < 1.0:
        bloch = bloch * math.sqrt(2.0 * spec.purity - 1.0)

    def lam_row(value):
        return np.array([lam_eval(float(t), value) for t in times])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            lam_table = list(pool.map(lam_row, spec.grid.values))
    else:
        lam_table = [lam_row(v) for v in spec.grid.values]

    n_train, n_val, n_test = spec.split_counts()
    parts: dict[str, list] = {"train": [], "val": [], "test": []}
    for c, value in enumerate(spec.grid.values):
        rng = _stream(spec.seed, _TAG_CLASS, c)
        lam = lam_table[c]
        pick = rng.choice(spec.n_states * spec.n_pairs, size=spec.samples_per_class, replace=False)
        k, j = np.divmod(pick, spec.n_pairs)
        i1, i2 = pairs[j, 0], pairs[j, 1]
        x = _evolve_features(bloch[k], lam[i1], lam[i2])
        if spec.noise_sigma > 0:
            x = x + rng.normal(0.0, spec.noise_sigma, size=x.shape)
        prov = np.stack([k.astype(float), times[i1], times[i2]], axis=1)
        y = np.full(len(x), c)
        bounds = np.cumsum([0, n_train, n_val, n_test])
        for name, a, b in zip(("train", "val", "test"), bounds[:-1], bounds[1:]):
            parts[name].append((x[a:b], y[a:b], prov[a:b]))

    out = {}
    meta = {"gen_spec": spec.to_json(), "times": times.tolist()}
    for s, name in enumerate(("train", "val", "test")):
        x = np.concatenate([p[0] for p in parts[name]])
        y = np.concatenate([p[1] for p in parts[name]])
        prov = np.concatenate([p[2] for p in parts[name]])
        order = _stream(spec.seed, _TAG_SHUFFLE, s).permutation(len(y))
        out[name] = Dataset(
            x[order], y[order], spec.grid.values, spec.grid.kind, name, dict(meta), prov[order]
        )
    return SplitDatasets(**out)


def region_split(spec: GenSpec, threads: int = 1) -> SplitDatasets:
    """Train/val on states with |z| < lo, test on the shell lo < |z| < hi."""
    if spec.region_filter is None:
        raise ValueError("spec has no region_filter")
    lo, hi = spec.region_filter
    inner = build_dataset(spec, zband=(0.0, lo), state_tag=0, threads=threads)
    shell = build_dataset(spec, zband=(lo, hi), state_tag=1, threads=threads)
    return SplitDatasets(inner.train, inner.val, shell.test)


def two_class(ds: Dataset, threshold: float = 1.0) -> Dataset:
    """Relabel to two macro-classes: value <= threshold -> 0, above -> 1."""
    vals = np.asarray(ds.class_values)
    macro = (vals > threshold).astype(np.int64)
    if macro.min() == macro.max():
        raise ValueError("threshold leaves one macro-class empty")
    meta = dict(ds.meta, two_class_threshold=threshold, fine_values=list(ds.class_values))
    return Dataset(ds.x, macro[ds.y], (0.0, 1.0), ds.kind, ds.split, meta, ds.provenance)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_dataset(ds: Dataset, path) -> Path:
    """Write the binary dataset file plus a human-readable ``.meta.json`` sidecar.

    Features are stored as little-endian binary32.
    """
    path = Path(path)
    rec = np.empty(len(ds), dtype=_RECORD)
    rec["x"] = ds.x
    rec["y"] = ds.y
    payload = rec.tobytes()
    header = {
        "kind": ds.kind,
        "split": ds.split,
        "class_values": list(ds.class_values),
        "n_classes": ds.m,
        "n_samples": len(ds),
        "feature_dim": FEATURE_DIM,
        "class_counts": ds.class_counts().tolist(),
        "crc32": zlib.crc32(payload),
        "meta": ds.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC + bytes([VERSION]))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
    _sidecar(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return path


def read_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < 9:
        raise TruncatedFileError(f"{path}: file too short for a header")
    if raw[:4] != MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {raw[:4]!r}")
    if raw[4] != VERSION:
        raise MalformedHeaderError(f"{path}: unsupported version {raw[4]}")
    (n_blob,) = struct.unpack("<I", raw[5:9])
    if len(raw) < 9 + n_blob:
        raise TruncatedFileError(f"{path}: header truncated")
    try:
        header = json.loads(raw[9 : 9 + n_blob].decode("utf-8"))
        n = int(header["n_samples"])
        m = int(header["n_classes"])
        values = tuple(header["class_values"])
        counts = header["class_counts"]
        crc = int(header["crc32"])
        dim = int(header["feature_dim"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise MalformedHeaderError(f"{path}: unreadable header ({exc})") from exc
    if dim != FEATURE_DIM or len(values) != m or len(counts) != m or sum(counts) != n:
        raise MalformedHeaderError(f"{path}: inconsistent header fields")
    payload = raw[9 + n_blob :]
    if len(payload) < n * _RECORD.itemsize:
        raise TruncatedFileError(f"{path}: payload has {len(payload)} bytes, expected {n * _RECORD.itemsize}")
    if len(payload) > n * _RECORD.itemsize:
        raise MalformedHeaderError(f"{path}: trailing bytes after payload")
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatchError(f"{path}: payload CRC32 mismatch")
    rec = np.frombuffer(payload, dtype=_RECORD)
    y = rec["y"].astype(np.int64)
    if len(y) and y.max() >= m:
        raise MalformedHeaderError(f"{path}: label {y.max()} >= n_classes {m}")
    if np.bincount(y, minlength=m).tolist() != list(counts):
        raise MalformedHeaderError(f"{path}: class counts in header do not match payload")
    return Dataset(rec["x"].copy(), y, values, header["kind"], header["split"], header.get("meta", {}))


def with_purity(spec: GenSpec, purity: float) -> GenSpec:
    return replace(spec, purity=purity)
