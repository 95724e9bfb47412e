"""CSV recordings, dataset manifests and directory-layout ingestion.

A dataset directory holds one subdirectory per class with one CSV file per
recording (comma-separated, one header row, one row per sample). The
manifest is a plain ``key = value`` file::

    root = .                  # relative to the manifest's directory
    sample_rate_hz = 500
    length = 1600
    trim = end                # or "head"
    pattern = *.csv
    classes = Rice, Macaroni  # optional; default: every subdirectory
    column.time = time        # optional
    column.Fx = Fx
    ...
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .signal import (CHANNELS, N_SAMPLES, SAMPLE_RATE_HZ, Dataset, FTSignal, LabeledSample, fit_to_length,
                     order_classes, validate_signal)

MANIFEST_NAME = "manifest.txt"
DEFAULT_COLUMNS = {"time": "time", **{c: c for c in CHANNELS}}


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    classes: tuple[str, ...] = ()
    columns: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COLUMNS))
    sample_rate_hz: float = SAMPLE_RATE_HZ
    length: int = N_SAMPLES
    trim: str = "end"
    pattern: str = "*.csv"

    def __post_init__(self) -> None:
        missing = [c for c in CHANNELS if c not in self.columns]
        if missing:
            raise IngestError(f"column mapping lacks {', '.join(missing)}")
        if not self.sample_rate_hz > 0:
            raise IngestError("sample_rate_hz must be positive")
        if self.length < 1:
            raise IngestError("length must be positive")
        if self.trim not in ("end", "head"):
            raise IngestError(f"trim must be 'end' or 'head', not {self.trim!r}")


def parse_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestError(f"cannot read manifest {path}: {e.strerror or e}") from None
    values: dict[str, str] = {}
    columns = dict(DEFAULT_COLUMNS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise IngestError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key.startswith("column."):
            columns[key[len("column."):]] = value
        elif key in ("root", "classes", "sample_rate_hz", "length", "trim", "pattern"):
            values[key] = value
        else:
            raise IngestError(f"{path}:{lineno}: unknown key {key!r}")
    # an empty mapping removes the column (allowed for time, rejected for channels)
    columns = {k: v for k, v in columns.items() if v}
    try:
        return DatasetManifest(
            root=(path.parent / values.get("root", ".")).resolve(),
            classes=tuple(c.strip() for c in values.get("classes", "").split(",") if c.strip()),
            columns=columns,
            sample_rate_hz=float(values.get("sample_rate_hz", SAMPLE_RATE_HZ)),
            length=int(values.get("length", N_SAMPLES)),
            trim=values.get("trim", "end"),
            pattern=values.get("pattern", "*.csv"),
        )
    except ValueError as e:
        if isinstance(e, IngestError):
            raise
        raise IngestError(f"{path}: {e}") from None


def read_recording_csv(path, columns: dict[str, str] | None = None, sample_rate_hz: float = SAMPLE_RATE_HZ) -> FTSignal:
    """Read one recording; errors name the file and, for bad rows, the line."""
    columns = columns or DEFAULT_COLUMNS
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IngestError(f"cannot read {path}: {getattr(e, 'strerror', None) or e}") from None
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in header]
    idx = []
    for ch in CHANNELS:
        name = columns[ch]
        if name not in header:
            raise IngestError(f"{path}: unknown column {name!r} (header: {', '.join(header)})")
        idx.append(header.index(name))
    width = len(header)
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, usecols=idx, ndmin=2, dtype=np.float64)
        if data.shape[0] == 0:
            raise IngestError(f"{path}: no data rows")
    except ValueError as e:
        if isinstance(e, IngestError):
            raise
        # slow path only to locate the offending line
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            if len(row) != width:
                raise IngestError(f"{path}:{lineno}: expected {width} fields, found {len(row)}") from None
            for i in idx:
                try:
                    float(row[i])
                except ValueError:
                    raise IngestError(f"{path}:{lineno}: non-numeric value {row[i]!r} in column {header[i]!r}") from None
        raise IngestError(f"{path}: {e}") from None
    for lineno, row in enumerate(rows, 2):
        if row and len(row) != width:
            raise IngestError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
    return FTSignal.from_array(data.T, sample_rate_hz)


def write_recording_csv(signal: FTSignal, path) -> None:
    data = signal.data
    t = np.arange(data.shape[1]) / signal.sample_rate_hz
    table = np.column_stack([t, data.T])
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(",".join(("time",) + CHANNELS) + "\n")
        np.savetxt(f, table, fmt="%.17g", delimiter=",", newline="\n")


def ingest(manifest: DatasetManifest | str | Path) -> Dataset:
    if not isinstance(manifest, DatasetManifest):
        manifest = parse_manifest(manifest)
    root = manifest.root
    if not root.is_dir():
        raise IngestError(f"dataset root {root} is not a directory")
    names = manifest.classes or tuple(p.name for p in sorted(root.iterdir()) if p.is_dir())
    if len(names) < 1:
        raise IngestError(f"no class subdirectories under {root}")
    classes = order_classes(names)
    samples = []
    for name in classes:
        files = sorted((root / name).glob(manifest.pattern))
        if not files:
            raise IngestError(f"class {name!r} has no recordings matching {manifest.pattern!r} in {root / name}")
        for f in files:
            sig = read_recording_csv(f, manifest.columns, manifest.sample_rate_hz)
            check = validate_signal(sig)
            if not check.ok:
                raise IngestError(f"{f}: {'; '.join(check.violations[:5])}")
            sig = fit_to_length(sig, manifest.length, manifest.trim)
            samples.append(LabeledSample(sig, name, f.relative_to(root).as_posix()))
    return Dataset(tuple(samples), classes)


def write_dataset(dataset: Dataset, out_dir) -> Path:
    """Write one CSV per recording plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters: dict[str, int] = {}
    for s in dataset.samples:
        rel = s.source_id if s.source_id.endswith(".csv") else None
        if rel is None:
            i = counters.get(s.label, 0)
            counters[s.label] = i + 1
            rel = f"{s.label}/{s.label}_{i:03d}.csv"
        target = out / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        write_recording_csv(s.signal, target)
    rate = dataset.samples[0].signal.sample_rate_hz if dataset.samples else SAMPLE_RATE_HZ
    length = dataset.samples[0].signal.n_samples if dataset.samples else N_SAMPLES
    lines = ["root = .", f"sample_rate_hz = {rate!r}", f"length = {length}", "trim = end", "pattern = *.csv",
             f"classes = {', '.join(dataset.classes)}", "column.time = time"]
    lines += [f"column.{c} = {c}" for c in CHANNELS]
    manifest = out / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if dataset.metadata:
        (out / "params.json").write_text(json.dumps(dataset.metadata, indent=1, default=str) + "\n", encoding="utf-8")
    return manifest
