"""Binary container shared by model and dataset files.

Layout (all integers little-endian)::

    b"GRID" | u32 format version | u64 metadata length | metadata (UTF-8 JSON)
    | float64 arrays, in the order listed in the metadata | u32 CRC-32

The CRC covers every byte before it. The metadata lists each array's name
and shape, so a reader never has to guess sizes.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .classify import CodingMatrix, ECOCModel, LinearSVMModel
from .features import FeatureSpaceSpec, FittedExtractor
from .signal import Dataset, FTSignal, LabeledSample

MAGIC = b"GRID"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_CRC = struct.Struct("<I")


class ContainerError(ValueError):
    pass


class ChecksumError(ContainerError):
    pass


class FormatVersionError(ContainerError):
    pass


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray], version: int = FORMAT_VERSION) -> None:
    names = list(arrays)
    blobs = [np.array(arrays[n], dtype="<f8", order="C") for n in names]
    header_meta = dict(meta)
    header_meta["kind"] = kind
    header_meta["arrays"] = [{"name": n, "shape": list(b.shape)} for n, b in zip(names, blobs)]
    meta_bytes = json.dumps(header_meta, sort_keys=True).encode("utf-8")
    payload = _HEADER.pack(MAGIC, version, len(meta_bytes)) + meta_bytes + b"".join(b.tobytes() for b in blobs)
    Path(path).write_bytes(payload + _CRC.pack(zlib.crc32(payload)))


def is_container(path) -> bool:
    try:
        with open(path, "rb") as f:
            return f.read(4) == MAGIC
    except OSError:
        return False


def read_container(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _CRC.size:
        raise ChecksumError(f"{path}: file too short ({len(raw)} bytes); truncated or corrupt")
    magic, version, meta_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: not a GRID container (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: format version {version} is not supported (this build reads {FORMAT_VERSION})")
    payload, (crc,) = raw[:-_CRC.size], _CRC.unpack_from(raw, len(raw) - _CRC.size)
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: checksum mismatch; file is truncated or corrupt")
    start = _HEADER.size
    meta = json.loads(payload[start:start + meta_len].decode("utf-8"))
    if kind is not None and meta.get("kind") != kind:
        raise ContainerError(f"{path}: expected a {kind} file, found {meta.get('kind')!r}")
    arrays = {}
    offset = start + meta_len
    for entry in meta["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(payload):
            raise ContainerError(f"{path}: array {entry['name']!r} runs past the end of the payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(payload):
        raise ContainerError(f"{path}: {len(payload) - offset} unexpected trailing bytes")
    return meta, arrays


_EXT_ARRAYS = ("mean", "std", "hist_ranges", "pca_mean", "pca_basis", "pca_eigenvalues", "rica_weights")


def save_model(model: ECOCModel, path) -> None:
    if model.extractor is None:
        raise ValueError("only models with an attached feature extractor can be saved")
    ext = model.extractor
    arrays = {"coding": model.coding.M.astype(np.float64), "weights": model.weights, "biases": model.biases}
    arrays.update({f"extractor.{k}": v for k, v in ext.arrays().items()})
    meta = {
        "classes": list(model.classes),
        "space": ext.spec.to_dict(),
        "C": [m.C for m in model.learners],
        "dims": {"base": ext.in_dim, "features": ext.out_dim, "learners": model.coding.L},
        "extractor_meta": {k: v for k, v in ext.meta.items() if isinstance(v, (bool, int, float, str))},
    }
    write_container(path, "model", meta, arrays)


def load_model(path) -> ECOCModel:
    meta, arrays = read_container(path, "model")
    spec = FeatureSpaceSpec.from_dict(meta["space"])
    ext_arrays = {k: arrays.get(f"extractor.{k}") for k in _EXT_ARRAYS}
    ext = FittedExtractor(spec, meta=dict(meta.get("extractor_meta", {})), **ext_arrays)
    coding = CodingMatrix(arrays["coding"].astype(np.int8))
    learners = tuple(LinearSVMModel(w, b, c) for w, b, c in zip(arrays["weights"], arrays["biases"], meta["C"]))
    return ECOCModel(coding, learners, tuple(meta["classes"]), ext)


def save_dataset(dataset: Dataset, path) -> None:
    rates = {s.signal.sample_rate_hz for s in dataset.samples}
    if len(rates) > 1:
        raise ValueError("all recordings must share one sample rate")
    meta = {
        "classes": list(dataset.classes),
        "source_ids": [s.source_id for s in dataset.samples],
        "sample_rate_hz": rates.pop() if rates else 0.0,
        "metadata": dataset.metadata,
    }
    arrays = {"signals": dataset.signal_array(), "labels": dataset.label_indices().astype(np.float64)}
    write_container(path, "dataset", meta, arrays)


def load_dataset(path) -> Dataset:
    meta, arrays = read_container(path, "dataset")
    classes = tuple(meta["classes"])
    rate = float(meta["sample_rate_hz"])
    samples = tuple(
        LabeledSample(FTSignal.from_array(sig, rate), classes[int(lab)], sid)
        for sig, lab, sid in zip(arrays["signals"], arrays["labels"], meta["source_ids"])
    )
    return Dataset(samples, classes, meta.get("metadata") or {})
