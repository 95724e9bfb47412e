"""Recording, dataset and feature-vector types shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

CHANNELS = ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")
N_CHANNELS = len(CHANNELS)
SAMPLE_RATE_HZ = 500.0
N_SAMPLES = 1600  # 3.2 s at 500 Hz

# Material order used for the public dataset (also the confusion-matrix order).
MATERIAL_ORDER = (
    "Dry peas",
    "Rice",
    "Wheat flour",
    "Clay granules",
    "Oat flakes",
    "Potting gravel",
    "Sunflower seeds",
    "Breadcrumbs",
    "Macaroni",
    "Fine sugar",
    "Cat litter",
)


class InvalidSignalError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FTSignal:
    """One six-axis force/torque recording.

    Channels are stored as separate arrays so that malformed recordings can
    still be represented and reported by :func:`validate_signal`.
    """

    channels: tuple[np.ndarray, ...]
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(_frozen(c).ravel() for c in self.channels))

    @classmethod
    def from_array(cls, data: np.ndarray, sample_rate_hz: float = SAMPLE_RATE_HZ) -> FTSignal:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidSignalError(f"expected a 2-D (channels, samples) array, got shape {data.shape}")
        return cls(tuple(data), sample_rate_hz)

    @property
    def n_samples(self) -> int:
        return len(self.channels[0]) if self.channels else 0

    @property
    def data(self) -> np.ndarray:
        """(6, n_samples) view; requires equal channel lengths."""
        if len({len(c) for c in self.channels}) > 1:
            raise InvalidSignalError("channels have unequal lengths")
        out = np.stack(self.channels)
        out.setflags(write=False)
        return out

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def is_canonical(self) -> bool:
        return (
            len(self.channels) == N_CHANNELS
            and all(len(c) == N_SAMPLES for c in self.channels)
            and self.sample_rate_hz == SAMPLE_RATE_HZ
        )


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_signal(signal: FTSignal) -> ValidationResult:
    """Check the recording invariants, collecting every violation found."""
    violations = []
    if len(signal.channels) != N_CHANNELS:
        violations.append(f"expected {N_CHANNELS} channels, got {len(signal.channels)}")
    rate = signal.sample_rate_hz
    if not (np.isfinite(rate) and rate > 0):
        violations.append(f"non-positive sample rate {rate!r}")
    lengths = [len(c) for c in signal.channels]
    if lengths:
        ref = lengths[0]
        if ref == 0:
            violations.append("empty recording")
        for i, n in enumerate(lengths):
            if n != ref:
                name = CHANNELS[i] if i < N_CHANNELS else str(i)
                violations.append(f"length mismatch: channel {i} ({name}) has {n} samples, expected {ref}")
    for i, c in enumerate(signal.channels):
        bad = np.flatnonzero(~np.isfinite(c))
        name = CHANNELS[i] if i < N_CHANNELS else str(i)
        for j in bad:
            violations.append(f"non-finite value {float(c[j])} at ({name}, {j})")
    return ValidationResult(tuple(violations))


def require_valid(signal: FTSignal) -> None:
    result = validate_signal(signal)
    if not result.ok:
        raise InvalidSignalError("; ".join(result.violations))


def fit_to_length(signal: FTSignal, target_len: int, align: str = "end") -> FTSignal:
    """Trim or pad every channel to ``target_len`` samples.

    With ``align="end"`` the last ``target_len`` samples are kept, so recordings
    that started early line up at the end of the motion. ``align="head"`` keeps
    the first samples instead. Short recordings are left-padded with each
    channel's first value.
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    if align not in ("end", "head"):
        raise ValueError(f"unknown alignment {align!r}")
    require_valid(signal)
    data = signal.data
    n = data.shape[1]
    if n > target_len:
        data = data[:, n - target_len:] if align == "end" else data[:, :target_len]
    elif n < target_len:
        pad = np.repeat(data[:, :1], target_len - n, axis=1)
        data = np.concatenate([pad, data], axis=1)
    return FTSignal.from_array(data, signal.sample_rate_hz)


@dataclass(frozen=True)
class LabeledSample:
    signal: FTSignal
    label: str
    source_id: str = ""


@dataclass(frozen=True)
class Dataset:
    samples: tuple[LabeledSample, ...]
    classes: tuple[str, ...]
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")
        known = set(self.classes)
        for s in self.samples:
            if s.label not in known:
                raise ValueError(f"sample {s.source_id!r} has unregistered label {s.label!r}")

    def __len__(self) -> int:
        return len(self.samples)

    def label_indices(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.classes)}
        return np.array([index[s.label] for s in self.samples], dtype=np.intp)

    def signal_array(self) -> np.ndarray:
        """Stack all recordings into an (n, 6, n_samples) array."""
        return np.stack([s.signal.data for s in self.samples])

    def class_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(self.classes, 0)
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def same_content(self, other: Dataset) -> bool:
        """Equality on classes, labels, provenance and exact signal values."""
        if self.classes != other.classes or len(self) != len(other):
            return False
        for a, b in zip(self.samples, other.samples):
            if a.label != b.label or a.source_id != b.source_id:
                return False
            if a.signal.sample_rate_hz != b.signal.sample_rate_hz:
                return False
            if not np.array_equal(a.signal.data, b.signal.data):
                return False
        return True


def order_classes(names: Sequence[str]) -> tuple[str, ...]:
    """Canonical material order when the names are the 11 public materials, else lexicographic."""
    def norm(s: str) -> str:
        return " ".join(s.replace("_", " ").replace("-", " ").lower().split())

    canon = {norm(n): i for i, n in enumerate(MATERIAL_ORDER)}
    if len(names) == len(canon) and all(norm(n) in canon for n in names):
        return tuple(sorted(names, key=lambda n: canon[norm(n)]))
    return tuple(sorted(names))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    space_id: str

    def __post_init__(self) -> None:
        values = _frozen(self.values).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", values)
        # local import: features registers dims and imports this module
        from .features import REGISTERED_DIMS

        expected = REGISTERED_DIMS.get(self.space_id)
        if expected is not None and expected != values.size:
            raise ValueError(f"space {self.space_id!r} expects dim {expected}, got {values.size}")

    @property
    def dim(self) -> int:
        return int(self.values.size)


def concat_features(parts: Sequence[FeatureVector], new_space_id: str) -> FeatureVector:
    if not parts:
        raise ValueError("cannot concatenate an empty list of feature vectors")
    return FeatureVector(np.concatenate([p.values for p in parts]), new_space_id)
