"""Parametric synthetic force/torque recordings.

Every term of the signal model corresponds to one observable material
characteristic: magnitude (offsets and ramps), dynamics (initial peak,
negative rebound, slow oscillation) and frequency content (band-limited
texture noise). Classes that differ in a single term give feature tests a
known ground truth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import dsp
from .signal import N_CHANNELS, N_SAMPLES, SAMPLE_RATE_HZ, Dataset, FTSignal, LabeledSample

NYQUIST = SAMPLE_RATE_HZ / 2
_WARMUP = 500  # samples discarded after band-pass filtering of the texture noise
_BAND_ORDER = 12  # sharp enough to keep >90% of the texture energy inside its band


@dataclass(frozen=True)
class Peak:
    amplitude: float = 0.0
    center_s: float = 0.3
    width_s: float = 0.08


@dataclass(frozen=True)
class Oscillation:
    amplitude: float = 0.0
    frequency_hz: float = 2.0
    phase: float = 0.0


@dataclass(frozen=True)
class Texture:
    band: tuple[float, float] = (40.0, 80.0)
    amplitude: float = 0.0  # sd of the white noise before band-pass filtering


@dataclass(frozen=True)
class Dip:
    amplitude: float
    onset_s: float
    width_s: float = 0.1


@dataclass(frozen=True)
class Jitter:
    """Per-recording variability of a material (sd of random perturbations)."""

    offset: float = 0.0  # absolute, scaled by the channel gain
    slope: float = 0.0  # absolute, scaled by the channel gain
    peak: float = 0.0  # relative to the peak amplitude


_ZEROS = (0.0,) * N_CHANNELS


@dataclass(frozen=True)
class MaterialParams:
    base_offset: tuple[float, ...] = _ZEROS
    ramp_slope: tuple[float, ...] = _ZEROS
    initial_peak: Peak = field(default_factory=Peak)
    oscillation: Oscillation = field(default_factory=Oscillation)
    texture: Texture = field(default_factory=Texture)
    negative_dip: Dip | None = None
    noise_sd: float = 0.0
    channel_gains: tuple[float, ...] = (1.0, 0.3, 0.5, 0.1, 0.1, 0.1)
    jitter: Jitter = field(default_factory=Jitter)

    def validate(self) -> None:
        for name in ("base_offset", "ramp_slope", "channel_gains"):
            v = getattr(self, name)
            if len(v) != N_CHANNELS or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} needs {N_CHANNELS} finite values")
        if self.initial_peak.width_s <= 0:
            raise ValueError("peak width must be positive")
        if not 0 <= self.oscillation.frequency_hz < NYQUIST:
            raise ValueError("oscillation frequency must be below Nyquist")
        lo, hi = self.texture.band
        if not 0 < lo < hi < NYQUIST:
            raise ValueError(f"texture band {self.texture.band} must satisfy 0 < lo < hi < {NYQUIST}")
        if self.negative_dip is not None and self.negative_dip.width_s <= 0:
            raise ValueError("dip width must be positive")
        if self.noise_sd < 0 or min(self.jitter.offset, self.jitter.slope, self.jitter.peak) < 0:
            raise ValueError("noise and jitter levels must be non-negative")
        scalars = [self.initial_peak.amplitude, self.oscillation.amplitude, self.oscillation.phase,
                   self.texture.amplitude, self.noise_sd]
        if self.negative_dip is not None:
            scalars += [self.negative_dip.amplitude, self.negative_dip.onset_s]
        if not np.all(np.isfinite(scalars)):
            raise ValueError("amplitudes must be finite")

    def to_dict(self) -> dict:
        return asdict(self)


def band_noise(band: tuple[float, float], amplitude: float, n: int, rng: np.random.Generator, rows: int = 1) -> np.ndarray:
    """White noise of sd ``amplitude`` band-passed to ``band`` (Hz), shape (rows, n)."""
    lo, hi = band
    white = rng.standard_normal((rows, n + _WARMUP)) * amplitude
    hp = dsp.design_butterworth_highpass(_BAND_ORDER, lo, SAMPLE_RATE_HZ)
    lp = dsp.design_butterworth_lowpass(_BAND_ORDER, hi, SAMPLE_RATE_HZ)
    return dsp.filter_forward(lp, dsp.filter_forward(hp, white))[:, _WARMUP:]


def generate_signal(params: MaterialParams, seed: int) -> FTSignal:
    params.validate()
    rng = np.random.default_rng(seed)
    t = np.arange(N_SAMPLES) / SAMPLE_RATE_HZ
    gains = np.asarray(params.channel_gains)
    j = params.jitter
    offsets = np.asarray(params.base_offset) + j.offset * gains * rng.standard_normal(N_CHANNELS)
    slopes = np.asarray(params.ramp_slope) + j.slope * gains * rng.standard_normal(N_CHANNELS)
    x = offsets[:, None] + slopes[:, None] * t

    pk = params.initial_peak
    peak_amp = pk.amplitude * (1.0 + j.peak * rng.standard_normal())
    trend = peak_amp * np.exp(-0.5 * ((t - pk.center_s) / pk.width_s) ** 2)
    osc = params.oscillation
    trend = trend + osc.amplitude * np.sin(2 * np.pi * osc.frequency_hz * t + osc.phase)
    if params.negative_dip is not None:
        dip = params.negative_dip
        center = dip.onset_s + 2 * dip.width_s
        trend = trend - dip.amplitude * np.exp(-0.5 * ((t - center) / dip.width_s) ** 2)
    x[0] += trend
    # Fz follows Fx's trend (including its ramp) with opposite sign, half size
    x[2] -= 0.5 * (trend + slopes[0] * t)

    if params.texture.amplitude > 0:
        x += gains[:, None] * band_noise(params.texture.band, params.texture.amplitude, N_SAMPLES, rng, N_CHANNELS)
    if params.noise_sd > 0:
        x += params.noise_sd * rng.standard_normal(x.shape)
    return FTSignal.from_array(x, SAMPLE_RATE_HZ)


def default_material() -> MaterialParams:
    """Reference material that the class grid perturbs."""
    return MaterialParams(
        base_offset=(2.0, 0.3, -1.0, 0.05, 0.2, 0.02),
        ramp_slope=(1.0, 0.05, -0.2, 0.01, 0.05, 0.0),
        initial_peak=Peak(2.0, 0.3, 0.08),
        oscillation=Oscillation(0.2, 2.0, 0.0),
        texture=Texture((60.0, 120.0), 0.5),
        noise_sd=0.02,
        jitter=Jitter(offset=0.3, slope=0.2, peak=0.1),
    )


def class_grid(n_classes: int, separation: float, seed: int, base: MaterialParams | None = None) -> list[MaterialParams]:
    """Per-class parameters on a lattice with spacing proportional to ``separation``.

    Each characteristic takes ``n_classes`` evenly spaced levels in
    ``[-1, 1]``; an independent seeded permutation assigns levels to classes
    so classes differ in several characteristics at once.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    base = base or default_material()
    rng = np.random.default_rng(seed)
    levels = np.linspace(-1.0, 1.0, n_classes)
    pos = {name: levels[rng.permutation(n_classes)] for name in
           ("magnitude", "slope", "peak", "dip", "band", "width", "texture", "osc")}
    s = separation
    out = []
    for k in range(n_classes):
        def p(name):
            return float(pos[name][k]) * s

        scale = max(1.0 + 0.5 * p("magnitude"), 0.1)
        slope = np.array(base.ramp_slope) * scale
        slope[0] += 0.8 * p("slope")
        center = base.texture.band[0] / 2 + base.texture.band[1] / 2 + 40.0 * p("band")
        half = max((base.texture.band[1] - base.texture.band[0]) / 2 * (1.0 + 0.5 * p("width")), 2.0)
        band = (float(np.clip(center - half, 5.0, NYQUIST - 20)), float(np.clip(center + half, 15.0, NYQUIST - 5)))
        dip_amp = 1.5 * max(p("dip"), 0.0)
        out.append(replace(
            base,
            base_offset=tuple(float(v) for v in np.array(base.base_offset) * scale),
            ramp_slope=tuple(float(v) for v in slope),
            initial_peak=replace(base.initial_peak, amplitude=max(base.initial_peak.amplitude * scale + 1.5 * p("peak"), 0.0)),
            oscillation=replace(base.oscillation, frequency_hz=max(base.oscillation.frequency_hz + 1.0 * p("osc"), 0.1)),
            texture=Texture(band, max(base.texture.amplitude * (1.0 + 0.5 * p("texture")), 0.0)),
            negative_dip=Dip(dip_amp, 0.6) if dip_amp > 0 else base.negative_dip,
        ))
    return out


def dataset_from_params(params: Sequence[MaterialParams], per_class: int, seed: int, names: Sequence[str] | None = None) -> Dataset:
    """Draw ``per_class`` i.i.d. recordings for each parameter set."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    names = tuple(names) if names is not None else tuple(f"class_{k:02d}" for k in range(len(params)))
    if len(names) != len(params):
        raise ValueError("one name per parameter set required")
    seeds = np.random.SeedSequence(seed).spawn(len(params))
    samples = []
    for name, prm, ss in zip(names, params, seeds):
        for i, child in enumerate(ss.spawn(per_class)):
            sig = generate_signal(prm, int(child.generate_state(1)[0]))
            samples.append(LabeledSample(sig, name, f"{name}/{name}_{i:03d}.csv"))
    meta = {"params": [p.to_dict() for p in params], "seed": seed}
    return Dataset(tuple(samples), names, meta)


def generate_dataset(n_classes: int, per_class: int, separation: float, seed: int) -> Dataset:
    if n_classes < 2 or per_class < 2:
        raise ValueError("need n_classes >= 2 and per_class >= 2")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    ds = dataset_from_params(class_grid(n_classes, separation, seed), per_class, seed + 1)
    ds.metadata["separation"] = separation
    return ds
