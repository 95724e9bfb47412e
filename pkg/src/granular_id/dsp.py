"""Signal-processing primitives.

Butterworth filters are designed from the analog prototype poles, mapped to
the digital domain with the prewarped bilinear transform and realized as a
cascade of real biquads. Spectra come from an iterative radix-2 FFT;
lengths that are not a power of two go through Bluestein's chirp-z
reformulation on top of the same radix-2 kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np


@dataclass(frozen=True)
class BiquadSection:
    """``(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)``."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])

    def is_stable(self, margin: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0 - margin))


@dataclass(frozen=True)
class FilterCascade:
    sections: tuple[BiquadSection, ...]
    overall_gain: float = 1.0
    design_meta: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def sample_rate_hz(self) -> float:
        return float(self.design_meta.get("sample_rate_hz", 1.0))

    def coefficients(self) -> np.ndarray:
        """(n_sections, 5) array of ``b0, b1, b2, a1, a2``."""
        return np.array([[s.b0, s.b1, s.b2, s.a1, s.a2] for s in self.sections], dtype=np.float64).reshape(-1, 5)


def _design_butterworth(order: int, cutoff_hz: float, sample_rate_hz: float, kind: str) -> FilterCascade:
    if order < 2 or order % 2:
        raise ValueError(f"order must be an even integer >= 2, got {order}")
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({sample_rate_hz / 2} Hz)")
    warped = math.tan(math.pi * cutoff_hz / sample_rate_hz)
    sections = []
    # upper-half-plane prototype poles; each pairs with its conjugate
    for k in range(order // 2):
        proto = complex(np.exp(1j * math.pi * (2 * k + order + 1) / (2 * order)))
        s = warped * proto if kind == "lowpass" else warped / proto
        z = (1 + s) / (1 - s)
        a1 = -2.0 * z.real
        a2 = abs(z) ** 2
        if kind == "lowpass":
            g = (1 + a1 + a2) / 4  # unit gain at DC, double zero at z = -1
            sections.append(BiquadSection(g, 2 * g, g, a1, a2))
        else:
            g = (1 - a1 + a2) / 4  # unit gain at Nyquist, double zero at z = 1
            sections.append(BiquadSection(g, -2 * g, g, a1, a2))
    sections.sort(key=lambda sec: sec.a2)
    meta = {"order": order, "cutoff_hz": float(cutoff_hz), "sample_rate_hz": float(sample_rate_hz), "kind": kind}
    return FilterCascade(tuple(sections), 1.0, meta)


def design_butterworth_highpass(order: int, cutoff_hz: float, sample_rate_hz: float) -> FilterCascade:
    return _design_butterworth(order, cutoff_hz, sample_rate_hz, "highpass")


def design_butterworth_lowpass(order: int, cutoff_hz: float, sample_rate_hz: float) -> FilterCascade:
    return _design_butterworth(order, cutoff_hz, sample_rate_hz, "lowpass")


def frequency_response(cascade: FilterCascade, f_hz, sample_rate_hz: float | None = None):
    """Complex gain of the cascade at ``f_hz`` (scalar or array)."""
    fs = cascade.sample_rate_hz if sample_rate_hz is None else sample_rate_hz
    f = np.asarray(f_hz, dtype=np.float64)
    z1 = np.exp(-2j * np.pi * f / fs)
    z2 = z1 * z1
    h = np.full(f.shape, complex(cascade.overall_gain))
    for s in cascade.sections:
        h = h * (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)
    return h[()] if h.ndim == 0 else h


@numba.njit(cache=True, nogil=True)
def _sos_df2t(coef, gain, x):
    out = np.empty_like(x)
    for r in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[r, j] = x[r, j] * gain
        for k in range(coef.shape[0]):
            b0, b1, b2, a1, a2 = coef[k, 0], coef[k, 1], coef[k, 2], coef[k, 3], coef[k, 4]
            s1 = 0.0
            s2 = 0.0
            for j in range(x.shape[1]):
                xi = out[r, j]
                y = b0 * xi + s1
                s1 = b1 * xi - a1 * y + s2
                s2 = b2 * xi - a2 * y
                out[r, j] = y
    return out


def filter_forward(cascade: FilterCascade, x: np.ndarray) -> np.ndarray:
    """Causal single pass through every section, zero initial state.

    Filters along the last axis; leading axes are treated as a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    rows = np.ascontiguousarray(x.reshape(-1, shape[-1]) if x.ndim else x.reshape(1, 1))
    y = _sos_df2t(cascade.coefficients(), float(cascade.overall_gain), rows)
    return y.reshape(shape)


def filter_zero_phase(cascade: FilterCascade, x: np.ndarray) -> np.ndarray:
    """Forward then time-reversed pass (squared magnitude, zero phase)."""
    y = filter_forward(cascade, x)
    return filter_forward(cascade, y[..., ::-1])[..., ::-1].copy()


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_radix2(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    lead = x.shape[:-1]
    out = x[..., _bit_reverse_permutation(n)]
    half = 1
    while half < n:
        twiddle = np.exp(-1j * np.pi * np.arange(half) / half)
        blocks = out.reshape(*lead, n // (2 * half), 2, half)
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * twiddle
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        half *= 2
    return out


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    m = 1 << (2 * n - 2).bit_length()
    k = np.arange(n)
    # n^2 mod 2n keeps the chirp phase small for long inputs
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    conv = ifft(_fft_radix2(a) * _fft_radix2(b))
    return conv[..., :n] * chirp


def fft(x: np.ndarray) -> np.ndarray:
    """DFT along the last axis, ``X_k = sum_n x_n exp(-2 pi i k n / N)``."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n == 0:
        raise ValueError("fft of an empty sequence")
    if n & (n - 1) == 0:
        return _fft_radix2(x)
    return _fft_bluestein(x)


def ifft(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.shape[-1]


def next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def dft_magnitude(x: np.ndarray, n_fft: int | None = None) -> np.ndarray:
    """One-sided magnitude spectrum ``|X_k|``, ``k = 0..n_fft // 2``.

    ``n_fft`` larger than the input zero-pads at the end; ``None`` uses the
    input length.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("dft of an empty sequence")
    if n_fft is not None:
        if n_fft < n:
            raise ValueError(f"n_fft={n_fft} shorter than the input ({n})")
        if n_fft > n:
            pad = np.zeros(x.shape[:-1] + (n_fft - n,))
            x = np.concatenate([x, pad], axis=-1)
    spectrum = fft(x)
    return np.abs(spectrum[..., : x.shape[-1] // 2 + 1])


def magnitude_histogram(x: np.ndarray, n_bins: int = 100, lo=-1.5, hi=1.5) -> np.ndarray:
    """Histogram of the values of ``x`` along its last axis, normalized to sum 1.

    Bins are ``[lo + k w, lo + (k+1) w)`` with the last one closed; values
    outside ``[lo, hi]`` are clipped into the edge bins. ``lo``/``hi`` may be
    arrays broadcasting against the leading axes (per-row ranges).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        raise ValueError("histogram of an empty sequence")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    lo = np.asarray(lo, dtype=np.float64)[..., None]
    hi = np.asarray(hi, dtype=np.float64)[..., None]
    if np.any(lo >= hi):
        raise ValueError("histogram range requires lo < hi")
    idx = np.floor((x - lo) * n_bins / (hi - lo))
    idx = np.clip(idx, 0, n_bins - 1).astype(np.intp)
    lead = idx.shape[:-1]
    rows = idx.reshape(-1, idx.shape[-1])
    offsets = (np.arange(rows.shape[0]) * n_bins)[:, None]
    counts = np.bincount((rows + offsets).ravel(), minlength=rows.shape[0] * n_bins)
    return (counts.reshape(*lead, n_bins) / x.shape[-1]).astype(np.float64)


def minmax_normalize(x: np.ndarray) -> np.ndarray:
    """``(x - min) / (max - min)`` along the last axis; constant rows map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=-1, keepdims=True)
    span = x.max(axis=-1, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)
