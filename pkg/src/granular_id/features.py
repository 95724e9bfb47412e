"""Feature spaces: stateless base extraction plus fitted standardization,
PCA and RICA stages.

Base features are computed on batches of recordings shaped
``(n, 6, n_samples)``; a :class:`FittedExtractor` holds everything learned
from a training split and maps base features to classifier inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from . import dsp
from .signal import N_CHANNELS, N_SAMPLES, SAMPLE_RATE_HZ, FeatureVector, FTSignal, LabeledSample

# Table order; used by ``compare --spaces all``.
SPACE_IDS = (
    "raw_plus_hfmh",
    "raw_plus_dft",
    "norm_raw_plus_hfmh",
    "norm_raw_plus_dft",
    "hfmh",
    "raw",
    "raw_hist",
    "norm_raw",
    "dft",
    "pca",
    "pca_rica",
)

_N_FFT = dsp.next_pow2(N_SAMPLES)
_ATOMS = {
    "raw": N_CHANNELS * N_SAMPLES,
    "norm_raw": N_CHANNELS * N_SAMPLES,
    "hfmh": N_CHANNELS * 100,
    "raw_hist": N_CHANNELS * 100,
    "dft": N_CHANNELS * (_N_FFT // 2 + 1),
}
_PARTS = {
    "raw_plus_hfmh": ("raw", "hfmh"),
    "raw_plus_dft": ("raw", "dft"),
    "norm_raw_plus_hfmh": ("norm_raw", "hfmh"),
    "norm_raw_plus_dft": ("norm_raw", "dft"),
    "pca": ("raw",),
    "pca_rica": ("raw",),
}

REGISTERED_DIMS = dict(_ATOMS)
REGISTERED_DIMS.update({k: sum(_ATOMS[p] for p in v) for k, v in _PARTS.items()})
REGISTERED_DIMS.update({"pca": 100, "pca_rica": 80})

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureSpaceSpec:
    id: str
    pca_k: int = 100
    rica_k: int = 80
    hist_bins: int = 100
    hist_range: tuple[float, float] = (-1.5, 1.5)
    filter_order: int = 8
    filter_cutoff_hz: float = 23.0
    zero_phase: bool = False
    standardize: bool = True
    rica_lambda: float = 1.0
    rica_max_iter: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.id not in REGISTERED_DIMS:
            raise ValueError(f"unknown feature space {self.id!r}; expected one of {', '.join(SPACE_IDS)}")
        for name in ("pca_k", "rica_k", "hist_bins", "filter_order", "rica_max_iter"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.id == "pca_rica" and self.rica_k > self.pca_k:
            raise ValueError("rica_k cannot exceed pca_k")
        lo, hi = self.hist_range
        if not lo < hi:
            raise ValueError("hist_range must satisfy lo < hi")
        object.__setattr__(self, "hist_range", (float(lo), float(hi)))

    @property
    def parts(self) -> tuple[str, ...]:
        return _PARTS.get(self.id, (self.id,))

    @property
    def base_dim(self) -> int:
        hist = N_CHANNELS * self.hist_bins
        return sum(hist if p in ("hfmh", "raw_hist") else _ATOMS[p] for p in self.parts)

    @property
    def out_dim(self) -> int:
        if self.id == "pca":
            return self.pca_k
        if self.id == "pca_rica":
            return self.rica_k
        return self.base_dim

    @property
    def vector_id(self) -> str:
        """Identifier carried by produced :class:`FeatureVector` objects."""
        return self.id if self.out_dim == REGISTERED_DIMS[self.id] else f"{self.id}[dim={self.out_dim}]"

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["hist_range"] = list(self.hist_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FeatureSpaceSpec:
        d = dict(d)
        d["hist_range"] = tuple(d["hist_range"])
        return cls(**d)


def _as_signal_array(signals) -> np.ndarray:
    if isinstance(signals, np.ndarray):
        arr = np.asarray(signals, dtype=np.float64)
    else:
        items = list(signals)
        arr = np.stack([(s.signal if isinstance(s, LabeledSample) else s).data for s in items]) if items else np.empty((0, N_CHANNELS, N_SAMPLES))
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (N_CHANNELS, N_SAMPLES):
        raise ValueError(f"expected canonical recordings of shape (n, {N_CHANNELS}, {N_SAMPLES}), got {arr.shape}")
    return arr


def _highpass(spec: FeatureSpaceSpec) -> dsp.FilterCascade:
    return dsp.design_butterworth_highpass(spec.filter_order, spec.filter_cutoff_hz, SAMPLE_RATE_HZ)


def hfmh(signals: np.ndarray, spec: FeatureSpaceSpec) -> np.ndarray:
    """High-frequency magnitude histogram, (n, 6 * hist_bins)."""
    cascade = _highpass(spec)
    # Starting from the first sample removes the start-up step the zero-state
    # filter would otherwise see; exact for a DC-rejecting filter.
    centered = signals - signals[..., :1]
    run = dsp.filter_zero_phase if spec.zero_phase else dsp.filter_forward
    filtered = run(cascade, centered)
    lo, hi = spec.hist_range
    h = dsp.magnitude_histogram(filtered, spec.hist_bins, lo, hi)
    return h.reshape(len(signals), -1)


def fit_hist_ranges(signals: np.ndarray) -> np.ndarray:
    """Per-channel ``[min, max]`` over a set of recordings, (6, 2)."""
    signals = _as_signal_array(signals)
    lo = signals.min(axis=(0, 2))
    hi = signals.max(axis=(0, 2))
    flat = hi <= lo
    lo = np.where(flat, lo - 0.5, lo)
    hi = np.where(flat, hi + 0.5, hi)
    return np.stack([lo, hi], axis=1)


def base_features(spec: FeatureSpaceSpec, signals, hist_ranges: np.ndarray | None = None) -> np.ndarray:
    """Base feature matrix (n, spec.base_dim) before any fitted stage.

    ``raw_hist`` needs per-channel ranges from :func:`fit_hist_ranges`.
    """
    S = _as_signal_array(signals)
    n = len(S)
    blocks = []
    for part in spec.parts:
        if part == "raw":
            blocks.append(S.reshape(n, -1))
        elif part == "norm_raw":
            blocks.append(dsp.minmax_normalize(S).reshape(n, -1))
        elif part == "hfmh":
            blocks.append(hfmh(S, spec))
        elif part == "dft":
            blocks.append(dsp.dft_magnitude(S, _N_FFT).reshape(n, -1))
        elif part == "raw_hist":
            if hist_ranges is None:
                raise ValueError("raw_hist requires fitted per-channel ranges")
            h = dsp.magnitude_histogram(S, spec.hist_bins, hist_ranges[:, 0][None], hist_ranges[:, 1][None])
            blocks.append(h.reshape(n, -1))
    return np.concatenate(blocks, axis=1)


def extract_base(spec: FeatureSpaceSpec, sample: FTSignal | LabeledSample, hist_ranges=None) -> FeatureVector:
    signal = sample.signal if isinstance(sample, LabeledSample) else sample
    if not signal.is_canonical():
        raise ValueError(f"expected a canonical {N_CHANNELS}x{N_SAMPLES} recording at {SAMPLE_RATE_HZ} Hz")
    values = base_features(spec, signal.data[None], hist_ranges)[0]
    vid = spec.id if spec.id not in ("pca", "pca_rica") else "raw"
    return FeatureVector(values, vid if spec.base_dim == REGISTERED_DIMS.get(vid) else f"{vid}[base]")


class PCAFit(NamedTuple):
    mean: np.ndarray
    basis: np.ndarray  # (d, k), orthonormal columns
    eigenvalues: np.ndarray  # descending, sample covariance


def pca_fit(X: np.ndarray, k: int) -> PCAFit:
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} outside [1, {min(n - 1, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    if n < d:
        evals, U = np.linalg.eigh(Xc @ Xc.T)
        order = np.argsort(evals)[::-1][:k]
        evals, U = evals[order], U[:, order]
        if np.any(evals <= 1e-12 * max(evals[0], 1e-300)):
            raise ValueError("data rank is below k")
        basis = (Xc.T @ U) / np.sqrt(evals)
    else:
        evals, V = np.linalg.eigh(Xc.T @ Xc)
        order = np.argsort(evals)[::-1][:k]
        evals, basis = evals[order], V[:, order]
    rows = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[rows, np.arange(k)])
    basis = basis * np.where(signs == 0, 1.0, signs)
    return PCAFit(mean, basis, np.maximum(evals, 0.0) / (n - 1))


def _logcosh(z: np.ndarray) -> np.ndarray:
    a = np.abs(z)
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


def rica_objective(W: np.ndarray, X: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    """Reconstruction cost plus log-cosh sparsity, and its gradient in W.

    ``J = (1/n) sum_i ||W^T W x_i - x_i||^2 + (lam/n) sum_ij logcosh(W_j . x_i)``
    """
    n = X.shape[0]
    Z = X @ W.T
    R = Z @ W - X
    J = (np.sum(R * R) + lam * np.sum(_logcosh(Z))) / n
    grad = (2.0 * (W @ (R.T @ X + X.T @ R)) + lam * (np.tanh(Z).T @ X)) / n
    return float(J), grad


class RicaFit(NamedTuple):
    weights: np.ndarray  # (k, d)
    objective: list[float]  # value at every accepted iterate, starting point first
    converged: bool


def rica_fit(X: np.ndarray, k: int, lam: float = 1.0, max_iter: int = 500, seed: int = 0, tol: float = 1e-6) -> RicaFit:
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= d:
        raise ValueError(f"k={k} outside [1, {d}]")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    w0 = Q.T.ravel()

    def fun(w):
        with np.errstate(over="ignore", invalid="ignore"):
            J, g = rica_objective(w.reshape(k, d), X, lam)
        if not np.isfinite(J):
            raise FloatingPointError("RICA objective is not finite; check lambda and input scaling")
        return J, g.ravel()

    history = [fun(w0)[0]]

    def record(intermediate_result):
        history.append(float(intermediate_result.fun))

    res = optimize.minimize(
        fun, w0, jac=True, method="L-BFGS-B", callback=record,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-15, "maxcor": 20},
    )
    W = res.x.reshape(k, d)
    grad_inf = float(np.max(np.abs(fun(res.x)[1])))
    return RicaFit(W, history, grad_inf < tol)


def rica_transform(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != weights.shape[1]:
        raise ValueError(f"input dim {x.shape[-1]} does not match RICA weights ({weights.shape[1]})")
    return x @ weights.T


@dataclass(frozen=True)
class FittedExtractor:
    spec: FeatureSpaceSpec
    mean: np.ndarray
    std: np.ndarray
    hist_ranges: np.ndarray | None = None
    pca_mean: np.ndarray | None = None
    pca_basis: np.ndarray | None = None
    pca_eigenvalues: np.ndarray | None = None
    rica_weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def in_dim(self) -> int:
        return int(self.mean.size)

    @property
    def out_dim(self) -> int:
        if self.rica_weights is not None:
            return int(self.rica_weights.shape[0])
        if self.pca_basis is not None:
            return int(self.pca_basis.shape[1])
        return self.in_dim

    def standardize(self, B: np.ndarray) -> np.ndarray:
        return (B - self.mean) / self.std

    def unstandardize(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean

    def transform_base(self, B: np.ndarray) -> np.ndarray:
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        if B.shape[1] != self.in_dim:
            raise ValueError(f"feature dim {B.shape[1]} does not match fitted statistics ({self.in_dim})")
        Z = self.standardize(B)
        if self.pca_basis is not None:
            Z = (Z - self.pca_mean) @ self.pca_basis
        if self.rica_weights is not None:
            Z = rica_transform(self.rica_weights, Z / np.sqrt(self.pca_eigenvalues))
        return Z

    def transform(self, signals) -> np.ndarray:
        return self.transform_base(base_features(self.spec, signals, self.hist_ranges))

    def arrays(self) -> dict[str, np.ndarray]:
        names = ("mean", "std", "hist_ranges", "pca_mean", "pca_basis", "pca_eigenvalues", "rica_weights")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


def fit_from_base(spec: FeatureSpaceSpec, B: np.ndarray, hist_ranges: np.ndarray | None = None) -> FittedExtractor:
    """Fit the learned stages on a training base-feature matrix."""
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if spec.standardize:
        mean = B.mean(axis=0)
        std = B.std(axis=0)
        std = np.where(std < STD_FLOOR, 1.0, std)
    else:
        mean = np.zeros(B.shape[1])
        std = np.ones(B.shape[1])
    ext = FittedExtractor(spec, mean, std, hist_ranges)
    if spec.id not in ("pca", "pca_rica"):
        return ext
    Z = ext.standardize(B)
    pca = pca_fit(Z, spec.pca_k)
    ext = replace(ext, pca_mean=pca.mean, pca_basis=pca.basis, pca_eigenvalues=pca.eigenvalues)
    if spec.id == "pca":
        return ext
    scores = (Z - pca.mean) @ pca.basis / np.sqrt(pca.eigenvalues)
    rica = rica_fit(scores, spec.rica_k, spec.rica_lambda, spec.rica_max_iter, spec.seed)
    return replace(ext, rica_weights=rica.weights, meta={"rica_converged": rica.converged, "rica_objective": rica.objective[-1]})


def fit_extractor(spec: FeatureSpaceSpec, training: Sequence[LabeledSample] | np.ndarray) -> FittedExtractor:
    S = _as_signal_array(training)
    if len(S) < 2:
        raise ValueError("need at least 2 training samples")
    ranges = fit_hist_ranges(S) if "raw_hist" in spec.parts else None
    return fit_from_base(spec, base_features(spec, S, ranges), ranges)


def apply_extractor(ext: FittedExtractor, sample: FTSignal | LabeledSample) -> FeatureVector:
    signal = sample.signal if isinstance(sample, LabeledSample) else sample
    if not signal.is_canonical():
        raise ValueError(f"expected a canonical {N_CHANNELS}x{N_SAMPLES} recording at {SAMPLE_RATE_HZ} Hz")
    return FeatureVector(ext.transform(signal.data[None])[0], ext.spec.vector_id)
