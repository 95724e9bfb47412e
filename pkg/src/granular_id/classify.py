"""Linear SVM learners combined through one-vs-one error-correcting output codes.

Each binary learner solves the soft-margin problem

    min_{w,b}  1/2 (||w||^2 + b^2) + C sum_i max(0, 1 - y_i (w.x_i + b))

in the dual by coordinate descent. The bias is the weight of an implicit
constant-1 feature, which removes the equality constraint from the dual and
leaves a box-constrained QP. The solver works on the Gram matrix, so the
cost per epoch is O(n^2) regardless of the feature dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .features import FittedExtractor


@dataclass(frozen=True)
class LinearSVMModel:
    w: np.ndarray
    b: float
    C: float

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("SVM parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def d(self) -> int:
        return int(self.w.size)


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    epochs: int
    max_violation: float
    tol: float

    @property
    def converged(self) -> bool:
        return self.max_violation < self.tol


DUAL_TOL = 1e-6
MAX_EPOCHS = 10_000


@numba.njit(cache=True, nogil=True)
def _cd_epoch(Q, alpha, grad, C, order):
    """One sweep of projected coordinate updates; returns the largest
    projected-gradient magnitude seen before each update."""
    n = Q.shape[0]
    worst = 0.0
    for t in range(order.shape[0]):
        i = order[t]
        g = grad[i]
        if alpha[i] <= 0.0:
            pg = min(g, 0.0)
        elif alpha[i] >= C:
            pg = max(g, 0.0)
        else:
            pg = g
        if abs(pg) > worst:
            worst = abs(pg)
        if pg != 0.0:
            new = min(max(alpha[i] - g / Q[i, i], 0.0), C)
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                for j in range(n):
                    grad[j] += delta * Q[j, i]
    return worst


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float = DUAL_TOL, max_epochs: int = MAX_EPOCHS, seed: int = 0) -> DualSolution:
    """Minimize ``1/2 a'Qa - sum(a)`` over ``0 <= a <= C`` with ``Q = yy' * (K + 1)``."""
    y = np.asarray(y, dtype=np.float64)
    Q = np.ascontiguousarray((np.asarray(K, dtype=np.float64) + 1.0) * np.outer(y, y))
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    rng = np.random.default_rng(seed)
    worst = np.inf
    for epoch in range(1, max_epochs + 1):
        worst = _cd_epoch(Q, alpha, grad, float(C), rng.permutation(n))
        if worst < tol:
            return DualSolution(alpha, epoch, worst, tol)
    # final check of the last iterate
    pg = np.where(alpha <= 0, np.minimum(grad, 0), np.where(alpha >= C, np.maximum(grad, 0), grad))
    return DualSolution(alpha, max_epochs, float(np.max(np.abs(pg))), tol)


def _check_binary(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y have different numbers of rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("training data must be finite")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both classes must be present")
    return X, y


def train_linear_svm(X, y, C: float = 1.0, tol: float = DUAL_TOL, max_epochs: int = MAX_EPOCHS, seed: int = 0) -> LinearSVMModel:
    X, y = _check_binary(X, y)
    if C <= 0:
        raise ValueError("C must be positive")
    sol = solve_dual(X @ X.T, y, C, tol, max_epochs, seed)
    coef = sol.alpha * y
    return LinearSVMModel(X.T @ coef, float(coef.sum()), C)


def svm_score(model: LinearSVMModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.d:
        raise ValueError(f"input dim {x.shape[-1]} does not match model dim {model.d}")
    s = x @ model.w + model.b
    return float(s) if np.ndim(s) == 0 else s


def svm_primal_objective(model: LinearSVMModel, X, y) -> float:
    margins = np.asarray(y) * (np.asarray(X) @ model.w + model.b)
    return 0.5 * (model.w @ model.w + model.b**2) + model.C * float(np.maximum(0.0, 1.0 - margins).sum())


def binary_loss(m, s):
    """Decoding loss ``max(0, 1 - m s) / 2``."""
    return np.maximum(0.0, 1.0 - np.multiply(m, s)) / 2.0


@dataclass(frozen=True)
class CodingMatrix:
    M: np.ndarray  # (K, L) entries in {-1, 0, +1}

    def __post_init__(self) -> None:
        M = np.array(self.M, dtype=np.int8)
        K, L = M.shape
        if not np.all(np.isin(M, (-1, 0, 1))):
            raise ValueError("coding entries must be -1, 0 or +1")
        if np.any((M == 1).sum(axis=0) != 1) or np.any((M == -1).sum(axis=0) != 1):
            raise ValueError("each column needs exactly one +1 and one -1")
        pairs = {frozenset(np.flatnonzero(M[:, l])) for l in range(L)}
        if len(pairs) != L or L != K * (K - 1) // 2:
            raise ValueError("columns must cover every class pair exactly once")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def K(self) -> int:
        return self.M.shape[0]

    @property
    def L(self) -> int:
        return self.M.shape[1]

    def column_classes(self, l: int) -> tuple[int, int]:
        col = self.M[:, l]
        return int(np.flatnonzero(col == 1)[0]), int(np.flatnonzero(col == -1)[0])


def build_ovo_coding(K: int) -> CodingMatrix:
    if K < 2:
        raise ValueError("need at least 2 classes")
    pairs = list(itertools.combinations(range(K), 2))
    M = np.zeros((K, len(pairs)), dtype=np.int8)
    for col, (i, j) in enumerate(pairs):
        M[i, col] = 1
        M[j, col] = -1
    return CodingMatrix(M)


def ecoc_losses(M: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Per-class weighted mean binary loss for each row of ``scores`` (n, L) -> (n, K)."""
    M = np.asarray(M, dtype=np.float64)
    S = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    weight = np.abs(M)
    g = binary_loss(M[None, :, :], S[:, None, :])
    return (weight * g).sum(axis=2) / weight.sum(axis=1)


@dataclass(frozen=True)
class ECOCModel:
    coding: CodingMatrix
    learners: tuple[LinearSVMModel, ...]
    classes: tuple[str, ...]
    extractor: FittedExtractor | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "learners", tuple(self.learners))
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.learners) != self.coding.L:
            raise ValueError(f"{len(self.learners)} learners for {self.coding.L} coding columns")
        if len(self.classes) != self.coding.K:
            raise ValueError("class list does not match coding matrix")
        if len({m.d for m in self.learners}) > 1:
            raise ValueError("learners disagree on feature dimension")

    @property
    def d(self) -> int:
        return self.learners[0].d

    @property
    def weights(self) -> np.ndarray:
        return np.stack([m.w for m in self.learners])

    @property
    def biases(self) -> np.ndarray:
        return np.array([m.b for m in self.learners])

    def scores(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[1] != self.d:
            raise ValueError(f"feature dim {Z.shape[1]} does not match learners ({self.d})")
        return Z @ self.weights.T + self.biases

    def losses(self, Z) -> np.ndarray:
        return ecoc_losses(self.coding.M, self.scores(Z))

    def predict_index(self, Z) -> np.ndarray:
        # argmin returns the first minimum: ties go to the lowest class index
        return np.argmin(self.losses(Z), axis=1)

    def predict_signals(self, signals) -> np.ndarray:
        if self.extractor is None:
            raise ValueError("model has no feature extractor attached")
        return self.predict_index(self.extractor.transform(signals))


def ecoc_predict(model: ECOCModel, x) -> tuple[str, np.ndarray]:
    """Predicted class name and per-class loss vector for one feature vector."""
    losses = model.losses(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return model.classes[int(np.argmin(losses))], losses


def ecoc_train(Z, y, classes, C: float = 1.0, seed: int = 0, extractor: FittedExtractor | None = None,
               tol: float = DUAL_TOL, max_epochs: int = MAX_EPOCHS) -> ECOCModel:
    """Train one SVM per coding column on the rows of its two classes.

    ``y`` holds class indices into ``classes``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    y = np.asarray(y)
    K = len(classes)
    if not np.all(np.isfinite(Z)):
        raise ValueError("training features must be finite")
    for k in range(K):
        if not np.any(y == k):
            raise ValueError(f"class {classes[k]!r} has no training samples")
    coding = build_ovo_coding(K)
    gram = Z @ Z.T
    learners = []
    for l in range(coding.L):
        pos, neg = coding.column_classes(l)
        idx = np.flatnonzero((y == pos) | (y == neg))
        yl = np.where(y[idx] == pos, 1.0, -1.0)
        sol = solve_dual(gram[np.ix_(idx, idx)], yl, C, tol, max_epochs, seed + l)
        coef = sol.alpha * yl
        learners.append(LinearSVMModel(Z[idx].T @ coef, float(coef.sum()), C))
    return ECOCModel(coding, tuple(learners), tuple(classes), extractor)
