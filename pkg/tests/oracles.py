"""Independent reference computations used only by the tests."""

import itertools
import math

import numpy as np


def direct_dft(x):
    """O(N^2) summation of X_k = sum_n x_n exp(-2 pi i k n / N)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    out = np.empty(n, dtype=np.complex128)
    idx = np.arange(n)
    for k in range(n):
        out[k] = np.sum(x * np.exp(-2j * np.pi * ((k * idx) % n) / n))
    return out


def butterworth_highpass_magnitude(f_hz, order, cutoff_hz, fs):
    """|H| of the bilinear-mapped Butterworth high-pass, closed form."""
    w = np.tan(np.pi * np.asarray(f_hz, dtype=float) / fs)
    wc = math.tan(math.pi * cutoff_hz / fs)
    with np.errstate(divide="ignore"):
        ratio = np.where(w > 0, wc / np.where(w > 0, w, 1.0), np.inf)
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * order))


def box_qp_dual_oracle(X, y, C):
    """High-precision solve of the bias-augmented SVM dual, independent of the package solver.

    minimize 1/2 a'Qa - sum(a)  s.t. 0 <= a <= C,  Q = yy' (XX' + 1)

    Quasi-Newton with bounds (scipy L-BFGS-B) identifies the active set; the
    free coordinates are then solved exactly from Q_FF a_F = 1 - Q_FB a_B,
    repeating until the KKT conditions hold.
    Returns (alpha, dual objective, primal objective).
    """
    from scipy.optimize import minimize

    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n = len(y)
    Q = np.outer(y, y) * (X @ X.T + 1.0)

    def dual(v):
        return v.sum() - 0.5 * v @ Q @ v

    def kkt_violation(v):
        g = Q @ v - 1.0  # gradient of the minimized objective
        viol = np.where(v <= 0.0, np.maximum(-g, 0.0), np.where(v >= C, np.maximum(g, 0.0), np.abs(g)))
        return viol.max()

    # L-BFGS-B can stop on its relative-reduction test well short of the optimum,
    # so restart it from its own answer, polishing the free set each round, until KKT holds
    a = np.zeros(n)
    tol = 1e-9 * C
    for _ in range(200):
        res = minimize(lambda v: (0.5 * v @ Q @ v - v.sum(), Q @ v - 1.0), a, jac=True,
                       method="L-BFGS-B", bounds=[(0.0, C)] * n,
                       options={"maxiter": 100_000, "ftol": 0.0, "gtol": 1e-14, "maxcor": 50})
        a = np.clip(res.x, 0.0, C)
        free = (a > tol) & (a < C - tol)
        bound = np.where(a >= C - tol, C, 0.0)
        if free.any():
            cand = bound.copy()
            rhs = 1.0 - Q[np.ix_(free, ~free)] @ bound[~free]
            sol, *_ = np.linalg.lstsq(Q[np.ix_(free, free)], rhs, rcond=None)
            cand[free] = sol
            if np.all(cand >= -1e-12) and np.all(cand <= C + 1e-12) and dual(cand) >= dual(a) - 1e-15:
                a = np.clip(cand, 0.0, C)
        if kkt_violation(a) <= 1e-10:
            break
    coef = a * y
    w = X.T @ coef
    b = coef.sum()
    primal = 0.5 * (w @ w + b * b) + C * np.maximum(0, 1 - y * (X @ w + b)).sum()
    return a, dual(a), primal


def brute_force_ecoc(M, s):
    """argmin_k of the |m|-weighted mean binary loss, explicit loops, lowest index on ties."""
    K, L = len(M), len(M[0])
    best, best_loss = None, None
    losses = []
    for k in range(K):
        num = 0.0
        den = 0.0
        for l in range(L):
            m = M[k][l]
            num += abs(m) * max(0.0, 1.0 - m * s[l]) / 2.0
            den += abs(m)
        loss = num / den
        losses.append(loss)
        if best_loss is None or loss < best_loss:
            best, best_loss = k, loss
    return best, losses


def u_by_pair_counting(a, b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def mann_whitney_exact_bruteforce(a, b):
    """Two-sided exact p by relabelling the pooled values (no ranks used)."""
    pooled = list(a) + list(b)
    na = len(a)
    u_obs = u_by_pair_counting(a, b)
    us = []
    for chosen in itertools.combinations(range(len(pooled)), na):
        rest = [pooled[i] for i in range(len(pooled)) if i not in chosen]
        us.append(u_by_pair_counting([pooled[i] for i in chosen], rest))
    us = np.array(us)
    lower = np.mean(us <= u_obs + 1e-9)
    upper = np.mean(us >= u_obs - 1e-9)
    return u_obs, min(1.0, 2 * min(lower, upper))


def naive_histogram(x, n_bins, lo, hi):
    w = (hi - lo) / n_bins
    counts = [0] * n_bins
    for v in x:
        if v < lo:
            counts[0] += 1
            continue
        if v >= hi:
            counts[-1] += 1
            continue
        for k in range(n_bins):
            if lo + k * w <= v < lo + (k + 1) * w:
                counts[k] += 1
                break
        else:  # rounding at an upper edge
            counts[-1] += 1
    return np.array(counts) / len(x)


def naive_confusion(pred, truth, K):
    out = [[0.0] * K for _ in range(K)]
    for i in range(K):
        rows = [p for p, t in zip(pred, truth) if t == i]
        for j in range(K):
            out[i][j] = rows.count(j) / len(rows) if rows else 0.0
    return np.array(out)


def central_difference_gradient(f, W, h=1e-5):
    g = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp = W.copy()
        Wm = W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        g[idx] = (f(Wp) - f(Wm)) / (2 * h)
    return g


def nearest_centroid_accuracy(X_train, y_train, X_test, y_test):
    classes = np.unique(y_train)
    cents = np.stack([X_train[y_train == c].mean(axis=0) for c in classes])
    d = ((X_test[:, None, :] - cents[None]) ** 2).sum(axis=2)
    return float(np.mean(classes[np.argmin(d, axis=1)] == y_test))


def mann_whitney_exact_pairs(a, b):
    """Same definition as the brute-force version, vectorized over relabellings.

    U(A) = sum over i in A, j not in A of [x_i > x_j] + [x_i == x_j] / 2.
    """
    pooled = np.concatenate([np.asarray(a, float), np.asarray(b, float)])
    n, na = pooled.size, len(a)
    G = (pooled[:, None] > pooled[None, :]) + 0.5 * (pooled[:, None] == pooled[None, :])
    np.fill_diagonal(G, 0.0)
    combos = np.array(list(itertools.combinations(range(n), na)))
    S = np.zeros((len(combos), n))
    S[np.arange(len(combos))[:, None], combos] = 1.0
    us = S @ G.sum(axis=1) - np.einsum("mi,ij,mj->m", S, G, S)
    u_obs = us[0]  # the first combination is the observed labelling
    lower = np.mean(us <= u_obs + 1e-9)
    upper = np.mean(us >= u_obs - 1e-9)
    return float(u_obs), min(1.0, 2 * min(lower, upper))
