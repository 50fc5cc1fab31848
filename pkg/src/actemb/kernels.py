"""Hot numeric kernels with a numba-JIT path and a pure-numpy fallback.

The active backend is chosen once at import from the ``A2V_BACKEND`` env var
("numba" or "numpy"; default numba when importable). Both paths implement the
same math; the LSTM kernels share one source body (interpreted vs JIT-ed),
the split-scan and pairwise-distance kernels have a vectorized numpy twin
written to round identically. ``benchmarks/compare_backends.py`` times and
cross-checks the two paths.

LSTM gate layout: the fused weight matrices w_x (D, 4H), w_h (H, 4H) and bias
b (4H,) hold the four gates in column blocks [input | forget | output |
candidate]; input/forget/output are sigmoid gates, candidate is tanh.
"""

from __future__ import annotations

import os
import warnings

import numpy as np


# ---------------------------------------------------------------------------
# LSTM sequence kernels (single source body, JIT-ed on the numba path)


def _lstm_forward_body(X, w_x, w_h, b, h0, c0):
    # X (T, D); D == 0 means no input term (decoder in input-less mode).
    # Returns hidden states Hs (T, H), cell states C (T, H) and the
    # post-activation gates G (T, 4H) needed for the backward pass.
    T = X.shape[0]
    H = h0.shape[0]
    Hs = np.empty((T, H))
    C = np.empty((T, H))
    G = np.empty((T, 4 * H))
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        pre = np.dot(h, w_h) + b
        if X.shape[1] > 0:
            pre = pre + np.dot(X[t], w_x)
        gate_pre = pre[: 3 * H]
        e = np.exp(-np.abs(gate_pre))  # stable sigmoid, no overflow
        sig = np.where(gate_pre >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        i = sig[:H]
        f = sig[H : 2 * H]
        o = sig[2 * H : 3 * H]
        g = np.tanh(pre[3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        G[t, : 3 * H] = sig
        G[t, 3 * H :] = g
        C[t] = c
        Hs[t] = h
    return Hs, C, G


def _lstm_backward_body(X, w_x, w_h, G, C, Hs, h0, c0, d_h_seq, d_c_last):
    # Exact BPTT for the forward pass above. d_h_seq (T, H) carries the
    # upstream gradient arriving at each hidden state from outside the
    # recurrence; d_c_last the one arriving at the final cell state.
    T = X.shape[0]
    D = X.shape[1]
    H = h0.shape[0]
    d_pre = np.empty((T, 4 * H))
    dh_carry = np.zeros(H)
    dc_carry = d_c_last.copy()
    for t in range(T - 1, -1, -1):
        dh = d_h_seq[t] + dh_carry
        i = G[t, :H]
        f = G[t, H : 2 * H]
        o = G[t, 2 * H : 3 * H]
        g = G[t, 3 * H :]
        if t > 0:
            c_prev = C[t - 1]
        else:
            c_prev = c0
        tc = np.tanh(C[t])
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        d_pre[t, :H] = (dc * g) * i * (1.0 - i)
        d_pre[t, H : 2 * H] = (dc * c_prev) * f * (1.0 - f)
        d_pre[t, 2 * H : 3 * H] = (dh * tc) * o * (1.0 - o)
        d_pre[t, 3 * H :] = (dc * i) * (1.0 - g * g)
        dc_carry = dc * f
        dh_carry = np.dot(w_h, d_pre[t])
    h_prev = np.empty((T, H))
    h_prev[0] = h0
    h_prev[1:] = Hs[: T - 1]
    d_w_h = np.dot(h_prev.T, d_pre)
    d_b = d_pre.sum(axis=0)
    if D > 0:
        d_w_x = np.dot(X.T, d_pre)
        d_x = np.dot(d_pre, w_x.T)
    else:
        d_w_x = np.zeros((0, 4 * H))
        d_x = np.zeros((T, 0))
    return d_w_x, d_w_h, d_b, d_x, dh_carry, dc_carry


# ---------------------------------------------------------------------------
# CART split scan: weighted-Gini minimizer over candidate columns.
# Both variants keep identical float op order so they choose identical splits.


def _best_split_loop(X, y, feat_idx, n_classes):
    n = X.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_score = np.inf
    if n < 2:
        return best_feat, best_thr, best_score
    total = np.zeros(n_classes)
    for r in range(n):
        total[y[r]] += 1.0
    for k in range(feat_idx.shape[0]):
        fcol = feat_idx[k]
        col = np.ascontiguousarray(X[:, fcol])
        order = np.argsort(col, kind="mergesort")
        left = np.zeros(n_classes)
        for ii in range(n - 1):
            left[y[order[ii]]] += 1.0
            lo = col[order[ii]]
            hi = col[order[ii + 1]]
            if hi == lo:
                continue
            nl = float(ii + 1)
            nr = float(n - ii - 1)
            ssl = 0.0
            ssr = 0.0
            for c in range(n_classes):
                pl = left[c] / nl
                pr = (total[c] - left[c]) / nr
                ssl += pl * pl
                ssr += pr * pr
            score = (nl * (1.0 - ssl) + nr * (1.0 - ssr)) / n
            if score < best_score:
                best_score = score
                best_feat = fcol
                best_thr = 0.5 * (lo + hi)
    return best_feat, best_thr, best_score


def _best_split_vec(X, y, feat_idx, n_classes):
    n = X.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_score = np.inf
    if n < 2:
        return best_feat, best_thr, best_score
    onehot = (y[:, None] == np.arange(n_classes)[None, :]).astype(np.float64)
    total = onehot.sum(axis=0)
    nl = np.arange(1, n, dtype=np.float64)
    nr = float(n) - nl
    for fcol in feat_idx:
        col = X[:, fcol]
        order = np.argsort(col, kind="mergesort")
        cs = col[order]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        pl = left / nl[:, None]
        pr = (total[None, :] - left) / nr[:, None]
        ssl = (pl * pl).sum(axis=1)
        ssr = (pr * pr).sum(axis=1)
        score = (nl * (1.0 - ssl) + nr * (1.0 - ssr)) / n
        score[cs[1:] == cs[:-1]] = np.inf
        j = int(np.argmin(score))
        if score[j] < best_score:
            best_score = float(score[j])
            best_feat = int(fcol)
            best_thr = 0.5 * (cs[j] + cs[j + 1])
    return best_feat, best_thr, best_score


# ---------------------------------------------------------------------------
# Mean pairwise Euclidean distance over all unordered row pairs.


def _mean_pairwise_loop(X):
    n = X.shape[0]
    d = X.shape[1]
    total = 0.0
    for a in range(n - 1):
        for bb in range(a + 1, n):
            acc = 0.0
            for k in range(d):
                diff = X[a, k] - X[bb, k]
                acc += diff * diff
            total += np.sqrt(acc)
    return total / (n * (n - 1) / 2.0)


def _mean_pairwise_vec(X):
    n = X.shape[0]
    total = 0.0
    for a in range(n - 1):
        diff = X[a + 1 :] - X[a]
        total += float(np.sqrt((diff * diff).sum(axis=1)).sum())
    return total / (n * (n - 1) / 2.0)


# ---------------------------------------------------------------------------
# Backend selection

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - sandbox always ships numba
    HAS_NUMBA = False

if HAS_NUMBA:
    _lstm_forward_nb = numba.njit(cache=True)(_lstm_forward_body)
    _lstm_backward_nb = numba.njit(cache=True)(_lstm_backward_body)
    _best_split_nb = numba.njit(cache=True)(_best_split_loop)
    _mean_pairwise_nb = numba.njit(cache=True)(_mean_pairwise_loop)

_IMPLS = {
    "numpy": {
        "lstm_forward": _lstm_forward_body,
        "lstm_backward": _lstm_backward_body,
        "best_split": _best_split_vec,
        "mean_pairwise": _mean_pairwise_vec,
    }
}
if HAS_NUMBA:
    _IMPLS["numba"] = {
        "lstm_forward": _lstm_forward_nb,
        "lstm_backward": _lstm_backward_nb,
        "best_split": _best_split_nb,
        "mean_pairwise": _mean_pairwise_nb,
    }


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def get_backend(name: str) -> dict:
    """Kernel table for an explicit backend (used by the benchmark/tests)."""
    return _IMPLS[name]


def _select_backend() -> str:
    want = os.environ.get("A2V_BACKEND", "").strip().lower()
    if want == "":
        return "numba" if HAS_NUMBA else "numpy"
    if want == "numba" and not HAS_NUMBA:
        warnings.warn("A2V_BACKEND=numba but numba is not importable; using numpy")
        return "numpy"
    if want not in ("numba", "numpy"):
        raise ValueError(f"A2V_BACKEND must be 'numba' or 'numpy', got {want!r}")
    return want


BACKEND = _select_backend()

lstm_forward = _IMPLS[BACKEND]["lstm_forward"]
lstm_backward = _IMPLS[BACKEND]["lstm_backward"]
best_split = _IMPLS[BACKEND]["best_split"]
mean_pairwise = _IMPLS[BACKEND]["mean_pairwise"]
