"""Numba kernels for CBOW training with negative sampling.

The serial kernel is bit-reproducible for a given seed: it owns a single
inline xorshift64* stream and touches vectors in corpus order. The parallel
kernel trades that for speed: documents race on shared weight rows
(hogwild-style) and the learning rate decays per epoch instead of per
center word.

Both kernels fill ``losses``/``centers`` with the summed negative-sampling
loss and the number of center words per epoch.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_MULT = np.uint64(0x2545F4914F6CDD1D)
_CLAMP = 6.0


@njit(cache=True, inline="always")
def _next_state(state):
    x = state
    x ^= (x >> np.uint64(12)) & _MASK64
    x ^= (x << np.uint64(25)) & _MASK64
    x ^= (x >> np.uint64(27)) & _MASK64
    return x & _MASK64


@njit(cache=True, inline="always")
def _unit_float(state):
    # top 53 bits of state * multiplier, mapped to [0, 1)
    return float((state * _MULT) >> np.uint64(11)) / 9007199254740992.0


@njit(cache=True, inline="always")
def _subsample_doc(tokens, start, end, keep_prob, kept, state, use_subsample):
    n = 0
    if use_subsample:
        for pos in range(start, end):
            state = _next_state(state)
            if _unit_float(state) < keep_prob[tokens[pos]]:
                kept[n] = pos
                n += 1
    else:
        for pos in range(start, end):
            kept[n] = pos
            n += 1
    return n, state


@njit(cache=True, inline="always")
def _train_center(tokens, kept, n_kept, i, vec_in, vec_out, neg_cdf,
                  window, negatives, lr, state, h, e):
    dim = vec_in.shape[1]
    c_lo = i - window
    if c_lo < 0:
        c_lo = 0
    c_hi = i + window
    if c_hi > n_kept - 1:
        c_hi = n_kept - 1
    n_ctx = c_hi - c_lo
    if n_ctx <= 0:
        return state, 0.0
    center = tokens[kept[i]]

    inv = 1.0 / n_ctx
    for c in range(dim):
        h[c] = 0.0
        e[c] = 0.0
    for j in range(c_lo, c_hi + 1):
        if j == i:
            continue
        row = tokens[kept[j]]
        for c in range(dim):
            h[c] += vec_in[row, c]
    for c in range(dim):
        h[c] *= inv

    loss = 0.0
    for t in range(negatives + 1):
        if t == 0:
            target = center
            label = 1.0
        else:
            state = _next_state(state)
            r = _unit_float(state)
            target = np.searchsorted(neg_cdf, r, side="right")
            if target >= neg_cdf.shape[0]:
                target = neg_cdf.shape[0] - 1
            if target == center:
                continue
            label = 0.0
        f = 0.0
        for c in range(dim):
            f += h[c] * vec_out[target, c]
        if f > _CLAMP:
            f = _CLAMP
        elif f < -_CLAMP:
            f = -_CLAMP
        sig = 1.0 / (1.0 + np.exp(-f))
        if label > 0.5:
            loss -= np.log(sig)
        else:
            loss -= np.log(1.0 - sig)
        g = (label - sig) * lr
        for c in range(dim):
            e[c] += g * vec_out[target, c]
        for c in range(dim):
            vec_out[target, c] += g * h[c]

    # the full accumulated error moves every context vector
    for j in range(c_lo, c_hi + 1):
        if j == i:
            continue
        row = tokens[kept[j]]
        for c in range(dim):
            vec_in[row, c] += e[c]
    return state, loss


@njit(cache=True)
def train_serial(tokens, offsets, vec_in, vec_out, neg_cdf, keep_prob,
                 window, negatives, epochs, lr0, lr_min, seed, use_subsample,
                 losses, centers):
    dim = vec_in.shape[1]
    h = np.empty(dim, dtype=np.float32)
    e = np.empty(dim, dtype=np.float32)
    kept = np.empty(tokens.shape[0], dtype=np.int64)
    state = np.uint64(seed) | np.uint64(1)
    total = float(epochs) * float(tokens.shape[0]) + 1.0
    processed = 0.0
    for epoch in range(epochs):
        epoch_loss = 0.0
        epoch_centers = 0
        for d in range(offsets.shape[0] - 1):
            n_kept, state = _subsample_doc(
                tokens, offsets[d], offsets[d + 1], keep_prob, kept, state,
                use_subsample,
            )
            for i in range(n_kept):
                lr = lr0 * (1.0 - processed / total)
                if lr < lr_min:
                    lr = lr_min
                state, loss = _train_center(
                    tokens, kept, n_kept, i, vec_in, vec_out, neg_cdf,
                    window, negatives, lr, state, h, e,
                )
                processed += 1.0
                epoch_loss += loss
                epoch_centers += 1
        losses[epoch] = epoch_loss
        centers[epoch] = epoch_centers


@njit(cache=True, parallel=True)
def train_parallel(tokens, offsets, vec_in, vec_out, neg_cdf, keep_prob,
                   window, negatives, epochs, lr0, lr_min, seed, use_subsample,
                   losses, centers):
    dim = vec_in.shape[1]
    n_docs = offsets.shape[0] - 1
    for epoch in range(epochs):
        lr = lr0 * (1.0 - epoch / float(epochs))
        if lr < lr_min:
            lr = lr_min
        doc_loss = np.zeros(n_docs, dtype=np.float64)
        doc_centers = np.zeros(n_docs, dtype=np.int64)
        for d in prange(n_docs):
            h = np.empty(dim, dtype=np.float32)
            e = np.empty(dim, dtype=np.float32)
            start = offsets[d]
            end = offsets[d + 1]
            kept = np.empty(end - start, dtype=np.int64)
            state = (np.uint64(seed) ^ (np.uint64(d + 1) * _MULT)
                     ^ (np.uint64(epoch + 1) << np.uint64(32))) | np.uint64(1)
            n_kept, state = _subsample_doc(
                tokens, start, end, keep_prob, kept, state, use_subsample
            )
            for i in range(n_kept):
                state, loss = _train_center(
                    tokens, kept, n_kept, i, vec_in, vec_out, neg_cdf,
                    window, negatives, lr, state, h, e,
                )
                doc_loss[d] += loss
                doc_centers[d] += 1
        losses[epoch] = doc_loss.sum()
        centers[epoch] = doc_centers.sum()
