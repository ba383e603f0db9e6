"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same semantics; the package
imports the compiled one when it is available.
"""
import heapq

import numpy as np

__all__ = ["bl_chain_value", "circular_counts"]


def bl_chain_value(x, c):
    """Optimal value of ``max sum_j c_j f_j`` over ``|f_j| <= 1``,
    ``|f_{j+1} - f_j| <= x_{j+1} - x_j``.

    Solved through the dual chain problem

        min_e  sum_j |c_j + e_j - e_{j-1}| + sum_j d_j |e_j|,   e_0 = e_J = 0,

    by dynamic programming over convex piecewise-linear value functions
    ``W(e) = A + s0*e + sum_k w_k * max(0, e - p_k)``.  The infimal
    convolution with ``|.|`` clips the slopes to ``[-1, 1]``, which only ever
    removes breakpoints from the two ends, so a double-ended priority queue
    gives ``O(J log J)`` overall.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    J = x.shape[0]
    if J == 0:
        return 0.0
    if J == 1:
        return abs(float(c[0]))

    # breakpoints live in stored coordinates; true position = stored + shift
    lo_heap = []  # (pos, id)
    hi_heap = []  # (-pos, id)
    weight = {}
    next_id = 0
    shift = 0.0

    def push(pos, w):
        nonlocal next_id
        weight[next_id] = w
        heapq.heappush(lo_heap, (pos, next_id))
        heapq.heappush(hi_heap, (-pos, next_id))
        next_id += 1

    # W_1(e) = |c_1 + e|
    c1 = float(c[0])
    A = -c1
    s0 = -1.0
    total = 2.0
    push(-c1, 2.0)

    for j in range(1, J):
        d = float(x[j] - x[j - 1])
        # U = W + d|e|
        s0 -= d
        push(-shift, 2.0 * d)
        total += 2.0 * d
        # clip left: raise s0 to -1
        while s0 < -1.0:
            while lo_heap[0][1] not in weight:
                heapq.heappop(lo_heap)
            pos, k = lo_heap[0]
            w = weight[k]
            p = pos + shift
            if s0 + w <= -1.0:
                heapq.heappop(lo_heap)
                del weight[k]
                A -= w * p
                s0 += w
                total -= w
            else:
                A += (s0 + 1.0) * p
                weight[k] = w - (-1.0 - s0)
                total -= -1.0 - s0
                s0 = -1.0
        # clip right: lower the final slope to 1
        while s0 + total > 1.0:
            while hi_heap[0][1] not in weight:
                heapq.heappop(hi_heap)
            _, k = hi_heap[0]
            w = weight[k]
            excess = s0 + total - 1.0
            if w <= excess:
                heapq.heappop(hi_heap)
                del weight[k]
                total -= w
            else:
                weight[k] = w - excess
                total -= excess
        # W_{j+1}(e) = T(e + c_{j+1})
        cj = float(c[j])
        A += s0 * cj
        shift -= cj

    # answer = W_J(0)
    val = A
    for pos, k in lo_heap:
        w = weight.get(k)
        if w is None:
            continue
        p = pos + shift
        if p < 0.0:
            val += w * (0.0 - p)
    return float(val)


def circular_counts(starts, n, ell):
    """Block-membership counts for circular blocks.

    ``starts`` holds 1-based start indices, shape ``(k,)`` or ``(B, k)``.
    Returns int64 counts of shape ``(n,)`` or ``(B, n)``.
    """
    starts = np.asarray(starts, dtype=np.int64)
    squeeze = starts.ndim == 1
    s = np.atleast_2d(starts) - 1
    B = s.shape[0]
    diff = np.zeros((B, n + 1), dtype=np.int64)
    rows = np.repeat(np.arange(B), s.shape[1])
    flat = s.reshape(-1)
    end = flat + ell  # exclusive, may exceed n
    np.add.at(diff, (rows, flat), 1)
    np.add.at(diff, (rows, np.minimum(end, n)), -1)
    wrap = end > n
    np.add.at(diff, (rows[wrap], np.zeros(wrap.sum(), dtype=np.int64)), 1)
    np.add.at(diff, (rows[wrap], end[wrap] - n), -1)
    out = np.cumsum(diff[:, :n], axis=1)
    return out[0] if squeeze else out
