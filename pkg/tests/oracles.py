"""Independent reference implementations used only by the tests.

Each oracle is written the slow, obvious way and shares no code with the
package under test.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from functools import lru_cache

import numpy as np


def flood_fill_labels(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """8-connected components by breadth-first flood fill."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = set()
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
            comps.append(comp)
    return comps


def brute_otsu(hist) -> int:
    """Threshold t in 1..255 with the largest between-class variance, first maximizer wins."""
    hist = [float(v) for v in hist]
    best_t, best_v = 0, -1.0
    for t in range(1, len(hist)):
        w0 = sum(hist[:t])
        w1 = sum(hist[t:])
        if w0 == 0 or w1 == 0:
            continue
        mu0 = sum(i * hist[i] for i in range(t)) / w0
        mu1 = sum(i * hist[i] for i in range(t, len(hist))) / w1
        v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_t, best_v = t, v
    return best_t


def levenshtein_memo(a, b) -> int:
    """Top-down recursive edit distance."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def entropy_direct(counts) -> float:
    total = sum(counts)
    return -sum((c / total) * math.log2(c / total) for c in counts if c > 0)


def diag_gmm_loglik(x, weights, means, variances) -> float:
    """log sum_m w_m N(x; mu_m, diag var_m), straight from the density."""
    terms = []
    for w, mu, var in zip(weights, means, variances):
        ll = math.log(w)
        for xi, mi, vi in zip(x, mu, var):
            ll += -0.5 * math.log(2 * math.pi * vi) - (xi - mi) ** 2 / (2 * vi)
        terms.append(ll)
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def enumerate_chain(frames, char_models, penalty) -> float:
    """Best left-to-right path score by listing every state sequence.

    `char_models` is a list of dicts with keys weights/means/variances
    (per state) and p_self/p_next (probabilities).  A path starts in the
    first state, advances at most one state per frame, and must leave the
    last state at the end.  Entering each character costs `penalty`.
    """
    states = []
    for k, m in enumerate(char_models):
        for s in range(len(m["p_self"])):
            states.append((k, s))
    n = len(states)
    t_len = len(frames)
    emit = [[diag_gmm_loglik(frames[t], char_models[k]["weights"][s], char_models[k]["means"][s],
                             char_models[k]["variances"][s]) for (k, s) in states] for t in range(t_len)]
    best = -math.inf
    for steps in itertools.product((0, 1), repeat=t_len - 1):
        if sum(steps) != n - 1:
            continue
        idx = 0
        score = penalty + emit[0][0]
        for t, step in enumerate(steps, 1):
            k, s = states[idx]
            if step:
                score += math.log(char_models[k]["p_next"][s])
                idx += 1
                if states[idx][0] != k:
                    score += penalty
            else:
                score += math.log(char_models[k]["p_self"][s])
            score += emit[t][idx]
        k, s = states[-1]
        score += math.log(char_models[k]["p_next"][s])
        best = max(best, score)
    return best


def trapezoid_ap(relevance, n_relevant) -> float:
    """Area under the PR polyline through (0, 1) and every ranked prefix."""
    pts = [(0.0, 1.0)]
    tp = 0
    for k, rel in enumerate(relevance, 1):
        tp += rel
        pts.append((tp / n_relevant, tp / k))
    return sum((r1 - r0) * (p0 + p1) / 2 for (r0, p0), (r1, p1) in zip(pts, pts[1:]))


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        r = [0.0] * len(v)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for k in range(i, j + 1):
                r[order[k]] = (i + j) / 2 + 1
            i = j + 1
        return r

    rx, ry = ranks(x), ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    sy = math.sqrt(sum((b - my) ** 2 for b in ry))
    return cov / (sx * sy)
