"""One-vs-one RBF-kernel SVM trained by sequential minimal optimization.

The binary solver works on the dual

    min 1/2 a'Qa - e'a,   0 <= a_i <= C,   y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)

and at each step updates the maximal violating pair (first-order working set
selection), stopping once the KKT gap falls below `tol`.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .phog import modifier_features

log = logging.getLogger(__name__)

DEFAULT_C = 1.0
DEFAULT_GAMMA = 10.0     # PHOG levels are L1-normalized, so squared distances are small
KKT_TOL = 1e-3
MAX_PASSES = 200


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a2 = (a * a).sum(axis=1)[:, None]
    b2 = (b * b).sum(axis=1)[None, :]
    d2 = np.maximum(a2 + b2 - 2.0 * a @ b.T, 0.0)
    return np.exp(-gamma * d2)


@dataclass
class BinaryMachine:
    positive: str
    negative: str
    support: np.ndarray     # (n_sv, D)
    coef: np.ndarray        # alpha_i * y_i
    alpha: np.ndarray
    bias: float
    gap: float              # KKT gap at exit

    def decision(self, x: np.ndarray, gamma: float) -> np.ndarray:
        x = np.atleast_2d(x)
        return rbf_kernel(x, self.support, gamma) @ self.coef + self.bias


def smo(k: np.ndarray, y: np.ndarray, c: float, tol: float = KKT_TOL,
        max_iter: int | None = None) -> tuple[np.ndarray, float, float]:
    """Solve one binary dual; returns (alpha, bias, final KKT gap)."""
    n = len(y)
    y = y.astype(np.float64)
    q = (y[:, None] * y[None, :]) * k
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = max_iter or max(10_000, MAX_PASSES * n)
    gap = np.inf
    for _ in range(max_iter):
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        score = -y * grad
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap < tol:
            break
        # analytic two-variable step along the feasible direction
        quad = max(q[i, i] + q[j, j] - 2.0 * y[i] * y[j] * q[i, j], 1e-12)
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += q[:, i] * (ai - old_i) + q[:, j] * (aj - old_j)
    else:
        log.warning("SMO stopped at the iteration cap with KKT gap %.3g", gap)
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        hi = np.min(yg[up]) if up.any() else 0.0
        lo = np.max(yg[low]) if low.any() else 0.0
        rho = float((hi + lo) / 2.0)
    return alpha, -rho, float(gap)


@dataclass
class SvmModel:
    labels: list[str]
    machines: list[BinaryMachine]
    gamma: float
    c: float

    @property
    def dim(self) -> int:
        return self.machines[0].support.shape[1]


def scale_gamma(x: np.ndarray) -> float:
    """1 / (dim * feature variance); falls back to 1/dim for constant data."""
    var = float(x.var())
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0 / x.shape[1]


def train_svm(data, c: float = DEFAULT_C, gamma: float | str = DEFAULT_GAMMA, tol: float = KKT_TOL) -> SvmModel:
    """`data` is a sequence of (feature vector, label) pairs.

    `gamma` is the RBF width, or "scale" for 1 / (dim * var(X)), or "dim"
    for 1 / dim.
    """
    data = list(data)
    if not data:
        raise ValueError("no training data")
    x = np.asarray([np.asarray(v, dtype=np.float64) for v, _ in data])
    if gamma == "scale":
        gamma = scale_gamma(x)
    elif gamma == "dim":
        gamma = 1.0 / x.shape[1]
    gamma = float(gamma)
    labels_all = [lab for _, lab in data]
    labels = sorted(set(labels_all))
    if len(labels) < 2:
        raise ValueError(f"need at least two classes, got {labels}")
    lab_arr = np.array(labels_all, dtype=object)
    gram = rbf_kernel(x, x, gamma)
    machines = []
    for a, b in itertools.combinations(labels, 2):
        idx = np.flatnonzero((lab_arr == a) | (lab_arr == b))
        y = np.where(lab_arr[idx] == a, 1.0, -1.0)
        alpha, bias, gap = smo(gram[np.ix_(idx, idx)], y, c, tol)
        sv = alpha > 0
        if not sv.any():
            sv[:] = True
        machines.append(BinaryMachine(a, b, x[idx][sv], (alpha * y)[sv], alpha[sv], bias, gap))
        log.debug("machine %s/%s: %d SVs, KKT gap %.2e", a, b, int(sv.sum()), gap)
    return SvmModel(labels, machines, gamma, c)


def _tally(model: SvmModel, x) -> tuple[dict[str, int], dict[str, float]]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"expected a {model.dim}-vector, got shape {x.shape}")
    votes = dict.fromkeys(model.labels, 0)
    margin = dict.fromkeys(model.labels, 0.0)
    for m in model.machines:
        f = float(m.decision(x, model.gamma)[0])
        winner = m.positive if f > 0 else m.negative
        votes[winner] += 1
        margin[winner] += abs(f)
    return votes, margin


def rank(model: SvmModel, x) -> list[str]:
    """Labels by votes, then summed decision magnitude, then label order."""
    votes, margin = _tally(model, x)
    return sorted(model.labels, key=lambda lab: (-votes[lab], -margin[lab], model.labels.index(lab)))


def classify(model: SvmModel, x) -> tuple[str, dict[str, int]]:
    votes, _ = _tally(model, x)
    return rank(model, x)[0], votes


def classify_scored(model: SvmModel, x) -> tuple[str, float]:
    votes, margin = _tally(model, x)
    best = sorted(model.labels, key=lambda lab: (-votes[lab], -margin[lab], model.labels.index(lab)))[0]
    return best, margin[best]


def classify_component(model: SvmModel, comp) -> str:
    return classify(model, modifier_features(comp))[0]


def classify_component_scored(model: SvmModel, comp) -> tuple[str, float]:
    return classify_scored(model, modifier_features(comp))


def kkt_violation(machine: BinaryMachine, x: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                  c: float, gamma: float) -> float:
    """Largest KKT violation of a trained machine over its training set."""
    f = machine.decision(x, gamma)
    yf = y * f
    worst = 0.0
    at_zero = alpha <= 0
    at_c = alpha >= c
    free = ~at_zero & ~at_c
    if at_zero.any():
        worst = max(worst, float(np.max(1.0 - yf[at_zero])))
    if at_c.any():
        worst = max(worst, float(np.max(yf[at_c] - 1.0)))
    if free.any():
        worst = max(worst, float(np.max(np.abs(yf[free] - 1.0))))
    return worst
