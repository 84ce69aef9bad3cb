"""Continuous-density GMM-HMMs for middle-zone character sequences.

Each character is a left-to-right chain of emitting states with a self-loop
and a forward transition; the forward transition out of the last state is the
exit.  Emissions are mixtures of diagonal Gaussians.

Words are chains of character models.  Every character entry (the first
character of a word included) costs ``log(1/|set|)``, the same price the
filler loop pays to enter any character, so a keyword path is always one of
the filler's paths and scores never exceed the filler's.

All arithmetic is in the log domain.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .phog import PHOG_DIM, WINDOW_SHIFT, WINDOW_WIDTH, FeatureSequence

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-4
WEIGHT_FLOOR = 1e-8
DEFAULT_STATES = 8
DEFAULT_MIXTURES = 32
KMEANS_ITERS = 20
LOG_2PI = math.log(2.0 * math.pi)


class InsufficientFramesError(ValueError):
    pass


class NoDataError(ValueError):
    pass


@dataclass(eq=False)
class CharHmm:
    char_id: str
    weights: np.ndarray     # (S, M)
    means: np.ndarray       # (S, M, D)
    variances: np.ndarray   # (S, M, D)
    log_self: np.ndarray    # (S,)
    log_next: np.ndarray    # (S,); last entry is the exit transition

    @property
    def nstates(self) -> int:
        return self.weights.shape[0]

    @property
    def nmix(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[2]

    def check(self) -> None:
        if not np.allclose(self.weights.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError(f"{self.char_id}: mixture weights do not sum to 1")
        if (self.variances < VAR_FLOOR * (1 - 1e-12)).any():
            raise ValueError(f"{self.char_id}: variance below floor")
        out = np.exp(self.log_self) + np.exp(self.log_next)
        if not np.allclose(out, 1.0, atol=1e-9, rtol=0):
            raise ValueError(f"{self.char_id}: transition rows do not sum to 1")

    def transition_matrix(self) -> np.ndarray:
        """Log transitions with virtual entry (row 0) and exit (last column)."""
        s = self.nstates
        a = np.full((s + 2, s + 2), -np.inf)
        a[0, 1] = 0.0
        for i in range(s):
            a[i + 1, i + 1] = self.log_self[i]
            a[i + 1, i + 2] = self.log_next[i]
        return a

    @cached_property
    def _gauss(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s, m, d = self.means.shape
        iv = 1.0 / self.variances.reshape(s * m, d)
        mu = self.means.reshape(s * m, d)
        const = (np.log(self.weights.reshape(-1))
                 - 0.5 * (d * LOG_2PI + np.log(self.variances.reshape(s * m, d)).sum(axis=1)
                          + (mu * mu * iv).sum(axis=1)))
        return const, iv, mu * iv

    def component_loglik(self, x: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
        """log(w_m N(x_t; mu_sm, var_sm)) as a (T, S, M) array."""
        const, iv, mu_iv = self._gauss
        if x2 is None:
            x2 = x * x
        ll = const[None, :] - 0.5 * (x2 @ iv.T) + x @ mu_iv.T
        return ll.reshape(len(x), self.nstates, self.nmix)

    def state_loglik(self, x: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
        return _logsumexp(self.component_loglik(x, x2), axis=2)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


@dataclass
class HmmSet:
    script_id: str
    models: dict[str, CharHmm]
    width: int = WINDOW_WIDTH
    shift: int = WINDOW_SHIFT

    def __post_init__(self):
        dims = {m.dim for m in self.models.values()}
        if len(dims) > 1:
            raise ValueError(f"models disagree on feature dimension: {sorted(dims)}")

    @property
    def log_penalty(self) -> float:
        return -math.log(len(self.models))

    @property
    def chars(self) -> list[str]:
        return list(self.models)

    def word_model(self, chars: Sequence[str]) -> "WordModel":
        missing = [c for c in chars if c not in self.models]
        if missing:
            raise KeyError(f"no model for characters {missing}")
        return WordModel(tuple(chars), [self.models[c] for c in chars], self.log_penalty)

    def emissions(self, seq: FeatureSequence | np.ndarray, chars=None) -> dict[str, np.ndarray]:
        """Per-character (T, S) state log-likelihood tables for one sequence."""
        x = _frames(seq)
        x2 = x * x
        chars = self.models if chars is None else dict.fromkeys(chars)
        return {c: self.models[c].state_loglik(x, x2) for c in chars}


def _frames(seq) -> np.ndarray:
    return seq.frames if isinstance(seq, FeatureSequence) else np.asarray(seq, dtype=np.float64)


@dataclass
class WordModel:
    chars: tuple[str, ...]
    models: list[CharHmm]
    log_penalty: float

    log_self: np.ndarray = field(init=False, repr=False)
    log_next: np.ndarray = field(init=False, repr=False)
    move_bonus: np.ndarray = field(init=False, repr=False)
    state_char: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.chars:
            raise ValueError("a word model needs at least one character")
        self.log_self = np.concatenate([m.log_self for m in self.models])
        self.log_next = np.concatenate([m.log_next for m in self.models])
        self.state_char = np.concatenate([np.full(m.nstates, i) for i, m in enumerate(self.models)])
        # entering the next character costs the inter-character penalty
        bonus = np.zeros(len(self.log_self))
        ends = np.cumsum([m.nstates for m in self.models])[:-1] - 1
        bonus[ends] = self.log_penalty
        self.move_bonus = bonus

    @property
    def nstates(self) -> int:
        return len(self.log_self)

    def emission_matrix(self, table: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([table[c] for c in self.chars], axis=1)


@dataclass
class Alignment:
    spans: list[tuple[int, int]]      # inclusive frame spans per character
    loglik: float
    state_path: np.ndarray | None = None


class NBestEntry(NamedTuple):
    word: tuple[str, ...]
    loglik: float
    alignment: Alignment


# --------------------------------------------------------------- viterbi

def _chain_viterbi(b: np.ndarray, model: WordModel) -> tuple[float, np.ndarray]:
    t_len, n = b.shape
    if t_len < n:
        raise InsufficientFramesError(f"{t_len} frames cannot fill {n} states")
    log_self, log_next, bonus = model.log_self, model.log_next, model.move_bonus
    pen = model.log_penalty
    step = log_next[:-1]
    delta = np.full(n, -np.inf)
    delta[0] = pen + b[0, 0]
    back = np.zeros((t_len, n), dtype=bool)
    move = np.empty(n)
    for t in range(1, t_len):
        stay = delta + log_self
        move[0] = -np.inf
        move[1:] = (delta[:-1] + step) + bonus[:-1]
        take = move > stay
        delta = np.where(take, move, stay) + b[t]
        back[t] = take
    score = float(delta[-1] + log_next[-1])
    path = np.empty(t_len, dtype=np.int64)
    s = n - 1
    for t in range(t_len - 1, 0, -1):
        path[t] = s
        if back[t, s]:
            s -= 1
    path[0] = s
    return score, path


def _spans(state_char: np.ndarray, path: np.ndarray, n_chars: int) -> list[tuple[int, int]]:
    chars = state_char[path]
    spans = []
    for i in range(n_chars):
        idx = np.flatnonzero(chars == i)
        spans.append((int(idx[0]), int(idx[-1])))
    return spans


def viterbi(seq: FeatureSequence | np.ndarray, model: WordModel,
            table: dict[str, np.ndarray] | None = None) -> Alignment:
    """Best state path of `seq` through the chained word model.

    `table` may hold precomputed per-character emissions (see
    ``HmmSet.emissions``) to share work across many word models.
    """
    if table is None:
        x = _frames(seq)
        x2 = x * x
        table = {c: m.state_loglik(x, x2) for c, m in zip(model.chars, model.models)}
    b = model.emission_matrix(table)
    score, path = _chain_viterbi(b, model)
    return Alignment(_spans(model.state_char, path, len(model.chars)), score, path)


def decode_nbest(seq: FeatureSequence, lexicon: Sequence[WordModel], n: int,
                 table: dict[str, np.ndarray] | None = None,
                 hmmset: HmmSet | None = None) -> list[NBestEntry]:
    if n < 1:
        raise ValueError("N must be >= 1")
    if not lexicon:
        raise ValueError("empty lexicon")
    if table is None:
        needed = {c for w in lexicon for c in w.chars}
        if hmmset is not None:
            table = hmmset.emissions(seq, needed)
        else:
            x = _frames(seq)
            x2 = x * x
            models = {c: m for w in lexicon for c, m in zip(w.chars, w.models)}
            table = {c: models[c].state_loglik(x, x2) for c in needed}
    scored = []
    for i, wm in enumerate(lexicon):
        if wm.nstates > len(seq):
            continue
        al = viterbi(seq, wm, table)
        scored.append((-al.loglik, i, NBestEntry(wm.chars, al.loglik, al)))
    if not scored:
        raise InsufficientFramesError("every lexicon entry needs more frames than the sequence has")
    scored.sort(key=lambda e: (e[0], e[1]))
    return [e[2] for e in scored[:n]]


def loop_score(seq: FeatureSequence | np.ndarray, hmmset: HmmSet,
               table: dict[str, np.ndarray] | None = None) -> tuple[float, list[str]]:
    """Unconstrained Viterbi over an ergodic loop of every character model."""
    table = hmmset.emissions(seq) if table is None else table
    chars = hmmset.chars
    models = [hmmset.models[c] for c in chars]
    sizes = np.array([m.nstates for m in models])
    t_len = len(_frames(seq)) if not isinstance(seq, FeatureSequence) else len(seq)
    if t_len < sizes.min():
        raise InsufficientFramesError(f"{t_len} frames cannot fill the smallest model ({sizes.min()} states)")
    b = np.concatenate([table[c] for c in chars], axis=1)
    log_self = np.concatenate([m.log_self for m in models])
    log_next = np.concatenate([m.log_next for m in models])
    ends = np.cumsum(sizes)
    first = ends - sizes
    last = ends - 1
    n = len(log_self)
    inner = np.ones(n, dtype=bool)
    inner[first] = False
    inner_idx = np.flatnonzero(inner)
    state_char = np.repeat(np.arange(len(chars)), sizes)
    pen = hmmset.log_penalty

    delta = np.full(n, -np.inf)
    delta[first] = pen + b[0, first]
    back = np.zeros((t_len, n), dtype=bool)
    from_char = np.zeros(t_len, dtype=np.int64)
    move = np.empty(n)
    for t in range(1, t_len):
        ex = delta[last] + log_next[last]
        c = int(np.argmax(ex))
        stay = delta + log_self
        move[inner_idx] = delta[inner_idx - 1] + log_next[inner_idx - 1]
        move[first] = ex[c] + pen
        take = move > stay
        delta = np.where(take, move, stay) + b[t]
        back[t] = take
        from_char[t] = c
    ex = delta[last] + log_next[last]
    c = int(np.argmax(ex))
    score = float(ex[c])
    s = int(last[c])
    path_chars = []
    for t in range(t_len - 1, 0, -1):
        if back[t, s]:
            if not inner[s]:
                path_chars.append(chars[state_char[s]])
                s = int(last[from_char[t]])
            else:
                s -= 1
    path_chars.append(chars[state_char[s]])
    return score, path_chars[::-1]


def classify_isolated(seq: FeatureSequence, hmmset: HmmSet) -> tuple[str, float]:
    """Best single character model for an isolated-character sequence."""
    table = hmmset.emissions(seq)
    best, best_score = None, -np.inf
    for c in hmmset.chars:
        wm = hmmset.word_model((c,))
        if wm.nstates > len(seq):
            continue
        score = viterbi(seq, wm, table).loglik
        if score > best_score:
            best, best_score = c, score
    if best is None:
        raise InsufficientFramesError("sequence too short for every character model")
    return best, best_score


# ---------------------------------------------------------- initialization

def _kmeans(x: np.ndarray, k: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    n = len(x)
    centers = x[rng.choice(n, size=k, replace=n < k)].copy()
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_ITERS):
        d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            big = int(np.argmax(counts))
            members = np.flatnonzero(new == big)
            far = members[np.argmax(d[members, big])]
            centers[j] = x[far]
            if counts[big] > 1:
                new[far] = j
                counts[big] -= 1
                counts[j] += 1
        for j in range(k):
            members = new == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
        if np.array_equal(new, assign):
            break
        assign = new
    return centers, assign


def init_model(char_id: str, nstates: int, nmix: int, sequences: Sequence, seed: int = 0) -> CharHmm:
    """Flat start: uniform state segmentation, k-means per state."""
    seqs = [_frames(s) for s in sequences]
    seqs = [s for s in seqs if len(s)]
    if not seqs:
        raise NoDataError(f"no training frames for character {char_id!r}")
    if nstates < 1 or nmix < 1:
        raise ValueError("nstates and nmix must be >= 1")
    dim = seqs[0].shape[1]
    per_state: list[list[np.ndarray]] = [[] for _ in range(nstates)]
    for x in seqs:
        t = len(x)
        for s in range(nstates):
            lo, hi = (s * t) // nstates, ((s + 1) * t) // nstates
            if hi > lo:
                per_state[s].append(x[lo:hi])
    everything = np.concatenate(seqs)
    weights = np.empty((nstates, nmix))
    means = np.empty((nstates, nmix, dim))
    variances = np.empty((nstates, nmix, dim))
    for s in range(nstates):
        x = np.concatenate(per_state[s]) if per_state[s] else everything
        centers, assign = _kmeans(x, nmix, seed=seed + s)
        counts = np.bincount(assign, minlength=nmix).astype(np.float64)
        w = np.maximum(counts / counts.sum(), WEIGHT_FLOOR)
        weights[s] = w / w.sum()
        for j in range(nmix):
            members = x[assign == j]
            if len(members):
                means[s, j] = members.mean(axis=0)
                variances[s, j] = np.maximum(members.var(axis=0), VAR_FLOOR)
            else:
                means[s, j] = centers[j]
                variances[s, j] = VAR_FLOOR
    total = sum(len(x) for x in seqs)
    stay = float(np.clip(1.0 - nstates * len(seqs) / total, 0.1, 0.9))
    log_self = np.full(nstates, math.log(stay))
    log_next = np.full(nstates, math.log1p(-stay))
    return CharHmm(char_id, weights, means, variances, log_self, log_next)


def flat_start(training: Sequence[tuple[FeatureSequence, Sequence[str]]], nstates: int = DEFAULT_STATES,
               nmix: int = DEFAULT_MIXTURES, script_id: str = "", chars: Sequence[str] | None = None,
               seed: int = 0) -> HmmSet:
    """Initial models from word-level data by uniform character segmentation."""
    segments: dict[str, list[np.ndarray]] = {}
    width = shift = None
    for seq, word in training:
        x = _frames(seq)
        if isinstance(seq, FeatureSequence):
            width, shift = seq.width, seq.shift
        n = len(word)
        for k, c in enumerate(word):
            lo, hi = (k * len(x)) // n, ((k + 1) * len(x)) // n
            if hi > lo:
                segments.setdefault(c, []).append(x[lo:hi])
    wanted = list(chars) if chars is not None else sorted(segments)
    missing = [c for c in wanted if c not in segments]
    if missing:
        raise NoDataError(f"no training data for characters {missing}")
    models = {c: init_model(c, nstates, nmix, segments[c], seed=seed) for c in wanted}
    return HmmSet(script_id, models, width or WINDOW_WIDTH, shift or WINDOW_SHIFT)


# ------------------------------------------------------------ baum-welch

class _Acc:
    def __init__(self, m: CharHmm):
        s, k, d = m.means.shape
        self.occ = np.zeros((s, k))
        self.sx = np.zeros((s, k, d))
        self.sx2 = np.zeros((s, k, d))
        self.n_self = np.zeros(s)
        self.n_next = np.zeros(s)


def _forward_backward(b: np.ndarray, wm: WordModel) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (loglik, gamma (T,N) log, self counts (N,), next counts (N,))."""
    t_len, n = b.shape
    log_self, log_next, bonus = wm.log_self, wm.log_next, wm.move_bonus
    step = log_next[:-1] + bonus[:-1]
    alpha = np.full((t_len, n), -np.inf)
    alpha[0, 0] = wm.log_penalty + b[0, 0]
    move = np.empty(n)
    for t in range(1, t_len):
        prev = alpha[t - 1]
        move[0] = -np.inf
        move[1:] = prev[:-1] + step
        alpha[t] = np.logaddexp(prev + log_self, move) + b[t]
    ll = float(alpha[-1, -1] + log_next[-1])
    beta = np.full((t_len, n), -np.inf)
    beta[-1, -1] = log_next[-1]
    for t in range(t_len - 2, -1, -1):
        nb = b[t + 1] + beta[t + 1]
        move[-1] = -np.inf
        move[:-1] = step + nb[1:]
        beta[t] = np.logaddexp(log_self + nb, move)
    gamma = alpha + beta - ll
    nb = b[1:] + beta[1:]
    n_self = np.exp(alpha[:-1] + log_self + nb - ll).sum(axis=0)
    n_next = np.zeros(n)
    n_next[:-1] = np.exp(alpha[:-1, :-1] + step + nb[:, 1:] - ll).sum(axis=0)
    n_next[-1] = 1.0
    return ll, gamma, n_self, n_next


def _forward(b: np.ndarray, wm: WordModel) -> float:
    t_len, n = b.shape
    step = wm.log_next[:-1] + wm.move_bonus[:-1]
    alpha = np.full(n, -np.inf)
    alpha[0] = wm.log_penalty + b[0, 0]
    move = np.empty(n)
    for t in range(1, t_len):
        move[0] = -np.inf
        move[1:] = alpha[:-1] + step
        alpha = np.logaddexp(alpha + wm.log_self, move) + b[t]
    return float(alpha[-1] + wm.log_next[-1])


class TrainingRun(NamedTuple):
    hmmset: HmmSet
    trace: list[float]      # total data log-likelihood before each update, then final
    skipped: int            # pairs too short for their word model


def _usable(hmmset: HmmSet, training) -> tuple[list, int]:
    usable, skipped = [], 0
    for seq, word in training:
        missing = [c for c in word if c not in hmmset.models]
        if missing:
            raise KeyError(f"no model for characters {missing}")
        wm = hmmset.word_model(word)
        if len(seq) < wm.nstates:
            skipped += 1
            continue
        usable.append((_frames(seq), tuple(word)))
    return usable, skipped


def data_loglik(hmmset: HmmSet, training) -> float:
    usable, _ = _usable(hmmset, training)
    parts = []
    for x, word in usable:
        wm = hmmset.word_model(word)
        table = hmmset.emissions(x, set(word))
        parts.append(_forward(wm.emission_matrix(table), wm))
    return math.fsum(parts)


def _e_step(hmmset: HmmSet, usable) -> tuple[float, dict[str, _Acc]]:
    accs = {c: _Acc(m) for c, m in hmmset.models.items()}
    parts = []
    for x, word in usable:
        x2 = x * x
        wm = hmmset.word_model(word)
        comps = {c: hmmset.models[c].component_loglik(x, x2) for c in set(word)}
        table = {c: _logsumexp(v, axis=2) for c, v in comps.items()}
        b = wm.emission_matrix(table)
        ll, gamma, n_self, n_next = _forward_backward(b, wm)
        parts.append(ll)
        off = 0
        for c in word:
            m = hmmset.models[c]
            s = m.nstates
            sl = slice(off, off + s)
            # (T, S, M) mixture responsibilities weighted by state occupancy
            resp = np.exp(comps[c] - table[c][:, :, None] + gamma[:, sl, None])
            flat = resp.reshape(len(x), s * m.nmix)
            acc = accs[c]
            acc.occ += resp.sum(axis=0)
            acc.sx += (flat.T @ x).reshape(s, m.nmix, -1)
            acc.sx2 += (flat.T @ x2).reshape(s, m.nmix, -1)
            acc.n_self += n_self[sl]
            acc.n_next += n_next[sl]
            off += s
    return math.fsum(parts), accs


def _m_step(m: CharHmm, acc: _Acc) -> CharHmm:
    weights = m.weights.copy()
    means = m.means.copy()
    variances = m.variances.copy()
    log_self = m.log_self.copy()
    log_next = m.log_next.copy()
    for s in range(m.nstates):
        occ_s = acc.occ[s].sum()
        if occ_s <= 0:
            continue
        w = np.maximum(acc.occ[s] / occ_s, WEIGHT_FLOOR)
        weights[s] = w / w.sum()
        live = acc.occ[s] > 1e-10
        if live.any():
            occ = acc.occ[s, live][:, None]
            mu = acc.sx[s, live] / occ
            means[s, live] = mu
            variances[s, live] = np.maximum(acc.sx2[s, live] / occ - mu * mu, VAR_FLOOR)
        out = acc.n_self[s] + acc.n_next[s]
        if out > 0:
            p_self = acc.n_self[s] / out
            log_self[s] = math.log(p_self) if p_self > 0 else -np.inf
            log_next[s] = math.log1p(-p_self) if p_self < 1 else -np.inf
    return CharHmm(m.char_id, weights, means, variances, log_self, log_next)


def baum_welch(hmmset: HmmSet, training: Sequence[tuple[FeatureSequence, Sequence[str]]],
               iters: int, tol: float = 1e-4) -> TrainingRun:
    """Embedded re-estimation over concatenated word models."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    usable, skipped = _usable(hmmset, training)
    if skipped:
        log.warning("skipped %d training pairs shorter than their word model", skipped)
    if not usable:
        raise NoDataError("no usable training pairs")
    trace: list[float] = []
    current = hmmset
    for it in range(iters):
        ll, accs = _e_step(current, usable)
        log.info("iteration %d: log-likelihood %.6f", it, ll)
        if trace and ll - trace[-1] < tol:
            trace.append(ll)
            return TrainingRun(current, trace, skipped)
        trace.append(ll)
        models = {c: _m_step(m, accs[c]) for c, m in current.models.items()}
        current = HmmSet(current.script_id, models, current.width, current.shift)
    final = math.fsum(_forward(current.word_model(w).emission_matrix(current.emissions(x, set(w))),
                               current.word_model(w)) for x, w in usable)
    trace.append(final)
    return TrainingRun(current, trace, skipped)


def train_hmms(training, nstates: int = DEFAULT_STATES, nmix: int = DEFAULT_MIXTURES,
               iters: int = 10, script_id: str = "", chars=None, seed: int = 0) -> TrainingRun:
    """Flat start followed by embedded Baum-Welch."""
    init = flat_start(training, nstates, nmix, script_id, chars, seed)
    return baum_welch(init, training, iters)
