"""Small model and image builders shared by the test modules."""
from __future__ import annotations

import math

import numpy as np

from xlhwr.ghmm import CharHmm, HmmSet


def random_char_hmm(rng: np.random.Generator, char_id: str, nstates: int, nmix: int = 1,
                    dim: int = 2) -> tuple[CharHmm, dict]:
    """A random CharHmm plus the same parameters as plain nested lists."""
    w = rng.uniform(0.2, 1.0, size=(nstates, nmix))
    w /= w.sum(axis=1, keepdims=True)
    means = rng.normal(0, 1.5, size=(nstates, nmix, dim))
    variances = rng.uniform(0.3, 2.0, size=(nstates, nmix, dim))
    p_self = rng.uniform(0.05, 0.95, size=nstates)
    hmm = CharHmm(char_id, w, means, variances, np.log(p_self), np.log1p(-p_self))
    plain = {"weights": w.tolist(), "means": means.tolist(), "variances": variances.tolist(),
             "p_self": p_self.tolist(), "p_next": (1.0 - p_self).tolist()}
    return hmm, plain


def random_hmmset(rng: np.random.Generator, chars, nstates: int, nmix: int = 1, dim: int = 2) -> HmmSet:
    return HmmSet("R", {c: random_char_hmm(rng, c, nstates, nmix, dim)[0] for c in chars})


def penalty(n_models: int) -> float:
    return -math.log(n_models)
