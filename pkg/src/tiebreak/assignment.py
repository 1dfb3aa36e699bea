"""Treatment-probability rules and randomization of the treatment signs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import HeterogeneousStratum, NonIntegerBudget
from .model import as_probabilities

RuleKind = Literal["threshold", "quantile", "general_mid"]


@dataclass(frozen=True)
class AssignmentRule:
    """Three-level tie-breaker rule on the running variable ``x^T eta``.

    ``threshold``: 1 above ``delta``, 0 below ``-delta``, 1/2 in between.
    ``quantile``: cutoffs at matching empirical quantiles ``1/2 -+ delta_q``.
    ``general_mid``: as ``threshold`` but with ``p_mid`` in the middle band.
    """

    kind: RuleKind
    eta: np.ndarray
    delta: float = 0.0
    delta_q: float = 0.0
    p_mid: float = 0.5

    def __post_init__(self):
        eta = np.array(self.eta, dtype=np.float64).ravel()
        object.__setattr__(self, "eta", eta)
        if self.kind not in ("threshold", "quantile", "general_mid"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if not np.any(eta):
            raise ValueError("eta must be nonzero")
        if not (self.delta >= 0):
            raise ValueError("delta must be >= 0")
        if not (0.0 <= self.delta_q <= 0.5):
            raise ValueError("delta_q must lie in [0, 1/2]")
        if not (0.0 <= self.p_mid <= 1.0):
            raise ValueError("p_mid must lie in [0, 1]")

    @classmethod
    def threshold(cls, eta, delta: float) -> "AssignmentRule":
        return cls("threshold", eta, delta=delta)

    @classmethod
    def quantile(cls, eta, delta_q: float) -> "AssignmentRule":
        return cls("quantile", eta, delta_q=delta_q)

    @classmethod
    def general_mid(cls, eta, delta: float, p_mid: float) -> "AssignmentRule":
        return cls("general_mid", eta, delta=delta, p_mid=p_mid)

    def describe(self) -> str:
        if self.kind == "quantile":
            return f"quantile(delta_q={self.delta_q:g})"
        if self.kind == "general_mid":
            return f"general_mid(delta={self.delta:g}, p_mid={self.p_mid:g})"
        return f"threshold(delta={self.delta:g})"


def quantile_cutoffs(s, delta_q: float) -> tuple[float, float]:
    """Lower/upper cutoffs holding equal fractions of scores outside the band.

    With ``k = ceil((1/2 - delta_q) n)`` the lower cutoff is the k-th smallest
    score and the upper one the k-th largest.  ``k = 0`` gives an infinite
    band (everyone randomized).
    """
    s = np.sort(np.asarray(s, dtype=np.float64))
    n = s.shape[0]
    # guard 0.5 - 0.25 style products landing a hair above an integer
    k = math.ceil(round((0.5 - delta_q) * n, 9))
    if k <= 0:
        return -math.inf, math.inf
    return float(s[k - 1]), float(s[n - k])


def _three_level(s: np.ndarray, lo: float, hi: float, mid: float) -> np.ndarray:
    p = np.full(s.shape, mid)
    p[s <= lo] = 0.0
    p[s >= hi] = 1.0
    return p


def rule_probabilities(rule: AssignmentRule, X) -> np.ndarray:
    """Treatment probabilities of ``rule`` for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    s = X @ rule.eta
    return probabilities_from_scores(rule, s)


def probabilities_from_scores(rule: AssignmentRule, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if rule.kind == "quantile":
        lo, hi = quantile_cutoffs(s, rule.delta_q)
        return _three_level(s, lo, hi, 0.5)
    mid = rule.p_mid if rule.kind == "general_mid" else 0.5
    if rule.delta == 0:
        return (s >= 0).astype(np.float64)
    return _three_level(s, -rule.delta, rule.delta, mid)


def _uniforms(n: int, seed: int) -> np.ndarray:
    # Philox is counter-based: draw i depends only on (seed, i).
    return np.random.Generator(np.random.Philox(key=int(seed))).random(n)


def sample_assignment(p, seed: int) -> np.ndarray:
    """Independent signs with Pr(Z_i = +1) = p_i; deterministic given seed."""
    p = as_probabilities(p)
    u = _uniforms(p.shape[0], seed)
    return np.where(u < p, 1, -1).astype(np.int8)


def stratified_assignment(p, strata, seed: int, tol: float = 1e-9) -> np.ndarray:
    """Treat exactly ``p*k`` subjects, chosen by simple random sampling, in each stratum.

    Args:
        p: treatment probabilities, constant within each stratum.
        strata: stratum label for every subject.
        seed: RNG seed.
    """
    p = as_probabilities(p)
    strata = np.asarray(strata)
    if strata.shape[0] != p.shape[0]:
        raise ValueError("strata labels and probabilities differ in length")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    z = np.full(p.shape[0], -1, dtype=np.int8)
    labels, inverse = np.unique(strata, return_inverse=True)
    for j, label in enumerate(labels):
        idx = np.flatnonzero(inverse == j)
        pk = p[idx]
        if np.ptp(pk) > tol:
            raise HeterogeneousStratum(f"stratum {label!r} has unequal probabilities")
        r_float = pk[0] * idx.size
        r = round(r_float)
        if abs(r_float - r) > tol:
            raise NonIntegerBudget(
                f"stratum {label!r}: p*k = {pk[0]:g}*{idx.size} = {r_float:g} is not an integer")
        z[rng.choice(idx, size=r, replace=False)] = 1
    return z
