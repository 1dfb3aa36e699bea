"""Closed-form efficiency and gain for Gaussian covariates.

With ``x ~ N(0, Sigma)`` and the threshold rule on ``s = x^T eta``, let
``v = eta^T Sigma eta``.  The off-diagonal information block is determined by

    alpha = E[x (1{s >= delta} - 1{s <= -delta})]
          = 2 Sigma eta / sqrt(v) * phi(delta / sqrt(v)),

the per-observation determinant criterion is
``(1 - (2/pi) exp(-delta^2 / v))^2 det(Sigma)^2`` and the expected gain
under true slope gamma is ``gamma^T alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import TradeoffCurve
from .errors import SingularInformation

LOG_UNDERFLOW = 700.0


@dataclass(frozen=True)
class GaussianPopulation:
    """Mean-zero Gaussian covariates with treatment direction and true slope."""

    sigma: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray | None = None

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.ndim == 0:
            sigma = sigma.reshape(1, 1)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma must be a square matrix")
        if not np.allclose(sigma, sigma.T, rtol=1e-12, atol=0):
            raise ValueError("sigma must be symmetric")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise SingularInformation("sigma is not positive definite") from None
        if not np.all(np.diag(chol) > 0):
            raise SingularInformation("sigma is not positive definite")
        object.__setattr__(self, "sigma", sigma)
        eta = np.array(self.eta, dtype=np.float64).ravel()
        if eta.shape[0] != sigma.shape[0]:
            raise ValueError("eta length does not match sigma")
        object.__setattr__(self, "eta", eta)
        if self.gamma is not None:
            gamma = np.array(self.gamma, dtype=np.float64).ravel()
            if gamma.shape[0] != sigma.shape[0]:
                raise ValueError("gamma length does not match sigma")
            object.__setattr__(self, "gamma", gamma)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def score_variance(self) -> float:
        """eta^T Sigma eta, the variance of the running variable."""
        if not np.any(self.eta):
            raise ValueError("eta must be nonzero")
        return float(self.eta @ self.sigma @ self.eta)

    def log_det_sigma(self) -> float:
        L = np.linalg.cholesky(self.sigma)
        return float(2.0 * np.sum(np.log(np.diag(L))))

    def sqrt_sigma(self) -> np.ndarray:
        """Symmetric PSD square root of Sigma."""
        w, V = np.linalg.eigh(self.sigma)
        return (V * np.sqrt(np.clip(w, 0, None))) @ V.T

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.standard_normal((n, self.d)) @ self.sqrt_sigma()

    def normalized(self) -> "GaussianPopulation":
        """Copy with eta rescaled so that eta^T Sigma eta = 1."""
        return GaussianPopulation(self.sigma, self.eta / math.sqrt(self.score_variance()), self.gamma)


def _require_gamma(pop: GaussianPopulation) -> np.ndarray:
    if pop.gamma is None:
        raise ValueError("population has no gamma (true treatment slope)")
    return pop.gamma


def alpha_vector(pop: GaussianPopulation, delta: float) -> np.ndarray:
    """Treatment/covariate covariance vector under the threshold rule."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    v = pop.score_variance()
    t2 = delta * delta / v
    if t2 > LOG_UNDERFLOW:
        return np.zeros(pop.d)
    log_phi = -0.5 * t2 - 0.5 * math.log(2 * math.pi)
    return 2.0 * (pop.sigma @ pop.eta) / math.sqrt(v) * math.exp(log_phi)


def gaussian_efficiency(pop: GaussianPopulation, delta: float) -> float:
    """Per-observation determinant criterion det(E[U^T U] / n)."""
    return math.exp(gaussian_log_efficiency(pop, delta))


def gaussian_log_efficiency(pop: GaussianPopulation, delta: float) -> float:
    if delta < 0:
        raise ValueError("delta must be >= 0")
    t2 = delta * delta / pop.score_variance()
    ld = 2.0 * pop.log_det_sigma()
    if t2 > LOG_UNDERFLOW:
        return ld
    return 2.0 * math.log1p(-(2.0 / math.pi) * math.exp(-t2)) + ld


def efficiency_from_alpha(pop: GaussianPopulation, alpha) -> float:
    """(1 - alpha^T Sigma^{-1} alpha)^2 det(Sigma)^2, via Cholesky solves."""
    L = np.linalg.cholesky(pop.sigma)
    w = np.linalg.solve(L, np.asarray(alpha, dtype=np.float64))
    return float((1.0 - w @ w) ** 2 * math.exp(2.0 * pop.log_det_sigma()))


def expected_gain(pop: GaussianPopulation, delta: float) -> float:
    """Expected short-term gain E[Z x^T gamma] under the threshold rule."""
    return float(_require_gamma(pop) @ alpha_vector(pop, delta))


def normalized_tradeoff(pop: GaussianPopulation, delta0_grid) -> TradeoffCurve:
    """Efficiency and gain against the standardized window ``delta0 = delta / sd(s)``."""
    grid = np.asarray(delta0_grid, dtype=np.float64).ravel()
    if grid.size == 0 or np.any(grid < 0):
        raise ValueError("delta0 grid must be nonempty and nonnegative")
    npop = pop.normalized()
    log_eff = np.array([gaussian_log_efficiency(npop, d0) for d0 in grid])
    if pop.gamma is not None:
        gain = np.array([expected_gain(npop, d0) for d0 in grid])
    else:
        gain = np.full(grid.size, np.nan)
    return TradeoffCurve(grid, log_eff, gain,
                         meta={"source": "gaussian", "normalized_eta": npop.eta.tolist(), "d": pop.d})


def optimal_directions(pop: GaussianPopulation) -> tuple[np.ndarray, np.ndarray | None]:
    """Most efficient and highest-gain scoring directions.

    The efficient direction is a unit eigenvector for the smallest eigenvalue
    of Sigma.  For a repeated smallest eigenvalue we project the first
    standard basis vector with a nonzero component onto that eigenspace.
    The sign is fixed so the first nonzero coordinate is positive.  The gain
    direction is gamma itself (None when gamma is absent).
    """
    w, V = np.linalg.eigh(pop.sigma)
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("eigendecomposition failed")
    tol = 1e-10 * max(abs(w[-1]), 1.0)
    E = V[:, w <= w[0] + tol]
    if E.shape[1] == 1:
        v = E[:, 0]
    else:
        for j in range(pop.d):
            v = E @ E[j, :]
            if np.linalg.norm(v) > 1e-8:
                break
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v, (None if pop.gamma is None else pop.gamma.copy())


def monte_carlo_alpha(pop: GaussianPopulation, delta: float, n_samples: int = 10**6,
                      seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error of x (1{s >= delta} - 1{s <= -delta})."""
    x = pop.sample(n_samples, seed)
    s = x @ pop.eta
    w = (s >= delta).astype(np.float64) - (s <= -delta)
    terms = x * w[:, None]
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / math.sqrt(n_samples)


@dataclass(frozen=True)
class MiddleLevelResult:
    """log det criterion f(q) of the middle-level rule over q = 2p - 1."""

    q: np.ndarray
    f: np.ndarray
    f_se: np.ndarray
    second_diff: np.ndarray
    second_diff_se: np.ndarray
    status: tuple[str, ...]
    band_probability: float


def _f_curve(Sig: np.ndarray, N0: np.ndarray, N1: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, list[str]]:
    L = np.linalg.cholesky(Sig)
    out = np.empty(q.size)
    status = []
    for i, qi in enumerate(q):
        N = N0 + qi * N1
        W = np.linalg.solve(L, N)
        S = Sig - W.T @ W
        try:
            C = np.linalg.cholesky((S + S.T) / 2)
        except np.linalg.LinAlgError:
            out[i] = np.nan
            status.append("not positive definite")
            continue
        out[i] = 2.0 * np.sum(np.log(np.diag(C)))
        status.append("ok")
    return out, status


def middle_level_objective(source, delta: float, q_grid, n_samples: int = 10**6,
                           seed: int = 0, n_batches: int = 20) -> MiddleLevelResult:
    """Evaluate f(q) = log det(S~ - N(q) S~^{-1} N(q)), N(q) = N0 + q N1.

    ``source`` is a GaussianPopulation (N0 from the closed-form alpha, N1 by
    Monte Carlo with ``n_samples`` draws) or an (n, d) sample plus an eta
    given as ``(X, eta)`` (all moments empirical).  Standard errors come from
    ``n_batches`` equal batches of the sample.
    """
    q = np.asarray(q_grid, dtype=np.float64).ravel()
    if isinstance(source, GaussianPopulation):
        X = source.sample(n_samples, seed)
        eta = source.eta
        d = source.d
        Sig = np.eye(d + 1)
        Sig[1:, 1:] = source.sigma
        alpha = alpha_vector(source, delta)
        N0 = np.zeros((d + 1, d + 1))
        N0[0, 1:] = alpha
        N0[1:, 0] = alpha
        empirical = False
    else:
        X, eta = source
        X = np.asarray(X, dtype=np.float64)
        eta = np.asarray(eta, dtype=np.float64)
        d = X.shape[1]
        empirical = True

    def moments(Xb):
        Xt = np.hstack([np.ones((Xb.shape[0], 1)), Xb])
        s = Xb @ eta
        band = (np.abs(s) < delta).astype(np.float64)
        N1b = (Xt * band[:, None]).T @ Xt / Xb.shape[0]
        if not empirical:
            return Sig, N0, N1b, band.mean()
        if delta == 0:
            w = np.where(s >= 0, 1.0, -1.0)
        else:
            w = (s >= delta).astype(np.float64) - (s <= -delta)
        N0b = (Xt * w[:, None]).T @ Xt / Xb.shape[0]
        return Xt.T @ Xt / Xb.shape[0], N0b, N1b, band.mean()

    S_full, N0_full, N1_full, pband = moments(X)
    f, status = _f_curve(S_full, N0_full, N1_full, q)
    fb = []
    for Xb in np.array_split(X, n_batches):
        Sb, N0b, N1b, _ = moments(Xb)
        fb.append(_f_curve(Sb, N0b, N1b, q)[0])
    fb = np.array(fb)
    root_b = math.sqrt(n_batches)
    f_se = fb.std(axis=0, ddof=1) / root_b
    d2 = f[:-2] - 2 * f[1:-1] + f[2:] if q.size >= 3 else np.empty(0)
    d2b = fb[:, :-2] - 2 * fb[:, 1:-1] + fb[:, 2:] if q.size >= 3 else np.empty((n_batches, 0))
    d2_se = d2b.std(axis=0, ddof=1) / root_b
    return MiddleLevelResult(q, f, f_se, d2, d2_se, tuple(status), float(pband))
