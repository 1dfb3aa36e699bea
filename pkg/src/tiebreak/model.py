"""Design vectors, information matrices and the log-det criterion.

For subject i with covariates x_i the augmented design rows are
``u+ = (x~, x~)`` (treated) and ``u- = (x~, -x~)`` (control), where
``x~ = (1, x)``.  With treatment probabilities p the expected information is

    M(p) = sum_i p_i u+ u+^T + (1 - p_i) u- u-^T = [[A, B], [B, A]]

with ``A = X~^T X~`` and ``B = X~^T diag(2p - 1) X~``.  The noise variance
is fixed at 1.  Determinants and solves go through Cholesky factors only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import SingularInformation

PIVOT_RTOL = 1e-12
PROB_TOL = 1e-12


@dataclass(frozen=True)
class DesignProblem:
    """Covariates and scoring direction.

    Attributes:
        X: covariate matrix, shape (n, d).
        eta: scoring direction of length d; the running variable is ``X @ eta``.
            May be omitted for operations that do not score subjects.
    """

    X: np.ndarray
    eta: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty 2-D array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.eta is not None:
            eta = np.array(self.eta, dtype=np.float64).ravel()
            if eta.shape[0] != X.shape[1]:
                raise ValueError(f"eta has length {eta.shape[0]}, expected d={X.shape[1]}")
            if not np.all(np.isfinite(eta)):
                raise ValueError("eta contains non-finite entries")
            eta.setflags(write=False)
            object.__setattr__(self, "eta", eta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def Xtilde(self) -> np.ndarray:
        """Covariates with a leading intercept column."""
        return np.hstack([np.ones((self.n, 1)), self.X])

    def running(self) -> np.ndarray:
        """Running variable ``s_i = x_i^T eta``."""
        if self.eta is None or not np.any(self.eta):
            raise ValueError("eta must be a nonzero vector to compute the running variable")
        return self.X @ self.eta


def as_probabilities(p, n: int | None = None) -> np.ndarray:
    """Validate a probability vector, clamping roundoff within 1e-12 of [0, 1]."""
    p = np.array(p, dtype=np.float64).ravel()
    if n is not None and p.shape[0] != n:
        raise ValueError(f"probability vector has length {p.shape[0]}, expected {n}")
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite")
    if p.size and (p.min() < -PROB_TOL or p.max() > 1 + PROB_TOL):
        raise ValueError("probabilities must lie in [0, 1]")
    return np.clip(p, 0.0, 1.0)


class AugmentedRows(NamedTuple):
    """Stacked treated / control design rows, each of shape (n, 2(d+1))."""

    plus: np.ndarray
    minus: np.ndarray


def augment_rows(problem: DesignProblem) -> AugmentedRows:
    Xt = problem.Xtilde
    return AugmentedRows(np.hstack([Xt, Xt]), np.hstack([Xt, -Xt]))


@dataclass(frozen=True)
class InformationMatrix:
    """Symmetric PSD information matrix with its scale convention."""

    matrix: np.ndarray
    scale: Literal["total", "per-observation"] = "total"
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise ValueError(f"information matrix must be square of even size, got {M.shape}")
        if self.scale not in ("total", "per-observation"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self._checked:
            norm = max(np.abs(M).max(), 1.0)
            if np.abs(M - M.T).max() > 1e-10 * norm:
                raise ValueError("information matrix is not symmetric")
            tr = np.trace(M)
            if np.linalg.eigvalsh((M + M.T) / 2).min() < -1e-10 * max(tr, 1.0):
                raise ValueError("information matrix is not positive semi-definite")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def k(self) -> int:
        """Half the dimension, i.e. d + 1."""
        return self.matrix.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        return self.matrix[: self.k, : self.k]

    @property
    def B(self) -> np.ndarray:
        return self.matrix[: self.k, self.k :]


def _blocks(Xt: np.ndarray, p: np.ndarray) -> np.ndarray:
    A = Xt.T @ Xt
    B = Xt.T @ ((2.0 * p - 1.0)[:, None] * Xt)
    return np.block([[A, B], [B, A]])


def expected_information(problem: DesignProblem, p, scale: str = "total") -> InformationMatrix:
    """Expected information E[U^T U] under independent draws Pr(Z_i = 1) = p_i."""
    p = as_probabilities(p, problem.n)
    M = _blocks(problem.Xtilde, p)
    if scale == "per-observation":
        M = M / problem.n
    return InformationMatrix(M, scale, _checked=False)


def realized_information(problem: DesignProblem, z) -> InformationMatrix:
    """U^T U for a realized assignment z in {-1, +1}^n."""
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.shape[0] != problem.n:
        raise ValueError(f"z has length {z.shape[0]}, expected {problem.n}")
    if not np.all(np.abs(z) == 1.0):
        raise ValueError("z entries must be -1 or +1")
    Xt = problem.Xtilde
    U = np.hstack([Xt, z[:, None] * Xt])
    return InformationMatrix(U.T @ U, "total", _checked=False)


def _matrix(M) -> np.ndarray:
    return M.matrix if isinstance(M, InformationMatrix) else np.asarray(M, dtype=np.float64)


def cholesky(M) -> np.ndarray:
    """Lower Cholesky factor; raises SingularInformation below the pivot threshold."""
    M = _matrix(M)
    dim = M.shape[0]
    thresh = PIVOT_RTOL * np.trace(M) / dim
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise SingularInformation("information matrix is not positive definite "
                                  "(design under-identified)") from None
    piv = np.diag(L) ** 2
    if not np.all(piv > thresh):
        raise SingularInformation(f"Cholesky pivot {piv.min():.3e} at or below "
                                  f"threshold {thresh:.3e}; design under-identified")
    return L


def neg_log_det(M) -> float:
    """-log det(M), from the Cholesky pivots."""
    L = cholesky(M)
    return float(-2.0 * np.sum(np.log(np.diag(L))))


def criterion_gradient(problem: DesignProblem, p) -> np.ndarray:
    """Partial derivatives of ``neg_log_det(expected_information(p))`` in p."""
    p = as_probabilities(p, problem.n)
    _, g = objective_and_gradient(problem.Xtilde, p)
    return g


def objective_and_gradient(Xt: np.ndarray, p: np.ndarray, ridge: float = 0.0,
                           criterion: str = "D") -> tuple[float, np.ndarray]:
    """Objective and gradient from a single factorization.

    ``criterion="D"`` gives -log det M; ``"A"`` gives trace(M^{-1}).  ``ridge``
    is added to the diagonal of M inside the objective only.
    """
    M = _blocks(Xt, p)
    if ridge:
        M[np.diag_indices_from(M)] += ridge
    L = cholesky(M)
    Up = np.hstack([Xt, Xt])
    Um = np.hstack([Xt, -Xt])
    if criterion == "D":
        Vp = solve_triangular(L, Up.T, lower=True)
        Vm = solve_triangular(L, Um.T, lower=True)
        f = -2.0 * np.sum(np.log(np.diag(L)))
        g = -(np.einsum("ij,ij->j", Vp, Vp) - np.einsum("ij,ij->j", Vm, Vm))
    elif criterion == "A":
        Wp = cho_solve((L, True), Up.T)
        Wm = cho_solve((L, True), Um.T)
        Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
        f = float(np.sum(Linv * Linv))
        g = -(np.einsum("ij,ij->j", Wp, Wp) - np.einsum("ij,ij->j", Wm, Wm))
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return float(f), g


def block_identity_terms(problem: DesignProblem, z) -> tuple[float, float, float]:
    """Log-determinants (log det U^TU, log det ((U^TU)^{-1})_22, log det X~^TX~).

    The treatment-effect block identity says the first two sum to the third.
    """
    M = realized_information(problem, z).matrix
    k = problem.d + 1
    L = cholesky(M)
    sel = np.zeros((2 * k, k))
    sel[k:, :] = np.eye(k)
    inv22 = cho_solve((L, True), sel)[k:, :]
    logdet_M = 2.0 * np.sum(np.log(np.diag(L)))
    logdet_inv22 = -neg_log_det(inv22)
    logdet_A = -neg_log_det(M[:k, :k])
    return float(logdet_M), float(logdet_inv22), float(logdet_A)
