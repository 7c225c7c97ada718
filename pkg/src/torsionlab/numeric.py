"""Tolerance-aware Euclidean linear algebra.

Every vector space is a coordinate space ``R^n`` carrying a symmetric
positive-definite Gram matrix.  Ranks, kernels and images are decided by
singular value decomposition with a threshold relative to the largest singular
value, floored by an absolute value so that numerically-zero maps count as
zero.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConditioningError, InvalidFiltrationError, NotPSDError


@dataclass(frozen=True)
class Tolerance:
    rank_rel_tol: float = 1e-9
    compare_tol: float = 1e-7
    # singular values below this are zero regardless of scale; eigenvalues of
    # PSD operators use its square
    abs_floor: float = 1e-12
    gram_floor: float = 1e-10

    def __post_init__(self):
        if not (0 < self.rank_rel_tol < 1):
            raise ValueError("rank_rel_tol must lie in (0, 1)")
        if self.compare_tol <= 0 or self.abs_floor <= 0 or self.gram_floor <= 0:
            raise ValueError("tolerances must be positive")

    def sv_threshold(self, s_max: float) -> float:
        return max(self.rank_rel_tol * s_max, self.abs_floor)

    def eig_threshold(self, lam_max: float, n: int = 1) -> float:
        """Cutoff for eigenvalues of ``f# f``-type operators: the square of ``sv_threshold``,
        but never below the round-off level of a symmetric eigensolver."""
        noise = 16 * max(n, 1) * np.finfo(float).eps * lam_max
        return max((self.rank_rel_tol * np.sqrt(lam_max)) ** 2, noise, self.abs_floor**2)


def _default_tolerance() -> Tolerance:
    env = os.environ.get("TORSIONLAB_TOLERANCE")
    if env:
        return Tolerance(compare_tol=float(env))
    return Tolerance()


DEFAULT_TOLERANCE = _default_tolerance()


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """``R^dim`` with scalar product ``<x, y> = x^T gram y``."""

    gram: np.ndarray
    floor: float = field(default=DEFAULT_TOLERANCE.gram_floor, repr=False)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gram, dtype=float)) if np.size(self.gram) else np.zeros((0, 0))
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {g.shape}")
        if g.size:
            scale = max(1.0, float(np.max(np.abs(g))))
            if np.max(np.abs(g - g.T)) > 1e-12 * scale:
                raise ConditioningError("Gram matrix is not symmetric")
            lam = np.linalg.eigvalsh(0.5 * (g + g.T))
            if lam[0] <= self.floor:
                raise ConditioningError(
                    f"Gram matrix smallest eigenvalue {lam[0]:.3e} below floor {self.floor:.1e}"
                )
            g = 0.5 * (g + g.T)
        object.__setattr__(self, "gram", _frozen(g))

    @classmethod
    def euclidean(cls, dim: int) -> "MetricSpace":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.gram @ np.asarray(y))

    def cholesky(self) -> np.ndarray:
        """Lower ``L`` with ``gram = L L^T``; ``L^T`` maps to orthonormal coordinates."""
        if self.dim == 0:
            return np.zeros((0, 0))
        return np.linalg.cholesky(self.gram)


@dataclass(frozen=True, eq=False)
class LinearMapRep:
    source: MetricSpace
    target: MetricSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(self.target.dim, self.source.dim)
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def zero(cls, source: MetricSpace, target: MetricSpace) -> "LinearMapRep":
        return cls(source, target, np.zeros((target.dim, source.dim)))

    def compose(self, first: "LinearMapRep") -> "LinearMapRep":
        """``self o first``."""
        return LinearMapRep(first.source, self.target, self.matrix @ first.matrix)


# -- Euclidean helpers -------------------------------------------------------


def pulled_back(gram: np.ndarray, basis: np.ndarray) -> MetricSpace:
    """Metric ``B^T G B`` on the column span of ``basis``, symmetrized against round-off."""
    g = basis.T @ gram @ basis
    return MetricSpace(0.5 * (g + g.T))


def null_space(a: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE, rank: int | None = None) -> np.ndarray:
    """Orthonormal (Euclidean) basis of ``ker a`` as columns; ``rank`` overrides the rank decision."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if a.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(a)
    r = rank_from_singular_values(s, tol) if rank is None else rank
    return vt[r:].T.copy()


def range_basis(a: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE, rank: int | None = None) -> np.ndarray:
    """Orthonormal (Euclidean) basis of ``img a`` as columns; ``rank`` overrides the rank decision."""
    a = np.asarray(a, dtype=float)
    if a.shape[1] == 0 or a.shape[0] == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = rank_from_singular_values(s, tol) if rank is None else rank
    return u[:, :r].copy()


def rank_from_singular_values(s: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    if len(s) == 0:
        return 0
    return int(np.sum(s > tol.sv_threshold(float(s[0]))))


def matrix_rank(a: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    return rank_from_singular_values(np.linalg.svd(a, compute_uv=False), tol)


def g_orthonormal(gram: np.ndarray, x: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Basis of ``span(x)`` orthonormal for the scalar product ``gram``."""
    x = np.asarray(x, dtype=float)
    n = gram.shape[0]
    if x.size == 0 or n == 0:
        return np.zeros((n, 0))
    chol = np.linalg.cholesky(gram)
    y = chol.T @ x
    u = range_basis(y, tol)
    return solve_triangular(chol.T, u, lower=False)


def g_complement(gram: np.ndarray, sub: np.ndarray, within: np.ndarray | None = None,
                 tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """``gram``-orthonormal basis of the orthogonal complement of ``span(sub)`` in ``span(within)``.

    ``within`` defaults to the whole space.
    """
    n = gram.shape[0]
    if within is None:
        within = np.eye(n)
    w = g_orthonormal(gram, within, tol)
    if w.shape[1] == 0:
        return w
    sub = as_columns(sub, n)
    if sub.shape[1] == 0:
        return w
    # coordinates c with <w c, sub> = 0
    c = null_space(sub.T @ gram @ w, tol)
    return w @ c


def g_projector(gram: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto ``span(u)`` for ``gram``-orthonormal columns ``u``."""
    return u @ (u.T @ gram)


def solve_in_span(basis: np.ndarray, rhs: np.ndarray, tol: Tolerance = DEFAULT_TOLERANCE):
    """Minimal-norm coefficients ``c`` with ``basis @ c = rhs``; also returns the relative residual."""
    basis = np.asarray(basis, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if basis.shape[1] == 0:
        c = np.zeros((0,) + rhs.shape[1:])
        res = float(np.linalg.norm(rhs))
    else:
        c, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
        res = float(np.linalg.norm(basis @ c - rhs))
    scale = max(1.0, float(np.linalg.norm(rhs)))
    return c, res / scale


# -- adjoints, volumes and determinants --------------------------------------


def adjoint(f: LinearMapRep) -> LinearMapRep:
    """``f#`` with ``<f x, y>_target = <x, f# y>_source``."""
    src, tgt = f.source, f.target
    if src.dim == 0 or tgt.dim == 0:
        return LinearMapRep.zero(tgt, src)
    m = np.linalg.solve(src.gram, f.matrix.T @ tgt.gram)
    return LinearMapRep(tgt, src, m)


def _whitened(f: LinearMapRep) -> np.ndarray:
    """Matrix of ``f`` in orthonormal coordinates on both sides."""
    ls = f.source.cholesky()
    lt = f.target.cholesky()
    if f.source.dim == 0 or f.target.dim == 0:
        return np.zeros((f.target.dim, f.source.dim))
    return lt.T @ solve_triangular(ls, f.matrix.T, lower=True).T


def log_det_prime(f: LinearMapRep, tol: Tolerance = DEFAULT_TOLERANCE, rank: int | None = None) -> float:
    """Sum of logs of the non-zero eigenvalues of a self-adjoint PSD endomorphism.

    A Laplacian squares the spread of the singular values it is built from, so
    callers that know its rank (from those singular values) should pass it;
    the largest ``rank`` eigenvalues are then used.
    """
    if f.source.dim != f.target.dim:
        raise ValueError("log_det_prime needs an endomorphism")
    if f.source.dim == 0:
        return 0.0
    s = _whitened(f)
    lam = np.linalg.eigvalsh(0.5 * (s + s.T))
    lam_max = max(float(np.max(np.abs(lam))), 0.0)
    cut = tol.eig_threshold(lam_max, len(lam))
    if lam[0] < -10 * cut:
        raise NotPSDError(f"eigenvalue {lam[0]:.3e} is negative beyond tolerance")
    if rank is None:
        keep = lam[lam > cut]
    else:
        keep = lam[len(lam) - rank:] if rank else lam[:0]
        if keep.size and keep[0] <= 0:
            raise NotPSDError(f"rank {rank} asks for a non-positive eigenvalue {keep[0]:.3e}")
    return float(np.sum(np.log(keep)))


def laplacian_log_det_prime(up: np.ndarray, down: np.ndarray, rank: int) -> float:
    """``log det'`` of ``up^T up + down down^T``, both given in orthonormal coordinates.

    The range of the Laplacian comes from its eigenvectors, but the determinant
    on that range is evaluated in factored form: it is ``det(R^T R)`` for the QR
    factor of ``[up; down^T] V``.  The columns of that matrix have norms
    ``sqrt(lambda_i)``, and QR perturbs each column relative to its own norm, so
    small eigenvalues keep their relative accuracy instead of drowning in the
    ``eps * lambda_max`` error of an eigensolver on the formed matrix.
    """
    n = up.shape[1]
    if rank == 0 or n == 0:
        return 0.0
    lap = up.T @ up + down @ down.T
    lam, vec = np.linalg.eigh(0.5 * (lap + lap.T))
    if lam[n - rank] <= 0:
        raise NotPSDError(f"rank {rank} asks for a non-positive eigenvalue {lam[n - rank]:.3e}")
    v = vec[:, n - rank:]
    r = np.linalg.qr(np.vstack([up @ v, down.T @ v]), mode="r")
    return float(2.0 * np.sum(np.log(np.abs(np.diag(r)))))


def log_vol_restricted(f: LinearMapRep, tol: Tolerance = DEFAULT_TOLERANCE, rank: int | None = None) -> float:
    """``log Vol`` of ``f`` restricted to ``(ker f)^perp -> img f``.

    Computed from the singular values of ``f`` in orthonormal coordinates; it is
    ``1/2 log det'(f# f)``.  ``rank`` overrides the numerical rank decision.
    """
    if f.source.dim == 0 or f.target.dim == 0:
        return 0.0
    s = np.linalg.svd(_whitened(f), compute_uv=False)
    r = rank_from_singular_values(s, tol) if rank is None else rank
    return float(np.sum(np.log(s[:r])))


def vol_restricted(f: LinearMapRep, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    return float(np.exp(log_vol_restricted(f, tol)))


def subquotient_representatives(ambient: MetricSpace, sub_basis, quot_by_basis,
                                tol: Tolerance = DEFAULT_TOLERANCE):
    """Minimal-norm representatives of a basis of ``span(sub) / span(quot)``.

    The basis consists of the classes of a maximal subset of the columns of
    ``sub_basis`` that stays independent modulo ``span(quot_by_basis)``.
    Returns ``(representatives, selected_column_indices)``.
    """
    n = ambient.dim
    sub = as_columns(sub_basis, n)
    quot = as_columns(quot_by_basis, n)
    g = ambient.gram
    if quot.shape[1] and sub.shape[1]:
        _, rel = solve_in_span(sub, quot, tol)
        if rel > 1e3 * tol.rank_rel_tol and rel > 1e-8:
            raise InvalidFiltrationError(
                f"quotient subspace is not contained in the sub space (residual {rel:.2e})"
            )
    elif quot.shape[1] and matrix_rank(quot, tol) > 0:
        raise InvalidFiltrationError("quotient subspace is not contained in the zero space")
    if quot.shape[1]:
        q_on = g_orthonormal(g, quot, tol)
        reps_all = sub - g_projector(g, q_on) @ sub
    else:
        reps_all = sub
    # greedy column selection: keep columns that raise the rank
    chosen: list[int] = []
    current = np.zeros((n, 0))
    for j in range(sub.shape[1]):
        cand = np.column_stack([current, reps_all[:, j]])
        if matrix_rank(cand, tol) > current.shape[1]:
            chosen.append(j)
            current = cand
    return reps_all[:, chosen], chosen


def subquotient_metric(ambient: MetricSpace, sub_basis, quot_by_basis,
                       tol: Tolerance = DEFAULT_TOLERANCE) -> MetricSpace:
    """Metric on ``span(sub) / span(quot)`` realised on the orthogonal complement of ``span(quot)``."""
    reps, _ = subquotient_representatives(ambient, sub_basis, quot_by_basis, tol)
    if reps.shape[1] == 0:
        return MetricSpace(np.zeros((0, 0)))
    return pulled_back(ambient.gram, reps)


def as_columns(m, rows: int) -> np.ndarray:
    """``m`` as a ``rows x k`` matrix of column vectors; empty input gives ``k = 0``."""
    arr = np.array(m, dtype=float)
    if arr.ndim == 2 and arr.shape[0] == rows:
        return arr
    if arr.size == 0:
        return np.zeros((rows, 0))
    return arr.reshape(rows, -1)


def opnorm(a: np.ndarray) -> float:
    """Spectral norm, zero for empty matrices."""
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(a, 2)) if a.size else 0.0
