"""Bounded Z-graded cochain complexes with a scalar product in each degree."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ValidationError
from .numeric import (
    DEFAULT_TOLERANCE,
    LinearMapRep,
    MetricSpace,
    Tolerance,
    _whitened,
    adjoint,
    laplacian_log_det_prime,
    log_vol_restricted,
    pulled_back,
)

D_SQUARED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GradedMetricComplex:
    """``C^{q_min} -> ... -> C^{q_max}``.

    ``differentials[i]`` is the matrix of ``d^{q_min+i}``; there is one fewer
    differential than spaces.  Degrees outside the range are zero spaces.
    """

    q_min: int
    spaces: tuple[MetricSpace, ...]
    differentials: tuple[np.ndarray, ...]

    def __post_init__(self):
        spaces = tuple(self.spaces)
        if not spaces:
            raise ValueError("a complex needs at least one degree")
        diffs = []
        if len(self.differentials) != len(spaces) - 1:
            raise ValueError(
                f"expected {len(spaces) - 1} differentials, got {len(self.differentials)}"
            )
        for i, m in enumerate(self.differentials):
            src, tgt = spaces[i].dim, spaces[i + 1].dim
            m = np.array(m, dtype=float).reshape(tgt, src)
            m.setflags(write=False)
            diffs.append(m)
        object.__setattr__(self, "spaces", spaces)
        object.__setattr__(self, "differentials", tuple(diffs))

    @classmethod
    def from_matrices(cls, grams: Sequence, differentials: Sequence, q_min: int = 0):
        return cls(q_min, tuple(MetricSpace(g) for g in grams), tuple(differentials))

    @property
    def q_max(self) -> int:
        return self.q_min + len(self.spaces) - 1

    @property
    def degrees(self) -> range:
        return range(self.q_min, self.q_max + 1)

    def space(self, q: int) -> MetricSpace:
        if self.q_min <= q <= self.q_max:
            return self.spaces[q - self.q_min]
        return MetricSpace(np.zeros((0, 0)))

    def dim(self, q: int) -> int:
        return self.space(q).dim

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.spaces)

    def gram(self, q: int) -> np.ndarray:
        return self.space(q).gram

    def dmat(self, q: int) -> np.ndarray:
        """Matrix of ``d^q: C^q -> C^{q+1}`` (zero outside the range)."""
        if self.q_min <= q < self.q_max:
            return self.differentials[q - self.q_min]
        return np.zeros((self.dim(q + 1), self.dim(q)))

    def d(self, q: int) -> LinearMapRep:
        return LinearMapRep(self.space(q), self.space(q + 1), self.dmat(q))

    @property
    def total_dim(self) -> int:
        return sum(self.dims)


@dataclass
class ComplexValidationReport:
    passed: bool
    residuals: dict[int, float] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)


def d_squared_residuals(c: GradedMetricComplex) -> dict[int, float]:
    out = {}
    for q in range(c.q_min, c.q_max - 1):
        a, b = c.dmat(q), c.dmat(q + 1)
        if a.size == 0 or b.size == 0:
            out[q] = 0.0
            continue
        scale = max(1.0, np.linalg.norm(a, 2) * np.linalg.norm(b, 2))
        out[q] = float(np.linalg.norm(b @ a, 2) / scale)
    return out


def validate_complex(c: GradedMetricComplex, tol: float = D_SQUARED_TOL) -> ComplexValidationReport:
    res = d_squared_residuals(c)
    bad = [f"d_squared_zero at degree {q}" for q, r in res.items() if r > tol]
    return ComplexValidationReport(not bad, res, bad)


def require_valid(c: GradedMetricComplex) -> None:
    rep = validate_complex(c)
    if not rep.passed:
        raise ValidationError("d_squared_zero", "; ".join(rep.violations), rep.worst)


def laplacian(c: GradedMetricComplex, q: int) -> LinearMapRep:
    """``d# d + d d#`` on ``C^q``."""
    if not (c.q_min <= q <= c.q_max):
        raise IndexError(f"degree {q} outside [{c.q_min}, {c.q_max}]")
    up = c.d(q)
    down = c.d(q - 1)
    m = adjoint(up).matrix @ up.matrix + down.matrix @ adjoint(down).matrix
    return LinearMapRep(c.space(q), c.space(q), m)


@dataclass
class CohomologyResult:
    betti: dict[int, int]
    harmonic: dict[int, np.ndarray]  # G-orthonormal columns in C^q
    metrics: dict[int, MetricSpace]

    @property
    def total_betti(self) -> int:
        return sum(self.betti.values())

    def euler_characteristic(self) -> int:
        return sum((-1) ** q * b for q, b in self.betti.items())


def differential_ranks(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[int, int]:
    """Rank of every ``d^q``, including the zero maps at both ends.

    Singular values are taken in orthonormal coordinates and cut relative to
    the largest one in the whole complex, so a map that is zero up to
    round-off counts as zero even when nothing else in its degree is large.
    """
    svs = {}
    for q in range(c.q_min - 1, c.q_max + 1):
        if c.dim(q) and c.dim(q + 1):
            svs[q] = np.linalg.svd(_whitened(c.d(q)), compute_uv=False)
        else:
            svs[q] = np.zeros(0)
    scale = max((float(s[0]) for s in svs.values() if s.size), default=0.0)
    cut = tol.sv_threshold(scale)
    return {q: int(np.sum(s > cut)) for q, s in svs.items()}


def harmonic_basis(c: GradedMetricComplex, q: int, tol: Tolerance = DEFAULT_TOLERANCE,
                   ranks: dict[int, int] | None = None) -> np.ndarray:
    """``ker d^q`` intersected with ``(img d^{q-1})^perp``, ``G``-orthonormal.

    Its dimension comes from the ranks in ``differential_ranks`` and so always
    agrees with rank-nullity.
    """
    n = c.dim(q)
    if n == 0:
        return np.zeros((0, 0))
    ranks = ranks if ranks is not None else differential_ranks(c, tol)
    r_up, r_down = ranks.get(q, 0), ranks.get(q - 1, 0)
    b = n - r_up - r_down
    if b <= 0:
        return np.zeros((n, 0))
    chol = np.linalg.cholesky(c.gram(q))
    # in whitened coordinates y = L^T x the harmonic space is orthogonal to the
    # row space of d^q L^{-T} and to the column space of L^T d^{q-1}
    rows = []
    if r_up:
        _, _, vt = np.linalg.svd(solve_triangular(chol, c.dmat(q).T, lower=True).T)
        rows.append(vt[:r_up])
    if r_down:
        u, _, _ = np.linalg.svd(chol.T @ c.dmat(q - 1))
        rows.append(u[:, :r_down].T)
    if rows:
        _, _, vt = np.linalg.svd(np.vstack(rows))
        y = vt[n - b:].T
    else:
        y = np.eye(n)
    return solve_triangular(chol.T, y, lower=False)


def hodge_cohomology(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> CohomologyResult:
    betti, harm, metrics = {}, {}, {}
    ranks = differential_ranks(c, tol)
    for q in c.degrees:
        h = harmonic_basis(c, q, tol, ranks)
        harm[q] = h
        betti[q] = h.shape[1]
        metrics[q] = pulled_back(c.gram(q), h) if h.shape[1] else MetricSpace(np.zeros((0, 0)))
    return CohomologyResult(betti, harm, metrics)


def betti_by_rank(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[int, int]:
    """Rank-nullity: ``dim C^q - rank d^q - rank d^{q-1}``."""
    r = differential_ranks(c, tol)
    return {q: c.dim(q) - r[q] - r[q - 1] for q in c.degrees}


def _z2_collapse(c: GradedMetricComplex):
    """Even/odd block Grams and the two halves of ``d``."""
    idx = {}
    sizes = {0: 0, 1: 0}
    for q in c.degrees:
        par = q % 2
        idx[q] = (par, sizes[par])
        sizes[par] += c.dim(q)
    grams = {par: np.zeros((sizes[par], sizes[par])) for par in (0, 1)}
    d_from = {par: np.zeros((sizes[1 - par], sizes[par])) for par in (0, 1)}
    for q in c.degrees:
        par, off = idx[q]
        n = c.dim(q)
        grams[par][off:off + n, off:off + n] = c.gram(q)
        if q + 1 <= c.q_max:
            _, toff = idx[q + 1]
            d_from[par][toff:toff + c.dim(q + 1), off:off + n] = c.dmat(q)
    return grams, d_from


def torsion_tc(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``log T_C = log Vol(d: even -> odd) - log Vol(d: odd -> even)``."""
    grams, d_from = _z2_collapse(c)
    r = differential_ranks(c, tol)
    r_even = sum(n for q, n in r.items() if q % 2 == 0)
    r_odd = sum(n for q, n in r.items() if q % 2)
    ev, od = MetricSpace(grams[0]), MetricSpace(grams[1])
    up = log_vol_restricted(LinearMapRep(ev, od, d_from[0]), tol, r_even)
    down = log_vol_restricted(LinearMapRep(od, ev, d_from[1]), tol, r_odd)
    return up - down


def torsion_log_sum(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``1/2 sum_q (-1)^(q+1) q log det' Laplacian^q``."""
    ranks = differential_ranks(c, tol)
    total = 0.0
    for q in c.degrees:
        if q == 0 or c.dim(q) == 0:
            continue
        r = ranks[q] + ranks[q - 1]
        up, down = _whitened(c.d(q)), _whitened(c.d(q - 1))
        total += (-1) ** (q + 1) * q * laplacian_log_det_prime(up, down, r)
    return 0.5 * total


def torsion_from_volumes(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``sum_q (-1)^q log Vol(d^q restricted)``; equals the two torsion formulas."""
    r = differential_ranks(c, tol)
    return sum((-1) ** q * log_vol_restricted(c.d(q), tol, r[q]) for q in range(c.q_min, c.q_max))


def euler_characteristic(c: GradedMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    chi = sum((-1) ** q * c.dim(q) for q in c.degrees)
    chi_h = hodge_cohomology(c, tol).euler_characteristic()
    if chi != chi_h:
        raise ValidationError("euler_characteristic", f"chi(C)={chi} but chi(HC)={chi_h}")
    return chi


def shift(c: GradedMetricComplex, by: int) -> GradedMetricComplex:
    """Same complex with every degree raised by ``by`` (no sign change)."""
    return GradedMetricComplex(c.q_min + by, c.spaces, c.differentials)


def direct_sum(*cs: GradedMetricComplex) -> GradedMetricComplex:
    """Orthogonal direct sum."""
    lo = min(c.q_min for c in cs)
    hi = max(c.q_max for c in cs)
    grams, diffs = [], []
    for q in range(lo, hi + 1):
        dims = [c.dim(q) for c in cs]
        g = np.zeros((sum(dims), sum(dims)))
        off = 0
        for c, n in zip(cs, dims):
            g[off:off + n, off:off + n] = c.gram(q)
            off += n
        grams.append(g)
    for q in range(lo, hi):
        rows = [c.dim(q + 1) for c in cs]
        cols = [c.dim(q) for c in cs]
        m = np.zeros((sum(rows), sum(cols)))
        ro = co = 0
        for c, r, k in zip(cs, rows, cols):
            m[ro:ro + r, co:co + k] = c.dmat(q)
            ro += r
            co += k
        diffs.append(m)
    return GradedMetricComplex.from_matrices(grams, diffs, lo)


def transport(c: GradedMetricComplex, maps: dict[int, np.ndarray]) -> GradedMetricComplex:
    """Image of ``c`` under invertible per-degree maps ``x -> S_q x`` with transported Grams."""
    grams, diffs = [], []
    for q in c.degrees:
        s_inv = np.linalg.inv(maps[q])
        g = s_inv.T @ c.gram(q) @ s_inv
        grams.append(0.5 * (g + g.T))
    for q in range(c.q_min, c.q_max):
        diffs.append(maps[q + 1] @ c.dmat(q) @ np.linalg.inv(maps[q]))
    return GradedMetricComplex.from_matrices(grams, diffs, c.q_min)
