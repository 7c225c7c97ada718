"""Spectral sequence of a filtered metric complex with inductively induced scalar products.

Every page entry ``E_k^{p,q}`` is realised as a subspace ``W_k`` of ``C^q``
with a ``G``-orthonormal basis, so its scalar product is the identity in
entry coordinates.  Alongside the basis each entry keeps

* ``lift``: entry coordinates -> cochains ``z in F_p C^q`` with ``dz in F_{p+k}``,
* ``proj``: cochains -> entry coordinates, the class map on such cochains.

The page differential is ``proj^{p+k,q+1} . d . lift^{p,q}``.  The next page is
the kernel of the entry Laplacian (the harmonic part), with the lift corrected
so that ``dz`` drops one more filtration step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .complexes import GradedMetricComplex, hodge_cohomology, torsion_tc
from .detline import DetIsoVolume
from .errors import InconsistentLiftError, InvalidFiltrationError, SingularMapError
from .numeric import (
    DEFAULT_TOLERANCE,
    MetricSpace,
    Tolerance,
    as_columns,
    g_complement,
    laplacian_log_det_prime,
    matrix_rank,
    null_space,
    pulled_back,
    opnorm,
    range_basis,
    solve_in_span,
    subquotient_representatives,
)
from .report import CheckResult, exact_check, residual_check

LIFT_RESIDUAL_TOL = 1e-6


def pq_to_pr(p: int, q: int) -> tuple[int, int]:
    """Total degree ``q`` to complementary degree ``r = q - p``."""
    return p, q - p


def pr_to_pq(p: int, r: int) -> tuple[int, int]:
    return p, p + r


@dataclass(frozen=True, eq=False)
class FilteredMetricComplex:
    """A metric complex with a decreasing filtration ``F_{p_min} = C ⊇ ... ⊇ F_{p_max+1} = 0``.

    ``levels[p - p_min][q - q_min]`` is a matrix whose columns span ``F_p C^q``
    for ``p`` in ``[p_min, p_max + 1]``.
    """

    complex: GradedMetricComplex
    p_min: int
    levels: tuple

    def __post_init__(self):
        c = self.complex
        lv = []
        for per_p in self.levels:
            row = []
            for q, m in zip(c.degrees, per_p):
                row.append(as_columns(m, c.dim(q)))
            if len(row) != len(c.spaces):
                raise InvalidFiltrationError("each filtration level needs one basis per degree")
            lv.append(tuple(row))
        if len(lv) < 2:
            raise InvalidFiltrationError("a filtration needs at least the levels p_min and p_min + 1")
        object.__setattr__(self, "levels", tuple(lv))

    @classmethod
    def from_levels(cls, c: GradedMetricComplex, levels: Mapping[int, Sequence]) -> "FilteredMetricComplex":
        ps = sorted(levels)
        if ps != list(range(ps[0], ps[-1] + 1)):
            raise InvalidFiltrationError("filtration levels must be consecutive")
        return cls(c, ps[0], tuple(levels[p] for p in ps))

    @classmethod
    def from_coordinate_levels(cls, c: GradedMetricComplex, index: Mapping[int, Sequence[int]],
                               p_min: int | None = None, p_max: int | None = None):
        """``F_p C^q`` spanned by the coordinate vectors whose level is ``>= p``."""
        allp = [i for q in c.degrees for i in index.get(q, ())]
        lo = p_min if p_min is not None else min(allp, default=0)
        hi = p_max if p_max is not None else max(allp, default=lo)
        levels = {}
        for p in range(lo, hi + 2):
            per_q = []
            for q in c.degrees:
                lab = list(index.get(q, ()))
                eye = np.eye(c.dim(q))
                per_q.append(eye[:, [j for j, v in enumerate(lab) if v >= p]])
            levels[p] = per_q
        return cls.from_levels(c, levels)

    @classmethod
    def trivial(cls, c: GradedMetricComplex, p: int = 0) -> "FilteredMetricComplex":
        return cls(c, p, (tuple(np.eye(c.dim(q)) for q in c.degrees),
                          tuple(np.zeros((c.dim(q), 0)) for q in c.degrees)))

    @property
    def p_max(self) -> int:
        return self.p_min + len(self.levels) - 2

    @property
    def length(self) -> int:
        return self.p_max - self.p_min + 1

    @property
    def degrees(self) -> range:
        return self.complex.degrees

    def basis(self, p: int, q: int) -> np.ndarray:
        """Columns spanning ``F_p C^q`` (whole space below ``p_min``, zero above ``p_max``)."""
        n = self.complex.dim(q)
        if not (self.complex.q_min <= q <= self.complex.q_max):
            return np.zeros((0, 0))
        if p <= self.p_min:
            return self.levels[0][q - self.complex.q_min]
        if p > self.p_max:
            return np.zeros((n, 0))
        return self.levels[p - self.p_min][q - self.complex.q_min]

    def annihilator(self, p: int, q: int, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
        """Euclidean basis ``N`` of ``(F_p C^q)^perp``; ``x in F_p`` iff ``N^T x = 0``."""
        b = self.basis(p, q)
        n = self.complex.dim(q)
        if b.shape[1] == 0:
            return np.eye(n)
        return null_space(b.T, tol)

    def z_basis(self, p: int, q: int, j: int, tol: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
        """Basis of ``Z_j^{p,q} = {z in F_p C^q : dz in F_{p+j} C^{q+1}}``; ``j=None`` means cocycles."""
        b = range_basis(self.basis(p, q), tol)
        if b.shape[1] == 0:
            return b
        d = self.complex.dmat(q)
        if d.shape[0] == 0:
            return b
        target = self.annihilator(p + j, q + 1, tol) if j is not None else np.eye(d.shape[0])
        if target.shape[1] == 0:
            return b
        return b @ null_space(target.T @ d @ b, tol)


def _contained(sub: np.ndarray, ambient_ann: np.ndarray) -> float:
    """Relative size of the component of ``span(sub)`` outside the subspace annihilated by ``ambient_ann``."""
    if sub.size == 0 or ambient_ann.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(ambient_ann.T @ sub) / max(1.0, np.linalg.norm(sub)))


def validate_filtration(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE,
                        threshold: float = 1e-8) -> CheckResult:
    """Nesting, ``d``-stability and end conditions, with worst residuals per kind."""
    c = f.complex
    worst = {"nesting": 0.0, "d_stable": 0.0, "end_conditions": 0.0}
    bad: list[str] = []
    for q in c.degrees:
        top = f.levels[0][q - c.q_min]
        if matrix_rank(top, tol) != c.dim(q):
            worst["end_conditions"] = max(worst["end_conditions"], 1.0)
            bad.append(f"end_conditions: F_{f.p_min} C^{q} is not the whole space")
        last = f.levels[-1][q - c.q_min]
        if last.size and np.linalg.norm(last) > threshold:
            worst["end_conditions"] = max(worst["end_conditions"], float(np.linalg.norm(last)))
            bad.append(f"end_conditions: F_{f.p_max + 1} C^{q} is not zero")
    for p in range(f.p_min, f.p_max + 1):
        for q in c.degrees:
            r = _contained(f.basis(p + 1, q), f.annihilator(p, q, tol))
            worst["nesting"] = max(worst["nesting"], r)
            if r > threshold:
                bad.append(f"nesting: F_{p + 1} C^{q} not inside F_{p} C^{q}")
            if q < c.q_max:
                img = c.dmat(q) @ f.basis(p, q)
                scale = max(1.0, opnorm(c.dmat(q)))
                r = _contained(img, f.annihilator(p, q + 1, tol)) / scale
                worst["d_stable"] = max(worst["d_stable"], r)
                if r > threshold:
                    bad.append(f"d_stable: d(F_{p} C^{q}) not inside F_{p} C^{q + 1}")
    return CheckResult("validate_filtration", not bad, max(worst.values()), threshold,
                       "", bad, {"worst": worst})


def require_valid_filtration(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> None:
    rep = validate_filtration(f, tol)
    if not rep.passed:
        raise InvalidFiltrationError("; ".join(rep.violations))


# -- pages -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PageEntry:
    p: int
    q: int
    basis: np.ndarray
    lift: np.ndarray
    proj: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def metric(self, gram: np.ndarray) -> MetricSpace:
        if self.dim == 0:
            return MetricSpace(np.zeros((0, 0)))
        return pulled_back(gram, self.basis)


@dataclass(eq=False)
class SpectralPage:
    """Page ``E_k``: entries by ``(p, q)`` and ``delta[(p, q)]: E^{p,q} -> E^{p+k,q+1}``."""

    k: int
    p_range: tuple[int, int]
    degrees: range
    entries: dict[tuple[int, int], PageEntry]
    delta: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    # size of the vectors d(lift) that the deltas are computed from; sets the round-off level
    noise_scale: float = 0.0

    def dim(self, p: int, q: int) -> int:
        e = self.entries.get((p, q))
        return e.dim if e is not None else 0

    def delta_from(self, p: int, q: int) -> np.ndarray:
        return self.delta.get((p, q), np.zeros((self.dim(p + self.k, q + 1), self.dim(p, q))))

    def delta_into(self, p: int, q: int) -> np.ndarray:
        return self.delta_from(p - self.k, q - 1)

    def dims_by_q(self) -> dict[int, int]:
        out = {q: 0 for q in self.degrees}
        for (p, q), e in self.entries.items():
            out[q] += e.dim
        return out

    def euler_characteristic(self) -> int:
        return sum((-1) ** q * n for q, n in self.dims_by_q().items())

    def laplacian(self, p: int, q: int) -> np.ndarray:
        """Entry Laplacian in orthonormal entry coordinates."""
        a = self.delta_from(p, q)
        b = self.delta_into(p, q)
        return a.T @ a + b @ b.T

    def delta_ranks(self, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[tuple[int, int], int]:
        """Rank of every ``delta`` block, cut relative to the whole page rather than block by block."""
        svs = {key: np.linalg.svd(m, compute_uv=False) for key, m in self.delta.items() if m.size}
        scale = max([self.noise_scale] + [float(s[0]) for s in svs.values()])
        cut = tol.sv_threshold(scale)
        return {key: int(np.sum(s > cut)) for key, s in svs.items()}

    def delta_rank_from(self, ranks: Mapping[tuple[int, int], int], p: int, q: int) -> int:
        return ranks.get((p, q), 0)

    def delta_rank_into(self, ranks: Mapping[tuple[int, int], int], p: int, q: int) -> int:
        return ranks.get((p - self.k, q - 1), 0)

    def is_stable(self, tol: float = 1e-10) -> bool:
        return all(m.size == 0 or np.max(np.abs(m)) <= tol for m in self.delta.values())

    def as_total_complex(self) -> GradedMetricComplex:
        """The page as a complex graded by total degree, ``E_k^q = ⊕_p E_k^{p,q}``."""
        p_lo, p_hi = self.p_range
        ps = range(p_lo, p_hi + 1)
        offs = {}
        for q in self.degrees:
            o = 0
            for p in ps:
                offs[(p, q)] = o
                o += self.dim(p, q)
        dims = self.dims_by_q()
        grams = [np.eye(dims[q]) for q in self.degrees]
        diffs = []
        for q in list(self.degrees)[:-1]:
            m = np.zeros((dims[q + 1], dims[q]))
            for p in ps:
                if p + self.k > p_hi:
                    continue
                blk = self.delta_from(p, q)
                r0, c0 = offs[(p + self.k, q + 1)], offs[(p, q)]
                m[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] = blk
            diffs.append(m)
        return GradedMetricComplex.from_matrices(grams, diffs, self.degrees.start)

    def dims_table(self) -> dict[str, int]:
        return {f"{p},{q}": e.dim for (p, q), e in sorted(self.entries.items())}


def _compute_delta(f: FilteredMetricComplex, page: SpectralPage,
                   lifts: Mapping[tuple[int, int], np.ndarray] | None = None) -> dict:
    c = f.complex
    out = {}
    for (p, q), e in page.entries.items():
        tgt = page.entries.get((p + page.k, q + 1))
        if tgt is None or e.dim == 0 or tgt.dim == 0:
            continue
        lift = e.lift if lifts is None else lifts[(p, q)]
        image = c.dmat(q) @ lift
        out[(p, q)] = tgt.proj @ image
        if lifts is None:
            size = np.linalg.norm(tgt.proj, 2) * np.linalg.norm(c.dmat(q), 2) * np.linalg.norm(lift, 2)
            page.noise_scale = max(page.noise_scale, float(size))
    return out


def page_e0(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> SpectralPage:
    """``E_0^{p,q} = F_p C^q / F_{p+1} C^q`` realised on the orthogonal complement."""
    c = f.complex
    entries = {}
    for p in range(f.p_min, f.p_max + 1):
        for q in c.degrees:
            g = c.gram(q)
            w = g_complement(g, f.basis(p + 1, q), f.basis(p, q), tol) if c.dim(q) else np.zeros((0, 0))
            entries[(p, q)] = PageEntry(p, q, w, w, w.T @ g)
    page = SpectralPage(0, (f.p_min, f.p_max), c.degrees, entries)
    page.delta = _compute_delta(f, page)
    return page


def next_page(page: SpectralPage, f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> SpectralPage:
    """Harmonic subspace of each entry of ``page`` with the lift pushed one filtration step deeper."""
    c = f.complex
    k = page.k
    ranks = page.delta_ranks(tol)
    entries = {}
    for (p, q), e in page.entries.items():
        out_m = page.delta_from(p, q)
        in_m = page.delta_into(p, q)
        if e.dim == 0:
            rel = np.zeros((0, 0))
        else:
            rows = [m for m in (out_m, in_m.T) if m.shape[0]]
            r = page.delta_rank_from(ranks, p, q) + page.delta_rank_into(ranks, p, q)
            rel = null_space(np.vstack(rows), tol, rank=r) if rows else np.eye(e.dim)
        basis = e.basis @ rel
        proj = rel.T @ e.proj
        lift = e.lift @ rel
        if rel.shape[1] and c.dim(q + 1):
            lift = _deepen_lift(f, p, q, k, lift, tol)
        entries[(p, q)] = PageEntry(p, q, basis, lift, proj)
    new = SpectralPage(k + 1, page.p_range, page.degrees, entries)
    new.delta = _compute_delta(f, new)
    return new


def _deepen_lift(f: FilteredMetricComplex, p: int, q: int, k: int, lift: np.ndarray,
                 tol: Tolerance) -> np.ndarray:
    """Correct ``lift`` by elements of ``Z_{k-1}^{p+1}`` so that ``d(lift)`` lies in ``F_{p+k+1}``."""
    c = f.complex
    ann = f.annihilator(p + k + 1, q + 1, tol)
    if ann.shape[1] == 0:
        return lift
    d = c.dmat(q)
    rhs = ann.T @ d @ lift
    if np.linalg.norm(rhs) == 0.0:
        return lift
    zb = f.z_basis(p + 1, q, k - 1, tol) if k >= 1 else range_basis(f.basis(p + 1, q), tol)
    coef, res = solve_in_span(ann.T @ d @ zb, rhs, tol)
    scale = max(1.0, opnorm(d) * float(np.linalg.norm(lift)))
    if res * max(1.0, float(np.linalg.norm(rhs))) / scale > LIFT_RESIDUAL_TOL:
        raise InconsistentLiftError(
            f"page {k + 1} entry ({p},{q}): lift residual {res:.2e} exceeds {LIFT_RESIDUAL_TOL:.0e}"
        )
    if zb.shape[1] == 0:
        return lift
    return lift - zb @ coef


def page_e1(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> SpectralPage:
    """``E_1^{p,q} = H^q(F_p / F_{p+1})`` with the Hodge metric of the associated graded complex."""
    return next_page(page_e0(f, tol), f, tol)


def page_laplacian_log_det(page: SpectralPage, q: int, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``log det'`` of ``Δ_k^q = ⊕_p Δ_k^{p,q}``, block by block."""
    # entry coordinates are orthonormal, so ranks of the delta blocks are ranks of the maps
    ranks = page.delta_ranks(tol)
    total = 0.0
    for p in range(page.p_range[0], page.p_range[1] + 1):
        if page.dim(p, q):
            r = page.delta_rank_from(ranks, p, q) + page.delta_rank_into(ranks, p, q)
            total += laplacian_log_det_prime(page.delta_from(p, q), page.delta_into(p, q), r)
    return total


def rho_k(page: SpectralPage, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``1/2 sum_q (-1)^(q+1) q log det' Δ_k^q``."""
    total = 0.0
    for q in page.degrees:
        if q:
            total += (-1) ** (q + 1) * q * page_laplacian_log_det(page, q, tol)
    return 0.5 * total


# -- E_infinity versus the graded cohomology ---------------------------------


@dataclass
class GHCEntry:
    p: int
    q: int
    coords: np.ndarray      # orthonormal columns in harmonic coordinates of H^q
    harmonic: np.ndarray    # the same classes as harmonic cochains in C^q

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def metric(self) -> MetricSpace:
        return MetricSpace(np.eye(self.dim)) if self.dim else MetricSpace(np.zeros((0, 0)))


def ghc_metric(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[tuple[int, int], GHCEntry]:
    """``GHC^{p,q} = F_p H^q / F_{p+1} H^q`` with the subquotient of the Hodge metric.

    ``F_p H^q`` is the harmonic projection of the cocycles lying in ``F_p C^q``.
    """
    c = f.complex
    hodge = hodge_cohomology(c, tol)
    out = {}
    for q in c.degrees:
        u = hodge.harmonic[q]
        g = c.gram(q)
        b = u.shape[1]
        for p in range(f.p_min, f.p_max + 1):
            if b == 0:
                out[(p, q)] = GHCEntry(p, q, np.zeros((0, 0)), np.zeros((c.dim(q), 0)))
                continue
            hi = u.T @ g @ f.z_basis(p, q, None, tol)
            lo = u.T @ g @ f.z_basis(p + 1, q, None, tol)
            coords = g_complement(np.eye(b), range_basis(lo, tol), range_basis(hi, tol), tol)
            out[(p, q)] = GHCEntry(p, q, coords, u @ coords)
    return out


def ghc_to_einf(f: FilteredMetricComplex, einf: SpectralPage, ghc=None,
                tol: Tolerance = DEFAULT_TOLERANCE) -> dict[tuple[int, int], np.ndarray]:
    """Matrices of the canonical ``GHC^{p,q} -> E_inf^{p,q}`` in orthonormal coordinates.

    A class ``g`` is represented by a cocycle ``z in F_p`` whose harmonic part
    is ``g``; its image is the page class of ``z``.
    """
    c = f.complex
    ghc = ghc if ghc is not None else ghc_metric(f, tol)
    hodge = hodge_cohomology(c, tol)
    out = {}
    for (p, q), gh in ghc.items():
        e = einf.entries[(p, q)]
        if gh.dim != e.dim:
            raise SingularMapError(f"dim GHC^{p},{q} = {gh.dim} but dim E_inf^{p},{q} = {e.dim}")
        if gh.dim == 0:
            out[(p, q)] = np.zeros((0, 0))
            continue
        u = hodge.harmonic[q]
        zp = f.z_basis(p, q, None, tol)
        coef, res = solve_in_span(u.T @ c.gram(q) @ zp, gh.coords, tol)
        if res > LIFT_RESIDUAL_TOL:
            raise InconsistentLiftError(f"class in GHC^{p},{q} has no cocycle in F_{p}")
        out[(p, q)] = e.proj @ (zp @ coef)
    return out


def ghc_comparison(f: FilteredMetricComplex, einf: SpectralPage,
                   tol: Tolerance = DEFAULT_TOLERANCE) -> DetIsoVolume:
    """Log-volume of ``det E_inf -> det GHC``, alternating over total degree."""
    total = 0.0
    for (p, q), m in ghc_to_einf(f, einf, None, tol).items():
        if m.size == 0:
            continue
        sign, logdet = np.linalg.slogdet(m)
        if sign == 0:
            raise SingularMapError(f"GHC^{p},{q} -> E_inf is singular")
        total -= (-1) ** q * logdet
    return DetIsoVolume(total)


# -- driver --------------------------------------------------------------------


@dataclass
class SpectralResult:
    page0: SpectralPage
    pages: list[SpectralPage]
    rho: list[float]
    log_t_comb: float
    log_t_gc: float
    ghc_comparison: DetIsoVolume

    @property
    def e_inf(self) -> SpectralPage:
        return self.pages[-1]


def spectral_pages(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE):
    """``E_0`` and the pages ``E_1 ... E_K`` with ``K`` the filtration length (stable from there on)."""
    p0 = page_e0(f, tol)
    pages = [next_page(p0, f, tol)]
    while pages[-1].k < f.length:
        pages.append(next_page(pages[-1], f, tol))
    return p0, pages


def log_t_comb(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE) -> SpectralResult:
    p0, pages = spectral_pages(f, tol)
    rho = [rho_k(pg, tol) for pg in pages]
    if abs(rho[-1]) > 1e-10 or not pages[-1].is_stable():
        raise InconsistentLiftError("the final page is not stable")
    comparison = ghc_comparison(f, pages[-1], tol)
    return SpectralResult(p0, pages, rho, float(sum(rho)), rho_k(p0, tol), comparison)


def maumary_check(f: FilteredMetricComplex, tol: Tolerance = DEFAULT_TOLERANCE,
                  threshold: float = 1e-6, result: SpectralResult | None = None) -> CheckResult:
    """``log T_C = log T_GC + sum_k rho_k + log Vol(E_inf -> GHC)``."""
    res = result if result is not None else log_t_comb(f, tol)
    t_c = torsion_tc(f.complex, tol)
    residual = t_c - (res.log_t_gc + res.log_t_comb + res.ghc_comparison.log_vol)
    return residual_check("maumary", residual, threshold, "maumary_identity",
                          log_t_c=t_c, log_t_gc=res.log_t_gc, rho=list(res.rho),
                          log_t_comb=res.log_t_comb, ghc_comparison=res.ghc_comparison.log_vol)


# -- page invariants -----------------------------------------------------------


def delta_squared_residual(page: SpectralPage) -> float:
    worst = 0.0
    for (p, q) in page.entries:
        a = page.delta_from(p, q)
        b = page.delta_from(p + page.k, q + 1)
        if a.size and b.size:
            worst = max(worst, float(np.linalg.norm(b @ a)))
    return worst


def subquotient_agreement(page: SpectralPage, nxt: SpectralPage, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Worst discrepancy between the harmonic metric on ``nxt`` and the subquotient metric ``ker/img``.

    Both realise ``E_{k+1}^{p,q}``; the harmonic projection of the minimal-norm
    representatives must be isometric.
    """
    worst = 0.0
    ranks = page.delta_ranks(tol)
    for (p, q), e in page.entries.items():
        if e.dim == 0:
            continue
        out_m = page.delta_from(p, q)
        r_out = page.delta_rank_from(ranks, p, q)
        cycles = null_space(out_m, tol, rank=r_out) if out_m.shape[0] else np.eye(e.dim)
        bounds = range_basis(page.delta_into(p, q), tol, rank=page.delta_rank_into(ranks, p, q))
        space = MetricSpace.euclidean(e.dim)
        reps, _ = subquotient_representatives(space, cycles, bounds, tol)
        n = nxt.entries[(p, q)]
        if reps.shape[1] != n.dim:
            return float("inf")
        if n.dim == 0:
            continue
        # harmonic coordinates of the representatives inside the old entry
        rel = np.linalg.lstsq(e.basis, n.basis, rcond=None)[0]
        h = rel.T @ reps
        worst = max(worst, float(np.max(np.abs(h.T @ h - reps.T @ reps))))
    return worst


def lift_independence(f: FilteredMetricComplex, page: SpectralPage, rng: np.random.Generator,
                      tol: Tolerance = DEFAULT_TOLERANCE, scale: float = 1.0) -> float:
    """Perturb every lift by random elements of ``Z_{k-1}^{p+1} + d Z_{k-1}^{p-k+1}``; return the change in ``delta``."""
    c = f.complex
    k = page.k
    lifts = {}
    for (p, q), e in page.entries.items():
        extra = np.zeros_like(e.lift)
        if e.dim:
            z1 = f.z_basis(p + 1, q, k - 1, tol) if k >= 1 else range_basis(f.basis(p + 1, q), tol)
            if z1.shape[1]:
                extra = extra + z1 @ rng.uniform(-scale, scale, (z1.shape[1], e.dim))
            if q - 1 in c.degrees and k >= 1:
                z2 = f.z_basis(p - k + 1, q - 1, k - 1, tol)
                if z2.shape[1]:
                    extra = extra + c.dmat(q - 1) @ z2 @ rng.uniform(-scale, scale, (z2.shape[1], e.dim))
        lifts[(p, q)] = e.lift + extra
    alt = _compute_delta(f, page, lifts)
    worst = 0.0
    for key, m in page.delta.items():
        worst = max(worst, float(np.max(np.abs(alt[key] - m), initial=0.0)))
    return worst


def morse_chain_violations(dims_a: Mapping[int, int], dims_b: Mapping[int, int]) -> list[str]:
    """Strong Morse inequalities ``sum_{q>=q0} (-1)^(q-q0) b_q <= ... a_q`` for every ``q0``."""
    bad = []
    qs = sorted(set(dims_a) | set(dims_b))
    for q0 in qs:
        lhs = sum((-1) ** (q - q0) * dims_b.get(q, 0) for q in qs if q >= q0)
        rhs = sum((-1) ** (q - q0) * dims_a.get(q, 0) for q in qs if q >= q0)
        if lhs > rhs:
            bad.append(f"morse_inequality at q0={q0}: {lhs} > {rhs}")
    return bad


def page_invariants(f: FilteredMetricComplex, result: SpectralResult, rng: np.random.Generator | None = None,
                    tol: Tolerance = DEFAULT_TOLERANCE, threshold: float = 1e-8) -> list[CheckResult]:
    """Euler characteristic, Morse chains, ``δ² = 0``, subquotient agreement, lift independence."""
    c = f.complex
    chi = sum((-1) ** q * c.dim(q) for q in c.degrees)
    chain = [result.page0] + result.pages
    bad = [f"euler E_{pg.k}: {pg.euler_characteristic()} != {chi}"
           for pg in chain if pg.euler_characteristic() != chi]
    checks = [exact_check("page_euler", bad, chi=chi)]
    morse = []
    for a, b in zip(chain, chain[1:]):
        morse += [f"E_{b.k} vs E_{a.k}: {v}" for v in morse_chain_violations(a.dims_by_q(), b.dims_by_q())]
    betti = hodge_cohomology(c, tol).betti
    einf = result.pages[-1].dims_by_q()
    if einf != betti:
        morse.append(f"E_inf dims {einf} != betti {betti}")
    checks.append(exact_check("page_morse_chain", morse))
    dsq = max(delta_squared_residual(pg) for pg in chain)
    checks.append(residual_check("page_delta_squared", dsq, threshold, "delta_squared_zero"))
    sq = max(subquotient_agreement(a, b, tol) for a, b in zip(chain, chain[1:]))
    checks.append(residual_check("page_subquotient_metric", sq, threshold, "subquotient_agreement"))
    if rng is not None:
        li = max(lift_independence(f, pg, rng, tol) for pg in chain)
        checks.append(residual_check("page_lift_independence", li, threshold, "lift_independence"))
    return checks


def geometric_cohomology_metric(f: FilteredMetricComplex, einf: SpectralPage,
                                tol: Tolerance = DEFAULT_TOLERANCE) -> dict[int, np.ndarray]:
    """Scalar product on ``H^q`` (in orthonormal harmonic coordinates) transported from the stable page.

    ``H^q`` splits Hodge-orthogonally into the graded pieces ``GHC^{p,q}``;
    each piece gets the metric of its image in ``E_inf^{p,q}`` and distinct
    pieces are declared orthogonal.
    """
    ghc = ghc_metric(f, tol)
    mats = ghc_to_einf(f, einf, ghc, tol)
    hodge = hodge_cohomology(f.complex, tol)
    out = {q: np.zeros((b, b)) for q, b in hodge.betti.items()}
    for (p, q), gh in ghc.items():
        if gh.dim:
            m = mats[(p, q)]
            out[q] += gh.coords @ (m.T @ m) @ gh.coords.T
    return {q: 0.5 * (g + g.T) for q, g in out.items()}


def page_dims_from_ranks(f: FilteredMetricComplex, k: int, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[tuple[int, int], int]:
    """``dim E_k^{p,q}`` counted from ranks of ``Z`` and ``dZ`` spaces, without building any page."""
    c = f.complex

    def span(*blocks):
        cols = [b for b in blocks if b.shape[1]]
        return matrix_rank(np.hstack(cols), tol) if cols else 0

    out = {}
    for p in range(f.p_min, f.p_max + 1):
        for q in c.degrees:
            top = f.z_basis(p, q, k, tol)
            deeper = f.z_basis(p + 1, q, k - 1, tol)
            if q - 1 in c.degrees:
                bound = c.dmat(q - 1) @ f.z_basis(p - k + 1, q - 1, k - 1, tol)
            else:
                bound = np.zeros((c.dim(q), 0))
            out[(p, q)] = span(top, deeper) - span(deeper, bound)
    return out
