"""Combinatorial Morse-Bott complexes: critical components glued by instanton operators.

A model is a list of components ``(label, index p_i, A_i)`` where ``A_i`` is a
small metric complex graded by component degree, together with instanton
blocks ``u_ij^(k): A_j^k -> A_i^{k - (p_i - p_j - 1)}`` for ``p_i > p_j``.  The
total complex is ``C^q = ⊕_i A_i^{q - p_i}`` with differential
``δ = d + u A`` where ``A`` is ``(-1)^k`` on component degree ``k``, and the
filtration ``F_p = ⊕_{p_i >= p}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .complexes import (
    GradedMetricComplex,
    d_squared_residuals,
    euler_characteristic,
    hodge_cohomology,
)
from .detline import det_iso_c_hc, vol_det_graded_map
from .errors import InvalidInstantonError, ModelError, ValidationError
from .numeric import DEFAULT_TOLERANCE, LinearMapRep, MetricSpace, Tolerance, matrix_rank
from .report import CheckResult, exact_check, residual_check
from .spectral import (
    FilteredMetricComplex,
    SpectralResult,
    log_t_comb,
    morse_chain_violations,
    geometric_cohomology_metric,
    page_e1,
    validate_filtration,
)

INSTANTON_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Component:
    label: str
    index: int
    complex: GradedMetricComplex

    def dim(self, k: int) -> int:
        return self.complex.dim(k)


@dataclass(eq=False)
class MorseBottModel:
    """Components plus instantons ``instantons[(i, j)][k]`` (target ``i``, source ``j``, source degree ``k``)."""

    components: list[Component]
    instantons: dict[tuple[int, int], dict[int, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.components:
            raise ModelError("a model needs at least one component")
        for c in self.components:
            if c.index < 0:
                raise ModelError(f"component {c.label!r} has negative index")
        clean = {}
        for (i, j), blocks in self.instantons.items():
            ci, cj = self.components[i], self.components[j]
            shift = ci.index - cj.index - 1
            for k, m in blocks.items():
                m = np.asarray(m, dtype=float)
                if m.size and np.any(m != 0) and ci.index <= cj.index:
                    raise ModelError(
                        f"instanton {cj.label!r} -> {ci.label!r} must raise the index "
                        f"({cj.index} -> {ci.index})"
                    )
                rows, cols = ci.dim(k - shift), cj.dim(k)
                if m.size != rows * cols:
                    raise ModelError(
                        f"instanton {cj.label!r} -> {ci.label!r} in degree {k}: expected "
                        f"{rows}x{cols} (degree shift {shift}), got shape {m.shape}"
                    )
                clean.setdefault((i, j), {})[int(k)] = m.reshape(rows, cols)
        self.instantons = clean

    def shift(self, i: int, j: int) -> int:
        return self.components[i].index - self.components[j].index - 1

    @property
    def indices(self) -> list[int]:
        return [c.index for c in self.components]

    def is_morse_smale(self) -> bool:
        return all(c.complex.dims == (c.complex.dim(0),) and c.complex.q_min == 0
                   for c in self.components)


@dataclass(eq=False)
class GeometricComplex:
    model: MorseBottModel
    total: FilteredMetricComplex
    # offsets[q][i] = (start, size) of A_i^{q - p_i} inside C^q
    offsets: dict[int, dict[int, tuple[int, int]]]

    @property
    def complex(self) -> GradedMetricComplex:
        return self.total.complex


def _layout(m: MorseBottModel):
    lo = min(c.index + c.complex.q_min for c in m.components)
    hi = max(c.index + c.complex.q_max for c in m.components)
    offsets: dict[int, dict[int, tuple[int, int]]] = {}
    for q in range(lo, hi + 1):
        o = 0
        offsets[q] = {}
        for i, c in enumerate(m.components):
            n = c.dim(q - c.index)
            offsets[q][i] = (o, n)
            o += n
    return lo, hi, offsets


def assemble(m: MorseBottModel, sign: str = "component", check: bool = True) -> GeometricComplex:
    """Total complex ``δ = d + uA`` with the index filtration.

    ``sign`` selects what ``A`` acts by: ``"component"`` (component degree,
    the correct rule) or ``"total"`` (total degree, kept only to demonstrate
    that it breaks ``δ² = 0``).
    """
    lo, hi, offsets = _layout(m)
    size = {q: sum(n for _, n in offsets[q].values()) for q in offsets}
    grams, diffs = [], []
    for q in range(lo, hi + 1):
        g = np.zeros((size[q], size[q]))
        for i, c in enumerate(m.components):
            o, n = offsets[q][i]
            if n:
                g[o:o + n, o:o + n] = c.complex.gram(q - c.index)
        grams.append(g)
    for q in range(lo, hi):
        d = np.zeros((size[q + 1], size[q]))
        for i, c in enumerate(m.components):
            o_s, n_s = offsets[q][i]
            o_t, n_t = offsets[q + 1][i]
            if n_s and n_t:
                d[o_t:o_t + n_t, o_s:o_s + n_s] = c.complex.dmat(q - c.index)
        for (i, j), blocks in m.instantons.items():
            cj = m.components[j]
            k = q - cj.index
            blk = blocks.get(k)
            if blk is None or blk.size == 0:
                continue
            o_s, n_s = offsets[q][j]
            o_t, n_t = offsets[q + 1][i]
            sgn = (-1) ** k if sign == "component" else (-1) ** q
            d[o_t:o_t + n_t, o_s:o_s + n_s] += sgn * blk
        diffs.append(d)
    total = GradedMetricComplex.from_matrices(grams, diffs, lo)
    if check:
        res = d_squared_residuals(total)
        worst = max(res.values(), default=0.0)
        if worst > INSTANTON_TOL:
            q = max(res, key=res.get)
            raise InvalidInstantonError(
                f"δ² != 0 from degree {q}; the instantons violate u d = d u + u A u", worst
            )
    index = {q: [] for q in range(lo, hi + 1)}
    for q in range(lo, hi + 1):
        for i, c in enumerate(m.components):
            index[q] += [c.index] * offsets[q][i][1]
    p_lo = min(m.indices)
    p_hi = max(m.indices)
    filt = FilteredMetricComplex.from_coordinate_levels(total, index, p_lo, p_hi)
    g = GeometricComplex(m, filt, offsets)
    if check:
        rep = validate_filtration(filt)
        if not rep.passed:
            raise ModelError("assembled filtration invalid: " + "; ".join(rep.violations))
    return g


def block_structure_violations(g: GeometricComplex, tol: float = 0.0) -> list[str]:
    """Blocks of ``δ`` that must vanish identically: into components of lower or equal index (other than the diagonal)."""
    bad = []
    c = g.complex
    comps = g.model.components
    for q in range(c.q_min, c.q_max):
        d = c.dmat(q)
        for j, cj in enumerate(comps):
            o_s, n_s = g.offsets[q][j]
            for i, ci in enumerate(comps):
                if i == j or ci.index > cj.index:
                    continue
                o_t, n_t = g.offsets[q + 1][i]
                if n_s and n_t and np.max(np.abs(d[o_t:o_t + n_t, o_s:o_s + n_s])) > tol:
                    bad.append(f"filtration: block {cj.label}->{ci.label} in degree {q} is non-zero")
    return bad


# -- structural checks ---------------------------------------------------------


def component_betti(m: MorseBottModel, tol: Tolerance = DEFAULT_TOLERANCE) -> list[dict[int, int]]:
    return [hodge_cohomology(c.complex, tol).betti for c in m.components]


def e1_identification(g: GeometricComplex, tol: Tolerance = DEFAULT_TOLERANCE, page=None) -> CheckResult:
    """``dim E_1^{p,q} = sum_{p_i = p} b^{q-p}(A_i)`` for every entry."""
    e1 = page if page is not None else page_e1(g.total, tol)
    betti = component_betti(g.model, tol)
    bad = []
    table = {}
    for (p, q), e in sorted(e1.entries.items()):
        want = sum(b.get(q - p, 0) for b, c in zip(betti, g.model.components) if c.index == p)
        table[f"{p},{q}"] = e.dim
        if e.dim != want:
            bad.append(f"e1_dimension at ({p},{q}): {e.dim} != {want}")
    return exact_check("e1_identification", bad, e1_dims=table)


def euler_identity_check(g: GeometricComplex, integration: "IntegrationMap | None" = None,
                         tol: Tolerance = DEFAULT_TOLERANCE) -> CheckResult:
    """``χ = sum_p (-1)^p sum_{p_i = p} χ(A_i)``, with ``χ`` from the ambient complex when given."""
    chi = euler_characteristic(integration.ambient, tol) if integration else euler_characteristic(g.complex, tol)
    rhs = sum((-1) ** c.index * euler_characteristic(c.complex, tol) for c in g.model.components)
    bad = [] if chi == rhs else [f"euler_identity: {chi} != {rhs}"]
    return exact_check("euler_identity", bad, chi=chi, chi_components=rhs)


def morse_inequalities_check(g: GeometricComplex, integration: "IntegrationMap | None" = None,
                             tol: Tolerance = DEFAULT_TOLERANCE) -> CheckResult:
    src = integration.ambient if integration else g.complex
    b = hodge_cohomology(src, tol).betti
    rhs: dict[int, int] = {}
    for c, bc in zip(g.model.components, component_betti(g.model, tol)):
        for k, n in bc.items():
            rhs[k + c.index] = rhs.get(k + c.index, 0) + n
    bad = morse_chain_violations(rhs, b)
    return exact_check("morse_inequalities", bad, betti=b, component_betti=rhs)


def morse_smale_check(g: GeometricComplex, result: SpectralResult | None = None,
                      tol: Tolerance = DEFAULT_TOLERANCE, threshold: float = 1e-10) -> CheckResult:
    """Point components: ``E_1`` lives on the diagonal ``q = p`` and ``δ_k = 0`` for ``k >= 2``."""
    if not g.model.is_morse_smale():
        raise ModelError("not a Morse-Smale model: some component is not a point")
    res = result if result is not None else log_t_comb(g.total, tol)
    bad = []
    for (p, q), e in res.pages[0].entries.items():
        if q != p and e.dim:
            bad.append(f"e1_off_diagonal at ({p},{q})")
    worst = 0.0
    for pg in res.pages[1:]:
        for m in pg.delta.values():
            if m.size:
                worst = max(worst, float(np.max(np.abs(m))))
    if worst > threshold:
        bad.append(f"higher_differential: max |δ_k| = {worst:.2e} for k >= 2")
    return exact_check("morse_smale", bad, worst_higher_delta=worst)


# -- integration maps and metric torsion -----------------------------------------


@dataclass(eq=False)
class IntegrationMap:
    """Per-degree chain map ``ambient -> total`` (matrices keyed by degree)."""

    ambient: GradedMetricComplex
    target: GradedMetricComplex
    maps: dict[int, np.ndarray]

    def __post_init__(self):
        lo = min(self.ambient.q_min, self.target.q_min)
        hi = max(self.ambient.q_max, self.target.q_max)
        clean = {}
        for q in range(lo, hi + 1):
            m = np.asarray(self.maps.get(q, np.zeros((0, 0))), dtype=float)
            shape = (self.target.dim(q), self.ambient.dim(q))
            if m.size == 0:
                m = np.zeros(shape)
            if m.shape != shape:
                raise ValidationError("integration_shape", f"degree {q}: expected {shape}, got {m.shape}")
            clean[q] = m
        self.maps = clean

    @property
    def degrees(self) -> range:
        return range(min(self.maps), max(self.maps) + 1)

    def chain_residual(self) -> float:
        worst = 0.0
        for q in self.degrees:
            if q + 1 not in self.maps:
                continue
            lhs = self.maps[q + 1] @ self.ambient.dmat(q)
            rhs = self.target.dmat(q) @ self.maps[q]
            if lhs.size:
                scale = max(1.0, float(np.linalg.norm(self.maps[q + 1]) * np.linalg.norm(self.ambient.dmat(q))),
                            float(np.linalg.norm(self.target.dmat(q)) * np.linalg.norm(self.maps[q])))
                worst = max(worst, float(np.linalg.norm(lhs - rhs)) / scale)
        return worst

    def cohomology_matrices(self, tol: Tolerance = DEFAULT_TOLERANCE) -> dict[int, np.ndarray]:
        """``H(i)`` in orthonormal harmonic coordinates on both sides."""
        ha = hodge_cohomology(self.ambient, tol)
        ht = hodge_cohomology(self.target, tol)
        out = {}
        for q in self.degrees:
            ua = ha.harmonic.get(q, np.zeros((self.ambient.dim(q), 0)))
            ut = ht.harmonic.get(q, np.zeros((self.target.dim(q), 0)))
            if ua.shape[1] == 0 or ut.shape[1] == 0:
                out[q] = np.zeros((ut.shape[1], ua.shape[1]))
            else:
                out[q] = ut.T @ self.target.gram(q) @ self.maps[q] @ ua
        return out

    def validate(self, tol: Tolerance = DEFAULT_TOLERANCE, threshold: float = 1e-8) -> CheckResult:
        bad = []
        r = self.chain_residual()
        if r > threshold:
            bad.append("chain_map")
        for q, m in self.cohomology_matrices(tol).items():
            if m.shape[0] != m.shape[1] or (m.size and matrix_rank(m, tol) != m.shape[0]):
                bad.append(f"quasi_isomorphism at degree {q}")
        return CheckResult("integration_map", not bad, r, threshold, "", bad)

    def require_valid(self, tol: Tolerance = DEFAULT_TOLERANCE) -> None:
        rep = self.validate(tol)
        if not rep.passed:
            raise ValidationError(rep.violations[0], "integration map is not a quasi-isomorphism"
                                  if rep.violations[0] != "chain_map" else "Int d != δ Int", rep.residual)


def metric_torsion(g: GeometricComplex | GradedMetricComplex, i: IntegrationMap,
                   tol: Tolerance = DEFAULT_TOLERANCE, scalar_product: str = "hodge",
                   result: SpectralResult | None = None) -> float:
    """``log Vol`` of ``det H(i)``.

    With ``scalar_product="hodge"`` both sides carry Hodge metrics.  With
    ``"geometric"`` the cohomology of the total complex carries the metric
    transported from the stable page (block-orthogonal over the graded
    pieces), which adds the page comparison term.
    """
    i.require_valid(tol)
    mats = i.cohomology_matrices(tol)
    if scalar_product == "hodge":
        targets = {q: np.eye(m.shape[0]) for q, m in mats.items()}
    elif scalar_product == "geometric":
        if not isinstance(g, GeometricComplex):
            raise ValueError("the geometric scalar product needs the filtration")
        res = result if result is not None else log_t_comb(g.total, tol)
        targets = geometric_cohomology_metric(g.total, res.e_inf, tol)
    else:
        raise ValueError(f"unknown scalar product {scalar_product!r}")
    phi = {}
    for q, m in mats.items():
        tgt = MetricSpace(targets.get(q, np.eye(m.shape[0]))) if m.shape[0] else MetricSpace(np.zeros((0, 0)))
        phi[q] = LinearMapRep(MetricSpace.euclidean(m.shape[1]), tgt, m)
    return vol_det_graded_map(phi, tol).log_vol


def geometric_torsion_ledger(g: GeometricComplex, i: IntegrationMap, tol: Tolerance = DEFAULT_TOLERANCE,
                             threshold: float = 1e-6) -> CheckResult:
    """Both routes from ``det H(ambient)`` to ``⊗_i det H(A_i)^{(-1)^{p_i}}``.

    Through the complexes: ``det Int``, then ``det HC = det C`` on the total
    complex, the orthogonal splitting ``det C = ⊗ det A_i^{±}`` and
    ``det A_i = det H(A_i)``.  Through the spectral sequence: the geometric
    metric torsion, then the pages down to ``E_1 = ⊕ H(A_i)``.
    """
    res = log_t_comb(g.total, tol)
    t_met = metric_torsion(g, i, tol)
    t_met_geo = metric_torsion(g, i, tol, "geometric", res)
    t_total = det_iso_c_hc(g.complex, tol).log_vol
    t_parts = [det_iso_c_hc(c.complex, tol).log_vol for c in g.model.components]
    split = sum((-1) ** c.index * t for c, t in zip(g.model.components, t_parts))
    route_complex = t_met - t_total + split
    route_pages = t_met_geo - res.log_t_comb
    e17 = res.log_t_gc - split
    transport = t_met_geo - (t_met - res.ghc_comparison.log_vol)
    residual = max(route_complex - route_pages, e17, transport, key=abs)
    return residual_check("geometric_torsion_ledger", residual, threshold, "ledger_consistency",
                          log_t_met=t_met, log_t_met_geometric=t_met_geo, log_t_comb=res.log_t_comb,
                          rho=list(res.rho), ghc_comparison=res.ghc_comparison.log_vol,
                          log_t_gc=res.log_t_gc, log_t_components=split, log_t_total=t_total,
                          route_complex=route_complex, route_pages=route_pages)


def model_from_blocks(components: Sequence[tuple[str, int, GradedMetricComplex]],
                      instantons: Mapping[tuple[int, int], Mapping[int, np.ndarray]] | None = None) -> MorseBottModel:
    return MorseBottModel([Component(l, p, c) for l, p, c in components],
                          {k: dict(v) for k, v in (instantons or {}).items()})


def point(gram: float = 1.0) -> GradedMetricComplex:
    """A point component: one-dimensional in degree 0."""
    return GradedMetricComplex.from_matrices([[[gram]]], [])
