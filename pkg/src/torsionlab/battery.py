"""Seeded check battery run by ``torsionlab suite``.

Each family draws its own instance from a seed and returns check results;
``run_suite`` aggregates them per check name.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bundles, generate
from .complexes import torsion_from_volumes, torsion_log_sum, torsion_tc
from .detline import det_iso_c_hc, ses_torsion_check
from .geomcx import (
    assemble,
    e1_identification,
    euler_identity_check,
    geometric_torsion_ledger,
    morse_inequalities_check,
    morse_smale_check,
)
from .io import dumps, loads, to_document
from .numeric import DEFAULT_TOLERANCE, Tolerance
from .report import CheckResult, exact_check, residual_check
from .spectral import log_t_comb, maumary_check, page_dims_from_ranks, page_invariants

# Residual thresholds per check.
THRESHOLDS = {
    "torsion_formulas": 1e-8,
    "det_iso": 1e-7,
    "ses_multiplicativity": 1e-6,
    "maumary": 1e-6,
    "page_delta_squared": 1e-8,
    "page_subquotient_metric": 1e-8,
    "page_lift_independence": 1e-8,
    "wang": 1e-6,
    "gysin": 1e-6,
    "mapping_torus": 1e-8,
    "geometric_torsion_ledger": 1e-6,
    "lst_ledger": 1e-6,
}


def _thr(name: str, override: float | None) -> float:
    return override if override is not None else THRESHOLDS[name]


def torsion_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    c = generate.random_complex(seed)
    a, b, v = torsion_tc(c, tol), torsion_log_sum(c, tol), torsion_from_volumes(c, tol)
    r = max(a - b, a - v, key=abs)
    out = [residual_check("torsion_formulas", r, _thr("torsion_formulas", thr), "torsion_formula_agreement",
                          log_t=a)]
    d = det_iso_c_hc(c, tol).log_vol
    out.append(residual_check("det_iso", d - a, _thr("det_iso", thr), "det_iso_equals_torsion"))
    return out


def ses_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    s = generate.random_ses(seed)
    rep = ses_torsion_check(s.c0, s.c1, s.c2, s.incl, s.proj, tol, _thr("ses_multiplicativity", thr))
    return [residual_check("ses_multiplicativity", rep.residual, _thr("ses_multiplicativity", thr),
                           "ses_multiplicativity", log_t_les=rep.log_t_les)]


def spectral_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    f = generate.random_filtered(seed)
    res = log_t_comb(f, tol)
    out = [maumary_check(f, tol, _thr("maumary", thr), res)]
    bad = []
    for pg in res.pages:
        want = page_dims_from_ranks(f, pg.k, tol)
        got = {key: pg.dim(*key) for key in want}
        bad += [f"E_{pg.k}{key}: {got[key]} != {want[key]}" for key in want if got[key] != want[key]]
    out.append(exact_check("page_dims", bad))
    rng = generate.rng_for("filtered", seed + 1)
    out += page_invariants(f, res, rng, tol, _thr("page_lift_independence", thr))
    return out


def geometric_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    model, g, integ = generate.random_geometric_instance(seed)
    out = [e1_identification(g, tol), euler_identity_check(g, integ, tol),
           morse_inequalities_check(g, integ, tol)]
    ms = assemble(generate.random_morse_bott(seed, morse_smale=True))
    out.append(morse_smale_check(ms, tol=tol))
    out.append(geometric_torsion_ledger(g, integ, tol, _thr("geometric_torsion_ledger", thr)))
    return out


def bundle_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    m, n, integ = generate.random_wang(seed)
    w = bundles.WangData(m, n, integ)
    out = [bundles.wes_check(w, tol, _thr("wang", thr))]
    m, n, integ = generate.random_gysin(seed)
    gd = bundles.GysinData(m, n, integ)
    out.append(bundles.ges_check(gd, tol, _thr("gysin", thr)))
    out.append(bundles.leray_serre_e1(bundles.BundleModel(m), tol, strict=False))
    phi = generate.random_monodromy(seed)
    mt = bundles.WangData(bundles.mapping_torus(phi).model, 1)
    seq = bundles.build_sequence(mt, tol)
    out.append(residual_check("mapping_torus", seq.log_t - bundles.mapping_torus_oracle(phi),
                              _thr("mapping_torus", thr), "monodromy_closed_form", log_t_w=seq.log_t))
    rng = generate.rng_for("bundle", seed)
    b = bundles.BundleModel(m)
    inputs = bundles.consistent_ledger_inputs(b, rng, float(rng.uniform(-1, 1)), tol=tol)
    out.append(bundles.lst_ledger(b, inputs, tol, _thr("lst_ledger", thr)))
    return out


def plumbing_family(seed: int, tol: Tolerance, thr: float | None = None) -> list[CheckResult]:
    bad = []
    for kind, make in (("complex", lambda: generate.random_complex(seed)),
                       ("filtered", lambda: generate.random_filtered(seed)),
                       ("morse_bott", lambda: generate.random_morse_bott(seed))):
        text = dumps(to_document(make()))
        if dumps(to_document(make())) != text:
            bad.append(f"generator_determinism: {kind}")
        if dumps(to_document(loads(text).model)) != text:
            bad.append(f"round_trip: {kind}")
    m, n, integ = generate.random_wang(seed)
    text = dumps(to_document(bundles.WangData(m, n, integ)))
    if dumps(to_document(loads(text).model)) != text:
        bad.append("round_trip: wang")
    return [exact_check("plumbing", bad)]


FAMILIES: dict[str, Callable[[int, Tolerance, float | None], list[CheckResult]]] = {
    "torsion": torsion_family,
    "ses": ses_family,
    "spectral": spectral_family,
    "geometric": geometric_family,
    "bundles": bundle_family,
    "plumbing": plumbing_family,
}


def run_family(name: str, seed: int, tol: Tolerance, thr: float | None) -> list[CheckResult]:
    try:
        return FAMILIES[name](seed, tol, thr)
    except Exception as e:  # a crash is a failed check, not a crashed suite
        return [CheckResult(f"{name}_family", False, float("nan"), 0.0, type(e).__name__, [str(e)])]


@dataclass
class SuiteResult:
    checks: list[CheckResult]
    residuals: dict[str, list[float]] = field(default_factory=dict)
    elapsed: float = 0.0


def run_suite(seeds: int, first_seed: int = 0, tol: Tolerance = DEFAULT_TOLERANCE,
              threshold: float | None = None, families: list[str] | None = None) -> SuiteResult:
    """Every family on seeds ``first_seed ... first_seed + seeds - 1``, aggregated per check name."""
    t0 = time.perf_counter()
    per_name: dict[str, list[tuple[int, CheckResult]]] = {}
    for name in families or list(FAMILIES):
        for seed in range(first_seed, first_seed + seeds):
            for c in run_family(name, seed, tol, threshold):
                per_name.setdefault(c.name, []).append((seed, c))
    checks, residuals = [], {}
    for name in sorted(per_name):
        items = sorted(per_name[name], key=lambda sc: sc[0])
        failed = [(s, c) for s, c in items if not c.passed]
        vals = [c.residual for _, c in items]
        finite = [abs(v) for v in vals if np.isfinite(v)]
        worst = max(finite, default=0.0) if len(finite) == len(vals) else float("nan")
        tolerance = items[0][1].tolerance
        if any(c.tolerance for _, c in items):
            residuals[name] = vals
        violations = [f"seed {s}: {'; '.join(c.violations) or c.invariant}" for s, c in failed]
        checks.append(CheckResult(name, not failed, worst, tolerance,
                                  failed[0][1].invariant if failed else "", violations,
                                  {"instances": len(items), "failures": len(failed)}))
    return SuiteResult(checks, residuals, time.perf_counter() - t0)
