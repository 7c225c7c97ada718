"""Command line: ``torsionlab <command> [FILE] [options]``.

Without FILE the command runs on a generated instance chosen by ``--seed``.
Exit status is 0 when every check passes, 1 on a failed check and 2 on a
usage or parse error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bundles, generate
from .battery import run_suite
from .complexes import (
    betti_by_rank,
    euler_characteristic,
    hodge_cohomology,
    laplacian,
    torsion_from_volumes,
    torsion_log_sum,
    torsion_tc,
    validate_complex,
)
from .detline import det_iso_c_hc
from .errors import DocumentError, TorsionLabError
from .geomcx import (
    GeometricComplex,
    IntegrationMap,
    MorseBottModel,
    assemble,
    e1_identification,
    euler_identity_check,
    geometric_torsion_ledger,
    metric_torsion,
    morse_inequalities_check,
    morse_smale_check,
)
from .io import Document, KINDS, dumps, ingest, to_document
from .numeric import DEFAULT_TOLERANCE, Tolerance
from .report import CheckResult, exact_check, residual_check
from .spectral import (
    FilteredMetricComplex,
    log_t_comb,
    maumary_check,
    page_dims_from_ranks,
    page_invariants,
    validate_filtration,
)

COMMANDS = ("validate", "cohomology", "torsion", "spectral", "geomcx", "wang", "gysin", "ledger", "suite",
            "generate")
DEFAULT_KIND = {"validate": "complex", "cohomology": "complex", "torsion": "complex", "spectral": "filtered",
                "geomcx": "morse_bott", "wang": "wang", "gysin": "gysin", "ledger": "morse_bott"}


class UsageError(Exception):
    pass


# -- instances ---------------------------------------------------------------------


def generated(kind: str, seed: int) -> Document:
    if kind == "complex":
        return Document(kind, generate.random_complex(seed))
    if kind == "filtered":
        return Document(kind, generate.random_filtered(seed))
    if kind == "morse_bott":
        model, _, integ = generate.random_geometric_instance(seed)
        return Document(kind, model, integration=integ)
    if kind == "bundle":
        model, _, _ = generate.random_gysin(seed)
        return Document(kind, bundles.BundleModel(model))
    if kind == "wang":
        m, n, integ = generate.random_wang(seed)
        return Document(kind, bundles.WangData(m, n, integ), integration=integ, n=n)
    if kind == "gysin":
        m, n, integ = generate.random_gysin(seed)
        return Document(kind, bundles.GysinData(m, n, integ), integration=integ, n=n)
    raise UsageError(f"unknown kind {kind!r}")


def _morse_bott(doc: Document) -> MorseBottModel:
    m = doc.model
    if isinstance(m, bundles.BundleModel):
        return m.model
    if isinstance(m, bundles.SequenceData):
        return m.model
    if isinstance(m, MorseBottModel):
        return m
    raise UsageError(f"a {doc.kind} document has no Morse-Bott model")


def _complex(doc: Document):
    m = doc.model
    if isinstance(m, FilteredMetricComplex):
        return m.complex
    if doc.kind == "complex":
        return m
    return assemble(_morse_bott(doc)).complex


def _filtered(doc: Document) -> FilteredMetricComplex:
    if isinstance(doc.model, FilteredMetricComplex):
        return doc.model
    if doc.kind == "complex":
        return FilteredMetricComplex.trivial(doc.model)
    return assemble(_morse_bott(doc)).total


def _identity_integration(g: GeometricComplex) -> IntegrationMap:
    c = g.complex
    return IntegrationMap(c, c, {q: np.eye(c.dim(q)) for q in c.degrees})


# -- commands ------------------------------------------------------------------------


def cmd_validate(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    c = _complex(doc)
    rep = validate_complex(c)
    out = [exact_check("complex", rep.violations, worst_d_squared=rep.worst)]
    if doc.kind == "filtered":
        out.append(validate_filtration(doc.model, tol))
    if doc.kind not in ("complex", "filtered"):
        g = assemble(_morse_bott(doc))
        out.append(validate_filtration(g.total, tol))
        if doc.integration is not None:
            out.append(doc.integration.validate(tol))
        if doc.kind == "bundle":
            out.append(bundles.leray_serre_e1(doc.model, tol, strict=False))
        if doc.kind in ("wang", "gysin"):
            out.append(bundles.page_sparsity(doc.model, log_t_comb(g.total, tol)))
    return out


def cmd_cohomology(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    c = _complex(doc)
    h = hodge_cohomology(c, tol)
    by_rank = betti_by_rank(c, tol)
    bad = [f"betti at degree {q}: hodge {h.betti[q]} != rank count {by_rank[q]}"
           for q in c.degrees if h.betti[q] != by_rank[q]]
    harm = 0.0
    for q, u in h.harmonic.items():
        if u.shape[1]:
            harm = max(harm, float(np.max(np.abs(laplacian(c, q).matrix @ u))))
    chi = euler_characteristic(c, tol)
    chi_c = sum((-1) ** q * c.dim(q) for q in c.degrees)
    if chi != chi_c:
        bad.append(f"euler: chi(HC) {chi} != chi(C) {chi_c}")
    return [exact_check("betti", bad, betti=h.betti, dims=list(c.dims), euler_characteristic=chi),
            residual_check("harmonic", harm, tol.compare_tol, "harmonic_in_kernel")]


def cmd_torsion(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    c = _complex(doc)
    a, b, v = torsion_tc(c, tol), torsion_log_sum(c, tol), torsion_from_volumes(c, tol)
    d = det_iso_c_hc(c, tol).log_vol
    return [residual_check("torsion_formulas", max(a - b, a - v, key=abs), tol.compare_tol,
                           "torsion_formula_agreement", log_t=a, log_t_laplacian=b, log_t_volumes=v),
            residual_check("det_iso", d - a, tol.compare_tol, "det_iso_equals_torsion", log_vol=d)]


def cmd_spectral(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    f = _filtered(doc)
    res = log_t_comb(f, tol)
    out = [maumary_check(f, tol, tol.compare_tol, res)]
    out[0].quantities["pages"] = {f"E_{pg.k}": pg.dims_table() for pg in res.pages}
    bad = []
    for pg in res.pages:
        want = page_dims_from_ranks(f, pg.k, tol)
        bad += [f"E_{pg.k}{key}: {pg.dim(*key)} != {n}" for key, n in sorted(want.items()) if pg.dim(*key) != n]
    out.append(exact_check("page_dims", bad))
    out += page_invariants(f, res, generate.rng_for("filtered", args.seed), tol, tol.compare_tol)
    if args.figures:
        from .plotting import plot_pages

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plot_pages(res.pages, Path(args.figures) / "pages.png")
    return out


def cmd_geomcx(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    m = _morse_bott(doc)
    g = assemble(m)
    integ = doc.integration or _identity_integration(g)
    res = log_t_comb(g.total, tol)
    out = [e1_identification(g, tol, res.pages[0]), euler_identity_check(g, integ, tol),
           morse_inequalities_check(g, integ, tol)]
    if m.is_morse_smale():
        out.append(morse_smale_check(g, res, tol))
    out.append(geometric_torsion_ledger(g, integ, tol, tol.compare_tol))
    out[-1].quantities["log_t_met"] = metric_torsion(g, integ, tol)
    if args.figures:
        from .plotting import plot_pages

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plot_pages(res.pages, Path(args.figures) / "pages.png")
    return out


def _sequence(doc: Document, kind: str, tol: Tolerance, args) -> list[CheckResult]:
    if doc.kind != kind:
        raise UsageError(f"the {kind} command needs a {kind} document, got {doc.kind!r}")
    data = doc.model
    res = log_t_comb(data.geometric.total, tol)
    out = [bundles.page_sparsity(data, res)]
    check = bundles.wes_check if kind == "wang" else bundles.ges_check
    out.append(check(data, tol, tol.compare_tol))
    out.append(bundles.leray_serre_e1(bundles.BundleModel(data.model), tol, strict=False, result=res))
    if args.figures:
        from .plotting import plot_pages

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plot_pages(res.pages, Path(args.figures) / "pages.png")
    return out


def cmd_ledger(doc: Document, tol: Tolerance, args) -> list[CheckResult]:
    out = [bundles.term_cancellation_check()]
    m = _morse_bott(doc)
    if doc.kind == "morse_bott":
        g = assemble(m)
        out.append(geometric_torsion_ledger(g, doc.integration or _identity_integration(g), tol,
                                            tol.compare_tol))
        return out
    b = doc.model if isinstance(doc.model, bundles.BundleModel) else bundles.BundleModel(m)
    if args.inputs:
        try:
            inputs = json.loads(Path(args.inputs).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DocumentError(f"parse error: {e.msg}", line=e.lineno, column=e.colno) from None
    else:
        rng = generate.rng_for("bundle", args.seed)
        inputs = bundles.consistent_ledger_inputs(b, rng, float(rng.uniform(-1, 1)), tol=tol)
    out.append(bundles.lst_ledger(b, inputs, tol, tol.compare_tol))
    return out


HANDLERS = {"validate": cmd_validate, "cohomology": cmd_cohomology, "torsion": cmd_torsion,
            "spectral": cmd_spectral, "geomcx": cmd_geomcx, "wang": lambda d, t, a: _sequence(d, "wang", t, a),
            "gysin": lambda d, t, a: _sequence(d, "gysin", t, a), "ledger": cmd_ledger}


# -- reports ---------------------------------------------------------------------------


def plain(x: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return f"{x + 0.0:.6e}" if x == x else "nan"
    if isinstance(x, list):
        return ",".join(_fmt(v) for v in x)
    return str(x)


def _flatten(prefix: str, x: Any, out: list[tuple[str, str]]):
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out.append((prefix, _fmt(x)))


def render_text(command: str, checks: Sequence[CheckResult]) -> str:
    lines = ["check\tstatus\tresidual\ttolerance\tinvariant"]
    for c in checks:
        lines.append("\t".join([c.name, c.status, _fmt(float(c.residual)), _fmt(float(c.tolerance)),
                                c.invariant if not c.passed else ""]))
    for c in checks:
        for v in c.violations:
            lines.append(f"violation\t{c.name}\t{v}")
    q_lines = []
    for c in checks:
        flat: list[tuple[str, str]] = []
        _flatten("", plain(c.quantities), flat)
        q_lines += [f"quantity\t{c.name}\t{k}\t{v}" for k, v in flat]
    lines += q_lines
    ok = all(c.passed for c in checks)
    lines.append(f"summary\t{command}\t{'PASS' if ok else 'FAIL'}\t{sum(c.passed for c in checks)}/{len(checks)}")
    return "\n".join(lines) + "\n"


def render_json(command: str, checks: Sequence[CheckResult]) -> str:
    doc = {"command": command, "status": "PASS" if all(c.passed for c in checks) else "FAIL",
           "checks": [plain(c.as_dict()) for c in checks]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torsionlab", description="Torsion invariants of metric cochain complexes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file", nargs="?", help="input document (JSON); omitted: a generated instance")
    p.add_argument("--tolerance", type=float, help="comparison tolerance for residual checks")
    p.add_argument("--seed", type=int, default=0, help="seed for generated instances (u64)")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds for suite")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report (or generated document) here")
    p.add_argument("--figures", metavar="DIR", help="also write PNG figures to DIR")
    p.add_argument("--kind", choices=KINDS, help="kind for generate, or for the generated input")
    p.add_argument("--inputs", help="ledger: JSON object with the analytic terms")
    return p


def _tolerance(args, doc: Document | None) -> Tolerance:
    base = doc.tolerance if doc is not None and doc.tolerance is not None else DEFAULT_TOLERANCE
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise UsageError("--tolerance must be positive")
        base = dataclasses.replace(base, compare_tol=args.tolerance)
    return base


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    if not (0 <= args.seed < 2**64):
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if args.command == "generate":
        if args.kind is None:
            raise UsageError("generate needs --kind")
        doc = generated(args.kind, args.seed)
        _write(dumps(to_document(doc.model, kind=doc.kind, integration=doc.integration, n=doc.n)), args.out)
        return 0
    if args.command == "suite":
        if args.seeds < 1:
            raise UsageError("--seeds must be positive")
        tol = _tolerance(args, None)
        res = run_suite(args.seeds, args.seed, tol, args.tolerance)
        checks = res.checks
        if args.figures:
            from .plotting import plot_residuals

            Path(args.figures).mkdir(parents=True, exist_ok=True)
            plot_residuals(res.residuals, Path(args.figures) / "residuals.png",
                           {c.name: c.tolerance for c in checks})
    else:
        if args.file:
            try:
                doc = ingest(args.file)
            except DocumentError:
                raise
            except TorsionLabError as e:
                # parsed fine but the content breaks an invariant: a failed check, not a usage error
                res = getattr(e, "residual", None)
                checks = [CheckResult("ingest", False, res if res is not None else float("nan"),
                                      0.0, getattr(e, "invariant", type(e).__name__), [str(e)])]
                return _emit(args, checks)
        else:
            doc = generated(args.kind or DEFAULT_KIND[args.command], args.seed)
        tol = _tolerance(args, doc)
        try:
            checks = HANDLERS[args.command](doc, tol, args)
        except UsageError:
            raise
        except TorsionLabError as e:
            inv = getattr(e, "invariant", type(e).__name__)
            checks = [CheckResult(args.command, False, getattr(e, "residual", None) or float("nan"), 0.0,
                                  inv, [str(e)])]
    return _emit(args, checks)


def _emit(args, checks) -> int:
    render = render_json if args.format == "json" else render_text
    _write(render(args.command, checks), args.out)
    return 0 if all(c.passed for c in checks) else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return _run(args)
    except (UsageError, DocumentError) as e:
        sys.stderr.write(f"torsionlab: error: {e}\n")
        return 2
    except FileNotFoundError as e:
        sys.stderr.write(f"torsionlab: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
