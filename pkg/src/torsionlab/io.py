"""JSON documents for complexes, filtrations, Morse-Bott models and bundles.

Matrices are nested row lists whose shape is fixed by the declared
dimensions, so empty blocks need no special encoding.  Floats are written
with ``repr`` (shortest round-tripping decimal), which makes emit/ingest
bit-exact.  The layout is described in ``docs/format.md``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .complexes import GradedMetricComplex, require_valid
from .errors import DocumentError, ValidationError
from .geomcx import Component, IntegrationMap, MorseBottModel, assemble
from .numeric import Tolerance
from .spectral import FilteredMetricComplex, validate_filtration

SCHEMA_VERSION = "1.0"
KINDS = ("complex", "filtered", "morse_bott", "bundle", "wang", "gysin")


@dataclass
class Document:
    kind: str
    model: Any
    tolerance: Tolerance | None = None
    integration: IntegrationMap | None = None
    n: int | None = None


# -- emit ------------------------------------------------------------------------


def _matrix(m: np.ndarray) -> list:
    return [[float(x) for x in row] for row in np.asarray(m, dtype=float)]


def _complex_payload(c: GradedMetricComplex) -> dict:
    qs = list(c.degrees)
    return {
        "q_min": c.q_min,
        "dims": [c.dim(q) for q in qs],
        "grams": [_matrix(c.gram(q)) for q in qs],
        "differentials": [_matrix(c.dmat(q)) for q in qs[:-1]],
    }


def _filtered_payload(f: FilteredMetricComplex) -> dict:
    return {
        "complex": _complex_payload(f.complex),
        "p_min": f.p_min,
        "levels": [{"dims": [m.shape[1] for m in per_q], "bases": [_matrix(m) for m in per_q]}
                   for per_q in f.levels],
    }


def _model_payload(m: MorseBottModel) -> dict:
    inst = []
    for (i, j), blocks in sorted(m.instantons.items()):
        for k, blk in sorted(blocks.items()):
            inst.append({"target": i, "source": j, "degree": k, "matrix": _matrix(blk)})
    return {
        "components": [{"label": c.label, "index": c.index, "complex": _complex_payload(c.complex)}
                       for c in m.components],
        "instantons": inst,
    }


def _integration_payload(i: IntegrationMap) -> dict:
    return {
        "ambient": _complex_payload(i.ambient),
        "maps": [{"degree": q, "matrix": _matrix(m)} for q, m in sorted(i.maps.items())],
    }


def to_document(obj, kind: str | None = None, integration: IntegrationMap | None = None,
                n: int | None = None, tolerance: Tolerance | None = None) -> dict:
    """The JSON-ready dictionary for a complex, filtered complex, model or bundle."""
    from .bundles import BundleModel, SequenceData

    if isinstance(obj, SequenceData):
        kind, integration, n, obj = obj.kind, obj.integration, obj.n, obj.model
    if isinstance(obj, BundleModel):
        kind, obj = kind or "bundle", obj.model
    if isinstance(obj, GradedMetricComplex):
        kind, payload = "complex", _complex_payload(obj)
    elif isinstance(obj, FilteredMetricComplex):
        kind, payload = "filtered", _filtered_payload(obj)
    elif isinstance(obj, MorseBottModel):
        kind = kind or "morse_bott"
        payload = {"model": _model_payload(obj)}
        if integration is not None:
            payload["integration"] = _integration_payload(integration)
        if kind in ("wang", "gysin"):
            if n is None:
                raise ValueError(f"{kind} documents need the sphere dimension n")
            payload["n"] = int(n)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "payload": payload}
    if tolerance is not None:
        doc["tolerance"] = {"rank_rel_tol": tolerance.rank_rel_tol, "compare_tol": tolerance.compare_tol,
                            "abs_floor": tolerance.abs_floor, "gram_floor": tolerance.gram_floor}
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def emit(obj, path: str | Path | None = None, **kw) -> str:
    text = dumps(obj if isinstance(obj, dict) else to_document(obj, **kw))
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# -- ingest --------------------------------------------------------------------


def _reject_constant(name):
    raise ValueError(f"non-finite literal {name}")


def parse(text: str) -> dict:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise DocumentError(f"parse error: {e.msg}", line=e.lineno, column=e.colno) from None
    except ValueError as e:
        raise DocumentError(f"parse error: {e}") from None
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object", path="$")
    return doc


def _need(obj: dict, key: str, path: str, typ=None):
    if not isinstance(obj, dict):
        raise DocumentError("expected an object", path=path)
    if key not in obj:
        raise DocumentError("missing field", path=f"{path}.{key}")
    v = obj[key]
    if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise DocumentError("expected an integer", path=f"{path}.{key}")
    if typ is list and not isinstance(v, list):
        raise DocumentError("expected an array", path=f"{path}.{key}")
    if typ is str and not isinstance(v, str):
        raise DocumentError("expected a string", path=f"{path}.{key}")
    return v


def _read_matrix(v, rows: int, cols: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != rows:
        raise DocumentError(f"expected {rows} rows", path=path)
    out = np.zeros((rows, cols))
    for r, row in enumerate(v):
        if not isinstance(row, list) or len(row) != cols:
            raise DocumentError(f"expected {cols} columns", path=f"{path}[{r}]")
        for c, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise DocumentError("expected a finite number", path=f"{path}[{r}][{c}]")
            out[r, c] = x
    return out


def _read_dims(v, path: str) -> list[int]:
    if not isinstance(v, list) or not v:
        raise DocumentError("expected a non-empty array of dimensions", path=path)
    for k, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, int) or x < 0:
            raise DocumentError("dimension must be a non-negative integer", path=f"{path}[{k}]")
    return list(v)


def _read_complex(obj, path: str) -> GradedMetricComplex:
    q_min = _need(obj, "q_min", path, int)
    dims = _read_dims(_need(obj, "dims", path, list), f"{path}.dims")
    grams_raw = _need(obj, "grams", path, list)
    diffs_raw = _need(obj, "differentials", path, list)
    if len(grams_raw) != len(dims):
        raise DocumentError(f"expected {len(dims)} Gram matrices", path=f"{path}.grams")
    if len(diffs_raw) != len(dims) - 1:
        raise DocumentError(f"expected {len(dims) - 1} differentials", path=f"{path}.differentials")
    grams = [_read_matrix(g, n, n, f"{path}.grams[{k}]") for k, (g, n) in enumerate(zip(grams_raw, dims))]
    diffs = [_read_matrix(d, dims[k + 1], dims[k], f"{path}.differentials[{k}]") for k, d in enumerate(diffs_raw)]
    try:
        return GradedMetricComplex.from_matrices(grams, diffs, q_min)
    except DocumentError:
        raise
    except Exception as e:  # Gram not SPD and the like
        raise DocumentError(str(e), path=path) from None


def _read_filtered(obj, path: str) -> FilteredMetricComplex:
    c = _read_complex(_need(obj, "complex", path), f"{path}.complex")
    p_min = _need(obj, "p_min", path, int)
    levels_raw = _need(obj, "levels", path, list)
    levels = {}
    for k, lv in enumerate(levels_raw):
        lp = f"{path}.levels[{k}]"
        dims = _read_dims(_need(lv, "dims", lp, list), f"{lp}.dims")
        bases = _need(lv, "bases", lp, list)
        if len(dims) != len(c.spaces) or len(bases) != len(c.spaces):
            raise DocumentError(f"expected one basis per degree ({len(c.spaces)})", path=lp)
        levels[p_min + k] = [_read_matrix(b, c.dim(q), n, f"{lp}.bases[{j}]")
                             for j, (q, b, n) in enumerate(zip(c.degrees, bases, dims))]
    try:
        return FilteredMetricComplex.from_levels(c, levels)
    except Exception as e:
        raise DocumentError(str(e), path=f"{path}.levels") from None


def _read_model(obj, path: str) -> MorseBottModel:
    comps_raw = _need(obj, "components", path, list)
    comps = []
    for k, c in enumerate(comps_raw):
        cp = f"{path}.components[{k}]"
        comps.append(Component(_need(c, "label", cp, str), _need(c, "index", cp, int),
                               _read_complex(_need(c, "complex", cp), f"{cp}.complex")))
    inst: dict = {}
    for k, e in enumerate(_need(obj, "instantons", path, list)):
        ip = f"{path}.instantons[{k}]"
        i, j, deg = _need(e, "target", ip, int), _need(e, "source", ip, int), _need(e, "degree", ip, int)
        if not (0 <= i < len(comps) and 0 <= j < len(comps)):
            raise DocumentError("component reference out of range", path=ip)
        shift = comps[i].index - comps[j].index - 1
        m = _read_matrix(_need(e, "matrix", ip), comps[i].dim(deg - shift), comps[j].dim(deg), f"{ip}.matrix")
        inst.setdefault((i, j), {})[deg] = m
    return MorseBottModel(comps, inst)


def _read_integration(obj, path: str, target: GradedMetricComplex) -> IntegrationMap:
    amb = _read_complex(_need(obj, "ambient", path), f"{path}.ambient")
    maps = {}
    for k, e in enumerate(_need(obj, "maps", path, list)):
        mp = f"{path}.maps[{k}]"
        q = _need(e, "degree", mp, int)
        maps[q] = _read_matrix(_need(e, "matrix", mp), target.dim(q), amb.dim(q), f"{mp}.matrix")
    return IntegrationMap(amb, target, maps)


def _read_tolerance(obj, path: str) -> Tolerance:
    if not isinstance(obj, dict):
        raise DocumentError("expected an object", path=path)
    allowed = {"rank_rel_tol", "compare_tol", "abs_floor", "gram_floor"}
    extra = set(obj) - allowed
    if extra:
        raise DocumentError(f"unknown tolerance fields {sorted(extra)}", path=path)
    try:
        return Tolerance(**{k: float(v) for k, v in obj.items()})
    except (TypeError, ValueError) as e:
        raise DocumentError(str(e), path=path) from None


def from_document(doc: dict, validate: bool = True) -> Document:
    """Build the typed model; with ``validate`` every module validator runs (raising ``ValidationError``)."""
    version = _need(doc, "schema_version", "$", str)
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise DocumentError(f"unsupported schema version {version!r}", path="$.schema_version")
    kind = _need(doc, "kind", "$", str)
    if kind not in KINDS:
        raise DocumentError(f"kind must be one of {', '.join(KINDS)}", path="$.kind")
    payload = _need(doc, "payload", "$")
    tol = _read_tolerance(doc["tolerance"], "$.tolerance") if "tolerance" in doc else None
    out = Document(kind, None, tol)
    if kind == "complex":
        out.model = _read_complex(payload, "$.payload")
        if validate:
            require_valid(out.model)
    elif kind == "filtered":
        out.model = _read_filtered(payload, "$.payload")
        if validate:
            require_valid(out.model.complex)
            rep = validate_filtration(out.model)
            if not rep.passed:
                raise ValidationError(rep.violations[0].split(":")[0], "; ".join(rep.violations), rep.residual)
    else:
        model = _read_model(_need(payload, "model", "$.payload"), "$.payload.model")
        g = assemble(model, check=validate)
        if "integration" in payload:
            out.integration = _read_integration(payload["integration"], "$.payload.integration", g.complex)
            if validate:
                out.integration.require_valid(tol or Tolerance())
        if kind in ("wang", "gysin"):
            out.n = _need(payload, "n", "$.payload", int)
        out.model = _typed_model(kind, model, out, validate)
    return out


def _typed_model(kind, model, doc: Document, validate: bool):
    from .bundles import BundleModel, GysinData, WangData

    if kind == "morse_bott":
        return model
    if kind == "bundle":
        b = BundleModel(model)
        if validate:
            b.base_complexes()
        return b
    build = WangData if kind == "wang" else GysinData
    return build(model, doc.n, doc.integration)


def ingest(path: str | Path, validate: bool = True) -> Document:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DocumentError(f"not UTF-8 text: {e.reason}") from None
    return from_document(parse(text), validate)


def loads(text: str, validate: bool = True) -> Document:
    return from_document(parse(text), validate)
