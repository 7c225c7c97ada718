import json

import numpy as np
import pytest

from torsionlab.bundles import BundleModel, GysinData, WangData, mapping_torus
from torsionlab.complexes import GradedMetricComplex
from torsionlab.errors import DocumentError, ValidationError
from torsionlab.generate import (
    random_complex,
    random_filtered,
    random_geometric_instance,
    random_gysin,
    random_morse_bott,
    random_wang,
)
from torsionlab.io import dumps, emit, from_document, ingest, loads, parse, to_document
from torsionlab.numeric import Tolerance


def instances(seed):
    m, n, integ = random_wang(seed)
    mg, ng, ig = random_gysin(seed)
    _, g, gi = random_geometric_instance(seed)
    return [
        to_document(random_complex(seed)),
        to_document(random_filtered(seed)),
        to_document(random_morse_bott(seed)),
        to_document(g.model, integration=gi),
        to_document(BundleModel(mapping_torus({0: [[3.0]], 1: [[5.0]]}).model)),
        to_document(WangData(m, n, integ)),
        to_document(GysinData(mg, ng, ig)),
    ]


@pytest.mark.parametrize("seed", range(8))
def test_round_trip_is_bit_exact(seed):
    for doc in instances(seed):
        text = dumps(doc)
        back = loads(text)
        assert back.kind == doc["kind"]
        again = dumps(to_document(back.model, kind=back.kind, integration=back.integration, n=back.n))
        assert again == text


def test_round_trip_keeps_tolerance(tmp_path):
    tol = Tolerance(rank_rel_tol=1e-8, compare_tol=1e-5)
    path = tmp_path / "c.json"
    emit(random_complex(1), path, tolerance=tol)
    doc = ingest(path)
    assert doc.tolerance == tol


def test_minimal_document():
    text = ('{"schema_version": "1.0", "kind": "complex", "payload": '
            '{"q_min": 0, "dims": [1, 1], "grams": [[[1]], [[1]]], "differentials": [[[2]]]}}')
    doc = loads(text)
    assert isinstance(doc.model, GradedMetricComplex)
    assert doc.model.dmat(0)[0, 0] == 2.0
    assert doc.tolerance is None


def test_parse_error_carries_position():
    with pytest.raises(DocumentError) as e:
        parse('{"kind":\n  "complex",,}')
    assert (e.value.line, e.value.column) == (2, 13)


def test_non_finite_numbers_are_rejected():
    with pytest.raises(DocumentError):
        parse('{"x": NaN}')
    with pytest.raises(DocumentError):
        parse('{"x": Infinity}')
    with pytest.raises(DocumentError):
        parse("[1, 2]")


def test_schema_errors_name_the_path():
    doc = to_document(random_morse_bott(2))
    del doc["payload"]["model"]["components"][0]["complex"]
    with pytest.raises(DocumentError) as e:
        from_document(doc)
    assert e.value.path == "$.payload.model.components[0].complex"
    bad = to_document(random_complex(2))
    bad["payload"]["grams"][0] = "identity"
    with pytest.raises(DocumentError) as e:
        from_document(bad)
    assert e.value.path.startswith("$.payload.grams[0]")
    with pytest.raises(DocumentError):
        from_document(dict(to_document(random_complex(2)), kind="torus"))
    with pytest.raises(DocumentError):
        from_document(dict(to_document(random_complex(2)), schema_version="2.0"))


def test_dimension_mismatch_is_a_schema_error():
    doc = to_document(random_complex(3))
    doc["payload"]["dims"][0] += 1
    with pytest.raises(DocumentError):
        from_document(doc)


def test_d_squared_violation_fails_validation():
    doc = {"schema_version": "1.0", "kind": "complex",
           "payload": {"q_min": 0, "dims": [1, 1, 1], "grams": [[[1]], [[1]], [[1]]],
                       "differentials": [[[1]], [[1]]]}}
    with pytest.raises(ValidationError) as e:
        from_document(doc)
    assert e.value.invariant == "d_squared_zero"
    assert from_document(doc, validate=False).model.dims == (1, 1, 1)


def test_filtration_violation_fails_validation():
    c = GradedMetricComplex.from_matrices([[[1.0]], [[1.0]]], [[[2.0]]])
    doc = {"schema_version": "1.0", "kind": "filtered",
           "payload": {"complex": to_document(c)["payload"], "p_min": 0,
                       "levels": [{"dims": [1, 1], "bases": [[[1]], [[1]]]},
                                  {"dims": [1, 0], "bases": [[[1]], [[]]]},
                                  {"dims": [0, 0], "bases": [[[]], [[]]]}]}}
    with pytest.raises(ValidationError) as e:
        from_document(doc)
    assert e.value.invariant == "d_stable"


def test_output_is_plain_json():
    text = dumps(to_document(random_filtered(4)))
    assert json.loads(text)["kind"] == "filtered"
    assert text.endswith("\n")
    np.testing.assert_array_equal(loads(text).model.complex.dmat(0), random_filtered(4).complex.dmat(0))
