import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from torsionlab.complexes import GradedMetricComplex, hodge_cohomology, torsion_tc, transport
from torsionlab.errors import InvalidInstantonError, ModelError, ValidationError
from torsionlab.generate import random_geometric_instance, random_invertible, random_morse_bott
from torsionlab.geomcx import (
    IntegrationMap,
    assemble,
    block_structure_violations,
    e1_identification,
    euler_identity_check,
    geometric_torsion_ledger,
    metric_torsion,
    model_from_blocks,
    morse_inequalities_check,
    morse_smale_check,
    point,
)
from torsionlab.spectral import log_t_comb, validate_filtration


def interval():
    return GradedMetricComplex.from_matrices([[[1.0]], [[1.0]]], [[[1.0]]])


def sign_model():
    comps = [("j", 0, interval()), ("m", 1, point()), ("i", 2, point())]
    inst = {(1, 0): {0: [[1.0]]}, (2, 1): {0: [[1.0]]}, (2, 0): {1: [[1.0]]}}
    return model_from_blocks(comps, inst)


def test_component_degree_sign_is_the_consistent_one():
    g = assemble(sign_model(), sign="component")
    assert validate_filtration(g.total).passed
    with pytest.raises(InvalidInstantonError):
        assemble(sign_model(), sign="total")


def test_single_component_is_the_component():
    c = interval()
    g = assemble(model_from_blocks([("a", 0, c)]))
    assert np.array_equal(g.complex.dmat(0), c.dmat(0))
    assert torsion_tc(g.complex) == torsion_tc(c)
    assert block_structure_violations(g) == []


def test_zero_instantons_give_direct_sum():
    g = assemble(model_from_blocks([("a", 0, point(4.0)), ("b", 1, point(9.0))]))
    assert hodge_cohomology(g.complex).betti == {0: 1, 1: 1}
    assert torsion_tc(g.complex) == 0.0


def test_morse_smale_circle():
    # two flow lines with opposite signs cancel: H^0 = H^1 = R
    circle = model_from_blocks([("min", 0, point()), ("max", 1, point())], {(1, 0): {0: [[0.0]]}})
    g = assemble(circle)
    assert morse_smale_check(g).passed
    assert euler_identity_check(g).quantities["chi"] == 0
    assert e1_identification(g).passed
    assert morse_inequalities_check(g).passed


def test_two_points_with_an_arrow():
    g = assemble(model_from_blocks([("min", 0, point()), ("max", 1, point())], {(1, 0): {0: [[2.0]]}}))
    assert hodge_cohomology(g.complex).betti == {0: 0, 1: 0}
    assert euler_identity_check(g).passed and euler_identity_check(g).quantities["chi"] == 0
    res = log_t_comb(g.total)
    assert res.rho[0] == pytest.approx(np.log(2.0))
    assert morse_smale_check(g, res).passed


def test_instantons_must_raise_index_and_fit():
    with pytest.raises(ModelError):
        model_from_blocks([("a", 1, point()), ("b", 0, point())], {(1, 0): {0: [[1.0]]}})
    with pytest.raises(ModelError):
        model_from_blocks([("a", 0, point()), ("b", 1, point())], {(1, 0): {0: [[1.0, 2.0]]}})
    with pytest.raises(ModelError):
        model_from_blocks([("a", -1, point())])


def test_morse_smale_check_rejects_fat_components():
    with pytest.raises(ModelError):
        morse_smale_check(assemble(model_from_blocks([("a", 0, interval())])))


def identity_integration(c):
    return IntegrationMap(c, c, {q: np.eye(c.dim(q)) for q in c.degrees})


def test_metric_torsion_of_identity_and_scalar():
    c = GradedMetricComplex.from_matrices([np.eye(2)], [])
    assert metric_torsion(c, identity_integration(c)) == 0.0
    s = IntegrationMap(c, c, {0: 3.0 * np.eye(2)})
    assert metric_torsion(c, s) == pytest.approx(2 * np.log(3.0))
    odd = GradedMetricComplex.from_matrices([np.zeros((0, 0)), np.eye(1)], [np.zeros((1, 0))])
    assert metric_torsion(odd, IntegrationMap(odd, odd, {1: [[3.0]]})) == pytest.approx(-np.log(3.0))


@pytest.mark.parametrize("seed", range(10))
def test_metric_torsion_adds_under_composition(seed):
    _, g, _ = random_geometric_instance(seed)
    b = g.complex
    rng = np.random.default_rng(seed)
    s = {q: random_invertible(rng, b.dim(q)) for q in b.degrees}
    t = {q: random_invertible(rng, b.dim(q)) for q in b.degrees}
    a = transport(b, s)
    a2 = transport(a, t)
    inv = {q: np.linalg.inv(m) for q, m in s.items()}
    i1 = IntegrationMap(a, b, inv)
    i0 = IntegrationMap(a2, a, {q: np.linalg.inv(m) for q, m in t.items()})
    both = IntegrationMap(a2, b, {q: inv[q] @ np.linalg.inv(t[q]) for q in b.degrees})
    total = metric_torsion(b, both)
    assert total == pytest.approx(metric_torsion(b, i1) + metric_torsion(a, i0), abs=1e-8)
    # a transported complex carries the pulled-back metric, so each step is an isometry
    assert total == pytest.approx(0.0, abs=1e-8)


def test_integration_map_must_be_chain_map():
    c = interval()
    bad = IntegrationMap(c, c, {0: [[1.0]], 1: [[2.0]]})
    with pytest.raises(ValidationError) as e:
        metric_torsion(c, bad)
    assert e.value.invariant == "chain_map"


@pytest.mark.parametrize("seed", range(20))
def test_geometric_instances(seed):
    m, g, integ = random_geometric_instance(seed)
    assert block_structure_violations(g) == []
    assert integ.validate().passed
    assert e1_identification(g).passed
    assert euler_identity_check(g, integ).passed
    assert morse_inequalities_check(g, integ).passed
    rep = geometric_torsion_ledger(g, integ)
    assert rep.passed, rep.quantities
    # the components' frame torsions rebuild the E_0 contribution
    split = sum((-1) ** c.index * oracles.frame_log_torsion(c.complex) for c in m.components)
    assert rep.quantities["log_t_components"] == pytest.approx(split, abs=1e-7)
    assert rep.quantities["log_t_gc"] == pytest.approx(split, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_random_morse_smale_models(seed):
    g = assemble(random_morse_bott(seed, morse_smale=True))
    assert morse_smale_check(g).passed
    assert e1_identification(g).passed
    b = hodge_cohomology(g.complex).betti
    assert b == oracles.rank_nullity_betti(g.complex)
    for q, n in b.items():
        assert n <= sum(1 for c in g.model.components if c.index == q)
