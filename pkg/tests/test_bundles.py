import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torsionlab.bundles import (
    LEDGER_INPUTS,
    BundleModel,
    GysinData,
    SequenceData,
    WangData,
    build_sequence,
    bundle_from_base,
    circle_base,
    combinatorial_terms,
    consistent_ledger_inputs,
    ges_check,
    gysin_sequence,
    leray_serre_e1,
    lst_ledger,
    mapping_torus,
    symbolic_combination,
    term_cancellation_check,
    wang_sequence,
    wes_check,
)
from torsionlab.complexes import GradedMetricComplex, hodge_cohomology, torsion_tc
from torsionlab.errors import IncompleteLedgerError, ModelError
from torsionlab.generate import random_gysin, random_monodromy, random_wang
from torsionlab.geomcx import assemble, model_from_blocks, point


def circle_fiber(g0=1.0, g1=1.0):
    return GradedMetricComplex.from_matrices([[[g0]], [[g1]]], [np.zeros((1, 1))])


def euler_class_model(e):
    # circle fibers over points of index 0 and 2; the transgression is e
    fib = circle_fiber()
    return model_from_blocks([("a", 0, fib), ("b", 2, fib)], {(1, 0): {1: [[e]]}})


def closed_form(monodromy):
    """Torsion of a mapping torus from the monodromy alone."""
    total = 0.0
    for r, phi in monodromy.items():
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        total += (-1) ** (r + 1) * np.log(abs(np.linalg.det(phi - np.eye(len(phi)))))
    return total


def test_gysin_with_euler_class_three():
    gd = GysinData(euler_class_model(3.0), 1)
    les, log_t = gysin_sequence(gd)
    assert log_t == pytest.approx(np.log(3.0), abs=1e-12)
    assert hodge_cohomology(les).total_betti == 0
    rep = ges_check(gd)
    assert rep.passed
    assert rep.quantities["page"] == 2
    assert rep.quantities["rho"] == pytest.approx(-np.log(3.0))
    assert rep.quantities["log_t_met"] == pytest.approx(0.0, abs=1e-12)


def test_gysin_with_zero_euler_class():
    rep = ges_check(GysinData(euler_class_model(0.0), 1))
    assert rep.passed
    assert rep.quantities["log_t_sequence"] == pytest.approx(0.0, abs=1e-12)
    assert rep.quantities["rho"] == 0.0


@pytest.mark.parametrize("phi,expected", [
    ({0: [[3.0]]}, -np.log(2.0)),
    ({0: [[3.0]], 1: [[5.0]]}, np.log(2.0)),
    ({0: [[-1.0]]}, -np.log(2.0)),
    ({0: [[2.0]], 1: np.diag([3.0, 0.5])}, np.log(1.0)),
])
def test_mapping_torus_hand_values(phi, expected):
    w = WangData(mapping_torus(phi).model, 1)
    _, log_t = wang_sequence(w)
    assert log_t == pytest.approx(expected, abs=1e-12)
    assert wes_check(w).passed


def test_trivial_bundle_over_circle():
    b = bundle_from_base(circle_base(), {0: [[4.0]], 1: [[9.0]]})
    assert all(torsion_tc(c) == 0.0 for c in b.base_complexes().values())
    g = assemble(b.model)
    assert hodge_cohomology(g.complex).betti == {0: 1, 1: 2, 2: 1}
    rep = wes_check(WangData(b.model, 1))
    assert rep.passed
    assert rep.quantities["rho"] == 0.0
    assert rep.quantities["log_t_sequence"] == pytest.approx(0.0, abs=1e-12)


def test_first_page_is_base_cochains_with_fiber_coefficients():
    phi = {0: [[3.0]], 1: np.array([[2.0, 1.0], [0.0, 4.0]])}
    b = mapping_torus(phi)
    rep = leray_serre_e1(b)
    assert rep.passed and rep.residual < 1e-12
    assert rep.quantities["e1_dims"] == {"0,0": 1, "0,1": 2, "0,2": 0, "1,0": 0, "1,1": 1, "1,2": 2}
    # base differential of C*(S^1; H^1) is phi_1 - I
    assert np.allclose(b.base_complexes()[1].dmat(0), np.array(phi[1]) - np.eye(2))


def test_first_page_mismatch_is_reported():
    b = mapping_torus({0: [[3.0]]})
    wrong = BundleModel(b.model, {(1, 0): {0: np.array([[-2.0]])}})
    with pytest.raises(ModelError):
        leray_serre_e1(wrong)
    rep = leray_serre_e1(wrong, strict=False)
    assert not rep.passed and rep.violations[0].startswith("e1_differential")


def test_sequence_data_validation():
    fib = circle_fiber()
    with pytest.raises(ModelError):
        WangData(model_from_blocks([("a", 0, fib), ("b", 1, fib)]), 2)
    with pytest.raises(ModelError):
        GysinData(model_from_blocks([("a", 0, fib)]), 2)
    with pytest.raises(ModelError):
        WangData(model_from_blocks([("a", 0, point())]), 0)


def test_non_sparse_pages_are_rejected():
    m = model_from_blocks([("a", 0, point()), ("b", 1, point()), ("c", 2, point())])
    with pytest.raises(ModelError) as e:
        build_sequence(SequenceData(m, 2))
    assert "sparsity" in str(e.value)


@pytest.mark.parametrize("seed", range(30))
def test_mapping_torus_matches_closed_form(seed):
    phi = random_monodromy(seed)
    b = mapping_torus(phi)
    seq = build_sequence(WangData(b.model, 1))
    assert seq.log_t == pytest.approx(closed_form(phi), abs=1e-8)
    # the total complex is acyclic; its torsion is the same number with the opposite sign
    assert torsion_tc(assemble(b.model).complex) == pytest.approx(-closed_form(phi), abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_random_wang(seed):
    m, n, integ = random_wang(seed)
    rep = wes_check(WangData(m, n, integ))
    assert rep.passed, rep.violations
    assert rep.quantities["worst_log_vol_i_p"] < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_random_gysin(seed):
    m, n, integ = random_gysin(seed)
    rep = ges_check(GysinData(m, n, integ))
    assert rep.passed, rep.violations
    assert leray_serre_e1(BundleModel(m), strict=False).passed


def test_ledger_terms_cancel_symbolically():
    assert term_cancellation_check().passed
    combo = symbolic_combination()
    assert combo["log_vol_an"] == 1 and combo["log_vol_comb"] == -1
    assert "log_t_met_total" not in combo and "log_t_comb_base[r]" not in combo


def test_ledger_refuses_missing_inputs():
    b = mapping_torus({0: [[3.0]]})
    inputs = consistent_ledger_inputs(b, np.random.default_rng(0))
    for key in LEDGER_INPUTS:
        partial = {k: v for k, v in inputs.items() if k != key}
        with pytest.raises(IncompleteLedgerError):
            lst_ledger(b, partial)
    with pytest.raises(IncompleteLedgerError):
        lst_ledger(b, dict(inputs, log_t_an_fiber=[0.0]))


def test_ledger_with_zero_inputs_leaves_the_left_side():
    b = mapping_torus({0: [[3.0]]})
    assert combinatorial_terms(b)["rho_ge2"] == 0.0
    zeros = {"log_t_an_total": 0.7, "log_t_an_fiber": [0.0, 0.0], "log_t_an_base": [0.0],
             "r_total": 0.0, "r_base": [0.0], "log_vol_an": 0.0}
    rep = lst_ledger(b, zeros)
    assert rep.residual == pytest.approx(0.7)
    assert not rep.passed


@pytest.mark.parametrize("seed", range(15))
def test_ledger_closes_on_consistent_inputs(seed):
    m, _, _ = random_gysin(seed)
    b = BundleModel(m)
    rng = np.random.default_rng(seed)
    rep = lst_ledger(b, consistent_ledger_inputs(b, rng, float(rng.uniform(-1, 1))))
    assert rep.passed and abs(rep.residual) < 1e-8
    bumped = consistent_ledger_inputs(b, np.random.default_rng(seed))
    bumped["r_total"] += 1e-3
    assert not lst_ledger(b, bumped).passed
