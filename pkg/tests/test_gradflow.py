import math

import numpy as np
import pytest

from fxtsp import certify as cert
from fxtsp import gradflow as gf
from fxtsp.errors import InadmissibleQError, InfeasibleCertificateError, InvalidParameterError
from fxtsp.model import boundary_layer_field, reduced_field
from fxtsp.powers import vector_power
from fxtsp.sim import random_states

SQRT7 = math.sqrt(7)


@pytest.fixture(scope="module")
def params():
    return gf.GradFlowParams()


def test_defaults_and_record_round_trip(params):
    assert np.array_equal(params.A, -np.eye(2)) and np.array_equal(params.B, np.eye(2))
    back = gf.GradFlowParams.from_record(params.to_record())
    assert back.to_record() == params.to_record()
    with pytest.raises(InvalidParameterError):
        gf.GradFlowParams.from_record({"Q": [[1, 0], [0, 1]], "gain": 2})


def test_parameter_validation():
    with pytest.raises(InvalidParameterError):
        gf.GradFlowParams(Q=np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(InvalidParameterError):
        gf.GradFlowParams(B=np.zeros((2, 2)))
    with pytest.raises(InvalidParameterError):
        gf.GradFlowParams(xi1=1.2)
    with pytest.raises(InvalidParameterError):
        gf.GradFlowParams(xi2=0.1)


def test_eigenvalues_of_asymmetric_Q(params):
    assert gf.eigenvalues(params.Q) == pytest.approx([4 - SQRT7, 4 + SQRT7], rel=1e-14)
    Q3 = np.diag([1.0, 2.0, 3.0]) + np.triu(np.ones((3, 3)), 1)
    assert gf.eigenvalues(Q3) == pytest.approx([1, 2, 3])


def test_gain_threshold(params):
    sig = math.sqrt((47 + math.sqrt(1885)) / 2)
    assert gf.gain_threshold(params) == pytest.approx(sig / (4 - SQRT7), rel=1e-12)
    assert gf.gain_threshold(params) == pytest.approx(4.965, abs=1e-3)
    with pytest.raises(InfeasibleCertificateError):
        gf.build_system(gf.GradFlowParams(nu=4.9))


def test_built_model_fields(params):
    model = gf.build_system(params)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(100, 2)), rng.normal(size=(100, 2)) * 10.0 ** rng.uniform(-3, 3, (100, 1))
    expected = y @ params.A.T - params.nu * (vector_power(y, params.xi1) + vector_power(y, params.xi2))
    assert np.allclose(boundary_layer_field(model, x, y), expected, rtol=1e-14)
    assert np.all(model.g(x, model.h(x)) == 0)


def test_reduced_certificate_reference(params):
    rc = gf.reduced_certificate(params)
    assert rc.k1 == pytest.approx(0.359, abs=1e-3)
    assert rc.k2 == pytest.approx(0.453, abs=1e-3)
    assert rc.k_lower == rc.k1
    assert (rc.a1, rc.a2) == pytest.approx((5 / 6, 4 / 3))


def test_reduced_certificate_identity_Q():
    rc = gf.reduced_certificate(gf.GradFlowParams(Q=np.eye(2), xi1=0.5))
    assert rc.k1 == pytest.approx(2 ** 0.75)


def test_boundary_certificate_examples():
    bc = gf.boundary_certificate(gf.GradFlowParams(Q=np.eye(2), nu=2.0, xi1=0.5))
    assert bc.kappa1 == pytest.approx(2 ** 0.75)
    thr = gf.gain_threshold(gf.GradFlowParams())
    near = gf.boundary_certificate(gf.GradFlowParams(nu=thr * (1 + 1e-9)))
    assert near.kappa_lower < 1e-8
    with pytest.raises(InfeasibleCertificateError):
        gf.boundary_certificate(gf.GradFlowParams(nu=thr * 0.99))


def test_coupling_constants_reference(params):
    c = gf.coupling_constants(params, 0.1)
    assert c["r1"] == pytest.approx(0.7225, abs=1e-4)
    assert c["N1"] == pytest.approx(29.60, abs=0.01)
    assert c["N2"] == pytest.approx(312.2, abs=0.1)
    assert c["eta"] == pytest.approx(min(0.1 * c["r1"] / c["N1"], 0.1 * c["r2"] / c["N2"]))
    assert c["eta"] == pytest.approx(1.90e-4, abs=1e-6)
    assert c["mu_star"] == pytest.approx(262.6, rel=1e-2)


def test_interconnection_bounds_reference(params):
    b = gf.interconnection_bounds(params, 0.1, q=3000.0)
    assert (b.delta1, b.c1, b.delta2) == (0.1, 0.1, 0.1)
    assert b.c2 == pytest.approx(262.6, rel=1e-2)
    assert b.chi1 == b.chi2 == pytest.approx(1.5e6, rel=0.1)


def test_interconnection_bounds_errors(params):
    with pytest.raises(InvalidParameterError):
        gf.interconnection_bounds(params, 0.2)
    with pytest.raises(InadmissibleQError) as info:
        gf.interconnection_bounds(params, 0.1, q=100.0)
    q_min = info.value.min_q
    assert 1 / (2 * q_min) < gf.coupling_constants(params, 0.1)["eta"]


def test_choose_q():
    q = gf.choose_q(0.1, 2e-4, lambda v: 2 * v)
    assert 2500 <= q <= 3000 and 1 / (2 * q) < 2e-4 and not 1 / (2 * q / 1.05) < 2e-4
    assert 1 / (2 * 3000.0) < 2e-4
    q = gf.choose_q(1.0, 1.0, lambda v: v)
    assert 1 < q <= 1.05
    for eta in (1e-6, 3e-3, 0.7, 40.0):
        q = gf.choose_q(1.0, eta, lambda v: 2 * v)
        assert 1 / (2 * q) < eta and not 1 / (2 * q / 1.05) < eta


def test_reproduction_report(params):
    rep = gf.reproduce_reference_example()
    assert rep["k_lower"] == pytest.approx(0.359, abs=1e-3)
    assert 1e-15 < rep["eps_star"] < 2e-15
    qty = rep["quantities"]
    assert qty["P11"]["value"] == pytest.approx(0.0197, abs=3e-4)
    assert qty["P12"]["value"] == pytest.approx(-750000, rel=1e-12)
    assert qty["chi"]["value"] == pytest.approx(1.5e6, rel=1e-12)
    assert set(qty) >= {"k1", "k2", "eta", "mu_star", "P22_slope", "P22_offset", "eps_star"}
    assert rep["exact_chain"]["eta"] == pytest.approx(1.9043e-4, rel=1e-3)


def _states(model, count=10_000, seed=3):
    return random_states(model, count, seed=seed)


@pytest.mark.parametrize("gradient", ["as_written", "symmetrized"])
def test_reduced_decrease_assumption(params, gradient):
    model = gf.build_system(params)
    rc = gf.reduced_certificate(params, gradient)
    x, _ = _states(model)
    lie = np.sum(rc.gradV(x) * reduced_field(model, x), axis=-1)
    V = rc.V(x)
    bound = -rc.k1 * V ** rc.a1 - rc.k2 * V ** rc.a2
    assert np.all(lie <= bound + 1e-9 * (np.abs(lie) + np.abs(bound)))


@pytest.mark.parametrize("gradient", ["as_written", "symmetrized"])
def test_boundary_decrease_assumption(params, gradient):
    model = gf.build_system(params)
    bc = gf.boundary_certificate(params, gradient)
    x, y = _states(model)
    lie = np.sum(bc.gradW_y(x, y) * boundary_layer_field(model, x, y), axis=-1)
    W = bc.W(x, y)
    bound = -bc.kappa1 * W ** bc.b1 - bc.kappa2 * W ** bc.b2
    assert np.all(lie <= bound + 1e-9 * (np.abs(lie) + np.abs(bound)))


def test_interconnection_bounds_hold_pointwise(params):
    model = gf.build_system(params)
    rc = gf.reduced_certificate(params)
    b = gf.interconnection_bounds(params, 0.1)
    x, y = _states(model)
    i1, i2 = gf.interconnection_terms(params, x, y)
    vt = cert.tilde_value(rc.V(x), rc.a1, rc.a2)
    wt = cert.tilde_value(rc.V(y), rc.a1, rc.a2)
    r1 = b.chi1 * vt * wt + b.delta1 * vt ** 2 + b.c1 * wt ** 2
    r2 = b.chi2 * vt * wt + b.delta2 * vt ** 2 + b.c2 * wt ** 2
    assert np.all(i1 <= r1 * (1 + 1e-9))
    assert np.all(i2 <= r2 * (1 + 1e-9))


def test_sandwich_descriptor(params):
    rc = gf.reduced_certificate(params)
    kind, lo, hi = rc.sandwich
    assert kind == "quadratic"
    x, _ = _states(gf.build_system(params), 1000)
    r2 = np.sum(x * x, axis=-1)
    V = rc.V(x)
    assert np.all(lo * r2 <= V * (1 + 1e-12)) and np.all(V <= hi * r2 * (1 + 1e-12))
