import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrealign import criteria as cr
from cvrealign import gaussian as gs
from cvrealign.criteria import CriterionId
from cvrealign.errors import StructuralError, UnphysicalError
from cvrealign.gaussian import BipartiteSplit, NormalForm
from cvrealign.scenarios import GAMMA_1, GAMMA_2

from _states import random_normal_form, random_physical, random_separable

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.mark.parametrize("r, V", [(0.2, 0.4), (0.5, 0.0), (1.0, 0.8), (0.05, 1.2)])
@pytest.mark.parametrize("mode", [0, 1])
def test_weak_realignment_noisy_epr(r, V, mode):
    res = cr.weak_realignment(gs.tmsv_with_noise(r, V, mode))
    assert res.value == pytest.approx(1 / (V + math.exp(-2 * r)), rel=1e-12)
    assert res.threshold == 1.0
    assert res.detected == (V < 1 - math.exp(-2 * r))


def test_gamma_w_of_noisy_epr():
    r, V = 0.4, 0.3
    gw = cr.gamma_w(gs.tmsv_with_noise(r, V))
    assert np.allclose(gw, np.eye(2) * (V + math.exp(-2 * r)) / 2)


def test_trace_norm_of_noisy_epr():
    r, V = 0.4, 0.3
    nf = NormalForm.from_covariance(gs.tmsv_with_noise(r, V))
    ch, sh = math.cosh(2 * r), math.sinh(2 * r)
    expected = 1 / (math.sqrt((ch + 2 * V) * ch) - sh)
    assert cr.realignment_trace_norm_normal_form(nf).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("tau", [0.0, 0.3, 0.5, 0.9])
def test_thermal_product(tau):
    g = gs.direct_sum(gs.thermal_from_tau(tau), gs.thermal_from_tau(tau))
    expected = (1 - tau) / (1 + tau)
    assert cr.weak_realignment(g).value == pytest.approx(expected)
    nf = NormalForm.from_covariance(g)
    assert cr.realignment_trace_norm_normal_form(nf).value == pytest.approx(expected)
    assert not cr.ppt(g).detected


def test_product_of_vacua_not_detected():
    g = gs.vacuum(2)
    assert cr.weak_realignment(g).value == pytest.approx(1.0)
    assert not cr.weak_realignment(g).detected
    assert not cr.ppt(g).detected


def test_published_verdict_values():
    kw = {"check_physical": False}
    g1 = GAMMA_1.covariance()
    assert cr.weak_realignment(g1, **kw).value == pytest.approx(0.962, abs=1e-3)
    assert cr.realignment_trace_norm_normal_form(GAMMA_1).value == pytest.approx(1.083, abs=1e-3)
    assert cr.ppt(g1, **kw).detected
    assert cr.realignment_trace_norm_normal_form(GAMMA_2).value == pytest.approx(1.237, abs=1e-3)
    with pytest.raises(UnphysicalError):
        cr.weak_realignment(g1)


def test_trace_norm_divergence_reported_as_detected():
    res = cr.realignment_trace_norm_normal_form(NormalForm(1.0, 1.0, 1.0, 0.0))
    assert math.isinf(res.value) and res.detected


def test_unbalanced_split_rejected():
    g = random_physical(3, np.random.default_rng(0))
    with pytest.raises(StructuralError):
        cr.weak_realignment(g, BipartiteSplit((0,), (1, 2)))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.sampled_from([2, 4, 6]))
def test_schur_route_matches(seed, n):
    g = random_physical(n, np.random.default_rng(seed))
    assert cr.weak_realignment_schur(g) == pytest.approx(cr.weak_realignment(g).value, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_normal_form_closed_form_matches_general_route(seed):
    nf = random_normal_form(np.random.default_rng(seed))
    general = cr.weak_realignment(nf.covariance()).value
    assert cr.weak_realignment_normal_form(nf).value == pytest.approx(general, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_trace_bounded_by_trace_norm(seed):
    nf = random_normal_form(np.random.default_rng(seed))
    for form in (nf, nf.flipped()):
        rep = cr.criterion_ordering_check(form.covariance())
        assert rep.trace_norm_slack >= -1e-10
        assert rep.consistent


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.sampled_from([2, 4]))
def test_weak_detection_implies_npt(seed, n):
    g = random_physical(n, np.random.default_rng(seed), max_squeeze=1.5)
    if cr.weak_realignment(g).detected:
        assert cr.ppt(g).detected


@settings(max_examples=60, deadline=None)
@given(seed=seeds, r=st.floats(0.05, 1.5), V=st.floats(0, 1.2))
def test_schmidt_symmetric_equality(seed, r, V):
    # symmetric normal form with c >= 0 >= d: Tr R equals the trace norm
    ch, sh = math.cosh(2 * r) / 2, math.sinh(2 * r) / 2
    nf = NormalForm(ch + V, ch + V, sh, -sh)
    a = cr.weak_realignment_normal_form(nf).value
    b = cr.realignment_trace_norm_normal_form(nf).value
    assert abs(a - b) < 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.sampled_from([1, 2]))
def test_separable_never_detected(seed, n):
    g = random_separable(n, n, np.random.default_rng(seed))
    assert not cr.weak_realignment(g).detected
    assert not cr.ppt(g).detected
    if n == 1:
        nf, _ = gs.normal_form_reduce(g)
        assert not cr.realignment_trace_norm_normal_form(nf).detected


def test_detection_margin_at_boundary():
    r = 0.3
    V = 1 - math.exp(-2 * r)
    res = cr.weak_realignment(gs.tmsv_with_noise(r, V))
    assert abs(res.value - 1) < 1e-12 and not res.detected


def test_ppt_of_tmsv():
    r = 0.5
    res = cr.ppt(gs.tmsv(r))
    assert res.value == pytest.approx(math.exp(-2 * r) / 2)
    assert res.detected and res.threshold == 0.5


def test_ppt_respects_split():
    g = gs.direct_sum(gs.tmsv(0.5), gs.vacuum(2))
    assert not cr.ppt(g, BipartiteSplit((0, 1), (2, 3))).detected
    assert cr.ppt(g, BipartiteSplit((0, 2), (1, 3))).detected


def test_record_format():
    rec = cr.weak_realignment(gs.tmsv(0.2)).to_record("abc")
    assert rec == {
        "criterion": "weak_realignment",
        "value": pytest.approx(math.exp(0.4)),
        "threshold": 1.0,
        "detected": True,
        "inputs_hash": "abc",
    }
    assert CriterionId("ppt") is CriterionId.PPT
