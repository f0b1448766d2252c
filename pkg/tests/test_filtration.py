import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrealign import criteria as cr
from cvrealign import filtration as fl
from cvrealign import gaussian as gs
from cvrealign.errors import FilterDomainError, StructuralError
from cvrealign.filtration import FilterKind, FilterSpec, Subsystem
from cvrealign.gaussian import NormalForm
from cvrealign.scenarios import GAMMA_1, GAMMA_2

from _states import random_physical, random_separable

seeds = st.integers(min_value=0, max_value=2**32 - 1)
ATT_A = FilterSpec(FilterKind.ATTENUATE, Subsystem.A)


def symmetrized_closed_form(r: float, V: float) -> np.ndarray:
    ch = math.cosh(2 * r)
    pre = 1 / (8 * (V + ch))
    diag = pre * (4 * V * ch + math.cosh(4 * r) + 3)
    off = pre * 8 * math.sinh(r) ** 2 * math.cosh(r) ** 2
    return NormalForm(diag, diag, off, -off).covariance()


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec(FilterKind.ATTENUATE, Subsystem.A, 0.0)
    assert FilterSpec("amplify", "B", 3.0).consistent
    assert not FilterSpec("attenuate", "A", 3.0).consistent
    assert Subsystem.parse("b") is Subsystem.B and Subsystem.A.other is Subsystem.B


@pytest.mark.parametrize("target", list(Subsystem))
def test_unit_filter_is_identity(target):
    g = random_physical(2, np.random.default_rng(5))
    assert np.allclose(fl.filter_covariance(g, FilterSpec(FilterKind.ATTENUATE, target, 1.0)), g)
    assert np.allclose(fl.filter_via_beamsplitter(g, 1.0, target), g)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, t=st.floats(0.05, 0.95), target=st.sampled_from(list(Subsystem)))
def test_husimi_update_matches_beam_splitter(seed, t, target):
    g = random_physical(2, np.random.default_rng(seed))
    a = fl.filter_covariance(g, FilterSpec(FilterKind.ATTENUATE, target, t))
    b = fl.filter_via_beamsplitter(g, t, target)
    assert np.allclose(a, b, rtol=0, atol=1e-10)


def test_beam_splitter_filter_on_two_by_two_state():
    g = random_physical(4, np.random.default_rng(8))
    a = fl.filter_covariance(g, FilterSpec(FilterKind.ATTENUATE, Subsystem.B, 0.4))
    b = fl.filter_via_beamsplitter(g, 0.4, Subsystem.B)
    assert np.allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("r, V", [(0.2, 0.4), (0.7, 0.3), (1.3, 1.1)])
def test_symmetrized_matrix_closed_form(r, V):
    g = fl.filter_covariance(gs.tmsv_with_noise(r, V), ATT_A.at(math.tanh(r) ** 2))
    assert np.allclose(g, symmetrized_closed_form(r, V), atol=1e-10)


def test_attenuating_tmsv_lowers_squeezing():
    r, t = 0.8, 0.3
    g = fl.filter_covariance(gs.tmsv(r), ATT_A.at(t))
    r2 = math.atanh(math.tanh(r) * math.sqrt(t))
    assert np.allclose(g, gs.tmsv(r2), atol=1e-12)


@pytest.mark.parametrize("r, V", [(0.2, 0.4), (0.6, 0.9), (1.0, 0.1)])
def test_symmetrizing_root_is_tanh_squared(r, V):
    roots = fl.symmetrize_t(gs.tmsv_with_noise(r, V))
    assert len(roots) == 1
    root = roots[0]
    assert root.t == pytest.approx(math.tanh(r) ** 2, abs=1e-12)
    assert root.residual < 1e-12
    ch = math.cosh(2 * r)
    assert root.trace_R == pytest.approx((V + ch) / (1 + V * ch), abs=1e-10)


def test_already_symmetric_returns_unit_root():
    roots = fl.symmetrize_t(gs.tmsv(0.4))
    assert roots[0].t == 1.0


def test_amplification_limiting_root():
    r, V = 0.2, 0.4
    g = gs.tmsv_with_noise(r, V, 1)
    roots = fl.symmetrize_t(g, FilterSpec(FilterKind.AMPLIFY, Subsystem.A))
    assert len(roots) == 1 and roots[0].limiting and roots[0].gamma is None
    assert roots[0].t == pytest.approx(1 / math.tanh(r) ** 2, rel=1e-9)
    assert roots[0].trace_R == pytest.approx(1 / V, rel=1e-3)


def test_amplification_beyond_edge_rejected():
    r = 0.2
    g = gs.tmsv_with_noise(r, 0.4, 1)
    with pytest.raises(FilterDomainError):
        fl.filter_covariance(g, FilterSpec(FilterKind.AMPLIFY, Subsystem.A, 1.01 / math.tanh(r) ** 2))


@pytest.mark.parametrize("t", [1.5, 5.0, 20.0])
def test_amplified_noisy_epr_is_noisy_epr(t):
    r, V = 0.2, 0.4
    g = fl.filter_covariance(gs.tmsv_with_noise(r, V, 1), FilterSpec(FilterKind.AMPLIFY, Subsystem.A, t))
    r2 = math.atanh(math.tanh(r) * math.sqrt(t))
    assert np.allclose(g, gs.tmsv_with_noise(r2, V, 1), atol=1e-10)


def test_sweep_csv_format_and_determinism():
    g = gs.tmsv_with_noise(0.2, 0.4)
    csv1 = fl.sweep_t(g, ATT_A, fl.default_grid(FilterKind.ATTENUATE, 20)).to_csv()
    csv2 = fl.sweep_t(g, ATT_A, fl.default_grid(FilterKind.ATTENUATE, 20)).to_csv()
    assert csv1 == csv2
    lines = csv1.splitlines()
    assert lines[0] == "t,trace_R,detected,det_A,det_B"
    assert lines[-1].startswith("#root,0.0389570170339,")
    assert len([ln for ln in lines if not ln.startswith("#")]) == 21


def test_default_grids():
    att = fl.default_grid(FilterKind.ATTENUATE)
    amp = fl.default_grid(FilterKind.AMPLIFY)
    assert len(att) == 400 and att[0] > 0.01 and att[-1] == 1.0
    assert amp[0] > 1.0 and amp[-1] == pytest.approx(30.0)


def test_sweep_drops_points_outside_domain():
    r = 0.2
    g = gs.tmsv_with_noise(r, 0.4, 1)
    curve = fl.sweep_t(g, FilterSpec(FilterKind.AMPLIFY, Subsystem.A), find_roots=False)
    edge = 1 / math.tanh(r) ** 2
    assert curve.dropped and all(t > edge for t, _ in curve.dropped)
    assert all(s.t < edge for s in curve.samples)


def test_gamma2_needs_phase_flip():
    g = GAMMA_2.covariance()
    plain = fl.sweep_t(g, ATT_A, find_roots=False)
    flipped = fl.sweep_t(gs.phase_shift(g, 1, math.pi), ATT_A, find_roots=False)
    assert plain.detection_intervals() == []
    assert plain.best().trace_R < 1
    (lo, hi), = flipped.detection_intervals()
    assert lo < 0.05 and hi == 1.0


def test_optimizer_beats_symmetrized_point():
    r, V = 0.2, 0.4
    g = gs.tmsv_with_noise(r, V)
    opt = fl.optimize_t(g, ATT_A)
    sweep_max = fl.sweep_t(g, ATT_A, find_roots=False).best().trace_R
    assert opt.value >= sweep_max
    assert opt.value > fl.symmetrize_t(g)[0].trace_R
    assert abs(opt.t_star - math.tanh(r) ** 2) > 0.1


def test_optimizer_on_separable_thermal_product():
    g = gs.direct_sum(gs.thermal(0.3), gs.thermal(0.3))
    opt = fl.optimize_t(g, ATT_A)
    assert opt.value <= 1


def test_optimizer_on_gamma1_exceeds_one():
    opt = fl.optimize_t(GAMMA_1.covariance(), ATT_A, check_physical=False)
    assert opt.value > 1


@pytest.mark.parametrize("nf", [GAMMA_1, GAMMA_2], ids=["gamma1", "gamma2"])
def test_pipeline_reaches_schmidt_symmetric_state(nf):
    rep = fl.full_pipeline(nf.covariance(), check_physical=False)
    assert [s.name for s in rep.stages] == ["input", "normal_form", "phase", "symmetrize", "squeeze"]
    assert rep.detected and rep.schmidt_symmetric
    f = rep.final_normal_form
    assert abs(f.a - f.b) < 1e-8 and f.c >= 0 and f.d <= 0
    norm = cr.realignment_trace_norm_normal_form(f).value
    assert rep.final_trace_R == pytest.approx(norm, abs=1e-8)


def test_pipeline_stage_values_for_gamma2():
    rep = fl.full_pipeline(GAMMA_2.covariance())
    vals = [s.trace_R for s in rep.stages]
    assert vals[0] == pytest.approx(0.30261, abs=1e-5)
    assert vals[1] == pytest.approx(vals[0])
    assert vals[2] == pytest.approx(1.15935, abs=1e-5)
    assert rep.stages[2].note == "pi shift on mode 1"


@pytest.mark.parametrize("V", [0.1, 0.5, 0.95])
def test_pipeline_detects_noisy_epr_below_unit_noise(V):
    assert fl.full_pipeline(gs.tmsv_with_noise(0.3, V)).detected


def test_pipeline_on_vacuum_and_same_sign_correlations():
    rep = fl.full_pipeline(gs.vacuum(2))
    assert not rep.detected
    assert all(s.trace_R <= 1 + 1e-12 for s in rep.stages)
    rep = fl.full_pipeline(NormalForm(1.0, 1.0, 0.2, 0.1).covariance())
    assert rep.inconclusive and not rep.detected


def test_pipeline_needs_two_modes():
    with pytest.raises(StructuralError):
        fl.full_pipeline(gs.vacuum(4))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, t=st.floats(0.02, 1.0))
def test_filtering_preserves_separability(seed, t):
    g = random_separable(1, 1, np.random.default_rng(seed))
    for target in Subsystem:
        f = fl.filter_covariance(g, FilterSpec(FilterKind.ATTENUATE, target, t))
        assert not cr.weak_realignment(f).detected
        assert not cr.ppt(f).detected


def test_witness_view():
    w = fl.dual_witness_view(ATT_A.at(1.0))
    assert w.is_omega
    w = fl.dual_witness_view(ATT_A.at(0.49))
    assert w.tau == pytest.approx(0.7)
    assert np.allclose(w.schmidt_weights(4), 0.7 ** np.arange(4))
    assert w.norm_squared == pytest.approx(1 / 0.51)
    with pytest.raises(ValueError):
        fl.dual_witness_view(FilterSpec(FilterKind.AMPLIFY, Subsystem.A, 2.0))
