import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre, factorial

from cvrealign import criteria as cr
from cvrealign import fock
from cvrealign import gaussian as gs
from cvrealign.errors import TruncationError

from _states import random_density, random_separable_density

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def ket(n: int, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[n] = 1.0
    return v


@pytest.mark.parametrize("n", [(0, 1, 2, 3), (3, 3, 0, 1), (2, 0, 0, 2)])
def test_realign_on_product_of_outer_products(n):
    d = 4
    n1, n2, n3, n4 = n
    e = lambda a, b: np.outer(ket(a, d), ket(b, d))
    rho = fock.FockOperator(np.kron(e(n1, n2), e(n3, n4)), d)
    assert np.array_equal(fock.realign(rho).matrix, np.kron(e(n1, n3), e(n2, n4)))


def test_realign_identity_is_omega_projector():
    d = 5
    r = fock.realign(fock.FockOperator(np.eye(d * d), d)).matrix
    v = fock.omega_vector(d)
    assert np.array_equal(r, np.outer(v, v))


@pytest.mark.parametrize("tau", [0.3, 0.5])
def test_realigned_tmsv_is_thermal_product(tau):
    d = 60
    r = fock.realign(fock.tmsv(tau, d)).matrix
    expected = (1 + tau) / (1 - tau) * fock.thermal(tau, d).matrix
    assert np.allclose(r, expected, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(2, 6))
def test_realign_involution_and_frobenius_isometry(seed, d):
    rho = random_density(d, np.random.default_rng(seed))
    r = fock.realign(rho)
    assert np.array_equal(fock.realign(r).matrix, rho.matrix)
    assert np.linalg.norm(r.matrix) == pytest.approx(np.linalg.norm(rho.matrix), rel=1e-12)


@pytest.mark.parametrize("tau, expected", [(0.5, 3.0), (1 / 3, 2.0)])
def test_trace_norm_of_realigned_tmsv(tau, expected):
    assert fock.trace_norm(fock.realign(fock.tmsv(tau, 60))) == pytest.approx(expected, abs=1e-10)


def test_trace_norm_of_thermal_realignment():
    # the realigned thermal product is rank one with norm sum p_n^2 per mode
    tau = 0.5
    rho = fock.thermal(tau, 60)
    assert fock.trace_norm(fock.realign(rho)) == pytest.approx((1 - tau) / (1 + tau), abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_trace_norm_maximally_entangled_and_mixed(d):
    D = 6
    assert fock.trace_norm(fock.realign(fock.maximally_entangled(d, D))) == pytest.approx(d)
    assert fock.trace_norm(fock.realign(fock.maximally_mixed(d, D))) == pytest.approx(1 / d)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(2, 5))
def test_trace_norm_of_hermitian_is_sum_of_abs_eigenvalues(seed, d):
    rho = random_density(d, np.random.default_rng(seed))
    pt = fock.partial_transpose(rho).matrix
    assert fock.trace_norm(pt) == pytest.approx(np.abs(np.linalg.eigvalsh(pt)).sum(), rel=1e-10)


def test_block_svd_matches_dense_svd():
    rho = fock.realign(fock.fock_phase(fock.tmsv(0.3, 20), 0.7))
    dense = np.linalg.svd(rho.matrix, compute_uv=False)
    blocks = np.sort(fock.singular_values(rho))[::-1]
    assert np.allclose(blocks[: dense.size], dense[: blocks.size], atol=1e-12)
    assert fock.trace_norm(rho) == pytest.approx(dense.sum(), rel=1e-12)


def test_trace_R_examples():
    d = 8
    assert fock.trace_R(fock.omega_prime(d)) == pytest.approx(0.0, abs=1e-12)
    assert fock.trace_R(fock.thermal(0.0, d)) == pytest.approx(1.0)


def test_schmidt_spectrum_purity_and_product():
    rng = np.random.default_rng(4)
    rho = random_density(3, rng)
    spec = fock.schmidt_spectrum(rho)
    assert spec.sum_of_squares == pytest.approx(np.trace(rho.matrix @ rho.matrix).real, rel=1e-10)
    spec = fock.schmidt_spectrum(fock.thermal((0.2, 0.6), 40))
    assert np.count_nonzero(spec.coefficients > 1e-12) == 1


@pytest.mark.parametrize("tau, t", [(0.5, 0.3), (0.6, 0.81)])
def test_attenuated_tmsv_is_tmsv(tau, t):
    d = 60
    out, weight = fock.fock_attenuate(fock.tmsv(tau, d), t)
    tau2 = tau * math.sqrt(t)
    assert np.allclose(out.matrix, fock.tmsv(tau2, d).matrix, atol=1e-12)
    assert weight == pytest.approx((1 - tau**2) / (1 - tau2**2), rel=1e-10)


def test_phase_pi_flips_correlations():
    rho = fock.fock_phase(fock.tmsv(0.5, 60), math.pi)
    assert fock.trace_R(rho) == pytest.approx((1 - 0.5) / (1 + 0.5), abs=1e-12)


def test_displacement_matrix_matches_laguerre_formula():
    d, alpha = 10, 0.7 - 0.4j
    D = fock.displacement_matrix(alpha, d)
    for m in range(d):
        for n in range(m + 1):
            expected = (
                math.sqrt(factorial(n) / factorial(m))
                * alpha ** (m - n)
                * math.exp(-abs(alpha) ** 2 / 2)
                * eval_genlaguerre(n, m - n, abs(alpha) ** 2)
            )
            assert D[m, n] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("mode", [0, 1])
def test_noisy_tmsv_covariance_matches_gaussian(mode):
    r, V = 0.3, 0.4
    rho = fock.tmsv_with_noise(r, V, 40, mode)
    assert rho.is_density(tol=1e-9)
    assert np.allclose(fock.covariance(rho), gs.tmsv_with_noise(r, V, mode), atol=1e-6)


def test_weak_route_matches_omega_overlap():
    r, V = 0.3, 0.4
    rho = fock.tmsv_with_noise(r, V, 40)
    assert fock.trace_R(rho) == pytest.approx(cr.weak_realignment(gs.tmsv_with_noise(r, V)).value, abs=1e-7)


def test_truncation_and_parameter_errors():
    with pytest.raises(TruncationError):
        fock.tmsv(0.9, 40)
    with pytest.raises(ValueError):
        fock.tmsv(1.0, 10)
    with pytest.raises(ValueError):
        fock.fock_attenuate(fock.tmsv(0.2, 10), 0.0)
    with pytest.raises(ValueError):
        fock.additive_noise_fock(fock.tmsv(0.2, 10), -0.1)
    with pytest.raises(ValueError):
        fock.FockOperator(np.eye(3), 2)


def test_with_escalation_steps_cutoff():
    rho = fock.with_escalation(lambda d: fock.tmsv(0.75, d))
    assert rho.cutoff == 40 and rho.tail <= fock.TAIL_TARGET
    rho = fock.with_escalation(lambda d: fock.tmsv(0.8, d), tail_target=1e-15)
    assert rho.cutoff == 80
    with pytest.raises(TruncationError):
        fock.with_escalation(lambda d: fock.tmsv(0.95, d))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, d=st.integers(2, 5))
def test_f_operator_identities(seed, d):
    rng = np.random.default_rng(seed)
    rep = fock.f_operator_checks(random_density(d, rng), random_density(d, rng))
    assert rep.passed, rep.residuals


def test_symmetric_subspace_state_saturates_bound():
    # a state supported on the symmetric subspace has rho F = rho, so Tr R = ||R||
    rho = fock.tmsv(0.5, 30)
    rep = fock.f_operator_checks(rho)
    assert rep.lower_bounds["trace norm - Tr R"] == pytest.approx(0.0, abs=1e-10)


def test_witness_on_tmsv():
    tau = 0.5
    rho = fock.tmsv(tau, 30)
    w = fock.schmidt_witness(rho)
    # truncation at D = 30 costs about tau^30 in the Schmidt sum
    assert np.trace(rho.matrix @ w.matrix).real == pytest.approx(1 - 3.0, abs=1e-7)
    rep = fock.witness_nonneg_check(fock.tmsv(tau, 10), n_probes=200)
    assert rep.passed, (rep.residuals, rep.lower_bounds)


def test_witness_from_separable_reference():
    rho = random_separable_density(3, np.random.default_rng(2))
    assert fock.witness_nonneg_check(rho, n_probes=200).passed


@pytest.mark.parametrize("t", [0.2, 0.5, 1.0])
def test_dual_witness_sides_agree(t):
    lhs, rhs = fock.dual_witness_sides(fock.tmsv_with_noise(0.3, 0.4, 30), t)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_oracle_record_fields():
    rec = fock.oracle_record("tmsv", fock.tmsv(0.5, 60))
    assert set(rec) == {"state_id", "D", "tail", "trace_R", "trace_norm_R", "schmidt_sum"}
    assert rec["trace_R"] == pytest.approx(3.0, abs=1e-10)
    assert rec["trace_norm_R"] == pytest.approx(rec["schmidt_sum"])
