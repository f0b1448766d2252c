"""Brute-force checks in a truncated two-mode Fock basis.

Operators are dense complex ``D^2 x D^2`` matrices whose row index is the pair
``(i, k)`` flattened as ``i * D + k`` (first mode, second mode) and whose column
index is ``(j, l)``. The realignment map is then a pure index permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, roots_laguerre

from .errors import TruncationError

DEFAULT_CUTOFF = 40
ESCALATION = (40, 60, 80)
TAIL_TARGET = 1e-8
MAX_DEFICIT = 1e-6
NOISE_ORDER = 21
NOISE_TRACE_TOL = 1e-8


@dataclass(frozen=True)
class FockOperator:
    """Two-mode operator truncated at ``cutoff`` photons per mode.

    Attributes:
        matrix: complex ``D^2 x D^2`` array, read-only.
        cutoff: ``D``.
        tail: trace missing because of the truncation (0 for exact operators).
    """

    matrix: np.ndarray
    cutoff: int
    tail: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d2 = self.cutoff**2
        if m.shape != (d2, d2):
            raise ValueError(f"expected {d2}x{d2} matrix for cutoff {self.cutoff}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_tensor(cls, t: np.ndarray, tail: float = 0.0) -> "FockOperator":
        """Build from a ``[i, k, j, l]`` tensor."""
        d = t.shape[0]
        return cls(t.reshape(d * d, d * d), d, tail)

    def tensor(self) -> np.ndarray:
        """View as ``[i, k, j, l]``."""
        d = self.cutoff
        return self.matrix.reshape(d, d, d, d)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_density(self, tol: float = 1e-10) -> bool:
        if self.hermitian_defect() > 1e-12:
            return False
        tr = self.trace()
        if not (1 - self.tail - 1e-12 <= tr <= 1 + 1e-12):
            return False
        return float(np.linalg.eigvalsh(self.matrix)[0]) >= -tol


def _require_tail(tail: float, cutoff: int) -> None:
    if tail > MAX_DEFICIT:
        raise TruncationError(f"truncation deficit {tail:.3e} at D={cutoff}; use a larger cutoff")


# -- the realignment map and friends ---------------------------------------------------


def realign(rho: FockOperator) -> FockOperator:
    """``R[(i,j),(k,l)] = rho[(i,k),(j,l)]``. An exact involution."""
    return FockOperator.from_tensor(rho.tensor().transpose(0, 2, 1, 3))


def partial_transpose(rho: FockOperator) -> FockOperator:
    """Transpose on the second mode: ``rho^T2[(i,k),(j,l)] = rho[(i,l),(j,k)]``."""
    return FockOperator.from_tensor(rho.tensor().transpose(0, 3, 2, 1), rho.tail)


def swap_operator(cutoff: int) -> FockOperator:
    """``F = sum |ij><ji|``."""
    d = cutoff
    f = np.zeros((d, d, d, d))
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    f[i, j, j, i] = 1.0
    return FockOperator.from_tensor(f)


def omega_vector(cutoff: int, signs: Optional[np.ndarray] = None) -> np.ndarray:
    """Unnormalized ``sum_i s_i |ii>``; all ``s_i = 1`` unless ``signs`` is given."""
    v = np.zeros(cutoff * cutoff, dtype=complex)
    idx = np.arange(cutoff) * (cutoff + 1)
    v[idx] = 1.0 if signs is None else signs
    return v


def omega_prime(cutoff: int) -> FockOperator:
    """Projector on the alternating-sign vector ``sum (-1)^i |ii>`` (unnormalized)."""
    v = omega_vector(cutoff, (-1.0) ** np.arange(cutoff))
    return FockOperator(np.outer(v, v.conj()), cutoff)


def trace_R(rho: FockOperator) -> float:
    """``<Omega|rho|Omega> = sum_ij rho[(i,i),(j,j)]``."""
    idx = np.arange(rho.cutoff) * (rho.cutoff + 1)
    return float(rho.matrix[np.ix_(idx, idx)].sum().real)


def _blocks(m: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Row/column index sets of the connected blocks of the nonzero pattern."""
    n_rows, n_cols = m.shape
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        return []
    graph = coo_matrix((np.ones(rows.size), (rows, cols + n_rows)), shape=(n_rows + n_cols,) * 2)
    _, labels = connected_components(graph, directed=False)
    row_lab, col_lab = labels[:n_rows], labels[n_rows:]
    used = np.unique(row_lab[rows])
    order_r, order_c = np.argsort(row_lab, kind="stable"), np.argsort(col_lab, kind="stable")
    starts_r = np.searchsorted(row_lab[order_r], used)
    ends_r = np.searchsorted(row_lab[order_r], used, side="right")
    starts_c = np.searchsorted(col_lab[order_c], used)
    ends_c = np.searchsorted(col_lab[order_c], used, side="right")
    return [
        (order_r[a:b], order_c[c:e]) for a, b, c, e in zip(starts_r, ends_r, starts_c, ends_c)
    ]


def singular_values(m: FockOperator | np.ndarray) -> np.ndarray:
    """All nonzero-block singular values, sorted nonincreasing.

    The nonzero pattern is split into independent blocks first; phase-symmetric
    states break into many small blocks, which keeps large cutoffs affordable.
    """
    a = m.matrix if isinstance(m, FockOperator) else np.asarray(m)
    by_shape: dict[tuple[int, int], list[np.ndarray]] = {}
    for r, c in _blocks(a):
        by_shape.setdefault((r.size, c.size), []).append(a[np.ix_(r, c)])
    out = [np.linalg.svd(np.stack(bs), compute_uv=False).ravel() for bs in by_shape.values()]
    if not out:
        return np.zeros(0)
    return np.sort(np.concatenate(out))[::-1]


def trace_norm(m: FockOperator | np.ndarray) -> float:
    """Sum of singular values."""
    return float(singular_values(m).sum())


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Operator Schmidt coefficients (singular values of the realigned operator)."""

    coefficients: np.ndarray
    sum: float
    sum_of_squares: float


def schmidt_spectrum(rho: FockOperator) -> SchmidtSpectrum:
    lam = singular_values(realign(rho))
    return SchmidtSpectrum(lam, float(lam.sum()), float(np.sum(lam**2)))


# -- builders -------------------------------------------------------------------------


def _check_tau(tau: float) -> None:
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")


def tmsv(tau: float, cutoff: int = DEFAULT_CUTOFF) -> FockOperator:
    """``sqrt(1 - tau^2) sum tau^i |ii>``, truncated (not renormalized)."""
    _check_tau(tau)
    tail = tau ** (2 * cutoff)
    _require_tail(tail, cutoff)
    v = omega_vector(cutoff, math.sqrt(1 - tau**2) * tau ** np.arange(cutoff))
    return FockOperator(np.outer(v, v.conj()), cutoff, tail)


def thermal(tau: float | tuple[float, float], cutoff: int = DEFAULT_CUTOFF) -> FockOperator:
    """Product of single-mode thermal states ``(1 - tau) sum tau^n |n><n|``."""
    ta, tb = (tau, tau) if np.isscalar(tau) else tau
    _check_tau(ta)
    _check_tau(tb)
    n = np.arange(cutoff)
    pa, pb = (1 - ta) * ta**n, (1 - tb) * tb**n
    tail = 1 - pa.sum() * pb.sum()
    _require_tail(tail, cutoff)
    return FockOperator(np.diag(np.kron(pa, pb)).astype(complex), cutoff, tail)


def maximally_entangled(d: int, cutoff: int) -> FockOperator:
    """``|Omega_d><Omega_d| / d`` embedded in a cutoff-``cutoff`` space."""
    v = omega_vector(cutoff, np.r_[np.ones(d), np.zeros(cutoff - d)])
    return FockOperator(np.outer(v, v) / d, cutoff)


def maximally_mixed(d: int, cutoff: int) -> FockOperator:
    """``(1_d x 1_d) / d^2`` embedded in a cutoff-``cutoff`` space."""
    p = np.r_[np.ones(d), np.zeros(cutoff - d)]
    return FockOperator(np.diag(np.kron(p, p)) / d**2, cutoff)


def _local(diag: np.ndarray, mode: int) -> np.ndarray:
    one = np.ones(diag.size)
    return np.kron(diag, one) if mode == 0 else np.kron(one, diag)


def fock_attenuate(rho: FockOperator, t: float, mode: int = 0) -> tuple[FockOperator, float]:
    """Apply ``t^{n/2}`` to one mode and renormalize.

    Returns:
        The filtered state and the success weight ``Tr(K rho K) / Tr(rho)``.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    k = _local(t ** (np.arange(rho.cutoff) / 2), mode)
    out = k[:, None] * rho.matrix * k[None, :]
    weight = float(np.trace(out).real) / rho.trace()
    # population above the cutoff is rescaled by at most max(t, 1)^D
    tail = rho.tail * max(t, 1.0) ** rho.cutoff / weight
    return FockOperator(out / np.trace(out).real, rho.cutoff, min(tail, 1.0)), weight


def fock_phase(rho: FockOperator, theta: float, mode: int = 1) -> FockOperator:
    """Conjugate one mode by ``exp(i theta n)``."""
    u = _local(np.exp(1j * theta * np.arange(rho.cutoff)), mode)
    return FockOperator(u[:, None] * rho.matrix * u.conj()[None, :], rho.cutoff, rho.tail)


def displacement_matrix(alpha: complex, cutoff: int) -> np.ndarray:
    """``<m|D(alpha)|n>`` for ``m, n < cutoff`` by the standard recurrence."""
    d = np.zeros((cutoff, cutoff), dtype=complex if np.iscomplexobj(alpha) else float)
    sq = np.sqrt(np.arange(cutoff))
    d[0, 0] = np.exp(-abs(alpha) ** 2 / 2)
    for m in range(1, cutoff):
        d[m, 0] = alpha / sq[m] * d[m - 1, 0]
    for n in range(1, cutoff):
        d[0, n] = -np.conj(alpha) / sq[n] * d[0, n - 1]
        d[1:, n] = (-np.conj(alpha) * d[1:, n - 1] + sq[1:] * d[:-1, n - 1]) / sq[n]
    return d


def _noise_coefficients(V: float, cutoff: int, order: int) -> np.ndarray:
    """``c[m + D - 1, a, b] = E[<a|D|a-m> <b|D|b-m>]`` for the isotropic Gaussian mixture.

    The angular average kills every term with ``a - i != b - j``; the radial
    integral in ``u = |alpha|^2`` is done by Gauss-Laguerre quadrature against
    the weight ``exp(-u (1 + 1/V))``.
    """
    d = cutoff
    kappa = 1 + 1 / V
    nodes, weights = roots_laguerre(order)
    u = nodes / kappa
    w = weights * np.exp(u) / (V * kappa)
    a = np.arange(d)
    shifts = np.arange(-(d - 1), d)
    src = a[None, :] - shifts[:, None]
    valid = (src >= 0) & (src < d)
    src_c = np.clip(src, 0, d - 1)
    coeff = np.zeros((shifts.size, d, d))
    for uk, wk in zip(u, w):
        dm = displacement_matrix(math.sqrt(uk), d)
        diag = np.where(valid, dm[a[None, :], src_c], 0.0)
        coeff += wk * diag[:, :, None] * diag[:, None, :]
    return coeff


def _apply_noise(rho_t: np.ndarray, coeff: np.ndarray, mode: int) -> np.ndarray:
    d = rho_t.shape[0]
    # bring the noisy mode's ket/bra indices to axes 0 and 2
    x = rho_t if mode == 0 else rho_t.transpose(1, 0, 3, 2)
    out = np.zeros_like(x)
    for s in range(-(d - 1), d):
        c = coeff[s + d - 1]
        if s >= 0:
            out[s:, :, s:, :] += c[s:, s:][:, None, :, None] * x[: d - s, :, : d - s, :]
        else:
            out[: d + s, :, : d + s, :] += c[: d + s, : d + s][:, None, :, None] * x[-s:, :, -s:, :]
    return out if mode == 0 else out.transpose(1, 0, 3, 2)


def additive_noise_fock(
    rho: FockOperator, V: float, mode: int = 0, order: int = NOISE_ORDER
) -> FockOperator:
    """Random displacements on one mode with ``Var(x_d) = Var(p_d) = V``.

    The quadrature order doubles from ``order`` until the output trace is stable
    to 1e-8.

    Raises:
        ValueError: for ``V < 0``.
        TruncationError: if the output misses more than 1e-6 of its trace.
    """
    if V < 0:
        raise ValueError(f"noise variance must be nonnegative, got {V}")
    if V == 0:
        return rho
    x = rho.tensor()
    prev = None
    while True:
        out = _apply_noise(x, _noise_coefficients(V, rho.cutoff, order), mode)
        tr = float(np.einsum("ikik->", out).real)
        if prev is not None and abs(tr - prev) < NOISE_TRACE_TOL:
            break
        prev, order = tr, 2 * order
    tail = rho.tail + (rho.trace() - tr)
    _require_tail(tail, rho.cutoff)
    return FockOperator.from_tensor(out, max(tail, 0.0))


def tmsv_with_noise(r: float, V: float, cutoff: int = DEFAULT_CUTOFF, mode: int = 0) -> FockOperator:
    """Fock counterpart of the noisy EPR state used throughout the Gaussian module."""
    return additive_noise_fock(tmsv(math.tanh(r), cutoff), V, mode)


def with_escalation(
    build: Callable[[int], FockOperator],
    cutoffs: Sequence[int] = ESCALATION,
    tail_target: float = TAIL_TARGET,
) -> FockOperator:
    """Call ``build(D)`` for increasing ``D`` until the tail is below ``tail_target``.

    Raises:
        TruncationError: if the largest cutoff still misses the target.
    """
    last = None
    for d in cutoffs:
        try:
            op = build(d)
        except TruncationError as exc:
            last = exc
            continue
        if op.tail <= tail_target:
            return op
        last = TruncationError(f"tail {op.tail:.3e} at D={d} exceeds {tail_target:.0e}")
    raise TruncationError(f"cutoff escalation exhausted: {last}")


# -- moments ---------------------------------------------------------------------------


def quadrature_operators(cutoff: int) -> list[np.ndarray]:
    """``[x1, p1, x2, p2]`` on the truncated two-mode space."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    x = (a + a.conj().T) / math.sqrt(2)
    p = -1j * (a - a.conj().T) / math.sqrt(2)
    one = np.eye(cutoff)
    return [np.kron(x, one), np.kron(p, one), np.kron(one, x), np.kron(one, p)]


def covariance(rho: FockOperator) -> np.ndarray:
    """Symmetrized second moments minus mean products, normalized by the trace.

    Only trustworthy when the population near the cutoff is negligible.
    """
    ops = quadrature_operators(rho.cutoff)
    m = rho.matrix / np.trace(rho.matrix).real
    means = np.array([np.trace(m @ q).real for q in ops])
    g = np.empty((4, 4))
    for i, qi in enumerate(ops):
        for j, qj in enumerate(ops[i:], start=i):
            val = np.trace(m @ (qi @ qj + qj @ qi)).real / 2 - means[i] * means[j]
            g[i, j] = g[j, i] = val
    return g


# -- property reports -----------------------------------------------------------------


@dataclass
class PropertyReport:
    """Named residuals with a shared tolerance; ``passed`` when all are within it."""

    tolerance: float
    residuals: dict[str, float] = field(default_factory=dict)
    lower_bounds: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(v <= self.tolerance for v in self.residuals.values())
        return ok and all(v >= -self.tolerance for v in self.lower_bounds.values())


def _pt_matrix(m: np.ndarray, d: int) -> np.ndarray:
    return m.reshape(d, d, d, d).transpose(0, 3, 2, 1).reshape(d * d, d * d)


def _realign_matrix(m: np.ndarray, d: int) -> np.ndarray:
    return m.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def dual_realign(rho: FockOperator) -> FockOperator:
    """Adjoint of the realignment map under the Hilbert-Schmidt product, ``(F rho^T2)^T2``."""
    d = rho.cutoff
    f = swap_operator(d).matrix
    return FockOperator(_pt_matrix(f @ _pt_matrix(rho.matrix, d), d), d)


def f_operator_checks(
    rho: FockOperator, other: Optional[FockOperator] = None, tol: float = 1e-9
) -> PropertyReport:
    """Swap-operator identities for one operator and the dual-map adjointness for a pair.

    ``other`` defaults to ``rho`` itself when not given.
    """
    d = rho.cutoff
    m = rho.matrix
    f = swap_operator(d).matrix
    r = realign(rho).matrix
    pt = _pt_matrix(m, d)
    rep = PropertyReport(tol)
    rep.residuals["R = (rho^T2 F)^T2"] = float(np.abs(r - _pt_matrix(pt @ f, d)).max())
    rep.residuals["R = (rho F)^T2 F"] = float(np.abs(r - _pt_matrix(m @ f, d) @ f).max())
    norm_pt = trace_norm(pt)
    rep.residuals["||A F|| = ||A||"] = abs(trace_norm(pt @ f) - norm_pt)
    rep.residuals["||R^T2|| = ||rho^T2||"] = abs(trace_norm(_pt_matrix(r, d)) - norm_pt)
    rep.residuals["F^2 = 1"] = float(np.abs(f @ f - np.eye(d * d)).max())
    rep.residuals["involution"] = float(np.abs(_realign_matrix(r, d) - m).max())
    o = (other or rho).matrix
    lhs = np.trace(o @ r)
    rhs = np.trace(dual_realign(FockOperator(o, d)).matrix @ m)
    rep.residuals["dual adjointness"] = float(abs(lhs - rhs))
    rep.lower_bounds["trace norm - Tr R"] = trace_norm(r) - trace_R(rho)
    return rep


@dataclass(frozen=True)
class SchmidtWitness:
    """``W = 1 - sum_i A_i^dag (x) B_i^dag`` built from a reference operator's Schmidt basis."""

    matrix: np.ndarray
    coefficients: np.ndarray
    cutoff: int


def schmidt_witness(reference: FockOperator, rank_tol: float = 1e-14) -> SchmidtWitness:
    """Witness from the singular vectors of the realigned reference state.

    ``R(rho) = sum lam_i |A_i><B_i^*|`` gives ``rho = sum lam_i A_i (x) B_i``; using
    the adjoints makes ``Tr(rho W) = Tr rho - sum lam_i``.
    """
    d = reference.cutoff
    u, s, vh = np.linalg.svd(realign(reference).matrix)
    keep = s > rank_tol * max(s[0], 1.0)
    u, s, vh = u[:, keep], s[keep], vh[keep]
    # vec(A_i) = u[:, i] and vec(B_i) = vh[i] (row-major), so A_i^dag (x) B_i^dag
    # realigns to vec(A_i^dag) vec(B_i^dag)^T
    a_dag = u.T.reshape(-1, d, d).conj().transpose(0, 2, 1).reshape(-1, d * d)
    b_dag = vh.reshape(-1, d, d).conj().transpose(0, 2, 1).reshape(-1, d * d)
    total = _realign_matrix(a_dag.T @ b_dag, d)
    return SchmidtWitness(np.eye(d * d) - total, s, d)


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def coherent_vector(alpha: complex, d: int) -> np.ndarray:
    """Truncated coherent state, renormalized inside the cutoff."""
    n = np.arange(d)
    v = np.exp(n * np.log(complex(alpha)) - gammaln(n + 1) / 2) if alpha != 0 else (n == 0) * 1.0
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def witness_nonneg_check(
    reference: FockOperator,
    n_probes: int = 1000,
    seed: int = 0,
    tol: float = 1e-9,
) -> PropertyReport:
    """Evaluate the Schmidt witness on random product states and on the reference.

    Half of the probes are Haar-random product vectors, half are products of
    truncated coherent states.
    """
    d = reference.cutoff
    w = schmidt_witness(reference)
    rng = np.random.default_rng(seed)
    probes = []
    for k in range(n_probes):
        if k % 2:
            a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
            probes.append(np.kron(coherent_vector(a, d), coherent_vector(b, d)))
        else:
            probes.append(np.kron(random_pure(d, rng), random_pure(d, rng)))
    psi = np.array(probes).T
    vals = np.einsum("ik,ik->k", psi.conj(), w.matrix @ psi)
    worst, worst_imag = float(vals.real.min()), float(np.abs(vals.imag).max())
    rep = PropertyReport(tol)
    rep.lower_bounds["min Tr(rho_sep W)"] = worst
    rep.residuals["imaginary part"] = worst_imag
    self_value = np.trace(reference.matrix @ w.matrix).real
    rep.residuals["Tr(rho W) - (Tr rho - sum lam)"] = float(
        abs(self_value - (reference.trace() - w.coefficients.sum()))
    )
    return rep


# -- dual picture of the attenuation filter ----------------------------------------------


def filtered_omega_vector(t: float, cutoff: int, mode: int = 0) -> np.ndarray:
    """``(t^{n/2} (x) 1)|Omega> = sum t^{n/2} |nn>`` (unnormalized)."""
    return omega_vector(cutoff, t ** (np.arange(cutoff) / 2))


def dual_witness_sides(rho: FockOperator, t: float, mode: int = 0) -> tuple[float, float]:
    """Both sides of ``Tr R(filtered rho) = <psi_t|rho|psi_t> / weight``."""
    filtered, weight = fock_attenuate(rho, t, mode)
    psi = filtered_omega_vector(t, rho.cutoff, mode)
    rhs = np.vdot(psi, rho.matrix @ psi).real / (weight * rho.trace())
    return trace_R(filtered), float(rhs)


# -- export -----------------------------------------------------------------------------


def norm_error_bound(rho: FockOperator, value: float) -> float:
    """Rough bound on the truncation error of realignment norms.

    Schmidt amplitudes decay like the square root of the populations, so the
    error in ``Tr R`` or ``||R||`` scales with ``sqrt(tail)`` rather than ``tail``.
    """
    return 2 * math.sqrt(rho.tail) * max(1.0, abs(value))


def oracle_record(state_id: str, rho: FockOperator) -> dict:
    """``{state_id, D, tail, trace_R, trace_norm_R, schmidt_sum}``."""
    spec = schmidt_spectrum(rho)
    return {
        "state_id": state_id,
        "D": rho.cutoff,
        "tail": rho.tail,
        "trace_R": trace_R(rho),
        "trace_norm_R": trace_norm(realign(rho)),
        "schmidt_sum": spec.sum,
    }
