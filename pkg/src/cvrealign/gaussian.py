r"""Covariance-matrix toolkit for zero-mean Gaussian states.

Conventions:
    * quadratures ordered ``(x_1, p_1, x_2, p_2, ..., x_N, p_N)``;
    * :math:`x = (a + a^\dagger)/\sqrt{2}`, :math:`p = -i(a - a^\dagger)/\sqrt{2}`,
      so the vacuum covariance matrix is ``I/2``;
    * Gaussian unitaries act as ``gamma -> S @ gamma @ S.T``.

Mode indices are 0-based everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import StructuralError, UnphysicalError

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
SYMPLECTIC_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """Immutable covariance matrix with its mode count.

    ``entries`` is stored as a read-only float array. The constructor only
    checks structure; physicality is the job of :func:`validate`.
    """

    entries: np.ndarray
    symmetry_defect: float = field(default=0.0, compare=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        _check_square_even(m)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n_modes(self) -> int:
        return self.entries.shape[0] // 2

    @classmethod
    def symmetrized(cls, entries) -> "CovarianceMatrix":
        """Build from a possibly asymmetric matrix by averaging with its transpose."""
        m = np.array(entries, dtype=float)
        _check_square_even(m)
        defect = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        return cls((m + m.T) / 2, symmetry_defect=defect)

    def to_dict(self) -> dict:
        return {"n_modes": self.n_modes, "entries": self.entries.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "CovarianceMatrix":
        try:
            n = int(data["n_modes"])
            flat = np.asarray(data["entries"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"malformed covariance record: {exc}") from exc
        if n < 1 or flat.size != 4 * n * n:
            raise StructuralError(
                f"entries must hold 4*n_modes^2 = {4 * n * n} reals, got {flat.size}"
            )
        return cls.symmetrized(flat.reshape(2 * n, 2 * n))


Matrix = Union[np.ndarray, CovarianceMatrix, Sequence[Sequence[float]]]


def as_array(gamma: Matrix) -> np.ndarray:
    """Return a float ndarray view of ``gamma`` (plain array or CovarianceMatrix)."""
    if isinstance(gamma, CovarianceMatrix):
        return gamma.entries
    return np.asarray(gamma, dtype=float)


def _check_square_even(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0 or m.shape[0] % 2:
        raise StructuralError(f"dimension must be even and positive, got {m.shape[0]}")


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form ``⊕ [[0, 1], [-1, 0]]`` on ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


# ---------------------------------------------------------------------------
# Spectrum and validation
# ---------------------------------------------------------------------------


def symplectic_eigenvalues(gamma: Matrix) -> np.ndarray:
    """Williamson spectrum of ``gamma``, sorted ascending (one value per mode)."""
    g = as_array(gamma)
    _check_square_even(g)
    n = g.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * omega(n) @ g))
    return np.sort(ev)[::2]


@dataclass(frozen=True)
class ValidationReport:
    n_modes: int
    symmetry_defect: float
    symplectic_eigenvalues: np.ndarray
    positive_definite: bool
    passed: bool

    @property
    def min_symplectic_eigenvalue(self) -> float:
        return float(self.symplectic_eigenvalues[0])


def validate(gamma: Matrix) -> ValidationReport:
    """Check symmetry, positive definiteness and the uncertainty principle.

    Raises:
        StructuralError: if ``gamma`` is not square with even dimension.
    """
    g = as_array(gamma)
    _check_square_even(g)
    defect = float(np.max(np.abs(g - g.T)))
    if isinstance(gamma, CovarianceMatrix):
        defect = max(defect, gamma.symmetry_defect)
    gs = (g + g.T) / 2
    try:
        np.linalg.cholesky(gs)
        pd = True
    except np.linalg.LinAlgError:
        pd = False
    nu = symplectic_eigenvalues(gs)
    passed = defect <= SYMMETRY_TOL and pd and nu[0] >= 0.5 - PHYSICAL_TOL
    return ValidationReport(g.shape[0] // 2, defect, nu, pd, bool(passed))


def require_physical(gamma: Matrix) -> np.ndarray:
    """Return ``gamma`` as an array, raising :class:`UnphysicalError` if it fails validation."""
    report = validate(gamma)
    if not report.passed:
        raise UnphysicalError(
            "covariance matrix is not physical "
            f"(min symplectic eigenvalue {report.min_symplectic_eigenvalue:.6g}, "
            f"symmetry defect {report.symmetry_defect:.3g}, "
            f"positive definite {report.positive_definite})"
        )
    return as_array(gamma)


def is_symplectic(S: np.ndarray, atol: float = SYMPLECTIC_TOL) -> bool:
    S = np.asarray(S, dtype=float)
    _check_square_even(S)
    w = omega(S.shape[0] // 2)
    return bool(np.allclose(S @ w @ S.T, w, rtol=0, atol=atol))


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def apply_symplectic(gamma: Matrix, S: np.ndarray) -> np.ndarray:
    """Return ``S @ gamma @ S.T``."""
    g = as_array(gamma)
    S = np.asarray(S, dtype=float)
    if S.shape != g.shape:
        raise StructuralError(f"transform shape {S.shape} does not match covariance {g.shape}")
    return S @ g @ S.T


def embed(n_modes: int, modes: Sequence[int], block: np.ndarray) -> np.ndarray:
    """Embed a transform acting on ``modes`` into the identity on ``n_modes`` modes."""
    block = np.asarray(block, dtype=float)
    if block.shape != (2 * len(modes), 2 * len(modes)):
        raise StructuralError(f"block of shape {block.shape} does not fit {len(modes)} modes")
    for m in modes:
        _check_mode(n_modes, m)
    idx = quadrature_indices(modes)
    S = np.eye(2 * n_modes)
    S[np.ix_(idx, idx)] = block
    return S


def quadrature_indices(modes: Iterable[int]) -> list[int]:
    """Row indices ``[x_m, p_m, ...]`` for the listed modes."""
    return [k for m in modes for k in (2 * m, 2 * m + 1)]


def _check_mode(n_modes: int, mode: int) -> None:
    if not 0 <= mode < n_modes:
        raise StructuralError(f"mode index {mode} out of range for {n_modes} modes")


def _mixing(transmittance: float) -> tuple[float, float]:
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    return np.sqrt(transmittance), np.sqrt(1.0 - transmittance)


def beam_splitter(n_pairs: int, transmittance: float = 0.5) -> np.ndarray:
    """Beam splitters between mode ``i`` and mode ``n_pairs + i`` for every ``i``.

    Returns the ``4n x 4n`` matrix ``[[√t I, -√(1-t) I], [√(1-t) I, √t I]]`` with
    identity blocks of size ``2n``; x and p are mixed identically.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    st, sr = _mixing(transmittance)
    return np.kron(np.array([[st, -sr], [sr, st]]), np.eye(2 * n_pairs))


def two_mode_beam_splitter(n_modes: int, i: int, j: int, transmittance: float) -> np.ndarray:
    """Beam splitter between arbitrary modes ``i`` and ``j`` (same sign convention)."""
    if i == j:
        raise StructuralError("beam splitter needs two distinct modes")
    return embed(n_modes, [i, j], beam_splitter(1, transmittance))


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def single_mode_squeezer(s: float) -> np.ndarray:
    """``diag(e^{-s}, e^{s})``: squeezes x for ``s > 0``."""
    return np.diag([np.exp(-s), np.exp(s)])


def phase_shift(gamma: Matrix, mode: int, theta: float) -> np.ndarray:
    g = as_array(gamma)
    return apply_symplectic(g, embed(g.shape[0] // 2, [mode], rotation(theta)))


def squeezer(gamma: Matrix, mode: int, s: float) -> np.ndarray:
    g = as_array(gamma)
    return apply_symplectic(g, embed(g.shape[0] // 2, [mode], single_mode_squeezer(s)))


def rotation_and_mixing(theta: float, tau: float) -> np.ndarray:
    """Rotation of Bob's first mode after mixing Bob's two modes, for a 2x2-mode state.

    Modes 0, 1 belong to Alice and 2, 3 to Bob. The result is
    ``Rot_2(theta) @ BS_{2,3}(tau)``.
    """
    return embed(4, [2], rotation(theta)) @ two_mode_beam_splitter(4, 2, 3, tau)


def additive_noise(gamma: Matrix, modes: Iterable[int], V: float) -> np.ndarray:
    """Gaussian additive-noise channel: add ``V * I_2`` to each selected mode's block."""
    if V < 0:
        raise ValueError(f"noise variance must be non-negative, got {V}")
    g = as_array(gamma).copy()
    n = g.shape[0] // 2
    for m in modes:
        _check_mode(n, m)
        g[2 * m, 2 * m] += V
        g[2 * m + 1, 2 * m + 1] += V
    return g


# ---------------------------------------------------------------------------
# Standard states
# ---------------------------------------------------------------------------


def vacuum(n_modes: int = 1) -> np.ndarray:
    return np.eye(2 * n_modes) / 2


def thermal(nbar: float) -> np.ndarray:
    """Single-mode thermal state with mean photon number ``nbar``."""
    return np.eye(2) * (2 * nbar + 1) / 2


def thermal_from_tau(tau: float) -> np.ndarray:
    """Thermal state ``(1 - tau) sum tau^n |n><n|``."""
    if not 0 <= tau < 1:
        raise ValueError("tau must lie in [0, 1)")
    return thermal(tau / (1 - tau))


def squeezed_vacuum(r: float) -> np.ndarray:
    return np.diag([np.exp(-2 * r), np.exp(2 * r)]) / 2


def tmsv(r: float) -> np.ndarray:
    """Two-mode squeezed vacuum with x-correlations and p-anticorrelations."""
    ch, sh = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    return np.array(
        [
            [ch, 0, sh, 0],
            [0, ch, 0, -sh],
            [sh, 0, ch, 0],
            [0, -sh, 0, ch],
        ]
    )


def tmsv_with_noise(r: float, V: float, noisy_mode: int = 0) -> np.ndarray:
    """TMSV whose ``noisy_mode`` went through an additive-noise channel of variance ``V``."""
    return additive_noise(tmsv(r), [noisy_mode], V)


def direct_sum(*gammas: Matrix) -> np.ndarray:
    blocks = [as_array(g) for g in gammas]
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    k = 0
    for b in blocks:
        out[k : k + b.shape[0], k : k + b.shape[0]] = b
        k += b.shape[0]
    return out


def reorder_modes(gamma: Matrix, order: Sequence[int]) -> np.ndarray:
    """Permute modes so that new mode ``k`` is old mode ``order[k]``."""
    g = as_array(gamma)
    idx = quadrature_indices(order)
    return g[np.ix_(idx, idx)]


def epr_pairs_with_noise(r: float, V: float) -> np.ndarray:
    """Two TMSV+noise pairs shared as Alice = modes (0, 1), Bob = modes (2, 3).

    Pair ``i`` links Alice's mode ``i`` with Bob's mode ``2 + i``; noise sits on Alice.
    """
    g = direct_sum(tmsv_with_noise(r, V), tmsv_with_noise(r, V))
    return reorder_modes(g, [0, 2, 1, 3])


# ---------------------------------------------------------------------------
# Bipartitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BipartiteSplit:
    """Disjoint mode lists for Alice and Bob; Alice's i-th mode pairs with Bob's i-th."""

    modes_A: tuple[int, ...]
    modes_B: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes_A", tuple(int(m) for m in self.modes_A))
        object.__setattr__(self, "modes_B", tuple(int(m) for m in self.modes_B))
        if set(self.modes_A) & set(self.modes_B):
            raise StructuralError("modes_A and modes_B overlap")
        if len(set(self.modes_A)) != len(self.modes_A) or len(set(self.modes_B)) != len(self.modes_B):
            raise StructuralError("repeated mode index in split")

    @classmethod
    def halves(cls, n_modes: int) -> "BipartiteSplit":
        if n_modes % 2:
            raise StructuralError(f"cannot split {n_modes} modes into equal halves")
        h = n_modes // 2
        return cls(tuple(range(h)), tuple(range(h, n_modes)))

    @property
    def balanced(self) -> bool:
        return len(self.modes_A) == len(self.modes_B)

    def check(self, n_modes: int) -> None:
        modes = sorted(self.modes_A + self.modes_B)
        if modes != list(range(n_modes)):
            raise StructuralError(f"split {self} does not cover modes 0..{n_modes - 1}")

    def arrange(self, gamma: Matrix) -> np.ndarray:
        """Reorder ``gamma`` so Alice's modes come first, then Bob's."""
        g = as_array(gamma)
        self.check(g.shape[0] // 2)
        return reorder_modes(g, self.modes_A + self.modes_B)


def blocks(gamma: Matrix, n_A: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``gamma`` into ``(A, B, C)`` with Alice owning the first ``n_A`` modes."""
    g = as_array(gamma)
    if n_A is None:
        n_A = g.shape[0] // 4
    k = 2 * n_A
    return g[:k, :k], g[k:, k:], g[:k, k:]


# ---------------------------------------------------------------------------
# Two-mode normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalForm:
    """Parameters of ``[[a,0,c,0],[0,a,0,d],[c,0,b,0],[0,d,0,b]]``."""

    a: float
    b: float
    c: float
    d: float

    def covariance(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        return np.array(
            [
                [a, 0, c, 0],
                [0, a, 0, d],
                [c, 0, b, 0],
                [0, d, 0, b],
            ],
            dtype=float,
        )

    def flipped(self) -> "NormalForm":
        """Effect of a pi phase shift on one mode."""
        return NormalForm(self.a, self.b, -self.c, -self.d)

    @classmethod
    def from_covariance(cls, gamma: Matrix, atol: float = 1e-9) -> "NormalForm":
        """Read ``(a, b, c, d)`` off a matrix that is already in normal form."""
        g = as_array(gamma)
        if g.shape != (4, 4):
            raise StructuralError("normal form is defined for two-mode states only")
        nf = cls(g[0, 0], g[2, 2], g[0, 2], g[1, 3])
        if not np.allclose(g, nf.covariance(), rtol=0, atol=atol):
            raise StructuralError("covariance matrix is not in normal form")
        return nf


def is_normal_form(gamma: Matrix, atol: float = 1e-9) -> bool:
    try:
        NormalForm.from_covariance(gamma, atol)
    except StructuralError:
        return False
    return True


def _signed_svd(C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD ``C = U diag(s) V^T`` with ``U``, ``V`` proper rotations; ``s[1]`` may be negative."""
    U, s, Vt = np.linalg.svd(C)
    V = Vt.T
    s = s.copy()
    if np.linalg.det(U) < 0:
        U[:, 1] *= -1
        s[1] *= -1
    if np.linalg.det(V) < 0:
        V[:, 1] *= -1
        s[1] *= -1
    return U, s, V


def normal_form_reduce(
    gamma: Matrix, canonical_sign: bool = True, check_physical: bool = True
) -> tuple[NormalForm, np.ndarray]:
    """Bring a two-mode covariance matrix to normal form with local symplectics.

    Each reduced block is first scaled to a multiple of the identity, then local
    rotations diagonalize the correlation block so that ``|c| >= |d|``. The
    overall sign of ``(c, d)`` is fixed to ``c >= 0`` (equivalently, a pi phase
    shift on mode 1 is folded in). With ``canonical_sign=False`` the sign is left
    to whichever rotations are closest to the identity, so a matrix already in
    normal form comes back unchanged.

    Returns:
        (NormalForm, S): the parameters and the local transform ``S_A ⊕ S_B``
        such that ``S @ gamma @ S.T`` equals ``nf.covariance()``.

    Raises:
        UnphysicalError: for unphysical or degenerate input.
    """
    g = require_physical(gamma) if check_physical else as_array(gamma)
    if g.shape != (4, 4):
        raise StructuralError("normal form reduction needs a two-mode covariance matrix")
    A, B, C = blocks(g, 1)
    det_a, det_b = np.linalg.det(A), np.linalg.det(B)
    if det_a <= 0 or det_b <= 0:
        raise UnphysicalError("reduced block with non-positive determinant")
    a, b = np.sqrt(det_a), np.sqrt(det_b)
    S_A = np.sqrt(a) * _inv_sqrtm(A)
    S_B = np.sqrt(b) * _inv_sqrtm(B)
    U, s, V = _signed_svd(S_A @ C @ S_B.T)
    # flipping the sign of R_A and/or R_B gives equally valid reductions; prefer
    # c >= 0 when canonicalizing, then the rotations closest to the identity
    options = [(U.T, V.T, s), (-U.T, -V.T, s), (-U.T, V.T, -s), (U.T, -V.T, -s)]
    if canonical_sign:
        options = [o for o in options if o[2][0] >= 0]
    R_A, R_B, s = max(options, key=lambda o: np.trace(o[0]) + np.trace(o[1]))
    S = direct_sum(R_A @ S_A, R_B @ S_B)
    return NormalForm(float(a), float(b), float(s[0]), float(s[1])), S


def _inv_sqrtm(A: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(A)
    return v @ np.diag(1 / np.sqrt(w)) @ v.T
