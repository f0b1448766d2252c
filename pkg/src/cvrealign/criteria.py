"""Separability tests for Gaussian states.

Three verdicts are available:

* ``weak_realignment``: the trace of the realigned state, ``1/(2^n sqrt(det gamma_w))``,
  computed from the covariance matrix after a bank of 50:50 beam splitters;
* ``realignment_normal_form``: the closed-form trace norm of the realigned state,
  valid for two-mode matrices in normal form;
* ``ppt``: smallest symplectic eigenvalue of the partially transposed matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gaussian as gs
from .errors import StructuralError, UnphysicalError
from .gaussian import BipartiteSplit, Matrix, NormalForm

DETECTION_MARGIN = 1e-9

# Re-evaluate every weak-realignment value through the Schur-complement route.
CROSS_CHECK = True


class CriterionId(str, enum.Enum):
    WEAK_REALIGNMENT = "weak_realignment"
    REALIGNMENT_NORMAL_FORM = "realignment_normal_form"
    PPT = "ppt"


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one criterion.

    For the two realignment criteria ``detected`` means ``value > threshold``;
    for PPT it means ``value < threshold`` (both with a 1e-9 margin).
    """

    criterion_id: CriterionId
    value: float
    threshold: float
    detected: bool

    def to_record(self, inputs_hash: str = "") -> dict:
        return {
            "criterion": self.criterion_id.value,
            "value": self.value,
            "threshold": self.threshold,
            "detected": self.detected,
            "inputs_hash": inputs_hash,
        }


def _exceeds(value: float, threshold: float = 1.0) -> bool:
    return value > threshold + DETECTION_MARGIN


def _resolve_split(g: np.ndarray, split: Optional[BipartiteSplit]) -> BipartiteSplit:
    n = g.shape[0] // 2
    split = split or BipartiteSplit.halves(n)
    split.check(n)
    if not split.balanced:
        raise StructuralError("weak realignment needs |modes_A| == |modes_B|")
    return split


def _measured_indices(n: int) -> list[int]:
    """x of the first ``n`` output modes and p of the last ``n``."""
    return [2 * i for i in range(n)] + [2 * (n + i) + 1 for i in range(n)]


def _beam_split(gamma: Matrix, split: Optional[BipartiteSplit]) -> tuple[np.ndarray, int]:
    g = gs.as_array(gamma)
    split = _resolve_split(g, split)
    n = len(split.modes_A)
    return gs.apply_symplectic(split.arrange(g), gs.beam_splitter(n, 0.5)), n


def gamma_w(gamma: Matrix, split: Optional[BipartiteSplit] = None) -> np.ndarray:
    """Restricted covariance matrix seen by the x_A / p_B homodyne measurement.

    The default split gives the first half of the modes to Alice.
    """
    gp, n = _beam_split(gamma, split)
    idx = _measured_indices(n)
    return gp[np.ix_(idx, idx)]


def weak_realignment_schur(gamma: Matrix, split: Optional[BipartiteSplit] = None) -> float:
    """Trace of the realigned state from the Wigner function integrated over unmeasured quadratures.

    Evaluates ``pi^n P(0, 0)`` where the marginal at the origin is the Gaussian integral
    of ``W_{rho'}`` over ``p_A`` and ``x_B``; this goes through ``gamma'^{-1}`` instead
    of the restricted matrix.
    """
    gp, n = _beam_split(gamma, split)
    kept = set(_measured_indices(n))
    free = [k for k in range(4 * n) if k not in kept]
    det_full = np.linalg.det(gp)
    if det_full <= 0:
        raise UnphysicalError("covariance matrix is singular")
    inv_block = np.linalg.inv(gp)[np.ix_(free, free)]
    det_inv_block = np.linalg.det(inv_block)
    # prefactor of W over the full 4n-dim phase space, times the 2n-dim Gaussian integral
    p00 = (2 * np.pi) ** (n - 2 * n) / math.sqrt(det_full) / math.sqrt(det_inv_block)
    return float(np.pi**n * p00)


def _checked(gamma: Matrix, check_physical: bool) -> np.ndarray:
    if check_physical:
        return gs.require_physical(gamma)
    g = gs.as_array(gamma)
    if not gs.validate(g).positive_definite:
        raise UnphysicalError("covariance matrix is not positive definite")
    return g


def weak_realignment(
    gamma: Matrix, split: Optional[BipartiteSplit] = None, *, check_physical: bool = True
) -> CriterionResult:
    """Weak realignment criterion ``Tr R = 1 / (2^n sqrt(det gamma_w))``.

    ``check_physical=False`` skips the uncertainty-principle gate (positive
    definiteness is still required); use it for published matrices whose
    rounding puts them marginally outside the physical set.

    Raises:
        UnphysicalError: if ``gamma`` fails validation or ``gamma_w`` is singular.
    """
    g = _checked(gamma, check_physical)
    gw = gamma_w(g, split)
    n = gw.shape[0] // 2
    det = np.linalg.det(gw)
    if det <= 0:
        raise UnphysicalError("restricted covariance matrix is singular")
    value = 1.0 / (2**n * math.sqrt(det))
    if CROSS_CHECK:
        other = weak_realignment_schur(g, split)
        tol = max(1e-10, 1e3 * np.finfo(float).eps * np.linalg.cond(g))
        if abs(other - value) > tol * max(1.0, abs(value)):
            raise RuntimeError(f"weak realignment routes disagree: {value!r} vs {other!r}")
    return CriterionResult(CriterionId.WEAK_REALIGNMENT, value, 1.0, _exceeds(value))


def weak_realignment_normal_form(nf: NormalForm) -> CriterionResult:
    """``1 / sqrt((a + b - 2c)(a + b + 2d))`` for a two-mode normal form."""
    u = nf.a + nf.b - 2 * nf.c
    v = nf.a + nf.b + 2 * nf.d
    if u <= 0 or v <= 0:
        raise UnphysicalError(f"non-positive radicand for normal form {nf}")
    value = 1.0 / math.sqrt(u * v)
    return CriterionResult(CriterionId.WEAK_REALIGNMENT, value, 1.0, _exceeds(value))


def realignment_trace_norm_normal_form(nf: NormalForm) -> CriterionResult:
    """Closed-form trace norm of the realigned state for a two-mode normal form.

    ``1 / (2 sqrt((sqrt(ab) - |c|)(sqrt(ab) - |d|)))``. When either factor is
    non-positive the value is reported as ``inf`` (detected).
    """
    g = math.sqrt(nf.a * nf.b)
    u, v = g - abs(nf.c), g - abs(nf.d)
    if u <= 0 or v <= 0:
        return CriterionResult(CriterionId.REALIGNMENT_NORMAL_FORM, math.inf, 1.0, True)
    value = 1.0 / (2 * math.sqrt(u * v))
    return CriterionResult(CriterionId.REALIGNMENT_NORMAL_FORM, value, 1.0, _exceeds(value))


def partial_transpose(gamma: Matrix, split: Optional[BipartiteSplit] = None) -> np.ndarray:
    """Flip the sign of every p-quadrature of Bob's modes; result is ordered Alice-then-Bob."""
    g = gs.as_array(gamma)
    n = g.shape[0] // 2
    split = split or BipartiteSplit.halves(n)
    arranged = split.arrange(g)
    nA = len(split.modes_A)
    T = np.diag([1.0] * (2 * nA) + [1.0, -1.0] * (n - nA))
    return T @ arranged @ T


def ppt(
    gamma: Matrix, split: Optional[BipartiteSplit] = None, *, check_physical: bool = True
) -> CriterionResult:
    g = _checked(gamma, check_physical)
    value = float(gs.symplectic_eigenvalues(partial_transpose(g, split))[0])
    return CriterionResult(CriterionId.PPT, value, 0.5, value < 0.5 - DETECTION_MARGIN)


@dataclass(frozen=True)
class OrderingReport:
    trace_R: float
    trace_norm: Optional[float]
    ppt_value: float
    ppt_detected: bool
    trace_norm_slack: Optional[float]
    consistent: bool


def criterion_ordering_check(
    gamma: Matrix, split: Optional[BipartiteSplit] = None, *, check_physical: bool = True
) -> OrderingReport:
    """Check ``Tr R <= ||R||_tr`` (normal-form input only) and ``Tr R > 1 => NPT``."""
    g = _checked(gamma, check_physical)
    weak = weak_realignment(g, split, check_physical=check_physical)
    p = ppt(g, split, check_physical=check_physical)
    norm = slack = None
    if g.shape == (4, 4) and gs.is_normal_form(g) and (split is None or split == BipartiteSplit((0,), (1,))):
        norm = realignment_trace_norm_normal_form(NormalForm.from_covariance(g)).value
        slack = norm - weak.value
    ok = (slack is None or slack >= -1e-10) and (not weak.detected or p.detected)
    return OrderingReport(weak.value, norm, p.value, p.detected, slack, ok)
