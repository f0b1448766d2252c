r"""Noiseless attenuation / amplification of one subsystem, and what it buys the weak criterion.

The filter ``rho -> (t^{n/2} ⊗ 1) rho (t^{n/2} ⊗ 1)`` (renormalized) maps Gaussian
states to Gaussian states. On covariance matrices it acts through the Husimi
matrix ``Gamma = (gamma + I/2)^{-1}``::

    Gamma~ = M Gamma M - (M^2 - I),     M = diag(sqrt(t) I_A, I_B)

For ``t < 1`` the same channel is a beam splitter of transmittance ``t`` with a
vacuum ancilla, post-selected on vacuum in the ancilla output
(:func:`filter_via_beamsplitter`). Neither version changes separability.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import criteria
from . import gaussian as gs
from . import io
from .errors import FilterDomainError, StructuralError, UnphysicalError
from .gaussian import Matrix, NormalForm

log = logging.getLogger(__name__)

SCAN_POINTS = 512
ROOT_RESIDUAL = 1e-12
GOLDEN_TOL = 1e-6
SQUEEZE_TOL = 1e-8
DEFAULT_GRID_POINTS = 400


class FilterKind(str, enum.Enum):
    ATTENUATE = "attenuate"
    AMPLIFY = "amplify"


class Subsystem(str, enum.Enum):
    A = "subsystem_A"
    B = "subsystem_B"

    @classmethod
    def parse(cls, value) -> "Subsystem":
        if isinstance(value, cls):
            return value
        v = str(value).strip()
        if v in ("A", "a", "subsystem_A", "0"):
            return cls.A
        if v in ("B", "b", "subsystem_B", "1"):
            return cls.B
        raise ValueError(f"unknown subsystem {value!r}")

    @property
    def other(self) -> "Subsystem":
        return Subsystem.B if self is Subsystem.A else Subsystem.A


@dataclass(frozen=True)
class FilterSpec:
    """A noiseless filter with gain/transmittance ``t`` on one subsystem.

    ``t`` defaults to 1 so that a spec can double as a template (kind and target
    only) for sweeps and the symmetrization solver.
    """

    kind: FilterKind = FilterKind.ATTENUATE
    target: Subsystem = Subsystem.A
    t: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        object.__setattr__(self, "target", Subsystem.parse(self.target))
        if not self.t > 0:
            raise ValueError(f"filter parameter t must be positive, got {self.t}")

    @property
    def consistent(self) -> bool:
        return self.t <= 1 if self.kind is FilterKind.ATTENUATE else self.t >= 1

    def at(self, t: float) -> "FilterSpec":
        return FilterSpec(self.kind, self.target, t)


def _target_modes(n_modes: int, target: Subsystem) -> list[int]:
    h = n_modes // 2
    return list(range(h)) if target is Subsystem.A else list(range(h, n_modes))


def _post_check(g: np.ndarray, check_physical: bool) -> np.ndarray:
    g = (g + g.T) / 2
    report = gs.validate(g)
    if not report.positive_definite or (check_physical and not report.passed):
        raise FilterDomainError(
            f"filtered covariance matrix is unphysical (min symplectic eigenvalue "
            f"{report.min_symplectic_eigenvalue:.6g})"
        )
    return g


def filter_covariance(gamma: Matrix, spec: FilterSpec, *, check_physical: bool = True) -> np.ndarray:
    """Covariance matrix after the noiseless filter ``spec`` (Husimi-function update).

    Alice owns the first half of the modes; the filter acts on every mode of
    ``spec.target`` with the same ``t``.

    Raises:
        FilterDomainError: if the updated Husimi matrix is not positive definite
            or the result is not a physical covariance matrix.
    """
    g = gs.as_array(gamma)
    n = g.shape[0] // 2
    dim = 2 * n
    m = np.ones(dim)
    m[gs.quadrature_indices(_target_modes(n, spec.target))] = math.sqrt(spec.t)
    M = np.diag(m)
    husimi = np.linalg.inv(g + np.eye(dim) / 2)
    husimi_f = M @ husimi @ M - (M @ M - np.eye(dim))
    husimi_f = (husimi_f + husimi_f.T) / 2
    try:
        np.linalg.cholesky(husimi_f)
    except np.linalg.LinAlgError:
        raise FilterDomainError(f"filter t={spec.t} leaves the normalizable domain") from None
    return _post_check(np.linalg.inv(husimi_f) - np.eye(dim) / 2, check_physical)


def filter_via_beamsplitter(
    gamma: Matrix, t: float, target: Subsystem | str = Subsystem.A, *, check_physical: bool = True
) -> np.ndarray:
    """Noiseless attenuation realized as a beam splitter plus vacuum post-selection.

    Vacuum ancillas are placed in front of the state, each mixed with one target
    mode on a beam splitter of transmittance ``t``; the ancilla outputs are then
    conditioned on vacuum: ``B - C (A + I/2)^{-1} C^T``.
    """
    if not 0 < t <= 1:
        raise ValueError(f"beam-splitter filter needs 0 < t <= 1, got {t}")
    target = Subsystem.parse(target)
    g = gs.as_array(gamma)
    n = g.shape[0] // 2
    tm = _target_modes(n, target)
    rest = [k for k in range(n) if k not in tm]
    g_perm = gs.reorder_modes(g, tm + rest)
    k = len(tm)
    full = gs.direct_sum(gs.vacuum(k), g_perm)
    S = gs.direct_sum(gs.beam_splitter(k, t), np.eye(2 * len(rest)))
    out = gs.apply_symplectic(full, S)
    anc = slice(0, 2 * k)
    sys = slice(2 * k, None)
    A, B, C = out[anc, anc], out[sys, sys], out[sys, anc]
    cond = B - C @ np.linalg.solve(A + np.eye(2 * k) / 2, C.T)
    inverse = np.argsort(tm + rest)
    return _post_check(gs.reorder_modes(cond, list(inverse)), check_physical)


def reduced_determinants(gamma: Matrix) -> tuple[float, float]:
    A, B, _ = gs.blocks(gamma)
    return float(np.linalg.det(A)), float(np.linalg.det(B))


# ---------------------------------------------------------------------------
# Symmetrization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetrizationRoot:
    """A transmittance/gain equalizing the reduced determinants.

    ``limiting`` roots sit on the edge of the amplification domain; there the
    filtered state is infinitely squeezed, so ``gamma`` is ``None`` and
    ``trace_R`` is the value just inside the domain.
    """

    t: float
    gamma: Optional[np.ndarray]
    trace_R: float
    residual: float
    limiting: bool = False


def default_template(gamma: Matrix) -> FilterSpec:
    """Attenuate whichever subsystem has the larger reduced determinant."""
    det_a, det_b = reduced_determinants(gamma)
    return FilterSpec(FilterKind.ATTENUATE, Subsystem.A if det_a >= det_b else Subsystem.B)


def _domain(kind: FilterKind, t_max: float) -> tuple[float, float]:
    return (0.0, 1.0) if kind is FilterKind.ATTENUATE else (1.0, t_max)


def _safe_filter(g, spec, check_physical) -> Optional[np.ndarray]:
    try:
        return filter_covariance(g, spec, check_physical=check_physical)
    except (FilterDomainError, np.linalg.LinAlgError):
        return None


def domain_edge(
    gamma: Matrix, template: FilterSpec, lo: float, hi: float, *, check_physical: bool = True
) -> float:
    """Largest ``t`` in ``[lo, hi]`` (to ~1e-13 relative) where the filter is defined.

    ``lo`` must be inside the domain and ``hi`` outside.
    """
    g = gs.as_array(gamma)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _safe_filter(g, template.at(mid), check_physical) is None:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    return lo


def symmetrize_t(
    gamma: Matrix,
    template: Optional[FilterSpec] = None,
    *,
    t_max: float = 30.0,
    check_physical: bool = True,
) -> list[SymmetrizationRoot]:
    """All filter parameters ``t`` at which ``det A' = det B'``.

    Attenuation scans ``(0, 1]``; amplification scans ``(1, t_max]``. Sign changes
    on a 512-point grid are refined with Brent's method. If the amplification
    domain ends before ``t_max`` and the determinants only meet asymptotically at
    that edge, a ``limiting`` root is reported there. Roots are ranked by the
    post-filter weak-realignment value, best first.
    """
    g = gs.as_array(gamma)
    template = template or default_template(g)
    det_a, det_b = reduced_determinants(g)
    if abs(det_a - det_b) < ROOT_RESIDUAL:
        value = criteria.weak_realignment(g, check_physical=check_physical).value
        return [SymmetrizationRoot(1.0, g.copy(), value, abs(det_a - det_b))]

    def asym(t: float) -> float:
        f = _safe_filter(g, template.at(t), check_physical)
        if f is None:
            return math.nan
        da, db = reduced_determinants(f)
        return da - db

    lo, hi = _domain(template.kind, t_max)
    grid = np.linspace(lo, hi, SCAN_POINTS + 1)[1:]
    if template.kind is FilterKind.AMPLIFY:
        grid = np.concatenate([[1.0], grid])
    vals = np.array([asym(t) for t in grid])

    found: list[float] = []
    for k, (t0, t1) in enumerate(zip(grid[:-1], grid[1:])):
        f0, f1 = vals[k], vals[k + 1]
        if not (np.isfinite(f0) and np.isfinite(f1)):
            continue
        if f0 == 0:
            found.append(float(t0))
        elif f0 * f1 < 0:
            found.append(brentq(asym, t0, t1, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if np.isfinite(vals[-1]) and vals[-1] == 0:
        found.append(float(grid[-1]))
    found = sorted(set(found))

    roots = []
    for t in found:
        f = filter_covariance(g, template.at(t), check_physical=check_physical)
        da, db = reduced_determinants(f)
        value = criteria.weak_realignment(f, check_physical=check_physical).value
        roots.append(SymmetrizationRoot(float(t), f, value, abs(da - db)))

    if not roots and template.kind is FilterKind.AMPLIFY:
        edge = _limiting_root(g, template, grid, vals, check_physical)
        if edge is not None:
            roots.append(edge)

    if not roots:
        log.warning("no symmetrizing %s of %s found in its domain", template.kind.value, template.target.value)
    roots.sort(key=lambda r: -r.trace_R)
    return roots


def _limiting_root(g, template, grid, vals, check_physical) -> Optional[SymmetrizationRoot]:
    finite = np.isfinite(vals)
    if finite.all() or not finite.any():
        return None
    last = int(np.nonzero(finite)[0].max())
    if last + 1 >= len(grid):
        return None
    edge = domain_edge(g, template, grid[last], grid[last + 1], check_physical=check_physical)
    # relative asymmetry log(det A'/det B') must vanish on approach to the edge
    probes = [edge * (1 - 10.0**-k) for k in (3, 5, 7)]
    rel = []
    for t in probes:
        f = _safe_filter(g, template.at(t), check_physical)
        if f is None:
            return None
        da, db = reduced_determinants(f)
        rel.append(abs(math.log(da / db)))
    if not (rel[0] > rel[1] > rel[2] and rel[2] < 1e-4):
        return None
    f = _safe_filter(g, template.at(probes[-1]), check_physical)
    value = criteria.weak_realignment(f, check_physical=check_physical).value
    da, db = reduced_determinants(f)
    return SymmetrizationRoot(float(edge), None, value, abs(da - db), limiting=True)


# ---------------------------------------------------------------------------
# Sweeps and optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveSample:
    t: float
    trace_R: float
    detected: bool
    det_A: float
    det_B: float


@dataclass
class FiltrationCurve:
    samples: list[CurveSample]
    template: FilterSpec
    input_hash: str
    roots: list[SymmetrizationRoot] = field(default_factory=list)
    dropped: list[tuple[float, str]] = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def trace_R(self) -> np.ndarray:
        return np.array([s.trace_R for s in self.samples])

    def best(self) -> CurveSample:
        return max(self.samples, key=lambda s: s.trace_R)

    def detection_intervals(self) -> list[tuple[float, float]]:
        """Maximal runs of consecutive detected samples, as ``(t_first, t_last)``."""
        out = []
        start = prev = None
        for s in self.samples:
            if s.detected:
                if start is None:
                    start = s.t
                prev = s.t
            elif start is not None:
                out.append((start, prev))
                start = None
        if start is not None:
            out.append((start, prev))
        return out

    def to_csv(self) -> str:
        lines = ["t,trace_R,detected,det_A,det_B"]
        for s in self.samples:
            lines.append(
                ",".join([io.fmt(s.t), io.fmt(s.trace_R), str(int(s.detected)), io.fmt(s.det_A), io.fmt(s.det_B)])
            )
        for r in self.roots:
            lines.append(f"#root,{io.fmt(r.t)},{io.fmt(r.trace_R)},{'limiting' if r.limiting else 'interior'}")
        return "\n".join(lines) + "\n"


def default_grid(kind: FilterKind, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Log-spaced points on ``(0.01, 1]`` (attenuation) or ``(1, 30]`` (amplification)."""
    if kind is FilterKind.ATTENUATE:
        return np.geomspace(0.01, 1.0, n_points + 1)[1:]
    return np.geomspace(1.0, 30.0, n_points + 1)[1:]


def sweep_t(
    gamma: Matrix,
    template: Optional[FilterSpec] = None,
    t_grid: Optional[Sequence[float]] = None,
    *,
    find_roots: bool = True,
    check_physical: bool = True,
) -> FiltrationCurve:
    """Weak-realignment value of the filtered state along a grid of ``t``.

    Grid points where the filter leaves its domain are dropped and listed in
    ``curve.dropped``.
    """
    g = gs.as_array(gamma)
    template = template or default_template(g)
    grid = np.unique(np.asarray(t_grid if t_grid is not None else default_grid(template.kind), dtype=float))
    samples, dropped = [], []
    for t in grid:
        try:
            f = filter_covariance(g, template.at(float(t)), check_physical=check_physical)
            res = criteria.weak_realignment(f, check_physical=check_physical)
        except (FilterDomainError, UnphysicalError, np.linalg.LinAlgError) as exc:
            dropped.append((float(t), str(exc)))
            continue
        da, db = reduced_determinants(f)
        samples.append(CurveSample(float(t), res.value, res.detected, da, db))
    roots = symmetrize_t(g, template, check_physical=check_physical) if find_roots else []
    return FiltrationCurve(samples, template, io.inputs_hash(g, template=template.kind.value + template.target.value), roots, dropped)


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]`` until the bracket is narrower than ``tol``."""
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass(frozen=True)
class Optimum:
    t_star: float
    value: float
    diagnostic: str = ""


def optimize_t(
    gamma: Matrix,
    template: Optional[FilterSpec] = None,
    t_grid: Optional[Sequence[float]] = None,
    *,
    check_physical: bool = True,
) -> Optimum:
    """Filter parameter maximizing the post-filter weak-realignment value.

    The best grid point of a sweep is bracketed by its neighbours and refined by
    golden-section search; the returned value is never below the sweep maximum.
    """
    g = gs.as_array(gamma)
    template = template or default_template(g)
    curve = sweep_t(g, template, t_grid, find_roots=False, check_physical=check_physical)
    if not curve.samples:
        raise FilterDomainError("filter domain contains no grid point")
    vals = curve.trace_R
    ts = curve.t
    if np.ptp(vals) < 1e-12:
        edge = 1.0 if template.kind is FilterKind.ATTENUATE else float(ts[0])
        return Optimum(edge, float(vals[0]), "flat objective; returning t=1 boundary")
    k = int(np.argmax(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]

    def objective(t: float) -> float:
        f = _safe_filter(g, template.at(t), check_physical)
        if f is None:
            return -math.inf
        return criteria.weak_realignment(f, check_physical=check_physical).value

    t_star, value = golden_section_max(objective, lo, hi)
    diagnostic = ""
    if value < vals[k]:
        t_star, value = float(ts[k]), float(vals[k])
    if k in (0, len(ts) - 1):
        diagnostic = "optimum at the edge of the grid"
    return Optimum(float(t_star), float(value), diagnostic)


# ---------------------------------------------------------------------------
# Phase / filter / squeeze pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    name: str
    trace_R: float
    gamma: np.ndarray
    note: str = ""


@dataclass
class PipelineReport:
    stages: list[Stage]
    detected: bool
    inconclusive: bool = False
    message: str = ""
    t: Optional[float] = None
    squeeze: Optional[float] = None
    final_normal_form: Optional[NormalForm] = None
    schmidt_symmetric: bool = False

    @property
    def final_trace_R(self) -> float:
        return self.stages[-1].trace_R


def _equalizing_squeeze(gamma: np.ndarray, mode: int) -> float:
    """Bisection for ``s`` making the x and p variances of ``mode`` equal."""
    vx, vp = gamma[2 * mode, 2 * mode], gamma[2 * mode + 1, 2 * mode + 1]

    def gap(s: float) -> float:
        return vx * math.exp(-2 * s) - vp * math.exp(2 * s)

    span = abs(math.log(vx / vp)) / 4 + 1.0
    lo, hi = -span, span
    while hi - lo > SQUEEZE_TOL * 1e-4:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def full_pipeline(gamma: Matrix, *, check_physical: bool = True) -> PipelineReport:
    """Phase shift, symmetrizing attenuation, then local squeezing of a two-mode state.

    Stages: input, normal-form reduction, pi phase flip (if ``c < 0``),
    attenuation of the subsystem with the larger reduced determinant, and a
    squeezer on the other mode equalizing its x and p variances. When the
    correlation block has ``c * d < 0`` the final state satisfies ``a = b``,
    ``c >= 0``, ``d <= 0``, so its weak-realignment value equals the full trace norm.
    """
    g = gs.as_array(gamma)
    if g.shape != (4, 4):
        raise StructuralError("the pipeline handles two-mode states only")
    weak = lambda m: criteria.weak_realignment(m, check_physical=check_physical).value  # noqa: E731
    stages = [Stage("input", weak(g), g)]

    nf, _ = gs.normal_form_reduce(g, canonical_sign=False, check_physical=check_physical)
    stages.append(Stage("normal_form", weak(nf.covariance()), nf.covariance()))

    flipped = nf.c < 0
    if flipped:
        nf = nf.flipped()
    stages.append(Stage("phase", weak(nf.covariance()), nf.covariance(), "pi shift on mode 1" if flipped else "no-op"))

    if nf.c * nf.d > 0:
        return PipelineReport(
            stages,
            detected=False,
            inconclusive=True,
            message="c and d share a sign: separable or undetectable; pipeline inconclusive",
        )

    template = default_template(nf.covariance())
    roots = [r for r in symmetrize_t(nf.covariance(), template, check_physical=check_physical) if not r.limiting]
    if not roots:
        return PipelineReport(stages, detected=False, inconclusive=True, message="no symmetrizing attenuation found")
    root = roots[0]
    sym = root.gamma
    stages.append(Stage("symmetrize", root.trace_R, sym, f"attenuate {template.target.value} t={root.t:.12g}"))

    other = 1 if template.target is Subsystem.A else 0
    s = _equalizing_squeeze(sym, other)
    final = gs.squeezer(sym, other, s)
    stages.append(Stage("squeeze", weak(final), final, f"mode {other} s={s:.12g}"))

    final_nf = NormalForm(final[0, 0], final[2, 2], final[0, 2], final[1, 3])
    schmidt = (
        abs(final_nf.a - final_nf.b) < 1e-8
        and abs(final[0, 0] - final[1, 1]) < 1e-8
        and abs(final[2, 2] - final[3, 3]) < 1e-8
        and final_nf.c >= -1e-12
        and final_nf.d <= 1e-12
    )
    return PipelineReport(
        stages,
        detected=stages[-1].trace_R > 1 + criteria.DETECTION_MARGIN,
        t=root.t,
        squeeze=s,
        final_normal_form=final_nf,
        schmidt_symmetric=schmidt,
    )


# ---------------------------------------------------------------------------
# Dual picture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessDescription:
    """Projector that the filtered weak criterion effectively measures.

    For attenuation with parameter ``t`` it is ``|psi_t><psi_t|`` with
    ``|psi_t> = sum_n t^{n/2} |n, n>``, i.e. an unnormalized TMSV with
    ``tau = sqrt(t)``; ``t = 1`` gives the unnormalized ``|Omega>``.
    """

    t: float
    tau: float
    squeezing: float
    norm_squared: float
    is_omega: bool

    def schmidt_weights(self, cutoff: int) -> np.ndarray:
        return self.tau ** np.arange(cutoff)

    def vector(self, cutoff: int) -> np.ndarray:
        """Coefficients on ``|i, k>`` flattened as ``i * cutoff + k``."""
        v = np.zeros(cutoff * cutoff, dtype=complex)
        v[np.arange(cutoff) * (cutoff + 1)] = self.schmidt_weights(cutoff)
        return v

    def projector(self, cutoff: int) -> np.ndarray:
        v = self.vector(cutoff)
        return np.outer(v, v.conj())


def dual_witness_view(spec: FilterSpec) -> WitnessDescription:
    if spec.kind is not FilterKind.ATTENUATE or spec.t > 1:
        raise ValueError("the witness picture needs an attenuation filter with t <= 1")
    tau = math.sqrt(spec.t)
    if spec.t == 1:
        return WitnessDescription(1.0, 1.0, math.inf, math.inf, True)
    return WitnessDescription(spec.t, tau, math.atanh(tau), 1 / (1 - spec.t), False)
