"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 reproduction mismatch,
4 Fock cutoff escalation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import criteria as cr
from . import filtration as fl
from . import fock
from . import gaussian as gs
from . import io
from . import scenarios as sc
from .criteria import CriterionId
from .errors import FilterDomainError, StructuralError, TruncationError, UnphysicalError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_MISMATCH = 3
EXIT_ESCALATION = 4

ORACLE_TOL = 1e-6

log = logging.getLogger("cvrealign")


# -- helpers -----------------------------------------------------------------------------


def _builtin_params(args: argparse.Namespace) -> dict:
    names = {"r": "r", "V": "V", "tau": "tau", "theta": "theta", "noisy_mode": "noisy_mode"}
    return {k: getattr(args, a) for a, k in names.items() if getattr(args, a, None) is not None}


def _scenario(args: argparse.Namespace, with_filtration: bool = False) -> sc.Scenario:
    if args.config:
        scen = sc.load_scenario(args.config)
    elif args.state:
        doc = {"id": args.state, "state": {"builder": args.state, "params": _builtin_params(args)}}
        scen = sc.scenario_from_dict(doc)
    else:
        raise sc.ConfigError("state: give a builtin name or --config")
    if with_filtration:
        f = scen.filtration or sc.FiltrationConfig()
        changes = {}
        if getattr(args, "grid", None) is not None:
            changes["grid"] = args.grid
        if getattr(args, "pre_phase", None) is not None:
            changes["pre_phase"] = args.pre_phase
        if getattr(args, "kind", None):
            changes["kind"] = fl.FilterKind(args.kind)
        if getattr(args, "target", None):
            changes["target"] = fl.Subsystem.parse(args.target)
        if getattr(args, "pipeline", False):
            changes["pipeline"] = True
        f = sc.FiltrationConfig(**{**f.__dict__, **changes})
        scen = sc.Scenario(scen.id, scen.gamma, scen.split, scen.criteria, f, scen.allow_unphysical, scen.state_spec)
    return scen


def _emit(text: str, out: Optional[str], name: str) -> None:
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_angle(text: str) -> float:
    """Accepts plain floats and multiples of pi such as ``pi``, ``-pi/2`` or ``0.5pi``."""
    t = text.strip().lower().replace(" ", "").replace("*", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("pi", "")
    c = {"": 1.0, "+": 1.0, "-": -1.0}.get(coef)
    if c is None:
        c = float(coef)
    return c * math.pi / (float(den) if den else 1.0)


# -- criterion ---------------------------------------------------------------------------


def evaluate(scen: sc.Scenario) -> list[dict]:
    """Verdict records for every requested criterion."""
    g = scen.gamma
    kw = {"check_physical": scen.check_physical}
    h = io.inputs_hash(g, split=str(scen.split))
    records = []
    for cid in scen.requested_criteria():
        if cid is CriterionId.WEAK_REALIGNMENT:
            res = cr.weak_realignment(g, scen.split, **kw)
        elif cid is CriterionId.PPT:
            res = cr.ppt(g, scen.split, **kw)
        else:
            if g.shape != (4, 4):
                raise StructuralError("realignment_normal_form needs a two-mode state")
            if gs.is_normal_form(g):
                nf = gs.NormalForm.from_covariance(g)
            else:
                nf, _ = gs.normal_form_reduce(g, **kw)
            res = cr.realignment_trace_norm_normal_form(nf)
        records.append(res.to_record(h))
    return records


def cmd_criterion(args: argparse.Namespace) -> int:
    scen = _scenario(args)
    if args.criteria:
        scen = sc.Scenario(
            scen.id, scen.gamma, scen.split, tuple(CriterionId(c) for c in args.criteria),
            scen.filtration, scen.allow_unphysical, scen.state_spec,
        )
    _emit(io.dumps(evaluate(scen)) + "\n", args.out, f"{scen.id}.verdicts.json")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------------------


def sweep_summary(scen: sc.Scenario, curve: fl.FiltrationCurve, pipeline=None) -> dict:
    roots = []
    for r in curve.roots:
        item = {"t": r.t, "trace_R": r.trace_R, "limiting": r.limiting}
        if r.gamma is not None and gs.is_normal_form(r.gamma):
            norm = cr.realignment_trace_norm_normal_form(gs.NormalForm.from_covariance(r.gamma)).value
            item["trace_norm"] = norm
            item["trace_equals_norm"] = abs(norm - r.trace_R) < 1e-9
        roots.append(item)
    best = curve.best() if curve.samples else None
    out = {
        "scenario": scen.id,
        "inputs_hash": curve.input_hash,
        "filter": {"kind": curve.template.kind.value, "target": curve.template.target.value},
        "pre_phase": scen.filtration.pre_phase if scen.filtration else 0.0,
        "samples": len(curve.samples),
        "dropped": len(curve.dropped),
        "best": {"t": best.t, "trace_R": best.trace_R} if best else None,
        "detection_intervals": [list(iv) for iv in curve.detection_intervals()],
        "roots": roots,
    }
    if pipeline is not None:
        out["pipeline"] = {
            "stages": [{"name": s.name, "trace_R": s.trace_R, "note": s.note} for s in pipeline.stages],
            "detected": pipeline.detected,
            "inconclusive": pipeline.inconclusive,
            "message": pipeline.message,
        }
    return out


def cmd_sweep(args: argparse.Namespace) -> int:
    scen = _scenario(args, with_filtration=True)
    cfg = scen.filtration
    g = scen.prepared()
    template = cfg.template(g)
    grid = fl.default_grid(template.kind, cfg.grid)
    curve = fl.sweep_t(g, template, grid, check_physical=scen.check_physical)
    if not curve.samples:
        raise FilterDomainError("no grid point lies inside the filter domain")
    pipe = None
    if cfg.pipeline:
        pipe = fl.full_pipeline(g, check_physical=scen.check_physical)
    summary = io.dumps(sweep_summary(scen, curve, pipe)) + "\n"
    if args.out:
        _emit(curve.to_csv(), args.out, f"{scen.id}.csv")
        _emit(summary, args.out, f"{scen.id}.summary.json")
        sys.stdout.write(summary)
    else:
        sys.stdout.write(curve.to_csv())
        sys.stderr.write(summary)
    return EXIT_OK


# -- examples ----------------------------------------------------------------------------


def cmd_examples(args: argparse.Namespace) -> int:
    checks = sc.example_checks()
    width = max(len(c.id) for c in checks)
    lines = []
    for c in checks:
        tag = "PASS" if c.passed else "FAIL"
        lines.append(f"{tag}  {c.id:<{width}}  formula={io.fmt(c.formula)}  computed={io.fmt(c.computed)}  diff={io.fmt(c.diff)}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} reproduced")
    _emit("\n".join(lines) + "\n", args.out, "examples.txt")
    if args.out:
        sys.stdout.write(lines[-1] + "\n")
    return EXIT_MISMATCH if n_fail else EXIT_OK


# -- oracle ------------------------------------------------------------------------------


def _rows(name: str, rho: fock.FockOperator, trace: float, norm: float, tol: float) -> list[dict]:
    rec = fock.oracle_record(name, rho)
    rows = []
    for q, closed, key in (("trace_R", trace, "trace_R"), ("trace_norm_R", norm, "trace_norm_R")):
        diff = abs(rec[key] - closed)
        rows.append({
            "state_id": name, "quantity": q, "D": rho.cutoff, "tail": rho.tail,
            "closed_form": closed, "oracle": rec[key], "abs_diff": diff,
            "tolerance": tol, "passed": bool(diff <= tol),
        })
    return rows


def _cutoffs(args) -> Sequence[int]:
    return (args.cutoff,) if args.cutoff else fock.ESCALATION


def oracle_tmsv(args) -> list[dict]:
    tau = args.tau if args.tau is not None else 0.5
    rho = fock.with_escalation(lambda d: fock.tmsv(tau, d), _cutoffs(args))
    nf = gs.NormalForm.from_covariance(gs.tmsv(math.atanh(tau)))
    tol = max(ORACLE_TOL, fock.norm_error_bound(rho, 1 / (1 - tau)))
    return _rows(f"tmsv(tau={io.fmt(tau)})", rho, cr.weak_realignment(nf.covariance()).value,
                 cr.realignment_trace_norm_normal_form(nf).value, tol)


def oracle_thermal(args) -> list[dict]:
    tau = args.tau if args.tau is not None else 0.5
    rho = fock.with_escalation(lambda d: fock.thermal(tau, d), _cutoffs(args))
    g = sc.build("thermal", tau=tau)[0]
    nf = gs.NormalForm.from_covariance(g)
    return _rows(f"thermal(tau={io.fmt(tau)})", rho, cr.weak_realignment(g).value,
                 cr.realignment_trace_norm_normal_form(nf).value, 1e-8)


def oracle_eprnoise(args) -> list[dict]:
    r = args.r if args.r is not None else 0.2
    V = args.V if args.V is not None else 0.4
    rho = fock.with_escalation(lambda d: fock.tmsv_with_noise(r, V, d), _cutoffs(args))
    g = gs.tmsv_with_noise(r, V)
    nf = gs.NormalForm.from_covariance(g)
    tol = max(ORACLE_TOL, fock.norm_error_bound(rho, cr.realignment_trace_norm_normal_form(nf).value))
    return _rows(f"eprnoise(r={io.fmt(r)},V={io.fmt(V)})", rho, cr.weak_realignment(g).value,
                 cr.realignment_trace_norm_normal_form(nf).value, tol)


def oracle_dual_witness(args) -> list[dict]:
    tau = args.tau if args.tau is not None else 0.5
    t = args.t if args.t is not None else 0.49
    rho = fock.with_escalation(lambda d: fock.tmsv(tau, d), _cutoffs(args))
    lhs, rhs = fock.dual_witness_sides(rho, t)
    gauss = fl.filter_covariance(gs.tmsv(math.atanh(tau)), fl.FilterSpec(fl.FilterKind.ATTENUATE, fl.Subsystem.A, t))
    name = f"dual-witness(tau={io.fmt(tau)},t={io.fmt(t)})"
    rows = []
    for q, a, b, tol in (("filtered trace_R vs witness", lhs, rhs, 1e-8),
                         ("filtered trace_R vs Gaussian", lhs, cr.weak_realignment(gauss).value, ORACLE_TOL)):
        rows.append({"state_id": name, "quantity": q, "D": rho.cutoff, "tail": rho.tail,
                     "closed_form": b, "oracle": a, "abs_diff": abs(a - b),
                     "tolerance": tol, "passed": bool(abs(a - b) <= tol)})
    return rows


ORACLE_SCENARIOS = {
    "tmsv": oracle_tmsv,
    "thermal": oracle_thermal,
    "eprnoise": oracle_eprnoise,
    "dual-witness": oracle_dual_witness,
}


def cmd_oracle(args: argparse.Namespace) -> int:
    names = list(ORACLE_SCENARIOS) if args.scenario == "all" else [args.scenario]
    rows = []
    for n in names:
        rows.extend(ORACLE_SCENARIOS[n](args))
    _emit(io.dumps(rows) + "\n", args.out, "oracle.json")
    for r in rows:
        log.info("%s %s %s diff=%s", "PASS" if r["passed"] else "FAIL", r["state_id"], r["quantity"], io.fmt(r["abs_diff"]))
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_MISMATCH


# -- entry point -------------------------------------------------------------------------


def _add_state_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("state", nargs="?", choices=sorted(sc.BUILTINS), help="built-in state")
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--r", type=float, help="squeezing parameter")
    p.add_argument("--V", type=float, help="additive noise variance")
    p.add_argument("--tau", type=float, help="thermal parameter or mixing transmittance")
    p.add_argument("--theta", type=_parse_angle, help="rotation angle (accepts 'pi')")
    p.add_argument("--noisy-mode", type=int, help="mode receiving the noise (eprnoise)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvrealign", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("criterion", help="evaluate separability criteria")
    _add_state_args(p)
    p.add_argument("--criteria", nargs="+", choices=[c.value for c in CriterionId])
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_criterion)

    p = sub.add_parser("sweep-t", help="weak realignment along the filter parameter")
    _add_state_args(p)
    p.add_argument("--grid", type=int, help="number of t samples")
    p.add_argument("--pre-phase", type=_parse_angle, help="phase shift on Bob's modes before filtering")
    p.add_argument("--kind", choices=[k.value for k in fl.FilterKind])
    p.add_argument("--target", choices=["A", "B"])
    p.add_argument("--pipeline", action="store_true", help="also run the full filtration pipeline")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("examples", help="reproduce the worked examples")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("oracle", help="Fock-space cross-check of the closed forms")
    p.add_argument("scenario", nargs="?", default="all", choices=["all", *ORACLE_SCENARIOS])
    p.add_argument("--tau", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--V", type=float)
    p.add_argument("--t", type=float, help="attenuation for the dual-witness check")
    p.add_argument("--cutoff", type=int, help="fixed Fock cutoff (default: escalate 40, 60, 80)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except TruncationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESCALATION
    except (sc.ConfigError, StructuralError, UnphysicalError, FilterDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
