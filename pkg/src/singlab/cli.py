"""Command-line front end: classify, solve, verify-all, mms.

All rational parameters are passed as exact fraction strings ("6/5"); decimal
parsing would corrupt knife-edge regime boundaries, so fractions are parsed
before any computation and malformed input exits with code 2.  Exit codes:
0 success, 2 invalid parameters, 3 non-convergence (partial outputs kept),
4 unwritable output directory, 5 audit failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .exponents import Params, RegimeError, RegimeTag, classify, strict_positivity, v_integrability
from .fields import Field, load_field, save_field
from .scheme import IterationControl, SchemeState, SweepResult, residual_record, sweep_levels
from .presets import PRESETS, build_problem, run_preset

EXIT_OK = 0
EXIT_BAD_PARAMS = 2
EXIT_NO_CONVERGENCE = 3
EXIT_BAD_OUTDIR = 4
EXIT_AUDIT_FAILED = 5

_EXPLANATIONS = {
    RegimeTag.BOUNDED: "bounded-datum regime (m > d/2): u is essentially bounded, v is bounded",
    RegimeTag.BORDERLINE: "borderline datum (m = d/2): u lies in every finite Lebesgue space",
    RegimeTag.DUAL_SPACE: "dual-range datum: u gains integrability up to L^(m**(1+gamma))",
    RegimeTag.OUTSIDE_DUAL_LR: "datum below the dual range with r > 2*: u lies in L^r",
    RegimeTag.OUTSIDE_DUAL_LR1: "datum below the dual range, theta = 0: u lies in L^(r+1)",
    RegimeTag.HIGHER_INTEGRABILITY: "singular reaction gain: u lies in L^(r+1+gamma)",
    RegimeTag.NONE: "no integrability statement applies (m below every threshold)",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singlab",
        description="numerical laboratory for a doubly singular coupled elliptic system",
    )
    parser.add_argument("--config", help="JSON file with default flag values (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cls = sub.add_parser("classify", help="regime and exponent report for a parameter tuple")
    for flag in ("--d", "--r", "--gamma", "--theta", "--m"):
        p_cls.add_argument(flag, required=True)

    p_solve = sub.add_parser("solve", help="run the level sweep and write CSV/field files")
    _add_problem_flags(p_solve)
    p_solve.add_argument("--schedule", default=None, help="comma-separated levels, e.g. 1,2,4,8")
    p_solve.add_argument("--outdir", default=None)
    p_solve.add_argument(
        "--save-fields", choices=("final", "all", "none"), default="final", dest="save_fields"
    )
    _add_iteration_flags(p_solve)

    p_verify = sub.add_parser("verify-all", help="run the audit battery for a preset")
    _add_problem_flags(p_verify)
    p_verify.add_argument("--outdir", default=None)
    p_verify.add_argument(
        "--states-dir",
        default=None,
        dest="states_dir",
        help="load solved (u, v) fields written by `solve` instead of re-solving",
    )
    _add_iteration_flags(p_verify)

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence study")
    p_mms.add_argument("--outdir", default=None)
    p_mms.add_argument("--coupled-sizes", default="8,16,32", dest="coupled_sizes")
    return parser


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="default-d3", choices=sorted(PRESETS))
    p.add_argument("--n-cells", type=int, default=None, dest="n_cells")
    p.add_argument("--jobs", type=int, default=1)


def _add_iteration_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-inner", type=float, default=None, dest="tol_inner")
    p.add_argument("--tol-outer", type=float, default=None, dest="tol_outer")


def _iteration_control(args) -> IterationControl:
    kwargs = {}
    if getattr(args, "tol_inner", None) is not None:
        kwargs["tol_inner"] = args.tol_inner
    if getattr(args, "tol_outer", None) is not None:
        kwargs["tol_outer"] = args.tol_outer
    return IterationControl(**kwargs)


def _resolve_outdir(flag_value: Optional[str]) -> str:
    return flag_value or os.environ.get("SINGLAB_OUTDIR") or "singlab-out"


def _prepare_outdir(path: str) -> Optional[str]:
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        print(f"error: cannot write to output directory {path!r}: {exc}", file=sys.stderr)
        return None
    return path


def cmd_classify(args) -> int:
    try:
        params = Params(
            d=int(args.d),
            r=Fraction(args.r),
            gamma=Fraction(args.gamma),
            theta=Fraction(args.theta),
            m=Fraction(args.m),
        )
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_BAD_PARAMS
    regime = classify(params)
    report = {
        "params": params.as_dict(),
        "regime": regime.as_dict(),
        "explanations": [
            _EXPLANATIONS[tag] for tag in sorted(regime.tags, key=lambda t: t.value)
        ],
    }
    try:
        report["v_exponent_r2"] = str(v_integrability(params))
    except RegimeError as exc:
        report["v_exponent_r2"] = None
        report["v_exponent_note"] = str(exc)
    pos = strict_positivity(params)
    report["positivity"] = {
        "holds": pos.holds,
        "branches": list(pos.branches),
        "applies": params.r == 2 and RegimeTag.DUAL_SPACE in regime.tags,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _write_csv(path: str, records: Sequence[Dict[str, object]]) -> None:
    if not records:
        return
    fieldnames: List[str] = []
    for rec in records:
        for key in rec:
            if key not in fieldnames:
                fieldnames.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _csv_cell(rec.get(k)) for k in fieldnames})


def _csv_cell(value) -> object:
    if isinstance(value, float):
        return repr(value)
    return value


def cmd_solve(args) -> int:
    preset = PRESETS[args.preset]
    outdir = _prepare_outdir(_resolve_outdir(args.outdir))
    if outdir is None:
        return EXIT_BAD_OUTDIR
    data = build_problem(preset, n_cells=args.n_cells)
    if args.schedule is not None:
        schedule = tuple(int(tok) for tok in args.schedule.split(","))
    else:
        schedule = preset.schedule or (preset.n_fixed or 1,)
    it = _iteration_control(args)
    sweep = sweep_levels(data, schedule, it, jobs=args.jobs)
    _write_csv(os.path.join(outdir, "levels.csv"), sweep.records)
    meta = {
        "preset": preset.name,
        "params": data.params.as_dict(),
        "n_cells": data.grid.n_cells,
        "schedule": list(schedule),
        "levels": [
            {"n": s.n, "converged": s.converged, "failure": s.failure} for s in sweep.states
        ],
    }
    with open(os.path.join(outdir, "levels.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    states_to_save = sweep.states if args.save_fields == "all" else sweep.states[-1:]
    if args.save_fields != "none":
        for state in states_to_save:
            save_field(state.u, os.path.join(outdir, f"u_n{state.n}.field"))
            save_field(state.v, os.path.join(outdir, f"v_n{state.n}.field"))
    bad = [s for s in sweep.states if not s.converged]
    if bad:
        print(
            f"warning: {len(bad)} level(s) did not converge: {[s.n for s in bad]}",
            file=sys.stderr,
        )
        return EXIT_NO_CONVERGENCE
    print(f"wrote {len(sweep.states)} level(s) to {outdir}")
    return EXIT_OK


def _load_states(states_dir: str, data) -> SweepResult:
    """Rebuild a sweep from saved fields; residuals are recomputed fresh so
    corrupted files are caught by the audits rather than trusted."""
    from .fields import lp_norm

    with open(os.path.join(states_dir, "levels.json")) as fh:
        meta = json.load(fh)
    states: List[SchemeState] = []
    for entry in meta["levels"]:
        n = int(entry["n"])
        u = load_field(os.path.join(states_dir, f"u_n{n}.field"))
        v = load_field(os.path.join(states_dir, f"v_n{n}.field"))
        res = residual_record(data, u, v, n)
        states.append(
            SchemeState(
                n=n,
                u=u,
                v=v,
                inner_iters_u=0,
                inner_iters_v=0,
                outer_iters=0,
                converged=bool(entry["converged"]),
                residuals=res,
            )
        )
    diffs = [
        lp_norm(Field(data.grid, b.u.values - a.u.values), 2)
        for a, b in zip(states, states[1:])
    ]
    decreasing = all(y < x for x, y in zip(diffs, diffs[1:])) if len(diffs) >= 2 else False
    return SweepResult(states, [], diffs, decreasing)


def cmd_verify_all(args) -> int:
    preset = PRESETS[args.preset]
    it = _iteration_control(args)
    sweep = None
    if args.states_dir:
        data = build_problem(preset, n_cells=args.n_cells)
        sweep = _load_states(args.states_dir, data)
    run = run_preset(preset, it, jobs=args.jobs, n_cells=args.n_cells, sweep=sweep)
    for note in run.notes:
        print(f"note: {note}")
    rows = [
        {
            "audit": r.audit_id,
            "left": r.left,
            "right": r.right,
            "slack": r.slack,
            "eps_res": r.eps_res,
            "passed": r.passed,
            "context": json.dumps(r.context, sort_keys=True, default=str),
        }
        for r in run.reports
    ]
    if args.outdir is not None:
        outdir = _prepare_outdir(_resolve_outdir(args.outdir))
        if outdir is None:
            return EXIT_BAD_OUTDIR
        _write_csv(os.path.join(outdir, f"audits-{preset.name}.csv"), rows)
        with open(os.path.join(outdir, f"audits-{preset.name}.json"), "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True, default=str)
    n_pass = sum(r.passed for r in run.reports)
    print(f"{preset.name}: {n_pass}/{len(run.reports)} audits passed")
    if not run.passed:
        for r in run.failures:
            print(
                f"FAIL {r.audit_id}: left={r.left:.6g} right={r.right:.6g} "
                f"context={json.dumps(r.context, sort_keys=True, default=str)}",
                file=sys.stderr,
            )
        return EXIT_AUDIT_FAILED
    return EXIT_OK


def cmd_mms(args) -> int:
    from .experiments import convergence_study

    sizes = tuple(int(tok) for tok in args.coupled_sizes.split(","))
    report = convergence_study(coupled_sizes=sizes)
    for d, rec in sorted(report.linear.items()):
        orders = ", ".join(f"{o:.3f}" for o in rec["orders"])
        print(f"linear d={d}: sizes={rec['sizes']} orders=[{orders}]")
    orders = ", ".join(f"{o:.3f}" for o in report.coupled_orders)
    print(f"coupled d=3: sizes={report.coupled['sizes']} orders=[{orders}]")
    if args.outdir is not None:
        outdir = _prepare_outdir(_resolve_outdir(args.outdir))
        if outdir is None:
            return EXIT_BAD_OUTDIR
        rows = []
        for d, rec in sorted(report.linear.items()):
            for size, err in zip(rec["sizes"], rec["errors"]):
                rows.append({"study": f"linear-d{d}", "n_cells": size, "sup_error": err})
        for size, err_u, err_v in zip(
            report.coupled["sizes"], report.coupled["errors_u"], report.coupled["errors_v"]
        ):
            rows.append(
                {"study": "coupled-d3", "n_cells": size, "sup_error": max(err_u, err_v)}
            )
        _write_csv(os.path.join(outdir, "mms.csv"), rows)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # two-phase parse so --config can supply defaults while flags win
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    if config_path:
        try:
            with open(config_path) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {config_path!r}: {exc}", file=sys.stderr)
            return EXIT_BAD_PARAMS
        parser.set_defaults(**defaults)
        for sub_action in parser._subparsers._group_actions:  # propagate to subcommands
            for sub in sub_action.choices.values():
                sub.set_defaults(**{k: v for k, v in defaults.items()})
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    handlers = {
        "classify": cmd_classify,
        "solve": cmd_solve,
        "verify-all": cmd_verify_all,
        "mms": cmd_mms,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, ZeroDivisionError, RegimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_PARAMS


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
