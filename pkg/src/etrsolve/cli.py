"""Command-line front end.

Subcommands compose through files or pipes (`example` emits a model document
that `solve` reads from a path or stdin).  Every subcommand renders a table
derived from the same dict that ``--json`` prints, so the JSON is always a
superset of the table.  Exit codes: 0 success, 1 infeasible model / failed
check / invalid input data, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Dict, Optional

from . import diagnostics, evaluation, program
from .extreal import fmt_ext
from .model import (
    FiniteMdp,
    ModelFormatError,
    ModelValidationError,
    StationaryPolicy,
    build_example_model,
    build_phantom_demo,
    parse_model_document,
    serialize_model,
    validate_model,
)


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None


def _load(path: str, mode: str):
    try:
        return parse_model_document(_read_text(path), mode=mode)
    except (ModelFormatError, ModelValidationError) as exc:
        raise CliError(str(exc)) from None


def _load_policy(path: str, m: FiniteMdp) -> StationaryPolicy:
    try:
        doc = json.loads(_read_text(path), parse_float=str)
    except json.JSONDecodeError as exc:
        raise CliError(f"policy file is not valid JSON: {exc}") from None
    lookup = {str(x): x for x in m.states}
    rows: Dict = {}
    for key, row in doc.items():
        if key not in lookup:
            raise CliError(f"policy file references unknown state {key!r}")
        rows[lookup[key]] = {a: Fraction(str(pr)) for a, pr in row.items()}
    return StationaryPolicy(rows)


def _kernel_rows(args, kernel_from_file):
    if getattr(args, "kernel", "file") == "file" and kernel_from_file is not None:
        return kernel_from_file, "uniform"
    choice = getattr(args, "kernel", "uniform")
    if choice == "file":
        return None, "uniform"
    return None, choice


def _render(doc, indent: int = 0, key: Optional[str] = None) -> str:
    pad = "  " * indent
    label = f"{pad}{key}: " if key is not None else pad
    if isinstance(doc, dict):
        if not doc:
            return f"{label}{{}}"
        head = f"{pad}{key}:" if key is not None else None
        body = "\n".join(_render(v, indent + (key is not None), k) for k, v in doc.items())
        return f"{head}\n{body}" if head else body
    if isinstance(doc, list):
        if not doc:
            return f"{label}[]"
        if all(not isinstance(v, (dict, list)) for v in doc):
            return f"{label}{', '.join(str(v) for v in doc)}"
        head = f"{pad}{key}:" if key is not None else None
        body = "\n".join(_render(v, indent + (key is not None)) for v in doc)
        return f"{head}\n{body}" if head else body
    return f"{label}{doc}"


def _emit(args, doc) -> None:
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n" if args.json else _render(doc) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="etrsolve", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("model", help="model file path, or - for stdin")
        p.add_argument("--mode", choices=["rational", "float"], default="rational")
        p.add_argument("--json", action="store_true", help="emit machine-readable JSON")
        p.add_argument("--out", help="write output to a file instead of stdout")
        p.add_argument("--tol", type=float, default=1e-9, help="float-mode feasibility tolerance")
        p.add_argument(
            "--kernel",
            choices=["file", "uniform", "dyadic"],
            default="file",
            help="reference kernel: the file's kernel when present (default), or a built rule",
        )

    p = sub.add_parser("validate", help="validate a model file")
    common(p)

    p = sub.add_parser("solve", help="solve the constrained program")
    common(p)
    p.add_argument("--dual", action="store_true", help="include the Lagrangian dual report")
    p.add_argument("--timings", action="store_true", help="include stage timings in the output")
    p.add_argument("--dump-lp", metavar="PATH",
                   help="write the assembled program in plain-text equation form")

    p = sub.add_parser("check", help="run assumption checks, phantom detection and supports")
    common(p)
    p.add_argument("--dual", action="store_true")

    p = sub.add_parser("slater", help="report the interior-feasibility slack")
    common(p)

    p = sub.add_parser("evaluate", help="exact policy evaluation")
    common(p)
    p.add_argument("--policy", required=True, help="policy file (state -> action -> probability)")

    p = sub.add_parser("simulate", help="Monte Carlo policy evaluation")
    common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--samples", type=int, default=10000)

    p = sub.add_parser("phantom", help="naive balance program vs the restricted program")
    common(p)

    p = sub.add_parser("dual", help="Lagrangian dual report")
    common(p)
    p.add_argument("--method", choices=["auto", "exact", "golden", "subgradient"], default="auto")

    p = sub.add_parser("example", help="generate the truncated-chain example model")
    p.add_argument("--N", type=int, default=60)
    p.add_argument("--theta", type=_parse_fraction, default=Fraction(1, 4))
    p.add_argument("--paper-p", action="store_true", help="embed the hand-specified reference kernel")
    p.add_argument("--include-negative", type=int, default=0, metavar="M",
                   help="also include states -M..0 (base measure vanishes there)")
    p.add_argument("--out")

    p = sub.add_parser("phantom-demo", help="generate the phantom-demonstration model")
    p.add_argument("--out")

    return top


def _cmd_validate(args) -> int:
    try:
        m, _ = _load(args.model, args.mode)
    except CliError as exc:
        doc = {"valid": False, "problems": str(exc).splitlines()}
        _emit(args, doc)
        return 1
    rep = validate_model(m)
    _emit(args, {"valid": rep.is_valid, "violations": rep.violations, "notes": rep.notes})
    return 0 if rep.is_valid else 1


def _cmd_solve(args) -> int:
    m, kernel_file = _load(args.model, args.mode)
    rows, rule = _kernel_rows(args, kernel_file)
    report = program.solve_constrained(
        m, mode=args.mode, kernel=rule, kernel_rows=rows,
        with_dual=args.dual, feas_tol=args.tol,
    )
    if args.dump_lp and report.base is not None and report.structure is not None:
        from .lp import dump_lp

        asm = program.assemble_program(m, report.base, report.structure)
        names = [f"m[{x}|{a}]" for (x, a) in asm.pairs]
        with open(args.dump_lp, "w", encoding="utf-8") as fh:
            fh.write(dump_lp(asm.problem, names=names))
    _emit(args, program.report_to_dict(report, include_timings=args.timings))
    return 0 if report.status == program.STATUS_OPTIMAL else 1


def _cmd_check(args) -> int:
    m, kernel_file = _load(args.model, args.mode)
    rows, rule = _kernel_rows(args, kernel_file)
    doc = diagnostics.run_diagnostics(
        m, mode=args.mode, kernel=rule, kernel_rows=rows,
        with_dual=args.dual, feas_tol=args.tol,
    )
    _emit(args, doc)
    return 0 if doc["b1"]["passed"] and doc["b2"]["passed"] else 1


def _cmd_slater(args) -> int:
    from .reference import compute_base_measure, construct_reference_kernel
    from .structure import zero_value_structure

    m, kernel_file = _load(args.model, args.mode)
    rows, rule = _kernel_rows(args, kernel_file)
    ref = construct_reference_kernel(m, weights=rule, user_rows=rows)
    base = compute_base_measure(m, ref, mode=args.mode)
    s_zero = zero_value_structure(m, base.support)
    part = diagnostics.check_slater(m, base, s_zero, mode=args.mode, feas_tol=args.tol)
    _emit(args, part.as_dict())
    return 0 if part.passed else 1


def _cmd_evaluate(args) -> int:
    m, _ = _load(args.model, args.mode)
    policy = _load_policy(args.policy, m)
    result = evaluation.evaluate_policy(m, policy, mode=args.mode)
    doc = {
        "reward_value": fmt_ext(result.reward_value),
        "constraint_values": {
            c.name: fmt_ext(v) for c, v in zip(m.constraints, result.constraint_values)
        },
        "divergent_states": sorted(str(x) for x in result.divergent_states),
        "occupation": {
            f"{x}|{a}": fmt_ext(mass)
            for (x, a), mass in sorted(result.occupation.mass.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
            if not (mass.is_finite and mass.finite_value == 0)
        },
    }
    _emit(args, doc)
    return 0


def _cmd_simulate(args) -> int:
    m, _ = _load(args.model, args.mode)
    policy = _load_policy(args.policy, m)
    report = evaluation.simulate_policy(
        m, policy, horizon=args.horizon, samples=args.samples, seed=args.seed
    )

    def est(e):
        return {
            "mean": e.mean,
            "half_width": e.half_width,
            "truncation_bound": e.truncation_bound if e.truncation_bound is not None else "unbounded",
        }

    doc = {
        "seed": args.seed,
        "horizon": args.horizon,
        "samples": args.samples,
        "compiled_kernel": report.compiled_kernel,
        "reward": est(report.reward),
        "constraints": {e.name: est(e) for e in report.constraints},
    }
    _emit(args, doc)
    return 0


def _cmd_phantom(args) -> int:
    m, kernel_file = _load(args.model, args.mode)
    rows, rule = _kernel_rows(args, kernel_file)
    rep = diagnostics.solve_naive_program(
        m, mode=args.mode, kernel=rule, kernel_rows=rows, feas_tol=args.tol
    )
    _emit(args, rep.as_dict())
    return 0 if rep.verdict != "undetermined" else 1


def _cmd_dual(args) -> int:
    m, kernel_file = _load(args.model, args.mode)
    rows, rule = _kernel_rows(args, kernel_file)
    try:
        rep = diagnostics.lagrangian_dual(
            m, mode=args.mode, kernel=rule, kernel_rows=rows,
            method=args.method, feas_tol=args.tol,
        )
    except diagnostics.DualInnerUnboundedError as exc:
        raise CliError(str(exc))
    _emit(args, rep.as_dict())
    return 0


def _cmd_example(args) -> int:
    try:
        m, kernel = build_example_model(
            args.N, args.theta, include_paper_p=args.paper_p,
            include_negative=args.include_negative,
        )
    except ValueError as exc:
        raise CliError(str(exc), code=2)
    text = serialize_model(m, kernel_rows=kernel)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_phantom_demo(args) -> int:
    text = serialize_model(build_phantom_demo())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "check": _cmd_check,
    "slater": _cmd_slater,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
    "phantom": _cmd_phantom,
    "dual": _cmd_dual,
    "example": _cmd_example,
    "phantom-demo": _cmd_phantom_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelFormatError, ModelValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
