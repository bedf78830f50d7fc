"""Command line front end: ``morphic <command> --model PATH``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for input
errors (unreadable or invalid model, missing block).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import expr as E
from . import model as M
from .algebroid import check_axioms
from .connection import NotFlatError, NotParallelError
from .expr import SampleSpec
from .geometry import NonLinearFieldError
from .imfoliation import (
    IMFoliationError,
    check_im,
    check_morphic,
    construct_fa,
    extract_nabla,
    quotient,
    roundtrip,
)
from .parser import ParseError
from .report import Report

COMMANDS = ("validate", "check-im", "build-fa", "extract", "roundtrip", "quotient", "dirac")


class InputError(Exception):
    pass


def _need(model, attr, command):
    value = getattr(model, attr)
    if value is None:
        raise InputError(f"{model.source}: {attr}: the {command} command needs an {attr} block")
    return value


def _spec(model, args) -> SampleSpec:
    spec = model.spec
    kw = {}
    if args.samples is not None:
        kw["samples"] = args.samples
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.fd_step is not None:
        kw["h"] = args.fd_step
    try:
        return replace(spec, **kw)
    except ValueError as err:
        raise InputError(f"sampling flags: {err}") from err


def _im_from(model, spec):
    if model.im is not None:
        return model.im
    if model.dirac is not None:
        from .dirac import dirac_im

        return dirac_im(model.dirac, model.characteristic, spec)
    raise InputError(f"{model.source}: im: this command needs an im block (or a dirac block)")


def cmd_validate(model, spec):
    report = Report("Lie algebroid axioms")
    if model.dirac is not None:
        from .dirac import check_dirac, dirac_to_algebroid

        report.extend(check_dirac(model.dirac, spec), group="Dirac structure")
        if report.passed:
            report.extend(check_axioms(dirac_to_algebroid(model.dirac, spec), spec), group="Dirac algebroid")
    if model.algebroid is not None:
        report.extend(check_axioms(model.algebroid, spec))
    if model.algebroid is None and model.dirac is None:
        raise InputError(f"{model.source}: algebroid: the validate command needs an algebroid or dirac block")
    return report, None


def cmd_check_im(model, spec):
    report, _ = check_im(_im_from(model, spec), spec)
    return report, None


def cmd_build_fa(model, spec):
    im = _im_from(model, spec)
    report = Report("morphic foliation construction")
    im_report, pf = check_im(im, spec)
    report.extend(im_report, group="check_im")
    report.certificate = im_report.certificate
    report.notes.extend(im_report.notes)
    if not im_report.passed:
        return report, None
    fa = construct_fa(im, spec, parallel=pf, fiber_box=model.fiber_box)
    report.extend(check_morphic(fa, spec, parallel=pf), group="check_morphic")
    try:
        block = M.model_dict(model.name, model.chart, spec, im.algebroid, im, fa, model.fiber_box)
    except ValueError as err:
        report.notes.append(f"fa block not emitted: {err}")
        block = None
    return report, block


def cmd_extract(model, spec):
    report = Report("connection extraction")
    if model.fa is not None:
        fa = model.fa
        complement = model.im.complement if model.im is not None else None
        core = model.im.core if model.im is not None else None
    else:
        im = _im_from(model, spec)
        im_report, pf = check_im(im, spec)
        report.extend(im_report, group="check_im")
        if not im_report.passed:
            return report, None
        fa = construct_fa(im, spec, parallel=pf)
        complement, core = im.complement, im.core
    report.extend(check_morphic(fa, spec), group="check_morphic")
    if not report.passed:
        return report, None
    conn = extract_nabla(fa, spec, complement=complement, core=core)
    report.extend(conn.report, group="extract")
    try:
        block = {"gamma": M.gamma_block(conn.gamma), "leaf": list(conn.leaf),
                 "complement": [[str(c) for c in s.components] for s in conn.Q],
                 "core": [[str(c) for c in s.components] for s in conn.core]}
    except ValueError as err:
        report.notes.append(f"gamma block not emitted: {err}")
        block = None
    return report, block


def cmd_roundtrip(model, spec):
    return roundtrip(_im_from(model, spec), spec), None


def cmd_quotient(model, spec):
    im = _im_from(model, spec)
    qa, report = quotient(im, spec)
    if qa is None:
        return report, None
    try:
        block = M.model_dict(f"{model.name}-quotient", qa.chart, spec, qa)
    except ValueError as err:
        report.notes.append(f"quotient model not emitted: {err}")
        block = None
    return report, block


def cmd_dirac(model, spec):
    from .dirac import check_dirac, dirac_im

    D = _need(model, "dirac", "dirac")
    report = Report("Dirac-induced IM-foliation")
    report.extend(check_dirac(D, spec), group="Dirac structure")
    if not report.passed:
        return report, None
    im = dirac_im(D, model.characteristic, spec)
    im_report, _ = check_im(im, spec)
    report.extend(im_report, group="check_im")
    report.certificate = im_report.certificate
    block = M.model_dict(f"{model.name}-im", model.chart, spec, im.algebroid, im)
    return report, block


HANDLERS = {
    "validate": cmd_validate,
    "check-im": cmd_check_im,
    "build-fa": cmd_build_fa,
    "extract": cmd_extract,
    "roundtrip": cmd_roundtrip,
    "quotient": cmd_quotient,
    "dirac": cmd_dirac,
}


def run(command: str, model, spec: SampleSpec):
    """Run one command on a loaded model; returns ``(report, emitted block or None)``."""
    t0 = time.perf_counter()
    report, block = HANDLERS[command](model, spec)
    report.command = command
    report.wall_time = time.perf_counter() - t0
    return report, block


def _add_common(p):
    p.add_argument("--model", required=True, help="model JSON file, or gallery:NAME")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--fd-step", type=float, dest="fd_step", help="finite-difference step for numeric frames")
    p.add_argument("--out", help="write the emitted model block here instead of stdout")
    p.add_argument("--timing", action="store_true", help="include wall time in the JSON report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphic", description="Check IM-foliations and morphic foliations of Lie algebroids.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    ex = sub.add_parser("examples", help="list or run the built-in example models")
    ex.add_argument("name", nargs="?")
    ex.add_argument("--dump", action="store_true", help="print the model file instead of running it")
    ex.add_argument("--report")
    ex.add_argument("--seed", type=int)
    ex.add_argument("--samples", type=int)
    ex.add_argument("--tol", type=float)
    ex.add_argument("--fd-step", type=float, dest="fd_step")
    ex.add_argument("--out")
    ex.add_argument("--timing", action="store_true")
    return parser


def _emit(report: Report, block, args, out) -> int:
    print(report.format(), file=out)
    if args.report:
        Path(args.report).write_text(report.to_json(timing=args.timing))
    if block is not None:
        text = M.dumps(block)
        if args.out:
            Path(args.out).write_text(text)
        else:
            print("-- emitted model", file=out)
            print(text, end="", file=out)
    return 0 if report.passed else 1


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "examples":
            if not args.name:
                for name in M.gallery_names():
                    data = M.gallery_dict(name)
                    print(f"{name:26s} [{data.get('command', 'validate')}] {data.get('description', '')}", file=out)
                return 0
            data = M.gallery_dict(args.name)
            if args.dump:
                print(M.dumps(data), end="", file=out)
                return 0
            model = M.load_dict(data, f"gallery:{args.name}")
            command = data.get("command", "validate")
        else:
            model = M.load(args.model)
            command = args.command
        spec = _spec(model, args)
        previous = E.Opaque.BASE_STEP
        E.Opaque.BASE_STEP = spec.h
        try:
            report, block = run(command, model, spec)
        finally:
            E.Opaque.BASE_STEP = previous
    except (M.ModelError, InputError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (IMFoliationError, NotFlatError, NotParallelError, NonLinearFieldError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return _emit(report, block, args, out)


if __name__ == "__main__":
    sys.exit(main())
