"""Batch command-line front end: ``qhorn <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import dynamics, fockweyl, qwalk, slh
from .horn import DEFAULT_SEED, HornError, Registry

EXIT_PROVED, EXIT_REFUTED, EXIT_FAILED, EXIT_ERROR = 0, 1, 2, 3
EXIT_USAGE, EXIT_NOINPUT = 64, 66
OUTCOME_EXIT = {"proved": EXIT_PROVED, "refuted": EXIT_REFUTED, "failed": EXIT_FAILED}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def default_seed() -> int:
    env = os.environ.get("QHORN_SEED")
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"QHORN_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qhorn", description=__doc__)
    p.add_argument("--seed", type=int, default=None, help="PRNG seed (default: $QHORN_SEED or %d)" % DEFAULT_SEED)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    pr = sub.add_parser("prove", help="solve goals against a clause file")
    pr.add_argument("file")
    pr.add_argument("--goal", action="append", required=True, help="goal to solve; repeat for a query sequence")
    pr.add_argument("--trace", action="store_true", help="print the full proof trace")
    pr.add_argument("--max-depth", type=int, default=64)
    pr.add_argument("--max-steps", type=int, default=100_000)

    wk = sub.add_parser("walk", help="Hadamard walk position distribution as CSV")
    wk.add_argument("--steps", type=int, required=True)
    wk.add_argument("--out", required=True)

    sl = sub.add_parser("slh", help="SLH network tools")
    slsub = sl.add_subparsers(dest="slh_command", parser_class=_Parser)
    slsub.required = True
    cp = slsub.add_parser("compose", help="compose a JSON network and print S, L, H")
    cp.add_argument("network")
    cp.add_argument("--cutoff", type=int, default=None, help="also check S unitarity and H hermiticity at this Fock cutoff")

    sm = sub.add_parser("simulate", help="integrate a master equation and write a trajectory CSV")
    sm.add_argument("--model", choices=["jc-cascade", "jc-cascade-full"], required=True)
    sm.add_argument("--initial", choices=sorted(dynamics.BASIS_LABELS), default="ee")
    sm.add_argument("--tmax", type=float, default=10.0)
    sm.add_argument("--dt", type=float, default=1e-3)
    sm.add_argument("--record-every", type=int, default=1)
    sm.add_argument("--out", required=True)
    sm.add_argument("--rho", action="store_true", help="append density-matrix entries")
    for name in ("kappa", "gamma", "g", "Delta", "Theta"):
        sm.add_argument(f"--{name}", type=float, default=getattr(slh.REFERENCE_PARAMS, name))
    sm.add_argument("--alpha", type=complex, default=slh.REFERENCE_PARAMS.alpha)
    sm.add_argument("--cutoff", type=int, default=slh.REFERENCE_PARAMS.fock_cutoff)

    fk = sub.add_parser("fock", help="Fock-layer invariants")
    fksub = fk.add_subparsers(dest="fock_command", parser_class=_Parser)
    fksub.required = True
    ck = fksub.add_parser("check", help="run the invariant suite")
    ck.add_argument("--samples", type=int, default=100_000)

    sub.add_parser("selftest", help="run every acceptance check")
    return p


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_prove(args, seed: int) -> int:
    reg = Registry.from_file(args.file, seed=seed)
    code = EXIT_FAILED
    for goal in args.goal:
        before = reg.world
        trace = reg.solve(goal, max_depth=args.max_depth, max_steps=args.max_steps)
        sys.stdout.write(trace.to_text(steps=args.trace))
        if trace.outcome == "proved" and reg.world is not before:
            sys.stdout.write(describe_world(reg.world, len(before.log)))
        code = OUTCOME_EXIT[trace.outcome]
    return code


def describe_world(world, seen: int = 0) -> str:
    """New measurement records, then the joint state of the unmeasured systems if it is pure."""
    from .horn.builtins import readout

    lines = []
    measured = set()
    for rec in world.log:
        measured |= set(rec.systems)
    for rec in world.log[seen:]:
        lines.append(f"measured {', '.join(rec.systems)} -> {rec.outcome} with probability {rec.probability:.12g}")
    rest = [n for n in world.systems if n not in measured]
    if rest:
        value, _ = readout(world, rest)
        lines.append(f"state({', '.join(rest)}) = {value}")
    return "".join(line + "\n" for line in lines)


def cmd_walk(args) -> int:
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    _write(args.out, qwalk.distribution_csv(qwalk.hadamard_walk(args.steps)))
    return 0


def cmd_slh(args) -> int:
    g = slh.load_network(args.network)
    print(g.describe())
    if args.cutoff is not None:
        g.check(args.cutoff)
        print(f"checked at cutoff {args.cutoff}: dims {g.dims(args.cutoff)}, S unitary, H Hermitian")
    return 0


def cmd_simulate(args) -> int:
    p = replace(
        slh.REFERENCE_PARAMS,
        kappa=args.kappa,
        gamma=args.gamma,
        g=args.g,
        Delta=args.Delta,
        Theta=args.Theta,
        alpha=args.alpha,
        fock_cutoff=args.cutoff,
    )
    if args.model == "jc-cascade":
        tr = dynamics.run_jc_cascade(p, args.initial, args.tmax, args.dt, args.record_every)
    else:
        tr = dynamics.run_full_cascade(p, args.initial, args.tmax, args.dt, args.record_every)
    _write(args.out, tr.to_csv(include_rho=args.rho))
    conc = np.asarray(tr.observables["concurrence"], dtype=float)
    k = int(np.nanargmax(conc)) if np.any(np.isfinite(conc)) else 0
    print(f"max concurrence {conc[k]:.6g} at t = {tr.times[k]:.6g}")
    return 0


def cmd_fock(args, seed: int) -> int:
    rows = fockweyl.fock_invariant_suite(seed=seed, samples=args.samples)
    for name, passed, detail in rows:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if all(r[1] for r in rows) else 1


def cmd_selftest(seed: int) -> int:
    from .selftest import run_all

    t0 = time.perf_counter()
    results = run_all(seed, echo=lambda line: print(line, flush=True))
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f}s")
    return 0 if n_ok == len(results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        seed = args.seed if args.seed is not None else default_seed()
        if args.command == "prove":
            return cmd_prove(args, seed)
        if args.command == "walk":
            return cmd_walk(args)
        if args.command == "slh":
            return cmd_slh(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "fock":
            return cmd_fock(args, seed)
        return cmd_selftest(seed)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except OSError as exc:
        print(f"qhorn: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except json.JSONDecodeError as exc:
        print(f"qhorn: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (HornError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"qhorn: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
