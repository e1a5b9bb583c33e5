"""Command-line front end: ``loccsep {efficiency,construct,simulate,sweep,audit}``.

Exit status: 0 on success, 1 for invalid input (precondition, parse or I/O
errors), 2 when ``audit`` finds a protocol beating the LOCC upper bound.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import protocol_io
from .errors import LoccSepError, PreconditionError
from .locc import LoccTask, audit_bound, build_protocol_pprime, evaluate_exact, simulate_mc
from .qcore import apply, canonical_pair
from .separation import (
    check_overlaps,
    eta_discrimination,
    eta_global_cloning,
    eta_global_product_separation,
    eta_global_separation,
    eta_locc_cloning,
    eta_locc_separation,
    eta_locc_upper_bound,
    eta_separation_upper_bound,
    separation_channel,
)

EXIT_OK, EXIT_INPUT, EXIT_BOUND = 0, 1, 2
SEPARATION_HEADER = ["mu", "nu", "mu_prime", "nu_prime", "eta_global", "eta_locc", "gap"]
CLONING_HEADER = ["mu", "nu", "m", "n", "eta_global", "eta_locc", "gap"]


def fmt(x: float) -> str:
    return f"{x:.12g}"


def _print_table(rows, out=None):
    out = out or sys.stdout
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        text = value if isinstance(value, str) else fmt(value)
        print(f"{name:<{width}}  {text}", file=out)


def _priors(args) -> tuple[float, float]:
    s = 0.5 if args.s is None else args.s
    t = 1.0 - s if args.t is None else args.t
    return s, t


# -- efficiency ------------------------------------------------------------------

def cmd_efficiency(args) -> int:
    if args.mu is None:
        raise PreconditionError("--mu is required")
    s, t = _priors(args)
    rows = []
    if args.mu_prime is not None:
        rows.append(("eta_global_separation", eta_global_separation(args.mu, args.mu_prime)))
        rows.append(("eta_separation_bound", eta_separation_upper_bound(s, t, args.mu, args.mu_prime)))
        if args.nu is not None and args.nu_prime is not None:
            glob = eta_global_product_separation(args.mu, args.nu, args.mu_prime, args.nu_prime)
            locc = eta_locc_separation(args.mu, args.nu, args.mu_prime, args.nu_prime)
            rows.append(("eta_global_product_separation", glob))
            rows.append(("eta_locc_separation", locc))
            rows.append(("eta_locc_bound", eta_locc_upper_bound(s, t, args.mu, args.nu, args.mu_prime, args.nu_prime)))
            rows.append(("gap_separation", glob - locc))
    if args.m is not None or args.n is not None:
        if args.m is None or args.n is None or args.nu is None:
            raise PreconditionError("cloning needs --mu, --nu, --m and --n")
        glob = eta_global_cloning(args.mu, args.nu, args.m, args.n)
        locc = eta_locc_cloning(args.mu, args.nu, args.m, args.n)
        rows.append(("eta_global_cloning", glob))
        rows.append(("eta_discrimination", eta_discrimination(args.mu, args.nu, args.m)))
        rows.append(("eta_locc_cloning", locc))
        mu_m, nu_m, mu_n, nu_n = args.mu**args.m, args.nu**args.m, args.mu**args.n, args.nu**args.n
        rows.append(("eta_locc_bound", eta_locc_upper_bound(s, t, mu_m, nu_m, mu_n, nu_n)))
        rows.append(("gap_cloning", glob - locc))
    if not rows:
        raise PreconditionError("nothing to compute: give --mu-prime and/or --m/--n")
    _print_table(rows)
    return EXIT_OK


# -- construct -------------------------------------------------------------------

def _format_matrix(m: np.ndarray) -> str:
    return np.array2string(m, precision=6, suppress_small=True, max_line_width=120)


def cmd_construct(args) -> int:
    if args.mu_prime is None:
        raise PreconditionError("construct needs --mu and --mu-prime")
    if args.nu is not None or args.nu_prime is not None:
        if args.nu is None or args.nu_prime is None:
            raise PreconditionError("give both --nu and --nu-prime for a two-party protocol")
        s, t = _priors(args)
        task = LoccTask.from_overlaps(args.mu, args.nu, args.mu_prime, args.nu_prime, s, t)
        root = build_protocol_pprime(task)
        text = protocol_io.dumps(root, task)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
            print(f"wrote protocol to {args.out}", file=sys.stderr)
        else:
            print(text)
        return EXIT_OK
    mu, mu_prime = check_overlaps(args.mu, args.mu_prime)
    phi, psi = canonical_pair(mu)
    phi_t, psi_t = canonical_pair(mu_prime)
    channel = separation_channel(phi, psi, phi_t, psi_t)
    _print_table([
        ("mu", mu),
        ("mu_prime", mu_prime),
        ("success_prob_phi", apply(channel.success, phi).weight),
        ("success_prob_psi", apply(channel.success, psi).weight),
        ("eta_global_separation", eta_global_separation(mu, mu_prime)),
        ("completeness_residual", f"{channel.instrument.completeness_residual():.3e}"),
    ])
    print("success =\n" + _format_matrix(channel.success.matrix))
    print("failure =\n" + _format_matrix(channel.failure.matrix))
    return EXIT_OK


# -- simulate --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise PreconditionError(f"--trials must be at least 1, got {args.trials}")
    s, t = _priors(args)
    task = LoccTask.from_overlaps(args.mu, args.nu, args.mu_prime, args.nu_prime, s, t)
    root = build_protocol_pprime(task)
    report = audit_bound(evaluate_exact(root, task), task)
    mc = simulate_mc(root, task, args.trials, args.seed)
    _print_table([
        ("exact_efficiency", report.efficiency),
        ("mc_frequency", mc.frequency),
        ("mc_stderr", mc.stderr),
        ("trials", str(mc.trials)),
        ("seed", str(args.seed)),
        ("bound", report.bound_value),
        ("bound_satisfied", str(report.bound_satisfied).lower()),
    ])
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------

@dataclass(frozen=True)
class Range:
    start: float
    stop: float
    steps: int

    def values(self) -> list[float]:
        if self.steps == 1:
            return [self.start]
        return [float(x) for x in np.linspace(self.start, self.stop, self.steps)]


def parse_range(text: str) -> Range:
    """``0.3`` or ``start:stop:steps``."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            v = float(parts[0])
            return Range(v, v, 1)
        if len(parts) == 3:
            steps = int(parts[2])
            if steps < 1:
                raise argparse.ArgumentTypeError(f"steps must be >= 1 in {text!r}")
            return Range(float(parts[0]), float(parts[1]), steps)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected VALUE or START:STOP:STEPS, got {text!r}")


def _int_values(r: Range, name: str) -> list[int]:
    out = []
    for v in r.values():
        if abs(v - round(v)) > 1e-9:
            raise PreconditionError(f"{name} values must be integers, got {v}")
        out.append(int(round(v)))
    return out


def sweep_rows(mode: str, mu: Range, nu: Range, mu_prime: Range | None, nu_prime: Range | None,
               m: Range | None, n: Range | None):
    """Yield CSV rows in grid order; points violating the orderings are skipped."""
    for r, name in ((mu, "mu"), (nu, "nu")):
        for v in r.values():
            if not 0.0 <= v < 1.0:
                raise PreconditionError(f"{name} values must lie in [0, 1), got {v}")
    if mode == "separation":
        if mu_prime is None or nu_prime is None:
            raise PreconditionError("separation sweep needs --mu-prime and --nu-prime")
        grid = itertools.product(mu.values(), nu.values(), mu_prime.values(), nu_prime.values())
        for a, b, ap, bp in grid:
            if ap < 0 or bp < 0:
                raise PreconditionError("target overlaps must be nonnegative")
            if ap > a or bp > b:
                continue
            glob = eta_global_product_separation(a, b, ap, bp)
            locc = eta_locc_separation(a, b, ap, bp)
            yield [a, b, ap, bp, glob, locc, glob - locc]
    else:
        if m is None or n is None:
            raise PreconditionError("cloning sweep needs --m and --n")
        grid = itertools.product(mu.values(), nu.values(), _int_values(m, "m"), _int_values(n, "n"))
        for a, b, mm, nn in grid:
            if mm < 1 or mm >= nn:
                continue
            glob = eta_global_cloning(a, b, mm, nn)
            locc = eta_locc_cloning(a, b, mm, nn)
            yield [a, b, mm, nn, glob, locc, glob - locc]


def write_sweep(fh, mode, rows) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SEPARATION_HEADER if mode == "separation" else CLONING_HEADER)
    count = 0
    for row in rows:
        writer.writerow([str(x) if isinstance(x, int) else fmt(x) for x in row])
        count += 1
    return count


def cmd_sweep(args) -> int:
    rows = sweep_rows(args.mode, args.mu, args.nu, args.mu_prime, args.nu_prime, args.m, args.n)
    # materialize first so a precondition error never leaves a half-written file
    rows = list(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            count = write_sweep(fh, args.mode, rows)
        print(f"wrote {count} rows to {args.out}", file=sys.stderr)
    else:
        write_sweep(sys.stdout, args.mode, rows)
    return EXIT_OK


# -- audit -----------------------------------------------------------------------

def cmd_audit(args) -> int:
    root, task = protocol_io.load(args.path)
    overlaps = (args.mu, args.nu, args.mu_prime, args.nu_prime)
    if any(v is not None for v in overlaps):
        if any(v is None for v in overlaps):
            raise PreconditionError("give all of --mu --nu --mu-prime --nu-prime, or none")
        s, t = _priors(args)
        task = LoccTask.from_overlaps(*overlaps, s, t)
    elif task is None:
        raise PreconditionError("protocol file carries no task; pass --mu --nu --mu-prime --nu-prime")
    elif args.s is not None or args.t is not None:
        s, t = _priors(args)
        task = LoccTask(*(getattr(task, f) for f in protocol_io.TASK_FIELDS), s, t)
    report = audit_bound(evaluate_exact(root, task), task)
    _print_table([
        ("efficiency", report.efficiency),
        ("bound", report.bound_value),
        ("max_rounds", str(report.max_rounds)),
        ("leaves", str(len(report.leaves))),
        ("flagged_leaves", str(len(report.flagged))),
        ("verdict", "bound satisfied" if report.bound_satisfied else "BOUND VIOLATED"),
    ])
    for rec in report.flagged:
        print(f"flagged: {'/'.join(('root',) + rec.path)} claims success with "
              f"fidelities A={fmt(rec.fidelity_alice)} B={fmt(rec.fidelity_bob)}")
    return EXIT_OK if report.bound_satisfied else EXIT_BOUND


# -- parser ----------------------------------------------------------------------

def _add_task_flags(p, defaults=None):
    d = defaults or {}
    p.add_argument("--mu", type=float, default=d.get("mu"), help="Alice's source overlap")
    p.add_argument("--nu", type=float, default=d.get("nu"), help="Bob's source overlap")
    p.add_argument("--mu-prime", type=float, default=d.get("mu_prime"), help="Alice's target overlap")
    p.add_argument("--nu-prime", type=float, default=d.get("nu_prime"), help="Bob's target overlap")
    p.add_argument("--s", type=float, help="prior of hypothesis phi (default 0.5)")
    p.add_argument("--t", type=float, help="prior of hypothesis psi (default 1 - s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loccsep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("efficiency", help="closed-form efficiencies and bounds")
    _add_task_flags(p)
    p.add_argument("--m", type=int, help="initial copies")
    p.add_argument("--n", type=int, help="final copies")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("construct", help="build the optimal separation channel or protocol P'")
    _add_task_flags(p)
    p.add_argument("--out", help="write the protocol JSON here")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="exact and Monte Carlo evaluation of protocol P'")
    _add_task_flags(p, {"mu": 0.5, "nu": 0.5, "mu_prime": 0.25, "nu_prime": 0.25})
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of global vs LOCC efficiencies as CSV")
    p.add_argument("--mode", choices=("separation", "cloning"), default="separation")
    for flag in ("--mu", "--nu"):
        p.add_argument(flag, type=parse_range, required=True, metavar="START:STOP:STEPS")
    for flag in ("--mu-prime", "--nu-prime", "--m", "--n"):
        p.add_argument(flag, type=parse_range, metavar="START:STOP:STEPS")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="evaluate a protocol file against the LOCC bound")
    p.add_argument("path")
    _add_task_flags(p)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LoccSepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
